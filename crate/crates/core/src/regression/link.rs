//! Link functions mapping distribution parameters to the unconstrained
//! linear-predictor scale.

use serde::{Deserialize, Serialize};

/// Linear predictors beyond ±35 on the logit scale are numerically degenerate
/// (inverse-logit lands within 2e-16 of the boundary), so sampling clamps
/// there and treats probabilities below 1e-15 as exact zeros.
pub const LOGIT_CLAMP: f64 = 35.0;

/// A one-to-one map between a parameter's domain and ℝ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    /// (0, 1) ↔ ℝ via log-odds.
    Logit,
    /// (0, ∞) ↔ ℝ.
    Log,
    /// ℝ ↔ ℝ.
    Identity,
}

impl Link {
    /// Map a parameter value to the linear-predictor scale.
    pub fn apply(self, value: f64) -> f64 {
        match self {
            Link::Logit => (value / (1.0 - value)).ln(),
            Link::Log => value.ln(),
            Link::Identity => value,
        }
    }

    /// Map a linear predictor back to the parameter domain.
    pub fn invert(self, eta: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Log => eta.exp(),
            Link::Identity => eta,
        }
    }

    /// Inverse link as used when building sampling laws: the logit scale is
    /// clamped to ±[`LOGIT_CLAMP`] first, and probabilities that land below
    /// 1e-15 collapse to exactly 0 (their complements to exactly 1).
    pub fn invert_clamped(self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                let p = Link::Logit.invert(eta.clamp(-LOGIT_CLAMP, LOGIT_CLAMP));
                if p < 1e-15 {
                    0.0
                } else if 1.0 - p < 1e-15 {
                    1.0
                } else {
                    p
                }
            }
            _ => self.invert(eta),
        }
    }
}
