//! Single-distribution benchmark models for the days-alive-and-at-home
//! outcome.
//!
//! Each benchmark pairs a logistic zero component (handling mortality and
//! other zero-day outcomes) with one positive-part law: a bounded count, a
//! rescaled proportion, or a flipped model of not-home days mapped back to
//! the home-day scale. Every benchmark supports an optional minimum-stay
//! shift that lowers the attainable maximum from `u` to `u − shift`.

use crate::composite::ComponentSelection;
use crate::dist::Law;
use crate::error::{Error, Result};
use crate::regression::{
    ComponentSpec, DesignMatrix, Family, FitResult, ObservationBound, ResponseData,
    ResponseStructure, ZeroHandling,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The five benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompetitorKind {
    /// Zero-adjusted beta-binomial on home days with a fixed trial count.
    ZeroAdjustedBetaBinomial,
    /// Zero-adjusted beta on the home-day fraction, discretized by rounding.
    ZeroAdjustedBeta,
    /// Log-normal on not-home days, rounded and flipped back.
    FlippedLogNormal,
    /// Zero-inflated Poisson on not-home days, flipped back (the inflation
    /// carries the ceiling spike of full home time).
    ZeroInflatedFlippedPoisson,
    /// Negative binomial on not-home days with a log-window offset, flipped.
    FlippedNegativeBinomial,
}

impl CompetitorKind {
    pub const ALL: [CompetitorKind; 5] = [
        CompetitorKind::ZeroAdjustedBetaBinomial,
        CompetitorKind::ZeroAdjustedBeta,
        CompetitorKind::FlippedLogNormal,
        CompetitorKind::ZeroInflatedFlippedPoisson,
        CompetitorKind::FlippedNegativeBinomial,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CompetitorKind::ZeroAdjustedBetaBinomial => "zero-adjusted-beta-binomial",
            CompetitorKind::ZeroAdjustedBeta => "zero-adjusted-beta",
            CompetitorKind::FlippedLogNormal => "flipped-log-normal",
            CompetitorKind::ZeroInflatedFlippedPoisson => "zero-inflated-flipped-poisson",
            CompetitorKind::FlippedNegativeBinomial => "flipped-negative-binomial",
        }
    }

    fn positive_family(self) -> Family {
        match self {
            CompetitorKind::ZeroAdjustedBetaBinomial => Family::BetaBinomial,
            CompetitorKind::ZeroAdjustedBeta => Family::BetaProportion,
            CompetitorKind::FlippedLogNormal => Family::LogNormal,
            CompetitorKind::ZeroInflatedFlippedPoisson => Family::Poisson,
            CompetitorKind::FlippedNegativeBinomial => Family::NegativeBinomial,
        }
    }

    /// Whether the positive part models not-home days (and is therefore
    /// mapped back through `dah = width − y`).
    pub fn is_flipped(self) -> bool {
        matches!(
            self,
            CompetitorKind::FlippedLogNormal
                | CompetitorKind::ZeroInflatedFlippedPoisson
                | CompetitorKind::FlippedNegativeBinomial
        )
    }
}

/// Intercept-only positive-part specification for a benchmark kind on a
/// window of `u` days with the given minimum-stay shift.
pub fn positive_template(kind: CompetitorKind, u: i64, shift: i64) -> ComponentSpec {
    let width = u - shift;
    let structure = match kind {
        CompetitorKind::ZeroAdjustedBetaBinomial => ResponseStructure {
            zero: ZeroHandling::Truncated,
            trials: ObservationBound::Fixed(width),
            ..ResponseStructure::default()
        },
        CompetitorKind::ZeroInflatedFlippedPoisson => ResponseStructure {
            zero: ZeroHandling::Inflated,
            ..ResponseStructure::default()
        },
        _ => ResponseStructure::plain(),
    };
    let mut spec = ComponentSpec::intercept_only(kind.positive_family(), structure);
    if kind == CompetitorKind::FlippedNegativeBinomial {
        spec.params[0].offset = (width as f64).ln();
    }
    spec
}

/// A benchmark model: the zero logistic plus the kind-specific positive
/// part, with the window constants needed to move between scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompetitorSpec {
    pub kind: CompetitorKind,
    pub u: i64,
    /// Minimum-stay shift: the attainable maximum is `u − shift`.
    pub shift: i64,
    /// Logistic model of P(dah = 0).
    pub zero: ComponentSpec,
    /// `None` when every observed outcome was zero.
    pub positive: Option<ComponentSpec>,
}

impl CompetitorSpec {
    /// Largest attainable outcome.
    pub fn width(&self) -> i64 {
        self.u - self.shift
    }

    pub fn validate(&self) -> Result<()> {
        if self.u <= 0 || self.shift < 0 || self.shift >= self.u {
            return Err(Error::ParameterDomain(format!(
                "window u={} with shift {}",
                self.u, self.shift
            )));
        }
        if self.zero.family != Family::Bernoulli {
            return Err(Error::InvalidDesign("zero component must be binary".into()));
        }
        let Some(positive) = &self.positive else {
            return Ok(());
        };
        if positive.family != self.kind.positive_family() {
            return Err(Error::InvalidDesign(format!(
                "{} positive part uses {:?}, got {:?}",
                self.kind.label(),
                self.kind.positive_family(),
                positive.family
            )));
        }
        match self.kind {
            CompetitorKind::ZeroAdjustedBetaBinomial => {
                if positive.structure.zero != ZeroHandling::Truncated
                    || positive.structure.trials != ObservationBound::Fixed(self.width())
                {
                    return Err(Error::InvalidDesign(
                        "bounded-count positive part must be zero-truncated with the window \
                         as its trial count"
                            .into(),
                    ));
                }
            }
            CompetitorKind::ZeroInflatedFlippedPoisson => {
                if positive.structure.zero != ZeroHandling::Inflated {
                    return Err(Error::InvalidDesign(
                        "flipped Poisson positive part must be zero-inflated".into(),
                    ));
                }
            }
            _ => {
                if positive.structure.zero != ZeroHandling::None {
                    return Err(Error::InvalidDesign(
                        "positive part takes no zero-mass structure for this kind".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// P(dah = 0) at a covariate row.
    pub fn zero_probability(&self, row: &[f64], clamped: bool) -> f64 {
        self.zero.values_at(row, clamped)[0]
    }

    /// The positive-part law on the outcome scale (before the zero hurdle).
    fn positive_dah_law(&self, row: &[f64], clamped: bool) -> Result<Law> {
        let positive = self
            .positive
            .as_ref()
            .expect("caller checks positive part presence");
        let width = self.width();
        let trials = (self.kind == CompetitorKind::ZeroAdjustedBetaBinomial).then_some(width);
        let fitted_scale = positive.law_at(row, None, trials, clamped)?;
        match self.kind {
            CompetitorKind::ZeroAdjustedBetaBinomial => Ok(fitted_scale),
            CompetitorKind::ZeroAdjustedBeta => fitted_scale.rounded(width as f64),
            CompetitorKind::FlippedLogNormal => fitted_scale.rounded(1.0)?.reflected(width),
            CompetitorKind::ZeroInflatedFlippedPoisson
            | CompetitorKind::FlippedNegativeBinomial => fitted_scale.reflected(width),
        }
    }

    /// The full outcome law at a covariate row: the zero hurdle around the
    /// kind-specific positive part.
    pub fn dah_law(&self, row: &[f64], clamped: bool) -> Result<Law> {
        let zero_prob = self.zero_probability(row, clamped);
        match &self.positive {
            None => Law::categorical(vec![1.0]),
            Some(_) => self.positive_dah_law(row, clamped)?.zero_adjusted(zero_prob),
        }
    }

    /// Outcome pmf over `0..=u` at a covariate row (days above the width
    /// carry zero mass).
    pub fn dah_pmf(&self, row: &[f64]) -> Result<Vec<f64>> {
        let law = self.dah_law(row, true)?;
        let mut pmf = law.pmf_table(self.width());
        pmf.resize((self.u + 1) as usize, 0.0);
        Ok(pmf)
    }

    /// Draw one outcome per design row.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        design: &DesignMatrix,
        rng: &mut R,
    ) -> Result<Vec<i64>> {
        (0..design.nrows())
            .map(|i| Ok(self.dah_law(design.row(i), true)?.sample(rng)))
            .collect()
    }
}

/// Plan for fitting one benchmark: window constants, the penalty, and the
/// per-part selection strategies. Templates for the positive part come from
/// [`positive_template`].
#[derive(Debug, Clone)]
pub struct CompetitorPlan {
    pub kind: CompetitorKind,
    pub u: i64,
    pub shift: i64,
    pub k_penalty: f64,
    pub zero: ComponentSelection,
    pub positive: ComponentSelection,
}

/// A fitted benchmark with per-part inference.
#[derive(Debug, Clone)]
pub struct CompetitorFit {
    pub spec: CompetitorSpec,
    pub zero: FitResult,
    pub positive: Option<FitResult>,
    pub traces: Vec<String>,
    pub warnings: Vec<String>,
}

/// Fit a benchmark to observed outcomes: the zero logistic on the full
/// cohort, then the kind-specific positive part on the positive subset
/// after its scale transform.
pub fn fit_competitor(
    dah: &[i64],
    design: &DesignMatrix,
    plan: &CompetitorPlan,
) -> Result<CompetitorFit> {
    if dah.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "outcome values".into(),
            expected: design.nrows(),
            found: dah.len(),
        });
    }
    let width = plan.u - plan.shift;
    if let Some((i, &bad)) = dah.iter().enumerate().find(|&(_, &d)| d < 0 || d > width) {
        return Err(Error::OutOfSupport { index: i, value: bad as f64 });
    }

    let mut traces = Vec::new();
    let mut warnings = Vec::new();

    let zeros: Vec<f64> = dah.iter().map(|&d| f64::from(u8::from(d == 0))).collect();
    let n_zero = zeros.iter().filter(|&&z| z == 1.0).count();
    if n_zero == dah.len() {
        warnings.push("all outcomes are zero; positive part unfit".into());
    } else if n_zero == 0 {
        warnings.push("no zero outcomes; zero component sits on its boundary".into());
    }
    let zero_fit = plan.zero.run(
        design,
        &ResponseData::plain(&zeros),
        plan.k_penalty,
        &mut traces,
        &mut warnings,
        "zero",
    )?;

    let positive_rows: Vec<usize> = (0..dah.len()).filter(|&i| dah[i] > 0).collect();
    let (positive_fit, positive_spec) = if positive_rows.is_empty() {
        (None, None)
    } else {
        let sub_design = design.select_rows(&positive_rows)?;
        let m = positive_rows.len() as f64;
        let y: Vec<f64> = positive_rows
            .iter()
            .map(|&i| {
                let d = dah[i] as f64;
                match plan.kind {
                    CompetitorKind::ZeroAdjustedBetaBinomial => d,
                    CompetitorKind::ZeroAdjustedBeta => {
                        let q = d / width as f64;
                        // Boundary shrink: exact endpoint proportions move
                        // to the interior before the continuous fit.
                        if q >= 1.0 || q <= 0.0 {
                            (q * (m - 1.0) + 0.5) / m
                        } else {
                            q
                        }
                    }
                    CompetitorKind::FlippedLogNormal => (width as f64 - d).max(0.5),
                    CompetitorKind::ZeroInflatedFlippedPoisson
                    | CompetitorKind::FlippedNegativeBinomial => width as f64 - d,
                }
            })
            .collect();
        let fit = plan.positive.run(
            &sub_design,
            &ResponseData::plain(&y),
            plan.k_penalty,
            &mut traces,
            &mut warnings,
            "positive",
        )?;
        let spec = fit.spec.clone();
        (Some(fit), Some(spec))
    };

    let spec = CompetitorSpec {
        kind: plan.kind,
        u: plan.u,
        shift: plan.shift,
        zero: zero_fit.spec.clone(),
        positive: positive_spec,
    };
    spec.validate()?;
    Ok(CompetitorFit { spec, zero: zero_fit, positive: positive_fit, traces, warnings })
}
