//! Residual and predictive-check diagnostics: normalized randomized
//! quantile residuals, detrended (worm) Q–Q tables with approximate
//! pointwise bands, and the resampling Q–Q predictive check with its
//! integrated discrepancy summary.

use crate::composite::CompositeModel;
use crate::competitors::CompetitorSpec;
use crate::dist::Law;
use crate::error::{Error, Result};
use crate::regression::{ComponentSpec, DesignMatrix, ObservationBound, ResponseData};
use crate::stats::{empirical_quantile, normal_pdf, normal_quantile};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Normalized randomized quantile residuals for one model component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSet {
    pub component: String,
    /// Residuals in observation order.
    pub residuals: Vec<f64>,
    /// Ranking permutation: `order[k]` is the observation index of the
    /// k-th smallest residual.
    pub order: Vec<usize>,
}

impl ResidualSet {
    pub fn new(component: &str, residuals: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..residuals.len()).collect();
        order.sort_by(|&a, &b| {
            residuals[a].partial_cmp(&residuals[b]).expect("finite residuals")
        });
        Self { component: component.to_string(), residuals, order }
    }

    pub fn sorted(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.residuals[i]).collect()
    }
}

/// Residuals that are standard normal under a correctly specified model:
/// for discrete laws the cdf jump at the observation is smoothed with one
/// uniform draw before the probit transform; continuous laws map through
/// their cdf directly.
pub fn randomized_quantile_residuals<R: Rng + ?Sized>(
    laws: &[Law],
    y: &[f64],
    component: &str,
    rng: &mut R,
) -> Result<ResidualSet> {
    if laws.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "per-observation laws".into(),
            expected: y.len(),
            found: laws.len(),
        });
    }
    let mut residuals = Vec::with_capacity(y.len());
    for (i, (law, &yi)) in laws.iter().zip(y).enumerate() {
        let u = if law.is_discrete() {
            let k = yi.round();
            if (k - yi).abs() > 1e-9 {
                return Err(Error::InvalidData(format!(
                    "observation {i} ({yi}) is not an integer for a discrete law"
                )));
            }
            let k = k as i64;
            let hi = law.cdf(k);
            let lo = law.cdf(k - 1);
            let v = rng.random::<f64>();
            if hi > lo {
                lo + v * (hi - lo)
            } else if law.ln_pmf(k).is_finite() {
                // Positive mass so deep in a tail that the cdf interval
                // collapses in floating point: the residual saturates.
                hi
            } else {
                return Err(Error::Numerical(format!(
                    "zero-width cdf interval at observation {i} (value {yi})"
                )));
            }
        } else {
            let u = law.cdf_real(yi);
            if u > 0.0 && u < 1.0 {
                u
            } else if law.ln_pdf(yi).is_finite() {
                u
            } else {
                return Err(Error::Numerical(format!(
                    "degenerate cdf value {u} at observation {i} (value {yi})"
                )));
            }
        };
        residuals.push(normal_quantile(u.clamp(1e-15, 1.0 - 1e-15)));
    }
    Ok(ResidualSet::new(component, residuals))
}

/// Per-observation laws of a fitted regression component, resolving the
/// censoring and trial rules against the observed data.
pub fn component_laws(
    spec: &ComponentSpec,
    design: &DesignMatrix,
    data: &ResponseData,
) -> Result<Vec<Law>> {
    let resolve = |rule: ObservationBound, per: Option<&[i64]>, i: usize| -> Result<Option<i64>> {
        match rule {
            ObservationBound::None => Ok(None),
            ObservationBound::Fixed(b) => Ok(Some(b)),
            ObservationBound::PerObservation => per
                .map(|v| Some(v[i]))
                .ok_or_else(|| Error::InvalidData("missing per-observation values".into())),
        }
    };
    (0..design.nrows())
        .map(|i| {
            let bound = resolve(spec.structure.censor, data.bounds, i)?;
            let trials = resolve(spec.structure.trials, data.trials, i)?;
            spec.law_at(design.row(i), bound, trials, false)
        })
        .collect()
}

/// Residuals of a fitted regression component against its own data.
pub fn component_residuals<R: Rng + ?Sized>(
    spec: &ComponentSpec,
    design: &DesignMatrix,
    data: &ResponseData,
    component: &str,
    rng: &mut R,
) -> Result<ResidualSet> {
    let laws = component_laws(spec, design, data)?;
    randomized_quantile_residuals(&laws, data.y, component, rng)
}

/// One detrended Q–Q point: the unit-normal position, the residual's
/// deviation from it, and the approximate pointwise 95% band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WormPoint {
    pub z: f64,
    pub deviation: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Detrended Q–Q (worm plot) table: ordered residuals against unit-normal
/// quantiles at (i − ½)/n, with the order-statistic band
/// ±1.96·√(p(1−p)/n)/φ(z).
pub fn worm_plot_data(residuals: &ResidualSet) -> Result<Vec<WormPoint>> {
    let n = residuals.residuals.len();
    if n < 10 {
        return Err(Error::InvalidData(format!(
            "worm plot needs at least 10 residuals, got {n}"
        )));
    }
    let sorted = residuals.sorted();
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let p = (i as f64 + 0.5) / n as f64;
            let z = normal_quantile(p);
            let band = 1.96 * (p * (1.0 - p) / n as f64).sqrt() / normal_pdf(z);
            WormPoint { z, deviation: r - z, lower: -band, upper: band }
        })
        .collect())
}

/// Anything that can draw one outcome value at a covariate row.
pub trait DahSampler {
    fn sample_dah<R: Rng + ?Sized>(&self, row: &[f64], rng: &mut R) -> Result<i64>;
}

impl DahSampler for CompositeModel {
    fn sample_dah<R: Rng + ?Sized>(&self, row: &[f64], rng: &mut R) -> Result<i64> {
        Ok(self.simulate_from_row(row, rng)?.dah)
    }
}

impl DahSampler for CompetitorSpec {
    fn sample_dah<R: Rng + ?Sized>(&self, row: &[f64], rng: &mut R) -> Result<i64> {
        Ok(self.dah_law(row, true)?.sample(rng))
    }
}

/// Resampling Q–Q predictive check: bootstrap means of empirical and
/// model-simulated quantiles over a probability grid, with the pointwise
/// 2.5%/97.5% envelope of the model curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QQCheckResult {
    /// Grid p_k = k/(grid+1), k = 1..=grid.
    pub probabilities: Vec<f64>,
    /// Bootstrap mean of the data quantiles (x coordinate).
    pub empirical_mean: Vec<f64>,
    /// Bootstrap mean of the model quantiles (y coordinate).
    pub model_mean: Vec<f64>,
    pub envelope_lower: Vec<f64>,
    pub envelope_upper: Vec<f64>,
    pub replicates: usize,
    pub warnings: Vec<String>,
}

impl QQCheckResult {
    /// Whether the identity line lies inside the model envelope at grid
    /// point k, up to `tol`. Quantiles of a lattice-valued outcome move in
    /// whole steps, so at an atom the envelope can collapse to zero width;
    /// a tolerance of half the lattice step keeps sub-resolution gaps from
    /// counting as exits.
    pub fn identity_inside(&self, k: usize, tol: f64) -> bool {
        self.envelope_lower[k] - tol <= self.empirical_mean[k]
            && self.empirical_mean[k] <= self.envelope_upper[k] + tol
    }

    /// Fraction of grid points where the identity line is inside the
    /// envelope.
    pub fn identity_coverage(&self, tol: f64) -> f64 {
        let inside =
            (0..self.probabilities.len()).filter(|&k| self.identity_inside(k, tol)).count();
        inside as f64 / self.probabilities.len() as f64
    }

    /// Length of the longest contiguous run of grid points where the
    /// identity line leaves the envelope.
    pub fn longest_exit_run(&self, tol: f64) -> usize {
        let mut best = 0;
        let mut run = 0;
        for k in 0..self.probabilities.len() {
            if self.identity_inside(k, tol) {
                run = 0;
            } else {
                run += 1;
                best = best.max(run);
            }
        }
        best
    }
}

/// Run the resampling Q–Q check: per replicate, resample the observed
/// (outcome, covariate-row) pairs with replacement, simulate one synthetic
/// outcome per resampled row, and record both samples' quantiles over the
/// grid; report per-point means and the model-curve envelope.
pub fn resampling_qq_check<S: DahSampler, R: Rng + ?Sized>(
    model: &S,
    dah: &[i64],
    design: &DesignMatrix,
    replicates: usize,
    grid: usize,
    rng: &mut R,
) -> Result<QQCheckResult> {
    let n = dah.len();
    if n == 0 || grid == 0 || replicates == 0 {
        return Err(Error::InvalidData("empty data, grid, or replicate count".into()));
    }
    if n != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "outcome values".into(),
            expected: design.nrows(),
            found: dah.len(),
        });
    }
    let mut warnings = Vec::new();
    if replicates < 100 {
        warnings.push(format!(
            "{replicates} replicates make the envelope unstable; 100+ recommended"
        ));
    }

    let probabilities: Vec<f64> =
        (1..=grid).map(|k| k as f64 / (grid + 1) as f64).collect();
    let mut empirical_sum = vec![0.0_f64; grid];
    let mut model_sum = vec![0.0_f64; grid];
    let mut model_curves = vec![0.0_f64; grid * replicates];

    let mut resampled = vec![0.0_f64; n];
    let mut synthetic = vec![0.0_f64; n];
    for b in 0..replicates {
        for i in 0..n {
            let pick = rng.random_range(0..n);
            resampled[i] = dah[pick] as f64;
            synthetic[i] = model.sample_dah(design.row(pick), rng)? as f64;
        }
        resampled.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        synthetic.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        for (k, &p) in probabilities.iter().enumerate() {
            let eq = empirical_quantile(&resampled, p);
            let mq = empirical_quantile(&synthetic, p);
            empirical_sum[k] += eq;
            model_sum[k] += mq;
            model_curves[k * replicates + b] = mq;
        }
    }

    let scale = 1.0 / replicates as f64;
    let empirical_mean: Vec<f64> = empirical_sum.iter().map(|s| s * scale).collect();
    let model_mean: Vec<f64> = model_sum.iter().map(|s| s * scale).collect();
    let mut envelope_lower = Vec::with_capacity(grid);
    let mut envelope_upper = Vec::with_capacity(grid);
    for k in 0..grid {
        let column = &mut model_curves[k * replicates..(k + 1) * replicates];
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        // At an atom of a discrete outcome the curve mean can land outside
        // the raw quantile band, so the band is widened to keep the model's
        // own centre inside its envelope.
        envelope_lower.push(empirical_quantile(column, 0.025).min(model_mean[k]));
        envelope_upper.push(empirical_quantile(column, 0.975).max(model_mean[k]));
    }

    Ok(QQCheckResult {
        probabilities,
        empirical_mean,
        model_mean,
        envelope_lower,
        envelope_upper,
        replicates,
        warnings,
    })
}

/// Area between the mean Q–Q curve and the identity line, in day units:
/// the trapezoidal integral of |model − empirical| against the empirical
/// coordinate.
pub fn integrated_discrepancy(qq: &QQCheckResult) -> f64 {
    let x = &qq.empirical_mean;
    let y = &qq.model_mean;
    let mut area = 0.0;
    for k in 1..x.len() {
        let f0 = (y[k - 1] - x[k - 1]).abs();
        let f1 = (y[k] - x[k]).abs();
        area += 0.5 * (f0 + f1) * (x[k] - x[k - 1]);
    }
    area
}
