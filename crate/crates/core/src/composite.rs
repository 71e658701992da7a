//! The composite days-alive-and-at-home model.
//!
//! A follow-up window of `u` days decomposes into a mandatory protocol stay
//! of up to `p_tilde` days, an optional extended initial stay, and optional
//! post-discharge care days. Death, the extended stay, the protocol stay,
//! and subsequent care are modeled as separate regression components whose
//! likelihood factorizes; the outcome is
//! `dah = (u - y_i - y_s) * 1(alive)`, with zeros arising from death,
//! censored initial stays, and care that fills the remaining window.

use crate::dist::Law;
use crate::error::{Error, Result};
use crate::regression::{
    fit_component, stepwise_select, Candidate, ComponentSpec, DesignMatrix, Family, FitResult,
    Link, ObservationBound, ParamSpec, ResponseData, ResponseStructure, ZeroHandling,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully decomposed outcome record for one patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientComponents {
    pub dead: bool,
    /// Protocol discharge day for non-extended stays, in `0..=p_tilde`.
    pub protocol: i64,
    /// Whether the initial stay ran past the protocol window.
    pub extended: bool,
    /// Days of initial stay beyond the protocol window, censored at
    /// `u - p_tilde`.
    pub ye: i64,
    /// Total initial hospital stay.
    pub yi: i64,
    pub care: bool,
    /// Subsequent-care days, bounded by `u - yi`.
    pub yc: i64,
    /// Days not at home after the initial discharge.
    pub ys: i64,
    pub dah: i64,
}

impl PatientComponents {
    /// Assemble a record from the four drawn quantities, deriving stays,
    /// flags, and the outcome, and checking every structural invariant.
    pub fn assemble(
        u: i64,
        p_tilde: i64,
        dead: bool,
        protocol: i64,
        ye: i64,
        yc: i64,
    ) -> Result<Self> {
        if !(0..=p_tilde).contains(&protocol) {
            return Err(Error::InvalidData(format!(
                "protocol stay {protocol} outside 0..={p_tilde}"
            )));
        }
        if !(0..=u - p_tilde).contains(&ye) {
            return Err(Error::InvalidData(format!(
                "extended stay {ye} outside 0..={}",
                u - p_tilde
            )));
        }
        let extended = ye > 0;
        if extended && protocol != p_tilde {
            return Err(Error::InvalidData(format!(
                "extended stay with protocol day {protocol} != {p_tilde}"
            )));
        }
        let yi = if extended { p_tilde + ye } else { protocol };
        let window = u - yi;
        if !(0..=window).contains(&yc) {
            return Err(Error::InvalidData(format!(
                "care days {yc} outside 0..={window} left by a {yi}-day stay"
            )));
        }
        let care = yc > 0;
        let ys = yc;
        let mut record = Self { dead, protocol, extended, ye, yi, care, yc, ys, dah: 0 };
        record.dah = dah_from_components(u, p_tilde, &record)?;
        Ok(record)
    }
}

/// Deterministic outcome evaluation: `(u - y_i - y_s) * 1(alive)`.
pub fn dah_from_components(u: i64, p_tilde: i64, c: &PatientComponents) -> Result<i64> {
    if c.yi < 0 || c.ys < 0 || c.yi + c.ys > u {
        return Err(Error::InvalidData(format!(
            "stays exceed the window: yi={} ys={} u={u}",
            c.yi, c.ys
        )));
    }
    if c.ye > u - p_tilde {
        return Err(Error::InvalidData(format!(
            "extended stay {} beyond censoring bound {}",
            c.ye,
            u - p_tilde
        )));
    }
    Ok(if c.dead { 0 } else { u - c.yi - c.ys })
}

/// Distribution of the protocol discharge day over `0..=p_tilde`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProtocolStay {
    /// Every non-extended patient leaves on this day.
    PointMass(i64),
    /// Probabilities for days `0..=p_tilde`.
    Categorical(Vec<f64>),
}

impl ProtocolStay {
    pub fn ln_pmf(&self, day: i64) -> f64 {
        match self {
            ProtocolStay::PointMass(d) => {
                if day == *d {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            ProtocolStay::Categorical(probs) => {
                if (0..probs.len() as i64).contains(&day) {
                    probs[day as usize].ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            ProtocolStay::PointMass(d) => *d,
            ProtocolStay::Categorical(probs) => {
                let mut u: f64 = rng.random();
                for (day, &p) in probs.iter().enumerate() {
                    u -= p;
                    if u <= 0.0 {
                        return day as i64;
                    }
                }
                probs.len() as i64 - 1
            }
        }
    }
}

/// The assembled composite model: window constants, one regression component
/// per process, and the design columns that carry the cross-component
/// extended-stay terms used by the care predictors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeModel {
    pub u: i64,
    pub p_tilde: i64,
    pub death: ComponentSpec,
    pub protocol: ProtocolStay,
    pub extended: ComponentSpec,
    /// `None` when care degenerated to "no patient ever receives care".
    pub care: Option<ComponentSpec>,
    /// Design column holding the observed/simulated extended stay.
    pub ye_column: Option<usize>,
    /// Design column holding the indicator of a zero extended stay.
    pub ye_zero_column: Option<usize>,
}

impl CompositeModel {
    pub fn validate(&self) -> Result<()> {
        if self.u <= 0 || self.p_tilde < 0 || self.p_tilde > self.u {
            return Err(Error::ParameterDomain(format!(
                "window u={} with protocol bound {}",
                self.u, self.p_tilde
            )));
        }
        if self.death.family != Family::Bernoulli {
            return Err(Error::InvalidDesign("death component must be binary".into()));
        }
        match self.extended.structure.censor {
            ObservationBound::Fixed(b) if b == self.u - self.p_tilde => {}
            _ => {
                return Err(Error::InvalidDesign(format!(
                    "extended stay must be censored at u - p_tilde = {}",
                    self.u - self.p_tilde
                )))
            }
        }
        if let Some(care) = &self.care {
            if care.family != Family::BetaBinomial
                || care.structure.trials != ObservationBound::PerObservation
            {
                return Err(Error::InvalidDesign(
                    "care component must be a bounded count with per-patient trials".into(),
                ));
            }
        }
        if let ProtocolStay::Categorical(probs) = &self.protocol {
            if probs.len() as i64 != self.p_tilde + 1 {
                return Err(Error::InvalidDesign(format!(
                    "protocol distribution needs {} day probabilities",
                    self.p_tilde + 1
                )));
            }
            if probs.iter().any(|&p| !(0.0..=1.0).contains(&p))
                || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(Error::InvalidDesign("protocol probabilities must sum to 1".into()));
            }
        }
        if let ProtocolStay::PointMass(d) = self.protocol {
            if !(0..=self.p_tilde).contains(&d) {
                return Err(Error::InvalidDesign(format!("protocol point mass {d} out of range")));
            }
        }
        Ok(())
    }

    fn required_columns(&self) -> usize {
        let mut max = 0;
        let mut scan = |spec: &ComponentSpec| {
            for p in &spec.params {
                for &c in &p.columns {
                    max = max.max(c + 1);
                }
            }
        };
        scan(&self.death);
        scan(&self.extended);
        if let Some(care) = &self.care {
            scan(care);
        }
        max = max.max(self.ye_column.map_or(0, |c| c + 1));
        max = max.max(self.ye_zero_column.map_or(0, |c| c + 1));
        max
    }

    fn patch_care_row(&self, row: &mut [f64], ye: i64) {
        if let Some(c) = self.ye_column {
            row[c] = ye as f64;
        }
        if let Some(c) = self.ye_zero_column {
            row[c] = if ye == 0 { 1.0 } else { 0.0 };
        }
    }

    fn care_law(&self, row: &[f64], ye: i64, trials: i64, clamped: bool) -> Result<Option<Law>> {
        if trials == 0 {
            return Ok(None);
        }
        let Some(care) = &self.care else {
            return Ok(None);
        };
        let mut patched = row.to_vec();
        self.patch_care_row(&mut patched, ye);
        care.law_at(&patched, None, Some(trials), clamped).map(Some)
    }

    fn extended_law(&self, row: &[f64], clamped: bool) -> Result<Law> {
        self.extended.law_at(row, Some(self.u - self.p_tilde), None, clamped)
    }

    fn death_probability(&self, row: &[f64], clamped: bool) -> f64 {
        self.death.values_at(row, clamped)[0]
    }

    /// Draw one patient at the given design row.
    pub fn simulate_patient<R: Rng + ?Sized>(
        &self,
        design: &DesignMatrix,
        row_index: usize,
        rng: &mut R,
    ) -> Result<PatientComponents> {
        self.simulate_from_row(design.row(row_index), rng)
    }

    /// Draw one patient from a raw covariate row (length must cover every
    /// component's columns).
    pub fn simulate_from_row<R: Rng + ?Sized>(
        &self,
        row: &[f64],
        rng: &mut R,
    ) -> Result<PatientComponents> {
        if row.len() < self.required_columns() {
            return Err(Error::DimensionMismatch {
                what: "covariate row".into(),
                expected: self.required_columns(),
                found: row.len(),
            });
        }
        let pi_death = self.death_probability(row, true);
        let dead = rng.random::<f64>() < pi_death;

        let ye = self.extended_law(row, true)?.sample(rng);
        let protocol = if ye > 0 { self.p_tilde } else { self.protocol.sample(rng) };
        let yi = if ye > 0 { self.p_tilde + ye } else { protocol };
        let window = self.u - yi;
        let yc = match self.care_law(row, ye, window, true)? {
            Some(law) => law.sample(rng),
            None => 0,
        };
        PatientComponents::assemble(self.u, self.p_tilde, dead, protocol, ye, yc)
    }

    /// Draw a whole cohort, one record per design row.
    pub fn simulate_cohort<R: Rng + ?Sized>(
        &self,
        design: &DesignMatrix,
        rng: &mut R,
    ) -> Result<Vec<PatientComponents>> {
        (0..design.nrows()).map(|i| self.simulate_patient(design, i, rng)).collect()
    }

    /// Exact outcome distribution at one covariate row: composes death, the
    /// protocol stay, the extended stay, and care into the pmf of `dah` over
    /// `0..=u`.
    pub fn dah_pmf(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() < self.required_columns() {
            return Err(Error::DimensionMismatch {
                what: "covariate row".into(),
                expected: self.required_columns(),
                found: row.len(),
            });
        }
        let pi_death = self.death_probability(row, true);
        let bound = self.u - self.p_tilde;
        let extended_table = self.extended_law(row, true)?.pmf_table(bound);
        let protocol_probs: Vec<(i64, f64)> = match &self.protocol {
            ProtocolStay::PointMass(d) => vec![(*d, 1.0)],
            ProtocolStay::Categorical(probs) => {
                probs.iter().enumerate().map(|(d, &p)| (d as i64, p)).collect()
            }
        };

        let mut alive = vec![0.0_f64; (self.u + 1) as usize];
        for (ye, &pe) in extended_table.iter().enumerate() {
            if pe == 0.0 {
                continue;
            }
            let ye = ye as i64;
            let stay_probs: Vec<(i64, f64)> = if ye > 0 {
                vec![(self.p_tilde + ye, pe)]
            } else {
                protocol_probs.iter().map(|&(d, p)| (d, pe * p)).collect()
            };
            for (yi, weight) in stay_probs {
                if weight == 0.0 {
                    continue;
                }
                let window = self.u - yi;
                match self.care_law(row, ye, window, true)? {
                    Some(law) => {
                        let care_table = law.pmf_table(window);
                        for (yc, &pc) in care_table.iter().enumerate() {
                            alive[(self.u - yi - yc as i64) as usize] += weight * pc;
                        }
                    }
                    None => alive[window as usize] += weight,
                }
            }
        }

        let mut pmf = vec![0.0_f64; (self.u + 1) as usize];
        for (d, &pa) in alive.iter().enumerate() {
            pmf[d] = (1.0 - pi_death) * pa;
        }
        pmf[0] += pi_death;
        Ok(pmf)
    }
}

/// Extend a baseline design with the two cross-component care predictors:
/// the observed extended stay and its zero indicator. Returns the augmented
/// design and the two new column indices.
pub fn augment_design_with_extended_stay(
    design: &DesignMatrix,
    ye: &[i64],
) -> Result<(DesignMatrix, usize, usize)> {
    if ye.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "extended-stay column".into(),
            expected: design.nrows(),
            found: ye.len(),
        });
    }
    let mut augmented = design.clone();
    let ye_values: Vec<f64> = ye.iter().map(|&v| v as f64).collect();
    let ye_zero: Vec<f64> = ye.iter().map(|&v| if v == 0 { 1.0 } else { 0.0 }).collect();
    let ye_col = augmented.push_column("y_e", &ye_values)?;
    let ye_zero_col = augmented.push_column("y_e=0", &ye_zero)?;
    Ok((augmented, ye_col, ye_zero_col))
}

/// Per-component log-likelihood decomposition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompositeLoglik {
    pub death: f64,
    pub protocol: f64,
    pub extended: f64,
    pub care: f64,
}

impl CompositeLoglik {
    pub fn total(&self) -> f64 {
        self.death + self.protocol + self.extended + self.care
    }
}

/// Factorized composite log-likelihood of fully observed component records.
/// The design must already carry the cross-component columns named by the
/// model, filled with the observed extended stays.
pub fn composite_log_likelihood(
    model: &CompositeModel,
    records: &[PatientComponents],
    design: &DesignMatrix,
) -> Result<CompositeLoglik> {
    model.validate()?;
    if records.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "component records".into(),
            expected: design.nrows(),
            found: records.len(),
        });
    }
    let mut out = CompositeLoglik { death: 0.0, protocol: 0.0, extended: 0.0, care: 0.0 };
    for (i, record) in records.iter().enumerate() {
        let row = design.row(i);
        let check = PatientComponents::assemble(
            model.u,
            model.p_tilde,
            record.dead,
            record.protocol,
            record.ye,
            record.yc,
        )
        .map_err(|e| Error::InvalidData(format!("record {i}: {e}")))?;
        if check != *record {
            return Err(Error::InvalidData(format!(
                "record {i}: derived fields disagree with stored components"
            )));
        }

        let pi = model.death_probability(row, false);
        out.death += if record.dead { pi.ln() } else { (1.0 - pi).ln() };

        if !record.extended {
            out.protocol += model.protocol.ln_pmf(record.protocol);
        }

        let lp = model.extended_law(row, false)?.ln_pmf(record.ye);
        if lp == f64::NEG_INFINITY {
            return Err(Error::OutOfSupport { index: i, value: record.ye as f64 });
        }
        out.extended += lp;

        let window = model.u - record.yi;
        match model.care_law(row, record.ye, window, false)? {
            Some(law) => {
                let lc = law.ln_pmf(record.yc);
                if lc == f64::NEG_INFINITY {
                    return Err(Error::OutOfSupport { index: i, value: record.yc as f64 });
                }
                out.care += lc;
            }
            None => {
                if record.yc != 0 {
                    return Err(Error::InvalidData(format!(
                        "record {i}: care days {} with no care window or model",
                        record.yc
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// How one regression component is chosen during a composite fit.
#[derive(Debug, Clone)]
pub enum ComponentSelection {
    Fixed(ComponentSpec),
    Stepwise { base: ComponentSpec, candidates: Vec<Candidate> },
}

impl ComponentSelection {
    pub(crate) fn run(
        &self,
        design: &DesignMatrix,
        data: &ResponseData,
        k_penalty: f64,
        traces: &mut Vec<String>,
        warnings: &mut Vec<String>,
        tag: &str,
    ) -> Result<FitResult> {
        match self {
            ComponentSelection::Fixed(spec) => fit_component(spec, design, data, k_penalty)
                .map_err(|e| Error::NonConvergence(format!("{tag} component: {e}"))),
            ComponentSelection::Stepwise { base, candidates } => {
                let out = stepwise_select(base, design, data, candidates, k_penalty)
                    .map_err(|e| Error::NonConvergence(format!("{tag} component: {e}")))?;
                traces.extend(out.trace.into_iter().map(|t| format!("{tag}: {t}")));
                warnings.extend(out.warnings.into_iter().map(|w| format!("{tag}: {w}")));
                Ok(out.fit)
            }
        }
    }
}

/// Plan for a composite fit: window constants, per-component selection, the
/// GAIC penalty, and where the cross-component care columns live in the
/// design.
#[derive(Debug, Clone)]
pub struct CompositeFitPlan {
    pub u: i64,
    pub p_tilde: i64,
    pub k_penalty: f64,
    pub death: ComponentSelection,
    pub extended: ComponentSelection,
    pub care: ComponentSelection,
    pub ye_column: usize,
    pub ye_zero_column: usize,
}

/// A fitted composite model with its per-component inference.
#[derive(Debug, Clone)]
pub struct CompositeFit {
    pub model: CompositeModel,
    pub death: FitResult,
    pub extended: FitResult,
    /// `None` when no patient had any care days.
    pub care: Option<FitResult>,
    pub traces: Vec<String>,
    pub warnings: Vec<String>,
}

/// Fit every component independently on fully observed records. The design
/// must already carry the observed extended-stay columns (see
/// [`augment_design_with_extended_stay`]) at the indices named in the plan.
pub fn fit_composite(
    records: &[PatientComponents],
    design: &DesignMatrix,
    plan: &CompositeFitPlan,
) -> Result<CompositeFit> {
    if records.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "component records".into(),
            expected: design.nrows(),
            found: records.len(),
        });
    }
    let mut traces = Vec::new();
    let mut warnings = Vec::new();

    let dead: Vec<f64> = records.iter().map(|r| f64::from(u8::from(r.dead))).collect();
    let death_fit = plan.death.run(
        design,
        &ResponseData::plain(&dead),
        plan.k_penalty,
        &mut traces,
        &mut warnings,
        "death",
    )?;

    let ye: Vec<f64> = records.iter().map(|r| r.ye as f64).collect();
    let extended_fit = plan.extended.run(
        design,
        &ResponseData::plain(&ye),
        plan.k_penalty,
        &mut traces,
        &mut warnings,
        "extended-stay",
    )?;

    // Protocol stay: categorical MLE over non-extended patients, collapsing
    // to a point mass when nobody leaves before the protocol bound.
    let protocol_days: Vec<i64> =
        records.iter().filter(|r| !r.extended).map(|r| r.protocol).collect();
    let protocol = if protocol_days.iter().all(|&d| d == plan.p_tilde) {
        if protocol_days.is_empty() {
            warnings.push("no non-extended stays observed; protocol fixed at bound".into());
        } else {
            warnings.push("no discharge before the protocol bound; point mass used".into());
        }
        ProtocolStay::PointMass(plan.p_tilde)
    } else {
        let mut counts = vec![0.0_f64; (plan.p_tilde + 1) as usize];
        for &d in &protocol_days {
            counts[d as usize] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        ProtocolStay::Categorical(counts.into_iter().map(|c| c / total).collect())
    };

    // Care: fitted on patients with a positive post-discharge window.
    let eligible: Vec<usize> = (0..records.len())
        .filter(|&i| model_window(plan.u, &records[i]) > 0)
        .collect();
    let any_care = records.iter().any(|r| r.yc > 0);
    let (care_fit, care_spec) = if !any_care {
        warnings.push("no care days observed; care component degenerates to zero".into());
        (None, None)
    } else {
        let sub_design = design.select_rows(&eligible)?;
        let yc: Vec<f64> = eligible.iter().map(|&i| records[i].yc as f64).collect();
        let trials: Vec<i64> = eligible.iter().map(|&i| model_window(plan.u, &records[i])).collect();
        let data = ResponseData { y: &yc, bounds: None, trials: Some(&trials) };
        let fit = plan.care.run(
            &sub_design,
            &data,
            plan.k_penalty,
            &mut traces,
            &mut warnings,
            "care",
        )?;
        let spec = fit.spec.clone();
        (Some(fit), Some(spec))
    };

    let model = CompositeModel {
        u: plan.u,
        p_tilde: plan.p_tilde,
        death: death_fit.spec.clone(),
        protocol,
        extended: extended_fit.spec.clone(),
        care: care_spec,
        ye_column: Some(plan.ye_column),
        ye_zero_column: Some(plan.ye_zero_column),
    };
    model.validate()?;
    Ok(CompositeFit { model, death: death_fit, extended: extended_fit, care: care_fit, traces, warnings })
}

fn model_window(u: i64, record: &PatientComponents) -> i64 {
    u - record.yi
}

/// Column layout of the canonical covariate design: intercept, four binary
/// baseline covariates, two country dummies, the BMI-by-treatment product,
/// and the two cross-component care columns.
pub const REFERENCE_COLUMNS: [&str; 10] = [
    "(intercept)",
    "age",
    "treatment",
    "bmi",
    "sex",
    "country:au",
    "country:nz",
    "bmi:treatment",
    "y_e",
    "y_e=0",
];

const REF_YE: usize = 8;
const REF_YE_ZERO: usize = 9;

/// The canonical fitted composite model: a 90-day window with a 4-day
/// protocol stay, an intercept-only death rate of 1%, a zero-inflated
/// censored count for the extended stay, and a zero-adjusted bounded count
/// for subsequent care with cross-component extended-stay predictors.
pub fn reference_model() -> CompositeModel {
    let death = ComponentSpec {
        family: Family::Bernoulli,
        structure: ResponseStructure::plain(),
        params: vec![ParamSpec {
            name: "mu".into(),
            link: Link::Logit,
            columns: vec![0],
            beta: vec![-4.595],
            offset: 0.0,
        }],
    };

    let extended = ComponentSpec {
        family: Family::PoissonInverseGaussian,
        structure: ResponseStructure {
            zero: ZeroHandling::Inflated,
            censor: ObservationBound::Fixed(86),
            ..ResponseStructure::default()
        },
        params: vec![
            ParamSpec {
                name: "mu".into(),
                link: Link::Log,
                columns: vec![0, 1, 2, 3, 4, 5, 6, 7],
                beta: vec![0.935, 0.939, -1.236, -0.629, 1.166, 1.136, 0.192, 1.733],
                offset: 0.0,
            },
            ParamSpec {
                name: "sigma".into(),
                link: Link::Log,
                columns: vec![0, 2, 3, 4, 5, 6, 7],
                beta: vec![1.475, -1.417, -1.088, 1.134, 0.225, -1.530, 2.311],
                offset: 0.0,
            },
            ParamSpec {
                name: "nu".into(),
                link: Link::Logit,
                columns: vec![0],
                beta: vec![-36.040],
                offset: 0.0,
            },
        ],
    };

    let care = ComponentSpec {
        family: Family::BetaBinomial,
        structure: ResponseStructure {
            zero: ZeroHandling::Adjusted,
            trials: ObservationBound::PerObservation,
            ..ResponseStructure::default()
        },
        params: vec![
            ParamSpec {
                name: "mu".into(),
                link: Link::Logit,
                columns: vec![0, REF_YE],
                beta: vec![-2.917, 0.070],
                offset: 0.0,
            },
            ParamSpec {
                name: "sigma".into(),
                link: Link::Log,
                columns: vec![0, 2, REF_YE_ZERO],
                beta: vec![-36.075, -1.831, 34.785],
                offset: 0.0,
            },
            ParamSpec {
                name: "nu".into(),
                link: Link::Logit,
                columns: vec![0, 5, 6, REF_YE_ZERO],
                beta: vec![2.762, -0.412, -1.120, -1.427],
                offset: 0.0,
            },
        ],
    };

    CompositeModel {
        u: 90,
        p_tilde: 4,
        death,
        protocol: ProtocolStay::PointMass(4),
        extended,
        care: Some(care),
        ye_column: Some(REF_YE),
        ye_zero_column: Some(REF_YE_ZERO),
    }
}

/// Draw a cohort of covariate rows matching [`REFERENCE_COLUMNS`]: balanced
/// binary baseline covariates, a three-level country mix, the interaction
/// product, and zeroed cross-component columns.
pub fn sample_reference_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DesignMatrix {
    let names: Vec<String> = REFERENCE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); names.len()];
    for _ in 0..n {
        let age = f64::from(u8::from(rng.random::<f64>() < 0.5));
        let treatment = f64::from(u8::from(rng.random::<f64>() < 0.5));
        let bmi = f64::from(u8::from(rng.random::<f64>() < 0.5));
        let sex = f64::from(u8::from(rng.random::<f64>() < 0.5));
        let country: f64 = rng.random();
        let (au, nz) = if country < 0.4 {
            (0.0, 0.0)
        } else if country < 0.7 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let values =
            [1.0, age, treatment, bmi, sex, au, nz, bmi * treatment, 0.0, 0.0];
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
    }
    DesignMatrix::from_columns(names, columns).expect("fixed layout")
}
