//! GAIC-guided predictor selection for component models.
//!
//! Forward steps run per distribution parameter in canonical order (`mu`,
//! then `sigma`, then `nu`), each adding the single best candidate term while
//! the criterion improves by more than a tolerance; a single backward
//! elimination pass over all parameters follows. Candidate terms move as
//! whole column groups, and an interaction term is only eligible while its
//! prerequisite main effects are present.

use super::design::DesignMatrix;
use super::fit::{fit_component, ComponentSpec, FitResult, ResponseData};
use crate::error::Result;

/// A selectable term: one or more design columns that enter and leave
/// together, plus the labels of terms that must already be included
/// (marginality prerequisites for interactions).
#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: String,
    pub columns: Vec<usize>,
    pub requires: Vec<String>,
}

impl Candidate {
    pub fn main(label: &str, columns: Vec<usize>) -> Self {
        Self { label: label.into(), columns, requires: Vec::new() }
    }

    pub fn interaction(label: &str, columns: Vec<usize>, requires: Vec<String>) -> Self {
        Self { label: label.into(), columns, requires }
    }
}

/// Outcome of a stepwise search: the selected fit plus a human-readable step
/// trace and any warnings from skipped candidate fits.
#[derive(Debug, Clone)]
pub struct StepwiseFit {
    pub fit: FitResult,
    pub trace: Vec<String>,
    pub warnings: Vec<String>,
}

const IMPROVEMENT_TOL: f64 = 1e-6;

fn add_term(spec: &ComponentSpec, param: usize, candidate: &Candidate) -> ComponentSpec {
    let mut out = spec.clone();
    for &c in &candidate.columns {
        out.params[param].columns.push(c);
        out.params[param].beta.push(0.0);
    }
    out
}

fn remove_term(spec: &ComponentSpec, param: usize, candidate: &Candidate) -> ComponentSpec {
    let mut out = spec.clone();
    for &c in &candidate.columns {
        if let Some(pos) = out.params[param].columns.iter().position(|&x| x == c) {
            out.params[param].columns.remove(pos);
            out.params[param].beta.remove(pos);
        }
    }
    out
}

/// Select predictors for every distribution parameter of `base` by
/// forward-then-backward GAIC search over `candidates`.
///
/// `base` is usually an intercept-only spec; its fit is the search's
/// starting point, so the returned criterion never exceeds the base fit's.
/// Ties between equally improving candidates resolve to the earliest in
/// `candidates` (column order). A candidate whose fit fails is skipped with
/// a warning.
pub fn stepwise_select(
    base: &ComponentSpec,
    design: &DesignMatrix,
    data: &ResponseData,
    candidates: &[Candidate],
    k_penalty: f64,
) -> Result<StepwiseFit> {
    let mut current = fit_component(base, design, data, k_penalty)?;
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut included: Vec<Vec<usize>> = vec![Vec::new(); base.params.len()];

    // Forward passes, one parameter at a time.
    for param in 0..base.params.len() {
        let param_name = base.params[param].name.clone();
        loop {
            let mut best: Option<(usize, FitResult)> = None;
            for (ci, candidate) in candidates.iter().enumerate() {
                if included[param].contains(&ci) {
                    continue;
                }
                let satisfied = candidate.requires.iter().all(|need| {
                    included[param].iter().any(|&ii| candidates[ii].label == *need)
                });
                if !satisfied {
                    continue;
                }
                let trial = add_term(&current.spec, param, candidate);
                match fit_component(&trial, design, data, k_penalty) {
                    Ok(fit) => {
                        if best.as_ref().is_none_or(|(_, b)| fit.gaic < b.gaic) {
                            best = Some((ci, fit));
                        }
                    }
                    Err(e) => warnings.push(format!(
                        "skipped {param_name} candidate {}: {e}",
                        candidate.label
                    )),
                }
            }
            match best {
                Some((ci, fit)) if current.gaic - fit.gaic > IMPROVEMENT_TOL => {
                    trace.push(format!(
                        "{param_name}: + {} ({:.4} -> {:.4})",
                        candidates[ci].label, current.gaic, fit.gaic
                    ));
                    included[param].push(ci);
                    current = fit;
                }
                _ => break,
            }
        }
    }

    // One backward-elimination sweep across all parameters.
    for param in 0..base.params.len() {
        let param_name = base.params[param].name.clone();
        let snapshot = included[param].clone();
        for &ci in &snapshot {
            if !included[param].contains(&ci) {
                continue;
            }
            let needed_by_included = included[param].iter().any(|&other| {
                other != ci
                    && candidates[other]
                        .requires
                        .iter()
                        .any(|need| *need == candidates[ci].label)
            });
            if needed_by_included {
                continue;
            }
            let trial = remove_term(&current.spec, param, &candidates[ci]);
            match fit_component(&trial, design, data, k_penalty) {
                Ok(fit) if current.gaic - fit.gaic > IMPROVEMENT_TOL => {
                    trace.push(format!(
                        "{param_name}: - {} ({:.4} -> {:.4})",
                        candidates[ci].label, current.gaic, fit.gaic
                    ));
                    included[param].retain(|&x| x != ci);
                    current = fit;
                }
                Ok(_) => {}
                Err(e) => warnings.push(format!(
                    "skipped {param_name} removal of {}: {e}",
                    candidates[ci].label
                )),
            }
        }
    }

    Ok(StepwiseFit { fit: current, trace, warnings })
}
