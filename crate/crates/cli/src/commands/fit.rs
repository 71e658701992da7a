//! The `fit` command, plus the loading and model-fitting plumbing shared
//! with `diagnose` and `compare`: the composite model is fitted with the
//! full reference covariate structure (or a stepwise search over it), and
//! benchmark models with an intercept-only structure unless stepwise
//! selection is requested.

use crate::config::{ModelChoice, Settings};
use crate::data::{load_dataset, Dataset};
use crate::io::{csv_bytes, RunWriter};
use crate::Failure;
use dah_core::competitors::{fit_competitor, positive_template, CompetitorFit, CompetitorPlan};
use dah_core::composite::{
    augment_design_with_extended_stay, fit_composite, reference_model, ComponentSelection,
    CompositeFit, CompositeFitPlan, ProtocolStay,
};
use dah_core::regression::{
    Candidate, ComponentSpec, DesignMatrix, Family, FitResult, ResponseStructure,
};
use serde::Serialize;

/// A loaded cohort with the extended-stay columns appended to the design.
pub struct LoadedData {
    pub dataset: Dataset,
    pub design: DesignMatrix,
    pub ye_col: usize,
    pub ye_zero_col: usize,
    pub dah: Vec<i64>,
}

pub fn load(settings: &Settings, writer: &mut RunWriter) -> Result<LoadedData, Failure> {
    let path = settings.data_path()?;
    let (dataset, bytes) =
        load_dataset(path, settings.u, settings.p_tilde, settings.definition)?;
    writer.set_data(path, &bytes);
    writer.detail("data_kind", serde_json::json!(dataset.kind.label()));
    writer.detail("patients", serde_json::json!(dataset.records.len()));
    if let Some(summary) = &dataset.summary {
        writer.detail(
            "derive_summary",
            serde_json::json!({
                "min_initial_stay": summary.min_initial_stay,
                "short_stays": summary.short_stays,
                "censored_stays": summary.censored_stays,
            }),
        );
    }
    let ye: Vec<i64> = dataset.records.iter().map(|r| r.ye).collect();
    let (design, ye_col, ye_zero_col) =
        augment_design_with_extended_stay(&dataset.design8, &ye)?;
    let dah = dataset.records.iter().map(|r| r.dah).collect();
    Ok(LoadedData { dataset, design, ye_col, ye_zero_col, dah })
}

fn zeroed(mut spec: ComponentSpec) -> ComponentSpec {
    for p in spec.params.iter_mut() {
        for b in p.beta.iter_mut() {
            *b = 0.0;
        }
    }
    spec
}

fn intercept_base(spec: &ComponentSpec) -> ComponentSpec {
    let mut out = spec.clone();
    for p in out.params.iter_mut() {
        p.columns = vec![0];
        p.beta = vec![0.0];
    }
    out
}

fn covariate_candidates() -> Vec<Candidate> {
    vec![
        Candidate::main("age", vec![1]),
        Candidate::main("treatment", vec![2]),
        Candidate::main("bmi", vec![3]),
        Candidate::main("sex", vec![4]),
        Candidate::main("country", vec![5, 6]),
        Candidate::interaction(
            "bmi:treatment",
            vec![7],
            vec!["bmi".to_string(), "treatment".to_string()],
        ),
    ]
}

fn selection(
    reference: &ComponentSpec,
    stepwise: bool,
    candidates: Vec<Candidate>,
) -> ComponentSelection {
    if stepwise {
        ComponentSelection::Stepwise { base: intercept_base(reference), candidates }
    } else {
        ComponentSelection::Fixed(zeroed(reference.clone()))
    }
}

pub fn composite_plan(settings: &Settings, ye_col: usize, ye_zero_col: usize) -> CompositeFitPlan {
    let reference = reference_model();
    let mut care_candidates = covariate_candidates();
    care_candidates.push(Candidate::main("y_e", vec![ye_col]));
    care_candidates.push(Candidate::main("y_e=0", vec![ye_zero_col]));
    CompositeFitPlan {
        u: settings.u,
        p_tilde: settings.p_tilde,
        k_penalty: settings.gaic_k,
        death: selection(&reference.death, settings.stepwise, covariate_candidates()),
        extended: selection(&reference.extended, settings.stepwise, covariate_candidates()),
        care: selection(
            reference.care.as_ref().expect("the reference model has a care part"),
            settings.stepwise,
            care_candidates,
        ),
        ye_column: ye_col,
        ye_zero_column: ye_zero_col,
    }
}

pub fn competitor_plan(
    settings: &Settings,
    kind: dah_core::competitors::CompetitorKind,
    shift: i64,
) -> CompetitorPlan {
    let zero = ComponentSpec::intercept_only(Family::Bernoulli, ResponseStructure::plain());
    let positive = positive_template(kind, settings.u, shift);
    let (zero_sel, positive_sel) = if settings.stepwise {
        (
            ComponentSelection::Stepwise { base: zero, candidates: covariate_candidates() },
            ComponentSelection::Stepwise { base: positive, candidates: covariate_candidates() },
        )
    } else {
        (ComponentSelection::Fixed(zero), ComponentSelection::Fixed(positive))
    };
    CompetitorPlan {
        kind,
        u: settings.u,
        shift,
        k_penalty: settings.gaic_k,
        zero: zero_sel,
        positive: positive_sel,
    }
}

#[derive(Debug, Serialize)]
struct CoefficientRow {
    component: String,
    coefficient: String,
    estimate: f64,
    std_error: f64,
    p_value: f64,
    boundary: bool,
}

fn coefficient_rows(component: &str, fit: &FitResult) -> Vec<CoefficientRow> {
    fit.coefficient_names
        .iter()
        .map(|name| {
            let (estimate, std_error, p_value) =
                fit.coefficient(name).expect("every listed coefficient resolves");
            CoefficientRow {
                component: component.to_string(),
                coefficient: name.clone(),
                estimate,
                std_error,
                p_value,
                boundary: fit.is_boundary(name),
            }
        })
        .collect()
}

fn component_summary(fit: &FitResult) -> serde_json::Value {
    serde_json::json!({
        "loglik": fit.loglik,
        "df": fit.df,
        "gaic": fit.gaic,
        "converged": fit.diagnostics.converged,
        "iterations": fit.diagnostics.iterations,
        "boundary": fit.diagnostics.boundary,
    })
}

fn protocol_json(protocol: &ProtocolStay) -> serde_json::Value {
    match protocol {
        ProtocolStay::PointMass(day) => serde_json::json!({ "point_mass": day }),
        ProtocolStay::Categorical(probs) => serde_json::json!({ "probs": probs }),
    }
}

pub fn composite_details(fit: &CompositeFit) -> serde_json::Value {
    serde_json::json!({
        "death": component_summary(&fit.death),
        "extended": component_summary(&fit.extended),
        "care": fit.care.as_ref().map(component_summary),
        "protocol": protocol_json(&fit.model.protocol),
        "traces": fit.traces,
        "warnings": fit.warnings,
    })
}

pub fn competitor_details(fit: &CompetitorFit) -> serde_json::Value {
    serde_json::json!({
        "zero": component_summary(&fit.zero),
        "positive": fit.positive.as_ref().map(component_summary),
        "traces": fit.traces,
        "warnings": fit.warnings,
    })
}

pub fn run(settings: &Settings) -> Result<(), Failure> {
    let mut writer = RunWriter::new(settings);
    let loaded = load(settings, &mut writer)?;

    let mut rows: Vec<CoefficientRow> = Vec::new();
    match settings.model {
        ModelChoice::Composite => {
            let plan = composite_plan(settings, loaded.ye_col, loaded.ye_zero_col);
            let fit = fit_composite(&loaded.dataset.records, &loaded.design, &plan)?;
            rows.extend(coefficient_rows("death", &fit.death));
            rows.extend(coefficient_rows("extended", &fit.extended));
            if let Some(care) = &fit.care {
                rows.extend(coefficient_rows("care", care));
            }
            writer.detail("model", serde_json::json!("dnc"));
            writer.detail("fit", composite_details(&fit));
        }
        ModelChoice::Competitor(kind) => {
            let plan = competitor_plan(settings, kind, settings.shift);
            let fit = fit_competitor(&loaded.dah, &loaded.dataset.design8, &plan)?;
            rows.extend(coefficient_rows("zero", &fit.zero));
            if let Some(positive) = &fit.positive {
                rows.extend(coefficient_rows("positive", positive));
            }
            writer.detail("model", serde_json::json!(settings.model.code()));
            writer.detail("shift", serde_json::json!(settings.shift));
            writer.detail("fit", competitor_details(&fit));
        }
    }

    let count = rows.len();
    let bytes = csv_bytes(|w| {
        for row in &rows {
            w.serialize(row)?;
        }
        Ok(())
    })?;
    writer.write_file("fit.csv", &bytes, count)?;
    writer.finish()?;
    Ok(())
}
