//! The `diagnose` command: fit the composite model to the data, then write
//! per-component randomized-quantile-residual worm plots, the resampling
//! Q-Q check of the full outcome distribution, and its discrepancy summary.

use crate::commands::fit::{composite_details, composite_plan, load};
use crate::config::{ModelChoice, Settings};
use crate::io::{csv_bytes, RunWriter};
use crate::Failure;
use dah_core::composite::fit_composite;
use dah_core::diagnostics::{
    component_residuals, integrated_discrepancy, resampling_qq_check, worm_plot_data,
};
use dah_core::regression::ResponseData;
use dah_core::rng::SeedTree;
use dah_core::composite::PatientComponents;
use serde::Serialize;

/// Identity-line tolerance for lattice-valued outcomes: half the lattice
/// step, so sub-resolution envelope collapses at atoms do not count as
/// exits.
pub const QQ_IDENTITY_TOL: f64 = 0.5;

#[derive(Debug, Serialize)]
struct WormRow {
    component: String,
    z: f64,
    deviation: f64,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Serialize)]
struct QqRow {
    probability: f64,
    empirical: f64,
    model: f64,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Serialize)]
pub struct DiscrepancyRow {
    pub model: String,
    pub shift: i64,
    pub area: f64,
    pub identity_coverage: f64,
}

/// The three per-component residual datasets: death and extended stay over
/// the whole cohort, care over the patients with any post-discharge time.
struct ResidualInput {
    component: &'static str,
    rows: Option<Vec<usize>>,
    y: Vec<f64>,
    trials: Option<Vec<i64>>,
}

fn residual_inputs(records: &[PatientComponents], u: i64) -> Vec<ResidualInput> {
    let mut inputs = vec![
        ResidualInput {
            component: "death",
            rows: None,
            y: records.iter().map(|r| r.dead as i64 as f64).collect(),
            trials: None,
        },
        ResidualInput {
            component: "extended",
            rows: None,
            y: records.iter().map(|r| r.ye as f64).collect(),
            trials: None,
        },
    ];
    let eligible: Vec<usize> =
        (0..records.len()).filter(|&i| u - records[i].yi > 0).collect();
    if !eligible.is_empty() {
        inputs.push(ResidualInput {
            component: "care",
            y: eligible.iter().map(|&i| records[i].yc as f64).collect(),
            trials: Some(eligible.iter().map(|&i| u - records[i].yi).collect()),
            rows: Some(eligible),
        });
    }
    inputs
}

pub fn run(settings: &Settings) -> Result<(), Failure> {
    if settings.model != ModelChoice::Composite {
        return Err(Failure::Config(
            "diagnose runs on the dnc model; use `compare` to score benchmark models".into(),
        ));
    }
    let mut writer = RunWriter::new(settings);
    let loaded = load(settings, &mut writer)?;
    let plan = composite_plan(settings, loaded.ye_col, loaded.ye_zero_col);
    let fit = fit_composite(&loaded.dataset.records, &loaded.design, &plan)?;
    writer.detail("fit", composite_details(&fit));

    let tree = SeedTree::new(settings.seed);
    let mut worm_rows: Vec<WormRow> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    for (k, input) in residual_inputs(&loaded.dataset.records, settings.u).iter().enumerate() {
        let spec = match input.component {
            "death" => &fit.death.spec,
            "extended" => &fit.extended.spec,
            _ => match &fit.care {
                Some(care) => &care.spec,
                None => {
                    notes.push("care degenerated to a point mass; no care residuals".into());
                    continue;
                }
            },
        };
        let design = match &input.rows {
            Some(rows) => loaded.design.select_rows(rows)?,
            None => loaded.design.clone(),
        };
        let data = ResponseData {
            y: &input.y,
            bounds: None,
            trials: input.trials.as_deref(),
        };
        if input.y.len() < 10 {
            notes.push(format!(
                "{}: only {} observations, too few for a worm plot",
                input.component,
                input.y.len()
            ));
            continue;
        }
        let mut rng = tree.stream("residual-uniforms", &[k as u64]);
        let set = component_residuals(spec, &design, &data, input.component, &mut rng)?;
        worm_rows.extend(worm_plot_data(&set)?.iter().map(|p| WormRow {
            component: input.component.to_string(),
            z: p.z,
            deviation: p.deviation,
            lower: p.lower,
            upper: p.upper,
        }));
    }
    let count = worm_rows.len();
    let bytes = csv_bytes(|w| {
        for row in &worm_rows {
            w.serialize(row)?;
        }
        Ok(())
    })?;
    writer.write_file("worm.csv", &bytes, count)?;

    let mut rng = tree.stream("bootstrap", &[0]);
    let qq = resampling_qq_check(
        &fit.model,
        &loaded.dah,
        &loaded.design,
        settings.diagnose.replicates,
        settings.diagnose.grid,
        &mut rng,
    )?;
    let qq_rows: Vec<QqRow> = (0..qq.probabilities.len())
        .map(|i| QqRow {
            probability: qq.probabilities[i],
            empirical: qq.empirical_mean[i],
            model: qq.model_mean[i],
            lower: qq.envelope_lower[i],
            upper: qq.envelope_upper[i],
        })
        .collect();
    let count = qq_rows.len();
    let bytes = csv_bytes(|w| {
        for row in &qq_rows {
            w.serialize(row)?;
        }
        Ok(())
    })?;
    writer.write_file("qq.csv", &bytes, count)?;

    let discrepancy = DiscrepancyRow {
        model: "dnc".to_string(),
        shift: settings.p_tilde,
        area: integrated_discrepancy(&qq),
        identity_coverage: qq.identity_coverage(QQ_IDENTITY_TOL),
    };
    let bytes = csv_bytes(|w| {
        w.serialize(&discrepancy)?;
        Ok(())
    })?;
    writer.write_file("discrepancy.csv", &bytes, 1)?;

    notes.extend(qq.warnings.iter().cloned());
    writer.detail("notes", serde_json::json!(notes));
    writer.finish()?;
    Ok(())
}
