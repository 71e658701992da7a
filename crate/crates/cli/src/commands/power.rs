//! The `power` command: Monte Carlo rejection-rate curves for the null and
//! treatment scenarios over a sample-size grid, plus extraction of the
//! smallest grid size whose power reaches the target. Each replicate draws
//! its own keyed rng stream, so the curves are bit-reproducible and
//! independent of thread count.

use crate::config::{ModelChoice, PowerSettings, Settings};
use crate::io::{csv_bytes, RunWriter};
use crate::Failure;
use dah_core::diagnostics::DahSampler;
use dah_core::rng::SeedTree;
use dah_core::trial::{
    benchmark_scenario, composite_scenario, min_sample_size, power_curve, DesignStudyResult,
    ScenarioPair,
};
use serde::Serialize;

#[derive(Debug, Serialize)]
struct PowerRow {
    model: String,
    scenario: String,
    n: usize,
    rate: f64,
    mc_se: f64,
    reps: usize,
    alpha: f64,
    seed: u64,
}

fn rows_from(
    model: &str,
    seed: u64,
    result: &DesignStudyResult,
    out: &mut Vec<PowerRow>,
) {
    for point in &result.rows {
        out.push(PowerRow {
            model: model.to_string(),
            scenario: result.scenario.clone(),
            n: point.n,
            rate: point.rate,
            mc_se: point.mc_se,
            reps: result.reps,
            alpha: result.alpha,
            seed,
        });
    }
}

fn curves<S: DahSampler + Sync>(
    pair: &ScenarioPair<S>,
    power: &PowerSettings,
    tree: &SeedTree,
) -> Result<(DesignStudyResult, DesignStudyResult), Failure> {
    power_curve(pair, &power.n_grid, power.reps, power.alpha, tree).map_err(Failure::from)
}

pub fn run(settings: &Settings) -> Result<(), Failure> {
    let mut writer = RunWriter::new(settings);
    let tree = SeedTree::new(settings.seed);
    let effect = settings.model_effect;

    let (null, alternative) = match settings.model {
        ModelChoice::Composite => curves(&composite_scenario(effect), &settings.power, &tree)?,
        ModelChoice::Competitor(kind) => curves(
            &benchmark_scenario(kind, settings.shift, effect),
            &settings.power,
            &tree,
        )?,
    };

    let code = settings.model.code();
    let mut rows = Vec::with_capacity(null.rows.len() + alternative.rows.len());
    rows_from(code, settings.seed, &null, &mut rows);
    rows_from(code, settings.seed, &alternative, &mut rows);
    let count = rows.len();
    let bytes = csv_bytes(|w| {
        for row in &rows {
            w.serialize(row)?;
        }
        Ok(())
    })?;
    writer.write_file("power.csv", &bytes, count)?;

    let sample_size = match min_sample_size(&alternative, settings.power.target_power) {
        Ok(found) => serde_json::json!({
            "attained": true,
            "target_power": found.target,
            "n": found.n,
            "rate": found.achieved.rate,
            "mc_se": found.achieved.mc_se,
            "previous": found.previous.map(|p| serde_json::json!({
                "n": p.n,
                "rate": p.rate,
                "mc_se": p.mc_se,
            })),
        }),
        // An unattained target is a finding worth reporting, not a failure.
        Err(e) => serde_json::json!({
            "attained": false,
            "target_power": settings.power.target_power,
            "message": e.to_string(),
        }),
    };
    writer.write_json("sample_size.json", &sample_size)?;

    writer.detail("model", serde_json::json!(code));
    writer.detail("effect", serde_json::json!(effect));
    writer.finish()?;
    Ok(())
}
