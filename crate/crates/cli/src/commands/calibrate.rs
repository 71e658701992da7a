//! The `calibrate` command: scan the treatment-coefficient grid, simulate
//! the between-arm difference in median outcome at every point, and report
//! the band of coefficients that hits the target exactly together with its
//! midpoint and the whole step ladder.

use crate::config::{ModelChoice, Settings};
use crate::io::{csv_bytes, RunWriter};
use crate::Failure;
use dah_core::rng::SeedTree;
use dah_core::trial::{benchmark_scenario, calibrate_effect, composite_scenario, CalibrationResult};
use serde::Serialize;

#[derive(Debug, Serialize)]
struct LadderRow {
    model: String,
    coefficient: f64,
    median_diff: f64,
}

#[derive(Debug, Serialize)]
struct CalibrateSummary {
    model: String,
    shift: Option<i64>,
    target: f64,
    sim_n: usize,
    band_low: f64,
    band_high: f64,
    midpoint: f64,
}

pub fn run(settings: &Settings) -> Result<(), Failure> {
    let mut writer = RunWriter::new(settings);
    let tree = SeedTree::new(settings.seed);
    let mut rng = tree.stream("calibrate", &[0]);
    let target = settings.calibrate.target;
    let grid = &settings.calibrate.grid;
    let sim_n = settings.calibrate.sim_n;

    let (result, shift): (CalibrationResult, Option<i64>) = match settings.model {
        ModelChoice::Composite => (
            calibrate_effect(
                |c| composite_scenario(c).alternative,
                target,
                grid,
                sim_n,
                &mut rng,
            )
            .map_err(unattained_is_numerical)?,
            None,
        ),
        ModelChoice::Competitor(kind) => (
            calibrate_effect(
                |c| benchmark_scenario(kind, settings.shift, c).alternative,
                target,
                grid,
                sim_n,
                &mut rng,
            )
            .map_err(unattained_is_numerical)?,
            Some(settings.shift),
        ),
    };

    let code = settings.model.code();
    let ladder: Vec<LadderRow> = result
        .grid
        .iter()
        .zip(&result.median_diffs)
        .map(|(&coefficient, &median_diff)| LadderRow {
            model: code.to_string(),
            coefficient,
            median_diff,
        })
        .collect();
    let count = ladder.len();
    let bytes = csv_bytes(|w| {
        for row in &ladder {
            w.serialize(row)?;
        }
        Ok(())
    })?;
    writer.write_file("calibrate.csv", &bytes, count)?;

    let summary = CalibrateSummary {
        model: code.to_string(),
        shift,
        target,
        sim_n,
        band_low: result.band.0,
        band_high: result.band.1,
        midpoint: result.midpoint,
    };
    writer.write_json("calibrate.json", &summary)?;
    writer.finish()?;
    Ok(())
}

/// The grid and sample size were validated up front, so the only invalid-
/// data error the scan can produce is a target no grid point attains -- a
/// numerical outcome of the scenario, not a data problem.
fn unattained_is_numerical(e: dah_core::Error) -> Failure {
    match e {
        dah_core::Error::InvalidData(msg) => Failure::Numerical(msg),
        other => other.into(),
    }
}
