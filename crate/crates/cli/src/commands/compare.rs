//! The `compare` command: fit the composite model and every benchmark model
//! (with and without the protocol-window support shift) to one dataset, run
//! the same resampling Q-Q check on each, and tabulate the discrepancy
//! areas side by side.

use crate::commands::diagnose::{DiscrepancyRow, QQ_IDENTITY_TOL};
use crate::commands::fit::{
    competitor_details, competitor_plan, composite_details, composite_plan, load,
};
use crate::config::{competitor_code, Settings};
use crate::io::{csv_bytes, RunWriter};
use crate::Failure;
use dah_core::competitors::{fit_competitor, CompetitorKind};
use dah_core::composite::fit_composite;
use dah_core::diagnostics::{integrated_discrepancy, resampling_qq_check};
use dah_core::rng::SeedTree;

pub fn run(settings: &Settings) -> Result<(), Failure> {
    let mut writer = RunWriter::new(settings);
    let loaded = load(settings, &mut writer)?;
    let tree = SeedTree::new(settings.seed);
    let replicates = settings.compare.replicates;
    let grid = settings.compare.grid;

    let mut rows: Vec<DiscrepancyRow> = Vec::new();
    let mut fits = serde_json::Map::new();

    let plan = composite_plan(settings, loaded.ye_col, loaded.ye_zero_col);
    let composite = fit_composite(&loaded.dataset.records, &loaded.design, &plan)?;
    fits.insert("dnc".to_string(), composite_details(&composite));
    let mut rng = tree.stream("bootstrap", &[0, 0]);
    let qq = resampling_qq_check(
        &composite.model,
        &loaded.dah,
        &loaded.design,
        replicates,
        grid,
        &mut rng,
    )?;
    rows.push(DiscrepancyRow {
        model: "dnc".to_string(),
        shift: settings.p_tilde,
        area: integrated_discrepancy(&qq),
        identity_coverage: qq.identity_coverage(QQ_IDENTITY_TOL),
    });

    let shifts: Vec<i64> =
        if settings.p_tilde == 0 { vec![0] } else { vec![0, settings.p_tilde] };
    for (mi, &kind) in CompetitorKind::ALL.iter().enumerate() {
        for (si, &shift) in shifts.iter().enumerate() {
            let plan = competitor_plan(settings, kind, shift);
            let fit = fit_competitor(&loaded.dah, &loaded.dataset.design8, &plan)?;
            fits.insert(
                format!("{}:shift={shift}", competitor_code(kind)),
                competitor_details(&fit),
            );
            let mut rng = tree.stream("bootstrap", &[mi as u64 + 1, si as u64]);
            let qq = resampling_qq_check(
                &fit.spec,
                &loaded.dah,
                &loaded.dataset.design8,
                replicates,
                grid,
                &mut rng,
            )?;
            rows.push(DiscrepancyRow {
                model: competitor_code(kind).to_string(),
                shift,
                area: integrated_discrepancy(&qq),
                identity_coverage: qq.identity_coverage(QQ_IDENTITY_TOL),
            });
        }
    }

    let count = rows.len();
    let bytes = csv_bytes(|w| {
        for row in &rows {
            w.serialize(row)?;
        }
        Ok(())
    })?;
    writer.write_file("compare.csv", &bytes, count)?;
    writer.detail("fits", serde_json::Value::Object(fits));
    writer.finish()?;
    Ok(())
}
