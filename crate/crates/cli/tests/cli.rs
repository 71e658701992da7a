//! End-to-end tests that drive the compiled `dah` binary: output
//! determinism and checksummed manifests, the simulate -> ingest -> fit
//! round trip, diagnostic and comparison tables, agreement between the CLI
//! and the library on calibration and power, and the exit-code contract.

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use dah_core::composite::{reference_model, REFERENCE_COLUMNS};
use dah_core::regression::ComponentSpec;
use dah_core::rng::SeedTree;
use dah_core::trial::{calibrate_effect, composite_scenario, power_curve};

fn dah() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dah"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    dah().current_dir(dir).args(args).output().expect("the binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Run a command expected to fail, and check its exit code plus the
/// machine-readable error JSON on stderr.
fn run_err(dir: &Path, args: &[&str], code: i32, kind: &str) -> String {
    let out = run_in(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "command {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr is one JSON document");
    assert_eq!(err["error"]["kind"], kind, "error: {err}");
    assert_eq!(err["error"]["exit_code"], code);
    err["error"]["message"].as_str().expect("message is a string").to_string()
}

fn write(dir: &Path, name: &str, contents: &str) {
    std::fs::write(dir.join(name), contents).expect("test file writes");
}

fn read_csv(path: &Path) -> Vec<HashMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).expect("output CSV opens");
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    reader
        .records()
        .map(|r| {
            let record = r.expect("CSV row parses");
            headers.iter().cloned().zip(record.iter().map(String::from)).collect()
        })
        .collect()
}

fn manifest(dir: &Path, command: &str) -> serde_json::Value {
    let bytes = std::fs::read(dir.join(format!("{command}-manifest.json"))).expect("manifest");
    serde_json::from_slice(&bytes).expect("manifest is JSON")
}

#[test]
fn simulate_reruns_are_byte_identical_and_checksums_match() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 11\nout_dir = \"a\"\n\n[simulate]\nn = 200\n",
    );
    run_ok(tmp.path(), &["simulate", "--config", "run.toml"]);
    run_ok(tmp.path(), &["simulate", "--config", "run.toml", "--out-dir", "b"]);
    let first = std::fs::read(tmp.path().join("a/components.csv")).unwrap();
    let second = std::fs::read(tmp.path().join("b/components.csv")).unwrap();
    assert_eq!(first, second, "same seed and config must reproduce the file byte for byte");

    let m = manifest(&tmp.path().join("a"), "simulate");
    assert_eq!(m["tool"], "dah");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["outputs"][0]["file"], "components.csv");
    assert_eq!(m["outputs"][0]["rows"], 200);
    let recorded = m["outputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(recorded, sha256_hex(&first), "manifest checksum must match the file on disk");
    // The resolved config is embedded, so the manifest alone can rerun this.
    assert_eq!(m["config"]["simulate"]["n"], 200);
    assert_eq!(m["config"]["seed"], 11);
}

/// Independent digest of an output file, for checking manifest checksums.
fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    sha2::Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn truth_coefficients() -> HashMap<(String, String), f64> {
    let model = reference_model();
    let mut truth = HashMap::new();
    let mut add = |component: &str, spec: &ComponentSpec| {
        for param in &spec.params {
            for (&col, &beta) in param.columns.iter().zip(&param.beta) {
                truth.insert(
                    (component.to_string(), format!("{}:{}", param.name, REFERENCE_COLUMNS[col])),
                    beta,
                );
            }
        }
    };
    add("death", &model.death);
    add("extended", &model.extended);
    add("care", model.care.as_ref().expect("the generator has a care part"));
    truth
}

#[test]
fn trajectories_round_trip_through_fit_within_three_standard_errors() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 401\nout_dir = \"sim\"\n\n[simulate]\nn = 5000\noutput = \"trajectories\"\n",
    );
    run_ok(tmp.path(), &["simulate", "--config", "run.toml"]);
    run_ok(
        tmp.path(),
        &[
            "fit",
            "--config",
            "run.toml",
            "--data",
            "sim/trajectories.csv",
            "--out-dir",
            "fit",
        ],
    );

    let m = manifest(&tmp.path().join("fit"), "fit");
    assert_eq!(m["details"]["patients"], 5000);
    assert_eq!(m["details"]["data_kind"], "trajectories");
    assert!(m["details"]["derive_summary"]["censored_stays"].is_number());

    let truth = truth_coefficients();
    let rows = read_csv(&tmp.path().join("fit/fit.csv"));
    assert_eq!(rows.len(), truth.len(), "one row per generating coefficient");

    // Coefficients at extreme link values encode degenerate probabilities
    // (an inflation or dispersion that is exactly off); their likelihood is
    // flat there, so Wald intervals do not apply. For those we require the
    // fitted value to land on the same degenerate side; every identified
    // coefficient must recover the generating value within three standard
    // errors.
    let mut checked = 0;
    let mut care_sigma_sum_est = 0.0;
    let mut care_sigma_sum_truth = 0.0;
    for row in &rows {
        let key = (row["component"].clone(), row["coefficient"].clone());
        let t = *truth.get(&key).unwrap_or_else(|| panic!("unexpected coefficient {key:?}"));
        let est: f64 = row["estimate"].parse().unwrap();
        let se: f64 = row["std_error"].parse().unwrap();
        if key.0 == "care" && (key.1 == "sigma:(intercept)" || key.1 == "sigma:y_e=0") {
            care_sigma_sum_est += est;
            care_sigma_sum_truth += t;
        }
        if t.abs() > 30.0 {
            assert!(
                est.signum() == t.signum() && est.abs() >= 3.0,
                "{key:?}: degenerate truth {t} fitted as {est}"
            );
        } else {
            assert!(se.is_finite() && se > 0.0, "{key:?}: bad standard error {se}");
            assert!(
                (est - t).abs() <= 3.0 * se,
                "{key:?}: estimate {est} misses truth {t} by more than 3 x {se}"
            );
        }
        checked += 1;
    }
    assert_eq!(checked, truth.len());
    // The two extreme care dispersion coefficients are only identified
    // through their sum on the zero-extended-stay rows; that sum must be
    // recovered.
    assert!(
        (care_sigma_sum_est - care_sigma_sum_truth).abs() < 1.0,
        "care dispersion at y_e=0: fitted {care_sigma_sum_est} vs truth {care_sigma_sum_truth}"
    );
}

#[test]
fn diagnose_writes_worm_qq_and_discrepancy_tables() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 77\nout_dir = \"sim\"\n\n[simulate]\nn = 120\n\n[diagnose]\nreplicates = 120\ngrid = 80\n",
    );
    run_ok(tmp.path(), &["simulate", "--config", "run.toml"]);
    run_ok(
        tmp.path(),
        &[
            "diagnose",
            "--config",
            "run.toml",
            "--data",
            "sim/components.csv",
            "--out-dir",
            "diag",
        ],
    );

    let worm = read_csv(&tmp.path().join("diag/worm.csv"));
    let components: std::collections::HashSet<&str> =
        worm.iter().map(|r| r["component"].as_str()).collect();
    for required in ["death", "extended", "care"] {
        assert!(components.contains(required), "missing worm rows for {required}");
    }
    for row in &worm {
        let z: f64 = row["z"].parse().unwrap();
        let lower: f64 = row["lower"].parse().unwrap();
        let upper: f64 = row["upper"].parse().unwrap();
        assert!(z.is_finite() && lower <= upper);
    }

    let qq = read_csv(&tmp.path().join("diag/qq.csv"));
    assert_eq!(qq.len(), 80);
    let mut last_p = 0.0;
    for row in &qq {
        let p: f64 = row["probability"].parse().unwrap();
        let lower: f64 = row["lower"].parse().unwrap();
        let upper: f64 = row["upper"].parse().unwrap();
        assert!(p > last_p && p < 1.0, "probability grid must increase inside (0,1)");
        assert!(lower <= upper);
        last_p = p;
    }

    let discrepancy = read_csv(&tmp.path().join("diag/discrepancy.csv"));
    assert_eq!(discrepancy.len(), 1);
    assert_eq!(discrepancy[0]["model"], "dnc");
    assert_eq!(discrepancy[0]["shift"], "4");
    assert!(discrepancy[0]["area"].parse::<f64>().unwrap() >= 0.0);
    let coverage: f64 = discrepancy[0]["identity_coverage"].parse().unwrap();
    assert!((0.0..=1.0).contains(&coverage));
}

#[test]
fn compare_ranks_the_composite_model_ahead_of_every_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 78\nout_dir = \"sim\"\n\n[simulate]\nn = 120\n\n[compare]\nreplicates = 50\ngrid = 60\n",
    );
    run_ok(tmp.path(), &["simulate", "--config", "run.toml"]);
    run_ok(
        tmp.path(),
        &[
            "compare",
            "--config",
            "run.toml",
            "--data",
            "sim/components.csv",
            "--out-dir",
            "cmp",
        ],
    );

    let rows = read_csv(&tmp.path().join("cmp/compare.csv"));
    assert_eq!(rows.len(), 11, "dnc plus five benchmarks at shifts 0 and 4");
    let area = |r: &HashMap<String, String>| r["area"].parse::<f64>().unwrap();
    let dnc: Vec<_> = rows.iter().filter(|r| r["model"] == "dnc").collect();
    assert_eq!(dnc.len(), 1);
    let dnc_area = area(dnc[0]);
    for row in rows.iter().filter(|r| r["model"] != "dnc") {
        assert!(
            area(row) > dnc_area,
            "the composite model must fit its own data best: dnc {dnc_area} vs {} {} at {}",
            row["model"],
            area(row),
            row["shift"],
        );
    }
    for code in ["zabb", "zab", "flognormal", "zifpoisson", "fnb"] {
        let shifts: Vec<_> =
            rows.iter().filter(|r| r["model"] == code).map(|r| r["shift"].clone()).collect();
        assert_eq!(shifts, ["0", "4"], "each benchmark appears with and without the shift");
    }
}

#[test]
fn cli_power_rows_match_a_direct_library_run() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 13\n\n[power]\nn_grid = [60, 120]\nreps = 200\n",
    );
    run_ok(tmp.path(), &["power", "--config", "run.toml", "--out-dir", "out"]);
    let rows = read_csv(&tmp.path().join("out/power.csv"));
    assert_eq!(rows.len(), 4);

    let pair = composite_scenario(-1.35);
    let (null, alternative) =
        power_curve(&pair, &[60, 120], 200, 0.05, &SeedTree::new(13)).unwrap();
    let expected: HashMap<(String, usize), f64> = null
        .rows
        .iter()
        .map(|p| (("null".to_string(), p.n), p.rate))
        .chain(alternative.rows.iter().map(|p| (("alternative".to_string(), p.n), p.rate)))
        .collect();
    for row in &rows {
        assert_eq!(row["model"], "dnc");
        assert_eq!(row["seed"], "13");
        assert_eq!(row["reps"], "200");
        let key = (row["scenario"].clone(), row["n"].parse::<usize>().unwrap());
        let rate: f64 = row["rate"].parse().unwrap();
        assert_eq!(rate, expected[&key], "CLI and library disagree at {key:?}");
    }

    // Replicates draw keyed rng streams, so the thread count cannot change
    // any result.
    run_ok(
        tmp.path(),
        &["power", "--config", "run.toml", "--out-dir", "threaded", "--threads", "3"],
    );
    let serial = std::fs::read(tmp.path().join("out/power.csv")).unwrap();
    let threaded = std::fs::read(tmp.path().join("threaded/power.csv")).unwrap();
    assert_eq!(serial, threaded);

    let sample_size: serde_json::Value = serde_json::from_slice(
        &std::fs::read(tmp.path().join("out/sample_size.json")).unwrap(),
    )
    .unwrap();
    assert!(sample_size["attained"].is_boolean());
}

#[test]
fn cli_calibration_matches_a_direct_library_run() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 21\n\n[calibrate]\ntarget = 2.0\ngrid_start = -2.2\ngrid_stop = 0.0\ngrid_step = 0.2\nsim_n = 5000\n",
    );
    run_ok(tmp.path(), &["calibrate", "--config", "run.toml", "--out-dir", "out"]);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/calibrate.json")).unwrap())
            .unwrap();

    let grid: Vec<f64> = (0..=11).map(|i| -2.2 + i as f64 * 0.2).collect();
    let tree = SeedTree::new(21);
    let mut rng = tree.stream("calibrate", &[0]);
    let expected =
        calibrate_effect(|c| composite_scenario(c).alternative, 2.0, &grid, 5000, &mut rng)
            .unwrap();
    assert_eq!(summary["model"], "dnc");
    assert_eq!(summary["band_low"].as_f64().unwrap(), expected.band.0);
    assert_eq!(summary["band_high"].as_f64().unwrap(), expected.band.1);
    assert_eq!(summary["midpoint"].as_f64().unwrap(), expected.midpoint);

    let ladder = read_csv(&tmp.path().join("out/calibrate.csv"));
    assert_eq!(ladder.len(), expected.grid.len());
    for (row, (&c, &d)) in
        ladder.iter().zip(expected.grid.iter().zip(&expected.median_diffs))
    {
        assert_eq!(row["coefficient"].parse::<f64>().unwrap(), c);
        assert_eq!(row["median_diff"].parse::<f64>().unwrap(), d);
    }
}

#[test]
fn benchmark_models_simulate_and_fit_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 31\nout_dir = \"sim\"\n\n[model]\nkind = \"zabb\"\nshift = 4\neffect = -0.5\n\n[simulate]\nn = 300\n",
    );
    run_ok(tmp.path(), &["simulate", "--config", "run.toml"]);
    let rows = read_csv(&tmp.path().join("sim/dah.csv"));
    assert_eq!(rows.len(), 300);
    for row in &rows {
        let dah: i64 = row["dah"].parse().unwrap();
        assert!((0..=86).contains(&dah), "zabb at shift 4 lives on 0..=86, got {dah}");
        assert!(row["treatment"] == "0" || row["treatment"] == "1");
    }

    // Benchmarks fit the outcome column of an ordinary cohort file.
    write(
        tmp.path(),
        "cohort.toml",
        "seed = 32\nout_dir = \"cohort\"\n\n[simulate]\nn = 250\n",
    );
    run_ok(tmp.path(), &["simulate", "--config", "cohort.toml"]);
    run_ok(
        tmp.path(),
        &[
            "fit",
            "--seed",
            "33",
            "--model",
            "zabb",
            "--data",
            "cohort/components.csv",
            "--out-dir",
            "fit",
        ],
    );
    let fit = read_csv(&tmp.path().join("fit/fit.csv"));
    let components: std::collections::HashSet<&str> =
        fit.iter().map(|r| r["component"].as_str()).collect();
    assert!(components.contains("zero") && components.contains("positive"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "unknown.toml", "seed = 1\nnonsense = true\n");
    let msg = run_err(tmp.path(), &["simulate", "--config", "unknown.toml"], 2, "config");
    assert!(msg.contains("nonsense"), "message names the offending key: {msg}");

    run_err(tmp.path(), &["simulate"], 2, "config");

    write(
        tmp.path(),
        "mixed.toml",
        "seed = 1\n\n[model]\nkind = \"zabb\"\n\n[simulate]\noutput = \"trajectories\"\n",
    );
    run_err(tmp.path(), &["simulate", "--config", "mixed.toml"], 2, "config");

    write(tmp.path(), "window.toml", "seed = 1\n\n[window]\nu = 90\nptilde = 91\n");
    run_err(tmp.path(), &["fit", "--config", "window.toml"], 2, "config");

    // A data-dependent command without --data is a usage problem.
    run_err(tmp.path(), &["diagnose", "--seed", "4"], 2, "config");
}

#[test]
fn data_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    run_err(tmp.path(), &["fit", "--seed", "5", "--data", "absent.csv"], 3, "data");

    write(
        tmp.path(),
        "short.csv",
        "patient_id,day,location,sex,treatment,bmi_class,age_group,country,baseline_residence\n\
         p1,1,dead,m,control,normal,<70,uk,home\n\
         p1,2,home,m,control,normal,<70,uk,home\n",
    );
    let msg = run_err(tmp.path(), &["fit", "--seed", "5", "--data", "short.csv"], 3, "data");
    assert!(msg.contains("p1"), "data errors carry the patient id: {msg}");

    write(tmp.path(), "odd.csv", "foo,bar\n1,2\n");
    run_err(tmp.path(), &["fit", "--seed", "5", "--data", "odd.csv"], 3, "data");

    // A redundant column contradicting dead/yi/ys is rejected, not ignored.
    write(
        tmp.path(),
        "inconsistent.csv",
        "patient_id,age,treatment,bmi,sex,country_au,country_nz,dead,yi,ys,dah\n\
         p1,0,0,0,0,0,0,false,4,0,99\n",
    );
    let msg =
        run_err(tmp.path(), &["fit", "--seed", "5", "--data", "inconsistent.csv"], 3, "data");
    assert!(msg.contains("dah"), "message names the inconsistent column: {msg}");
}

#[test]
fn unattained_calibration_target_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.toml",
        "seed = 2\n\n[calibrate]\ntarget = 40.0\ngrid_start = -0.2\ngrid_stop = 0.0\ngrid_step = 0.1\nsim_n = 2000\n",
    );
    let msg = run_err(tmp.path(), &["calibrate", "--config", "run.toml"], 4, "numerical");
    assert!(msg.contains("40"), "message carries the unattained target: {msg}");
}
