//! Data files and covariate coding: the per-patient component table, the
//! long-format daily-location table, the label scheme that maps categorical
//! baselines onto the reference design columns, and the rendering of
//! simulated components back into day-by-day trajectories.

use crate::Failure;
use dah_core::composite::{PatientComponents, REFERENCE_COLUMNS};
use dah_core::regression::DesignMatrix;
use dah_core::trajectory::{
    components_from_stays, derive_components, validate_trajectories, BaselineResidence,
    DahDefinition, DailyLocation, DeriveSummary, PatientBaseline, TrajectoryRecord,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

/// One patient in the wide component table. The first seven columns carry
/// the design indicators; `dead`, `yi`, and `ys` determine the outcome, and
/// the remaining columns are redundant derived values that are checked for
/// consistency when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentRow {
    pub patient_id: String,
    pub age: f64,
    pub treatment: f64,
    pub bmi: f64,
    pub sex: f64,
    pub country_au: f64,
    pub country_nz: f64,
    pub dead: bool,
    #[serde(default)]
    pub protocol: Option<i64>,
    #[serde(default)]
    pub ye: Option<i64>,
    pub yi: i64,
    #[serde(default)]
    pub care: Option<bool>,
    #[serde(default)]
    pub yc: Option<i64>,
    pub ys: i64,
    #[serde(default)]
    pub dah: Option<i64>,
}

/// One patient-day in the long table: a flat mirror of the nested record,
/// since CSV rows cannot carry nested structs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub patient_id: String,
    pub day: i64,
    pub location: String,
    pub sex: String,
    pub treatment: String,
    pub bmi_class: String,
    pub age_group: String,
    pub country: String,
    pub baseline_residence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Components,
    Trajectories,
}

impl DataKind {
    pub fn label(self) -> &'static str {
        match self {
            DataKind::Components => "components",
            DataKind::Trajectories => "trajectories",
        }
    }
}

/// A loaded cohort: outcome components plus the eight baseline design
/// columns, in file order.
pub struct Dataset {
    pub kind: DataKind,
    pub records: Vec<PatientComponents>,
    pub design8: DesignMatrix,
    /// Present when the input was a trajectory file.
    pub summary: Option<DeriveSummary>,
}

fn data_err(msg: String) -> Failure {
    Failure::Data(msg)
}

fn indicator(value: f64, column: &str, id: &str) -> Result<f64, Failure> {
    if value == 0.0 || value == 1.0 {
        Ok(value)
    } else {
        Err(data_err(format!("patient {id}: {column} must be 0 or 1, got {value}")))
    }
}

fn level<'a>(
    value: &'a str,
    field: &str,
    levels: &[(&str, f64)],
    id: &str,
) -> Result<f64, Failure> {
    levels.iter().find(|(label, _)| *label == value).map(|&(_, v)| v).ok_or_else(|| {
        let allowed: Vec<&str> = levels.iter().map(|&(l, _)| l).collect();
        data_err(format!(
            "patient {id}: unknown {field} {value:?}; expected one of {}",
            allowed.join(", ")
        ))
    })
}

/// Numeric design indicators (age, treatment, bmi, sex, country:au,
/// country:nz) for one baseline.
pub fn indicators_from_baseline(b: &PatientBaseline, id: &str) -> Result<[f64; 6], Failure> {
    let age = level(&b.age_group, "age_group", &[("<70", 0.0), ("70+", 1.0)], id)?;
    let treatment = level(&b.treatment, "treatment", &[("control", 0.0), ("active", 1.0)], id)?;
    let bmi = level(&b.bmi_class, "bmi_class", &[("normal", 0.0), ("high", 1.0)], id)?;
    let sex = level(&b.sex, "sex", &[("m", 0.0), ("f", 1.0)], id)?;
    let (au, nz) = match b.country.as_str() {
        "uk" => (0.0, 0.0),
        "au" => (1.0, 0.0),
        "nz" => (0.0, 1.0),
        other => {
            return Err(data_err(format!(
                "patient {id}: unknown country {other:?}; expected one of uk, au, nz"
            )))
        }
    };
    Ok([age, treatment, bmi, sex, au, nz])
}

/// Baseline labels for one row of design indicators (the reverse coding).
/// Simulated cohorts live at home before surgery.
pub fn baseline_from_indicators(row: &[f64]) -> PatientBaseline {
    let country = if row[5] == 1.0 {
        "au"
    } else if row[6] == 1.0 {
        "nz"
    } else {
        "uk"
    };
    PatientBaseline {
        sex: if row[4] == 1.0 { "f" } else { "m" }.to_string(),
        treatment: if row[2] == 1.0 { "active" } else { "control" }.to_string(),
        bmi_class: if row[3] == 1.0 { "high" } else { "normal" }.to_string(),
        age_group: if row[1] == 1.0 { "70+" } else { "<70" }.to_string(),
        country: country.to_string(),
        baseline_residence: BaselineResidence::Home,
    }
}

/// Assemble the eight baseline design columns (intercept through
/// bmi:treatment) from per-patient indicator rows.
fn design8_from_indicators(indicators: &[[f64; 6]]) -> Result<DesignMatrix, Failure> {
    let n = indicators.len();
    let names: Vec<String> = REFERENCE_COLUMNS[0..8].iter().map(|s| s.to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 8];
    for row in indicators {
        let [age, treatment, bmi, sex, au, nz] = *row;
        columns[0].push(1.0);
        columns[1].push(age);
        columns[2].push(treatment);
        columns[3].push(bmi);
        columns[4].push(sex);
        columns[5].push(au);
        columns[6].push(nz);
        columns[7].push(bmi * treatment);
    }
    DesignMatrix::from_columns(names, columns).map_err(Failure::from)
}

/// Decide whether a CSV is a component table or a long trajectory table by
/// looking for the `day` column.
fn sniff(bytes: &[u8], path: &Path) -> Result<DataKind, Failure> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| data_err(format!("cannot read CSV header of {}: {e}", path.display())))?;
    if headers.iter().any(|h| h == "day") {
        Ok(DataKind::Trajectories)
    } else if headers.iter().any(|h| h == "yi") {
        Ok(DataKind::Components)
    } else {
        Err(data_err(format!(
            "{}: neither a trajectory table (needs a `day` column) nor a component table \
             (needs a `yi` column)",
            path.display()
        )))
    }
}

fn check_redundant(id: &str, field: &str, provided: Option<i64>, derived: i64) -> Result<(), Failure> {
    match provided {
        Some(v) if v != derived => Err(data_err(format!(
            "patient {id}: {field} {v} contradicts the value {derived} implied by dead/yi/ys"
        ))),
        _ => Ok(()),
    }
}

fn components_from_row(row: &ComponentRow, u: i64, p_tilde: i64) -> Result<PatientComponents, Failure> {
    let id = &row.patient_id;
    let c = components_from_stays(u, p_tilde, row.dead, row.yi, row.ys)
        .map_err(|e| data_err(format!("patient {id}: {e}")))?;
    check_redundant(id, "protocol", row.protocol, c.protocol)?;
    check_redundant(id, "ye", row.ye, c.ye)?;
    check_redundant(id, "yc", row.yc, c.yc)?;
    check_redundant(id, "dah", row.dah, c.dah)?;
    if let Some(care) = row.care {
        if care != c.care {
            return Err(data_err(format!(
                "patient {id}: care {care} contradicts the value {} implied by dead/yi/ys",
                c.care
            )));
        }
    }
    Ok(c)
}

fn parse_components(bytes: &[u8], u: i64, p_tilde: i64) -> Result<Dataset, Failure> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut records = Vec::new();
    let mut indicators = Vec::new();
    for (i, result) in reader.deserialize::<ComponentRow>().enumerate() {
        let row = result.map_err(|e| data_err(format!("component row {}: {e}", i + 2)))?;
        let id = row.patient_id.clone();
        records.push(components_from_row(&row, u, p_tilde)?);
        indicators.push([
            indicator(row.age, "age", &id)?,
            indicator(row.treatment, "treatment", &id)?,
            indicator(row.bmi, "bmi", &id)?,
            indicator(row.sex, "sex", &id)?,
            indicator(row.country_au, "country_au", &id)?,
            indicator(row.country_nz, "country_nz", &id)?,
        ]);
        let last = indicators.last().expect("just pushed");
        if last[4] == 1.0 && last[5] == 1.0 {
            return Err(data_err(format!(
                "patient {id}: country_au and country_nz cannot both be 1"
            )));
        }
    }
    if records.is_empty() {
        return Err(data_err("component table has no rows".into()));
    }
    let design8 = design8_from_indicators(&indicators)?;
    Ok(Dataset { kind: DataKind::Components, records, design8, summary: None })
}

fn parse_trajectories(
    bytes: &[u8],
    u: i64,
    p_tilde: i64,
    definition: DahDefinition,
) -> Result<Dataset, Failure> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut rows = Vec::new();
    for (i, result) in reader.deserialize::<TrajectoryRow>().enumerate() {
        let row: TrajectoryRow =
            result.map_err(|e| data_err(format!("trajectory row {}: {e}", i + 2)))?;
        let location = DailyLocation::from_str(&row.location)
            .map_err(|e| data_err(format!("patient {}: {e}", row.patient_id)))?;
        let baseline_residence = BaselineResidence::from_str(&row.baseline_residence)
            .map_err(|e| data_err(format!("patient {}: {e}", row.patient_id)))?;
        rows.push(TrajectoryRecord {
            patient_id: row.patient_id,
            day: row.day,
            location,
            baseline: PatientBaseline {
                sex: row.sex,
                treatment: row.treatment,
                bmi_class: row.bmi_class,
                age_group: row.age_group,
                country: row.country,
                baseline_residence,
            },
        });
    }
    let trajectories = validate_trajectories(&rows, u)?;
    let (derived, summary) = derive_components(&trajectories, u, p_tilde, definition)?;
    let mut records = Vec::with_capacity(derived.len());
    let mut indicators = Vec::with_capacity(derived.len());
    for patient in &derived {
        indicators.push(indicators_from_baseline(&patient.baseline, &patient.patient_id)?);
        records.push(patient.components);
    }
    let design8 = design8_from_indicators(&indicators)?;
    Ok(Dataset { kind: DataKind::Trajectories, records, design8, summary: Some(summary) })
}

/// Read a cohort file (component table or trajectory table) and return the
/// parsed dataset together with the raw bytes for checksumming.
pub fn load_dataset(
    path: &Path,
    u: i64,
    p_tilde: i64,
    definition: DahDefinition,
) -> Result<(Dataset, Vec<u8>), Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| data_err(format!("cannot read data file {}: {e}", path.display())))?;
    let dataset = match sniff(&bytes, path)? {
        DataKind::Components => parse_components(&bytes, u, p_tilde)?,
        DataKind::Trajectories => parse_trajectories(&bytes, u, p_tilde, definition)?,
    };
    Ok((dataset, bytes))
}

/// Full component row for one simulated patient.
pub fn component_row(id: String, c: &PatientComponents, design_row: &[f64]) -> ComponentRow {
    ComponentRow {
        patient_id: id,
        age: design_row[1],
        treatment: design_row[2],
        bmi: design_row[3],
        sex: design_row[4],
        country_au: design_row[5],
        country_nz: design_row[6],
        dead: c.dead,
        protocol: Some(c.protocol),
        ye: Some(c.ye),
        yi: c.yi,
        care: Some(c.care),
        yc: Some(c.yc),
        ys: c.ys,
        dah: Some(c.dah),
    }
}

/// Lay one patient's components out as daily locations: the initial
/// hospital stay from day 1, subsequent care immediately after discharge,
/// then home (or death) for the rest of the window. If death and a full
/// window of stays coincide the dead marker has no day left to appear on;
/// the derived outcome is 0 either way.
pub fn render_locations(c: &PatientComponents, u: i64) -> Vec<DailyLocation> {
    let days = u as usize;
    let mut out = Vec::with_capacity(days);
    for _ in 0..c.yi.min(u) {
        out.push(DailyLocation::Hospital);
    }
    for _ in 0..c.yc {
        if out.len() < days {
            out.push(DailyLocation::RespiteOrNursing);
        }
    }
    let rest = if c.dead { DailyLocation::Dead } else { DailyLocation::Home };
    while out.len() < days {
        out.push(rest);
    }
    out
}

/// Long-format rows for one patient's rendered trajectory.
pub fn trajectory_rows(
    id: &str,
    baseline: &PatientBaseline,
    locations: &[DailyLocation],
) -> Vec<TrajectoryRow> {
    locations
        .iter()
        .enumerate()
        .map(|(d, loc)| TrajectoryRow {
            patient_id: id.to_string(),
            day: d as i64 + 1,
            location: loc.to_string(),
            sex: baseline.sex.clone(),
            treatment: baseline.treatment.clone(),
            bmi_class: baseline.bmi_class.clone(),
            age_group: baseline.age_group.clone(),
            country: baseline.country.clone(),
            baseline_residence: baseline.baseline_residence.to_string(),
        })
        .collect()
}
