//! Day-by-day patient location records and their reduction to the
//! outcome components.
//!
//! A trajectory is a long-format table: one row per patient per follow-up
//! day carrying the day's location, plus baseline covariates repeated on
//! every row. Validation groups rows by patient and enforces complete,
//! duplicate-free day coverage and that death is absorbing. Reduction
//! derives the death flag, the initial hospital stay (split into protocol
//! and extended parts), and the subsequent non-home days under either
//! outcome definition.

use crate::composite::PatientComponents;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

/// Location of a patient on one follow-up day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DailyLocation {
    Home,
    Hospital,
    RespiteOrNursing,
    Dead,
}

impl FromStr for DailyLocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "home" => Ok(Self::Home),
            "hospital" => Ok(Self::Hospital),
            "respite_or_nursing" => Ok(Self::RespiteOrNursing),
            "dead" => Ok(Self::Dead),
            other => Err(Error::InvalidData(format!(
                "unknown location {other:?}; expected home, hospital, respite_or_nursing, or dead"
            ))),
        }
    }
}

impl fmt::Display for DailyLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Home => "home",
            Self::Hospital => "hospital",
            Self::RespiteOrNursing => "respite_or_nursing",
            Self::Dead => "dead",
        })
    }
}

/// Where the patient lived before surgery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineResidence {
    Home,
    Nursing,
}

impl FromStr for BaselineResidence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "home" => Ok(Self::Home),
            "nursing" => Ok(Self::Nursing),
            other => Err(Error::InvalidData(format!(
                "unknown baseline residence {other:?}; expected home or nursing"
            ))),
        }
    }
}

impl fmt::Display for BaselineResidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Home => "home",
            Self::Nursing => "nursing",
        })
    }
}

/// Which days count as "home" when scoring the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DahDefinition {
    /// Days alive and at home: institutional care days count as home only
    /// for patients who lived in nursing care before surgery.
    DaysAtHome,
    /// Days out of hospital: every non-hospital day counts as home.
    DaysOutOfHospital,
}

impl FromStr for DahDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dah" => Ok(Self::DaysAtHome),
            "dooh" => Ok(Self::DaysOutOfHospital),
            other => {
                Err(Error::InvalidData(format!("unknown outcome definition {other:?}; expected dah or dooh")))
            }
        }
    }
}

/// Per-patient baseline covariates, constant across a patient's rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientBaseline {
    pub sex: String,
    pub treatment: String,
    pub bmi_class: String,
    pub age_group: String,
    pub country: String,
    pub baseline_residence: BaselineResidence,
}

/// One long-format row: a patient-day with its location and the repeated
/// baseline columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub patient_id: String,
    /// Follow-up day, `1..=u`.
    pub day: i64,
    pub location: DailyLocation,
    #[serde(flatten)]
    pub baseline: PatientBaseline,
}

/// A validated single-patient trajectory: complete day coverage
/// `1..=u`, no duplicates, death absorbing, constant baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientTrajectory {
    pub patient_id: String,
    pub baseline: PatientBaseline,
    /// Location on day `d` at index `d - 1`.
    pub locations: Vec<DailyLocation>,
}

/// Group long-format rows into per-patient trajectories and check every
/// structural invariant. Patients keep their first-appearance order.
pub fn validate_trajectories(records: &[TrajectoryRecord], u: i64) -> Result<Vec<PatientTrajectory>> {
    if u <= 0 {
        return Err(Error::InvalidData(format!("follow-up window {u} must be positive")));
    }
    if records.is_empty() {
        return Err(Error::InvalidData("no trajectory rows".into()));
    }
    let days = u as usize;
    let mut order: Vec<String> = Vec::new();
    let mut by_patient: HashMap<String, (PatientBaseline, Vec<Option<DailyLocation>>)> =
        HashMap::new();

    for record in records {
        let id = &record.patient_id;
        if !(1..=u).contains(&record.day) {
            return Err(Error::InvalidData(format!(
                "patient {id}: day {} outside 1..={u}",
                record.day
            )));
        }
        let slot = by_patient.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (record.baseline.clone(), vec![None; days])
        });
        if slot.0 != record.baseline {
            return Err(Error::InvalidData(format!(
                "patient {id}: baseline covariates change between rows"
            )));
        }
        let index = (record.day - 1) as usize;
        if slot.1[index].is_some() {
            return Err(Error::InvalidData(format!("patient {id}: duplicate day {}", record.day)));
        }
        slot.1[index] = Some(record.location);
    }

    let mut trajectories = Vec::with_capacity(order.len());
    for id in order {
        let (baseline, slots) = by_patient.remove(&id).expect("grouped above");
        let mut locations = Vec::with_capacity(days);
        for (index, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(location) => locations.push(location),
                None => {
                    return Err(Error::InvalidData(format!(
                        "patient {id}: missing day {}",
                        index + 1
                    )))
                }
            }
        }
        if let Some(first_dead) = locations.iter().position(|&l| l == DailyLocation::Dead) {
            if let Some(offset) =
                locations[first_dead..].iter().position(|&l| l != DailyLocation::Dead)
            {
                return Err(Error::InvalidData(format!(
                    "patient {id}: alive on day {} after dying on day {}",
                    first_dead + offset + 1,
                    first_dead + 1
                )));
            }
        }
        trajectories.push(PatientTrajectory { patient_id: id, baseline, locations });
    }
    Ok(trajectories)
}

/// One patient's derived outcome record alongside its baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedPatient {
    pub patient_id: String,
    pub baseline: PatientBaseline,
    pub components: PatientComponents,
}

/// Cohort-level notes produced while deriving components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeriveSummary {
    /// Shortest initial hospital stay observed in the cohort.
    pub min_initial_stay: i64,
    /// Patients discharged before the protocol bound (their stay is a
    /// protocol observation rather than an extended one).
    pub short_stays: usize,
    /// Patients whose initial stay filled the whole window (the extended
    /// stay is right-censored at `u - p_tilde`).
    pub censored_stays: usize,
}

/// Reduce validated trajectories to outcome components. The initial stay
/// is the maximal hospital run starting on day one (ended by discharge,
/// death, or the window edge); subsequent non-home days are counted
/// after that run, on days the patient is alive, according to the outcome
/// definition; death anywhere in the window zeroes the outcome.
pub fn derive_components(
    trajectories: &[PatientTrajectory],
    u: i64,
    p_tilde: i64,
    definition: DahDefinition,
) -> Result<(Vec<DerivedPatient>, DeriveSummary)> {
    if !(0..=u).contains(&p_tilde) {
        return Err(Error::InvalidData(format!("protocol bound {p_tilde} outside 0..={u}")));
    }
    if trajectories.is_empty() {
        return Err(Error::InvalidData("no trajectories".into()));
    }
    let mut derived = Vec::with_capacity(trajectories.len());
    let mut summary =
        DeriveSummary { min_initial_stay: i64::MAX, short_stays: 0, censored_stays: 0 };

    for patient in trajectories {
        if patient.locations.len() != u as usize {
            return Err(Error::DimensionMismatch {
                what: format!("days for patient {}", patient.patient_id),
                expected: u as usize,
                found: patient.locations.len(),
            });
        }
        let dead = patient.locations.contains(&DailyLocation::Dead);
        let yi = patient
            .locations
            .iter()
            .take_while(|&&l| l == DailyLocation::Hospital)
            .count() as i64;

        let counts_as_home = |location: DailyLocation| -> bool {
            match location {
                DailyLocation::Home => true,
                DailyLocation::Hospital | DailyLocation::Dead => false,
                DailyLocation::RespiteOrNursing => match definition {
                    DahDefinition::DaysOutOfHospital => true,
                    DahDefinition::DaysAtHome => {
                        patient.baseline.baseline_residence == BaselineResidence::Nursing
                    }
                },
            }
        };
        let ys = patient.locations[yi as usize..]
            .iter()
            .filter(|&&l| l != DailyLocation::Dead && !counts_as_home(l))
            .count() as i64;

        let (protocol, ye) = if yi > p_tilde { (p_tilde, yi - p_tilde) } else { (yi, 0) };
        summary.min_initial_stay = summary.min_initial_stay.min(yi);
        if yi < p_tilde {
            summary.short_stays += 1;
        }
        if yi == u {
            summary.censored_stays += 1;
        }
        let components = PatientComponents::assemble(u, p_tilde, dead, protocol, ye, ys)
            .map_err(|e| {
                Error::InvalidData(format!("patient {}: {e}", patient.patient_id))
            })?;
        derived.push(DerivedPatient {
            patient_id: patient.patient_id.clone(),
            baseline: patient.baseline.clone(),
            components,
        });
    }
    Ok((derived, summary))
}

/// Build a component record directly from per-patient stay totals, for
/// cohorts supplied without daily locations: the initial stay splits into
/// its protocol and extended parts at the protocol bound.
pub fn components_from_stays(
    u: i64,
    p_tilde: i64,
    dead: bool,
    yi: i64,
    ys: i64,
) -> Result<PatientComponents> {
    if yi < 0 || ys < 0 {
        return Err(Error::InvalidData(format!("negative stay: yi={yi} ys={ys}")));
    }
    let (protocol, ye) = if yi > p_tilde { (p_tilde, yi - p_tilde) } else { (yi, 0) };
    PatientComponents::assemble(u, p_tilde, dead, protocol, ye, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline(residence: BaselineResidence) -> PatientBaseline {
        PatientBaseline {
            sex: "f".into(),
            treatment: "control".into(),
            bmi_class: "normal".into(),
            age_group: "70+".into(),
            country: "uk".into(),
            baseline_residence: residence,
        }
    }

    fn rows_for(
        id: &str,
        residence: BaselineResidence,
        locations: &[DailyLocation],
    ) -> Vec<TrajectoryRecord> {
        locations
            .iter()
            .enumerate()
            .map(|(i, &location)| TrajectoryRecord {
                patient_id: id.into(),
                day: i as i64 + 1,
                location,
                baseline: baseline(residence),
            })
            .collect()
    }

    fn pattern(spec: &[(usize, DailyLocation)]) -> Vec<DailyLocation> {
        spec.iter().flat_map(|&(n, l)| std::iter::repeat_n(l, n)).collect()
    }

    use DailyLocation::{Dead, Home, Hospital, RespiteOrNursing};

    #[test]
    fn protocol_discharge_scores_the_maximum_outcome() {
        let rows = rows_for("p1", BaselineResidence::Home, &pattern(&[(4, Hospital), (86, Home)]));
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let (derived, summary) =
            derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
        let c = derived[0].components;
        assert_eq!((c.yi, c.ys, c.dah), (4, 0, 86));
        assert!(!c.dead && !c.extended && !c.care);
        assert_eq!(summary.min_initial_stay, 4);
        assert_eq!(summary.short_stays, 0);
        assert_eq!(summary.censored_stays, 0);
    }

    #[test]
    fn death_zeroes_the_outcome_regardless_of_other_days() {
        let rows = rows_for(
            "p1",
            BaselineResidence::Home,
            &pattern(&[(4, Hospital), (5, Home), (81, Dead)]),
        );
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let (derived, _) =
            derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
        let c = derived[0].components;
        assert!(c.dead);
        assert_eq!(c.dah, 0);
        assert_eq!(c.yi, 4);
    }

    #[test]
    fn prior_nursing_residents_count_nursing_days_as_home() {
        let locations = pattern(&[(4, Hospital), (86, RespiteOrNursing)]);
        let at_home = |residence| {
            let rows = rows_for("p1", residence, &locations);
            let trajectories = validate_trajectories(&rows, 90).unwrap();
            let (derived, _) =
                derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
            derived[0].components
        };
        let from_nursing = at_home(BaselineResidence::Nursing);
        assert_eq!((from_nursing.ys, from_nursing.dah), (0, 86));
        let from_home = at_home(BaselineResidence::Home);
        assert_eq!((from_home.ys, from_home.dah), (86, 0));
    }

    #[test]
    fn the_out_of_hospital_definition_ignores_nursing_care() {
        let rows = rows_for(
            "p1",
            BaselineResidence::Home,
            &pattern(&[(10, Hospital), (20, RespiteOrNursing), (5, Hospital), (55, Home)]),
        );
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let (dah, _) = derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
        assert_eq!(dah[0].components.ys, 25);
        assert_eq!(dah[0].components.dah, 90 - 10 - 25);
        let (dooh, _) =
            derive_components(&trajectories, 90, 4, DahDefinition::DaysOutOfHospital).unwrap();
        assert_eq!(dooh[0].components.ys, 5);
        assert_eq!(dooh[0].components.dah, 90 - 10 - 5);
        assert!(dooh[0].components.extended);
        assert_eq!(dooh[0].components.ye, 6);
    }

    #[test]
    fn a_window_filling_stay_is_censored() {
        let rows = rows_for("p1", BaselineResidence::Home, &pattern(&[(90, Hospital)]));
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let (derived, summary) =
            derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
        let c = derived[0].components;
        assert_eq!((c.ye, c.yi, c.dah), (86, 90, 0));
        assert!(!c.dead);
        assert_eq!(summary.censored_stays, 1);
    }

    #[test]
    fn early_discharge_is_a_short_protocol_stay() {
        let rows = rows_for("p1", BaselineResidence::Home, &pattern(&[(2, Hospital), (88, Home)]));
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let (derived, summary) =
            derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
        let c = derived[0].components;
        assert_eq!((c.protocol, c.ye, c.dah), (2, 0, 88));
        assert!(!c.extended);
        assert_eq!(summary.short_stays, 1);
        assert_eq!(summary.min_initial_stay, 2);
    }

    #[test]
    fn readmissions_count_toward_subsequent_care() {
        let rows = rows_for(
            "p1",
            BaselineResidence::Home,
            &pattern(&[(6, Hospital), (30, Home), (10, Hospital), (44, Home)]),
        );
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let (derived, _) =
            derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
        let c = derived[0].components;
        assert_eq!((c.yi, c.ye, c.ys), (6, 2, 10));
        assert!(c.care);
        assert_eq!(c.dah, 90 - 6 - 10);
    }

    #[test]
    fn duplicate_days_are_rejected_with_the_patient_id() {
        let mut rows = rows_for("p7", BaselineResidence::Home, &pattern(&[(90, Home)]));
        rows[5].day = 3;
        let err = validate_trajectories(&rows, 90).unwrap_err();
        assert!(err.to_string().contains("p7"), "{err}");
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn missing_days_are_rejected() {
        let mut rows = rows_for("p8", BaselineResidence::Home, &pattern(&[(90, Home)]));
        rows.remove(41);
        let err = validate_trajectories(&rows, 90).unwrap_err();
        assert!(err.to_string().contains("missing day 42"), "{err}");
    }

    #[test]
    fn resurrection_is_rejected() {
        let rows = rows_for(
            "p9",
            BaselineResidence::Home,
            &pattern(&[(10, Hospital), (5, Dead), (75, Home)]),
        );
        let err = validate_trajectories(&rows, 90).unwrap_err();
        assert!(err.to_string().contains("p9"), "{err}");
        assert!(err.to_string().contains("after dying on day 11"), "{err}");
    }

    #[test]
    fn changing_baselines_are_rejected() {
        let mut rows = rows_for("p10", BaselineResidence::Home, &pattern(&[(90, Home)]));
        rows[10].baseline.country = "fr".into();
        let err = validate_trajectories(&rows, 90).unwrap_err();
        assert!(err.to_string().contains("baseline"), "{err}");
    }

    #[test]
    fn out_of_window_days_are_rejected() {
        let mut rows = rows_for("p11", BaselineResidence::Home, &pattern(&[(90, Home)]));
        rows[89].day = 91;
        let err = validate_trajectories(&rows, 90).unwrap_err();
        assert!(err.to_string().contains("91"), "{err}");
    }

    #[test]
    fn patients_keep_their_first_appearance_order() {
        let mut rows = rows_for("zulu", BaselineResidence::Home, &pattern(&[(90, Home)]));
        rows.extend(rows_for("alpha", BaselineResidence::Home, &pattern(&[(90, Home)])));
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let ids: Vec<&str> = trajectories.iter().map(|t| t.patient_id.as_str()).collect();
        assert_eq!(ids, ["zulu", "alpha"]);
    }

    #[test]
    fn interleaved_rows_group_by_patient() {
        let mut rows = Vec::new();
        let a = rows_for("a", BaselineResidence::Home, &pattern(&[(3, Hospital), (87, Home)]));
        let b = rows_for("b", BaselineResidence::Home, &pattern(&[(90, Hospital)]));
        for (ra, rb) in a.into_iter().zip(b) {
            rows.push(ra);
            rows.push(rb);
        }
        let trajectories = validate_trajectories(&rows, 90).unwrap();
        let (derived, _) =
            derive_components(&trajectories, 90, 4, DahDefinition::DaysAtHome).unwrap();
        assert_eq!(derived[0].components.dah, 87);
        assert_eq!(derived[1].components.dah, 0);
    }

    #[test]
    fn stay_totals_split_at_the_protocol_bound() {
        let direct = components_from_stays(90, 4, false, 9, 3).unwrap();
        assert_eq!((direct.protocol, direct.ye, direct.ys, direct.dah), (4, 5, 3, 78));
        let short = components_from_stays(90, 4, false, 2, 0).unwrap();
        assert_eq!((short.protocol, short.ye), (2, 0));
        assert!(components_from_stays(90, 4, false, -1, 0).is_err());
        assert!(components_from_stays(90, 4, false, 50, 50).is_err());
    }

    #[test]
    fn location_labels_round_trip() {
        for (label, location) in [
            ("home", Home),
            ("hospital", Hospital),
            ("respite_or_nursing", RespiteOrNursing),
            ("dead", Dead),
        ] {
            assert_eq!(label.parse::<DailyLocation>().unwrap(), location);
            assert_eq!(location.to_string(), label);
        }
        assert!("hotel".parse::<DailyLocation>().is_err());
        assert_eq!("dah".parse::<DahDefinition>().unwrap(), DahDefinition::DaysAtHome);
        assert_eq!("dooh".parse::<DahDefinition>().unwrap(), DahDefinition::DaysOutOfHospital);
        assert!("doh".parse::<DahDefinition>().is_err());
    }
}
