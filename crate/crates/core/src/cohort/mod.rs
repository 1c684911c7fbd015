//! Cohort files, the synthetic generator, augmentation and CV splitting.

mod augment;
mod simulate;
mod split;

pub use augment::{augment, AugmentConfig};
pub use simulate::{oracle_cindex, simulate_cohort, OracleCindex, SimulatedCohort, SimulationScenario};
pub use split::{stratified_repeated_kfold, Fold, SplitPlan};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_patient_graph, validate_graph, FeatureSchema, GraphError, NodeKind, PatientGraph};
use crate::objective::SurvivalLabel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cohort file is not valid JSON for the schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}")]
    Version(u32),
    #[error("patient {patient}: field {field}: {message}")]
    Field {
        patient: String,
        field: String,
        message: String,
    },
    #[error("patient {patient}: {source}")]
    Graph {
        patient: String,
        #[source]
        source: GraphError,
    },
    #[error("cohort of {n} patients cannot be split into {k} folds")]
    TooSmall { n: usize, k: usize },
    #[error("invalid split request: {0}")]
    Split(String),
}

fn field_err(patient: &str, field: impl Into<String>, message: impl Into<String>) -> CohortError {
    CohortError::Field {
        patient: patient.to_string(),
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub present: bool,
    pub features: Vec<f64>,
    pub centroid: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    /// Anatomical regions keyed by kind; absent regions may be omitted.
    pub regions: BTreeMap<NodeKind, RegionRecord>,
    /// Min-max normalized, each value in `[0, 1]`.
    pub clinical: Vec<f64>,
    pub dfs: SurvivalLabel,
    pub os: SurvivalLabel,
}

impl PatientRecord {
    pub fn graph(&self, schema: &FeatureSchema) -> Result<PatientGraph, GraphError> {
        let mut features = BTreeMap::new();
        let mut centroids = BTreeMap::new();
        for (&kind, r) in self.regions.iter().filter(|(_, r)| r.present) {
            features.insert(kind, r.features.clone());
            if let Some(c) = r.centroid {
                centroids.insert(kind, c);
            }
        }
        build_patient_graph(&self.id, schema, &features, &self.clinical, &centroids)
    }

    /// Checks label, clinical-range and graph invariants.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<PatientGraph, CohortError> {
        let id = self.id.as_str();
        for (name, l) in [("dfs", &self.dfs), ("os", &self.os)] {
            if !(l.time >= 0.0 && l.time.is_finite()) {
                return Err(field_err(
                    id,
                    format!("{name}.time_years"),
                    "must be finite and non-negative",
                ));
            }
        }
        if self.dfs.time > self.os.time {
            return Err(field_err(
                id,
                "dfs.time_years",
                format!("DFS time {} exceeds OS time {}", self.dfs.time, self.os.time),
            ));
        }
        if let Some(v) = self.clinical.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(field_err(id, "clinical", format!("value {v} outside [0, 1]")));
        }
        let graph = self.graph(schema).map_err(|source| CohortError::Graph {
            patient: self.id.clone(),
            source,
        })?;
        if let Some(v) = validate_graph(&graph).into_iter().next() {
            return Err(field_err(id, "regions", v));
        }
        Ok(graph)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub schema: FeatureSchema,
    pub patients: Vec<PatientRecord>,
}

// On-disk layout.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CohortFile {
    schema_version: u32,
    feature_schema: FeatureSchema,
    patients: Vec<PatientEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatientEntry {
    id: String,
    regions: BTreeMap<String, RegionEntry>,
    clinical: Vec<f64>,
    dfs: LabelEntry,
    os: LabelEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionEntry {
    present: bool,
    #[serde(default)]
    features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centroid: Option<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelEntry {
    time_years: f64,
    event: u8,
}

impl LabelEntry {
    fn to_label(&self, patient: &str, field: &str) -> Result<SurvivalLabel, CohortError> {
        let event = match self.event {
            0 => false,
            1 => true,
            other => {
                return Err(field_err(
                    patient,
                    format!("{field}.event"),
                    format!("{other} is not 0 or 1"),
                ))
            }
        };
        SurvivalLabel::new(self.time_years, event)
            .map_err(|e| field_err(patient, format!("{field}.time_years"), e.to_string()))
    }

    fn from_label(l: &SurvivalLabel) -> Self {
        Self {
            time_years: l.time,
            event: u8::from(l.event),
        }
    }
}

impl Cohort {
    pub fn from_json(text: &str) -> Result<Self, CohortError> {
        let file: CohortFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CohortError::Version(file.schema_version));
        }
        let schema = file.feature_schema;
        let mut patients = Vec::with_capacity(file.patients.len());
        for p in file.patients {
            let mut regions = BTreeMap::new();
            for (key, r) in p.regions {
                let kind = NodeKind::from_region_key(&key)
                    .ok_or_else(|| field_err(&p.id, format!("regions.{key}"), "unknown region"))?;
                if r.present && r.centroid.is_none() {
                    return Err(field_err(
                        &p.id,
                        format!("regions.{key}.centroid"),
                        "required when present",
                    ));
                }
                regions.insert(
                    kind,
                    RegionRecord {
                        present: r.present,
                        features: r.features,
                        centroid: r.centroid,
                    },
                );
            }
            let record = PatientRecord {
                dfs: p.dfs.to_label(&p.id, "dfs")?,
                os: p.os.to_label(&p.id, "os")?,
                id: p.id,
                regions,
                clinical: p.clinical,
            };
            record.validate(&schema)?;
            patients.push(record);
        }
        Ok(Self { schema, patients })
    }

    pub fn to_json(&self) -> String {
        let file = CohortFile {
            schema_version: SCHEMA_VERSION,
            feature_schema: self.schema,
            patients: self
                .patients
                .iter()
                .map(|p| PatientEntry {
                    id: p.id.clone(),
                    regions: p
                        .regions
                        .iter()
                        .map(|(k, r)| {
                            (
                                k.region_key().expect("regions are anatomical").to_string(),
                                RegionEntry {
                                    present: r.present,
                                    features: r.features.clone(),
                                    centroid: r.centroid,
                                },
                            )
                        })
                        .collect(),
                    clinical: p.clinical.clone(),
                    dfs: LabelEntry::from_label(&p.dfs),
                    os: LabelEntry::from_label(&p.os),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("cohort serializes")
    }

    /// Graphs in patient order; records were validated on load.
    pub fn graphs(&self) -> Result<Vec<PatientGraph>, CohortError> {
        self.patients
            .iter()
            .map(|p| {
                p.graph(&self.schema).map_err(|source| CohortError::Graph {
                    patient: p.id.clone(),
                    source,
                })
            })
            .collect()
    }
}

pub fn load_cohort(path: &Path) -> Result<Cohort, CohortError> {
    let text = std::fs::read_to_string(path).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Cohort::from_json(&text)
}

pub fn write_cohort(cohort: &Cohort, path: &Path) -> Result<(), CohortError> {
    std::fs::write(path, cohort.to_json()).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patient_json(id: &str, dfs: f64, os: f64, remnant_present: bool) -> String {
        let remnant = if remnant_present {
            r#"{"present": true, "features": [0.1, 0.2], "centroid": [0.0, 0.1, 0.2]}"#
        } else {
            r#"{"present": false}"#
        };
        format!(
            r#"{{"id": "{id}",
                "regions": {{
                    "liver": {{"present": true, "features": [1.0, 2.0], "centroid": [0.1, 0.0, 0.0]}},
                    "remnant": {remnant},
                    "tumors": {{"present": true, "features": [0.5, -0.5], "centroid": [0.2, 0.2, 0.2]}}
                }},
                "clinical": [0.0, 0.5, 1.0],
                "dfs": {{"time_years": {dfs}, "event": 1}},
                "os": {{"time_years": {os}, "event": 0}}}}"#
        )
    }

    fn file(patients: &[String]) -> String {
        format!(
            r#"{{"schema_version": 1, "feature_schema": {{"region_len": 2, "clinical_len": 3}},
                "patients": [{}]}}"#,
            patients.join(",")
        )
    }

    #[test]
    fn loads_valid_file_in_order() {
        let text = file(&[
            patient_json("a", 1.0, 2.0, true),
            patient_json("b", 0.5, 3.0, true),
            patient_json("c", 2.0, 2.0, true),
        ]);
        let c = Cohort::from_json(&text).unwrap();
        let ids: Vec<&str> = c.patients.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(c.patients[0].dfs.event && !c.patients[0].os.event);
    }

    #[test]
    fn rejects_dfs_after_os() {
        let err = Cohort::from_json(&file(&[patient_json("bad", 3.0, 2.0, true)])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad") && msg.contains("dfs"), "{msg}");
    }

    #[test]
    fn absent_region_is_omitted() {
        let c = Cohort::from_json(&file(&[patient_json("a", 1.0, 2.0, false)])).unwrap();
        let g = &c.graphs().unwrap()[0];
        assert!(!g.is_present(NodeKind::FutureLiverRemnant));
        assert_eq!(g.present_kinds().len(), 4);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let text = file(&[patient_json("p1", 1.0, 2.0, true).replace("\"event\": 0", "\"event\": 2")]);
        let msg = Cohort::from_json(&text).unwrap_err().to_string();
        assert!(msg.contains("p1") && msg.contains("os.event"), "{msg}");

        let text = file(&[patient_json("p2", 1.0, 2.0, true).replace("[0.0, 0.5, 1.0]", "[0.0, 0.5, 1.5]")]);
        let msg = Cohort::from_json(&text).unwrap_err().to_string();
        assert!(msg.contains("p2") && msg.contains("clinical"), "{msg}");

        let text = file(&[patient_json("p3", 1.0, 2.0, true)])
            .replace("\"clinical_len\": 3", "\"clinical_len\": 3, \"extra\": 1");
        assert!(matches!(Cohort::from_json(&text), Err(CohortError::Parse(_))));
    }

    #[test]
    fn json_round_trip() {
        let c = Cohort::from_json(&file(&[
            patient_json("a", 1.0, 2.0, false),
            patient_json("b", 0.2, 0.4, true),
        ]))
        .unwrap();
        assert_eq!(Cohort::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.json");
        let c = Cohort::from_json(&file(&[patient_json("a", 1.0, 2.0, true)])).unwrap();
        write_cohort(&c, &path).unwrap();
        assert_eq!(load_cohort(&path).unwrap(), c);
        assert!(matches!(
            load_cohort(&dir.path().join("missing.json")),
            Err(CohortError::Io { .. })
        ));
    }
}
