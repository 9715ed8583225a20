//! Machine-readable output documents.
//!
//! Every JSON artifact carries `schema_version` and a `kind` tag; the
//! matching JSON Schema files live under `schemas/` in the repository.
//! Writers are byte-deterministic for identical inputs: structs
//! serialize in declaration order, floats print in shortest round-trip
//! form, and non-finite crowding distances map to `null`.

use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::benchmarks::BenchmarkResult;
use crate::error::{Error, Result};
use crate::fusion::{FusionReport, ParetoMemberScore};
use crate::mopso::ParetoArchive;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One archive member in `pareto.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoMemberRecord {
    pub selected: Vec<usize>,
    pub lambda: f64,
    pub rmse_cv: f64,
    pub n_features: usize,
    /// `null` encodes an unbounded (boundary) crowding distance.
    pub crowding: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoDocument {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub members: Vec<ParetoMemberRecord>,
}

impl ParetoDocument {
    pub fn from_archive(archive: &ParetoArchive, seed: u64, feature_names: &[String]) -> ParetoDocument {
        let members = archive
            .members()
            .iter()
            .map(|m| ParetoMemberRecord {
                selected: m.selected_indices(),
                lambda: m.lambda,
                rmse_cv: m.objectives.rmse_cv,
                n_features: m.objectives.cardinality,
                crowding: if m.crowding.is_finite() { Some(m.crowding) } else { None },
            })
            .collect();
        ParetoDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: "pareto".into(),
            seed,
            feature_names: feature_names.to_vec(),
            members,
        }
    }
}

/// Sparse entry of the feature-by-member ESS matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssTriplet {
    pub feature: usize,
    pub member: usize,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionMetricsBlock {
    pub ols: crate::fusion::ModelAssessment,
    pub elastic_net: crate::fusion::ModelAssessment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionDocument {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub policy: String,
    pub lambda_eval: f64,
    pub member_scores: Vec<ParetoMemberScore>,
    /// Sparse triplets of the ESS matrix, nonzero entries only.
    pub ess_matrix: Vec<EssTriplet>,
    /// Union of features selected by any member (original indices).
    pub feature_indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub threshold: f64,
    pub fallback_used: bool,
    pub metrics: FusionMetricsBlock,
}

impl FusionDocument {
    pub fn from_report(report: &FusionReport, seed: u64, feature_names: &[String]) -> FusionDocument {
        let mut ess_matrix = Vec::new();
        for (f, row) in report.ess.ess.iter().enumerate() {
            for (m, &value) in row.iter().enumerate() {
                if value != 0.0 {
                    ess_matrix.push(EssTriplet {
                        feature: report.ess.feature_indices[f],
                        member: m,
                        ess: value,
                    });
                }
            }
        }
        FusionDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: "fusion".into(),
            seed,
            policy: report.policy.clone(),
            lambda_eval: report.lambda_eval,
            member_scores: report.member_scores.clone(),
            ess_matrix,
            feature_indices: report.ess.feature_indices.clone(),
            scores: report.scores.clone(),
            selected: report.selected.clone(),
            selected_names: report
                .selected
                .iter()
                .map(|&j| feature_names[j].clone())
                .collect(),
            threshold: report.threshold_used,
            fallback_used: report.fallback_used,
            metrics: FusionMetricsBlock {
                ols: report.ols.clone(),
                elastic_net: report.elastic_net.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarksDocument {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub results: Vec<BenchmarkResult>,
    /// Wall-clock seconds per result; only written when timings are
    /// requested, since they are not reproducible bytes.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_times_s: Option<Vec<f64>>,
}

impl BenchmarksDocument {
    pub fn new(results: Vec<BenchmarkResult>, seed: u64, with_timings: bool) -> BenchmarksDocument {
        let wall_times_s = with_timings.then(|| results.iter().map(|r| r.wall_time_s).collect());
        BenchmarksDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: "benchmarks".into(),
            seed,
            results,
            wall_times_s,
        }
    }
}

/// Serialize a document and verify the written bytes parse back.
pub fn write_json<T: Serialize + DeserializeOwned>(path: &Path, document: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(document)
        .map_err(|e| Error::Report(format!("serialize {}: {e}", path.display())))?;
    body.push('\n');
    std::fs::write(path, &body)?;
    let _: T = read_json(path)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Report(format!("parse {}: {e}", path.display())))
}

/// `pareto_front.csv`: one `rmse_cv,n_features` row per archive member.
pub fn write_pareto_front_csv(path: &Path, archive: &ParetoArchive) -> Result<()> {
    let mut body = String::from("rmse_cv,n_features\n");
    for member in archive.members() {
        body.push_str(&format!(
            "{},{}\n",
            member.objectives.rmse_cv, member.objectives.cardinality
        ));
    }
    std::fs::write(path, body)?;
    Ok(())
}

/// One row of `wilcoxon.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonRow {
    pub method_a: String,
    pub method_b: String,
    pub metric: String,
    pub alternative: String,
    pub n: usize,
    /// `None` marks an undefined comparison (identical samples).
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub reject_at_90: Option<bool>,
    pub note: String,
}

pub fn write_wilcoxon_csv(path: &Path, rows: &[WilcoxonRow]) -> Result<()> {
    let mut body =
        String::from("method_a,method_b,metric,alternative,n,statistic,p_value,reject_at_0.90,note\n");
    for row in rows {
        let stat = row.statistic.map(|v| v.to_string()).unwrap_or_default();
        let p = row.p_value.map(|v| v.to_string()).unwrap_or_default();
        let decision = match row.reject_at_90 {
            Some(true) => "reject",
            Some(false) => "accept",
            None => "undefined",
        };
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.method_a,
            row.method_b,
            row.metric,
            row.alternative,
            row.n,
            stat,
            p,
            decision,
            row.note
        ));
    }
    std::fs::write(path, body)?;
    Ok(())
}

/// A labeled metric series pulled out of a report file, the unit of
/// pairing for statistical comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSeries {
    pub label: String,
    /// Per-fold RMSE of the method's final model.
    pub fold_rmse: Vec<f64>,
    /// Scalar summary metrics by name.
    pub summaries: Vec<(String, f64)>,
}

impl MethodSeries {
    pub fn summary(&self, name: &str) -> Option<f64> {
        self.summaries
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }
}

#[derive(Deserialize)]
struct KindProbe {
    schema_version: u32,
    kind: String,
}

/// Extract the method series from a `fusion` or `benchmarks` document.
pub fn load_method_series(path: &Path) -> Result<Vec<MethodSeries>> {
    let probe: KindProbe = read_json(path)?;
    if probe.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::Report(format!(
            "{}: unsupported schema_version {}",
            path.display(),
            probe.schema_version
        )));
    }
    match probe.kind.as_str() {
        "fusion" => {
            let doc: FusionDocument = read_json(path)?;
            let summarize = |a: &crate::fusion::ModelAssessment| {
                vec![
                    ("train_rmse_cv".to_string(), a.train_rmse_cv),
                    ("test_rmse".to_string(), a.test_rmse),
                    ("train_r2_adj".to_string(), a.train_r2_adj),
                    ("test_r2_adj".to_string(), a.test_r2_adj),
                ]
            };
            Ok(vec![
                MethodSeries {
                    label: "fusion-ols".into(),
                    fold_rmse: doc.metrics.ols.train_fold_rmse.clone(),
                    summaries: summarize(&doc.metrics.ols),
                },
                MethodSeries {
                    label: "fusion-en".into(),
                    fold_rmse: doc.metrics.elastic_net.train_fold_rmse.clone(),
                    summaries: summarize(&doc.metrics.elastic_net),
                },
            ])
        }
        "benchmarks" => {
            let doc: BenchmarksDocument = read_json(path)?;
            Ok(doc
                .results
                .iter()
                .map(|r| MethodSeries {
                    label: format!("{}:{}", r.method, r.scenario),
                    fold_rmse: r.fold_rmse.clone(),
                    summaries: vec![
                        ("train_rmse_cv".to_string(), r.train_rmse_cv),
                        ("test_rmse".to_string(), r.test_rmse),
                        ("train_r2_adj".to_string(), r.train_r2_adj),
                        ("test_r2_adj".to_string(), r.test_r2_adj),
                    ],
                })
                .collect())
        }
        other => Err(Error::Report(format!(
            "{}: unknown report kind '{other}'",
            path.display()
        ))),
    }
}

/// Canonical artifact names each subcommand writes.
pub fn artifact_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mopso::{EvaluatedSolution, Objectives};

    fn tiny_archive() -> ParetoArchive {
        let mut archive = ParetoArchive::new(4);
        archive.update(vec![
            EvaluatedSolution {
                mask: vec![true, false],
                lambda: 0.25,
                objectives: Objectives { rmse_cv: 1.5, cardinality: 1 },
                crowding: 0.0,
                position: vec![0.9, 0.1, 0.25],
            },
            EvaluatedSolution {
                mask: vec![true, true],
                lambda: 0.5,
                objectives: Objectives { rmse_cv: 1.0, cardinality: 2 },
                crowding: 0.0,
                position: vec![0.9, 0.9, 0.5],
            },
        ]);
        archive
    }

    #[test]
    fn pareto_document_round_trips() {
        let archive = tiny_archive();
        let names = vec!["a".to_string(), "b".to_string()];
        let doc = ParetoDocument::from_archive(&archive, 7, &names);
        assert_eq!(doc.members.len(), 2);
        // Infinite crowding serializes as null.
        assert!(doc.members.iter().all(|m| m.crowding.is_none()));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pareto.json");
        write_json(&path, &doc).unwrap();
        let back: ParetoDocument = read_json(&path).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn pareto_front_csv_shape() {
        let archive = tiny_archive();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pareto_front.csv");
        write_pareto_front_csv(&path, &archive).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "rmse_cv,n_features");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1,2"); // canonical order: ascending rmse
        assert_eq!(lines[2], "1.5,1");
    }

    #[test]
    fn wilcoxon_csv_undefined_rows() {
        let rows = vec![WilcoxonRow {
            method_a: "fusion-ols".into(),
            method_b: "ga-lr:wr0.5-wp0.5".into(),
            metric: "rmse".into(),
            alternative: "a-less".into(),
            n: 10,
            statistic: None,
            p_value: None,
            reject_at_90: None,
            note: "identical samples".into(),
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wilcoxon.csv");
        write_wilcoxon_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("undefined"));
        assert!(text.lines().nth(1).unwrap().contains("identical samples"));
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("odd.json");
        std::fs::write(&path, "{\"schema_version\":1,\"kind\":\"mystery\"}\n").unwrap();
        assert!(load_method_series(&path).is_err());
    }
}
