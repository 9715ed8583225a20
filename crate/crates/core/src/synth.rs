//! Synthetic regression datasets with a known informative subset.
//!
//! Generates a feature matrix of i.i.d. uniforms, plants a linear signal
//! on a random subset of columns, and adds Gaussian noise. The generator
//! writes a CSV + schema pair the `data` module ingests directly plus a
//! `truth.json` sidecar recording the planted ground truth for recovery
//! tests.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Cell, ColumnKind, Dataset, RawTable};
use crate::error::{Error, Result};

pub const TRUTH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub informative: usize,
    pub noise: usize,
    pub noise_sigma: f64,
    /// Planted coefficients are drawn uniformly from this range.
    pub coef_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 200,
            informative: 5,
            noise: 20,
            noise_sigma: 0.5,
            coef_range: (3.0, 4.0),
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn total_features(&self) -> usize {
        self.informative + self.noise
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("synth needs n >= 2, got {}", self.n)));
        }
        if self.informative == 0 {
            return Err(Error::Config("synth needs at least one informative feature".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        let (lo, hi) = self.coef_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config("coefficient range must satisfy 0 < lo <= hi".into()));
        }
        Ok(())
    }
}

/// A generated dataset plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub spec: SynthSpec,
    pub feature_names: Vec<String>,
    /// Row-major feature matrix, values in [0, 1).
    pub rows: Vec<Vec<f64>>,
    pub response: Vec<f64>,
    /// Sorted indices of the planted informative features.
    pub informative_indices: Vec<usize>,
    /// Coefficients aligned with `informative_indices`.
    pub coefficients: Vec<f64>,
}

/// Ground-truth sidecar document (`truth.json`).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruthFile {
    pub schema_version: u32,
    pub seed: u64,
    pub n: usize,
    pub informative: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub noise_sigma: f64,
    pub coef_range: (f64, f64),
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.total_features();

    let mut indices: Vec<usize> = (0..p).collect();
    indices.shuffle(&mut rng);
    let mut informative_indices: Vec<usize> = indices[..spec.informative].to_vec();
    informative_indices.sort_unstable();

    let (lo, hi) = spec.coef_range;
    let coefficients: Vec<f64> = (0..spec.informative)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
        .collect();

    let rows: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
        .collect();

    // Noise draws are independent of sigma so that sigma = 0 reproduces
    // the same design matrix.
    let response: Vec<f64> = rows
        .iter()
        .map(|row| {
            let signal: f64 = informative_indices
                .iter()
                .zip(&coefficients)
                .map(|(&j, &c)| c * row[j])
                .sum();
            let z: f64 = StandardNormal.sample(&mut rng);
            signal + spec.noise_sigma * z
        })
        .collect();

    let feature_names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok(SynthOutput {
        spec: *spec,
        feature_names,
        rows,
        response,
        informative_indices,
        coefficients,
    })
}

/// Build the in-memory table the CSV would parse to.
pub fn to_raw_table(output: &SynthOutput) -> RawTable {
    let mut columns: Vec<(String, ColumnKind)> = output
        .feature_names
        .iter()
        .map(|name| (name.clone(), ColumnKind::Numeric))
        .collect();
    columns.push(("price".into(), ColumnKind::Numeric));
    let rows = output
        .rows
        .iter()
        .zip(&output.response)
        .map(|(row, &y)| {
            let mut cells: Vec<Cell> = row.iter().map(|&v| Cell::Number(v)).collect();
            cells.push(Cell::Number(y));
            cells
        })
        .collect();
    RawTable { columns, response_column: "price".into(), rows }
}

/// Generated dataset as a preprocessed [`Dataset`] (same path CSV
/// ingestion takes).
pub fn to_dataset(output: &SynthOutput) -> Result<Dataset> {
    crate::data::preprocess(&to_raw_table(output))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub csv: PathBuf,
    pub schema: PathBuf,
    pub truth: PathBuf,
}

/// Write `<stem>.csv`, `<stem>.schema` and `<stem>.truth.json` under
/// `dir`. Byte-deterministic for a fixed spec.
pub fn write_files(dir: &Path, stem: &str, output: &SynthOutput) -> Result<SynthFiles> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let schema_path = dir.join(format!("{stem}.schema"));
    let truth_path = dir.join(format!("{stem}.truth.json"));

    let mut csv = String::new();
    csv.push_str(&output.feature_names.join(","));
    csv.push_str(",price\n");
    for (row, &y) in output.rows.iter().zip(&output.response) {
        for v in row {
            csv.push_str(&format!("{v},"));
        }
        csv.push_str(&format!("{y}\n"));
    }
    std::fs::write(&csv_path, csv)?;

    let mut schema = String::new();
    for name in &output.feature_names {
        schema.push_str(&format!("{name} = numeric\n"));
    }
    schema.push_str("price = numeric\nresponse = price\n");
    std::fs::write(&schema_path, schema)?;

    let truth = TruthFile {
        schema_version: TRUTH_SCHEMA_VERSION,
        seed: output.spec.seed,
        n: output.spec.n,
        informative: output.informative_indices.clone(),
        coefficients: output.coefficients.clone(),
        noise_sigma: output.spec.noise_sigma,
        coef_range: output.spec.coef_range,
    };
    let mut body = serde_json::to_string_pretty(&truth)
        .map_err(|e| Error::Report(format!("truth serialization: {e}")))?;
    body.push('\n');
    std::fs::write(&truth_path, body)?;

    Ok(SynthFiles { csv: csv_path, schema: schema_path, truth: truth_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{fit_ols, gather, metrics, R2Convention};

    #[test]
    fn feature_and_column_counts() {
        let spec = SynthSpec { n: 200, informative: 5, noise: 20, ..SynthSpec::default() };
        let out = generate(&spec).unwrap();
        assert_eq!(out.feature_names.len(), 25);
        assert_eq!(out.rows.len(), 200);
        assert_eq!(out.informative_indices.len(), 5);

        let dir = tempfile::tempdir().unwrap();
        let files = write_files(dir.path(), "toy", &out).unwrap();
        let header = std::fs::read_to_string(&files.csv)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .split(',')
            .count();
        assert_eq!(header, 26); // 25 features + response
    }

    #[test]
    fn zero_noise_is_exactly_linear() {
        let spec = SynthSpec { noise_sigma: 0.0, seed: 7, ..SynthSpec::default() };
        let out = generate(&spec).unwrap();
        let ds = to_dataset(&out).unwrap();
        let rows: Vec<usize> = (0..ds.n()).collect();
        let (x, y) = gather(&ds, &rows, &out.informative_indices);
        let (b0, coefs) = fit_ols(&x, &y).unwrap();
        let m = metrics(&x, &y, b0, &coefs, R2Convention::Paper).unwrap();
        assert!(m.r2 > 1.0 - 1e-10, "r2 = {}", m.r2);
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec { n: 50, informative: 3, noise: 4, seed: 99, ..SynthSpec::default() };
        let dir = tempfile::tempdir().unwrap();
        let a = write_files(&dir.path().join("a"), "d", &generate(&spec).unwrap()).unwrap();
        let b = write_files(&dir.path().join("b"), "d", &generate(&spec).unwrap()).unwrap();
        for (x, y) in [(&a.csv, &b.csv), (&a.schema, &b.schema), (&a.truth, &b.truth)] {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let spec = SynthSpec { n: 30, informative: 2, noise: 3, seed: 5, ..SynthSpec::default() };
        let out = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_files(dir.path(), "rt", &out).unwrap();
        let schema = crate::data::Schema::from_file(&files.schema).unwrap();
        let raw = crate::data::load_csv(&files.csv, &schema).unwrap();
        assert_eq!(raw.rows.len(), 30);
        assert_eq!(raw.missing_count(), 0);
        // Shortest-round-trip float formatting makes the reparse exact.
        let ds_file = crate::data::preprocess(&raw).unwrap();
        let ds_mem = to_dataset(&out).unwrap();
        assert_eq!(ds_file.x(), ds_mem.x());
        assert_eq!(ds_file.y(), ds_mem.y());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&SynthSpec { n: 1, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { informative: 0, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { coef_range: (0.0, 1.0), ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { noise_sigma: -1.0, ..SynthSpec::default() }).is_err());
    }
}
