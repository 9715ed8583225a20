//! Tabular ingestion and preprocessing.
//!
//! A CSV file plus a schema file (column kinds and the response name) is
//! loaded into a [`RawTable`], cleaned and encoded into a [`Dataset`]
//! (rows with missing values dropped, categoricals expanded to indicator
//! columns, features min-max scaled to `[0, 1]`, response left in its
//! original units), and partitioned by [`split`] and [`make_folds`].

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Column kinds plus the response name, parsed from a schema file.
///
/// The file is line-oriented key-value text: `<column> = numeric` or
/// `<column> = categorical`, one per column, plus a single
/// `response = <column>` line. `#` starts a comment.
#[derive(Debug, Clone)]
pub struct Schema {
    pub kinds: BTreeMap<String, ColumnKind>,
    pub response: String,
}

impl Schema {
    pub fn from_file(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Schema> {
        let mut kinds = BTreeMap::new();
        let mut response = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("schema line {}: expected 'name = kind'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key == "response" {
                if response.replace(value.to_string()).is_some() {
                    return Err(Error::Config("schema declares response twice".into()));
                }
                continue;
            }
            let kind = match value {
                "numeric" => ColumnKind::Numeric,
                "categorical" => ColumnKind::Categorical,
                other => {
                    return Err(Error::Config(format!(
                        "schema line {}: unknown kind '{}'",
                        lineno + 1,
                        other
                    )))
                }
            };
            if kinds.insert(key.to_string(), kind).is_some() {
                return Err(Error::Config(format!("schema declares '{}' twice", key)));
            }
        }
        let response = response.ok_or_else(|| Error::Config("schema lacks a response line".into()))?;
        Ok(Schema { kinds, response })
    }
}

/// One parsed cell. Numeric cells that fail to parse are recorded as missing.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Number(f64),
    Label(String),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Parsed table prior to cleaning: missing cells are still present.
#[derive(Debug, Clone)]
pub struct RawTable {
    /// Columns in file order, response included.
    pub columns: Vec<(String, ColumnKind)>,
    pub response_column: String,
    pub rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn missing_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|c| c.is_missing()).count())
            .sum()
    }
}

/// Load a CSV file (UTF-8, comma separated, header row, empty cell = missing)
/// against a schema covering every header column.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    if !path.exists() {
        return Err(Error::Data(format!("missing file: {}", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;

    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = std::collections::BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.clone()) {
            return Err(Error::Data(format!("duplicate header column '{}'", h)));
        }
    }
    let mut columns = Vec::with_capacity(headers.len());
    for h in &headers {
        let kind = schema
            .kinds
            .get(h)
            .copied()
            .ok_or_else(|| Error::Data(format!("header/schema mismatch: column '{}' not in schema", h)))?;
        columns.push((h.clone(), kind));
    }
    for name in schema.kinds.keys() {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::Data(format!(
                "header/schema mismatch: schema column '{}' not in file",
                name
            )));
        }
    }
    let response_idx = headers
        .iter()
        .position(|h| *h == schema.response)
        .ok_or_else(|| Error::Data("response column absent".into()))?;
    if columns[response_idx].1 != ColumnKind::Numeric {
        return Err(Error::Data("response column is categorical".into()));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut row = Vec::with_capacity(columns.len());
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            let cell = if field.is_empty() {
                Cell::Missing
            } else {
                match columns[j].1 {
                    ColumnKind::Numeric => match field.parse::<f64>() {
                        Ok(v) if v.is_finite() => Cell::Number(v),
                        _ => Cell::Missing,
                    },
                    ColumnKind::Categorical => Cell::Label(field.to_string()),
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }

    Ok(RawTable {
        columns,
        response_column: schema.response.clone(),
        rows,
    })
}

/// Clean, encoded, scaled dataset. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    feature_names: Vec<String>,
    /// Per-column (min, max) in original units, used by the scaling map.
    scaling: Vec<(f64, f64)>,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        feature_names: Vec<String>,
        scaling: Vec<(f64, f64)>,
    ) -> Result<Dataset> {
        let (n, p) = (x.nrows(), x.ncols());
        if n < 2 {
            return Err(Error::Data(format!("dataset needs at least 2 rows, got {}", n)));
        }
        if p < 1 {
            return Err(Error::Data("dataset needs at least 1 feature column".into()));
        }
        if y.len() != n {
            return Err(Error::Data("response length does not match row count".into()));
        }
        if feature_names.len() != p || scaling.len() != p {
            return Err(Error::Data("feature metadata does not match column count".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.clone()) {
                return Err(Error::Data(format!("duplicate feature name '{}'", name)));
            }
        }
        if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Data("scaled feature values must lie in [0, 1]".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("response contains non-finite values".into()));
        }
        Ok(Dataset { x, y, feature_names, scaling })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Contiguous slice of column `j` (the matrix is column-major).
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn scaling(&self) -> &[(f64, f64)] {
        &self.scaling
    }

    /// Map a scaled cell of column `j` back to original units.
    pub fn unscale(&self, j: usize, scaled: f64) -> f64 {
        let (min, max) = self.scaling[j];
        if min == max {
            min
        } else {
            min + scaled * (max - min)
        }
    }
}

fn scale_cell(value: f64, min: f64, max: f64) -> f64 {
    if min == max {
        0.0 // constant column convention
    } else {
        ((value - min) / (max - min)).clamp(0.0, 1.0)
    }
}

/// Drop rows with missing values, expand categoricals to indicators,
/// min-max scale features. The response stays unscaled.
pub fn preprocess(raw: &RawTable) -> Result<Dataset> {
    let response_idx = raw
        .columns
        .iter()
        .position(|(name, _)| *name == raw.response_column)
        .ok_or_else(|| Error::Data("response column absent".into()))?;

    let clean: Vec<&Vec<Cell>> = raw
        .rows
        .iter()
        .filter(|row| !row.iter().any(|c| c.is_missing()))
        .collect();
    if clean.is_empty() {
        return Err(Error::Data("zero rows remain after dropping missing values".into()));
    }

    // Expand columns: numeric pass through, categorical become one
    // indicator per level, levels discovered from data in lexicographic
    // order so column ordering is reproducible.
    let mut feature_names = Vec::new();
    let mut raw_columns: Vec<Vec<f64>> = Vec::new();
    for (j, (name, kind)) in raw.columns.iter().enumerate() {
        if j == response_idx {
            continue;
        }
        match kind {
            ColumnKind::Numeric => {
                let col = clean
                    .iter()
                    .map(|row| match &row[j] {
                        Cell::Number(v) => Ok(*v),
                        _ => Err(Error::Data(format!("non-numeric cell in numeric column '{}'", name))),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                feature_names.push(name.clone());
                raw_columns.push(col);
            }
            ColumnKind::Categorical => {
                let mut levels = std::collections::BTreeSet::new();
                for row in &clean {
                    match &row[j] {
                        Cell::Label(l) => {
                            levels.insert(l.clone());
                        }
                        _ => return Err(Error::Data(format!("non-label cell in categorical column '{}'", name))),
                    }
                }
                for level in levels {
                    let col = clean
                        .iter()
                        .map(|row| match &row[j] {
                            Cell::Label(l) if *l == level => 1.0,
                            _ => 0.0,
                        })
                        .collect();
                    feature_names.push(format!("{}={}", name, level));
                    raw_columns.push(col);
                }
            }
        }
    }
    if raw_columns.is_empty() {
        return Err(Error::Data("zero feature columns".into()));
    }

    let y: Vec<f64> = clean
        .iter()
        .map(|row| match &row[response_idx] {
            Cell::Number(v) => Ok(*v),
            _ => Err(Error::Data("non-numeric response cell".into())),
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = clean.len();
    let p = raw_columns.len();
    let mut scaling = Vec::with_capacity(p);
    let mut x = DMatrix::zeros(n, p);
    for (jj, col) in raw_columns.iter().enumerate() {
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        scaling.push((min, max));
        for (i, &v) in col.iter().enumerate() {
            x[(i, jj)] = scale_cell(v, min, max);
        }
    }

    Dataset::new(x, DVector::from_vec(y), feature_names, scaling)
}

/// Deterministic row split. The training side takes `floor(fraction * n)`
/// rows; scaling statistics are recomputed on the training rows only and
/// reapplied to both sides (test cells outside the training range clamp
/// to the [0, 1] box).
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Data(format!(
            "train_fraction must lie in (0, 1), got {}",
            train_fraction
        )));
    }
    let n = ds.n();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Data("split leaves one side empty".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut train_rows: Vec<usize> = order[..n_train].to_vec();
    let mut test_rows: Vec<usize> = order[n_train..].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();

    // Back to original units, then rescale both parts with train-only stats.
    let p = ds.p();
    let unscaled = |rows: &[usize], j: usize| -> Vec<f64> {
        rows.iter().map(|&i| ds.unscale(j, ds.x()[(i, j)])).collect()
    };

    let mut scaling = Vec::with_capacity(p);
    for j in 0..p {
        let col = unscaled(&train_rows, j);
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        scaling.push((min, max));
    }

    let build = |rows: &[usize]| -> Result<Dataset> {
        let mut x = DMatrix::zeros(rows.len(), p);
        for j in 0..p {
            let (min, max) = scaling[j];
            for (ii, &i) in rows.iter().enumerate() {
                x[(ii, j)] = scale_cell(ds.unscale(j, ds.x()[(i, j)]), min, max);
            }
        }
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| ds.y()[i]));
        Dataset::new(x, y, ds.feature_names().to_vec(), scaling.clone())
    };

    Ok((build(&train_rows)?, build(&test_rows)?))
}

/// Fold assignment for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignments[i]` is the fold index of row `i`, in `[0, k)`.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::Data(format!(
                "fold plan covers {} rows but dataset has {}",
                self.n(),
                n
            )));
        }
        Ok(())
    }
}

/// Balanced fold assignment, a pure function of `(n, k, seed)`.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Data(format!("fold count must be at least 2, got {}", k)));
    }
    if k > n {
        return Err(Error::Data(format!("fold count {} exceeds row count {}", k, n)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_schema() -> Schema {
        Schema::parse(
            "a = numeric\nfuel = categorical\nprice = numeric\nresponse = price\n",
        )
        .unwrap()
    }

    fn write_csv(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let path = dir.path().join("data.csv");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn load_records_blank_cells_as_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel,price\n1,petrol,10\n2,,20\n3,diesel,30\n4,petrol,40\n");
        let raw = load_csv(&path, &toy_schema()).unwrap();
        assert_eq!(raw.rows.len(), 4);
        assert_eq!(raw.missing_count(), 1);
    }

    #[test]
    fn unparseable_numeric_becomes_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel,price\nnot_a_number,petrol,10\n2,diesel,20\n");
        let raw = load_csv(&path, &toy_schema()).unwrap();
        assert_eq!(raw.missing_count(), 1);
        assert!(raw.rows[0][0].is_missing());
    }

    #[test]
    fn missing_response_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel\n1,petrol\n");
        let schema = Schema::parse("a = numeric\nfuel = categorical\nresponse = price\n").unwrap();
        let err = load_csv(&path, &schema).unwrap_err();
        assert!(err.to_string().contains("response column absent"), "{err}");
    }

    #[test]
    fn categorical_response_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel\n1,petrol\n");
        let schema = Schema::parse("a = numeric\nfuel = categorical\nresponse = fuel\n").unwrap();
        let err = load_csv(&path, &schema).unwrap_err();
        assert!(err.to_string().contains("categorical"), "{err}");
    }

    #[test]
    fn schema_must_cover_all_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,b,price\n1,2,3\n");
        let schema = Schema::parse("a = numeric\nprice = numeric\nresponse = price\n").unwrap();
        assert!(load_csv(&path, &schema).is_err());
    }

    #[test]
    fn preprocess_expands_categoricals_one_hot() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel,price\n10,petrol,1\n20,diesel,2\n30,petrol,3\n");
        let ds = preprocess(&load_csv(&path, &toy_schema()).unwrap()).unwrap();
        assert_eq!(
            ds.feature_names(),
            &["a".to_string(), "fuel=diesel".to_string(), "fuel=petrol".to_string()]
        );
        // each row's indicators sum to exactly 1
        for i in 0..3 {
            assert_eq!(ds.x()[(i, 1)] + ds.x()[(i, 2)], 1.0);
        }
        // min-max scaling of [10, 20, 30]
        assert_eq!(ds.column(0), &[0.0, 0.5, 1.0]);
        // response untouched
        assert_eq!(ds.y().as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn preprocess_drops_rows_with_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel,price\n1,petrol,10\n,petrol,20\n3,diesel,30\n");
        let ds = preprocess(&load_csv(&path, &toy_schema()).unwrap()).unwrap();
        assert_eq!(ds.n(), 2);
    }

    #[test]
    fn preprocess_errors_when_nothing_remains() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel,price\n,petrol,10\n2,,20\n");
        let err = preprocess(&load_csv(&path, &toy_schema()).unwrap()).unwrap_err();
        assert!(err.to_string().contains("zero rows"), "{err}");
    }

    #[test]
    fn constant_column_scales_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel,price\n5,petrol,1\n5,diesel,2\n5,petrol,3\n");
        let ds = preprocess(&load_csv(&path, &toy_schema()).unwrap()).unwrap();
        assert_eq!(ds.column(0), &[0.0, 0.0, 0.0]);
    }

    fn numeric_dataset(n: usize) -> Dataset {
        let x = DMatrix::from_fn(n, 2, |i, j| ((i * (j + 3)) % 7) as f64 / 6.0);
        let y = DVector::from_fn(n, |i, _| i as f64);
        Dataset::new(
            x,
            y,
            vec!["f0".into(), "f1".into()],
            vec![(0.0, 6.0), (0.0, 6.0)],
        )
        .unwrap()
    }

    #[test]
    fn split_sizes_floor_on_train() {
        let ds = numeric_dataset(10);
        let (tr, te) = split(&ds, 0.7, 1).unwrap();
        assert_eq!((tr.n(), te.n()), (7, 3));
        let ds = numeric_dataset(372);
        let (tr, te) = split(&ds, 0.7, 1).unwrap();
        assert_eq!((tr.n(), te.n()), (260, 112));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = numeric_dataset(20);
        let (a1, b1) = split(&ds, 0.7, 9).unwrap();
        let (a2, b2) = split(&ds, 0.7, 9).unwrap();
        assert_eq!(a1.x(), a2.x());
        assert_eq!(b1.x(), b2.x());
        assert_eq!(a1.y(), a2.y());
    }

    #[test]
    fn split_partitions_response_values() {
        let ds = numeric_dataset(10);
        let (tr, te) = split(&ds, 0.7, 3).unwrap();
        let mut all: Vec<f64> = tr.y().iter().chain(te.y().iter()).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn folds_balanced_and_deterministic() {
        let plan = make_folds(10, 10, 0).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in &plan.assignments {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 1));

        let plan = make_folds(11, 10, 0).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in &plan.assignments {
            sizes[f] += 1;
        }
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);

        let plan = make_folds(260, 10, 5).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in &plan.assignments {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 26));

        assert_eq!(make_folds(50, 7, 3).unwrap(), make_folds(50, 7, 3).unwrap());
    }

    #[test]
    fn folds_reject_k_larger_than_n() {
        assert!(make_folds(5, 6, 0).is_err());
        assert!(make_folds(5, 1, 0).is_err());
    }

    #[test]
    fn unscale_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "a,fuel,price\n10.5,petrol,1\n17.25,diesel,2\n93.125,petrol,3\n");
        let ds = preprocess(&load_csv(&path, &toy_schema()).unwrap()).unwrap();
        let originals = [10.5, 17.25, 93.125];
        for i in 0..3 {
            let back = ds.unscale(0, ds.x()[(i, 0)]);
            assert!((back - originals[i]).abs() <= 1e-12 * originals[i].abs());
        }
    }
}
