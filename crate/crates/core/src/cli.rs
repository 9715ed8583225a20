//! Subcommand implementations behind the `paretofuse` binary.
//!
//! Each command is a library function so integration tests can drive it
//! directly. Commands resolve their effective seed and output directory
//! as CLI flag > environment (`PARETOFUSE_SEED`, `PARETOFUSE_OUT`) >
//! config file, create the output directory, write their artifacts, and
//! re-read every JSON document as a validation pass before reporting
//! success.

use std::path::{Path, PathBuf};

use crate::config::PipelineConfig;
use crate::data::{self, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::fusion;
use crate::mopso;
use crate::report::{
    self, BenchmarksDocument, FusionDocument, MethodSeries, ParetoDocument, WilcoxonRow,
};
use crate::stats::{self, Alternative, PairedSample};
use crate::synth::{self, SynthFiles, SynthSpec};

pub const ENV_SEED: &str = "PARETOFUSE_SEED";
pub const ENV_OUT: &str = "PARETOFUSE_OUT";

/// Flag-level overrides; only the seed and output directory may also
/// come from the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(ENV_SEED) {
        Ok(text) => text
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{ENV_SEED} must be a u64, got '{text}'"))),
        Err(_) => Ok(None),
    }
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(ENV_OUT).map(PathBuf::from)
}

fn resolve_seed(overrides: &Overrides, fallback: u64) -> Result<u64> {
    if let Some(seed) = overrides.seed {
        return Ok(seed);
    }
    Ok(env_seed()?.unwrap_or(fallback))
}

fn resolve_out(overrides: &Overrides, fallback: &Path) -> PathBuf {
    overrides
        .out
        .clone()
        .or_else(env_out)
        .unwrap_or_else(|| fallback.to_path_buf())
}

/// Install a global worker pool of the requested size. The first caller
/// wins; later calls (or 0) leave the pool untouched. Results never
/// depend on the worker count.
pub fn configure_threads(requested: usize) {
    if requested > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(requested)
            .build_global();
    }
}

/// Ingest, preprocess and partition the configured dataset.
pub fn prepare_data(config: &PipelineConfig, seed: u64) -> Result<(Dataset, Dataset, FoldPlan)> {
    let schema = data::Schema::from_file(&config.data.schema)?;
    let raw = data::load_csv(&config.data.csv, &schema)?;
    let dataset = data::preprocess(&raw)?;
    let (train, test) = data::split(&dataset, config.data.train_fraction, config.split_seed(seed))?;
    let folds = data::make_folds(train.n(), config.data.folds, config.folds_seed(seed))?;
    Ok((train, test, folds))
}

/// `run`: search with the swarm, fuse the archive, write `pareto.json`,
/// `fusion.json` and `pareto_front.csv`.
pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<Vec<PathBuf>> {
    let config = PipelineConfig::load(config_path)?;
    configure_threads(config.general.threads);
    let seed = resolve_seed(overrides, config.general.seed)?;
    let out_dir = resolve_out(overrides, &config.general.out);
    std::fs::create_dir_all(&out_dir)?;

    let (train, test, folds) = prepare_data(&config, seed)?;
    let settings = config.en_settings();
    let archive = mopso::run(&train, &config.mopso_config(seed), &folds, config.model.alpha, settings)?;

    let members = fusion::fusable_members(&archive);
    let lambda_eval = fusion::median_lambda(&members).ok_or(Error::EmptyArchive)?;
    let fusion_report = fusion::fuse(
        &archive,
        &train,
        &test,
        config.fusion.selection_policy()?,
        config.model.alpha,
        lambda_eval,
        &folds,
        config.model.adjusted_r2,
        settings,
    )?;

    let pareto_path = report::artifact_path(&out_dir, "pareto.json");
    report::write_json(&pareto_path, &ParetoDocument::from_archive(&archive, seed, train.feature_names()))?;

    let fusion_path = report::artifact_path(&out_dir, "fusion.json");
    report::write_json(&fusion_path, &FusionDocument::from_report(&fusion_report, seed, train.feature_names()))?;

    let front_path = report::artifact_path(&out_dir, "pareto_front.csv");
    report::write_pareto_front_csv(&front_path, &archive)?;

    Ok(vec![pareto_path, fusion_path, front_path])
}

/// `benchmark`: the GA scenario grid plus the elastic net lambda grid,
/// written to `benchmarks.json`.
pub fn cmd_benchmark(config_path: &Path, overrides: &Overrides, timings: bool) -> Result<Vec<PathBuf>> {
    let config = PipelineConfig::load(config_path)?;
    configure_threads(config.general.threads);
    let seed = resolve_seed(overrides, config.general.seed)?;
    let out_dir = resolve_out(overrides, &config.general.out);
    std::fs::create_dir_all(&out_dir)?;

    let (train, test, folds) = prepare_data(&config, seed)?;
    let mut results = Vec::new();
    for scenario_index in 0..config.ga.scenarios.len() {
        let ga_config = config.ga_config(seed, scenario_index)?;
        results.push(crate::benchmarks::run_ga_lr(
            &train,
            &test,
            &ga_config,
            &folds,
            config.model.adjusted_r2,
        )?);
    }
    results.extend(crate::benchmarks::run_en_grid(
        &train,
        &test,
        &config.en_grid.lambdas,
        config.model.alpha,
        &folds,
        config.model.adjusted_r2,
        config.en_settings(),
    )?);

    let path = report::artifact_path(&out_dir, "benchmarks.json");
    report::write_json(&path, &BenchmarksDocument::new(results, seed, timings))?;
    Ok(vec![path])
}

fn labeled_series(paths: &[PathBuf]) -> Result<Vec<(usize, MethodSeries)>> {
    let mut all = Vec::new();
    for (file_index, path) in paths.iter().enumerate() {
        for series in report::load_method_series(path)? {
            all.push((file_index, series));
        }
    }
    // Disambiguate labels that repeat across files.
    let mut seen = std::collections::BTreeMap::new();
    for (_, series) in all.iter() {
        *seen.entry(series.label.clone()).or_insert(0usize) += 1;
    }
    let mut counters = std::collections::BTreeMap::new();
    for (file_index, series) in all.iter_mut() {
        if seen[&series.label] > 1 {
            let counter = counters.entry(series.label.clone()).or_insert(0usize);
            series.label = format!("{}@{}", series.label, file_index);
            *counter += 1;
        }
    }
    Ok(all)
}

fn wilcoxon_row(
    sample: &PairedSample,
    metric: &str,
    alternative: Alternative,
) -> Result<WilcoxonRow> {
    let n = sample.values_a.len();
    match stats::wilcoxon_signed_rank(sample, alternative) {
        Ok((statistic, p)) => Ok(WilcoxonRow {
            method_a: sample.label_a.clone(),
            method_b: sample.label_b.clone(),
            metric: metric.into(),
            alternative: alternative.to_string(),
            n,
            statistic: Some(statistic),
            p_value: Some(p),
            reject_at_90: Some(stats::reject_at_90(p)),
            note: String::new(),
        }),
        Err(Error::IdenticalSamples) => Ok(WilcoxonRow {
            method_a: sample.label_a.clone(),
            method_b: sample.label_b.clone(),
            metric: metric.into(),
            alternative: alternative.to_string(),
            n,
            statistic: None,
            p_value: None,
            reject_at_90: None,
            note: "identical samples".into(),
        }),
        Err(e) => Err(e),
    }
}

/// `compare`: Wilcoxon signed-rank rows for every ordered pair of method
/// series found in the given reports, written to `wilcoxon.csv`.
///
/// The `rmse` metric pairs per-fold CV errors within one run; the
/// summary metrics (`train_rmse_cv`, `test_rmse`, `train_r2_adj`,
/// `test_r2_adj`) pair one scalar per report file across files, so they
/// need at least five reports (e.g. one per seed).
pub fn cmd_compare(
    report_paths: &[PathBuf],
    metrics: &[String],
    alternative: Alternative,
    overrides: &Overrides,
) -> Result<Vec<PathBuf>> {
    if report_paths.is_empty() {
        return Err(Error::Config("compare needs at least one report file".into()));
    }
    let out_dir = resolve_out(overrides, Path::new("."));
    std::fs::create_dir_all(&out_dir)?;
    let series = labeled_series(report_paths)?;

    let mut rows = Vec::new();
    for metric in metrics {
        if metric == "rmse" {
            for (_, a) in &series {
                for (_, b) in &series {
                    if a.label == b.label {
                        continue;
                    }
                    let sample = PairedSample::new(
                        a.label.clone(),
                        b.label.clone(),
                        a.fold_rmse.clone(),
                        b.fold_rmse.clone(),
                    )?;
                    rows.push(wilcoxon_row(&sample, metric, alternative)?);
                }
            }
        } else {
            // Per-seed pairing: group by base label across files.
            let mut by_label: std::collections::BTreeMap<String, Vec<f64>> =
                std::collections::BTreeMap::new();
            for (_, s) in &series {
                let base = s.label.split('@').next().unwrap_or(&s.label).to_string();
                let value = s.summary(metric).ok_or_else(|| {
                    Error::Report(format!("metric '{metric}' absent from series '{}'", s.label))
                })?;
                by_label.entry(base).or_default().push(value);
            }
            let labels: Vec<&String> = by_label.keys().collect();
            for a in &labels {
                for b in &labels {
                    if a == b {
                        continue;
                    }
                    let sample = PairedSample::new(
                        (*a).clone(),
                        (*b).clone(),
                        by_label[*a].clone(),
                        by_label[*b].clone(),
                    )?;
                    rows.push(wilcoxon_row(&sample, metric, alternative)?);
                }
            }
        }
    }

    let path = report::artifact_path(&out_dir, "wilcoxon.csv");
    report::write_wilcoxon_csv(&path, &rows)?;
    Ok(vec![path])
}

/// `synth`: write a synthetic CSV + schema + ground-truth sidecar.
pub fn cmd_synth(spec: &SynthSpec, name: &str, overrides: &Overrides) -> Result<SynthFiles> {
    let seed = resolve_seed(overrides, spec.seed)?;
    let out_dir = resolve_out(overrides, Path::new("."));
    let output = synth::generate(&SynthSpec { seed, ..*spec })?;
    synth::write_files(&out_dir, name, &output)
}
