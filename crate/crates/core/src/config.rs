//! Pipeline configuration.
//!
//! One TOML file drives every subcommand. Unknown keys are rejected so
//! typos fail at load time, and each section validates its own ranges.
//! The master seed in `[general]` derives every module seed through
//! [`crate::seeds::child_seed`]; the CLI and the `PARETOFUSE_SEED` /
//! `PARETOFUSE_OUT` environment variables can override the seed and
//! output directory, nothing else.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::benchmarks::GaConfig;
use crate::error::{Error, Result};
use crate::fusion::SelectionPolicy;
use crate::mopso::MopsoConfig;
use crate::regression::{EnSettings, R2Convention};
use crate::seeds::child_seed;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub mopso: MopsoSection,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub ga: GaSection,
    #[serde(default)]
    pub en_grid: EnGridSection,
    #[serde(default)]
    pub general: GeneralSection,
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub csv: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_folds() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub alpha: f64,
    pub adjusted_r2: R2Convention,
    pub en_tol: f64,
    pub en_max_iter: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            alpha: 0.5,
            adjusted_r2: R2Convention::Paper,
            en_tol: 1e-6,
            en_max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MopsoSection {
    pub swarm_size: usize,
    pub archive_size: usize,
    pub max_iter: usize,
    pub inertia: f64,
    pub c1_initial: f64,
    pub c2_initial: f64,
    pub mutation_rate: f64,
    pub v_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for MopsoSection {
    fn default() -> Self {
        let d = MopsoConfig::default();
        MopsoSection {
            swarm_size: d.swarm_size,
            archive_size: d.archive_size,
            max_iter: d.max_iter,
            inertia: d.inertia,
            c1_initial: d.c1_initial,
            c2_initial: d.c2_initial,
            mutation_rate: d.mutation_rate,
            v_max: d.v_max,
            lambda_min: d.lambda_min,
            lambda_max: d.lambda_max,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSection {
    /// `above-mean`, `top-k`, or `absolute-threshold`.
    pub policy: String,
    pub top_k: usize,
    pub threshold: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection { policy: "above-mean".into(), top_k: 10, threshold: 0.0 }
    }
}

impl FusionSection {
    pub fn selection_policy(&self) -> Result<SelectionPolicy> {
        match self.policy.as_str() {
            "above-mean" => Ok(SelectionPolicy::AboveMean),
            "top-k" => {
                if self.top_k == 0 {
                    return Err(Error::Config("fusion.top_k must be at least 1".into()));
                }
                Ok(SelectionPolicy::TopK(self.top_k))
            }
            "absolute-threshold" => {
                if !self.threshold.is_finite() || self.threshold < 0.0 {
                    return Err(Error::Config("fusion.threshold must be finite and >= 0".into()));
                }
                Ok(SelectionPolicy::AbsoluteThreshold(self.threshold))
            }
            other => Err(Error::Config(format!("unknown fusion policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaSection {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_fraction: f64,
    pub immigrant_fraction: f64,
    /// `(w_r, w_p)` weight scenarios, one GA run each.
    pub scenarios: Vec<(f64, f64)>,
}

impl Default for GaSection {
    fn default() -> Self {
        let d = GaConfig::default();
        GaSection {
            population_size: d.population_size,
            generations: d.generations,
            crossover_rate: d.crossover_rate,
            mutation_rate: d.mutation_rate,
            elite_fraction: d.elite_fraction,
            immigrant_fraction: d.immigrant_fraction,
            scenarios: vec![(0.3, 0.7), (0.5, 0.5), (0.7, 0.3), (1.0, 0.0)],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnGridSection {
    pub lambdas: Vec<f64>,
}

impl Default for EnGridSection {
    fn default() -> Self {
        EnGridSection { lambdas: vec![0.0, 0.25, 0.5, 1.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneralSection {
    pub seed: u64,
    pub out: PathBuf,
    /// 0 lets the runtime pick the worker count.
    pub threads: usize,
}

impl Default for GeneralSection {
    fn default() -> Self {
        GeneralSection { seed: 42, out: PathBuf::from("out"), threads: 0 }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config schema_version {}",
                self.schema_version
            )));
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(Error::Config("data.train_fraction must lie in (0, 1)".into()));
        }
        if self.data.folds < 2 {
            return Err(Error::Config("data.folds must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.model.alpha) {
            return Err(Error::Config("model.alpha must lie in [0, 1]".into()));
        }
        if !(self.model.en_tol >= 0.0) || self.model.en_max_iter == 0 {
            return Err(Error::Config("model.en_tol must be >= 0 and en_max_iter >= 1".into()));
        }
        self.mopso_config(0).validate()?;
        self.fusion.selection_policy()?;
        if self.ga.scenarios.is_empty() {
            return Err(Error::Config("ga.scenarios must not be empty".into()));
        }
        for (i, _) in self.ga.scenarios.iter().enumerate() {
            self.ga_config(0, i)?.validate()?;
        }
        if self.en_grid.lambdas.is_empty() {
            return Err(Error::Config("en_grid.lambdas must not be empty".into()));
        }
        if self.en_grid.lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::Config("en_grid.lambdas must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn en_settings(&self) -> EnSettings {
        EnSettings { tol: self.model.en_tol, max_iter: self.model.en_max_iter }
    }

    pub fn split_seed(&self, master: u64) -> u64 {
        child_seed(master, "data.split", 0)
    }

    pub fn folds_seed(&self, master: u64) -> u64 {
        child_seed(master, "data.folds", 0)
    }

    pub fn mopso_config(&self, master: u64) -> MopsoConfig {
        MopsoConfig {
            swarm_size: self.mopso.swarm_size,
            archive_size: self.mopso.archive_size,
            max_iter: self.mopso.max_iter,
            inertia: self.mopso.inertia,
            c1_initial: self.mopso.c1_initial,
            c2_initial: self.mopso.c2_initial,
            mutation_rate: self.mopso.mutation_rate,
            v_max: self.mopso.v_max,
            lambda_min: self.mopso.lambda_min,
            lambda_max: self.mopso.lambda_max,
            seed: child_seed(master, "mopso", 0),
        }
    }

    pub fn ga_config(&self, master: u64, scenario_index: usize) -> Result<GaConfig> {
        let weights = *self
            .ga
            .scenarios
            .get(scenario_index)
            .ok_or_else(|| Error::Config(format!("no GA scenario at index {scenario_index}")))?;
        Ok(GaConfig {
            population_size: self.ga.population_size,
            generations: self.ga.generations,
            crossover_rate: self.ga.crossover_rate,
            mutation_rate: self.ga.mutation_rate,
            elite_fraction: self.ga.elite_fraction,
            immigrant_fraction: self.ga.immigrant_fraction,
            weights,
            seed: child_seed(master, "ga", scenario_index as u64),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!("[data]\ncsv = \"d.csv\"\nschema = \"d.schema\"\n{extra}")
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let config: PipelineConfig = toml::from_str(&minimal("")).unwrap();
        config.validate().unwrap();
        assert_eq!(config.data.folds, 10);
        assert_eq!(config.model.alpha, 0.5);
        assert_eq!(config.mopso.swarm_size, 35);
        assert_eq!(config.ga.scenarios.len(), 4);
        assert_eq!(config.en_grid.lambdas, vec![0.0, 0.25, 0.5, 1.0]);
        assert_eq!(config.general.seed, 42);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal("[mopso]\nswarm_sizes = 10\n");
        assert!(toml::from_str::<PipelineConfig>(&text).is_err());
    }

    #[test]
    fn bad_ranges_are_rejected() {
        let text = minimal("[data2]\n");
        assert!(toml::from_str::<PipelineConfig>(&text).is_err());

        let config: PipelineConfig =
            toml::from_str(&minimal("[model]\nalpha = 1.5\n")).unwrap();
        assert!(config.validate().is_err());

        let config: PipelineConfig =
            toml::from_str(&minimal("[ga]\nscenarios = [[0.0, 1.0]]\n")).unwrap();
        assert!(config.validate().is_err());

        let config: PipelineConfig =
            toml::from_str(&minimal("[ga]\nscenarios = []\n")).unwrap();
        assert!(config.validate().is_err());

        let config: PipelineConfig =
            toml::from_str(&minimal("[en_grid]\nlambdas = []\n")).unwrap();
        assert!(config.validate().is_err());

        let config: PipelineConfig =
            toml::from_str(&minimal("[fusion]\npolicy = \"median\"\n")).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn module_seeds_differ_and_are_stable() {
        let config: PipelineConfig = toml::from_str(&minimal("")).unwrap();
        let mopso_seed = config.mopso_config(42).seed;
        let ga0 = config.ga_config(42, 0).unwrap().seed;
        let ga1 = config.ga_config(42, 1).unwrap().seed;
        assert_ne!(mopso_seed, ga0);
        assert_ne!(ga0, ga1);
        assert_eq!(config.mopso_config(42).seed, mopso_seed);
        assert_ne!(config.mopso_config(43).seed, mopso_seed);
    }

    #[test]
    fn policy_parsing() {
        let section = FusionSection { policy: "top-k".into(), top_k: 3, threshold: 0.0 };
        assert_eq!(section.selection_policy().unwrap(), SelectionPolicy::TopK(3));
        let section = FusionSection { policy: "absolute-threshold".into(), top_k: 0, threshold: 2.5 };
        assert_eq!(
            section.selection_policy().unwrap(),
            SelectionPolicy::AbsoluteThreshold(2.5)
        );
    }
}
