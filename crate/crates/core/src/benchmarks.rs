//! Reference feature selectors the pipeline is compared against: a
//! genetic algorithm wrapping unpenalized linear regression with a
//! scalarized fitness, and an elastic net fitted over a lambda grid.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::regression::{
    self, fit_elastic_net, fit_ols, gather, metrics, predict, EnSettings, R2Convention,
};

/// GA parameters. `weights = (w_r, w_p)` scalarize the two objectives;
/// the accuracy-free scenario `(0, 1)` is rejected.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Fraction of the population carried over (and used as parents).
    pub elite_fraction: f64,
    /// Fraction replaced by fresh random genomes each generation.
    pub immigrant_fraction: f64,
    pub weights: (f64, f64),
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            generations: 100,
            crossover_rate: 0.7,
            mutation_rate: 0.1,
            elite_fraction: 0.1,
            immigrant_fraction: 0.05,
            weights: (0.5, 0.5),
            seed: 42,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || self.generations == 0 {
            return Err(Error::Config("GA needs population >= 2 and generations >= 1".into()));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
            ("elite_fraction", self.elite_fraction),
            ("immigrant_fraction", self.immigrant_fraction),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {rate}")));
            }
        }
        let (w_r, w_p) = self.weights;
        if !(w_r >= 0.0 && w_p >= 0.0) {
            return Err(Error::Config("GA weights must be non-negative".into()));
        }
        if w_r == 0.0 && w_p == 1.0 {
            return Err(Error::Config("the (w_r = 0, w_p = 1) scenario is rejected".into()));
        }
        Ok(())
    }
}

/// Scalarized GA fitness: `w_r * rmse_cv + w_p * n_selected`, minimized.
pub fn ga_fitness(rmse_cv: f64, n_selected: usize, w_r: f64, w_p: f64) -> f64 {
    w_r * rmse_cv + w_p * n_selected as f64
}

/// Outcome of one benchmark scenario, shaped like one table row.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchmarkResult {
    pub method: String,
    pub scenario: String,
    pub selected: Vec<usize>,
    pub train_rmse_cv: f64,
    pub train_r2: f64,
    pub train_r2_adj: f64,
    pub test_rmse: f64,
    pub test_r2: f64,
    pub test_r2_adj: f64,
    /// Per-fold RMSE of the final model, for paired statistical tests.
    pub fold_rmse: Vec<f64>,
    /// Best scalarized fitness after each generation (GA only).
    pub best_fitness_history: Vec<f64>,
    /// True when the scenario selected no features.
    pub degenerate: bool,
    /// Wall-clock seconds; excluded from deterministic report output.
    #[serde(skip)]
    pub wall_time_s: f64,
}

fn selected_indices(genome: &[bool]) -> Vec<usize> {
    genome
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(j, _)| j)
        .collect()
}

fn repair<R: Rng>(genome: &mut [bool], rng: &mut R) {
    if genome.iter().all(|&b| !b) {
        let j = rng.random_range(0..genome.len());
        genome[j] = true;
    }
}

fn assess_selected(
    method: &str,
    scenario: String,
    selected: Vec<usize>,
    train: &Dataset,
    test: &Dataset,
    convention: R2Convention,
    cv: regression::CvBreakdown,
    train_fit: (f64, Vec<f64>),
    history: Vec<f64>,
    started: Instant,
) -> Result<BenchmarkResult> {
    let degenerate = selected.is_empty();
    let train_rows: Vec<usize> = (0..train.n()).collect();
    let test_rows: Vec<usize> = (0..test.n()).collect();
    let (x_train, y_train) = gather(train, &train_rows, &selected);
    let (x_test, y_test) = gather(test, &test_rows, &selected);
    let (intercept, coefficients) = train_fit;
    let train_metrics = metrics(&x_train, &y_train, intercept, &coefficients, convention)?;
    let test_metrics = metrics(&x_test, &y_test, intercept, &coefficients, convention)?;
    let test_rmse =
        (regression::sse(&y_test, &predict(&x_test, intercept, &coefficients)) / test.n() as f64).sqrt();
    Ok(BenchmarkResult {
        method: method.into(),
        scenario,
        selected,
        train_rmse_cv: cv.rmse,
        train_r2: train_metrics.r2,
        train_r2_adj: train_metrics.r2_adj,
        test_rmse,
        test_r2: test_metrics.r2,
        test_r2_adj: test_metrics.r2_adj,
        fold_rmse: cv.fold_rmse,
        best_fitness_history: history,
        degenerate,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Generational GA over binary feature genomes. Fitness uses the
/// cross-validated RMSE of an unpenalized linear regression. Elites are
/// retained and serve as parents; uniform crossover and per-bit flips
/// produce offspring, and a slice of fresh random genomes immigrates
/// each generation. All-zero genomes repair by flipping one random bit.
pub fn run_ga_lr(
    train: &Dataset,
    test: &Dataset,
    config: &GaConfig,
    folds: &FoldPlan,
    convention: R2Convention,
) -> Result<BenchmarkResult> {
    config.validate()?;
    folds.validate_for(train.n())?;
    let started = Instant::now();
    let p = train.p();
    let (w_r, w_p) = config.weights;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let pop_size = config.population_size;
    let elite_count = ((config.elite_fraction * pop_size as f64).floor() as usize).max(1);
    let immigrant_count = (config.immigrant_fraction * pop_size as f64).floor() as usize;

    let mut population: Vec<Vec<bool>> = (0..pop_size)
        .map(|_| {
            let mut genome: Vec<bool> = (0..p).map(|_| rng.random::<bool>()).collect();
            repair(&mut genome, &mut rng);
            genome
        })
        .collect();

    let cache: Mutex<HashMap<Vec<bool>, f64>> = Mutex::new(HashMap::new());
    let fitness_of = |genome: &Vec<bool>| -> Result<f64> {
        if let Some(&rmse) = cache.lock().unwrap().get(genome) {
            return Ok(ga_fitness(rmse, genome.iter().filter(|&&b| b).count(), w_r, w_p));
        }
        let subset = selected_indices(genome);
        let rmse = regression::rmse_cv_ols(train, &subset, folds)?;
        cache.lock().unwrap().insert(genome.clone(), rmse);
        Ok(ga_fitness(rmse, subset.len(), w_r, w_p))
    };

    let mut history = Vec::with_capacity(config.generations);
    let mut best: Option<(f64, Vec<bool>)> = None;

    for generation in 0..config.generations {
        let fitnesses: Vec<f64> = population
            .par_iter()
            .map(&fitness_of)
            .collect::<Result<Vec<_>>>()?;

        let mut order: Vec<usize> = (0..pop_size).collect();
        order.sort_by(|&a, &b| {
            fitnesses[a]
                .partial_cmp(&fitnesses[b])
                .unwrap()
                .then(population[a].cmp(&population[b]))
        });
        let gen_best = (fitnesses[order[0]], population[order[0]].clone());
        history.push(gen_best.0);
        if best.as_ref().is_none_or(|(f, _)| gen_best.0 < *f) {
            best = Some(gen_best);
        }

        if generation + 1 == config.generations {
            break;
        }

        let elites: Vec<Vec<bool>> = order[..elite_count.min(pop_size)]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        let mut next: Vec<Vec<bool>> = elites.clone();
        while next.len() < pop_size.saturating_sub(immigrant_count) {
            let a = &elites[rng.random_range(0..elites.len())];
            let b = &elites[rng.random_range(0..elites.len())];
            let mut child: Vec<bool> = if rng.random::<f64>() < config.crossover_rate {
                (0..p).map(|j| if rng.random::<bool>() { a[j] } else { b[j] }).collect()
            } else {
                a.clone()
            };
            for bit in child.iter_mut() {
                if rng.random::<f64>() < config.mutation_rate {
                    *bit = !*bit;
                }
            }
            repair(&mut child, &mut rng);
            next.push(child);
        }
        while next.len() < pop_size {
            let mut genome: Vec<bool> = (0..p).map(|_| rng.random::<bool>()).collect();
            repair(&mut genome, &mut rng);
            next.push(genome);
        }
        population = next;
    }

    let (_, genome) = best.expect("at least one generation ran");
    let selected = selected_indices(&genome);
    let cv = regression::rmse_cv_ols_detailed(train, &selected, folds)?;
    let train_rows: Vec<usize> = (0..train.n()).collect();
    let (x_train, y_train) = gather(train, &train_rows, &selected);
    let train_fit = fit_ols(&x_train, &y_train)?;
    assess_selected(
        "ga-lr",
        format!("wr{}-wp{}", w_r, w_p),
        selected,
        train,
        test,
        convention,
        cv,
        train_fit,
        history,
        started,
    )
}

/// Coefficient magnitude below which an elastic net weight counts as zero.
pub const SELECTION_EPS: f64 = 1e-8;

/// Fit the elastic net on all features at every lambda in the grid; each
/// row reports the nonzero-support selection and its metrics. A fully
/// shrunk fit yields a degenerate (empty-selection) row rather than an
/// error.
pub fn run_en_grid(
    train: &Dataset,
    test: &Dataset,
    lambdas: &[f64],
    alpha: f64,
    folds: &FoldPlan,
    convention: R2Convention,
    settings: EnSettings,
) -> Result<Vec<BenchmarkResult>> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda grid must not be empty".into()));
    }
    folds.validate_for(train.n())?;
    let all_features: Vec<usize> = (0..train.p()).collect();
    let train_rows: Vec<usize> = (0..train.n()).collect();
    let (x_full, y_full) = gather(train, &train_rows, &all_features);

    lambdas
        .iter()
        .map(|&lambda| {
            let started = Instant::now();
            let fit = fit_elastic_net(&x_full, &y_full, alpha, lambda, settings)?;
            let selected = fit.nonzero(SELECTION_EPS);
            // The model's own CV error: the elastic net re-fit per fold
            // on all features at this (alpha, lambda).
            let cv = regression::rmse_cv_detailed(train, &all_features, alpha, lambda, folds, settings)?;
            // Metrics of the fitted model, expressed on its support;
            // dropped zero coefficients leave predictions unchanged.
            let support_coefficients: Vec<f64> =
                selected.iter().map(|&j| fit.coefficients[j]).collect();
            assess_selected(
                "en-grid",
                format!("lambda{}", lambda),
                selected,
                train,
                test,
                convention,
                cv,
                (fit.intercept, support_coefficients),
                Vec::new(),
                started,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    #[test]
    fn fitness_arithmetic() {
        assert_eq!(ga_fitness(10.0, 4, 0.5, 0.5), 7.0);
        assert_eq!(ga_fitness(3.2, 9, 1.0, 0.0), 3.2);
        assert_eq!(ga_fitness(3.2, 9, 0.0, 0.5), 4.5);
    }

    #[test]
    fn fitness_is_monotone() {
        let base = ga_fitness(2.0, 3, 0.4, 0.6);
        assert!(ga_fitness(2.5, 3, 0.4, 0.6) >= base);
        assert!(ga_fitness(2.0, 4, 0.4, 0.6) >= base);
    }

    #[test]
    fn config_rejects_cardinality_only_scenario() {
        let config = GaConfig { weights: (0.0, 1.0), ..GaConfig::default() };
        assert!(config.validate().is_err());
        let fine = GaConfig { weights: (0.3, 0.7), ..GaConfig::default() };
        fine.validate().unwrap();
    }

    fn planted_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
        // Feature 0 perfectly determines y.
        let y = DVector::from_fn(n, |i, _| 3.0 * x[(i, 0)] + 1.0);
        let names = (0..p).map(|j| format!("f{j}")).collect();
        Dataset::new(x, y, names, vec![(0.0, 1.0); p]).unwrap()
    }

    #[test]
    fn ga_finds_the_single_perfect_feature() {
        let ds = planted_dataset(60, 5, 1);
        let (train, test) = crate::data::split(&ds, 0.7, 1).unwrap();
        let folds = crate::data::make_folds(train.n(), 5, 2).unwrap();
        let config = GaConfig {
            population_size: 20,
            generations: 25,
            weights: (0.5, 0.5),
            seed: 3,
            ..GaConfig::default()
        };
        let result = run_ga_lr(&train, &test, &config, &folds, R2Convention::Paper).unwrap();
        assert_eq!(result.selected, vec![0]);
        assert!(result.train_rmse_cv < 1e-8);
        assert!(!result.degenerate);
    }

    #[test]
    fn ga_best_fitness_never_rises() {
        let ds = planted_dataset(50, 8, 7);
        let (train, test) = crate::data::split(&ds, 0.7, 2).unwrap();
        let folds = crate::data::make_folds(train.n(), 5, 3).unwrap();
        let config = GaConfig {
            population_size: 16,
            generations: 15,
            weights: (0.5, 0.5),
            seed: 9,
            ..GaConfig::default()
        };
        let result = run_ga_lr(&train, &test, &config, &folds, R2Convention::Paper).unwrap();
        assert_eq!(result.best_fitness_history.len(), 15);
        for pair in result.best_fitness_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "history rose: {:?}", pair);
        }
    }

    #[test]
    fn ga_is_seed_deterministic() {
        let ds = planted_dataset(40, 6, 11);
        let (train, test) = crate::data::split(&ds, 0.7, 4).unwrap();
        let folds = crate::data::make_folds(train.n(), 4, 5).unwrap();
        let config = GaConfig {
            population_size: 12,
            generations: 8,
            seed: 21,
            ..GaConfig::default()
        };
        let mut a = run_ga_lr(&train, &test, &config, &folds, R2Convention::Paper).unwrap();
        let mut b = run_ga_lr(&train, &test, &config, &folds, R2Convention::Paper).unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a, b);
    }

    fn noisy_planted(n: usize, informative: usize, noise: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = informative + noise;
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(n, |i, _| {
            (0..informative).map(|j| 3.0 * x[(i, j)]).sum::<f64>()
                + 0.3 * (rng.random::<f64>() - 0.5)
        });
        let names = (0..p).map(|j| format!("f{j}")).collect();
        Dataset::new(x, y, names, vec![(0.0, 1.0); p]).unwrap()
    }

    #[test]
    fn en_grid_support_shrinks_with_lambda() {
        let ds = noisy_planted(120, 4, 8, 13);
        let (train, test) = crate::data::split(&ds, 0.7, 6).unwrap();
        let folds = crate::data::make_folds(train.n(), 5, 7).unwrap();
        let grid = [0.0, 0.05, 0.2, 5.0];
        let rows = run_en_grid(
            &train,
            &test,
            &grid,
            0.5,
            &folds,
            R2Convention::Paper,
            EnSettings::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        // No shrinkage keeps every feature.
        assert_eq!(rows[0].selected.len(), train.p());
        for pair in rows.windows(2) {
            assert!(
                pair[1].selected.len() <= pair[0].selected.len(),
                "support grew along the grid: {} -> {}",
                pair[0].selected.len(),
                pair[1].selected.len()
            );
        }
        // Heavy shrinkage empties the support and is reported, not erred.
        let last = rows.last().unwrap();
        assert!(last.degenerate);
        assert!(last.selected.is_empty());
    }

    #[test]
    fn en_grid_metrics_match_direct_fit() {
        let ds = noisy_planted(80, 3, 3, 17);
        let (train, test) = crate::data::split(&ds, 0.7, 8).unwrap();
        let folds = crate::data::make_folds(train.n(), 5, 9).unwrap();
        let rows = run_en_grid(
            &train,
            &test,
            &[0.1],
            0.5,
            &folds,
            R2Convention::Paper,
            EnSettings::default(),
        )
        .unwrap();
        let row = &rows[0];
        let all: Vec<usize> = (0..train.p()).collect();
        let train_rows: Vec<usize> = (0..train.n()).collect();
        let (x, y) = gather(&train, &train_rows, &all);
        let fit = fit_elastic_net(&x, &y, 0.5, 0.1, EnSettings::default()).unwrap();
        let expect = regression::rmse_cv(&train, &all, 0.5, 0.1, &folds, EnSettings::default()).unwrap();
        assert_abs_diff_eq!(row.train_rmse_cv, expect, epsilon = 1e-12);
        assert_eq!(row.selected, fit.nonzero(SELECTION_EPS));
    }

    #[test]
    fn en_grid_rejects_empty_grid() {
        let ds = noisy_planted(40, 2, 2, 19);
        let (train, test) = crate::data::split(&ds, 0.7, 1).unwrap();
        let folds = crate::data::make_folds(train.n(), 4, 1).unwrap();
        assert!(run_en_grid(
            &train,
            &test,
            &[],
            0.5,
            &folds,
            R2Convention::Paper,
            EnSettings::default()
        )
        .is_err());
    }
}
