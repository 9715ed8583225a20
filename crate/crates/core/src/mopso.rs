//! Multi-objective particle swarm search over (feature mask, lambda)
//! genomes.
//!
//! A particle's position has `p + 1` genes in `[0, 1]`: the first `p`
//! decode to a feature mask at the 0.5 threshold, the last maps affinely
//! into the configured lambda range. Objectives are
//! `(cross-validated RMSE, subset cardinality)`, both minimized. The
//! non-dominated archive is bounded by crowding-distance pruning, leaders
//! come from a crowding-biased binary tournament, personal bests follow a
//! domination rule with a fair coin for incomparable pairs, and a hybrid
//! reset/hop mutation keeps the swarm diverse.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::regression::{self, EnSettings};
use crate::seeds::child_seed;

/// Objective vector, both components minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub rmse_cv: f64,
    pub cardinality: usize,
}

/// Strict Pareto dominance: no worse in both objectives, better in one.
pub fn dominates(a: Objectives, b: Objectives) -> bool {
    let no_worse = a.rmse_cv <= b.rmse_cv && a.cardinality <= b.cardinality;
    let better = a.rmse_cv < b.rmse_cv || a.cardinality < b.cardinality;
    no_worse && better
}

/// Two-objective crowding distances. Boundary points per objective get
/// infinity; interior points accumulate the normalized gap between their
/// neighbors. A zero objective range contributes nothing.
pub fn crowding_distances(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    if n == 0 {
        return Vec::new();
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut distances = vec![0.0_f64; n];
    let dims: [fn(&Objectives) -> f64; 2] =
        [|o| o.rmse_cv, |o| o.cardinality as f64];
    for value in dims {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| value(&front[a]).partial_cmp(&value(&front[b])).unwrap());
        distances[order[0]] = f64::INFINITY;
        distances[order[n - 1]] = f64::INFINITY;
        let range = value(&front[order[n - 1]]) - value(&front[order[0]]);
        if range > 0.0 {
            for k in 1..n - 1 {
                let idx = order[k];
                if distances[idx].is_finite() {
                    distances[idx] +=
                        (value(&front[order[k + 1]]) - value(&front[order[k - 1]])) / range;
                }
            }
        }
    }
    distances
}

/// An evaluated genome. `position` is the continuous particle position it
/// decoded from, kept so archive members can serve as velocity-update
/// leaders.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSolution {
    pub mask: Vec<bool>,
    pub lambda: f64,
    pub objectives: Objectives,
    pub crowding: f64,
    pub position: Vec<f64>,
}

impl EvaluatedSolution {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(j, _)| j)
            .collect()
    }
}

const LAMBDA_QUANTUM: f64 = 1e-4;

fn quantize_lambda(lambda: f64) -> i64 {
    (lambda / LAMBDA_QUANTUM).round() as i64
}

fn genome_key(mask: &[bool], lambda: f64) -> (Vec<u64>, i64) {
    let mut words = vec![0u64; mask.len().div_ceil(64)];
    for (j, &bit) in mask.iter().enumerate() {
        if bit {
            words[j / 64] |= 1 << (j % 64);
        }
    }
    (words, quantize_lambda(lambda))
}

pub(crate) fn canonical_cmp(a: &EvaluatedSolution, b: &EvaluatedSolution) -> std::cmp::Ordering {
    a.objectives
        .rmse_cv
        .partial_cmp(&b.objectives.rmse_cv)
        .unwrap()
        .then(a.objectives.cardinality.cmp(&b.objectives.cardinality))
        .then(a.mask.cmp(&b.mask))
        .then(quantize_lambda(a.lambda).cmp(&quantize_lambda(b.lambda)))
}

/// Bounded archive of mutually non-dominated solutions, kept in a
/// canonical order (ascending RMSE) with up-to-date crowding distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoArchive {
    members: Vec<EvaluatedSolution>,
    capacity: usize,
}

impl ParetoArchive {
    pub fn new(capacity: usize) -> ParetoArchive {
        ParetoArchive { members: Vec::new(), capacity }
    }

    pub fn members(&self) -> &[EvaluatedSolution] {
        &self.members
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Merge new evaluations: keep the non-dominated subset of the union,
    /// drop duplicates of `(mask, quantized lambda)`, then prune to
    /// capacity by repeatedly removing the member with the smallest
    /// crowding distance (recomputed after every removal).
    pub fn update(&mut self, candidates: Vec<EvaluatedSolution>) {
        let mut pool: Vec<EvaluatedSolution> = std::mem::take(&mut self.members);
        pool.extend(candidates);
        pool.sort_by(canonical_cmp);

        let mut seen = std::collections::HashSet::new();
        pool.retain(|s| seen.insert(genome_key(&s.mask, s.lambda)));

        let objectives: Vec<Objectives> = pool.iter().map(|s| s.objectives).collect();
        let mut keep: Vec<EvaluatedSolution> = pool
            .into_iter()
            .enumerate()
            .filter(|(i, _)| {
                !objectives
                    .iter()
                    .enumerate()
                    .any(|(k, &other)| k != *i && dominates(other, objectives[*i]))
            })
            .map(|(_, s)| s)
            .collect();

        while keep.len() > self.capacity {
            let fronts: Vec<Objectives> = keep.iter().map(|s| s.objectives).collect();
            let crowding = crowding_distances(&fronts);
            let victim = crowding
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            keep.remove(victim);
        }

        let fronts: Vec<Objectives> = keep.iter().map(|s| s.objectives).collect();
        let crowding = crowding_distances(&fronts);
        for (member, d) in keep.iter_mut().zip(crowding) {
            member.crowding = d;
        }
        self.members = keep;
    }

    /// Structural invariants: mutual non-domination, capacity bound, and
    /// genome uniqueness. Exercised heavily by the test suites.
    pub fn check_invariants(&self) -> Result<()> {
        if self.members.len() > self.capacity {
            return Err(Error::Data(format!(
                "archive holds {} members over capacity {}",
                self.members.len(),
                self.capacity
            )));
        }
        for (i, a) in self.members.iter().enumerate() {
            for (k, b) in self.members.iter().enumerate() {
                if i != k && dominates(a.objectives, b.objectives) {
                    return Err(Error::Data(format!("archive member {i} dominates member {k}")));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.members {
            if !seen.insert(genome_key(&m.mask, m.lambda)) {
                return Err(Error::Data("archive holds duplicate genomes".into()));
            }
        }
        Ok(())
    }
}

/// Binary tournament on crowding distance; ties resolve with a fair coin.
pub fn select_gbest<'a, R: Rng>(archive: &'a ParetoArchive, rng: &mut R) -> Result<&'a EvaluatedSolution> {
    if archive.is_empty() {
        return Err(Error::EmptyArchive);
    }
    let n = archive.len();
    let a = &archive.members()[rng.random_range(0..n)];
    let b = &archive.members()[rng.random_range(0..n)];
    if a.crowding > b.crowding {
        Ok(a)
    } else if b.crowding > a.crowding {
        Ok(b)
    } else if rng.random::<bool>() {
        Ok(a)
    } else {
        Ok(b)
    }
}

/// Swarm member. `pbest` is set on the first evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pbest: Option<(Vec<f64>, Objectives)>,
}

impl Particle {
    pub fn new(position: Vec<f64>) -> Particle {
        let dims = position.len();
        Particle { position, velocity: vec![0.0; dims], pbest: None }
    }

    pub fn pbest_position(&self) -> Option<&[f64]> {
        self.pbest.as_ref().map(|(p, _)| p.as_slice())
    }

    pub fn pbest_objectives(&self) -> Option<Objectives> {
        self.pbest.as_ref().map(|(_, o)| *o)
    }
}

/// Domination-based personal-best update; incomparable outcomes replace
/// with probability one half.
pub fn update_pbest<R: Rng>(particle: &mut Particle, objectives: Objectives, rng: &mut R) {
    let replace = match &particle.pbest {
        None => true,
        Some((_, old)) => {
            if dominates(objectives, *old) {
                true
            } else if dominates(*old, objectives) {
                false
            } else {
                rng.random::<bool>()
            }
        }
    };
    if replace {
        particle.pbest = Some((particle.position.clone(), objectives));
    }
}

fn step_component(v: f64, x: f64, pb: f64, gb: f64, w: f64, r1c1: f64, r2c2: f64) -> f64 {
    w * v + r1c1 * (pb - x) + r2c2 * (gb - x)
}

/// One velocity/position step: `v = w v + r1 c1 (Pb - x) + r2 c2 (Gb - x)`
/// with fresh uniform `r1, r2` per component, velocity clamped to
/// `[-v_max, v_max]` and position clamped to the unit box.
pub fn velocity_position_update<R: Rng>(
    particle: &mut Particle,
    gbest_position: &[f64],
    w: f64,
    c1: f64,
    c2: f64,
    v_max: f64,
    rng: &mut R,
) {
    let fallback = particle.position.clone();
    let pbest: &[f64] = match &particle.pbest {
        Some((p, _)) => p,
        None => &fallback,
    };
    for d in 0..particle.position.len() {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let v = step_component(
            particle.velocity[d],
            particle.position[d],
            pbest[d],
            gbest_position[d],
            w,
            r1 * c1,
            r2 * c2,
        )
        .clamp(-v_max, v_max);
        particle.velocity[d] = v;
        particle.position[d] = (particle.position[d] + v).clamp(0.0, 1.0);
    }
}

fn apply_reset(particle: &mut Particle) {
    particle.velocity.iter_mut().for_each(|v| *v = 0.0);
}

fn apply_hop<R: Rng>(particle: &mut Particle, rng: &mut R) {
    let dims = particle.position.len();
    let jump_probability = 1.0 / dims as f64;
    for d in 0..dims {
        if rng.random::<f64>() < jump_probability {
            particle.position[d] = rng.random();
        }
    }
}

/// With probability `rate`, apply one of two operators at equal odds:
/// RESET zeroes the velocity and keeps the position; HOP re-draws each
/// coordinate uniformly with per-coordinate probability `1/(p+1)`.
pub fn mutate<R: Rng>(particle: &mut Particle, rate: f64, rng: &mut R) {
    if rate <= 0.0 || rng.random::<f64>() >= rate {
        return;
    }
    if rng.random::<bool>() {
        apply_reset(particle);
    } else {
        apply_hop(particle, rng);
    }
}

/// Swarm parameters. The acceleration coefficients follow the linear
/// schedule `c1(t) = c1_initial - t/T_max`, `c2(t) = c2_initial + t/T_max`;
/// construction rejects schedules that leave the stability region
/// `w < 1, 0 < c1 + c2 < 4 (1 + w)` at any iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MopsoConfig {
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
    pub seed: u64,
}

impl Default for MopsoConfig {
    fn default() -> Self {
        MopsoConfig {
            swarm_size: 35,
            archive_size: 20,
            max_iter: 80,
            inertia: 0.4,
            c1_initial: 2.5,
            c2_initial: 0.5,
            mutation_rate: 0.1,
            v_max: 0.2,
            lambda_min: 0.0,
            lambda_max: 1.0,
            seed: 42,
        }
    }
}

impl MopsoConfig {
    pub fn c1_at(&self, t: usize) -> f64 {
        self.c1_initial - t as f64 / self.max_iter as f64
    }

    pub fn c2_at(&self, t: usize) -> f64 {
        self.c2_initial + t as f64 / self.max_iter as f64
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 || self.archive_size == 0 || self.max_iter == 0 {
            return Err(Error::Config("swarm, archive and iteration counts must be positive".into()));
        }
        if !(self.inertia >= 0.0 && self.inertia < 1.0) {
            return Err(Error::Config(format!(
                "inertia must satisfy 0 <= w < 1, got {}",
                self.inertia
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Config("mutation rate must lie in [0, 1]".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Config("v_max must be positive".into()));
        }
        if !(self.lambda_min >= 0.0 && self.lambda_max >= self.lambda_min) {
            return Err(Error::Config("lambda range must satisfy 0 <= min <= max".into()));
        }
        let bound = 4.0 * (1.0 + self.inertia);
        for t in 0..=self.max_iter {
            let sum = self.c1_at(t) + self.c2_at(t);
            if !(sum > 0.0 && sum < bound) {
                return Err(Error::Config(format!(
                    "acceleration schedule leaves the stability region at t={t}: c1+c2={sum}, bound={bound}"
                )));
            }
        }
        Ok(())
    }
}

/// Decode a position into a feature mask (genes at or above 0.5 select)
/// and a lambda from the affine gene map.
pub fn decode(position: &[f64], lambda_range: (f64, f64)) -> (Vec<bool>, f64) {
    assert!(!position.is_empty());
    let p = position.len() - 1;
    let mask = position[..p].iter().map(|&g| g >= 0.5).collect();
    let (lo, hi) = lambda_range;
    (mask, lo + position[p] * (hi - lo))
}

type GenomeKey = (Vec<u64>, i64);

/// Shared fitness evaluator with a cache keyed by
/// `(mask, lambda quantized at 1e-4)`. Evaluations are pure, so cache
/// hits never change results, only cost.
pub struct Evaluator<'a> {
    ds: &'a Dataset,
    folds: &'a FoldPlan,
    alpha: f64,
    settings: EnSettings,
    empty_mask_penalty: f64,
    cache: Mutex<HashMap<GenomeKey, Objectives>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(ds: &'a Dataset, folds: &'a FoldPlan, alpha: f64, settings: EnSettings) -> Result<Evaluator<'a>> {
        folds.validate_for(ds.n())?;
        let empty_mask_penalty = regression::rmse_cv_intercept_only(ds, folds)?;
        Ok(Evaluator {
            ds,
            folds,
            alpha,
            settings,
            empty_mask_penalty,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Objectives of a decoded genome. The empty mask stays feasible: it
    /// scores the intercept-only cross-validated RMSE at cardinality zero.
    pub fn evaluate(&self, mask: &[bool], lambda: f64) -> Result<Objectives> {
        let cardinality = mask.iter().filter(|&&b| b).count();
        if cardinality == 0 {
            return Ok(Objectives { rmse_cv: self.empty_mask_penalty, cardinality: 0 });
        }
        let key = genome_key(mask, lambda);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let subset: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
            .collect();
        let rmse = regression::rmse_cv(self.ds, &subset, self.alpha, lambda, self.folds, self.settings)?;
        let objectives = Objectives { rmse_cv: rmse, cardinality };
        self.cache.lock().unwrap().insert(key, objectives);
        Ok(objectives)
    }
}

/// Objectives of one genome without a shared evaluator.
pub fn evaluate(
    ds: &Dataset,
    mask: &[bool],
    lambda: f64,
    folds: &FoldPlan,
    alpha: f64,
    settings: EnSettings,
) -> Result<Objectives> {
    Evaluator::new(ds, folds, alpha, settings)?.evaluate(mask, lambda)
}

/// Run the full search and return the final archive. Deterministic for a
/// fixed config: every random draw comes from a per-particle stream
/// derived from the master seed, and parallel fitness evaluation never
/// touches those streams.
pub fn run(ds: &Dataset, config: &MopsoConfig, folds: &FoldPlan, alpha: f64, settings: EnSettings) -> Result<ParetoArchive> {
    config.validate()?;
    let evaluator = Evaluator::new(ds, folds, alpha, settings)?;
    let dims = ds.p() + 1;

    let mut rngs: Vec<ChaCha8Rng> = (0..config.swarm_size)
        .map(|i| ChaCha8Rng::seed_from_u64(child_seed(config.seed, "mopso.particle", i as u64)))
        .collect();
    let mut particles: Vec<Particle> = rngs
        .iter_mut()
        .map(|rng| Particle::new((0..dims).map(|_| rng.random::<f64>()).collect()))
        .collect();

    let mut archive = ParetoArchive::new(config.archive_size);
    for t in 0..config.max_iter {
        let genomes: Vec<(Vec<bool>, f64)> = particles
            .iter()
            .map(|p| decode(&p.position, config.lambda_range()))
            .collect();
        let evaluations: Vec<Objectives> = genomes
            .par_iter()
            .map(|(mask, lambda)| evaluator.evaluate(mask, *lambda))
            .collect::<Result<Vec<_>>>()?;

        let candidates = particles
            .iter()
            .zip(genomes)
            .zip(&evaluations)
            .map(|((particle, (mask, lambda)), &objectives)| EvaluatedSolution {
                mask,
                lambda,
                objectives,
                crowding: 0.0,
                position: particle.position.clone(),
            })
            .collect();
        archive.update(candidates);

        let c1 = config.c1_at(t);
        let c2 = config.c2_at(t);
        for ((particle, rng), &objectives) in
            particles.iter_mut().zip(rngs.iter_mut()).zip(&evaluations)
        {
            update_pbest(particle, objectives, rng);
            let gbest_position = select_gbest(&archive, rng)?.position.clone();
            velocity_position_update(particle, &gbest_position, config.inertia, c1, c2, config.v_max, rng);
            mutate(particle, config.mutation_rate, rng);
        }
    }
    Ok(archive)
}
