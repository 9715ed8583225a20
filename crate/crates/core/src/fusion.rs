//! Decision-level fusion of a Pareto archive into one feature subset.
//!
//! Each archive member is weighted by its normalized adjusted R2 on the
//! training data. Within each member, every selected feature is scored
//! by its extra sum of squares (the SSE drop from adding it last to the
//! rest of the member's mask); features a member does not select score
//! zero there. Simple additive weighting collapses the feature-by-member
//! matrix into one score per feature, and a selection policy keeps the
//! high scorers.

use rayon::prelude::*;

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::mopso::{canonical_cmp, EvaluatedSolution, ParetoArchive};
use crate::regression::{
    self, fit_elastic_net, fit_ols, gather, metrics, predict, EnSettings, R2Convention,
};

/// Weight of one Pareto member (Eq. normalized adjusted R2).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParetoMemberScore {
    /// Index into the fused member list (canonical order, empty masks
    /// excluded).
    pub member_index: usize,
    pub r2_adj: f64,
    pub weight: f64,
}

/// Feature-by-member comparison matrix over the union of all selected
/// features. `ess[f][m]` is zero whenever member `m` does not select
/// feature `f`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureScoreMatrix {
    /// Original dataset feature indices, ascending; rows of `ess`.
    pub feature_indices: Vec<usize>,
    pub ess: Vec<Vec<f64>>,
}

/// How `select_final` turns scores into a feature set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionPolicy {
    /// Keep features scoring above the mean of the strictly positive
    /// scores (default).
    AboveMean,
    /// Keep the k best-scoring positive features.
    TopK(usize),
    /// Keep features scoring above a fixed threshold.
    AbsoluteThreshold(f64),
}

impl SelectionPolicy {
    pub fn name(&self) -> String {
        match self {
            SelectionPolicy::AboveMean => "above-mean".into(),
            SelectionPolicy::TopK(k) => format!("top-{k}"),
            SelectionPolicy::AbsoluteThreshold(t) => format!("absolute-{t}"),
        }
    }
}

/// Train/test performance of one model fit on the fused subset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelAssessment {
    pub train_rmse_cv: f64,
    pub train_fold_rmse: Vec<f64>,
    pub train_r2: f64,
    pub train_r2_adj: f64,
    pub test_rmse: f64,
    pub test_r2: f64,
    pub test_r2_adj: f64,
}

/// Everything the fusion stage decides and measures.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusionReport {
    pub member_scores: Vec<ParetoMemberScore>,
    pub ess: FeatureScoreMatrix,
    /// One score per entry of `ess.feature_indices`.
    pub scores: Vec<f64>,
    /// Final subset as original dataset feature indices, ascending.
    pub selected: Vec<usize>,
    pub threshold_used: f64,
    /// True when the policy filter emptied and the argmax fallback fired.
    pub fallback_used: bool,
    pub policy: String,
    /// Lambda used for the elastic net assessment (callers typically pass
    /// the archive's median lambda).
    pub lambda_eval: f64,
    /// Unpenalized fit on the fused subset.
    pub ols: ModelAssessment,
    /// Elastic net fit on the fused subset at `lambda_eval`.
    pub elastic_net: ModelAssessment,
}

/// Archive members eligible for fusion: empty masks dropped, canonical
/// order (ascending RMSE) regardless of input order.
pub fn fusable_members(archive: &ParetoArchive) -> Vec<EvaluatedSolution> {
    let mut members: Vec<EvaluatedSolution> = archive
        .members()
        .iter()
        .filter(|m| m.objectives.cardinality > 0)
        .cloned()
        .collect();
    members.sort_by(canonical_cmp);
    members
}

/// Median lambda across fusable members; used as the elastic net
/// evaluation point for the fused model.
pub fn median_lambda(members: &[EvaluatedSolution]) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    let mut lambdas: Vec<f64> = members.iter().map(|m| m.lambda).collect();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = lambdas.len() / 2;
    Some(if lambdas.len() % 2 == 1 {
        lambdas[mid]
    } else {
        0.5 * (lambdas[mid - 1] + lambdas[mid])
    })
}

/// Per-member weights: adjusted R2 of the OLS fit on the member's mask,
/// negatives clamped to zero, normalized to sum one.
pub fn member_weights(
    members: &[EvaluatedSolution],
    train: &Dataset,
    convention: R2Convention,
) -> Result<Vec<ParetoMemberScore>> {
    if members.is_empty() {
        return Err(Error::EmptyArchive);
    }
    let rows: Vec<usize> = (0..train.n()).collect();
    let r2_adjs: Vec<f64> = members
        .par_iter()
        .map(|member| {
            let subset = member.selected_indices();
            let (x, y) = gather(train, &rows, &subset);
            let (b0, coefs) = fit_ols(&x, &y)?;
            Ok(metrics(&x, &y, b0, &coefs, convention)?.r2_adj)
        })
        .collect::<Result<Vec<f64>>>()?;

    let clamped: Vec<f64> = r2_adjs.iter().map(|&r| r.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoInformativeMember);
    }
    Ok(r2_adjs
        .iter()
        .zip(&clamped)
        .enumerate()
        .map(|(member_index, (&r2_adj, &c))| ParetoMemberScore {
            member_index,
            r2_adj,
            weight: c / total,
        })
        .collect())
}

/// The feature-by-member ESS matrix. Entry `(j, i)` for feature `j` in
/// member `i`'s mask `M` is `SSE(M \ {j}) - SSE(M)`, clamped at zero;
/// features outside the mask score zero.
pub fn feature_ess_scores(
    members: &[EvaluatedSolution],
    train: &Dataset,
) -> Result<FeatureScoreMatrix> {
    if members.is_empty() {
        return Err(Error::EmptyArchive);
    }
    let mut union: Vec<usize> = Vec::new();
    for member in members {
        for j in member.selected_indices() {
            if !union.contains(&j) {
                union.push(j);
            }
        }
    }
    union.sort_unstable();

    let columns: Vec<Vec<f64>> = members
        .par_iter()
        .map(|member| {
            let mask = member.selected_indices();
            let sse_full = regression::ols_sse_on_subset(train, &mask)?;
            let mut column = vec![0.0_f64; union.len()];
            for (f, &j) in union.iter().enumerate() {
                if mask.contains(&j) {
                    let reduced: Vec<usize> = mask.iter().copied().filter(|&k| k != j).collect();
                    let sse_reduced = regression::ols_sse_on_subset(train, &reduced)?;
                    column[f] = (sse_reduced - sse_full).max(0.0);
                }
            }
            Ok(column)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let ess = (0..union.len())
        .map(|f| columns.iter().map(|c| c[f]).collect())
        .collect();
    Ok(FeatureScoreMatrix { feature_indices: union, ess })
}

/// Simple additive weighting: `Score_j = sum_i w_i * ESS_{ij}`.
pub fn saw_scores(weights: &[ParetoMemberScore], matrix: &FeatureScoreMatrix) -> Vec<f64> {
    matrix
        .ess
        .iter()
        .map(|row| {
            row.iter()
                .zip(weights)
                .map(|(&e, w)| w.weight * e)
                .sum()
        })
        .collect()
}

/// Apply a selection policy to the score vector. Returns positions into
/// `scores` (ascending) plus the numeric threshold that was applied. A
/// filter that keeps nothing falls back to the single argmax feature.
pub fn select_final(scores: &[f64], policy: SelectionPolicy) -> Result<(Vec<usize>, f64, bool)> {
    if scores.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Data("feature scores must be non-negative".into()));
    }
    let positives: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > 0.0).collect();
    if positives.is_empty() {
        return Err(Error::Data("all feature scores are zero".into()));
    }
    let argmax = positives
        .iter()
        .copied()
        .max_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(b.cmp(&a)))
        .unwrap();

    let (mut kept, threshold) = match policy {
        SelectionPolicy::AboveMean => {
            let mean = positives.iter().map(|&j| scores[j]).sum::<f64>() / positives.len() as f64;
            let kept: Vec<usize> = positives.iter().copied().filter(|&j| scores[j] > mean).collect();
            (kept, mean)
        }
        SelectionPolicy::TopK(k) => {
            if k == 0 {
                return Err(Error::Config("top-k policy needs k >= 1".into()));
            }
            let mut order = positives.clone();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            order.truncate(k);
            // Threshold reported as the best score that was cut.
            let cut = positives
                .iter()
                .copied()
                .filter(|j| !order.contains(j))
                .map(|j| scores[j])
                .fold(0.0_f64, f64::max);
            (order, cut)
        }
        SelectionPolicy::AbsoluteThreshold(t) => {
            let kept: Vec<usize> = positives.iter().copied().filter(|&j| scores[j] > t).collect();
            (kept, t)
        }
    };
    let fallback = kept.is_empty();
    if fallback {
        kept = vec![argmax];
    }
    kept.sort_unstable();
    Ok((kept, threshold, fallback))
}

fn assess_ols(
    selected: &[usize],
    train: &Dataset,
    test: &Dataset,
    folds: &FoldPlan,
    convention: R2Convention,
) -> Result<ModelAssessment> {
    let cv = regression::rmse_cv_ols_detailed(train, selected, folds)?;
    let train_rows: Vec<usize> = (0..train.n()).collect();
    let (x_train, y_train) = gather(train, &train_rows, selected);
    let (b0, coefs) = fit_ols(&x_train, &y_train)?;
    let train_metrics = metrics(&x_train, &y_train, b0, &coefs, convention)?;

    let test_rows: Vec<usize> = (0..test.n()).collect();
    let (x_test, y_test) = gather(test, &test_rows, selected);
    let test_metrics = metrics(&x_test, &y_test, b0, &coefs, convention)?;
    let test_rmse = (regression::sse(&y_test, &predict(&x_test, b0, &coefs)) / test.n() as f64).sqrt();

    Ok(ModelAssessment {
        train_rmse_cv: cv.rmse,
        train_fold_rmse: cv.fold_rmse,
        train_r2: train_metrics.r2,
        train_r2_adj: train_metrics.r2_adj,
        test_rmse,
        test_r2: test_metrics.r2,
        test_r2_adj: test_metrics.r2_adj,
    })
}

fn assess_elastic_net(
    selected: &[usize],
    train: &Dataset,
    test: &Dataset,
    folds: &FoldPlan,
    alpha: f64,
    lambda: f64,
    convention: R2Convention,
    settings: EnSettings,
) -> Result<ModelAssessment> {
    let cv = regression::rmse_cv_detailed(train, selected, alpha, lambda, folds, settings)?;
    let train_rows: Vec<usize> = (0..train.n()).collect();
    let (x_train, y_train) = gather(train, &train_rows, selected);
    let fit = fit_elastic_net(&x_train, &y_train, alpha, lambda, settings)?;
    let train_metrics = metrics(&x_train, &y_train, fit.intercept, &fit.coefficients, convention)?;

    let test_rows: Vec<usize> = (0..test.n()).collect();
    let (x_test, y_test) = gather(test, &test_rows, selected);
    let test_metrics = metrics(&x_test, &y_test, fit.intercept, &fit.coefficients, convention)?;
    let test_rmse =
        (regression::sse(&y_test, &fit.predict(&x_test)) / test.n() as f64).sqrt();

    Ok(ModelAssessment {
        train_rmse_cv: cv.rmse,
        train_fold_rmse: cv.fold_rmse,
        train_r2: train_metrics.r2,
        train_r2_adj: train_metrics.r2_adj,
        test_rmse,
        test_r2: test_metrics.r2,
        test_r2_adj: test_metrics.r2_adj,
    })
}

/// Full fusion: weights, ESS matrix, SAW scores, selection, then train
/// and test assessments of both an OLS and an elastic net fit on the
/// fused subset. The result is independent of archive member order.
#[allow(clippy::too_many_arguments)]
pub fn fuse(
    archive: &ParetoArchive,
    train: &Dataset,
    test: &Dataset,
    policy: SelectionPolicy,
    alpha: f64,
    lambda_eval: f64,
    folds: &FoldPlan,
    convention: R2Convention,
    settings: EnSettings,
) -> Result<FusionReport> {
    let members = fusable_members(archive);
    if members.is_empty() {
        return Err(Error::EmptyArchive);
    }
    let member_scores = member_weights(&members, train, convention)?;
    let ess = feature_ess_scores(&members, train)?;
    let scores = saw_scores(&member_scores, &ess);
    let (kept_positions, threshold_used, fallback_used) = select_final(&scores, policy)?;
    let selected: Vec<usize> = kept_positions.iter().map(|&pos| ess.feature_indices[pos]).collect();

    let ols = assess_ols(&selected, train, test, folds, convention)?;
    let elastic_net = assess_elastic_net(
        &selected, train, test, folds, alpha, lambda_eval, convention, settings,
    )?;

    Ok(FusionReport {
        member_scores,
        ess,
        scores,
        selected,
        threshold_used,
        fallback_used,
        policy: policy.name(),
        lambda_eval,
        ols,
        elastic_net,
    })
}
