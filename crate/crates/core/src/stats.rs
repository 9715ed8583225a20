//! Paired nonparametric comparison via the Wilcoxon signed-rank test.
//!
//! Zero differences are dropped, tied absolute differences receive
//! average ranks, and the statistic is the positive-rank sum `W+`. For
//! an effective sample of at most twelve pairs the p-value comes from
//! full enumeration of the `2^n` sign assignments (conditional on the
//! observed ranks); larger samples use the normal approximation with
//! tie-corrected variance and a continuity correction.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest effective sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

/// Two metric vectors paired by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub label_a: String,
    pub label_b: String,
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
}

impl PairedSample {
    pub fn new(
        label_a: impl Into<String>,
        label_b: impl Into<String>,
        values_a: Vec<f64>,
        values_b: Vec<f64>,
    ) -> Result<PairedSample> {
        if values_a.len() != values_b.len() {
            return Err(Error::Stats(format!(
                "paired samples must have equal lengths, got {} and {}",
                values_a.len(),
                values_b.len()
            )));
        }
        if values_a.len() < 5 {
            return Err(Error::Stats(format!(
                "paired samples need at least 5 units, got {}",
                values_a.len()
            )));
        }
        if values_a.iter().chain(values_b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Stats("paired samples contain non-finite values".into()));
        }
        Ok(PairedSample {
            label_a: label_a.into(),
            label_b: label_b.into(),
            values_a,
            values_b,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// Sample `a` is shifted below sample `b`.
    ALess,
    /// Sample `a` is shifted above sample `b`.
    AGreater,
}

impl std::fmt::Display for Alternative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Alternative::TwoSided => "two-sided",
            Alternative::ALess => "a-less",
            Alternative::AGreater => "a-greater",
        };
        f.write_str(s)
    }
}

/// Average ranks of `values` (which must be positive magnitudes).
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0_f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1 ..= j+1.
        let shared = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Exact tail counts by enumerating every sign assignment over the
/// observed ranks.
fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let n = ranks.len();
    let total = 1u64 << n;
    let mut at_most = 0u64;
    let mut at_least = 0u64;
    // Ranks are multiples of 0.5, so the sums below are exact in f64 and
    // the comparisons are safe.
    for pattern in 0..total {
        let mut w = 0.0;
        for (bit, &r) in ranks.iter().enumerate() {
            if pattern >> bit & 1 == 1 {
                w += r;
            }
        }
        if w <= w_plus {
            at_most += 1;
        }
        if w >= w_plus {
            at_least += 1;
        }
    }
    (at_most as f64 / total as f64, at_least as f64 / total as f64)
}

/// Wilcoxon signed-rank test. Returns `(W+, p)`.
pub fn wilcoxon_signed_rank(sample: &PairedSample, alternative: Alternative) -> Result<(f64, f64)> {
    let differences: Vec<f64> = sample
        .values_a
        .iter()
        .zip(&sample.values_b)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if differences.is_empty() {
        return Err(Error::IdenticalSamples);
    }

    let magnitudes: Vec<f64> = differences.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    // `+ 0.0` normalizes the empty sum's negative zero.
    let w_plus: f64 = differences
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum::<f64>()
        + 0.0;

    let n = differences.len();
    let p = if n <= EXACT_LIMIT {
        let (p_less, p_greater) = exact_tails(&ranks, w_plus);
        match alternative {
            Alternative::ALess => p_less,
            Alternative::AGreater => p_greater,
            Alternative::TwoSided => (2.0 * p_less.min(p_greater)).min(1.0),
        }
    } else {
        // W+ = sum of rank_i * Bernoulli(1/2): the mean is sum(r)/2 and
        // the variance sum(r^2)/4, which reproduces the classical value
        // with tie correction.
        let mean: f64 = ranks.iter().sum::<f64>() / 2.0;
        let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
        let sd = var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        match alternative {
            Alternative::ALess => normal.cdf((w_plus - mean + 0.5) / sd),
            Alternative::AGreater => 1.0 - normal.cdf((w_plus - mean - 0.5) / sd),
            Alternative::TwoSided => {
                let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
                (2.0 * (1.0 - normal.cdf(z))).min(1.0)
            }
        }
    };
    Ok((w_plus, p.max(f64::MIN_POSITIVE)))
}

/// Decision at the 0.9 confidence level: reject iff `p < 0.10`.
pub fn reject_at_90(p: f64) -> bool {
    p < 0.10
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(a: Vec<f64>, b: Vec<f64>) -> PairedSample {
        PairedSample::new("a", "b", a, b).unwrap()
    }

    #[test]
    fn strictly_ordered_n6_one_sided() {
        let s = sample(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![2.0, 3.5, 4.1, 6.0, 7.2, 9.9],
        );
        let (w, p) = wilcoxon_signed_rank(&s, Alternative::ALess).unwrap();
        assert_eq!(w, 0.0);
        assert_abs_diff_eq!(p, 1.0 / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_samples_error() {
        let s = sample(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(
            wilcoxon_signed_rank(&s, Alternative::TwoSided),
            Err(Error::IdenticalSamples)
        ));
    }

    #[test]
    fn antisymmetry_under_swap() {
        let a = vec![1.0, 4.0, 2.0, 8.0, 5.5, 3.0, 7.0];
        let b = vec![2.0, 3.0, 4.0, 6.0, 5.0, 9.0, 7.5];
        let s_ab = sample(a.clone(), b.clone());
        let s_ba = sample(b, a);
        let (_, p_less) = wilcoxon_signed_rank(&s_ab, Alternative::ALess).unwrap();
        let (_, p_greater) = wilcoxon_signed_rank(&s_ba, Alternative::AGreater).unwrap();
        assert_eq!(p_less.to_bits(), p_greater.to_bits());
    }

    #[test]
    fn exact_mode_matches_brute_force_oracle() {
        // Independent oracle: enumerate sign patterns with integer rank
        // arithmetic (no ties by construction).
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let n = rng.random_range(5..=10usize);
            // Distinct magnitudes keep the oracle's integer-rank
            // enumeration valid (no ties).
            let mut magnitudes: Vec<i64> = (1..=100).collect();
            magnitudes.shuffle(&mut rng);
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for i in 0..n {
                let base = i as f64;
                let delta = (magnitudes[i] as f64 / 10.0)
                    * if rng.random::<bool>() { 1.0 } else { -1.0 };
                a.push(base + delta);
                b.push(base);
            }
            let s = sample(a.clone(), b.clone());
            let (w_plus, p) = wilcoxon_signed_rank(&s, Alternative::ALess).unwrap();

            let mut diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            diffs.retain(|d| *d != 0.0);
            let mut order: Vec<usize> = (0..diffs.len()).collect();
            order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
            let mut rank_of = vec![0usize; diffs.len()];
            for (r, &i) in order.iter().enumerate() {
                rank_of[i] = r + 1;
            }
            let observed: usize = diffs
                .iter()
                .enumerate()
                .filter(|(_, d)| **d > 0.0)
                .map(|(i, _)| rank_of[i])
                .sum();
            let m = diffs.len();
            let mut count = 0u64;
            for pattern in 0..(1u64 << m) {
                let w: usize = (0..m).filter(|&i| pattern >> i & 1 == 1).map(|i| i + 1).sum();
                if w <= observed {
                    count += 1;
                }
            }
            let oracle = count as f64 / (1u64 << m) as f64;
            assert_eq!(w_plus, observed as f64, "trial {trial}");
            assert_eq!(p.to_bits(), oracle.to_bits(), "trial {trial}");
        }
    }

    #[test]
    fn tied_magnitudes_get_average_ranks() {
        let ranks = average_ranks(&[2.0, 1.0, 2.0, 5.0]);
        assert_eq!(ranks, vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn normal_approximation_is_sane() {
        // 30 pairs, one sample clearly shifted down.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..10.0)).collect();
        let a: Vec<f64> = b.iter().map(|v| v - rng.random_range(0.5..1.5)).collect();
        let s = sample(a, b);
        let (_, p_less) = wilcoxon_signed_rank(&s, Alternative::ALess).unwrap();
        let (_, p_greater) = wilcoxon_signed_rank(&s, Alternative::AGreater).unwrap();
        assert!(p_less < 1e-4, "p_less = {p_less}");
        assert!(p_greater > 0.99, "p_greater = {p_greater}");
        let (_, p_two) = wilcoxon_signed_rank(&s, Alternative::TwoSided).unwrap();
        assert!(p_two < 1e-3 && p_two > 0.0);
    }

    #[test]
    fn shift_monotonicity() {
        // Pushing sample a further below b can only strengthen the
        // a-less evidence: p is non-increasing in the shift.
        let b: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let noise = [0.9, -0.7, 0.4, -0.3, 0.8, -0.6, 0.2, -0.1];
        let mut previous = f64::INFINITY;
        for shift in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let a: Vec<f64> = b.iter().zip(noise).map(|(v, e)| v + e - shift).collect();
            let s = sample(a, b.clone());
            let (_, p) = wilcoxon_signed_rank(&s, Alternative::ALess).unwrap();
            assert!(p <= previous, "p rose from {previous} to {p} at shift {shift}");
            previous = p;
        }
    }

    #[test]
    fn rejects_mismatched_or_short_samples() {
        assert!(PairedSample::new("a", "b", vec![1.0; 5], vec![1.0; 4]).is_err());
        assert!(PairedSample::new("a", "b", vec![1.0; 4], vec![1.0; 4]).is_err());
    }

    #[test]
    fn decision_rule_at_90() {
        assert!(reject_at_90(0.05));
        assert!(!reject_at_90(0.10));
        assert!(!reject_at_90(0.978));
    }
}
