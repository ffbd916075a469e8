//! Seeded permutation batches, the plus-one Monte Carlo quantile, and the
//! single permuted test.
//!
//! The quantile pools the observed statistic with the B permuted ones and
//! takes the order statistic at rank `ceil((B+1)(1-alpha))`, which keeps the
//! test at non-asymptotic level alpha for every B. Rejection is strict so a
//! statistic that ties the quantile is not rejected.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{hsic_fast, hsic_permuted_prechecked};
use crate::kernel::{compute_grams, Bandwidths, GramPair, Sample};
use crate::numeric::{derive_seed, quantile_rank};

/// A reproducible batch of uniform random permutations of `{0..n-1}`.
/// Permutation k depends only on `(seed, k)`.
#[derive(Debug, Clone)]
pub struct PermutationBatch {
    perms: Vec<Vec<usize>>,
    seed: u64,
    n: usize,
}

impl PermutationBatch {
    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }
}

/// Draws `b` i.i.d. uniform permutations via Fisher-Yates, one independently
/// seeded generator per permutation.
pub fn draw_permutations(n: usize, b: usize, seed: u64) -> Result<PermutationBatch> {
    if n == 0 || b == 0 {
        return Err(Error::InvalidArgument("n and b must be positive".into()));
    }
    let perms = (0..b as u64)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();
    Ok(PermutationBatch { perms, seed, n })
}

/// Plus-one Monte Carlo quantile: the observed value joins the pool before
/// ranking.
pub fn permutation_quantile(stats: &[f64], observed: f64, alpha: f64) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::InvalidArgument("empty permuted-statistic vector".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    let mut pooled: Vec<f64> = Vec::with_capacity(stats.len() + 1);
    pooled.extend_from_slice(stats);
    pooled.push(observed);
    pooled.sort_by(f64::total_cmp);
    let rank = quantile_rank(pooled.len(), alpha);
    Ok(pooled[rank - 1])
}

/// Outcome of a single permuted test.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SingleTestOutcome {
    pub statistic: f64,
    pub quantile: f64,
    pub reject: bool,
    pub alpha: f64,
    pub b: usize,
    pub seed: u64,
}

/// Runs the permuted test at level `alpha` with `b` Monte Carlo permutations.
pub fn single_permuted_test(
    s: &Sample,
    bw: &Bandwidths,
    alpha: f64,
    b: usize,
    seed: u64,
) -> Result<SingleTestOutcome> {
    single_permuted_test_with_stats(s, bw, alpha, b, seed).map(|(outcome, _)| outcome)
}

/// Variant that also returns the permuted-statistic vector, for callers that
/// need the full null sample (the aggregation machinery does).
pub fn single_permuted_test_with_stats(
    s: &Sample,
    bw: &Bandwidths,
    alpha: f64,
    b: usize,
    seed: u64,
) -> Result<(SingleTestOutcome, Vec<f64>)> {
    let grams = compute_grams(s, bw)?;
    let observed = hsic_fast(&grams)?.value;
    let batch = draw_permutations(s.n(), b, seed)?;
    let stats = permuted_statistics(&grams, &batch);
    let quantile = permutation_quantile(&stats, observed, alpha)?;
    let outcome = SingleTestOutcome {
        statistic: observed,
        quantile,
        reject: observed > quantile,
        alpha,
        b,
        seed,
    };
    Ok((outcome, stats))
}

/// Evaluates the estimator under every permutation of the batch. Order of the
/// output matches the batch, independent of scheduling.
pub fn permuted_statistics(grams: &GramPair, batch: &PermutationBatch) -> Vec<f64> {
    let n = grams.n();
    batch
        .perms()
        .par_iter()
        .map_init(
            || vec![0.0; n],
            |scratch, sigma| hsic_permuted_prechecked(grams, sigma, scratch).value,
        )
        .collect()
}
