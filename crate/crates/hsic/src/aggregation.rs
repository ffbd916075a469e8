//! Multi-bandwidth aggregation: weighted bandwidth collections, the
//! permutation-calibrated level correction `u_alpha`, and the aggregated test
//! that rejects as soon as one bandwidth rejects at its corrected level
//! `u_alpha e^{-omega}`.
//!
//! Both permutation batches are drawn once per call and shared across every
//! probe of the dichotomy, so the rejection probability estimate is a
//! nondecreasing step function of u and the search is well posed. Per-item
//! permuted statistics are cached up front; each probe only re-ranks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::combine_sums;
use crate::kernel::{Bandwidths, Gram, Sample};
use crate::numeric::{quantile_rank, Kahan};
use crate::permutation::{draw_permutations, PermutationBatch};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// One bandwidth pair with its aggregation weight.
#[derive(Debug, Clone)]
pub struct WeightedItem {
    pub bandwidths: Bandwidths,
    pub omega: f64,
    pub label: Option<String>,
}

/// A finite collection of weighted bandwidths with `sum e^{-omega} <= 1`.
#[derive(Debug, Clone)]
pub struct WeightedCollection {
    items: Vec<WeightedItem>,
}

impl WeightedCollection {
    pub fn new(items: Vec<WeightedItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyCollection);
        }
        let (p, q) = (
            items[0].bandwidths.lambda().len(),
            items[0].bandwidths.mu().len(),
        );
        for item in &items {
            if item.bandwidths.lambda().len() != p || item.bandwidths.mu().len() != q {
                return Err(Error::DimensionMismatch(
                    "collection items must share bandwidth dimensions".into(),
                ));
            }
            if !(item.omega >= 0.0 && item.omega.is_finite()) {
                return Err(Error::InvalidArgument(
                    "weights must be nonnegative and finite".into(),
                ));
            }
        }
        let coll = Self { items };
        let sum = coll.weight_sum();
        if sum > 1.0 + WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "inadmissible weights: sum of e^-omega is {sum} > 1"
            )));
        }
        Ok(coll)
    }

    pub fn items(&self) -> &[WeightedItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `sum over items of e^{-omega}`.
    pub fn weight_sum(&self) -> f64 {
        self.items.iter().map(|i| (-i.omega).exp()).sum()
    }

    /// Upper end of the feasible correction interval,
    /// `M = inf over items of e^{omega}`.
    pub fn min_exp_omega(&self) -> f64 {
        self.items
            .iter()
            .map(|i| i.omega.exp())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.omega).collect()
    }
}

const OMEGA_BASEL: f64 = 1.2825498301618640; // pi / sqrt(6)

/// Dyadic isotropic collection `2^-m 1_{p+q}` for `m = 1..M_n` with
/// `M_n = floor(log2((n / log n)^(2/(p+q))))` and weights
/// `omega_m = 2 log(m pi / sqrt 6)`.
pub fn dyadic_isotropic_collection(n: usize, p: usize, q: usize) -> Result<WeightedCollection> {
    if n < 3 {
        return Err(Error::EmptyCollection);
    }
    let d = (p + q) as f64;
    let m_max = ((n as f64 / (n as f64).ln()).powf(2.0 / d).log2()).floor() as i64;
    if m_max < 1 {
        return Err(Error::EmptyCollection);
    }
    let items = (1..=m_max)
        .map(|m| {
            let bw = 2f64.powi(-(m as i32));
            Ok(WeightedItem {
                bandwidths: Bandwidths::isotropic(bw, p, bw, q)?,
                omega: 2.0 * ((m as f64) * OMEGA_BASEL).ln(),
                label: Some(format!("m={m}")),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedCollection::new(items)
}

/// Dyadic anisotropic collection over multi-indices `m in (N*)^{p+q}` with
/// `sum m <= 2 log2(n / log n)` and weights
/// `omega = 2 sum_i log(m_i pi / sqrt 6)`.
pub fn dyadic_anisotropic_collection(n: usize, p: usize, q: usize) -> Result<WeightedCollection> {
    if n < 3 {
        return Err(Error::EmptyCollection);
    }
    let d = p + q;
    let budget = 2.0 * (n as f64 / (n as f64).ln()).log2();
    if budget < d as f64 {
        return Err(Error::EmptyCollection);
    }
    let mut items = Vec::new();
    let mut index = vec![1u32; d];
    enumerate_indices(&mut index, 0, budget, &mut items, p, q)?;
    WeightedCollection::new(items)
}

fn enumerate_indices(
    index: &mut Vec<u32>,
    pos: usize,
    budget: f64,
    out: &mut Vec<WeightedItem>,
    p: usize,
    q: usize,
) -> Result<()> {
    let d = p + q;
    let used: u32 = index[..pos].iter().sum();
    if pos == d {
        let lambda: Vec<f64> = index[..p].iter().map(|&m| 2f64.powi(-(m as i32))).collect();
        let mu: Vec<f64> = index[p..].iter().map(|&m| 2f64.powi(-(m as i32))).collect();
        let omega: f64 = index
            .iter()
            .map(|&m| 2.0 * ((m as f64) * OMEGA_BASEL).ln())
            .sum();
        out.push(WeightedItem {
            bandwidths: Bandwidths::new(lambda, mu)?,
            omega,
            label: Some(format!("m={index:?}")),
        });
        return Ok(());
    }
    let remaining_min = (d - pos - 1) as u32; // at least 1 per remaining slot
    let mut m = 1u32;
    while (used + m + remaining_min) as f64 <= budget {
        index[pos] = m;
        enumerate_indices(index, pos + 1, budget, out, p, q)?;
        m += 1;
    }
    Ok(())
}

/// Weight family for the scaled product grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridWeights {
    /// `omega = log(r^2)` for every item; the weights sum to 1 exactly.
    Uniform,
    /// `omega_{a,b} = 2 log(a+1) + 2 log(b+1) + log(sum u^-2 v^-2)`.
    Exponential,
}

/// Full product grid `{base_lambda / 2^a} x {base_mu / 2^b}` for
/// `0 <= a, b <= r-1`.
pub fn scaled_grid_collection(
    base: &Bandwidths,
    r: usize,
    weights: GridWeights,
) -> Result<WeightedCollection> {
    if r < 1 {
        return Err(Error::InvalidArgument("grid size r must be at least 1".into()));
    }
    let norm: f64 = match weights {
        GridWeights::Uniform => 0.0,
        GridWeights::Exponential => {
            let s: f64 = (1..=r)
                .flat_map(|u| (1..=r).map(move |v| 1.0 / ((u * u * v * v) as f64)))
                .sum();
            s.ln()
        }
    };
    let mut items = Vec::with_capacity(r * r);
    for a in 0..r {
        for b in 0..r {
            let omega = match weights {
                GridWeights::Uniform => ((r * r) as f64).ln(),
                GridWeights::Exponential => {
                    2.0 * ((a + 1) as f64).ln() + 2.0 * ((b + 1) as f64).ln() + norm
                }
            };
            items.push(WeightedItem {
                bandwidths: base.scaled(2f64.powi(-(a as i32)), 2f64.powi(-(b as i32)))?,
                omega,
                label: Some(format!("a={a},b={b}")),
            });
        }
    }
    WeightedCollection::new(items)
}

/// Diagonal collection `{2^-m (base_lambda, base_mu)}` for `0 <= m <= r-1`
/// with exponential weights `omega_m = 2 log(m+1) + log(sum (m'+1)^-2)`,
/// normalized so the weights sum to 1.
pub fn scaled_diagonal_collection(base: &Bandwidths, r: usize) -> Result<WeightedCollection> {
    if r < 1 {
        return Err(Error::InvalidArgument("diagonal size r must be at least 1".into()));
    }
    let norm: f64 = (0..r).map(|m| 1.0 / (((m + 1) * (m + 1)) as f64)).sum::<f64>().ln();
    let items = (0..r)
        .map(|m| {
            let c = 2f64.powi(-(m as i32));
            Ok(WeightedItem {
                bandwidths: base.scaled(c, c)?,
                omega: 2.0 * ((m + 1) as f64).ln() + norm,
                label: Some(format!("m={m}")),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedCollection::new(items)
}

/// Kernel matrices for a whole collection, deduplicating identical lambda
/// (resp. mu) blocks so grid collections build r + r matrices, not 2 r^2.
pub(crate) struct CollectionGrams {
    ks: Vec<Gram>,
    ls: Vec<Gram>,
    item_k: Vec<usize>,
    item_l: Vec<usize>,
    n: usize,
}

impl CollectionGrams {
    pub fn build(s: &Sample, coll: &WeightedCollection) -> Result<Self> {
        let n = s.n();
        let mut ks: Vec<Gram> = Vec::new();
        let mut ls: Vec<Gram> = Vec::new();
        let mut k_keys: Vec<Vec<u64>> = Vec::new();
        let mut l_keys: Vec<Vec<u64>> = Vec::new();
        let mut item_k = Vec::with_capacity(coll.len());
        let mut item_l = Vec::with_capacity(coll.len());
        for item in coll.items() {
            let kk: Vec<u64> = item.bandwidths.lambda().iter().map(|v| v.to_bits()).collect();
            let ki = match k_keys.iter().position(|k| *k == kk) {
                Some(i) => i,
                None => {
                    ks.push(Gram::build(s.x(), n, s.p(), item.bandwidths.lambda())?);
                    k_keys.push(kk);
                    ks.len() - 1
                }
            };
            let lk: Vec<u64> = item.bandwidths.mu().iter().map(|v| v.to_bits()).collect();
            let li = match l_keys.iter().position(|k| *k == lk) {
                Some(i) => i,
                None => {
                    ls.push(Gram::build(s.y(), n, s.q(), item.bandwidths.mu())?);
                    l_keys.push(lk);
                    ls.len() - 1
                }
            };
            item_k.push(ki);
            item_l.push(li);
        }
        Ok(Self { ks, ls, item_k, item_l, n })
    }

    fn item_stat(&self, item: usize, l_values: &[f64], rl: &[f64]) -> f64 {
        let n = self.n;
        let k = &self.ks[self.item_k[item]];
        let kv = k.values();
        let rk = k.row_sums_offdiag();
        let mut s1 = Kahan::new();
        for i in 0..n {
            let krow = &kv[i * n..(i + 1) * n];
            let lrow = &l_values[i * n..(i + 1) * n];
            let mut row = 0.0;
            for j in 0..n {
                row += krow[j] * lrow[j];
            }
            s1.add(row - krow[i] * lrow[i]);
        }
        let (mut t, mut sk, mut sl) = (Kahan::new(), Kahan::new(), Kahan::new());
        for i in 0..n {
            t.add(rk[i] * rl[i]);
            sk.add(rk[i]);
            sl.add(rl[i]);
        }
        combine_sums(s1.sum(), t.sum(), sk.sum(), sl.sum(), n)
    }

    /// Observed statistic for every item, n >= 4 required.
    pub fn observed(&self) -> Result<Vec<f64>> {
        if self.n < 4 {
            return Err(Error::SampleTooSmall { needed: 4, got: self.n });
        }
        Ok((0..self.item_k.len())
            .map(|item| {
                let l = &self.ls[self.item_l[item]];
                self.item_stat(item, l.values(), l.row_sums_offdiag())
            })
            .collect())
    }

    /// Statistics for every item on the Y-permuted sample. The permuted L is
    /// materialized once per distinct mu block and reused across items.
    pub fn permuted(&self, sigma: &[usize], l_scratch: &mut Vec<f64>, rl_scratch: &mut Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; self.item_k.len()];
        for (li, l) in self.ls.iter().enumerate() {
            l_scratch.clear();
            l_scratch.resize(n * n, 0.0);
            let lv = l.values();
            for i in 0..n {
                let src = &lv[sigma[i] * n..(sigma[i] + 1) * n];
                let dst = &mut l_scratch[i * n..(i + 1) * n];
                for j in 0..n {
                    dst[j] = src[sigma[j]];
                }
            }
            rl_scratch.clear();
            rl_scratch.extend(sigma.iter().map(|&s| l.row_sums_offdiag()[s]));
            for item in 0..self.item_k.len() {
                if self.item_l[item] == li {
                    out[item] = self.item_stat(item, l_scratch, rl_scratch);
                }
            }
        }
        out
    }

    /// `permuted` over a whole batch, one row per permutation.
    pub fn permuted_batch(&self, batch: &PermutationBatch) -> Vec<Vec<f64>> {
        batch
            .perms()
            .par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(lbuf, rlbuf), sigma| self.permuted(sigma, lbuf, rlbuf),
            )
            .collect()
    }
}

/// Seeds for the two independent permutation batches of the aggregated test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AggregationSeeds {
    /// Seed for set A' (B1 permutations, quantile estimation).
    pub quantile: u64,
    /// Seed for set B' (B2 permutations, rejection-probability estimation).
    pub probability: u64,
}

/// Result of the level-correction search.
#[derive(Debug, Clone)]
pub struct UAlphaEstimate {
    pub u_hat: f64,
    pub corrected_quantiles: Vec<f64>,
    pub iterations: usize,
    /// Final dichotomy interval (last feasible probe, last infeasible probe).
    pub bounds: (f64, f64),
    /// True when `M <= alpha` left no room for a correction search.
    pub infeasible: bool,
    /// True when some corrected level was so extreme that the rank clamped to
    /// the pooled maximum (B1 too small for that level).
    pub rank_clamped: bool,
}

/// Shared dichotomy over `[alpha, M]`: `sorted_ref[i]` holds the ascending
/// reference statistics for item i (pooled with the observed value on the
/// permuted side, plain Monte Carlo draws on the theoretical side) and
/// `b_stats[i]` the independent statistics used to estimate the rejection
/// probability.
pub(crate) fn solve_level_correction(
    alpha: f64,
    omegas: &[f64],
    sorted_ref: &[Vec<f64>],
    b_stats: &[Vec<f64>],
) -> UAlphaEstimate {
    let m_sup = omegas.iter().map(|w| w.exp()).fold(f64::INFINITY, f64::min);
    let quantiles_at = |u: f64, clamped: &mut bool| -> Vec<f64> {
        omegas
            .iter()
            .zip(sorted_ref.iter())
            .map(|(&w, pool)| {
                let level = u * (-w).exp();
                let rank = quantile_rank(pool.len(), level);
                if rank == pool.len() {
                    *clamped = true;
                }
                pool[rank - 1]
            })
            .collect()
    };
    let phat = |quantiles: &[f64]| -> f64 {
        let b2 = b_stats[0].len();
        let mut hits = 0usize;
        for b in 0..b2 {
            if b_stats
                .iter()
                .zip(quantiles.iter())
                .any(|(stats, &q)| stats[b] > q)
            {
                hits += 1;
            }
        }
        hits as f64 / b2 as f64
    };

    let mut rank_clamped = false;
    if m_sup <= alpha {
        // no admissible correction above alpha: fall back to u = alpha
        let quantiles = quantiles_at(alpha, &mut rank_clamped);
        return UAlphaEstimate {
            u_hat: alpha,
            corrected_quantiles: quantiles,
            iterations: 0,
            bounds: (alpha, m_sup),
            infeasible: true,
            rank_clamped,
        };
    }

    let (mut lo, mut hi) = (alpha, m_sup);
    let mut iterations = 0usize;
    let mut probes: Vec<(f64, f64)> = Vec::new();
    while hi - lo > 1e-3 * lo && iterations < 64 {
        let u = 0.5 * (lo + hi);
        let mut clamped = false;
        let q = quantiles_at(u, &mut clamped);
        let p = phat(&q);
        probes.push((u, p));
        if p <= alpha {
            lo = u;
            rank_clamped |= clamped;
        } else {
            hi = u;
        }
        iterations += 1;
    }
    // the estimated rejection probability must be nondecreasing in u, since
    // all probes re-rank the same cached statistics
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    debug_assert!(
        probes.windows(2).all(|w| w[0].1 <= w[1].1),
        "rejection-probability estimate not monotone across probes"
    );

    let quantiles = quantiles_at(lo, &mut rank_clamped);
    UAlphaEstimate {
        u_hat: lo,
        corrected_quantiles: quantiles,
        iterations,
        bounds: (lo, hi),
        infeasible: false,
        rank_clamped,
    }
}

/// Per-item slice of an aggregated outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ItemResult {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub omega: f64,
    pub label: Option<String>,
    pub statistic: f64,
    pub corrected_quantile: f64,
    pub reject: bool,
}

/// Full record of an aggregated permuted test.
#[derive(Debug, Clone, Serialize)]
pub struct AggregatedOutcome {
    pub alpha: f64,
    pub u_hat: f64,
    pub per_item: Vec<ItemResult>,
    pub reject: bool,
    pub dichotomy_iterations: usize,
    pub u_bounds: (f64, f64),
    pub correction_infeasible: bool,
    pub quantile_fallback: bool,
    pub b1: usize,
    pub b2: usize,
    pub seeds: AggregationSeeds,
}

struct CachedStats {
    observed: Vec<f64>,
    /// per item: B1 permuted statistics pooled with the observed one, sorted.
    pooled_sorted: Vec<Vec<f64>>,
    /// per item: B2 independent permuted statistics.
    b_stats: Vec<Vec<f64>>,
}

fn cache_statistics(
    s: &Sample,
    coll: &WeightedCollection,
    b1: usize,
    b2: usize,
    seeds: AggregationSeeds,
) -> Result<CachedStats> {
    if b1 == 0 || b2 == 0 {
        return Err(Error::InvalidArgument("B1 and B2 must be positive".into()));
    }
    let grams = CollectionGrams::build(s, coll)?;
    let observed = grams.observed()?;
    let batch_a = draw_permutations(s.n(), b1, seeds.quantile)?;
    let batch_b = draw_permutations(s.n(), b2, seeds.probability)?;
    let rows_a = grams.permuted_batch(&batch_a);
    let rows_b = grams.permuted_batch(&batch_b);
    let items = coll.len();
    let mut pooled_sorted = vec![Vec::with_capacity(b1 + 1); items];
    for row in &rows_a {
        for (i, &v) in row.iter().enumerate() {
            pooled_sorted[i].push(v);
        }
    }
    for (i, pool) in pooled_sorted.iter_mut().enumerate() {
        pool.push(observed[i]);
        pool.sort_by(f64::total_cmp);
    }
    let mut b_stats = vec![Vec::with_capacity(b2); items];
    for row in &rows_b {
        for (i, &v) in row.iter().enumerate() {
            b_stats[i].push(v);
        }
    }
    Ok(CachedStats {
        observed,
        pooled_sorted,
        b_stats,
    })
}

/// Estimates the level correction `u_alpha` by dichotomy on `[alpha, M]`.
pub fn estimate_u_alpha(
    s: &Sample,
    coll: &WeightedCollection,
    alpha: f64,
    b1: usize,
    b2: usize,
    seeds: AggregationSeeds,
) -> Result<UAlphaEstimate> {
    validate_alpha(alpha)?;
    let cache = cache_statistics(s, coll, b1, b2, seeds)?;
    Ok(solve_level_correction(
        alpha,
        &coll.omegas(),
        &cache.pooled_sorted,
        &cache.b_stats,
    ))
}

/// The aggregated permuted test: rejects iff some item's observed statistic
/// exceeds its corrected quantile.
pub fn aggregated_test(
    s: &Sample,
    coll: &WeightedCollection,
    alpha: f64,
    b1: usize,
    b2: usize,
    seeds: AggregationSeeds,
) -> Result<AggregatedOutcome> {
    validate_alpha(alpha)?;
    let cache = cache_statistics(s, coll, b1, b2, seeds)?;
    let estimate = solve_level_correction(
        alpha,
        &coll.omegas(),
        &cache.pooled_sorted,
        &cache.b_stats,
    );
    let per_item: Vec<ItemResult> = coll
        .items()
        .iter()
        .enumerate()
        .map(|(i, item)| ItemResult {
            lambda: item.bandwidths.lambda().to_vec(),
            mu: item.bandwidths.mu().to_vec(),
            omega: item.omega,
            label: item.label.clone(),
            statistic: cache.observed[i],
            corrected_quantile: estimate.corrected_quantiles[i],
            reject: cache.observed[i] > estimate.corrected_quantiles[i],
        })
        .collect();
    let reject = per_item.iter().any(|r| r.reject);
    Ok(AggregatedOutcome {
        alpha,
        u_hat: estimate.u_hat,
        per_item,
        reject,
        dichotomy_iterations: estimate.iterations,
        u_bounds: estimate.bounds,
        correction_infeasible: estimate.infeasible,
        quantile_fallback: estimate.rank_clamped,
        b1,
        b2,
        seeds,
    })
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    Ok(())
}
