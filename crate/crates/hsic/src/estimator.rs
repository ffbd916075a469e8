//! The unbiased HSIC estimator: a combination of U-statistics of orders 2, 3
//! and 4 over the kernel pair. `hsic_bruteforce` enumerates distinct tuples
//! literally and serves as the oracle for the O(n^2) recombination in
//! `hsic_fast` and for the permuted evaluation in `hsic_permuted`.

use crate::error::{Error, Result};
use crate::kernel::{validate_permutation, GramPair};
use crate::numeric::Kahan;

/// Value of the unbiased estimator; may legitimately be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsicValue {
    pub value: f64,
    pub n: usize,
}

fn require_n4(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::SampleTooSmall { needed: 4, got: n });
    }
    Ok(())
}

/// Exact integer falling factorial n (n-1) ... (n-k+1), widened before the
/// float conversion.
fn falling(n: usize, k: usize) -> f64 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc *= (n - i) as u128;
    }
    acc as f64
}

/// O(n^4) reference evaluation by literal enumeration of distinct tuples.
pub fn hsic_bruteforce(g: &GramPair) -> Result<HsicValue> {
    let n = g.n();
    require_n4(n)?;
    let k = g.k().values();
    let l = g.l().values();

    let mut h2 = Kahan::new();
    for i in 0..n {
        for j in 0..n {
            if j != i {
                h2.add(k[i * n + j] * l[i * n + j]);
            }
        }
    }

    let mut h3 = Kahan::new();
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for r in 0..n {
                if r != i && r != j {
                    h3.add(k[i * n + j] * l[j * n + r]);
                }
            }
        }
    }

    let mut h4 = Kahan::new();
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for r in 0..n {
                if r == i || r == j {
                    continue;
                }
                for s in 0..n {
                    if s != i && s != j && s != r {
                        h4.add(k[i * n + j] * l[r * n + s]);
                    }
                }
            }
        }
    }

    let value = h2.sum() / falling(n, 2) + h4.sum() / falling(n, 4)
        - 2.0 * h3.sum() / falling(n, 3);
    Ok(HsicValue { value, n })
}

/// Off-diagonal sums feeding the recombination: S1 = sum_{i != j} K_ij L_ij,
/// T = sum_i rK_i rL_i, SK = sum_i rK_i, SL = sum_i rL_i, where rK, rL are the
/// cached off-diagonal row sums. The distinct-triple sum equals T - S1 and the
/// distinct-quadruple sum equals SK SL - 4T + 2 S1.
#[inline]
pub(crate) fn combine_sums(s1: f64, t: f64, sk: f64, sl: f64, n: usize) -> f64 {
    s1 / falling(n, 2) + (sk * sl - 4.0 * t + 2.0 * s1) / falling(n, 4)
        - 2.0 * (t - s1) / falling(n, 3)
}

/// O(n^2) evaluation via the row-sum recombination, validated against
/// `hsic_bruteforce`.
pub fn hsic_fast(g: &GramPair) -> Result<HsicValue> {
    let n = g.n();
    require_n4(n)?;
    let k = g.k().values();
    let l = g.l().values();
    let rk = g.k().row_sums_offdiag();
    let rl = g.l().row_sums_offdiag();

    let mut s1 = Kahan::new();
    for i in 0..n {
        let krow = &k[i * n..(i + 1) * n];
        let lrow = &l[i * n..(i + 1) * n];
        let mut row = 0.0;
        for j in 0..n {
            row += krow[j] * lrow[j];
        }
        // remove the diagonal product added above
        s1.add(row - krow[i] * lrow[i]);
    }
    let (mut t, mut sk, mut sl) = (Kahan::new(), Kahan::new(), Kahan::new());
    for i in 0..n {
        t.add(rk[i] * rl[i]);
        sk.add(rk[i]);
        sl.add(rl[i]);
    }
    Ok(HsicValue {
        value: combine_sums(s1.sum(), t.sum(), sk.sum(), sl.sum(), n),
        n,
    })
}

/// Estimator on the Y-permuted sample `(X_i, Y_{sigma(i)})`, evaluated from
/// the original kernel pair without re-computing any kernel value:
/// `L^sigma_ij = L_{sigma(i) sigma(j)}` and the permuted row-sum cache is
/// `rL_{sigma(i)}`.
pub fn hsic_permuted(g: &GramPair, sigma: &[usize]) -> Result<HsicValue> {
    let n = g.n();
    require_n4(n)?;
    validate_permutation(sigma, n)?;
    let mut scratch = vec![0.0; n];
    Ok(hsic_permuted_prechecked(g, sigma, &mut scratch))
}

/// Permutation loop body; `sigma` must already be validated and `scratch`
/// must have length n. Exposed crate-wide so batch callers can reuse the
/// buffer across the B evaluations.
pub(crate) fn hsic_permuted_prechecked(
    g: &GramPair,
    sigma: &[usize],
    scratch: &mut [f64],
) -> HsicValue {
    let n = g.n();
    let k = g.k().values();
    let l = g.l().values();
    let rk = g.k().row_sums_offdiag();
    let rl = g.l().row_sums_offdiag();

    let mut s1 = Kahan::new();
    for i in 0..n {
        let krow = &k[i * n..(i + 1) * n];
        let lrow = &l[sigma[i] * n..(sigma[i] + 1) * n];
        // gather the permuted row of L once, then a vectorizable dot product
        for j in 0..n {
            scratch[j] = lrow[sigma[j]];
        }
        let mut row = 0.0;
        for j in 0..n {
            row += krow[j] * scratch[j];
        }
        s1.add(row - krow[i] * scratch[i]);
    }
    let (mut t, mut sk, mut sl) = (Kahan::new(), Kahan::new(), Kahan::new());
    for i in 0..n {
        t.add(rk[i] * rl[sigma[i]]);
        sk.add(rk[i]);
        sl.add(rl[i]);
    }
    HsicValue {
        value: combine_sums(s1.sum(), t.sum(), sk.sum(), sl.sum(), n),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{compute_grams, Bandwidths, Sample};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_sample(n: usize, rng: &mut ChaCha8Rng) -> Sample {
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        Sample::univariate(x, y).unwrap()
    }

    fn grams(s: &Sample) -> crate::kernel::GramPair {
        let bw = Bandwidths::isotropic(0.8, s.p(), 1.1, s.q()).unwrap();
        compute_grams(s, &bw).unwrap()
    }

    #[test]
    fn constant_sample_is_zero() {
        let s = Sample::univariate(vec![1.0; 6], vec![2.0; 6]).unwrap();
        let g = grams(&s);
        assert!(hsic_bruteforce(&g).unwrap().value.abs() < 1e-12);
        assert!(hsic_fast(&g).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn rejects_small_samples() {
        let s = Sample::univariate(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
        let g = grams(&s);
        assert!(matches!(
            hsic_fast(&g),
            Err(Error::SampleTooSmall { needed: 4, got: 3 })
        ));
        assert!(hsic_bruteforce(&g).is_err());
    }

    #[test]
    fn fast_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 4..=12 {
            for _ in 0..20 {
                let s = random_sample(n, &mut rng);
                let g = grams(&s);
                let slow = hsic_bruteforce(&g).unwrap().value;
                let fast = hsic_fast(&g).unwrap().value;
                let tol = 1e-10 * slow.abs().max(1e-6);
                assert!(
                    (slow - fast).abs() <= tol,
                    "n = {n}: brute {slow} vs fast {fast}"
                );
            }
        }
    }

    #[test]
    fn permuted_matches_materialized_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_sample(8, &mut rng);
        let g = grams(&s);
        for _ in 0..50 {
            let mut sigma: Vec<usize> = (0..8).collect();
            sigma.shuffle(&mut rng);
            let via_view = hsic_permuted(&g, &sigma).unwrap().value;
            let materialized = s.permute_y(&sigma).unwrap();
            let oracle = hsic_bruteforce(&grams(&materialized)).unwrap().value;
            assert!((via_view - oracle).abs() <= 1e-10 * oracle.abs().max(1e-6));
        }
    }

    #[test]
    fn permuted_identity_equals_fast() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_sample(10, &mut rng);
        let g = grams(&s);
        let id: Vec<usize> = (0..10).collect();
        assert_eq!(
            hsic_permuted(&g, &id).unwrap().value,
            hsic_fast(&g).unwrap().value
        );
    }

    #[test]
    fn permuted_rejects_non_bijection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = grams(&random_sample(5, &mut rng));
        assert!(hsic_permuted(&g, &[0, 1, 2, 3, 3]).is_err());
        assert!(hsic_permuted(&g, &[0, 1, 2]).is_err());
    }

    #[test]
    fn pair_permutation_invariance() {
        // permuting both rows identically conjugates K and L identically
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = random_sample(9, &mut rng);
        let base = hsic_fast(&grams(&s)).unwrap().value;
        let mut order: Vec<usize> = (0..9).collect();
        order.shuffle(&mut rng);
        let x: Vec<f64> = order.iter().map(|&i| s.x_row(i)[0]).collect();
        let y: Vec<f64> = order.iter().map(|&i| s.y_row(i)[0]).collect();
        let shuffled = Sample::univariate(x, y).unwrap();
        let moved = hsic_fast(&grams(&shuffled)).unwrap().value;
        assert!((base - moved).abs() < 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn exchange_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = random_sample(8, &mut rng);
        let swapped = Sample::univariate(
            (0..8).map(|i| s.y_row(i)[0]).collect(),
            (0..8).map(|i| s.x_row(i)[0]).collect(),
        )
        .unwrap();
        let bw = Bandwidths::isotropic(0.8, 1, 1.1, 1).unwrap();
        let bw_swapped = Bandwidths::isotropic(1.1, 1, 0.8, 1).unwrap();
        let a = hsic_fast(&compute_grams(&s, &bw).unwrap()).unwrap().value;
        let b = hsic_fast(&compute_grams(&swapped, &bw_swapped).unwrap())
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn exhaustive_permutation_average_matches_oracle() {
        // all n! permutations at n = 5: view-based and materialized averages agree
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = random_sample(5, &mut rng);
        let g = grams(&s);
        let mut perm: Vec<usize> = (0..5).collect();
        let mut view_sum = 0.0;
        let mut oracle_sum = 0.0;
        let mut magnitude = 0.0;
        let mut count = 0usize;
        permute_all(&mut perm, 0, &mut |p| {
            let v = hsic_permuted_prechecked(&g, p, &mut vec![0.0; 5]).value;
            view_sum += v;
            magnitude += v.abs();
            let m = s.permute_y(p).unwrap();
            oracle_sum += hsic_bruteforce(&grams(&m)).unwrap().value;
            count += 1;
        });
        assert_eq!(count, 120);
        // the sum nearly cancels, so scale the tolerance by the total mass
        assert!((view_sum - oracle_sum).abs() < 1e-10 * magnitude.max(1e-6));
    }

    fn permute_all(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute_all(perm, k + 1, f);
            perm.swap(k, i);
        }
    }
}
