//! Gaussian kernels, Gram matrices and bandwidth arithmetic.
//!
//! The kernel on each side is the Gaussian density kernel
//! `k_bw(x, x') = (prod_i bw_i)^-1 (2 pi)^{-d/2} exp(-1/2 sum_i ((x_i - x'_i)/bw_i)^2)`,
//! so small bandwidths concentrate mass and pick up fine-scale dependence.

use crate::error::{Error, Result};

/// Paired observations `(X, Y)` with `X` in `R^{n x p}` and `Y` in `R^{n x q}`,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    p: usize,
    q: usize,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidArgument("p and q must be positive".into()));
        }
        if x.len() % p != 0 || y.len() % q != 0 {
            return Err(Error::DimensionMismatch(format!(
                "x has {} entries (p = {p}), y has {} entries (q = {q})",
                x.len(),
                y.len()
            )));
        }
        let n = x.len() / p;
        if y.len() / q != n {
            return Err(Error::DimensionMismatch(format!(
                "x has {n} rows but y has {} rows",
                y.len() / q
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("sample must be nonempty".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sample entries must be finite".into()));
        }
        Ok(Self { x, y, n, p, q })
    }

    /// Univariate convenience constructor (p = q = 1).
    pub fn univariate(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Sample::new(x, y, 1, 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.q..(i + 1) * self.q]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// New sample with the Y rows reordered by `sigma` (row i takes the old
    /// row `sigma[i]`).
    pub fn permute_y(&self, sigma: &[usize]) -> Result<Self> {
        validate_permutation(sigma, self.n)?;
        let mut y = Vec::with_capacity(self.y.len());
        for &s in sigma {
            y.extend_from_slice(self.y_row(s));
        }
        Ok(Self {
            x: self.x.clone(),
            y,
            n: self.n,
            p: self.p,
            q: self.q,
        })
    }
}

pub(crate) fn validate_permutation(sigma: &[usize], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {} for sample of size {n}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || seen[s] {
            return Err(Error::InvalidArgument(
                "permutation must be a bijection on 0..n".into(),
            ));
        }
        seen[s] = true;
    }
    Ok(())
}

/// Positive bandwidth vectors for the two sides of the kernel pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidths {
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl Bandwidths {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() || mu.is_empty() {
            return Err(Error::InvalidArgument("bandwidth vectors must be nonempty".into()));
        }
        if lambda
            .iter()
            .chain(mu.iter())
            .any(|&v| !(v.is_finite() && v > 0.0))
        {
            return Err(Error::InvalidArgument(
                "bandwidth components must be strictly positive and finite".into(),
            ));
        }
        Ok(Self { lambda, mu })
    }

    /// Isotropic-per-block bandwidths: `lambda` repeated p times, `mu` q times.
    pub fn isotropic(lambda: f64, p: usize, mu: f64, q: usize) -> Result<Self> {
        Self::new(vec![lambda; p], vec![mu; q])
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Both blocks scaled, lambda by `cx` and mu by `cy`.
    pub fn scaled(&self, cx: f64, cy: f64) -> Result<Self> {
        Self::new(
            self.lambda.iter().map(|v| v * cx).collect(),
            self.mu.iter().map(|v| v * cy).collect(),
        )
    }

    pub fn lambda_product(&self) -> f64 {
        self.lambda.iter().product()
    }

    pub fn mu_product(&self) -> f64 {
        self.mu.iter().product()
    }

    pub(crate) fn matches(&self, s: &Sample) -> Result<()> {
        if self.lambda.len() != s.p() || self.mu.len() != s.q() {
            return Err(Error::DimensionMismatch(format!(
                "bandwidths are ({}, {})-dimensional, sample is ({}, {})",
                self.lambda.len(),
                self.mu.len(),
                s.p(),
                s.q()
            )));
        }
        Ok(())
    }
}

/// One-sided Gram matrix with cached off-diagonal row sums.
#[derive(Debug, Clone)]
pub struct Gram {
    values: Vec<f64>,
    row_sums_offdiag: Vec<f64>,
    n: usize,
}

impl Gram {
    /// Builds the symmetric kernel matrix on `data` (n rows of dimension d).
    pub fn build(data: &[f64], n: usize, d: usize, bw: &[f64]) -> Result<Self> {
        if bw.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "bandwidth dimension {} does not match data dimension {d}",
                bw.len()
            )));
        }
        let norm = normalization(bw)?;
        let inv2: Vec<f64> = bw.iter().map(|b| 0.5 / (b * b)).collect();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = norm;
            let ri = &data[i * d..(i + 1) * d];
            for j in (i + 1)..n {
                let rj = &data[j * d..(j + 1) * d];
                let mut e = 0.0;
                for k in 0..d {
                    let diff = ri[k] - rj[k];
                    e += diff * diff * inv2[k];
                }
                let v = norm * (-e).exp();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        let row_sums_offdiag = offdiag_row_sums(&values, n);
        Ok(Self {
            values,
            row_sums_offdiag,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Cached `sum_{j != i} M_ij` per row.
    pub fn row_sums_offdiag(&self) -> &[f64] {
        &self.row_sums_offdiag
    }
}

pub(crate) fn offdiag_row_sums(values: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let row = &values[i * n..(i + 1) * n];
            let mut acc = crate::numeric::Kahan::new();
            for (j, &v) in row.iter().enumerate() {
                if j != i {
                    acc.add(v);
                }
            }
            acc.sum()
        })
        .collect()
}

fn normalization(bw: &[f64]) -> Result<f64> {
    if bw.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
        return Err(Error::InvalidArgument(
            "bandwidth components must be strictly positive and finite".into(),
        ));
    }
    let d = bw.len() as f64;
    let prod: f64 = bw.iter().product();
    Ok((2.0 * std::f64::consts::PI).powf(-d / 2.0) / prod)
}

/// The kernel pair `(K, L)` on a sample, the O(n^2) workhorse of every
/// estimator. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GramPair {
    k: Gram,
    l: Gram,
}

impl GramPair {
    pub fn new(k: Gram, l: Gram) -> Result<Self> {
        if k.n() != l.n() {
            return Err(Error::DimensionMismatch(format!(
                "K is {}x{} but L is {}x{}",
                k.n(),
                k.n(),
                l.n(),
                l.n()
            )));
        }
        Ok(Self { k, l })
    }

    pub fn n(&self) -> usize {
        self.k.n()
    }

    pub fn k(&self) -> &Gram {
        &self.k
    }

    pub fn l(&self) -> &Gram {
        &self.l
    }
}

/// Gaussian density kernel value at separation `diff`.
pub fn gaussian_kernel_value(diff: &[f64], bw: &[f64]) -> Result<f64> {
    if diff.len() != bw.len() {
        return Err(Error::DimensionMismatch(format!(
            "diff has dimension {}, bandwidths have dimension {}",
            diff.len(),
            bw.len()
        )));
    }
    let norm = normalization(bw)?;
    let e: f64 = diff
        .iter()
        .zip(bw.iter())
        .map(|(d, b)| {
            let r = d / b;
            0.5 * r * r
        })
        .sum();
    Ok(norm * (-e).exp())
}

/// Builds both Gram matrices for a sample at the given bandwidths.
pub fn compute_grams(s: &Sample, bw: &Bandwidths) -> Result<GramPair> {
    bw.matches(s)?;
    let k = Gram::build(s.x(), s.n(), s.p(), bw.lambda())?;
    let l = Gram::build(s.y(), s.n(), s.q(), bw.mu())?;
    GramPair::new(k, l)
}

// lambda^2 below this is treated as zero spread.
const DEGENERATE_THRESHOLD: f64 = 1e-300;

/// Reference bandwidths from mean pairwise squared distances,
/// `lambda^2 = [2n(n-1)]^-1 sum_{i != j} ||X_i - X_j||^2`, isotropic per block.
/// In the univariate case this is the biased empirical standard deviation.
pub fn empirical_bandwidths(s: &Sample) -> Result<Bandwidths> {
    if s.n() < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: s.n() });
    }
    let lambda = mean_pairwise_sq(s.x(), s.n(), s.p());
    let mu = mean_pairwise_sq(s.y(), s.n(), s.q());
    if lambda < DEGENERATE_THRESHOLD {
        return Err(Error::DegenerateSample { side: "x" });
    }
    if mu < DEGENERATE_THRESHOLD {
        return Err(Error::DegenerateSample { side: "y" });
    }
    Bandwidths::isotropic(lambda.sqrt(), s.p(), mu.sqrt(), s.q())
}

fn mean_pairwise_sq(data: &[f64], n: usize, d: usize) -> f64 {
    let mut acc = crate::numeric::Kahan::new();
    for i in 0..n {
        let ri = &data[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            let rj = &data[j * d..(j + 1) * d];
            let mut sq = 0.0;
            for k in 0..d {
                let diff = ri[k] - rj[k];
                sq += diff * diff;
            }
            acc.add(sq);
        }
    }
    // sum over i != j is twice the i < j sum; divide by 2n(n-1)
    acc.sum() / (n as f64 * (n - 1) as f64)
}

/// Bandwidth admissibility check:
/// `max(prod lambda, prod mu) < 1`, `n sqrt(prod lambda prod mu) > log(1/alpha)`
/// and `log(1/alpha) > 1`.
pub fn check_assumption_a2(bw: &Bandwidths, n: usize, alpha: f64) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    let lp = bw.lambda_product();
    let mp = bw.mu_product();
    let log_inv = (1.0 / alpha).ln();
    Ok(lp.max(mp) < 1.0 && n as f64 * (lp * mp).sqrt() > log_inv && log_inv > 1.0)
}

/// Rate-optimal isotropic bandwidths for regularity `delta`:
/// every component equals `n^(-2/(4 delta + p + q))`.
pub fn sobolev_optimal_bandwidths(n: usize, delta: f64, p: usize, q: usize) -> Result<Bandwidths> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let v = (n as f64).powf(-2.0 / (4.0 * delta + (p + q) as f64));
    Bandwidths::isotropic(v, p, v, q)
}

/// Rate-optimal anisotropic bandwidths for per-coordinate regularities in
/// (0, 2]: with `1/eta = sum 1/nu_i + sum 1/gamma_j`,
/// `lambda_i = n^(-2 eta / (nu_i (1 + 4 eta)))` and analogously for mu.
pub fn nikolskii_optimal_bandwidths(n: usize, nu: &[f64], gamma: &[f64]) -> Result<Bandwidths> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if nu.is_empty() || gamma.is_empty() {
        return Err(Error::InvalidArgument("regularity vectors must be nonempty".into()));
    }
    if nu.iter().chain(gamma.iter()).any(|&r| !(r > 0.0 && r <= 2.0)) {
        return Err(Error::InvalidArgument("regularities must lie in (0, 2]".into()));
    }
    let inv_eta: f64 = nu.iter().chain(gamma.iter()).map(|r| 1.0 / r).sum();
    let eta = 1.0 / inv_eta;
    let nf = n as f64;
    let comp = |r: f64| nf.powf(-2.0 * eta / (r * (1.0 + 4.0 * eta)));
    Bandwidths::new(
        nu.iter().map(|&r| comp(r)).collect(),
        gamma.iter().map(|&r| comp(r)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_2PI: f64 = 2.5066282746310002;

    #[test]
    fn kernel_value_at_zero() {
        let v = gaussian_kernel_value(&[0.0], &[1.0]).unwrap();
        assert!((v - 1.0 / SQRT_2PI).abs() < 1e-12);
    }

    #[test]
    fn kernel_value_hand_evaluation() {
        // diff = 2, bw = 2: (1/2)(1/sqrt(2 pi)) e^{-1/2}
        let v = gaussian_kernel_value(&[2.0], &[2.0]).unwrap();
        let expected = 0.5 / SQRT_2PI * (-0.5f64).exp();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.120985).abs() < 1e-6);
    }

    #[test]
    fn kernel_value_zero_distance_2d() {
        let (a, b) = (0.7, 1.3);
        let v = gaussian_kernel_value(&[0.0, 0.0], &[a, b]).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI * a * b)).abs() < 1e-12);
    }

    #[test]
    fn kernel_value_rejects_bad_input() {
        assert!(gaussian_kernel_value(&[1.0, 2.0], &[1.0]).is_err());
        assert!(gaussian_kernel_value(&[1.0], &[0.0]).is_err());
        assert!(gaussian_kernel_value(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn grams_constant_sample() {
        let s = Sample::univariate(vec![2.0; 5], vec![-1.0; 5]).unwrap();
        let bw = Bandwidths::isotropic(1.0, 1, 1.0, 1).unwrap();
        let g = compute_grams(&s, &bw).unwrap();
        let k0 = gaussian_kernel_value(&[0.0], &[1.0]).unwrap();
        assert!(g.k().values().iter().all(|&v| (v - k0).abs() < 1e-15));
    }

    #[test]
    fn grams_hand_sample() {
        let s = Sample::univariate(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]).unwrap();
        let bw = Bandwidths::isotropic(1.0, 1, 1.0, 1).unwrap();
        let g = compute_grams(&s, &bw).unwrap();
        let k12 = g.k().row(0)[1];
        let k23 = g.k().row(1)[2];
        assert!((k12 - 0.241971).abs() < 1e-6);
        assert!((k23 - 0.241971).abs() < 1e-6);
    }

    #[test]
    fn gram_symmetry_and_row_sum_cache() {
        let s = Sample::new(
            vec![0.3, -0.1, 1.2, 0.8, -0.5, 0.0, 2.0, 1.0],
            vec![0.5, 0.25, -1.0, 0.75],
            2,
            1,
        )
        .unwrap();
        let bw = Bandwidths::new(vec![0.8, 1.1], vec![0.6]).unwrap();
        let g = compute_grams(&s, &bw).unwrap();
        let n = g.n();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(g.k().values()[i * n + j], g.k().values()[j * n + i]);
            }
            let recomputed: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| g.k().values()[i * n + j])
                .sum();
            let cached = g.k().row_sums_offdiag()[i];
            assert!((cached - recomputed).abs() <= 1e-12 * recomputed.abs().max(1.0));
        }
    }

    #[test]
    fn gram_diagonal_is_zero_distance_value() {
        let s = Sample::univariate(vec![0.0, 1.5, -2.0], vec![1.0, 2.0, 3.0]).unwrap();
        let bw = Bandwidths::isotropic(0.7, 1, 1.3, 1).unwrap();
        let g = compute_grams(&s, &bw).unwrap();
        let k0 = gaussian_kernel_value(&[0.0], &[0.7]).unwrap();
        for i in 0..3 {
            assert!((g.k().row(i)[i] - k0).abs() < 1e-15);
        }
        // boundedness: off-diagonal entries in (0, k0]
        for i in 0..3 {
            for j in 0..3 {
                let v = g.k().row(i)[j];
                assert!(v > 0.0 && v <= k0 + 1e-15);
            }
        }
    }

    #[test]
    fn empirical_bandwidths_hand_case() {
        let s = Sample::univariate(vec![0.0, 2.0], vec![1.0, 3.0]).unwrap();
        let bw = empirical_bandwidths(&s).unwrap();
        assert!((bw.lambda()[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empirical_bandwidth_is_sd_in_univariate_case() {
        // sum over i != j of (x_i - x_j)^2 equals 2 n^2 biased-var, so the
        // 1/(2 n (n-1)) normalization yields the divisor-(n-1) variance
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37 + 11) % 97) as f64 / 9.7 - 5.0).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let s = Sample::univariate(xs.clone(), xs).unwrap();
        let bw = empirical_bandwidths(&s).unwrap();
        assert!((bw.lambda()[0] - var.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn empirical_bandwidths_degenerate() {
        let s = Sample::univariate(vec![1.0; 6], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(matches!(
            empirical_bandwidths(&s),
            Err(Error::DegenerateSample { side: "x" })
        ));
    }

    #[test]
    fn assumption_a2_cases() {
        let bw = Bandwidths::isotropic(0.5, 1, 0.5, 1).unwrap();
        assert!(check_assumption_a2(&bw, 100, 0.05).unwrap());
        assert!(!check_assumption_a2(&bw, 100, 0.5).unwrap());
        let big = Bandwidths::new(vec![2.0], vec![1.0]).unwrap();
        assert!(!check_assumption_a2(&big, 1_000_000, 0.05).unwrap());
    }

    #[test]
    fn assumption_a2_monotone_in_n() {
        let bw = Bandwidths::isotropic(0.3, 1, 0.2, 1).unwrap();
        let mut was_true = false;
        for n in 1..5000 {
            let now = check_assumption_a2(&bw, n, 0.01).unwrap();
            assert!(!was_true || now, "a2 flipped back to false at n = {n}");
            was_true = now;
        }
        assert!(was_true);
    }

    #[test]
    fn sobolev_bandwidths() {
        let bw = sobolev_optimal_bandwidths(100, 1.0, 1, 1).unwrap();
        assert!((bw.lambda()[0] - 100f64.powf(-1.0 / 3.0)).abs() < 1e-12);
        assert!((bw.lambda()[0] - 0.215443).abs() < 1e-6);

        let one = sobolev_optimal_bandwidths(1, 2.5, 3, 2).unwrap();
        assert!(one.lambda().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let smooth = sobolev_optimal_bandwidths(100, 10.0, 1, 1).unwrap();
        assert!((smooth.lambda()[0] - 100f64.powf(-2.0 / 42.0)).abs() < 1e-12);
        assert!((smooth.lambda()[0] - 0.803).abs() < 1e-3);
    }

    #[test]
    fn nikolskii_reduces_to_sobolev() {
        for &(delta, p, q, n) in &[(0.5, 1, 1, 100), (1.0, 2, 2, 500), (2.0, 1, 3, 1000)] {
            let sob = sobolev_optimal_bandwidths(n, delta * (p + q) as f64 / (p + q) as f64, p, q)
                .unwrap();
            // equal regularities delta in all directions give eta = delta / (p + q)
            let nik =
                nikolskii_optimal_bandwidths(n, &vec![delta; p], &vec![delta; q]).unwrap();
            let sob2 = sobolev_optimal_bandwidths(n, delta, p, q).unwrap();
            assert_eq!(sob.lambda().len(), nik.lambda().len());
            for (a, b) in nik.lambda().iter().zip(sob2.lambda().iter()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in nik.mu().iter().zip(sob2.mu().iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nikolskii_hand_case() {
        let bw = nikolskii_optimal_bandwidths(100, &[1.0], &[1.0]).unwrap();
        assert!((bw.lambda()[0] - 100f64.powf(-1.0 / 3.0)).abs() < 1e-12);
        let one = nikolskii_optimal_bandwidths(1, &[0.5], &[1.5]).unwrap();
        assert!((one.lambda()[0] - 1.0).abs() < 1e-15);
        assert!((one.mu()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nikolskii_rejects_out_of_range() {
        assert!(nikolskii_optimal_bandwidths(10, &[2.5], &[1.0]).is_err());
        assert!(nikolskii_optimal_bandwidths(10, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn translation_invariance() {
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..8).map(|i| (i as f64 * 0.91).cos()).collect();
        let s = Sample::univariate(x.clone(), y.clone()).unwrap();
        let shifted = Sample::univariate(
            x.iter().map(|v| v + 3.5).collect(),
            y.iter().map(|v| v - 7.25).collect(),
        )
        .unwrap();
        let bw = Bandwidths::isotropic(0.9, 1, 1.4, 1).unwrap();
        let g0 = compute_grams(&s, &bw).unwrap();
        let g1 = compute_grams(&shifted, &bw).unwrap();
        for (a, b) in g0.k().values().iter().zip(g1.k().values()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g0.l().values().iter().zip(g1.l().values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
