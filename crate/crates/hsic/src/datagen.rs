//! Data-generating mechanisms: dependent benchmark pairs, an independent-pair
//! construction sharing the same marginals, and a locally perturbed uniform
//! alternative with a tunable distance from independence.
//!
//! Every sampler consumes one ChaCha8 stream seeded from the caller's seed,
//! with per-observation draws in a fixed order, so outputs are bit
//! reproducible across platforms.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::Sample;

/// A named data-generating mechanism with its parameters.
#[derive(Debug, Clone)]
pub enum MechanismSpec {
    /// X = U1, Y = sin U1 + 4 sin^2 U2 + 0.5 U3^4 sin U1, U_i uniform on [0,1].
    Ishigami,
    /// Density (1 + sin(lx) sin(ly)) / (4 pi^2) on [-pi, pi]^2.
    SinDensity { l: u32 },
    /// (X, Y) = l (cos T, sin T) + noise / 4, T uniform on [0, 2 pi).
    Circle { l: f64 },
    /// X standard normal, Y = |X|^rho * eps with eps standard normal.
    Heteroscedastic { rho: f64 },
    /// X standard normal, Y = rho X + sqrt(1 - rho^2) Z.
    GaussianCorr { rho: f64 },
    /// Pads a univariate mechanism with fresh independent uniform coordinates
    /// so that p = q = 2.
    Bivariate(Box<MechanismSpec>),
    /// Uniform on [0,1]^{p+q} with a cell-wise bump perturbation.
    PerturbedUniform(PerturbedUniform),
}

impl MechanismSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MechanismSpec::Ishigami => Ok(()),
            MechanismSpec::SinDensity { l } => {
                if (1..=10).contains(l) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("frequency l must lie in 1..=10".into()))
                }
            }
            MechanismSpec::Circle { l } => {
                if *l > 0.0 && l.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("radius l must be positive".into()))
                }
            }
            MechanismSpec::Heteroscedastic { rho } => {
                if *rho > 0.0 && *rho <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("exponent rho must lie in (0, 1]".into()))
                }
            }
            MechanismSpec::GaussianCorr { rho } => {
                if rho.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("correlation rho must lie in (-1, 1)".into()))
                }
            }
            MechanismSpec::Bivariate(inner) => match inner.as_ref() {
                MechanismSpec::Bivariate(_) | MechanismSpec::PerturbedUniform(_) => Err(
                    Error::InvalidArgument("only univariate mechanisms can be padded".into()),
                ),
                other => other.validate(),
            },
            MechanismSpec::PerturbedUniform(p) => p.validate(),
        }
    }

    /// Marginal dimensions (p, q) of the generated sample.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            MechanismSpec::Bivariate(_) => (2, 2),
            MechanismSpec::PerturbedUniform(p) => (p.p, p.q),
            _ => (1, 1),
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Sample> {
        self.validate()?;
        match self {
            MechanismSpec::Ishigami => gen_ishigami(n, seed),
            MechanismSpec::SinDensity { l } => gen_sin_density(n, *l, seed),
            MechanismSpec::Circle { l } => gen_circle_scaled(n, *l, 0.25, seed),
            MechanismSpec::Heteroscedastic { rho } => gen_heteroscedastic(n, *rho, seed),
            MechanismSpec::GaussianCorr { rho } => gen_gaussian_corr(n, *rho, seed),
            MechanismSpec::Bivariate(inner) => wrap_bivariate(inner, n, seed),
            MechanismSpec::PerturbedUniform(p) => p.sample(n, seed),
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The Ishigami response of three independent uniforms on [0,1], paired with
/// its first input.
pub fn gen_ishigami(n: usize, seed: u64) -> Result<Sample> {
    let mut rng = rng_for(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        x.push(u1);
        y.push(ishigami_response(u1, u2, u3));
    }
    Sample::univariate(x, y)
}

/// sin u1 + 4 sin^2 u2 + 0.5 u3^4 sin u1.
pub fn ishigami_response(u1: f64, u2: f64, u3: f64) -> f64 {
    u1.sin() + 4.0 * u2.sin().powi(2) + 0.5 * u3.powi(4) * u1.sin()
}

/// Rejection sampler from the density (1 + sin(lx) sin(ly)) / (4 pi^2) on
/// [-pi, pi]^2. The envelope is twice the uniform density, so the analytic
/// acceptance rate is exactly 1/2.
pub fn gen_sin_density(n: usize, l: u32, seed: u64) -> Result<Sample> {
    gen_sin_density_traced(n, l, seed).map(|(s, _)| s)
}

/// Variant reporting the number of proposals, for acceptance-rate checks.
pub fn gen_sin_density_traced(n: usize, l: u32, seed: u64) -> Result<(Sample, usize)> {
    MechanismSpec::SinDensity { l }.validate()?;
    let mut rng = rng_for(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut proposals = 0usize;
    let lf = l as f64;
    while x.len() < n {
        let px = rng.gen_range(-PI..PI);
        let py = rng.gen_range(-PI..PI);
        let u: f64 = rng.gen();
        proposals += 1;
        if 2.0 * u <= 1.0 + (lf * px).sin() * (lf * py).sin() {
            x.push(px);
            y.push(py);
        }
    }
    Ok((Sample::univariate(x, y)?, proposals))
}

/// Noisy circle of radius `l` with Gaussian noise scaled by 1/4.
pub fn gen_circle(n: usize, l: u32, seed: u64) -> Result<Sample> {
    gen_circle_scaled(n, l as f64, 0.25, seed)
}

/// Noisy circle with an explicit noise scale; scale 0 puts every point
/// exactly on the circle.
pub fn gen_circle_scaled(n: usize, l: f64, noise_scale: f64, seed: u64) -> Result<Sample> {
    MechanismSpec::Circle { l }.validate()?;
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::InvalidArgument("noise scale must be nonnegative".into()));
    }
    let mut rng = rng_for(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = rng.gen_range(0.0..2.0 * PI);
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        x.push(l * theta.cos() + noise_scale * e1);
        y.push(l * theta.sin() + noise_scale * e2);
    }
    Sample::univariate(x, y)
}

/// Heteroscedastic pair Y = |X|^rho * eps with X, eps standard normal.
pub fn gen_heteroscedastic(n: usize, rho: f64, seed: u64) -> Result<Sample> {
    MechanismSpec::Heteroscedastic { rho }.validate()?;
    let mut rng = rng_for(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        let eps: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(xi.abs().powf(rho) * eps);
    }
    Sample::univariate(x, y)
}

/// Correlated Gaussian pair Y = rho X + sqrt(1 - rho^2) Z.
pub fn gen_gaussian_corr(n: usize, rho: f64, seed: u64) -> Result<Sample> {
    MechanismSpec::GaussianCorr { rho }.validate()?;
    let mut rng = rng_for(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let tail = (1.0 - rho * rho).sqrt();
    for _ in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(rho * xi + tail * z);
    }
    Sample::univariate(x, y)
}

/// Pads a univariate mechanism with independent uniform second coordinates,
/// yielding p = q = 2 while leaving the dependence structure in the first
/// coordinates only.
pub fn wrap_bivariate(inner: &MechanismSpec, n: usize, seed: u64) -> Result<Sample> {
    MechanismSpec::Bivariate(Box::new(inner.clone())).validate()?;
    let base = inner.generate(n, seed)?;
    let mut rng = rng_for(crate::numeric::derive_seed(seed, u64::MAX));
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(2 * n);
    for i in 0..n {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        x.push(base.x_row(i)[0]);
        x.push(u1);
        y.push(base.y_row(i)[0]);
        y.push(u2);
    }
    Sample::new(x, y, 2, 2)
}

/// Independent pair with the mechanism's marginals: draws 2n observations and
/// pairs the Y block of the first half with the X block of the second half.
pub fn gen_h0_split(mech: &MechanismSpec, n: usize, seed: u64) -> Result<Sample> {
    let full = mech.generate(2 * n, seed)?;
    let (p, q) = (full.p(), full.q());
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n * q);
    for i in 0..n {
        y.extend_from_slice(full.y_row(i));
    }
    for i in n..2 * n {
        x.extend_from_slice(full.x_row(i));
    }
    Sample::new(x, y, p, q)
}

/// Signed bump on (-1, 0): a positive lobe on (-1, -1/2) and its mirrored
/// negative on (-1/2, 0), so the bump integrates to zero.
pub fn g_bump(t: f64) -> f64 {
    let lobe = |s: f64| -> f64 {
        // s = 4t + c maps the lobe onto (-1, 1)
        if s.abs() < 1.0 {
            (-1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    };
    if t > -1.0 && t < -0.5 {
        lobe(4.0 * t + 3.0)
    } else if t > -0.5 && t < 0.0 {
        -lobe(4.0 * t + 1.0)
    } else {
        0.0
    }
}

struct BumpConstants {
    l2_sq: f64,
    integral: f64,
}

fn bump_constants() -> &'static BumpConstants {
    static CACHE: OnceLock<BumpConstants> = OnceLock::new();
    CACHE.get_or_init(|| {
        // composite Simpson on [-1, 0]; the integrand is smooth and compactly
        // supported so this converges fast
        let steps = 400_000usize; // even
        let h = 1.0 / steps as f64;
        let weight = |i: usize| -> f64 {
            if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let (mut l2, mut int) = (0.0f64, 0.0f64);
        for i in 0..=steps {
            let t = -1.0 + i as f64 * h;
            let w = weight(i);
            let g = g_bump(t);
            l2 += w * g * g;
            int += w * g;
        }
        BumpConstants {
            l2_sq: l2 * h / 3.0,
            integral: int * h / 3.0,
        }
    })
}

/// L2 norm of the bump over (-1, 0).
pub fn g_l2_norm() -> f64 {
    bump_constants().l2_sq.sqrt()
}

/// Integral of the bump over (-1, 0); zero up to quadrature error.
pub fn g_integral() -> f64 {
    bump_constants().integral
}

/// Sign pattern assignment for the perturbation cells.
#[derive(Debug, Clone)]
pub enum ThetaChoice {
    /// Independent Rademacher signs drawn from this seed.
    Seed(u64),
    /// Explicit signs, one per cell in row-major mixed-radix order.
    Explicit(Vec<i8>),
}

/// Uniform density on [0,1]^{p+q} perturbed cell-wise by products of signed
/// bumps:
/// `f(z) = 1 + c0 h^delta theta_j prod_r G(z_r / h - j_r)` on cell j, with
/// h = 1 / cells per axis. The perturbation integrates to zero on every cell,
/// so both marginals stay uniform while the L2 distance from independence is
/// exactly `c0 h^delta ||G||_2^{p+q}`.
#[derive(Debug, Clone)]
pub struct PerturbedUniform {
    p: usize,
    q: usize,
    delta: f64,
    cells: usize,
    c0: f64,
    theta: Vec<i8>,
}

impl PerturbedUniform {
    pub fn new(
        p: usize,
        q: usize,
        delta: f64,
        cells: usize,
        c0: f64,
        theta: ThetaChoice,
    ) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidArgument("p and q must be positive".into()));
        }
        if cells == 0 {
            return Err(Error::InvalidArgument("cell count per axis must be positive".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument("smoothness delta must be positive".into()));
        }
        let d = p + q;
        // c0 beyond e^{p+q} can push the density negative at the bump peaks
        if !(c0 > 0.0 && c0 <= (d as f64).exp()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude c0 must lie in (0, e^{d}]"
            )));
        }
        let cell_count = cells
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidArgument("cell grid too large".into()))?;
        let theta = match theta {
            ThetaChoice::Seed(seed) => {
                let mut rng = rng_for(seed);
                (0..cell_count)
                    .map(|_| if rng.gen::<bool>() { 1i8 } else { -1i8 })
                    .collect()
            }
            ThetaChoice::Explicit(v) => {
                if v.len() != cell_count {
                    return Err(Error::InvalidArgument(format!(
                        "theta needs {cell_count} entries, got {}",
                        v.len()
                    )));
                }
                if v.iter().any(|&s| s != 1 && s != -1) {
                    return Err(Error::InvalidArgument("theta entries must be +-1".into()));
                }
                v
            }
        };
        Ok(Self { p, q, delta, cells, c0, theta })
    }

    /// Constructor from the bin width h; 1/h must be an integer.
    pub fn with_bin_width(
        p: usize,
        q: usize,
        delta: f64,
        h: f64,
        c0: f64,
        theta: ThetaChoice,
    ) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::InvalidArgument("bin width h must lie in (0, 1]".into()));
        }
        let cells = (1.0 / h).round();
        if ((1.0 / h) - cells).abs() > 1e-9 {
            return Err(Error::InvalidArgument("1/h must be an integer".into()));
        }
        Self::new(p, q, delta, cells as usize, c0, theta)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn theta(&self) -> &[i8] {
        &self.theta
    }

    /// Density at z = (x_1..x_p, y_1..y_q); zero outside [0,1]^{p+q}.
    pub fn density(&self, z: &[f64]) -> Result<f64> {
        let d = self.p + self.q;
        if z.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, expected {d}",
                z.len()
            )));
        }
        if z.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Ok(0.0);
        }
        let m = self.cells as f64;
        let mut prod = 1.0f64;
        let mut cell = 0usize;
        for &v in z {
            let j = ((v * m).floor() as usize).min(self.cells - 1);
            // t = v / h - (j + 1) lies in [-1, 0] within cell j
            prod *= g_bump(v * m - (j + 1) as f64);
            cell = cell * self.cells + j;
        }
        let sign = self.theta[cell] as f64;
        Ok(1.0 + self.c0 * self.h().powf(self.delta) * sign * prod)
    }

    /// Upper bound on the density, used as the rejection envelope.
    pub fn envelope_bound(&self) -> f64 {
        let d = (self.p + self.q) as f64;
        1.0 + self.c0 * self.h().powf(self.delta) * (-d).exp()
    }

    /// Exact L2 distance between the joint density and the product of its
    /// (uniform) marginals.
    pub fn l2_distance_from_independence(&self) -> f64 {
        self.c0 * self.h().powf(self.delta) * g_l2_norm().powi((self.p + self.q) as i32)
    }

    /// Rejection sampler from the perturbed density.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        self.sample_traced(n, seed).map(|(s, _)| s)
    }

    /// Variant reporting the number of proposals; the analytic acceptance
    /// rate is 1 / envelope_bound.
    pub fn sample_traced(&self, n: usize, seed: u64) -> Result<(Sample, usize)> {
        let mut rng = rng_for(seed);
        let bound = self.envelope_bound();
        let d = self.p + self.q;
        let mut x = Vec::with_capacity(n * self.p);
        let mut y = Vec::with_capacity(n * self.q);
        let mut z = vec![0.0f64; d];
        let mut accepted = 0usize;
        let mut proposals = 0usize;
        while accepted < n {
            for v in z.iter_mut() {
                *v = rng.gen();
            }
            let u: f64 = rng.gen();
            proposals += 1;
            if u * bound <= self.density(&z)? {
                x.extend_from_slice(&z[..self.p]);
                y.extend_from_slice(&z[self.p..]);
                accepted += 1;
            }
        }
        Ok((Sample::new(x, y, self.p, self.q)?, proposals))
    }

    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

/// Free-function form of [`PerturbedUniform::sample`].
pub fn gen_perturbed_uniform(spec: &PerturbedUniform, n: usize, seed: u64) -> Result<Sample> {
    spec.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ishigami_example_value() {
        assert!((ishigami_response(1.0, 1.0, 1.0) - 4.0945001503).abs() < 1e-9);
    }

    #[test]
    fn ishigami_shapes_and_determinism() {
        let a = gen_ishigami(50, 7).unwrap();
        let b = gen_ishigami(50, 7).unwrap();
        assert_eq!(a.n(), 50);
        assert_eq!((a.p(), a.q()), (1, 1));
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
        assert!(a.x().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn sin_density_acceptance_rate_near_half() {
        let (s, proposals) = gen_sin_density_traced(20_000, 2, 11).unwrap();
        assert_eq!(s.n(), 20_000);
        let rate = 20_000.0 / proposals as f64;
        let se = (0.25f64 / proposals as f64).sqrt();
        assert!((rate - 0.5).abs() < 4.0 * se, "acceptance rate {rate}");
        assert!(s.x().iter().all(|&v| (-PI..PI).contains(&v)));
        assert!(s.y().iter().all(|&v| (-PI..PI).contains(&v)));
    }

    #[test]
    fn sin_density_rejects_bad_frequency() {
        assert!(gen_sin_density(10, 0, 1).is_err());
        assert!(gen_sin_density(10, 11, 1).is_err());
    }

    #[test]
    fn circle_without_noise_sits_on_the_circle() {
        let s = gen_circle_scaled(200, 1.0, 0.0, 5).unwrap();
        for i in 0..200 {
            let r = (s.x_row(i)[0].powi(2) + s.y_row(i)[0].powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_moments() {
        let s = gen_circle(40_000, 2, 9).unwrap();
        let mean_x = s.x().iter().sum::<f64>() / 40_000.0;
        let var_x = s.x().iter().map(|v| (v - mean_x).powi(2)).sum::<f64>() / 40_000.0;
        // E X = 0, Var X = l^2 / 2 + 1/16
        assert!(mean_x.abs() < 0.03, "mean {mean_x}");
        assert!((var_x - (2.0 + 1.0 / 16.0)).abs() < 0.06, "var {var_x}");
    }

    #[test]
    fn heteroscedastic_marginals() {
        let s = gen_heteroscedastic(50_000, 0.5, 13).unwrap();
        let mean_y = s.y().iter().sum::<f64>() / 50_000.0;
        // E Y = E|X|^rho E eps = 0; E Y^2 = E|X|^{2 rho} = E|X| = sqrt(2/pi)
        let m2 = s.y().iter().map(|v| v * v).sum::<f64>() / 50_000.0;
        assert!(mean_y.abs() < 0.02, "mean {mean_y}");
        assert!((m2 - (2.0 / PI).sqrt()).abs() < 0.03, "second moment {m2}");
    }

    #[test]
    fn gaussian_corr_sample_correlation() {
        let rho = 0.6;
        let s = gen_gaussian_corr(50_000, rho, 17).unwrap();
        let n = 50_000.0;
        let mx = s.x().iter().sum::<f64>() / n;
        let my = s.y().iter().sum::<f64>() / n;
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxy = 0.0;
        for i in 0..50_000 {
            let dx = s.x()[i] - mx;
            let dy = s.y()[i] - my;
            sx += dx * dx;
            sy += dy * dy;
            sxy += dx * dy;
        }
        let corr = sxy / (sx * sy).sqrt();
        assert!((corr - rho).abs() < 0.01, "correlation {corr}");
        assert!(gen_gaussian_corr(10, 1.0, 1).is_err());
    }

    #[test]
    fn bivariate_wrap_preserves_first_coordinates() {
        let inner = MechanismSpec::Circle { l: 1.0 };
        let wrapped = wrap_bivariate(&inner, 30, 21).unwrap();
        let base = inner.generate(30, 21).unwrap();
        assert_eq!((wrapped.p(), wrapped.q()), (2, 2));
        for i in 0..30 {
            assert_eq!(wrapped.x_row(i)[0].to_bits(), base.x_row(i)[0].to_bits());
            assert_eq!(wrapped.y_row(i)[0].to_bits(), base.y_row(i)[0].to_bits());
            assert!((0.0..1.0).contains(&wrapped.x_row(i)[1]));
            assert!((0.0..1.0).contains(&wrapped.y_row(i)[1]));
        }
    }

    #[test]
    fn bivariate_wrap_rejects_nested() {
        let inner = MechanismSpec::Bivariate(Box::new(MechanismSpec::Ishigami));
        assert!(wrap_bivariate(&inner, 10, 1).is_err());
    }

    #[test]
    fn h0_split_shapes_and_blocks() {
        let mech = MechanismSpec::Ishigami;
        let s = gen_h0_split(&mech, 25, 3).unwrap();
        let full = mech.generate(50, 3).unwrap();
        assert_eq!(s.n(), 25);
        for i in 0..25 {
            assert_eq!(s.y_row(i)[0].to_bits(), full.y_row(i)[0].to_bits());
            assert_eq!(s.x_row(i)[0].to_bits(), full.x_row(25 + i)[0].to_bits());
        }
    }

    #[test]
    fn bump_example_and_support() {
        assert!((g_bump(-0.75) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((g_bump(-0.25) + (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g_bump(-1.0), 0.0);
        assert_eq!(g_bump(-0.5), 0.0);
        assert_eq!(g_bump(0.0), 0.0);
        assert_eq!(g_bump(0.3), 0.0);
        // antisymmetric about -1/2
        assert!((g_bump(-0.8) + g_bump(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn bump_integral_vanishes_and_l2_positive() {
        assert!(g_integral().abs() < 1e-12);
        let l2 = g_l2_norm();
        assert!(l2 > 0.0 && l2 < 0.5);
    }

    #[test]
    fn perturbed_uniform_validation() {
        assert!(PerturbedUniform::new(1, 1, 1.0, 4, 1.0, ThetaChoice::Seed(1)).is_ok());
        assert!(PerturbedUniform::new(0, 1, 1.0, 4, 1.0, ThetaChoice::Seed(1)).is_err());
        assert!(PerturbedUniform::new(1, 1, 0.0, 4, 1.0, ThetaChoice::Seed(1)).is_err());
        // amplitude beyond e^{p+q}
        assert!(PerturbedUniform::new(1, 1, 1.0, 4, 8.0, ThetaChoice::Seed(1)).is_err());
        // wrong theta length and wrong entries
        assert!(PerturbedUniform::new(1, 1, 1.0, 2, 1.0, ThetaChoice::Explicit(vec![1; 3])).is_err());
        assert!(PerturbedUniform::new(1, 1, 1.0, 2, 1.0, ThetaChoice::Explicit(vec![1, 0, 1, -1])).is_err());
        // non-integer 1/h
        assert!(PerturbedUniform::with_bin_width(1, 1, 1.0, 0.3, 1.0, ThetaChoice::Seed(1)).is_err());
        assert!(PerturbedUniform::with_bin_width(1, 1, 1.0, 0.25, 1.0, ThetaChoice::Seed(1)).is_ok());
    }

    #[test]
    fn perturbed_density_integrates_to_one() {
        let spec = PerturbedUniform::new(1, 1, 1.0, 2, 2.0, ThetaChoice::Seed(5)).unwrap();
        // midpoint rule on a fine grid over [0,1]^2
        let steps = 400usize;
        let h = 1.0 / steps as f64;
        let mut total = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let z = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                total += spec.density(&z).unwrap();
            }
        }
        total *= h * h;
        assert!((total - 1.0).abs() < 1e-6, "mass {total}");
    }

    #[test]
    fn perturbed_density_stays_within_envelope() {
        let spec = PerturbedUniform::new(1, 1, 1.0, 4, 5.0, ThetaChoice::Seed(2)).unwrap();
        let bound = spec.envelope_bound();
        let steps = 500usize;
        for i in 0..steps {
            for j in 0..steps {
                let z = [i as f64 / steps as f64, j as f64 / steps as f64];
                let f = spec.density(&z).unwrap();
                assert!(f >= 0.0 && f <= bound + 1e-12, "density {f} at {z:?}");
            }
        }
    }

    #[test]
    fn perturbed_sampler_acceptance_rate() {
        let spec = PerturbedUniform::new(1, 1, 1.0, 2, 3.0, ThetaChoice::Seed(4)).unwrap();
        let (s, proposals) = spec.sample_traced(30_000, 8).unwrap();
        assert_eq!(s.n(), 30_000);
        let expected = 1.0 / spec.envelope_bound();
        let rate = 30_000.0 / proposals as f64;
        let se = (expected * (1.0 - expected) / proposals as f64).sqrt();
        assert!((rate - expected).abs() < 4.0 * se, "rate {rate}, expected {expected}");
    }

    #[test]
    fn perturbed_l2_distance_formula() {
        let spec = PerturbedUniform::new(1, 1, 1.5, 4, 2.0, ThetaChoice::Seed(9)).unwrap();
        let analytic = spec.l2_distance_from_independence();
        // brute-force L2 norm of f - 1 on a fine grid
        let steps = 2_000usize;
        let h = 1.0 / steps as f64;
        let mut total = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let z = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                let d = spec.density(&z).unwrap() - 1.0;
                total += d * d;
            }
        }
        let numeric = (total * h * h).sqrt();
        assert!(
            (numeric - analytic).abs() < 0.01 * analytic,
            "numeric {numeric}, analytic {analytic}"
        );
    }

    #[test]
    fn mechanism_dims() {
        assert_eq!(MechanismSpec::Ishigami.dims(), (1, 1));
        assert_eq!(
            MechanismSpec::Bivariate(Box::new(MechanismSpec::Ishigami)).dims(),
            (2, 2)
        );
        let p = PerturbedUniform::new(2, 1, 1.0, 2, 1.0, ThetaChoice::Seed(0)).unwrap();
        assert_eq!(MechanismSpec::PerturbedUniform(p).dims(), (2, 1));
    }
}
