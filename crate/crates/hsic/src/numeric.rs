//! Small numeric helpers shared across modules.

/// Kahan compensated accumulator. The estimator combines n^2 terms of similar
/// magnitude into a small difference of large sums, so naive accumulation
/// loses digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn sum(&self) -> f64 {
        self.sum
    }
}

/// splitmix64 mixing, used to derive independent sub-seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// 1-based order-statistic rank `ceil(m * (1 - level))`, clamped to [1, m].
///
/// Computed as `m - floor(m * level)` with a small guard so that levels whose
/// binary representation sits just above an exact multiple of 1/m do not shift
/// the rank by one.
pub fn quantile_rank(m: usize, level: f64) -> usize {
    debug_assert!(m >= 1);
    let t = m as f64 * level;
    let rank = m as isize - (t + 1e-9).floor() as isize;
    rank.clamp(1, m as isize) as usize
}
