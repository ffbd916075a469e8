//! Replication harness: runs a configured test over a grid of mechanism
//! parameters, estimating rejection probability (power under an alternative,
//! level under the independent split) with Monte Carlo error bars.
//!
//! Replication r of grid point g derives its sample seed and its test seeds
//! from `(master seed, g, r)`, so every cell of the experiment is
//! reproducible in isolation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregated_test, dyadic_anisotropic_collection, dyadic_isotropic_collection,
    scaled_diagonal_collection, scaled_grid_collection, AggregationSeeds, GridWeights,
    WeightedCollection,
};
use crate::datagen::{gen_h0_split, MechanismSpec};
use crate::error::{Error, Result};
use crate::kernel::{empirical_bandwidths, Bandwidths, Sample};
use crate::numeric::derive_seed;
use crate::permutation::single_permuted_test;

/// Mechanism family; the grid value supplies the free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismPlan {
    /// No free parameter; the grid is ignored.
    Ishigami,
    /// Grid value is the integer frequency l.
    SinDensity,
    /// Grid value is the circle radius l.
    Circle,
    /// Grid value is the noise exponent rho.
    Heteroscedastic,
    /// Grid value is the correlation rho.
    Gaussian,
}

impl MechanismPlan {
    pub fn at(self, value: f64, bivariate: bool) -> Result<MechanismSpec> {
        let base = match self {
            MechanismPlan::Ishigami => MechanismSpec::Ishigami,
            MechanismPlan::SinDensity => {
                let l = value.round();
                if (value - l).abs() > 1e-9 || l < 1.0 {
                    return Err(Error::Config(format!(
                        "sin-density frequency must be a positive integer, got {value}"
                    )));
                }
                MechanismSpec::SinDensity { l: l as u32 }
            }
            MechanismPlan::Circle => MechanismSpec::Circle { l: value },
            MechanismPlan::Heteroscedastic => MechanismSpec::Heteroscedastic { rho: value },
            MechanismPlan::Gaussian => MechanismSpec::GaussianCorr { rho: value },
        };
        let spec = if bivariate {
            MechanismSpec::Bivariate(Box::new(base))
        } else {
            base
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

/// Bandwidth selection rule, resolved per replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BandwidthPlan {
    /// Empirical marginal spread of the sample.
    Empirical,
    /// Empirical spread times a common factor on both sides.
    EmpiricalScaled { factor: f64 },
    /// Fixed numeric bandwidths.
    Fixed { lambda: Vec<f64>, mu: Vec<f64> },
}

impl BandwidthPlan {
    pub fn resolve(&self, s: &Sample) -> Result<Bandwidths> {
        match self {
            BandwidthPlan::Empirical => empirical_bandwidths(s),
            BandwidthPlan::EmpiricalScaled { factor } => {
                if !(*factor > 0.0) {
                    return Err(Error::Config("bandwidth factor must be positive".into()));
                }
                empirical_bandwidths(s)?.scaled(*factor, *factor)
            }
            BandwidthPlan::Fixed { lambda, mu } => Bandwidths::new(lambda.clone(), mu.clone()),
        }
    }
}

/// Base bandwidths for a scaled collection; `None` means empirical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedBase {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Collection construction rule, resolved per replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CollectionPlan {
    /// Diagonal dyadic scalings of a base pair, exponential weights.
    Diagonal {
        r: usize,
        #[serde(default)]
        base: Option<FixedBase>,
    },
    /// Full product grid of dyadic scalings.
    Grid {
        r: usize,
        weights: GridWeightsPlan,
        #[serde(default)]
        base: Option<FixedBase>,
    },
    /// Dyadic isotropic family sized by n.
    DyadicIsotropic,
    /// Dyadic anisotropic family sized by n.
    DyadicAnisotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridWeightsPlan {
    Uniform,
    Exponential,
}

impl From<GridWeightsPlan> for GridWeights {
    fn from(w: GridWeightsPlan) -> Self {
        match w {
            GridWeightsPlan::Uniform => GridWeights::Uniform,
            GridWeightsPlan::Exponential => GridWeights::Exponential,
        }
    }
}

impl CollectionPlan {
    pub fn resolve(&self, s: &Sample) -> Result<WeightedCollection> {
        let base_of = |b: &Option<FixedBase>| -> Result<Bandwidths> {
            match b {
                Some(f) => Bandwidths::new(f.lambda.clone(), f.mu.clone()),
                None => empirical_bandwidths(s),
            }
        };
        match self {
            CollectionPlan::Diagonal { r, base } => scaled_diagonal_collection(&base_of(base)?, *r),
            CollectionPlan::Grid { r, weights, base } => {
                scaled_grid_collection(&base_of(base)?, *r, (*weights).into())
            }
            CollectionPlan::DyadicIsotropic => dyadic_isotropic_collection(s.n(), s.p(), s.q()),
            CollectionPlan::DyadicAnisotropic => dyadic_anisotropic_collection(s.n(), s.p(), s.q()),
        }
    }
}

/// Which test to run on each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestPlan {
    Single {
        bandwidth: BandwidthPlan,
        b: usize,
    },
    Aggregated {
        collection: CollectionPlan,
        b1: usize,
        b2: usize,
    },
}

/// Full experiment description; JSON-serializable for the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mechanism: MechanismPlan,
    /// Grid of mechanism parameters; one power estimate per entry.
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Pad the mechanism to p = q = 2 with independent uniforms.
    #[serde(default)]
    pub bivariate: bool,
    /// Replace each draw by an independent split sharing the marginals, so
    /// the estimated rejection rate is the level, not the power.
    #[serde(default)]
    pub h0: bool,
    pub n: usize,
    pub alpha: f64,
    pub test: TestPlan,
    pub replications: usize,
    pub seed: u64,
}

fn default_grid() -> Vec<f64> {
    vec![0.0]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Config("n must be at least 4".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("grid must not be empty".into()));
        }
        match &self.test {
            TestPlan::Single { b, .. } if *b == 0 => {
                Err(Error::Config("permutation count b must be positive".into()))
            }
            TestPlan::Aggregated { b1, b2, .. } if *b1 == 0 || *b2 == 0 => {
                Err(Error::Config("B1 and B2 must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Power estimate at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct PowerRecord {
    pub grid_value: f64,
    pub rejections: usize,
    pub replications: usize,
    pub power: f64,
    /// Binomial standard error of the power estimate.
    pub se: f64,
    pub wall_secs: f64,
}

/// Runs the whole experiment, one record per grid point.
pub fn estimate_power(cfg: &ExperimentConfig) -> Result<Vec<PowerRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.grid.len());
    for (g, &value) in cfg.grid.iter().enumerate() {
        let spec = cfg.mechanism.at(value, cfg.bivariate)?;
        let grid_seed = derive_seed(cfg.seed, g as u64);
        let start = Instant::now();
        let rejections: usize = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| -> Result<usize> {
                let rep_seed = derive_seed(grid_seed, r);
                let s = if cfg.h0 {
                    gen_h0_split(&spec, cfg.n, derive_seed(rep_seed, 0))?
                } else {
                    spec.generate(cfg.n, derive_seed(rep_seed, 0))?
                };
                let reject = match &cfg.test {
                    TestPlan::Single { bandwidth, b } => {
                        let bw = bandwidth.resolve(&s)?;
                        single_permuted_test(&s, &bw, cfg.alpha, *b, derive_seed(rep_seed, 1))?
                            .reject
                    }
                    TestPlan::Aggregated { collection, b1, b2 } => {
                        let coll = collection.resolve(&s)?;
                        let seeds = AggregationSeeds {
                            quantile: derive_seed(rep_seed, 1),
                            probability: derive_seed(rep_seed, 2),
                        };
                        aggregated_test(&s, &coll, cfg.alpha, *b1, *b2, seeds)?.reject
                    }
                };
                Ok(reject as usize)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        let power = rejections as f64 / cfg.replications as f64;
        records.push(PowerRecord {
            grid_value: value,
            rejections,
            replications: cfg.replications,
            power,
            se: (power * (1.0 - power) / cfg.replications as f64).sqrt(),
            wall_secs: start.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}

/// Writes power records as CSV.
pub fn write_power_csv<W: std::io::Write>(records: &[PowerRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["grid_value", "rejections", "replications", "power", "se", "wall_secs"])
        .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?;
    for (i, r) in records.iter().enumerate() {
        w.write_record([
            format!("{:.16e}", r.grid_value),
            r.rejections.to_string(),
            r.replications.to_string(),
            format!("{:.6}", r.power),
            format!("{:.6}", r.se),
            format!("{:.3}", r.wall_secs),
        ])
        .map_err(|e| Error::Csv { row: i + 1, message: e.to_string() })?;
    }
    w.flush()?;
    Ok(())
}

/// Relative error |a - b| / b between a permutation-calibrated power and its
/// reference counterpart. Undefined when the reference is zero.
pub fn relative_error(pi_permuted: f64, pi_reference: f64) -> Result<f64> {
    if pi_reference == 0.0 {
        return Err(Error::UndefinedRelativeError);
    }
    Ok((pi_permuted - pi_reference).abs() / pi_reference)
}
