//! Command-line front end: generate benchmark data, run single or aggregated
//! independence tests on CSV samples, inspect bandwidth collections, and run
//! power studies from a JSON config.
//!
//! Exit codes: 0 when the test accepts (or the command has no decision),
//! 1 when the test rejects independence, 2 on usage, configuration, or data
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hsic::aggregation::{AggregationSeeds, GridWeights};
use hsic::datagen::MechanismSpec;
use hsic::error::Result;
use hsic::kernel::{empirical_bandwidths, Bandwidths, Sample};
use hsic::power::ExperimentConfig;

#[derive(Parser)]
#[command(name = "hsic", version, about = "Aggregated kernel independence testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sample from a benchmark mechanism and write it as CSV.
    Gen(GenArgs),
    /// Run the single permuted test on a CSV sample.
    Test(TestArgs),
    /// Run the aggregated permuted test on a CSV sample.
    AggTest(AggTestArgs),
    /// Print a bandwidth collection for a CSV sample.
    Collections(CollectionsArgs),
    /// Run a replication study from a JSON experiment config.
    Power(PowerArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Ishigami,
    SinDensity,
    Circle,
    Heteroscedastic,
    Gaussian,
}

#[derive(Args)]
struct GenArgs {
    /// Mechanism family.
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    /// Free parameter of the mechanism (frequency, radius, exponent, or
    /// correlation); ignored by ishigami.
    #[arg(long, default_value_t = 1.0)]
    param: f64,
    /// Pad to p = q = 2 with independent uniform coordinates.
    #[arg(long)]
    bivariate: bool,
    /// Replace the draw by an independent split sharing the marginals.
    #[arg(long)]
    h0: bool,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV with header x1..xp,y1..yq.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of Monte Carlo permutations.
    #[arg(long, default_value_t = 500)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Common scaling applied to the empirical bandwidths.
    #[arg(long, default_value_t = 1.0)]
    bandwidth_factor: f64,
    /// Explicit comma-separated lambda (overrides the empirical choice).
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Explicit comma-separated mu (overrides the empirical choice).
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CollectionArg {
    Diagonal,
    GridUniform,
    GridExponential,
    DyadicIsotropic,
    DyadicAnisotropic,
}

#[derive(Args)]
struct AggTestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Permutations for quantile estimation.
    #[arg(long, default_value_t = 500)]
    b1: usize,
    /// Permutations for the rejection-probability estimate.
    #[arg(long, default_value_t = 200)]
    b2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CollectionArg::Diagonal)]
    collection: CollectionArg,
    /// Size parameter r for the scaled collections.
    #[arg(long, default_value_t = 5)]
    r: usize,
}

#[derive(Args)]
struct CollectionsArgs {
    /// Sample used for the empirical base bandwidths and for n.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = CollectionArg::DyadicIsotropic)]
    collection: CollectionArg,
    #[arg(long, default_value_t = 5)]
    r: usize,
}

#[derive(Args)]
struct PowerArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HSIC_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: HSIC_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(reject) => {
            if reject {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen(args) => {
            let spec = mechanism_spec(args.mechanism, args.param, args.bivariate)?;
            let s = if args.h0 {
                hsic::datagen::gen_h0_split(&spec, args.n, args.seed)?
            } else {
                spec.generate(args.n, args.seed)?
            };
            match args.out {
                Some(path) => hsic::io::write_sample_file(&s, &path)?,
                None => hsic::io::write_sample_csv(&s, std::io::stdout().lock())?,
            }
            Ok(false)
        }
        Command::Test(args) => {
            let s = hsic::io::read_sample_file(&args.input)?;
            let bw = resolve_bandwidths(&s, args.bandwidth_factor, args.lambda, args.mu)?;
            let out = hsic::permutation::single_permuted_test(&s, &bw, args.alpha, args.b, args.seed)?;
            print_json(&serde_json::json!({
                "version": env!("CARGO_PKG_VERSION"),
                "test": "single-permuted",
                "n": s.n(),
                "lambda": bw.lambda(),
                "mu": bw.mu(),
                "outcome": out,
            }));
            Ok(out.reject)
        }
        Command::AggTest(args) => {
            let s = hsic::io::read_sample_file(&args.input)?;
            let coll = build_collection(&s, args.collection, args.r)?;
            let seeds = AggregationSeeds {
                quantile: hsic::numeric::derive_seed(args.seed, 1),
                probability: hsic::numeric::derive_seed(args.seed, 2),
            };
            let out = hsic::aggregation::aggregated_test(&s, &coll, args.alpha, args.b1, args.b2, seeds)?;
            print_json(&serde_json::json!({
                "version": env!("CARGO_PKG_VERSION"),
                "test": "aggregated-permuted",
                "n": s.n(),
                "outcome": out,
            }));
            Ok(out.reject)
        }
        Command::Collections(args) => {
            let s = hsic::io::read_sample_file(&args.input)?;
            let coll = build_collection(&s, args.collection, args.r)?;
            let items: Vec<_> = coll
                .items()
                .iter()
                .map(|i| {
                    serde_json::json!({
                        "lambda": i.bandwidths.lambda(),
                        "mu": i.bandwidths.mu(),
                        "omega": i.omega,
                        "label": i.label,
                    })
                })
                .collect();
            print_json(&serde_json::json!({
                "version": env!("CARGO_PKG_VERSION"),
                "n": s.n(),
                "items": items,
                "weight_sum": coll.weight_sum(),
            }));
            Ok(false)
        }
        Command::Power(args) => {
            let text = std::fs::read_to_string(&args.config)?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| hsic::error::Error::Config(e.to_string()))?;
            let records = hsic::power::estimate_power(&cfg)?;
            match args.out {
                Some(path) => {
                    let f = std::fs::File::create(path)?;
                    hsic::power::write_power_csv(&records, std::io::BufWriter::new(f))?;
                }
                None => hsic::power::write_power_csv(&records, std::io::stdout().lock())?,
            }
            Ok(false)
        }
    }
}

fn mechanism_spec(arg: MechanismArg, param: f64, bivariate: bool) -> Result<MechanismSpec> {
    let plan = match arg {
        MechanismArg::Ishigami => hsic::power::MechanismPlan::Ishigami,
        MechanismArg::SinDensity => hsic::power::MechanismPlan::SinDensity,
        MechanismArg::Circle => hsic::power::MechanismPlan::Circle,
        MechanismArg::Heteroscedastic => hsic::power::MechanismPlan::Heteroscedastic,
        MechanismArg::Gaussian => hsic::power::MechanismPlan::Gaussian,
    };
    plan.at(param, bivariate)
}

fn resolve_bandwidths(
    s: &Sample,
    factor: f64,
    lambda: Option<Vec<f64>>,
    mu: Option<Vec<f64>>,
) -> Result<Bandwidths> {
    match (lambda, mu) {
        (Some(l), Some(m)) => Bandwidths::new(l, m),
        (None, None) => empirical_bandwidths(s)?.scaled(factor, factor),
        _ => Err(hsic::error::Error::InvalidArgument(
            "provide both --lambda and --mu, or neither".into(),
        )),
    }
}

fn build_collection(
    s: &Sample,
    arg: CollectionArg,
    r: usize,
) -> Result<hsic::aggregation::WeightedCollection> {
    match arg {
        CollectionArg::Diagonal => {
            hsic::aggregation::scaled_diagonal_collection(&empirical_bandwidths(s)?, r)
        }
        CollectionArg::GridUniform => hsic::aggregation::scaled_grid_collection(
            &empirical_bandwidths(s)?,
            r,
            GridWeights::Uniform,
        ),
        CollectionArg::GridExponential => hsic::aggregation::scaled_grid_collection(
            &empirical_bandwidths(s)?,
            r,
            GridWeights::Exponential,
        ),
        CollectionArg::DyadicIsotropic => {
            hsic::aggregation::dyadic_isotropic_collection(s.n(), s.p(), s.q())
        }
        CollectionArg::DyadicAnisotropic => {
            hsic::aggregation::dyadic_anisotropic_collection(s.n(), s.p(), s.q())
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}
