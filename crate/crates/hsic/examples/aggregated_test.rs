//! Aggregated test over a diagonal collection of dyadically scaled
//! bandwidths, showing the estimated level correction and the per-item
//! decisions.
//!
//! ```sh
//! cargo run --release --example aggregated_test
//! ```

use hsic::aggregation::{aggregated_test, scaled_diagonal_collection, AggregationSeeds};
use hsic::datagen::MechanismSpec;
use hsic::kernel::empirical_bandwidths;

fn main() -> hsic::Result<()> {
    let n = 100;
    let s = MechanismSpec::Heteroscedastic { rho: 0.9 }.generate(n, 11)?;
    let base = empirical_bandwidths(&s)?;
    let coll = scaled_diagonal_collection(&base, 5)?;

    let out = aggregated_test(
        &s,
        &coll,
        0.05,
        500,
        200,
        AggregationSeeds { quantile: 1, probability: 2 },
    )?;

    println!(
        "u_hat = {:.5} (alpha = {}, {} dichotomy steps)",
        out.u_hat, out.alpha, out.dichotomy_iterations
    );
    for item in &out.per_item {
        println!(
            "  lambda = {:?}, omega = {:.3}: statistic = {:+.4e}, quantile = {:+.4e}, reject = {}",
            item.lambda, item.omega, item.statistic, item.corrected_quantile, item.reject
        );
    }
    println!("aggregated decision: reject = {}", out.reject);
    Ok(())
}
