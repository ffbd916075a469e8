//! Prints the built-in bandwidth collections and their weights for a sample
//! of size 200.
//!
//! ```sh
//! cargo run --release --example bandwidth_collections
//! ```

use hsic::aggregation::{
    dyadic_anisotropic_collection, dyadic_isotropic_collection, scaled_diagonal_collection,
    scaled_grid_collection, GridWeights, WeightedCollection,
};
use hsic::kernel::Bandwidths;

fn describe(name: &str, coll: &WeightedCollection) {
    println!("{name}: {} items, sum of e^-omega = {:.6}", coll.len(), coll.weight_sum());
    for item in coll.items().iter().take(6) {
        println!(
            "  lambda = {:?}, mu = {:?}, omega = {:.4}",
            item.bandwidths.lambda(),
            item.bandwidths.mu(),
            item.omega
        );
    }
    if coll.len() > 6 {
        println!("  ... {} more", coll.len() - 6);
    }
}

fn main() -> hsic::Result<()> {
    let n = 200;
    describe("dyadic isotropic", &dyadic_isotropic_collection(n, 1, 1)?);
    describe("dyadic anisotropic", &dyadic_anisotropic_collection(n, 1, 1)?);

    let base = Bandwidths::isotropic(1.0, 1, 1.0, 1)?;
    describe("grid, uniform weights", &scaled_grid_collection(&base, 3, GridWeights::Uniform)?);
    describe(
        "grid, exponential weights",
        &scaled_grid_collection(&base, 3, GridWeights::Exponential)?,
    );
    describe("diagonal", &scaled_diagonal_collection(&base, 5)?);
    Ok(())
}
