//! Fit the standard 83-model grid to the bundled iris data and print the
//! BIC ranking with approximate posterior model probabilities.
//!
//! Usage: cargo run --release --example sweep_iris

use bmaclust::{datasets, sweep, FitConfig, ModelGrid};

fn main() -> bmaclust::Result<()> {
    let (data, _species) = datasets::iris();
    let grid = ModelGrid::default();
    println!(
        "sweeping {} models over {} observations in {} dimensions...",
        grid.len(),
        data.n_rows(),
        data.dim()
    );

    let ensemble = sweep(&data, &grid, &FitConfig::default())?;

    println!("\n rank  model   kappa   log-lik        BIC     weight");
    for (rank, (entry, fit)) in ensemble.fitted_models().take(8).enumerate() {
        println!(
            "{:>5}  {}/{:<2}  {:>5}  {:>9.3}  {:>10.3}  {:>9.5}",
            rank + 1,
            entry.spec,
            entry.n_components,
            fit.kappa,
            fit.loglik,
            fit.bic,
            entry.weight
        );
    }
    println!("\n{} models fitted, {} degenerate", ensemble.n_fitted(), ensemble.n_failed());

    let top2: f64 = ensemble.models().iter().take(2).map(|m| m.weight).sum();
    println!("combined weight of the top two models: {top2:.4}");
    Ok(())
}
