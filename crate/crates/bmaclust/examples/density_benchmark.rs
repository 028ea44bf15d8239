//! Desk-scale replica of the density-estimation benchmark: a few catalog
//! densities, a handful of replicates, ratio table on stdout. The `bench`
//! subcommand runs the full version.
//!
//! Usage: cargo run --release --example density_benchmark

use bmaclust::bench::{run, BenchConfig};
use bmaclust::simgen::{DensityId, TruthSpec};

fn main() -> bmaclust::Result<()> {
    let cfg = BenchConfig {
        n_mc: 20_000,
        ..BenchConfig::new(
            vec![
                TruthSpec::bivariate(DensityId::Gaussian),
                TruthSpec::bivariate(DensityId::SeparatedBimodal),
                TruthSpec::bivariate(DensityId::Claw),
            ],
            5,
            250,
            20250101,
        )
    };
    println!(
        "{} densities x {} replicates of n = {} (this takes a minute)...\n",
        cfg.truths.len(),
        cfg.replicates,
        cfg.n_obs
    );
    let rows = run(&cfg)?;

    println!("density              KS/BMA-MISE  KS/BMA-KL  SM/BMA-MISE  SM/BMA-KL");
    for r in &rows {
        println!(
            "{:<22} {:>8.2} {:>10.2} {:>11.2} {:>10.2}",
            r.truth_id,
            r.ks_bma_mise(),
            r.ks_bma_kl(),
            r.sm_bma_mise(),
            r.sm_bma_kl()
        );
    }
    println!("\nratios above 1 favor the model average");
    Ok(())
}
