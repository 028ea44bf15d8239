//! Density estimation three ways on a simulated claw sample: the weighted
//! model average, the single best model, and a kernel baseline, scored by
//! integrated squared error and Kullback-Leibler divergence against the
//! known truth.
//!
//! Usage: cargo run --release --example density_estimation

use bmaclust::density::{kde_bandwidth, DensityEstimate};
use bmaclust::evaluate::{estimate_kl, estimate_mise, MiseMethod};
use bmaclust::rng::{StreamKey, StreamRole};
use bmaclust::simgen::{catalog, sample, DensityId};
use bmaclust::{sweep, FitConfig, ModelGrid};

fn main() -> bmaclust::Result<()> {
    let truth = catalog(DensityId::Claw);
    let data = sample(&truth, 250, &StreamKey::new(2024, 0, StreamRole::Sample));
    println!("fitting the 83-model grid to 250 draws of the claw density...");
    let ensemble = sweep(&data, &ModelGrid::default(), &FitConfig::default())?;
    let best = ensemble.best().unwrap();
    println!("best model: {}/{}", best.spec, best.n_components);

    let estimates = [
        DensityEstimate::averaged(&ensemble)?,
        DensityEstimate::single_model(&ensemble)?,
        DensityEstimate::kernel(&data, kde_bandwidth(&data)?)?,
    ];

    println!("\nestimator      ISE          KL");
    let mise_key = StreamKey::new(2024, 0, StreamRole::MiseSampling);
    let kl_key = StreamKey::new(2024, 0, StreamRole::KlSampling);
    let mut values = Vec::new();
    for est in &estimates {
        let mise = estimate_mise(&truth, est, &MiseMethod::auto(2, mise_key))?;
        let kl = estimate_kl(&truth, est, 100_000, &kl_key)?;
        println!("{:>9}  {:>10.6}  {:>10.6}", est.kind_name(), mise.value, kl.value);
        values.push((mise.value, kl.value));
    }
    let (bma, kde) = (values[0], values[2]);
    println!("\nKS/BMA ratios: ISE {:.2}, KL {:.2}", kde.0 / bma.0, kde.1 / bma.1);
    Ok(())
}
