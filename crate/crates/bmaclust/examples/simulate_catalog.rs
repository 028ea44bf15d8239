//! Walk the simulation catalog: draw a seeded sample from every benchmark
//! density and check the sample moments against the analytic mixture
//! moments.
//!
//! Usage: cargo run --release --example simulate_catalog

use bmaclust::rng::{StreamKey, StreamRole};
use bmaclust::simgen::{catalog, sample, DensityId, ExtensionSpec, TruthSpec};

fn main() -> bmaclust::Result<()> {
    println!("density                comps   mean(x1)  sample    var(x1)   sample");
    for id in DensityId::ALL {
        let p = catalog(id);
        let data = sample(&p, 100_000, &StreamKey::new(7, 0, StreamRole::Sample));
        let mean = p.mixture_mean();
        let cov = p.mixture_covariance();
        let smean = data.mean();
        let scov = data.sample_covariance()?;
        println!(
            "{:<22} {:>5} {:>10.4} {:>9.4} {:>9.4} {:>9.4}",
            id.name(),
            p.n_components(),
            mean[0],
            smean[0],
            cov[(0, 0)],
            scov[(0, 0)]
        );
    }

    // the tabulated six-dimensional two-component family
    let kd = TruthSpec {
        base: DensityId::Bimodal,
        extension: Some(ExtensionSpec::BimodalKd { dim: 6, separation: 3.0 }),
    };
    let p = kd.params()?;
    println!(
        "\n{}: d = {}, mode centers at x1 = {:+.4} and {:+.4}",
        kd.id_string(),
        p.dim(),
        p.mean(0)[0],
        p.mean(1)[0]
    );
    Ok(())
}
