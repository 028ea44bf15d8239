//! Leaf-ordering a consensus heatmap: compare the natural ordering with the
//! dendrogram ordering that places the most similar observations adjacent
//! at every merge boundary.
//!
//! Usage: cargo run --release --example seriation

use bmaclust::consensus::{bma_consensus, complete_linkage, seriate};
use bmaclust::{datasets, sweep, FitConfig, ModelGrid};

/// Sum of adjacent dissimilarities under an ordering; smaller reads better.
fn adjacency_cost(d: &nalgebra::DMatrix<f64>, order: &[usize]) -> f64 {
    order.windows(2).map(|w| d[(w[0], w[1])]).sum()
}

fn main() -> bmaclust::Result<()> {
    let (data, _) = datasets::iris();
    let ensemble = sweep(&data, &ModelGrid::default(), &FitConfig::default())?;
    let s = bma_consensus(&ensemble)?;
    let d = s.dissimilarity();
    let dend = complete_linkage(&s);

    let given: Vec<usize> = (0..s.n()).collect();
    let ordered = seriate(&dend, &d);

    println!("adjacent-dissimilarity sum, natural order: {:.3}", adjacency_cost(&d, &given));
    println!("adjacent-dissimilarity sum, seriated:      {:.3}", adjacency_cost(&d, &ordered));
    println!("\nfirst 30 seriated positions: {:?}", &ordered[..30]);
    Ok(())
}
