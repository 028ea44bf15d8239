//! The six-point toy ensemble: two equally weighted hard clusterings whose
//! average yields a consensus matrix, a probability dendrogram, and cuts
//! with a co-clustering guarantee.
//!
//! Usage: cargo run --example toy_consensus

use bmaclust::consensus::{complete_linkage, cut, dendrogram_text, weighted_consensus};
use bmaclust::ResponsibilityMatrix;

fn main() -> bmaclust::Result<()> {
    // clustering 1: {A,B,C} vs {D,E,F}; clustering 2: {A,C,E} vs {B,D,F}
    let z1 = ResponsibilityMatrix::hard(&[0, 0, 0, 1, 1, 1], 2)?;
    let z2 = ResponsibilityMatrix::hard(&[0, 1, 0, 1, 0, 1], 2)?;
    let s = weighted_consensus(&[(0.5, &z1), (0.5, &z2)])?;

    let names = ["A", "B", "C", "D", "E", "F"];
    println!("consensus matrix (probability that a pair co-clusters):");
    print!("   ");
    for n in names {
        print!("{n:>5}");
    }
    println!();
    for i in 0..6 {
        print!("{:>3}", names[i]);
        for j in 0..6 {
            print!("{:>5.1}", s.matrix()[(i, j)]);
        }
        println!();
    }

    let dend = complete_linkage(&s);
    println!("\ndendrogram: {}", dendrogram_text(&dend));

    for p in [0.8, 0.51, 0.2] {
        let groups = cut(&dend, p)?;
        let pretty: Vec<String> = groups
            .iter()
            .map(|g| g.iter().map(|&i| names[i]).collect::<Vec<_>>().join(""))
            .collect();
        println!("cut at probability {p}: {}", pretty.join(" | "));
    }
    println!("\nevery group printed above has pairwise co-clustering probability >= its cut level");
    Ok(())
}
