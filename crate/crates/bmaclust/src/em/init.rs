//! Responsibility initialization strategies.

use rand::RngCore;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::hclust::{agglomerate, labels_at, LinkageMethod};
use crate::params::ResponsibilityMatrix;
use crate::rng::{StreamKey, StreamRole};

use super::InitStrategy;

/// Produce the starting responsibilities for a G-component fit.
pub fn initialize(data: &DataMatrix, g: usize, strategy: &InitStrategy) -> Result<ResponsibilityMatrix> {
    if g == 0 {
        return Err(Error::InvalidParameter("need at least one component".into()));
    }
    let n = data.n_rows();
    if n < g {
        return Err(Error::Init(format!("{n} observations cannot seed {g} components")));
    }
    if let InitStrategy::Provided(z) = strategy {
        if z.n_rows() != n || z.n_components() != g {
            return Err(Error::Init(format!(
                "provided responsibilities are {}x{}, expected {n}x{g}",
                z.n_rows(),
                z.n_components()
            )));
        }
        return Ok(z.clone());
    }
    if g > 1 && data.distinct_rows() < g {
        return Err(Error::Init(format!(
            "only {} distinct observations for {g} components",
            data.distinct_rows()
        )));
    }
    let labels = match strategy {
        InitStrategy::HierarchicalAgglomeration => ward_labels(data, g),
        InitStrategy::KMeansPlusPlus { seed } => kmeanspp_labels(data, g, *seed),
        InitStrategy::Provided(_) => unreachable!(),
    };
    ResponsibilityMatrix::hard(&labels, g)
}

fn squared_distances(data: &DataMatrix) -> Vec<f64> {
    let n = data.n_rows();
    let m = data.matrix();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for c in 0..data.dim() {
                let diff = m[(i, c)] - m[(j, c)];
                acc += diff * diff;
            }
            d[i * n + j] = acc;
            d[j * n + i] = acc;
        }
    }
    d
}

fn ward_labels(data: &DataMatrix, g: usize) -> Vec<usize> {
    let d = squared_distances(data);
    let tree = agglomerate(&d, data.n_rows(), LinkageMethod::Ward);
    labels_at(&tree, g)
}

fn kmeanspp_labels(data: &DataMatrix, g: usize, seed: u64) -> Vec<usize> {
    let n = data.n_rows();
    let m = data.matrix();
    let mut rng = StreamKey::new(seed, 0, StreamRole::Init).rng();
    let sqdist = |i: usize, j: usize| {
        let mut acc = 0.0;
        for c in 0..data.dim() {
            let diff = m[(i, c)] - m[(j, c)];
            acc += diff * diff;
        }
        acc
    };

    let mut centers = Vec::with_capacity(g);
    centers.push((rng.next_u64() % n as u64) as usize);
    let mut best: Vec<f64> = (0..n).map(|i| sqdist(i, centers[0])).collect();
    while centers.len() < g {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.next_f64() * total;
            let mut chosen = n - 1;
            for (i, &w) in best.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // all remaining mass at the centers; distinct-row precondition
            // guarantees this cannot exhaust candidates
            (0..n).find(|i| !centers.contains(i)).unwrap()
        };
        centers.push(next);
        for i in 0..n {
            best[i] = best[i].min(sqdist(i, next));
        }
    }

    let raw: Vec<usize> = (0..n)
        .map(|i| {
            let mut arg = 0;
            let mut bestd = f64::INFINITY;
            for (k, &c) in centers.iter().enumerate() {
                let d = sqdist(i, c);
                if d < bestd {
                    bestd = d;
                    arg = k;
                }
            }
            arg
        })
        .collect();
    canonicalize(&raw, g)
}

/// Relabel groups in order of first appearance so identical partitions get
/// identical matrices.
fn canonicalize(labels: &[usize], g: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; g];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}
