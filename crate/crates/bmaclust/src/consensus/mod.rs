//! Co-clustering consensus matrices and their dendrograms.
//!
//! A fitted model's responsibilities give, for every pair of observations,
//! the probability that the pair shares a cluster: S = Z Z' off the
//! diagonal, 1 on it. The matrix has the same meaning for every component
//! count and is invariant to label switching, so ensemble averaging is just
//! a weighted sum of the per-model matrices.
//!
//! With D = 1 - S as a dissimilarity, complete linkage has a probability
//! reading: every group alive at height h has all pairwise co-clustering
//! probabilities at least 1 - h, so cutting the tree "at probability p"
//! guarantees at least p within every returned group.

mod heatmap;
mod seriate;

pub use heatmap::{heatmap_render, HeatmapArtifacts};
pub use seriate::seriate;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hclust::{agglomerate, LinkageMethod};
pub use crate::hclust::{Dendrogram, Merge};
use crate::params::ResponsibilityMatrix;
use crate::selection::ModelEnsemble;

/// Where a consensus matrix came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    SingleModel { spec: crate::cov::CovarianceSpec, g: usize },
    Averaged,
    External,
}

/// Symmetric N x N matrix of pairwise co-clustering probabilities with a
/// unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    s: DMatrix<f64>,
    provenance: Provenance,
}

impl ConsensusMatrix {
    /// Validates symmetry (to 1e-12), clamps stray floating error into
    /// [0, 1], and forces the diagonal to exactly 1.
    pub fn new(mut s: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let n = s.nrows();
        if n == 0 || s.ncols() != n {
            return Err(Error::InvalidInput("consensus matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "asymmetry at ({i},{j}): {} vs {}",
                        s[(i, j)],
                        s[(j, i)]
                    )));
                }
                if s[(i, j)] < -1e-9 || s[(i, j)] > 1.0 + 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "entry {} at ({i},{j}) outside [0,1]",
                        s[(i, j)]
                    )));
                }
                let v = s[(i, j)].clamp(0.0, 1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
            s[(i, i)] = 1.0;
        }
        Ok(ConsensusMatrix { s, provenance })
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The complementary dissimilarity 1 - S (zero diagonal).
    pub fn dissimilarity(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 - self.s[(i, j)] })
    }

    /// Smallest pairwise probability within a group of indices.
    pub fn min_within(&self, group: &[usize]) -> f64 {
        let mut m = 1.0f64;
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                m = m.min(self.s[(i, j)]);
            }
        }
        m
    }
}

/// Per-model consensus: S = Z Z' off the diagonal, 1 on it.
pub fn similarity(z: &ResponsibilityMatrix) -> ConsensusMatrix {
    let s = z.matrix() * z.matrix().transpose();
    ConsensusMatrix::new(s, Provenance::External).expect("products of stochastic rows are in range")
}

fn similarity_of(model: &crate::em::FittedModel) -> ConsensusMatrix {
    let mut s = similarity(&model.responsibilities);
    s.provenance = Provenance::SingleModel { spec: model.spec, g: model.n_components };
    s
}

/// Consensus of one ensemble member, addressed by rank in the BIC ordering.
pub fn single_model_consensus(ensemble: &ModelEnsemble, rank: usize) -> Result<ConsensusMatrix> {
    let (_, model) = ensemble
        .fitted_models()
        .nth(rank)
        .ok_or_else(|| Error::InvalidInput(format!("no fitted model at rank {rank}")))?;
    Ok(similarity_of(model))
}

/// Weighted average of per-model consensus matrices; weights must sum to 1
/// and all responsibility matrices must share N.
pub fn weighted_consensus(items: &[(f64, &ResponsibilityMatrix)]) -> Result<ConsensusMatrix> {
    let n = items
        .first()
        .ok_or_else(|| Error::InvalidInput("no models to average".into()))?
        .1
        .n_rows();
    let mut acc = DMatrix::zeros(n, n);
    for (w, z) in items {
        if z.n_rows() != n {
            return Err(Error::InvalidInput(format!(
                "responsibility matrices disagree on N ({} vs {n})",
                z.n_rows()
            )));
        }
        if *w == 0.0 {
            continue;
        }
        let zm = z.matrix();
        acc += (zm * zm.transpose()) * *w;
    }
    ConsensusMatrix::new(acc, Provenance::Averaged)
}

/// Posterior-weighted average of the per-model consensus matrices.
pub fn bma_consensus(ensemble: &ModelEnsemble) -> Result<ConsensusMatrix> {
    let n = ensemble.n_observations();
    let items: Vec<(f64, &ResponsibilityMatrix)> = ensemble
        .fitted_models()
        .map(|(entry, model)| (entry.weight, &model.responsibilities))
        .collect();
    for (_, z) in &items {
        if z.n_rows() != n {
            return Err(Error::InvalidInput(format!(
                "a model has {} rows of responsibilities, expected {n}",
                z.n_rows()
            )));
        }
    }
    weighted_consensus(&items)
}

/// Weighted-average consensus rebuilt from a serialized sweep: the document
/// supplies the weights, the responsibility store supplies the matrices.
pub fn bma_consensus_from_store(
    doc: &crate::selection::EnsembleDocument,
    zdir: &std::path::Path,
) -> Result<ConsensusMatrix> {
    let fitted = doc.fitted_specs()?;
    let mut zs = Vec::with_capacity(fitted.len());
    for &(spec, g, _) in &fitted {
        zs.push(crate::zstore::load(zdir, spec, g)?);
    }
    let items: Vec<(f64, &ResponsibilityMatrix)> = fitted
        .iter()
        .zip(&zs)
        .map(|(&(_, _, w), z)| (w, z))
        .collect();
    weighted_consensus(&items)
}

/// Complete-linkage dendrogram over D = 1 - S. Tie-breaking and the merge
/// record layout come from the shared agglomeration engine.
pub fn complete_linkage(s: &ConsensusMatrix) -> Dendrogram {
    let n = s.n();
    let d = s.dissimilarity();
    agglomerate(d.as_slice(), n, LinkageMethod::Complete)
}

/// Cut the dendrogram at probability level `p`: merges at height <= 1 - p
/// survive, so every returned group has min pairwise probability >= p.
/// Groups are ordered by smallest member.
pub fn cut(dend: &Dendrogram, probability_level: f64) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&probability_level) {
        return Err(Error::InvalidInput(format!(
            "probability level {probability_level} outside [0,1]"
        )));
    }
    Ok(dend.cut_at_height(1.0 - probability_level))
}

/// Text form of the tree: nested parentheses over leaf indices with
/// `:height` annotations on internal nodes.
pub fn dendrogram_text(dend: &Dendrogram) -> String {
    fn node_text(dend: &Dendrogram, node: usize, out: &mut String) {
        if node < dend.n_leaves() {
            out.push_str(&node.to_string());
        } else {
            let m = &dend.merges()[node - dend.n_leaves()];
            out.push('(');
            node_text(dend, m.left, out);
            out.push(',');
            node_text(dend, m.right, out);
            out.push_str(&format!("):{}", m.height));
        }
    }
    let mut out = String::new();
    let root = dend.n_leaves() + dend.merges().len() - 1;
    if dend.n_leaves() == 1 {
        return "0".to_string();
    }
    node_text(dend, root, &mut out);
    out
}

#[cfg(test)]
mod tests;
