//! Mixture parameters and the volume/shape/orientation decomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const DET_TOL: f64 = 1e-8;
const ORTHO_TOL: f64 = 1e-8;
const COMPOSE_REL_TOL: f64 = 1e-10;
const WEIGHT_SUM_TOL: f64 = 1e-8;

/// lambda * D * diag(a) * D'. `a` must have unit product (the volume lives
/// entirely in lambda) and `d_mat` must be orthogonal.
pub fn compose_covariance(lambda: f64, d_mat: &DMatrix<f64>, a: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d = a.len();
    if d_mat.nrows() != d || d_mat.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "orientation is {}x{}, shape has length {d}",
            d_mat.nrows(),
            d_mat.ncols()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("volume must be positive, got {lambda}")));
    }
    if a.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter("shape entries must be positive".into()));
    }
    let det: f64 = a.iter().product();
    if (det - 1.0).abs() > DET_TOL {
        return Err(Error::InvalidParameter(format!(
            "shape determinant {det} is not 1 within {DET_TOL}"
        )));
    }
    let gram = d_mat.transpose() * d_mat;
    let eye = DMatrix::identity(d, d);
    if (gram - &eye).abs().max() > ORTHO_TOL {
        return Err(Error::InvalidParameter("orientation is not orthogonal".into()));
    }
    let mut scaled = d_mat.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let s = lambda * a[j];
        for v in col.iter_mut() {
            *v *= s;
        }
    }
    Ok(scaled * d_mat.transpose())
}

/// Split an SPD matrix into (volume, orientation, shape) with eigenvalues in
/// descending order and unit-determinant shape.
pub fn decompose_spd(sigma: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    let sym = nalgebra::SymmetricEigen::new(sigma.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[j].partial_cmp(&sym.eigenvalues[i]).unwrap());
    let eigs: Vec<f64> = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    if eigs.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "covariance is not positive definite (eigenvalues {eigs:?})"
        )));
    }
    let log_lambda = eigs.iter().map(|e| e.ln()).sum::<f64>() / d as f64;
    let lambda = log_lambda.exp();
    let a = DVector::from_iterator(d, eigs.iter().map(|&e| e / lambda));
    let mut d_mat = DMatrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        d_mat.set_column(k, &sym.eigenvectors.column(i));
    }
    Ok((lambda, d_mat, a))
}

/// Parameters of a finite normal mixture: proportions, means, and the
/// decomposed covariances with their compositions cached (Cholesky factors
/// included, since density evaluation needs them constantly).
///
/// Immutable after construction; the constructors validate every invariant
/// and evaluation never mutates, so values can be shared across threads.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    volumes: Vec<f64>,
    orientations: Vec<DMatrix<f64>>,
    shapes: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    chol_lower: Vec<DMatrix<f64>>,
    log_dets: Vec<f64>,
}

impl MixtureParams {
    pub fn from_decomposition(
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        volumes: Vec<f64>,
        orientations: Vec<DMatrix<f64>>,
        shapes: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let g = weights.len();
        if g == 0 || means.len() != g || volumes.len() != g || orientations.len() != g || shapes.len() != g
        {
            return Err(Error::InvalidParameter("component lists must be nonempty and aligned".into()));
        }
        let covariances: Vec<DMatrix<f64>> = (0..g)
            .map(|k| compose_covariance(volumes[k], &orientations[k], &shapes[k]))
            .collect::<Result<_>>()?;
        Self::assemble(weights, means, volumes, orientations, shapes, covariances)
    }

    pub fn from_covariances(
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let g = weights.len();
        if g == 0 || means.len() != g || covariances.len() != g {
            return Err(Error::InvalidParameter("component lists must be nonempty and aligned".into()));
        }
        let mut volumes = Vec::with_capacity(g);
        let mut orientations = Vec::with_capacity(g);
        let mut shapes = Vec::with_capacity(g);
        for sigma in &covariances {
            let (l, d_mat, a) = decompose_spd(sigma)?;
            volumes.push(l);
            orientations.push(d_mat);
            shapes.push(a);
        }
        Self::assemble(weights, means, volumes, orientations, shapes, covariances)
    }

    /// Single standard-normal component in `d` dimensions.
    pub fn standard_normal(d: usize) -> Self {
        MixtureParams::from_covariances(
            vec![1.0],
            vec![DVector::zeros(d)],
            vec![DMatrix::identity(d, d)],
        )
        .expect("standard normal is valid")
    }

    fn assemble(
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        volumes: Vec<f64>,
        orientations: Vec<DMatrix<f64>>,
        shapes: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let d = means[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter("means must have positive dimension".into()));
        }
        if means.iter().any(|m| m.len() != d) {
            return Err(Error::DimensionMismatch("means have inconsistent dimensions".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("mixing proportions must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "mixing proportions sum to {total}, expected 1"
            )));
        }

        let mut chol_lower = Vec::with_capacity(weights.len());
        let mut log_dets = Vec::with_capacity(weights.len());
        for (k, sigma) in covariances.iter().enumerate() {
            if sigma.nrows() != d || sigma.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "covariance {k} is {}x{}, expected {d}x{d}",
                    sigma.nrows(),
                    sigma.ncols()
                )));
            }
            // composition must reproduce the cached covariance
            let composed = compose_covariance(volumes[k], &orientations[k], &shapes[k])?;
            let scale = sigma.abs().max().max(1e-300);
            if (&composed - sigma).abs().max() / scale > COMPOSE_REL_TOL {
                return Err(Error::InvalidParameter(format!(
                    "covariance {k} does not match its decomposition"
                )));
            }
            let chol = sigma
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidParameter(format!("covariance {k} is not positive definite")))?;
            let l = chol.l();
            let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            chol_lower.push(l);
            log_dets.push(log_det);
        }

        Ok(MixtureParams {
            weights,
            means,
            volumes,
            orientations,
            shapes,
            covariances,
            chol_lower,
            log_dets,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, g: usize) -> &DVector<f64> {
        &self.means[g]
    }

    pub fn covariance(&self, g: usize) -> &DMatrix<f64> {
        &self.covariances[g]
    }

    pub fn volume(&self, g: usize) -> f64 {
        self.volumes[g]
    }

    pub fn orientation(&self, g: usize) -> &DMatrix<f64> {
        &self.orientations[g]
    }

    pub fn shape(&self, g: usize) -> &DVector<f64> {
        &self.shapes[g]
    }

    pub(crate) fn chol_lower(&self, g: usize) -> &DMatrix<f64> {
        &self.chol_lower[g]
    }

    pub(crate) fn log_det(&self, g: usize) -> f64 {
        self.log_dets[g]
    }

    /// Components re-ordered by `perm` (a bijection on 0..G).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |k: usize| perm[k];
        MixtureParams {
            weights: (0..self.n_components()).map(|k| self.weights[pick(k)]).collect(),
            means: (0..self.n_components()).map(|k| self.means[pick(k)].clone()).collect(),
            volumes: (0..self.n_components()).map(|k| self.volumes[pick(k)]).collect(),
            orientations: (0..self.n_components()).map(|k| self.orientations[pick(k)].clone()).collect(),
            shapes: (0..self.n_components()).map(|k| self.shapes[pick(k)].clone()).collect(),
            covariances: (0..self.n_components()).map(|k| self.covariances[pick(k)].clone()).collect(),
            chol_lower: (0..self.n_components()).map(|k| self.chol_lower[pick(k)].clone()).collect(),
            log_dets: (0..self.n_components()).map(|k| self.log_dets[pick(k)]).collect(),
        }
    }

    /// First moment of the mixture.
    pub fn mixture_mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        for (w, mu) in self.weights.iter().zip(&self.means) {
            m += mu * *w;
        }
        m
    }

    /// Covariance of the mixture: sum tau_g (sigma_g + mu_g mu_g') - mu mu'.
    pub fn mixture_covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let m = self.mixture_mean();
        let mut s = DMatrix::zeros(d, d);
        for ((w, mu), sigma) in self.weights.iter().zip(&self.means).zip(&self.covariances) {
            s += (sigma + mu * mu.transpose()) * *w;
        }
        s - &m * m.transpose()
    }
}

/// N x G matrix of component responsibilities; rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMatrix {
    z: DMatrix<f64>,
}

impl ResponsibilityMatrix {
    const ROW_SUM_TOL: f64 = 1e-10;

    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::InvalidParameter("responsibilities must be nonempty".into()));
        }
        for (i, row) in z.row_iter().enumerate() {
            let mut sum = 0.0;
            for &v in row.iter() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "responsibility {v} at row {i} outside [0,1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > Self::ROW_SUM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(ResponsibilityMatrix { z })
    }

    /// Hard assignment: row i puts probability one on `labels[i]`.
    pub fn hard(labels: &[usize], g: usize) -> Result<Self> {
        if labels.iter().any(|&l| l >= g) {
            return Err(Error::InvalidParameter("label out of range".into()));
        }
        let mut z = DMatrix::zeros(labels.len(), g);
        for (i, &l) in labels.iter().enumerate() {
            z[(i, l)] = 1.0;
        }
        ResponsibilityMatrix::new(z)
    }

    pub fn n_rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.z.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Per-component effective counts (column sums).
    pub fn counts(&self) -> Vec<f64> {
        (0..self.n_components()).map(|g| self.z.column(g).sum()).collect()
    }

    /// Most responsible component per row.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.z
            .row_iter()
            .map(|r| {
                let mut best = 0;
                for (j, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}
