//! Model-averaged, single-model, and kernel density estimators.
//!
//! A weighted average of normal mixtures is itself one normal mixture with
//! component weights w_m tau_mg, so every estimator here evaluates through
//! the same flattened component list. Points are processed in chunks with
//! one triangular solve per (component, chunk); the per-point arithmetic is
//! identical for every chunk size, so batch and scalar evaluation agree bit
//! for bit.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::params::MixtureParams;
use crate::selection::ModelEnsemble;

const LN_2PI: f64 = 1.8378770664093453;
const CHUNK: usize = 512;

/// One normal component ready for evaluation:
/// term(x) = exp(base - ||L^-1 (x - mean)||^2 / 2).
#[derive(Debug, Clone)]
struct FlatComponent {
    base: f64,
    mean: DVector<f64>,
    chol_lower: DMatrix<f64>,
}

fn flatten(models: &[(f64, MixtureParams)]) -> Vec<FlatComponent> {
    let mut comps = Vec::new();
    for (w, p) in models {
        let d = p.dim() as f64;
        for g in 0..p.n_components() {
            comps.push(FlatComponent {
                base: (w * p.weights()[g]).ln() - 0.5 * (d * LN_2PI + p.log_det(g)),
                mean: p.mean(g).clone(),
                chol_lower: p.chol_lower(g).clone(),
            });
        }
    }
    comps
}

/// Gaussian kernel estimator with a fixed bandwidth matrix. The kernel
/// centers are whitened by the bandwidth Cholesky factor once, so one
/// triangular solve per query point covers all centers.
#[derive(Debug, Clone)]
pub struct KernelDensity {
    whitened_centers: Vec<DVector<f64>>,
    chol_lower: DMatrix<f64>,
    base: f64, // -ln N - (d ln 2pi + ln det H) / 2
    dim: usize,
}

impl KernelDensity {
    pub fn new(data: &DataMatrix, bandwidth: DMatrix<f64>) -> Result<Self> {
        let d = data.dim();
        if bandwidth.nrows() != d || bandwidth.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "bandwidth is {}x{} for {d}-dimensional data",
                bandwidth.nrows(),
                bandwidth.ncols()
            )));
        }
        let chol = bandwidth
            .cholesky()
            .ok_or_else(|| Error::Numeric("bandwidth matrix is not positive definite".into()))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let whitened_centers = data
            .points()
            .into_iter()
            .map(|p| l.solve_lower_triangular(&p).expect("positive diagonal"))
            .collect();
        Ok(KernelDensity {
            whitened_centers,
            chol_lower: l,
            base: -(data.n_rows() as f64).ln() - 0.5 * (d as f64 * LN_2PI + log_det),
            dim: d,
        })
    }

    fn density(&self, x: &DVector<f64>) -> f64 {
        let y = self.chol_lower.solve_lower_triangular(x).expect("positive diagonal");
        let mut total = 0.0;
        for c in &self.whitened_centers {
            let mut q = 0.0;
            for k in 0..self.dim {
                let diff = y[k] - c[k];
                q += diff * diff;
            }
            total += (self.base - 0.5 * q).exp();
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    /// Posterior-weighted combination of fitted mixtures.
    Averaged,
    /// The single highest-BIC mixture.
    SingleModel,
    /// Gaussian kernel estimate.
    Kernel,
}

/// A density estimate built from a model sweep or from the data directly.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    kind: EstimateKind,
    comps: Vec<FlatComponent>,
    kernel: Option<KernelDensity>,
    dim: usize,
}

impl DensityEstimate {
    /// Weighted combination over an ensemble's fitted models. Models whose
    /// weight is exactly zero contribute nothing and are dropped.
    pub fn averaged(ensemble: &ModelEnsemble) -> Result<Self> {
        let models: Vec<(f64, MixtureParams)> = ensemble
            .fitted_models()
            .filter(|(e, _)| e.weight > 0.0)
            .map(|(e, f)| (e.weight, f.params.clone()))
            .collect();
        if models.is_empty() {
            return Err(Error::InvalidInput("ensemble has no fitted models".into()));
        }
        Self::from_weighted_models(models)
    }

    /// As `averaged`, from already-extracted weighted parameters (e.g. a
    /// deserialized ensemble document).
    pub fn from_weighted_models(models: Vec<(f64, MixtureParams)>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidInput("no weighted models given".into()));
        }
        let d = models[0].1.dim();
        if models.iter().any(|(_, p)| p.dim() != d) {
            return Err(Error::DimensionMismatch("model dimensions disagree".into()));
        }
        Ok(DensityEstimate {
            kind: EstimateKind::Averaged,
            comps: flatten(&models),
            kernel: None,
            dim: d,
        })
    }

    /// The max-BIC model of the ensemble (ties go to the model ranked
    /// first, i.e. earliest in grid order).
    pub fn single_model(ensemble: &ModelEnsemble) -> Result<Self> {
        let best = ensemble
            .best()
            .ok_or_else(|| Error::InvalidInput("ensemble has no fitted models".into()))?;
        Ok(Self::single_model_params(best.params.clone()))
    }

    pub fn single_model_params(params: MixtureParams) -> Self {
        let dim = params.dim();
        DensityEstimate {
            kind: EstimateKind::SingleModel,
            comps: flatten(&[(1.0, params)]),
            kernel: None,
            dim,
        }
    }

    pub fn kernel(data: &DataMatrix, bandwidth: DMatrix<f64>) -> Result<Self> {
        let k = KernelDensity::new(data, bandwidth)?;
        Ok(DensityEstimate {
            kind: EstimateKind::Kernel,
            comps: Vec::new(),
            dim: k.dim,
            kernel: Some(k),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EstimateKind {
        self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EstimateKind::Averaged => "bma",
            EstimateKind::SingleModel => "sm",
            EstimateKind::Kernel => "kde",
        }
    }

    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, estimate has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.density_unchecked(x))
    }

    pub(crate) fn density_unchecked(&self, x: &DVector<f64>) -> f64 {
        match &self.kernel {
            Some(k) => k.density(x),
            None => {
                let mut total = 0.0;
                for comp in &self.comps {
                    let v = self
                        .comps_solve(comp, x);
                    total += v;
                }
                total
            }
        }
    }

    fn comps_solve(&self, comp: &FlatComponent, x: &DVector<f64>) -> f64 {
        let centered = x - &comp.mean;
        let v = comp
            .chol_lower
            .solve_lower_triangular(&centered)
            .expect("positive diagonal");
        (comp.base - 0.5 * v.norm_squared()).exp()
    }

    /// Densities at many points; same values as `density` point by point,
    /// computed with one triangular solve per component and chunk.
    pub fn densities(&self, points: &[DVector<f64>]) -> Result<Vec<f64>> {
        if points.iter().any(|p| p.len() != self.dim) {
            return Err(Error::DimensionMismatch("point dimension mismatch".into()));
        }
        let mut out = vec![0.0; points.len()];
        for (chunk_idx, chunk) in points.chunks(CHUNK).enumerate() {
            let offset = chunk_idx * CHUNK;
            let cols = DMatrix::from_fn(self.dim, chunk.len(), |r, c| chunk[c][r]);
            match &self.kernel {
                Some(k) => {
                    let y = k
                        .chol_lower
                        .solve_lower_triangular(&cols)
                        .expect("positive diagonal");
                    for (c, col) in y.column_iter().enumerate() {
                        let mut total = 0.0;
                        for center in &k.whitened_centers {
                            let mut q = 0.0;
                            for r in 0..self.dim {
                                let diff = col[r] - center[r];
                                q += diff * diff;
                            }
                            total += (k.base - 0.5 * q).exp();
                        }
                        out[offset + c] = total;
                    }
                }
                None => {
                    for comp in &self.comps {
                        let mut centered = cols.clone();
                        for mut col in centered.column_iter_mut() {
                            col -= &comp.mean;
                        }
                        let v = comp
                            .chol_lower
                            .solve_lower_triangular(&centered)
                            .expect("positive diagonal");
                        for (c, col) in v.column_iter().enumerate() {
                            out[offset + c] += (comp.base - 0.5 * col.norm_squared()).exp();
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Model-averaged density at one point.
pub fn bma_density(ensemble: &ModelEnsemble, x: &DVector<f64>) -> Result<f64> {
    DensityEstimate::averaged(ensemble)?.density(x)
}

/// Density of the single best model at one point.
pub fn sm_density(ensemble: &ModelEnsemble, x: &DVector<f64>) -> Result<f64> {
    DensityEstimate::single_model(ensemble)?.density(x)
}

/// Normal-scale bandwidth: (4 / (N (d + 2)))^(2 / (d + 4)) times the sample
/// covariance.
pub fn kde_bandwidth(data: &DataMatrix) -> Result<DMatrix<f64>> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::InvalidInput("bandwidth needs at least two observations".into()));
    }
    let d = data.dim() as f64;
    let cov = data.sample_covariance()?;
    if cov.clone().cholesky().is_none() {
        return Err(Error::Numeric("sample covariance is singular".into()));
    }
    let factor = (4.0 / (n as f64 * (d + 2.0))).powf(2.0 / (d + 4.0));
    Ok(cov * factor)
}

/// Kernel density with an explicit bandwidth at one point.
pub fn kde_density(data: &DataMatrix, bandwidth: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    DensityEstimate::kernel(data, bandwidth.clone())?.density(x)
}

/// Evaluate an estimate on a regular 2D grid; rows of (x, y, density) with
/// the y coordinate varying fastest.
pub fn density_grid(
    est: &DensityEstimate,
    x_range: (f64, f64),
    y_range: (f64, f64),
    nodes: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if est.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "grid export needs a 2-dimensional estimate, got {}",
            est.dim()
        )));
    }
    if nodes < 2 {
        return Err(Error::InvalidInput("need at least two grid nodes per axis".into()));
    }
    let hx = (x_range.1 - x_range.0) / (nodes - 1) as f64;
    let hy = (y_range.1 - y_range.0) / (nodes - 1) as f64;
    let mut points = Vec::with_capacity(nodes * nodes);
    for i in 0..nodes {
        let x = x_range.0 + hx * i as f64;
        for j in 0..nodes {
            points.push(DVector::from_vec(vec![x, y_range.0 + hy * j as f64]));
        }
    }
    let vals = est.densities(&points)?;
    Ok(points
        .into_iter()
        .zip(vals)
        .map(|(p, f)| (p[0], p[1], f))
        .collect())
}
