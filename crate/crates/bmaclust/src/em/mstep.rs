//! Constraint-respecting M-steps for the ten covariance structures.
//!
//! Proportions and means always have the same closed form; the covariance
//! factors are maximized under each structure's equality constraints.
//! Spherical and diagonal structures (and EEE, EVI, EEV, VVV) admit closed
//! forms; VEI and VEV alternate between the volume and shape updates until
//! the inner objective stabilizes. The inner update order is shape/volume
//! first, orientations fixed from the per-component scatter eigenvectors.

use nalgebra::{DMatrix, DVector};

use crate::cov::CovarianceSpec;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::params::{MixtureParams, ResponsibilityMatrix};

use super::FitConfig;

const INNER_TOL: f64 = 1e-8;
const INNER_MAX: usize = 100;

/// Tracks the one-shot singularity ridge across a whole EM run.
#[derive(Debug, Default)]
pub(crate) struct JitterState {
    used: bool,
}

/// One M-step with fresh jitter accounting (the public entry point; `fit`
/// threads its own state across iterations).
pub fn m_step(
    z: &ResponsibilityMatrix,
    data: &DataMatrix,
    spec: CovarianceSpec,
    cfg: &FitConfig,
) -> Result<MixtureParams> {
    m_step_with_state(z, data, spec, cfg, &mut JitterState::default())
}

pub(crate) fn m_step_with_state(
    z: &ResponsibilityMatrix,
    data: &DataMatrix,
    spec: CovarianceSpec,
    cfg: &FitConfig,
    jitter: &mut JitterState,
) -> Result<MixtureParams> {
    let n = data.n_rows();
    if z.n_rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "responsibilities have {} rows, data has {n}",
            z.n_rows()
        )));
    }
    let g = z.n_components();
    let d = data.dim();

    let counts = z.counts();
    let floor = cfg.min_cluster_weight * n as f64;
    for (k, &ng) in counts.iter().enumerate() {
        if ng < floor {
            return Err(Error::DegenerateFit(format!(
                "component {k} emptied out (effective count {ng:.3e})"
            )));
        }
    }

    let weights: Vec<f64> = counts.iter().map(|&ng| ng / n as f64).collect();
    let zm = z.matrix();
    let x = data.matrix();

    // weighted means
    let mut means = Vec::with_capacity(g);
    for k in 0..g {
        let mut mu = DVector::zeros(d);
        for i in 0..n {
            let w = zm[(i, k)];
            for c in 0..d {
                mu[c] += w * x[(i, c)];
            }
        }
        means.push(mu / counts[k]);
    }

    // per-component scatter matrices W_g = sum_i z_ig (x_i - mu_g)(x_i - mu_g)'
    let mut scatter = Vec::with_capacity(g);
    for k in 0..g {
        let mut w = DMatrix::zeros(d, d);
        let mu = &means[k];
        let mut centered = DVector::zeros(d);
        for i in 0..n {
            let zik = zm[(i, k)];
            if zik == 0.0 {
                continue;
            }
            for c in 0..d {
                centered[c] = x[(i, c)] - mu[c];
            }
            w.ger(zik, &centered, &centered, 1.0);
        }
        scatter.push(w);
    }

    match covariance_factors(spec, &scatter, &counts, n as f64, d) {
        Ok(f) => assemble(weights.clone(), means.clone(), f),
        Err(first_err) => {
            if jitter.used || cfg.jitter == 0.0 {
                return Err(Error::DegenerateFit(format!(
                    "singular scatter persists after jitter: {first_err}"
                )));
            }
            jitter.used = true;
            // ridge of jitter * trace(sigma_g)/d on the covariance scale;
            // scatter = n_g sigma_g, so the same relative ridge applies as
            // jitter * trace(W_g)/d
            let ridged: Vec<DMatrix<f64>> = scatter
                .iter()
                .map(|w| {
                    let ridge = cfg.jitter * w.trace() / d as f64;
                    w + DMatrix::identity(d, d) * ridge
                })
                .collect();
            let f = covariance_factors(spec, &ridged, &counts, n as f64, d)
                .map_err(|e| Error::DegenerateFit(format!("singular scatter persists after jitter: {e}")))?;
            assemble(weights, means, f)
        }
    }
}

struct FactorSet {
    volumes: Vec<f64>,
    orientations: Vec<DMatrix<f64>>,
    shapes: Vec<DVector<f64>>,
}

fn assemble(weights: Vec<f64>, means: Vec<DVector<f64>>, f: FactorSet) -> Result<MixtureParams> {
    MixtureParams::from_decomposition(weights, means, f.volumes, f.orientations, f.shapes)
        .map_err(|e| Error::DegenerateFit(format!("covariance update collapsed: {e}")))
}

fn check_pos(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} is {v}")))
    }
}

/// Geometric mean of strictly positive entries; the unit-determinant
/// normalizer.
fn geo_mean(v: &DVector<f64>) -> Result<f64> {
    let mut acc = 0.0;
    for &x in v.iter() {
        check_pos(x, "shape entry")?;
        acc += x.ln();
    }
    Ok((acc / v.len() as f64).exp())
}

fn unit_shape(v: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let m = geo_mean(v)?;
    Ok((m, v / m))
}

fn diag_of(w: &DMatrix<f64>) -> DVector<f64> {
    w.diagonal()
}

/// Eigenvalues (descending) and matching eigenvectors of a symmetric
/// scatter matrix.
fn eigh_desc(w: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = w.nrows();
    let sym = nalgebra::SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[j].partial_cmp(&sym.eigenvalues[i]).unwrap());
    let vals = DVector::from_iterator(d, order.iter().map(|&i| sym.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &sym.eigenvectors.column(i));
    }
    (vals, vecs)
}

fn covariance_factors(
    spec: CovarianceSpec,
    scatter: &[DMatrix<f64>],
    counts: &[f64],
    n: f64,
    d: usize,
) -> Result<FactorSet> {
    let g = scatter.len();
    let eye = || DMatrix::identity(d, d);
    let ones = || DVector::from_element(d, 1.0);

    match spec {
        CovarianceSpec::EII => {
            let total: f64 = scatter.iter().map(|w| w.trace()).sum();
            let lambda = check_pos(total / (n * d as f64), "shared spherical volume")?;
            Ok(FactorSet {
                volumes: vec![lambda; g],
                orientations: (0..g).map(|_| eye()).collect(),
                shapes: (0..g).map(|_| ones()).collect(),
            })
        }
        CovarianceSpec::VII => {
            let volumes: Result<Vec<f64>> = scatter
                .iter()
                .zip(counts)
                .map(|(w, &ng)| check_pos(w.trace() / (ng * d as f64), "spherical volume"))
                .collect();
            Ok(FactorSet {
                volumes: volumes?,
                orientations: (0..g).map(|_| eye()).collect(),
                shapes: (0..g).map(|_| ones()).collect(),
            })
        }
        CovarianceSpec::EEI => {
            let mut total = DVector::zeros(d);
            for w in scatter {
                total += diag_of(w);
            }
            let b = total / n;
            let (lambda, shape) = unit_shape(&b)?;
            Ok(FactorSet {
                volumes: vec![lambda; g],
                orientations: (0..g).map(|_| eye()).collect(),
                shapes: (0..g).map(|_| shape.clone()).collect(),
            })
        }
        CovarianceSpec::VEI => {
            let diags: Vec<DVector<f64>> = scatter.iter().map(diag_of).collect();
            let (volumes, shape) = alternate_volume_shape(&diags, counts, d)?;
            Ok(FactorSet {
                volumes,
                orientations: (0..g).map(|_| eye()).collect(),
                shapes: (0..g).map(|_| shape.clone()).collect(),
            })
        }
        CovarianceSpec::EVI => {
            // per-component shape from its own diagonal scatter; the shared
            // volume averages the unit-determinant scales
            let mut shapes = Vec::with_capacity(g);
            let mut scale_sum = 0.0;
            for w in scatter {
                let (scale, shape) = unit_shape(&diag_of(w))?;
                scale_sum += scale;
                shapes.push(shape);
            }
            let lambda = check_pos(scale_sum / n, "shared volume")?;
            Ok(FactorSet {
                volumes: vec![lambda; g],
                orientations: (0..g).map(|_| eye()).collect(),
                shapes,
            })
        }
        CovarianceSpec::VVI => {
            let mut volumes = Vec::with_capacity(g);
            let mut shapes = Vec::with_capacity(g);
            for (w, &ng) in scatter.iter().zip(counts) {
                let (lambda, shape) = unit_shape(&(diag_of(w) / ng))?;
                volumes.push(check_pos(lambda, "volume")?);
                shapes.push(shape);
            }
            Ok(FactorSet {
                volumes,
                orientations: (0..g).map(|_| eye()).collect(),
                shapes,
            })
        }
        CovarianceSpec::EEE => {
            let mut total = DMatrix::zeros(d, d);
            for w in scatter {
                total += w;
            }
            let sigma = total / n;
            let (vals, vecs) = eigh_desc(&sigma);
            let (lambda, shape) = unit_shape(&vals)?;
            Ok(FactorSet {
                volumes: vec![lambda; g],
                orientations: (0..g).map(|_| vecs.clone()).collect(),
                shapes: (0..g).map(|_| shape.clone()).collect(),
            })
        }
        CovarianceSpec::EEV => {
            let mut orients = Vec::with_capacity(g);
            let mut omega_sum = DVector::zeros(d);
            for w in scatter {
                let (vals, vecs) = eigh_desc(w);
                omega_sum += &vals;
                orients.push(vecs);
            }
            let (scale, shape) = unit_shape(&omega_sum)?;
            let lambda = check_pos(scale / n, "shared volume")?;
            Ok(FactorSet {
                volumes: vec![lambda; g],
                orientations: orients,
                shapes: (0..g).map(|_| shape.clone()).collect(),
            })
        }
        CovarianceSpec::VEV => {
            let mut orients = Vec::with_capacity(g);
            let mut omegas = Vec::with_capacity(g);
            for w in scatter {
                let (vals, vecs) = eigh_desc(w);
                omegas.push(vals);
                orients.push(vecs);
            }
            let (volumes, shape) = alternate_volume_shape(&omegas, counts, d)?;
            Ok(FactorSet {
                volumes,
                orientations: orients,
                shapes: (0..g).map(|_| shape.clone()).collect(),
            })
        }
        CovarianceSpec::VVV => {
            let mut volumes = Vec::with_capacity(g);
            let mut orients = Vec::with_capacity(g);
            let mut shapes = Vec::with_capacity(g);
            for (w, &ng) in scatter.iter().zip(counts) {
                let (vals, vecs) = eigh_desc(&(w / ng));
                let (lambda, shape) = unit_shape(&vals)?;
                volumes.push(check_pos(lambda, "volume")?);
                orients.push(vecs);
                shapes.push(shape);
            }
            Ok(FactorSet { volumes, orientations: orients, shapes })
        }
    }
}

/// Shared-shape / per-component-volume fixed point used by VEI (on diagonal
/// scatters) and VEV (on scatter eigenvalues). Minimizes
/// sum_g [ sum_k s_gk / (lambda_g a_k) + n_g d ln lambda_g ] with prod a = 1.
fn alternate_volume_shape(
    s: &[DVector<f64>],
    counts: &[f64],
    d: usize,
) -> Result<(Vec<f64>, DVector<f64>)> {
    let g = s.len();
    let mut total = DVector::zeros(d);
    for v in s {
        total += v;
    }
    let (_, mut shape) = unit_shape(&total)?;
    let mut volumes = vec![0.0; g];
    let mut prev_obj = f64::INFINITY;
    for _ in 0..INNER_MAX {
        for k in 0..g {
            let tr: f64 = s[k].iter().zip(shape.iter()).map(|(&w, &a)| w / a).sum();
            volumes[k] = check_pos(tr / (counts[k] * d as f64), "volume")?;
        }
        let mut weighted = DVector::zeros(d);
        for k in 0..g {
            weighted += &s[k] / volumes[k];
        }
        let (_, new_shape) = unit_shape(&weighted)?;
        shape = new_shape;

        let mut obj = 0.0;
        for k in 0..g {
            let tr: f64 = s[k].iter().zip(shape.iter()).map(|(&w, &a)| w / a).sum();
            obj += tr / volumes[k] + counts[k] * d as f64 * volumes[k].ln();
        }
        if (prev_obj - obj).abs() <= INNER_TOL * (1.0 + obj.abs()) {
            break;
        }
        prev_obj = obj;
    }
    Ok((volumes, shape))
}
