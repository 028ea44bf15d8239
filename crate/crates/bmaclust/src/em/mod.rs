//! Maximum-likelihood fitting of one (structure, G) model by EM.

mod init;
mod mstep;

pub use init::initialize;
pub use mstep::m_step;

use nalgebra::DMatrix;

use crate::cov::CovarianceSpec;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mixture::weighted_log_density_matrix;
use crate::numeric::pairwise_sum;
use crate::params::{MixtureParams, ResponsibilityMatrix};
use crate::selection::bic;

/// How the responsibilities are seeded before the first M-step.
#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// Ward agglomeration on Euclidean distance, cut at G groups. Fully
    /// deterministic; the default.
    HierarchicalAgglomeration,
    /// k-means++ center seeding followed by a nearest-center assignment.
    KMeansPlusPlus { seed: u64 },
    /// Caller-supplied responsibilities.
    Provided(ResponsibilityMatrix),
}

/// Knobs for one EM run.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop when |loglik_t - loglik_{t-1}| < rel_tol * (1 + |loglik_t|).
    pub rel_tol: f64,
    pub init: InitStrategy,
    /// Relative ridge added once to a singular covariance before giving up.
    pub jitter: f64,
    /// A component whose effective count falls below this fraction of N is
    /// declared empty and the fit aborts as degenerate.
    pub min_cluster_weight: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 1000,
            rel_tol: 1e-6,
            init: InitStrategy::HierarchicalAgglomeration,
            jitter: 1e-8,
            min_cluster_weight: 1e-6,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        if self.jitter < 0.0 {
            return Err(Error::InvalidParameter("jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A converged (or max-iteration) EM fit of one model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: CovarianceSpec,
    pub n_components: usize,
    pub params: MixtureParams,
    /// The E-step of the final parameters.
    pub responsibilities: ResponsibilityMatrix,
    pub loglik: f64,
    pub kappa: usize,
    /// 2 loglik - kappa ln N.
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Observed log-likelihood after each EM iteration.
    pub loglik_trace: Vec<f64>,
}

/// Responsibilities z_ig = tau_g phi_g(x_i) / sum_g' tau_g' phi_g'(x_i),
/// computed in log space.
pub fn e_step(params: &MixtureParams, data: &DataMatrix) -> Result<ResponsibilityMatrix> {
    e_step_with_loglik(params, data).map(|(z, _)| z)
}

/// E-step plus the observed log-likelihood of the same parameters.
pub fn e_step_with_loglik(
    params: &MixtureParams,
    data: &DataMatrix,
) -> Result<(ResponsibilityMatrix, f64)> {
    if data.dim() != params.dim() {
        return Err(Error::DimensionMismatch(format!(
            "data has dimension {}, mixture has {}",
            data.dim(),
            params.dim()
        )));
    }
    let lp = weighted_log_density_matrix(params, data);
    let (n, g) = (lp.nrows(), lp.ncols());
    let mut z = DMatrix::zeros(n, g);
    let mut row_logliks = Vec::with_capacity(n);
    for i in 0..n {
        let mut m = f64::NEG_INFINITY;
        for k in 0..g {
            m = m.max(lp[(i, k)]);
        }
        if !m.is_finite() {
            return Err(Error::Numeric(format!(
                "every component underflowed at data row {i}"
            )));
        }
        let mut sum = 0.0;
        for k in 0..g {
            let w = (lp[(i, k)] - m).exp();
            z[(i, k)] = w;
            sum += w;
        }
        for k in 0..g {
            z[(i, k)] /= sum;
        }
        row_logliks.push(m + sum.ln());
    }
    Ok((ResponsibilityMatrix::new(z)?, pairwise_sum(&row_logliks)))
}

/// Alternate M- and E-steps from the configured initialization until the
/// relative log-likelihood change drops below `rel_tol` or `max_iter` is
/// reached (the latter returns `converged: false` rather than an error).
pub fn fit(data: &DataMatrix, spec: CovarianceSpec, g: usize, cfg: &FitConfig) -> Result<FittedModel> {
    cfg.validate()?;
    if g == 0 {
        return Err(Error::InvalidParameter("need at least one component".into()));
    }
    if data.n_rows() <= g {
        return Err(Error::InvalidInput(format!(
            "{} observations cannot support {g} components",
            data.n_rows()
        )));
    }

    let mut z = initialize(data, g, &cfg.init)?;
    let mut jitter = mstep::JitterState::default();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut state: Option<(MixtureParams, f64)> = None;

    for _ in 0..cfg.max_iter {
        let params = mstep::m_step_with_state(&z, data, spec, cfg, &mut jitter)?;
        let (z_new, ll) = e_step_with_loglik(&params, data)?;
        z = z_new;
        let prev = state.as_ref().map(|(_, ll)| *ll);
        state = Some((params, ll));
        trace.push(ll);
        if let Some(p) = prev {
            if (ll - p).abs() < cfg.rel_tol * (1.0 + ll.abs()) {
                converged = true;
                break;
            }
        }
    }

    let (params, loglik) = state.expect("max_iter >= 1 guarantees one iteration");
    let kappa = spec.param_count(g, data.dim());
    let bic = bic(loglik, kappa, data.n_rows());
    Ok(FittedModel {
        spec,
        n_components: g,
        params,
        responsibilities: z,
        loglik,
        kappa,
        bic,
        iterations: trace.len(),
        converged,
        loglik_trace: trace,
    })
}

#[cfg(test)]
mod tests;
