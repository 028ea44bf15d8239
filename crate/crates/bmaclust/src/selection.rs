//! Model grid sweeps, BIC, and BIC-approximated posterior model weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov::CovarianceSpec;
use crate::data::DataMatrix;
use crate::em::{fit, FitConfig, FittedModel, InitStrategy};
use crate::error::{Error, Result};
use crate::hclust;
use crate::params::ResponsibilityMatrix;

/// 2 loglik - kappa ln N. Larger is better.
pub fn bic(loglik: f64, kappa: usize, n: usize) -> f64 {
    2.0 * loglik - kappa as f64 * (n as f64).ln()
}

/// Normalized weights proportional to prior * exp(BIC / 2), computed after
/// shifting by the maximum BIC so the exponentials cannot overflow.
pub fn posterior_model_probs(bics: &[f64], priors: &[f64]) -> Result<Vec<f64>> {
    if bics.is_empty() || bics.len() != priors.len() {
        return Err(Error::InvalidInput(format!(
            "{} BIC values against {} priors",
            bics.len(),
            priors.len()
        )));
    }
    if priors.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidInput("priors must be nonnegative".into()));
    }
    let prior_total: f64 = priors.iter().sum();
    if prior_total <= 0.0 {
        return Err(Error::InvalidInput("at least one prior must be positive".into()));
    }
    let max = bics.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = bics
        .iter()
        .zip(priors)
        .map(|(&b, &p)| p * ((b - max) / 2.0).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numeric("every weight underflowed".into()));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// The (structure, G) pairs to fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelGrid {
    entries: Vec<(CovarianceSpec, usize)>,
}

impl ModelGrid {
    /// Component counts 1..=max_clusters; the three distinct one-component
    /// structures for G = 1, all ten structures for G >= 2. The default
    /// `max_clusters` of 9 yields the usual 83-model grid.
    pub fn standard(max_clusters: usize) -> Self {
        let mut entries = Vec::new();
        for g in 1..=max_clusters {
            if g == 1 {
                for spec in CovarianceSpec::SINGLE_COMPONENT {
                    entries.push((spec, 1));
                }
            } else {
                for spec in CovarianceSpec::ALL {
                    entries.push((spec, g));
                }
            }
        }
        ModelGrid { entries }
    }

    /// Arbitrary grid; rejects duplicates and emptiness.
    pub fn new(entries: Vec<(CovarianceSpec, usize)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("empty model grid".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.1 == 0 {
                return Err(Error::InvalidInput("component count must be positive".into()));
            }
            if entries[..i].contains(e) {
                return Err(Error::InvalidInput(format!("duplicate grid entry {}/{}", e.0, e.1)));
            }
        }
        Ok(ModelGrid { entries })
    }

    pub fn entries(&self) -> &[(CovarianceSpec, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_clusters(&self) -> usize {
        self.entries.iter().map(|e| e.1).max().unwrap_or(0)
    }

    pub fn describe(&self) -> String {
        format!("{} models, G up to {}", self.len(), self.max_clusters())
    }
}

impl Default for ModelGrid {
    fn default() -> Self {
        ModelGrid::standard(9)
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone)]
pub enum FitOutcome {
    Fitted(FittedModel),
    Failed { message: String },
}

/// One grid cell with its posterior weight (0 for failures).
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub spec: CovarianceSpec,
    pub n_components: usize,
    pub prior: f64,
    pub weight: f64,
    /// Wall-clock cost of this cell's fit attempt.
    pub fit_seconds: f64,
    pub outcome: FitOutcome,
}

impl EnsembleModel {
    pub fn fitted(&self) -> Option<&FittedModel> {
        match &self.outcome {
            FitOutcome::Fitted(m) => Some(m),
            FitOutcome::Failed { .. } => None,
        }
    }
}

/// Every fitted (or failed) model of a sweep, sorted by descending BIC with
/// failures trailing, plus the weights that turn the list into a posterior
/// over models. Immutable once built.
#[derive(Debug, Clone)]
pub struct ModelEnsemble {
    models: Vec<EnsembleModel>,
    n_observations: usize,
    dim: usize,
    data_fingerprint: String,
}

impl ModelEnsemble {
    pub fn models(&self) -> &[EnsembleModel] {
        &self.models
    }

    /// Successful fits in ensemble (descending BIC) order.
    pub fn fitted_models(&self) -> impl Iterator<Item = (&EnsembleModel, &FittedModel)> {
        self.models.iter().filter_map(|m| m.fitted().map(|f| (m, f)))
    }

    /// The single highest-BIC fit. Ties resolve to the model listed first
    /// in grid order (the sort is stable).
    pub fn best(&self) -> Option<&FittedModel> {
        self.fitted_models().next().map(|(_, f)| f)
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data_fingerprint(&self) -> &str {
        &self.data_fingerprint
    }

    pub fn n_fitted(&self) -> usize {
        self.fitted_models().count()
    }

    pub fn n_failed(&self) -> usize {
        self.models.len() - self.n_fitted()
    }
}

/// Fit every grid cell and weight the successes by Eq.-style BIC
/// exponentiation under a uniform model prior.
pub fn sweep(data: &DataMatrix, grid: &ModelGrid, cfg: &FitConfig) -> Result<ModelEnsemble> {
    let priors = vec![1.0; grid.len()];
    sweep_with_priors(data, grid, cfg, &priors)
}

/// As `sweep` with explicit per-model priors aligned with `grid.entries()`.
pub fn sweep_with_priors(
    data: &DataMatrix,
    grid: &ModelGrid,
    cfg: &FitConfig,
    priors: &[f64],
) -> Result<ModelEnsemble> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty model grid".into()));
    }
    if priors.len() != grid.len() {
        return Err(Error::InvalidInput("priors must align with the grid".into()));
    }

    // With the deterministic agglomerative default, the merge tree depends
    // only on the data; build it once and reuse the cut for every G.
    let shared_init: Option<Vec<Option<ResponsibilityMatrix>>> =
        if matches!(cfg.init, InitStrategy::HierarchicalAgglomeration) {
            Some(precompute_hierarchical_inits(data, grid))
        } else {
            None
        };

    type CellResult = (CovarianceSpec, usize, std::result::Result<FittedModel, String>, f64);
    let results: Vec<CellResult> = grid
        .entries()
        .par_iter()
        .map(|&(spec, g)| {
            let started = std::time::Instant::now();
            let outcome = if data.n_rows() <= g {
                Err(format!("{} observations cannot support {g} components", data.n_rows()))
            } else {
                let cell_cfg = match shared_init.as_ref().and_then(|inits| inits[g].clone()) {
                    Some(z) => FitConfig { init: InitStrategy::Provided(z), ..cfg.clone() },
                    // cells the tree cannot seed fall back to the per-cell
                    // initializer, which reports the proper error
                    None => cfg.clone(),
                };
                fit(data, spec, g, &cell_cfg).map_err(|e| e.to_string())
            };
            (spec, g, outcome, started.elapsed().as_secs_f64())
        })
        .collect();

    let mut fitted: Vec<(FittedModel, f64, f64)> = Vec::new(); // (fit, prior, seconds)
    let mut failed: Vec<EnsembleModel> = Vec::new();
    for (idx, (spec, g, outcome, seconds)) in results.into_iter().enumerate() {
        match outcome {
            Ok(m) => fitted.push((m, priors[idx], seconds)),
            Err(message) => failed.push(EnsembleModel {
                spec,
                n_components: g,
                prior: priors[idx],
                weight: 0.0,
                fit_seconds: seconds,
                outcome: FitOutcome::Failed { message },
            }),
        }
    }
    if fitted.is_empty() {
        return Err(Error::AllModelsFailed);
    }

    // stable sort by descending BIC keeps grid order among exact ties
    fitted.sort_by(|a, b| b.0.bic.partial_cmp(&a.0.bic).unwrap());
    let bics: Vec<f64> = fitted.iter().map(|(m, _, _)| m.bic).collect();
    let f_priors: Vec<f64> = fitted.iter().map(|(_, p, _)| *p).collect();
    let weights = posterior_model_probs(&bics, &f_priors)?;

    let mut models: Vec<EnsembleModel> = fitted
        .into_iter()
        .zip(weights)
        .map(|((m, prior, fit_seconds), weight)| EnsembleModel {
            spec: m.spec,
            n_components: m.n_components,
            prior,
            weight,
            fit_seconds,
            outcome: FitOutcome::Fitted(m),
        })
        .collect();
    models.extend(failed);

    Ok(ModelEnsemble {
        models,
        n_observations: data.n_rows(),
        dim: data.dim(),
        data_fingerprint: data.fingerprint(),
    })
}

/// Ward tree built once; index g holds the hard responsibilities for g
/// groups (index 0 unused). Cells the data cannot seed (too few distinct
/// rows, or g beyond N) hold None.
fn precompute_hierarchical_inits(
    data: &DataMatrix,
    grid: &ModelGrid,
) -> Vec<Option<ResponsibilityMatrix>> {
    let n = data.n_rows();
    let max_g = grid.max_clusters().min(n);
    let m = data.matrix();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for c in 0..data.dim() {
                let diff = m[(i, c)] - m[(j, c)];
                acc += diff * diff;
            }
            dist[i * n + j] = acc;
            dist[j * n + i] = acc;
        }
    }
    let tree = hclust::agglomerate(&dist, n, hclust::LinkageMethod::Ward);
    let distinct = data.distinct_rows();
    let mut out = vec![None];
    for g in 1..=max_g {
        if g > 1 && distinct < g {
            out.push(None);
        } else {
            let labels = hclust::labels_at(&tree, g);
            out.push(Some(ResponsibilityMatrix::hard(&labels, g).expect("hard labels are valid")));
        }
    }
    out.resize(grid.max_clusters() + 1, None);
    out
}

/// Serialized form of one ensemble entry.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelRecord {
    pub spec: String,
    pub g: usize,
    pub weight: f64,
    pub prior: f64,
    pub converged: Option<bool>,
    pub kappa: Option<usize>,
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
    /// Component parameters (weights, means, covariance rows) for fitted
    /// models, so densities can be rebuilt without refitting.
    pub params: Option<ParamsRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub tau: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EnsembleDocument {
    pub n: usize,
    pub d: usize,
    pub data_sha256: String,
    pub models: Vec<ModelRecord>,
}

impl ModelEnsemble {
    pub fn to_document(&self) -> EnsembleDocument {
        let models = self
            .models
            .iter()
            .map(|m| match &m.outcome {
                FitOutcome::Fitted(f) => ModelRecord {
                    spec: m.spec.name().to_string(),
                    g: m.n_components,
                    weight: m.weight,
                    prior: m.prior,
                    converged: Some(f.converged),
                    kappa: Some(f.kappa),
                    loglik: Some(f.loglik),
                    bic: Some(f.bic),
                    iterations: Some(f.iterations),
                    error: None,
                    params: Some(ParamsRecord {
                        tau: f.params.weights().to_vec(),
                        means: (0..f.params.n_components())
                            .map(|k| f.params.mean(k).iter().cloned().collect())
                            .collect(),
                        covariances: (0..f.params.n_components())
                            .map(|k| {
                                let s = f.params.covariance(k);
                                (0..s.nrows())
                                    .map(|r| (0..s.ncols()).map(|c| s[(r, c)]).collect())
                                    .collect()
                            })
                            .collect(),
                    }),
                },
                FitOutcome::Failed { message } => ModelRecord {
                    spec: m.spec.name().to_string(),
                    g: m.n_components,
                    weight: 0.0,
                    prior: m.prior,
                    converged: None,
                    kappa: None,
                    loglik: None,
                    bic: None,
                    iterations: None,
                    error: Some(message.clone()),
                    params: None,
                },
            })
            .collect();
        EnsembleDocument {
            n: self.n_observations,
            d: self.dim,
            data_sha256: self.data_fingerprint.clone(),
            models,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

impl EnsembleDocument {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read ensemble {}: {e}", path.display()))
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn record_params(rec: &ModelRecord) -> Result<crate::params::MixtureParams> {
        let p = rec
            .params
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("model {}/{} has no parameters", rec.spec, rec.g)))?;
        let means: Vec<nalgebra::DVector<f64>> =
            p.means.iter().map(|m| nalgebra::DVector::from_vec(m.clone())).collect();
        let covs: Vec<nalgebra::DMatrix<f64>> = p
            .covariances
            .iter()
            .map(|rows| {
                let d = rows.len();
                nalgebra::DMatrix::from_fn(d, d, |i, j| rows[i][j])
            })
            .collect();
        crate::params::MixtureParams::from_covariances(p.tau.clone(), means, covs)
    }

    /// (weight, parameters) of every fitted model with positive weight.
    pub fn weighted_params(&self) -> Result<Vec<(f64, crate::params::MixtureParams)>> {
        let mut out = Vec::new();
        for rec in &self.models {
            if rec.error.is_some() || rec.weight == 0.0 {
                continue;
            }
            out.push((rec.weight, Self::record_params(rec)?));
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("ensemble document has no usable models".into()));
        }
        Ok(out)
    }

    /// Parameters of the highest-BIC fitted model.
    pub fn best_params(&self) -> Result<crate::params::MixtureParams> {
        let best = self
            .models
            .iter()
            .filter(|r| r.error.is_none() && r.bic.is_some())
            .max_by(|a, b| a.bic.unwrap().partial_cmp(&b.bic.unwrap()).unwrap())
            .ok_or_else(|| Error::InvalidInput("ensemble document has no fitted models".into()))?;
        Self::record_params(best)
    }

    /// Fitted (spec, g, weight) triples in document order.
    pub fn fitted_specs(&self) -> Result<Vec<(CovarianceSpec, usize, f64)>> {
        let mut out = Vec::new();
        for rec in &self.models {
            if rec.error.is_some() {
                continue;
            }
            out.push((CovarianceSpec::from_name(&rec.spec)?, rec.g, rec.weight));
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("ensemble document has no fitted models".into()));
        }
        Ok(out)
    }
}
