//! Integrated-squared-error and Kullback-Leibler benchmarking of density
//! estimates against a known truth.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::density::DensityEstimate;
use crate::error::{Error, Result};
use crate::mixture::log_mixture_density_unchecked;
use crate::numeric::pairwise_sum;
use crate::params::MixtureParams;
use crate::rng::StreamKey;
use crate::simgen::sample_with_rng;

/// Density floor for the logarithm in the KL integrand; keeps far-tail
/// underflow from producing -inf.
const DENSITY_FLOOR: f64 = 1e-300;

/// Monte Carlo draws are produced and accumulated in fixed-size batches;
/// batch b uses sub-stream b of the metric's key, and batch sums combine by
/// balanced-tree summation, so serial and parallel runs of the same seed
/// match bit for bit.
const MC_BATCH: usize = 4096;

/// How an integrated squared error is computed.
#[derive(Debug, Clone)]
pub enum MiseMethod {
    /// Tensor trapezoid grid over mean +- `extent_sds` per-axis standard
    /// deviations of the truth; for 1 and 2 dimensions.
    Quadrature { nodes_per_axis: usize, extent_sds: f64 },
    /// Self-normalized-free importance sampling with proposal = truth with
    /// covariances inflated by `inflation`^2; for 3+ dimensions.
    ImportanceMc { n_samples: usize, key: StreamKey, inflation: f64 },
}

impl MiseMethod {
    /// The dimension-appropriate default: a 400-node-per-axis grid over
    /// +-6 standard deviations below 3 dimensions, 1e5 importance draws
    /// otherwise.
    pub fn auto(dim: usize, key: StreamKey) -> Self {
        if dim <= 2 {
            MiseMethod::Quadrature { nodes_per_axis: 400, extent_sds: 6.0 }
        } else {
            MiseMethod::ImportanceMc { n_samples: 100_000, key, inflation: 1.5 }
        }
    }
}

/// One computed metric.
#[derive(Debug, Clone)]
pub struct MetricResult {
    pub value: f64,
    /// Monte Carlo standard error; absent for quadrature.
    pub stderr: Option<f64>,
    /// Grid nodes or Monte Carlo draws used.
    pub n: u64,
    /// How many density evaluations hit the log floor (KL only).
    pub clamped: u64,
}

/// Integrated squared error between the truth mixture and an estimate.
pub fn estimate_mise(
    truth: &MixtureParams,
    estimate: &DensityEstimate,
    method: &MiseMethod,
) -> Result<MetricResult> {
    if truth.dim() != estimate.dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth has dimension {}, estimate has {}",
            truth.dim(),
            estimate.dim()
        )));
    }
    match method {
        MiseMethod::Quadrature { nodes_per_axis, extent_sds } => {
            ise_quadrature(truth, estimate, *nodes_per_axis, *extent_sds)
        }
        MiseMethod::ImportanceMc { n_samples, key, inflation } => {
            ise_importance(truth, estimate, *n_samples, key, *inflation)
        }
    }
}

fn ise_quadrature(
    truth: &MixtureParams,
    estimate: &DensityEstimate,
    nodes: usize,
    extent_sds: f64,
) -> Result<MetricResult> {
    let d = truth.dim();
    if d > 2 {
        return Err(Error::InvalidInput(format!(
            "quadrature is limited to 1 or 2 dimensions, got {d}"
        )));
    }
    if nodes < 2 {
        return Err(Error::InvalidInput("need at least two nodes per axis".into()));
    }
    let mean = truth.mixture_mean();
    let cov = truth.mixture_covariance();
    let axis = |c: usize| {
        let sd = cov[(c, c)].sqrt();
        let lo = mean[c] - extent_sds * sd;
        let hi = mean[c] + extent_sds * sd;
        let h = (hi - lo) / (nodes - 1) as f64;
        (lo, h)
    };
    let truth_est = DensityEstimate::from_weighted_models(vec![(1.0, truth.clone())])?;

    let row_sum = |points: &[DVector<f64>], weights: &[f64]| -> Result<f64> {
        let f = truth_est.densities(points)?;
        let g = estimate.densities(points)?;
        let terms: Vec<f64> = f
            .iter()
            .zip(&g)
            .zip(weights)
            .map(|((&f, &g), &w)| w * (f - g) * (f - g))
            .collect();
        Ok(pairwise_sum(&terms))
    };

    let trapezoid_w = |i: usize| if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };

    let value = if d == 1 {
        let (lo, h) = axis(0);
        let points: Vec<DVector<f64>> =
            (0..nodes).map(|i| DVector::from_vec(vec![lo + h * i as f64])).collect();
        let weights: Vec<f64> = (0..nodes).map(trapezoid_w).collect();
        row_sum(&points, &weights)? * h
    } else {
        let (lx, hx) = axis(0);
        let (ly, hy) = axis(1);
        let rows: Vec<Result<f64>> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let x = lx + hx * i as f64;
                let points: Vec<DVector<f64>> = (0..nodes)
                    .map(|j| DVector::from_vec(vec![x, ly + hy * j as f64]))
                    .collect();
                let weights: Vec<f64> = (0..nodes).map(|j| trapezoid_w(i) * trapezoid_w(j)).collect();
                row_sum(&points, &weights)
            })
            .collect();
        let rows: Result<Vec<f64>> = rows.into_iter().collect();
        pairwise_sum(&rows?) * hx * hy
    };

    Ok(MetricResult {
        value,
        stderr: None,
        n: (if d == 1 { nodes } else { nodes * nodes }) as u64,
        clamped: 0,
    })
}

/// Proposal for the importance estimate: the truth with every covariance
/// scaled by `inflation`^2 (same means and proportions).
fn inflated(truth: &MixtureParams, inflation: f64) -> MixtureParams {
    let g = truth.n_components();
    let covs: Vec<DMatrix<f64>> = (0..g)
        .map(|k| truth.covariance(k) * (inflation * inflation))
        .collect();
    let means: Vec<DVector<f64>> = (0..g).map(|k| truth.mean(k).clone()).collect();
    MixtureParams::from_covariances(truth.weights().to_vec(), means, covs)
        .expect("scaling an SPD matrix keeps it SPD")
}

fn ise_importance(
    truth: &MixtureParams,
    estimate: &DensityEstimate,
    n_samples: usize,
    key: &StreamKey,
    inflation: f64,
) -> Result<MetricResult> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    let proposal = inflated(truth, inflation);
    let truth_est = DensityEstimate::from_weighted_models(vec![(1.0, truth.clone())])?;
    let proposal_est = DensityEstimate::from_weighted_models(vec![(1.0, proposal.clone())])?;
    let n_batches = n_samples.div_ceil(MC_BATCH);

    let batch_stats: Vec<(f64, f64)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let take = if b == n_batches - 1 { n_samples - b * MC_BATCH } else { MC_BATCH };
            let mut rng = key.batch(b as u64);
            let xs = sample_with_rng(&proposal, take, &mut rng).points();
            let f = truth_est.densities(&xs).expect("dimensions agree");
            let g = estimate.densities(&xs).expect("dimensions agree");
            let q = proposal_est.densities(&xs).expect("dimensions agree");
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for i in 0..take {
                let term = (f[i] - g[i]) * (f[i] - g[i]) / q[i];
                sum += term;
                sumsq += term * term;
            }
            (sum, sumsq)
        })
        .collect();

    let sums: Vec<f64> = batch_stats.iter().map(|s| s.0).collect();
    let sumsqs: Vec<f64> = batch_stats.iter().map(|s| s.1).collect();
    let n = n_samples as f64;
    let mean = pairwise_sum(&sums) / n;
    let var = (pairwise_sum(&sumsqs) / n - mean * mean).max(0.0);
    Ok(MetricResult {
        value: mean,
        stderr: Some((var / n).sqrt()),
        n: n_samples as u64,
        clamped: 0,
    })
}

/// Kullback-Leibler divergence from the truth to the estimate, by Monte
/// Carlo over truth draws: mean of ln f(X) - ln max(fhat(X), floor).
pub fn estimate_kl(
    truth: &MixtureParams,
    estimate: &DensityEstimate,
    n_mc: usize,
    key: &StreamKey,
) -> Result<MetricResult> {
    if truth.dim() != estimate.dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth has dimension {}, estimate has {}",
            truth.dim(),
            estimate.dim()
        )));
    }
    if n_mc == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    let n_batches = n_mc.div_ceil(MC_BATCH);
    let batch_stats: Vec<(f64, f64, u64)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let take = if b == n_batches - 1 { n_mc - b * MC_BATCH } else { MC_BATCH };
            let mut rng = key.batch(b as u64);
            let xs = sample_with_rng(truth, take, &mut rng);
            let pts = xs.points();
            let g_all = estimate.densities(&pts).expect("dimensions agree");
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut clamped = 0u64;
            for (i, x) in pts.iter().enumerate() {
                // the truth side stays in log space: its own draws cannot
                // underflow it, and log-sum-exp keeps full precision
                let lf = log_mixture_density_unchecked(truth, x);
                let g = if g_all[i] < DENSITY_FLOOR {
                    clamped += 1;
                    DENSITY_FLOOR
                } else {
                    g_all[i]
                };
                let term = lf - g.ln();
                sum += term;
                sumsq += term * term;
            }
            (sum, sumsq, clamped)
        })
        .collect();

    let sums: Vec<f64> = batch_stats.iter().map(|s| s.0).collect();
    let sumsqs: Vec<f64> = batch_stats.iter().map(|s| s.1).collect();
    let clamped: u64 = batch_stats.iter().map(|s| s.2).sum();
    let n = n_mc as f64;
    let mean = pairwise_sum(&sums) / n;
    let var = (pairwise_sum(&sumsqs) / n - mean * mean).max(0.0);
    Ok(MetricResult {
        value: mean,
        stderr: Some((var / n).sqrt()),
        n: n_mc as u64,
        clamped,
    })
}

/// One row of a benchmark report.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub truth_id: String,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: u64,
    pub seed: u64,
}

/// CSV with the fixed column set truth_id, estimator, metric, value,
/// stderr, n, seed.
pub fn eval_rows_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from("truth_id,estimator,metric,value,stderr,n,seed\n");
    for r in rows {
        let se = r.stderr.map(|s| format!("{s}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.truth_id, r.estimator, r.metric, r.value, se, r.n, r.seed
        );
    }
    out
}

/// Convenience wrapper used by the command layer: MISE and KL of one
/// estimate against a catalog truth.
pub fn evaluate_estimate(
    truth: &MixtureParams,
    truth_id: &str,
    estimate: &DensityEstimate,
    seed: u64,
    replicate: u64,
    n_mc: usize,
) -> Result<Vec<EvalRow>> {
    let mise_key = StreamKey::new(seed, replicate, crate::rng::StreamRole::MiseSampling);
    let kl_key = StreamKey::new(seed, replicate, crate::rng::StreamRole::KlSampling);
    let mut method = MiseMethod::auto(truth.dim(), mise_key);
    if let MiseMethod::ImportanceMc { n_samples, .. } = &mut method {
        *n_samples = n_mc;
    }
    let mise = estimate_mise(truth, estimate, &method)?;
    let kl = estimate_kl(truth, estimate, n_mc, &kl_key)?;
    Ok(vec![
        EvalRow {
            truth_id: truth_id.to_string(),
            estimator: estimate.kind_name().to_string(),
            metric: "mise".into(),
            value: mise.value,
            stderr: mise.stderr,
            n: mise.n,
            seed,
        },
        EvalRow {
            truth_id: truth_id.to_string(),
            estimator: estimate.kind_name().to_string(),
            metric: "kl".into(),
            value: kl.value,
            stderr: kl.stderr,
            n: kl.n,
            seed,
        },
    ])
}

/// Sample a dataset from the truth (the standard replicate stream).
pub fn replicate_sample(truth: &MixtureParams, n: usize, seed: u64, replicate: u64) -> DataMatrix {
    crate::simgen::sample(
        truth,
        n,
        &StreamKey::new(seed, replicate, crate::rng::StreamRole::Sample),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRole;
    use crate::simgen::{catalog, DensityId};
    use approx::assert_relative_eq;

    fn shifted_1d(delta: f64) -> MixtureParams {
        MixtureParams::from_covariances(
            vec![1.0],
            vec![DVector::from_vec(vec![delta])],
            vec![DMatrix::identity(1, 1)],
        )
        .unwrap()
    }

    fn as_estimate(p: &MixtureParams) -> DensityEstimate {
        DensityEstimate::from_weighted_models(vec![(1.0, p.clone())]).unwrap()
    }

    #[test]
    fn ise_of_truth_against_itself_is_zero() {
        let truth = catalog(DensityId::Gaussian);
        let est = as_estimate(&truth);
        let r = estimate_mise(
            &truth,
            &est,
            &MiseMethod::Quadrature { nodes_per_axis: 400, extent_sds: 6.0 },
        )
        .unwrap();
        assert!(r.value.abs() < 1e-8, "self-ISE {}", r.value);
    }

    #[test]
    fn shifted_gaussian_ise_matches_closed_form() {
        // ISE between N(0,1) and N(delta,1) is (1 - exp(-delta^2/4))/sqrt(pi);
        // at delta = 1 that is 0.12479829408003389 (high-precision evaluation)
        let truth = shifted_1d(0.0);
        let est = as_estimate(&shifted_1d(1.0));
        let r = estimate_mise(
            &truth,
            &est,
            &MiseMethod::Quadrature { nodes_per_axis: 400, extent_sds: 6.0 },
        )
        .unwrap();
        assert!(
            (r.value - 0.12479829408003389).abs() < 1e-3,
            "quadrature ISE {}",
            r.value
        );
    }

    #[test]
    fn importance_mc_agrees_with_quadrature_in_2d() {
        let truth = catalog(DensityId::Bimodal);
        let est = as_estimate(&catalog(DensityId::Gaussian));
        let quad = estimate_mise(
            &truth,
            &est,
            &MiseMethod::Quadrature { nodes_per_axis: 400, extent_sds: 6.0 },
        )
        .unwrap();
        let mc = estimate_mise(
            &truth,
            &est,
            &MiseMethod::ImportanceMc {
                n_samples: 200_000,
                key: StreamKey::new(4, 0, StreamRole::MiseSampling),
                inflation: 1.5,
            },
        )
        .unwrap();
        let se = mc.stderr.unwrap();
        assert!(
            (mc.value - quad.value).abs() <= 3.0 * se,
            "mc {} vs quad {} (se {se})",
            mc.value,
            quad.value
        );
    }

    #[test]
    fn mc_batching_is_order_independent_bitwise() {
        let truth = catalog(DensityId::Trimodal);
        let est = as_estimate(&catalog(DensityId::Gaussian));
        let key = StreamKey::new(9, 3, StreamRole::MiseSampling);
        let m = MiseMethod::ImportanceMc { n_samples: 10_000, key, inflation: 1.5 };
        let a = estimate_mise(&truth, &est, &m).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate_mise(&truth, &est, &m).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.unwrap().to_bits(), b.stderr.unwrap().to_bits());
    }

    #[test]
    fn kl_of_truth_against_itself_is_zero_within_error() {
        let truth = catalog(DensityId::Claw);
        let est = as_estimate(&truth);
        let r = estimate_kl(&truth, &est, 50_000, &StreamKey::new(5, 0, StreamRole::KlSampling)).unwrap();
        let se = r.stderr.unwrap();
        assert!(r.value.abs() <= 3.0 * se.max(1e-12), "self-KL {} (se {se})", r.value);
        assert_eq!(r.clamped, 0);
    }

    #[test]
    fn gaussian_kl_matches_analytic_value() {
        // KL(N(0,1) || N(0,2)) = (1/2 + ln 2 - 1)/2 = 0.09657359027997265
        let truth = shifted_1d(0.0);
        let wide = MixtureParams::from_covariances(
            vec![1.0],
            vec![DVector::zeros(1)],
            vec![DMatrix::identity(1, 1) * 2.0],
        )
        .unwrap();
        let est = as_estimate(&wide);
        let r = estimate_kl(&truth, &est, 100_000, &StreamKey::new(6, 0, StreamRole::KlSampling)).unwrap();
        let se = r.stderr.unwrap();
        assert!(
            (r.value - 0.09657359027997265).abs() <= 3.0 * se,
            "KL {} (se {se})",
            r.value
        );
    }

    #[test]
    fn mise_is_symmetric_kl_is_not() {
        let a = shifted_1d(0.0);
        let b = MixtureParams::from_covariances(
            vec![1.0],
            vec![DVector::zeros(1)],
            vec![DMatrix::identity(1, 1) * 2.0],
        )
        .unwrap();
        let q = MiseMethod::Quadrature { nodes_per_axis: 400, extent_sds: 8.0 };
        let ab = estimate_mise(&a, &as_estimate(&b), &q).unwrap().value;
        let ba = estimate_mise(&b, &as_estimate(&a), &q).unwrap().value;
        assert_relative_eq!(ab, ba, max_relative = 1e-6);

        let kl_ab = estimate_kl(&a, &as_estimate(&b), 200_000, &StreamKey::new(7, 0, StreamRole::KlSampling))
            .unwrap()
            .value;
        let kl_ba = estimate_kl(&b, &as_estimate(&a), 200_000, &StreamKey::new(8, 0, StreamRole::KlSampling))
            .unwrap()
            .value;
        // analytic: 0.0966 one way, 0.1534 the other
        assert!((kl_ab - kl_ba).abs() > 0.03, "{kl_ab} vs {kl_ba}");
    }

    #[test]
    fn averaged_estimate_kl_on_kurtotic_sweep_has_tight_error() {
        let truth = catalog(DensityId::Kurtotic);
        let data = crate::simgen::sample(&truth, 250, &StreamKey::new(66, 0, StreamRole::Sample));
        let ens = crate::selection::sweep(
            &data,
            &crate::selection::ModelGrid::default(),
            &crate::em::FitConfig::default(),
        )
        .unwrap();
        let est = DensityEstimate::averaged(&ens).unwrap();
        let r = estimate_kl(&truth, &est, 100_000, &StreamKey::new(66, 0, StreamRole::KlSampling)).unwrap();
        assert!(r.value.is_finite() && r.value > 0.0, "KL {}", r.value);
        let rel_se = r.stderr.unwrap() / r.value;
        assert!(rel_se < 0.05, "relative standard error {rel_se}");
    }

    #[test]
    fn clamping_is_counted_not_fatal() {
        let truth = shifted_1d(0.0);
        // a spike estimate centred far away underflows at truth draws
        let spike = MixtureParams::from_covariances(
            vec![1.0],
            vec![DVector::from_vec(vec![1e6])],
            vec![DMatrix::identity(1, 1) * 1e-8],
        )
        .unwrap();
        let r = estimate_kl(&truth, &as_estimate(&spike), 2_000, &StreamKey::new(9, 0, StreamRole::KlSampling))
            .unwrap();
        assert!(r.clamped > 0);
        assert!(r.value.is_finite());
    }

    #[test]
    fn quadrature_and_mc_agree_on_all_catalog_densities() {
        // one estimate (the single gaussian) against every catalog truth
        let est = as_estimate(&catalog(DensityId::Gaussian));
        for (i, id) in DensityId::ALL.iter().enumerate() {
            let truth = catalog(*id);
            let q = estimate_mise(
                &truth,
                &est,
                &MiseMethod::Quadrature { nodes_per_axis: 400, extent_sds: 6.0 },
            )
            .unwrap();
            let mc = estimate_mise(
                &truth,
                &est,
                &MiseMethod::ImportanceMc {
                    n_samples: 120_000,
                    key: StreamKey::new(100 + i as u64, 0, StreamRole::MiseSampling),
                    inflation: 1.5,
                },
            )
            .unwrap();
            let se = mc.stderr.unwrap();
            assert!(
                (mc.value - q.value).abs() <= 3.0 * se + 1e-6,
                "{id:?}: mc {} vs quad {} (se {se})",
                mc.value,
                q.value
            );
        }
    }
}
