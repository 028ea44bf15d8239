//! Pure evaluation of finite normal mixture densities.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, pairwise_sum};
use crate::params::MixtureParams;

const LN_2PI: f64 = 1.8378770664093453;

/// Log of the normal density of component `g` at `x`, via the cached
/// Cholesky factor: -(d ln 2pi + ln det sigma + ||L^-1 (x - mu)||^2) / 2.
pub(crate) fn component_log_density(params: &MixtureParams, g: usize, x: &DVector<f64>) -> f64 {
    let centered = x - params.mean(g);
    let v = params
        .chol_lower(g)
        .solve_lower_triangular(&centered)
        .expect("cholesky factor has positive diagonal");
    -0.5 * (params.dim() as f64 * LN_2PI + params.log_det(g) + v.norm_squared())
}

/// N x G matrix of ln(tau_g) + ln(phi_g(x_i)); the backbone of both the
/// responsibility update and the observed log-likelihood.
pub(crate) fn weighted_log_density_matrix(params: &MixtureParams, data: &DataMatrix) -> DMatrix<f64> {
    let n = data.n_rows();
    let g = params.n_components();
    let d = params.dim() as f64;
    let mut out = DMatrix::zeros(n, g);
    // One triangular solve per component over all points at once.
    let xt = data.matrix().transpose();
    for k in 0..g {
        let mut centered = xt.clone();
        let mu = params.mean(k);
        for mut col in centered.column_iter_mut() {
            col -= mu;
        }
        let v = params
            .chol_lower(k)
            .solve_lower_triangular(&centered)
            .expect("cholesky factor has positive diagonal");
        let base = params.weights()[k].ln() - 0.5 * (d * LN_2PI + params.log_det(k));
        for (i, col) in v.column_iter().enumerate() {
            out[(i, k)] = base - 0.5 * col.norm_squared();
        }
    }
    out
}

/// Mixture density sum tau_g phi(x | mu_g, sigma_g) at one point.
pub fn mixture_density(params: &MixtureParams, x: &DVector<f64>) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has dimension {}, mixture has {}",
            x.len(),
            params.dim()
        )));
    }
    Ok(log_mixture_density_unchecked(params, x).exp())
}

/// ln of the mixture density; used directly where products of many densities
/// would underflow.
pub fn log_mixture_density(params: &MixtureParams, x: &DVector<f64>) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has dimension {}, mixture has {}",
            x.len(),
            params.dim()
        )));
    }
    Ok(log_mixture_density_unchecked(params, x))
}

pub(crate) fn log_mixture_density_unchecked(params: &MixtureParams, x: &DVector<f64>) -> f64 {
    let terms: Vec<f64> = (0..params.n_components())
        .map(|g| params.weights()[g].ln() + component_log_density(params, g, x))
        .collect();
    log_sum_exp(&terms)
}

/// Observed log-likelihood sum_i ln f(x_i), accumulated stably.
pub fn log_likelihood(params: &MixtureParams, data: &DataMatrix) -> Result<f64> {
    if data.dim() != params.dim() {
        return Err(Error::DimensionMismatch(format!(
            "data has dimension {}, mixture has {}",
            data.dim(),
            params.dim()
        )));
    }
    let lp = weighted_log_density_matrix(params, data);
    let mut rows = Vec::with_capacity(data.n_rows());
    for i in 0..data.n_rows() {
        let terms: Vec<f64> = (0..params.n_components()).map(|g| lp[(i, g)]).collect();
        let v = log_sum_exp(&terms);
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "log-density is {v} at data row {i}"
            )));
        }
        rows.push(v);
    }
    Ok(pairwise_sum(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian_2d() -> MixtureParams {
        MixtureParams::from_covariances(
            vec![1.0],
            vec![DVector::zeros(2)],
            vec![DMatrix::from_row_slice(2, 2, &[1.25, 0.75, 0.75, 1.25])],
        )
        .unwrap()
    }

    #[test]
    fn density_at_mean_of_unit_determinant_gaussian() {
        // det = 1.25^2 - 0.75^2 = 1, so the peak is 1/(2 pi)
        let p = gaussian_2d();
        let v = mixture_density(&p, &DVector::zeros(2)).unwrap();
        assert_relative_eq!(v, 0.15915494309189535, epsilon = 1e-14);
    }

    #[test]
    fn duplicated_component_matches_single() {
        let single = gaussian_2d();
        let sigma = DMatrix::from_row_slice(2, 2, &[1.25, 0.75, 0.75, 1.25]);
        let double = MixtureParams::from_covariances(
            vec![0.5, 0.5],
            vec![DVector::zeros(2), DVector::zeros(2)],
            vec![sigma.clone(), sigma],
        )
        .unwrap();
        for x in [
            DVector::zeros(2),
            DVector::from_vec(vec![1.0, -0.5]),
            DVector::from_vec(vec![-3.0, 2.0]),
        ] {
            let a = mixture_density(&single, &x).unwrap();
            let b = mixture_density(&double, &x).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn bimodal_value_frozen_from_independent_evaluation() {
        // Two equally weighted components at +-(0.5303301, 0.5303301) with
        // covariance [[0.6804138, -0.4082483], [-0.4082483, 0.6804138]];
        // the value at the origin was computed separately with 30-digit
        // arithmetic.
        let sigma = DMatrix::from_row_slice(2, 2, &[0.6804138, -0.4082483, -0.4082483, 0.6804138]);
        let m = 0.5303301;
        let p = MixtureParams::from_covariances(
            vec![0.5, 0.5],
            vec![DVector::from_vec(vec![-m, -m]), DVector::from_vec(vec![m, m])],
            vec![sigma.clone(), sigma],
        )
        .unwrap();
        let v = mixture_density(&p, &DVector::zeros(2)).unwrap();
        assert_relative_eq!(v, 0.10403186903960484, epsilon = 1e-12);
    }

    #[test]
    fn density_rejects_dimension_mismatch() {
        let p = gaussian_2d();
        assert!(mixture_density(&p, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn log_likelihood_of_single_point_at_standard_normal_mean() {
        let p = MixtureParams::standard_normal(2);
        let data = DataMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let ll = log_likelihood(&p, &data).unwrap();
        assert_relative_eq!(ll, -1.8378770664093453, epsilon = 1e-14);
    }

    #[test]
    fn log_likelihood_is_additive_over_identical_points() {
        let p = MixtureParams::standard_normal(2);
        let one = DataMatrix::from_rows(&[vec![0.3, -0.4]]).unwrap();
        let two = DataMatrix::from_rows(&[vec![0.3, -0.4], vec![0.3, -0.4]]).unwrap();
        let a = log_likelihood(&p, &one).unwrap();
        let b = log_likelihood(&p, &two).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn log_likelihood_matches_bruteforce_on_trimodal_sample() {
        let p = crate::simgen::catalog(crate::simgen::DensityId::Trimodal);
        let data = crate::simgen::sample(
            &p,
            10,
            &crate::rng::StreamKey::new(11, 0, crate::rng::StreamRole::Sample),
        );
        let fast = log_likelihood(&p, &data).unwrap();
        let brute: f64 = (0..data.n_rows())
            .map(|i| mixture_density(&p, &data.row(i)).unwrap().ln())
            .sum();
        assert_relative_eq!(fast, brute, epsilon = 1e-10);
    }

    #[test]
    fn log_likelihood_invariant_under_component_relabeling() {
        let p = crate::simgen::catalog(crate::simgen::DensityId::Claw);
        let perm = vec![3, 0, 5, 1, 4, 2];
        let q = p.permuted(&perm);
        let data = crate::simgen::sample(
            &p,
            40,
            &crate::rng::StreamKey::new(5, 0, crate::rng::StreamRole::Sample),
        );
        let a = log_likelihood(&p, &data).unwrap();
        let b = log_likelihood(&q, &data).unwrap();
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn non_finite_log_density_reports_the_row() {
        let p = MixtureParams::standard_normal(1);
        let data = DataMatrix::from_rows(&[vec![0.5], vec![1e200], vec![0.1]]).unwrap();
        match log_likelihood(&p, &data) {
            Err(crate::error::Error::Numeric(msg)) => assert!(msg.contains("row 1"), "{msg}"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn density_integrates_to_one_on_wide_grid() {
        // trapezoid quadrature over +-8 mixture standard deviations
        for id in [crate::simgen::DensityId::Gaussian, crate::simgen::DensityId::Claw] {
            let p = crate::simgen::catalog(id);
            let cov = p.mixture_covariance();
            let mean = p.mixture_mean();
            let nodes = 320;
            let (sx, sy) = (cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt());
            let (x0, x1) = (mean[0] - 8.0 * sx, mean[0] + 8.0 * sx);
            let (y0, y1) = (mean[1] - 8.0 * sy, mean[1] + 8.0 * sy);
            let hx = (x1 - x0) / (nodes - 1) as f64;
            let hy = (y1 - y0) / (nodes - 1) as f64;
            let mut total = 0.0;
            for i in 0..nodes {
                let wx = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
                for j in 0..nodes {
                    let wy = if j == 0 || j == nodes - 1 { 0.5 } else { 1.0 };
                    let x = DVector::from_vec(vec![x0 + hx * i as f64, y0 + hy * j as f64]);
                    total += wx * wy * mixture_density(&p, &x).unwrap();
                }
            }
            total *= hx * hy;
            assert!((total - 1.0).abs() < 1e-3, "{id:?} integrates to {total}");
        }
    }
}
