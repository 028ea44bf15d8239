use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};

use crate::cov::{Constraint, CovarianceSpec};
use crate::data::DataMatrix;
use crate::em::{e_step, fit, initialize, m_step, FitConfig, InitStrategy};
use crate::params::{MixtureParams, ResponsibilityMatrix};
use crate::rng::{StreamKey, StreamRole};
use crate::simgen;

// ---------------------------------------------------------------------
// oracles (independent of the implementation under test)

/// Expected complete-data log-likelihood sum_ig z_ig [ln tau_g + ln phi_g(x_i)],
/// evaluated directly from covariance matrices.
fn ecll(data: &DataMatrix, z: &ResponsibilityMatrix, tau: &[f64], means: &[DVector<f64>], covs: &[DMatrix<f64>]) -> f64 {
    let d = data.dim() as f64;
    let mut total = 0.0;
    for k in 0..tau.len() {
        let inv = covs[k].clone().try_inverse().unwrap();
        let logdet = covs[k].determinant().ln();
        for i in 0..data.n_rows() {
            let w = z.matrix()[(i, k)];
            if w == 0.0 {
                continue;
            }
            let c = data.row(i) - &means[k];
            let q = (c.transpose() * &inv * &c)[0];
            total += w * (tau[k].ln() - 0.5 * (d * (2.0 * std::f64::consts::PI).ln() + logdet + q));
        }
    }
    total
}

fn rotation(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
}

// ---------------------------------------------------------------------
// E-step

#[test]
fn single_component_responsibilities_are_one() {
    let p = MixtureParams::standard_normal(2);
    let data = simgen::sample(&p, 12, &StreamKey::new(1, 0, StreamRole::Sample));
    let z = e_step(&p, &data).unwrap();
    assert!(z.matrix().iter().all(|&v| v == 1.0));
}

#[test]
fn far_side_responsibility_vanishes() {
    let p = MixtureParams::from_covariances(
        vec![0.5, 0.5],
        vec![DVector::from_vec(vec![-10.0]), DVector::from_vec(vec![10.0])],
        vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)],
    )
    .unwrap();
    let data = DataMatrix::from_rows(&[vec![10.0]]).unwrap();
    let z = e_step(&p, &data).unwrap();
    assert!(z.matrix()[(0, 0)] <= 1e-20, "far responsibility {}", z.matrix()[(0, 0)]);
    assert!(z.matrix()[(0, 1)] >= 1.0 - 1e-15);
}

#[test]
fn equidistant_point_splits_exactly_in_half() {
    let p = MixtureParams::from_covariances(
        vec![0.5, 0.5],
        vec![DVector::from_vec(vec![-1.0, 0.0]), DVector::from_vec(vec![1.0, 0.0])],
        vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
    )
    .unwrap();
    let data = DataMatrix::from_rows(&[vec![0.0, 3.0]]).unwrap();
    let z = e_step(&p, &data).unwrap();
    assert_eq!(z.matrix()[(0, 0)], 0.5);
    assert_eq!(z.matrix()[(0, 1)], 0.5);
}

// ---------------------------------------------------------------------
// M-step

fn five_point_data() -> DataMatrix {
    DataMatrix::from_rows(&[
        vec![0.2, 1.1],
        vec![-0.4, 0.3],
        vec![1.7, -0.2],
        vec![2.1, 2.3],
        vec![-1.0, -0.8],
    ])
    .unwrap()
}

#[test]
fn hard_labels_give_per_group_mle_under_vvv() {
    let data = DataMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![2.0, 0.0],
        vec![0.0, 2.0],
        vec![10.0, 10.0],
        vec![12.0, 10.0],
        vec![10.0, 12.0],
        vec![12.0, 12.0],
    ])
    .unwrap();
    let z = ResponsibilityMatrix::hard(&[0, 0, 0, 1, 1, 1, 1], 2).unwrap();
    let p = m_step(&z, &data, CovarianceSpec::VVV, &FitConfig::default()).unwrap();

    // group 0: mean (2/3, 2/3), scatter/3
    assert_relative_eq!(p.mean(0)[0], 2.0 / 3.0, epsilon = 1e-12);
    assert_relative_eq!(p.weights()[0], 3.0 / 7.0, epsilon = 1e-15);
    let mut s0 = DMatrix::zeros(2, 2);
    let mu0 = DVector::from_vec(vec![2.0 / 3.0, 2.0 / 3.0]);
    for i in 0..3 {
        let c = data.row(i) - &mu0;
        s0 += &c * c.transpose();
    }
    s0 /= 3.0;
    assert_relative_eq!((p.covariance(0) - s0).abs().max(), 0.0, epsilon = 1e-10);

    // group 1: mean (11, 11), covariance I
    assert_relative_eq!(p.mean(1)[0], 11.0, epsilon = 1e-12);
    assert_relative_eq!(p.covariance(1)[(0, 0)], 1.0, epsilon = 1e-10);
    assert_relative_eq!(p.covariance(1)[(0, 1)], 0.0, epsilon = 1e-10);
}

#[test]
fn spherical_scale_matches_formula_and_numeric_maximizer() {
    let data = five_point_data();
    let z = ResponsibilityMatrix::new(DMatrix::from_row_slice(
        5,
        2,
        &[0.9, 0.1, 0.6, 0.4, 0.2, 0.8, 0.5, 0.5, 0.3, 0.7],
    ))
    .unwrap();
    let p = m_step(&z, &data, CovarianceSpec::EII, &FitConfig::default()).unwrap();

    // closed form: sigma^2 = sum_g sum_i z_ig ||x_i - mu_g||^2 / (N d)
    let mut expect = 0.0;
    for k in 0..2 {
        for i in 0..5 {
            let c = data.row(i) - p.mean(k);
            expect += z.matrix()[(i, k)] * c.norm_squared();
        }
    }
    expect /= 10.0;
    assert_relative_eq!(p.covariance(0)[(0, 0)], expect, epsilon = 1e-12);
    assert_relative_eq!(p.covariance(1)[(1, 1)], expect, epsilon = 1e-12);
    assert_eq!(p.covariance(0)[(0, 1)], 0.0);

    // golden-section search over sigma^2 of the expected complete-data
    // log-likelihood, means and proportions held at their closed forms
    let tau: Vec<f64> = p.weights().to_vec();
    let means: Vec<DVector<f64>> = (0..2).map(|k| p.mean(k).clone()).collect();
    let obj = |s2: f64| {
        let covs: Vec<DMatrix<f64>> = (0..2).map(|_| DMatrix::identity(2, 2) * s2).collect();
        ecll(&data, &z, &tau, &means, &covs)
    };
    let (mut a, mut b) = (1e-3, 50.0);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if obj(c) > obj(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let argmax = 0.5 * (a + b);
    assert!((argmax - expect).abs() < 1e-6, "numeric argmax {argmax} vs formula {expect}");
}

#[test]
fn vev_update_beats_random_search() {
    let data = DataMatrix::from_rows(&[
        vec![0.4, 1.2],
        vec![-0.8, 0.1],
        vec![1.3, -0.5],
        vec![3.0, 3.4],
        vec![4.1, 2.6],
        vec![2.2, 4.0],
    ])
    .unwrap();
    let z = ResponsibilityMatrix::new(DMatrix::from_row_slice(
        6,
        2,
        &[0.95, 0.05, 0.9, 0.1, 0.85, 0.15, 0.1, 0.9, 0.05, 0.95, 0.2, 0.8],
    ))
    .unwrap();
    let p = m_step(&z, &data, CovarianceSpec::VEV, &FitConfig::default()).unwrap();
    let tau: Vec<f64> = p.weights().to_vec();
    let means: Vec<DVector<f64>> = (0..2).map(|k| p.mean(k).clone()).collect();
    let fitted_covs: Vec<DMatrix<f64>> = (0..2).map(|k| p.covariance(k).clone()).collect();
    let fitted = ecll(&data, &z, &tau, &means, &fitted_covs);

    // random search over valid VEV parameter sets: free volumes, one shared
    // unit-determinant shape, free rotations
    let mut rng = StreamKey::new(77, 0, StreamRole::Init).rng();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let l0 = (rng.next_f64() * 4.0 - 2.0).exp();
        let l1 = (rng.next_f64() * 4.0 - 2.0).exp();
        let a = (rng.next_f64() * 3.0).exp();
        let shape = DVector::from_vec(vec![a, 1.0 / a]);
        let t0 = rng.next_f64() * std::f64::consts::PI;
        let t1 = rng.next_f64() * std::f64::consts::PI;
        let covs = vec![
            crate::params::compose_covariance(l0, &rotation(t0), &shape).unwrap(),
            crate::params::compose_covariance(l1, &rotation(t1), &shape).unwrap(),
        ];
        best = best.max(ecll(&data, &z, &tau, &means, &covs));
    }
    assert!(
        fitted >= best - 1e-9 * (1.0 + best.abs()),
        "m-step {fitted} below random search {best}"
    );
}

#[test]
fn empty_component_is_degenerate() {
    let data = five_point_data();
    let z = ResponsibilityMatrix::new(DMatrix::from_row_slice(
        5,
        2,
        &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
    ))
    .unwrap();
    let err = m_step(&z, &data, CovarianceSpec::VVV, &FitConfig::default()).unwrap_err();
    assert!(matches!(err, crate::error::Error::DegenerateFit(_)));
}

// ---------------------------------------------------------------------
// full fits

#[test]
fn single_component_ellipsoidal_fit_is_the_sample_mle() {
    let truth = simgen::catalog(simgen::DensityId::Gaussian);
    let data = simgen::sample(&truth, 40, &StreamKey::new(9, 0, StreamRole::Sample));
    let m = fit(&data, CovarianceSpec::EEE, 1, &FitConfig::default()).unwrap();
    assert!(m.converged);
    let n = data.n_rows() as f64;
    let mle = data.sample_covariance().unwrap() * ((n - 1.0) / n);
    assert_relative_eq!((m.params.mean(0) - data.mean()).abs().max(), 0.0, epsilon = 1e-12);
    assert_relative_eq!((m.params.covariance(0) - mle).abs().max(), 0.0, epsilon = 1e-10);
}

#[test]
fn separated_bimodal_means_are_recovered() {
    let truth = simgen::catalog(simgen::DensityId::SeparatedBimodal);
    let data = simgen::sample(&truth, 250, &StreamKey::new(17, 0, StreamRole::Sample));
    let m = fit(&data, CovarianceSpec::EEE, 2, &FitConfig::default()).unwrap();
    let mut fitted: Vec<DVector<f64>> = (0..2).map(|k| m.params.mean(k).clone()).collect();
    fitted.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    let want = [-1.06066, 1.06066];
    for (mu, w) in fitted.iter().zip(want) {
        assert!((mu[0] - w).abs() < 0.3, "mean {} vs {w}", mu[0]);
        assert!((mu[1] - w).abs() < 0.3);
    }
}

#[test]
fn iris_vev_two_components_hits_published_bic() {
    let (data, _) = crate::datasets::iris();
    let m = fit(&data, CovarianceSpec::VEV, 2, &FitConfig::default()).unwrap();
    assert!(m.converged);
    assert_eq!(m.kappa, 26);
    assert!((m.bic - -561.73).abs() <= 2.0, "BIC {}", m.bic);
    let m3 = fit(&data, CovarianceSpec::VEV, 3, &FitConfig::default()).unwrap();
    assert!((m3.bic - -562.55).abs() <= 2.0, "BIC {}", m3.bic);
}

#[test]
fn loglik_is_monotone_and_fixed_point_after_convergence() {
    let truth = simgen::catalog(simgen::DensityId::Trimodal);
    let data = simgen::sample(&truth, 90, &StreamKey::new(23, 0, StreamRole::Sample));
    let cfg = FitConfig::default();
    for spec in [CovarianceSpec::VVI, CovarianceSpec::VEV, CovarianceSpec::VVV] {
        let m = fit(&data, spec, 3, &cfg).unwrap();
        for w in m.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{spec}: {} then {}", w[0], w[1]);
        }
        // one more EM iteration moves the log-likelihood by less than rel_tol
        let p2 = m_step(&m.responsibilities, &data, spec, &cfg).unwrap();
        let (_, ll2) = crate::em::e_step_with_loglik(&p2, &data).unwrap();
        assert!(
            (ll2 - m.loglik).abs() < cfg.rel_tol * (1.0 + ll2.abs()),
            "{spec}: {} then {}",
            m.loglik,
            ll2
        );
    }
}

#[test]
fn permuting_initial_labels_permutes_the_fit() {
    let truth = simgen::catalog(simgen::DensityId::Bimodal);
    let data = simgen::sample(&truth, 80, &StreamKey::new(31, 0, StreamRole::Sample));
    let z = initialize(&data, 2, &InitStrategy::HierarchicalAgglomeration).unwrap();
    let swapped = {
        let m = z.matrix();
        let mut s = m.clone();
        s.set_column(0, &m.column(1));
        s.set_column(1, &m.column(0));
        ResponsibilityMatrix::new(s).unwrap()
    };
    let cfg = |z: ResponsibilityMatrix| FitConfig { init: InitStrategy::Provided(z), ..FitConfig::default() };
    let a = fit(&data, CovarianceSpec::VVV, 2, &cfg(z)).unwrap();
    let b = fit(&data, CovarianceSpec::VVV, 2, &cfg(swapped)).unwrap();
    assert!((a.loglik - b.loglik).abs() <= 1e-9);
    assert!((a.bic - b.bic).abs() <= 1e-9);
    assert_relative_eq!((a.params.mean(0) - b.params.mean(1)).abs().max(), 0.0, epsilon = 1e-9);
    assert_relative_eq!((a.params.mean(1) - b.params.mean(0)).abs().max(), 0.0, epsilon = 1e-9);
}

#[test]
fn nested_structures_never_lose_loglik() {
    let truth = simgen::catalog(simgen::DensityId::Trimodal);
    let data = simgen::sample(&truth, 70, &StreamKey::new(37, 0, StreamRole::Sample));
    let z = initialize(&data, 2, &InitStrategy::HierarchicalAgglomeration).unwrap();
    let cfg = FitConfig { init: InitStrategy::Provided(z), ..FitConfig::default() };
    let restricted = fit(&data, CovarianceSpec::EII, 2, &cfg).unwrap();
    let general = fit(&data, CovarianceSpec::VVV, 2, &cfg).unwrap();
    assert!(general.loglik >= restricted.loglik - 1e-6);
}

#[test]
fn fitted_factors_satisfy_their_constraints() {
    let truth = simgen::catalog(simgen::DensityId::Trimodal);
    let data = simgen::sample(&truth, 120, &StreamKey::new(41, 0, StreamRole::Sample));
    for spec in CovarianceSpec::ALL {
        let m = match fit(&data, spec, 3, &FitConfig::default()) {
            Ok(m) => m,
            Err(e) => panic!("{spec} failed: {e}"),
        };
        let covs: Vec<&DMatrix<f64>> = (0..3).map(|k| m.params.covariance(k)).collect();
        let vols: Vec<f64> = covs.iter().map(|s| s.determinant().powf(1.0 / 2.0)).collect();
        let shapes: Vec<Vec<f64>> = covs
            .iter()
            .zip(&vols)
            .map(|(s, v)| {
                let mut e: Vec<f64> = nalgebra::SymmetricEigen::new((*s).clone())
                    .eigenvalues
                    .iter()
                    .map(|x| x / v)
                    .collect();
                e.sort_by(|a, b| b.partial_cmp(a).unwrap());
                e
            })
            .collect();

        if spec.volume() == Constraint::Equal {
            for v in &vols {
                assert_relative_eq!(*v, vols[0], max_relative = 1e-6);
            }
        }
        match spec.shape() {
            Constraint::Identity => {
                for sh in &shapes {
                    for e in sh {
                        assert_relative_eq!(*e, 1.0, max_relative = 1e-6);
                    }
                }
            }
            Constraint::Equal => {
                for sh in &shapes {
                    for (a, b) in sh.iter().zip(&shapes[0]) {
                        assert_relative_eq!(*a, *b, max_relative = 1e-6);
                    }
                }
            }
            Constraint::Variable => {}
        }
        if spec.orientation() == Constraint::Identity {
            for s in &covs {
                let scale = s.abs().max();
                assert!(s[(0, 1)].abs() <= 1e-9 * scale, "{spec} not axis-aligned");
            }
        }
        if spec == CovarianceSpec::EEE {
            for s in &covs {
                assert_relative_eq!((*s - covs[0]).abs().max(), 0.0, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn max_iter_reports_nonconvergence_instead_of_failing() {
    let truth = simgen::catalog(simgen::DensityId::Claw);
    let data = simgen::sample(&truth, 100, &StreamKey::new(43, 0, StreamRole::Sample));
    let cfg = FitConfig { max_iter: 2, ..FitConfig::default() };
    let m = fit(&data, CovarianceSpec::VVV, 3, &cfg).unwrap();
    assert!(!m.converged);
    assert_eq!(m.iterations, 2);
}

#[test]
fn fit_preconditions_are_checked() {
    let data = five_point_data();
    assert!(fit(&data, CovarianceSpec::EII, 5, &FitConfig::default()).is_err());
    let bad = FitConfig { rel_tol: 0.0, ..FitConfig::default() };
    assert!(fit(&data, CovarianceSpec::EII, 2, &bad).is_err());
}

#[test]
fn bic_identity_holds_exactly_on_fits() {
    let (data, _) = crate::datasets::iris();
    let m = fit(&data, CovarianceSpec::VVI, 3, &FitConfig::default()).unwrap();
    assert_eq!(
        m.bic.to_bits(),
        crate::selection::bic(m.loglik, m.kappa, data.n_rows()).to_bits()
    );
}

#[test]
fn total_underflow_names_the_offending_row() {
    let p = MixtureParams::standard_normal(1);
    let data = DataMatrix::from_rows(&[vec![0.0], vec![1e200]]).unwrap();
    let err = e_step(&p, &data).unwrap_err();
    match err {
        crate::error::Error::Numeric(msg) => assert!(msg.contains("row 1"), "{msg}"),
        other => panic!("unexpected error {other:?}"),
    }
}
