//! Simulation catalog: ten bivariate benchmark mixtures, their
//! higher-dimensional extensions, and seeded sampling.
//!
//! The catalog constants are normative decimal literals; they are stored
//! exactly as tabulated rather than re-derived, so two builds of this crate
//! draw from bit-identical distributions.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::params::MixtureParams;
use crate::rng::{CounterRng, StreamKey};

/// The ten bivariate benchmark densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DensityId {
    Gaussian,
    SkewedUnimodal,
    StronglySkewed,
    Kurtotic,
    Outlier,
    Bimodal,
    SeparatedBimodal,
    AsymmetricBimodal,
    Trimodal,
    Claw,
}

impl DensityId {
    pub const ALL: [DensityId; 10] = [
        DensityId::Gaussian,
        DensityId::SkewedUnimodal,
        DensityId::StronglySkewed,
        DensityId::Kurtotic,
        DensityId::Outlier,
        DensityId::Bimodal,
        DensityId::SeparatedBimodal,
        DensityId::AsymmetricBimodal,
        DensityId::Trimodal,
        DensityId::Claw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DensityId::Gaussian => "gaussian",
            DensityId::SkewedUnimodal => "skewed_unimodal",
            DensityId::StronglySkewed => "strongly_skewed",
            DensityId::Kurtotic => "kurtotic",
            DensityId::Outlier => "outlier",
            DensityId::Bimodal => "bimodal",
            DensityId::SeparatedBimodal => "separated_bimodal",
            DensityId::AsymmetricBimodal => "asymmetric_bimodal",
            DensityId::Trimodal => "trimodal",
            DensityId::Claw => "claw",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        DensityId::ALL
            .iter()
            .find(|d| d.name() == name)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown density id '{name}'")))
    }
}

impl std::fmt::Display for DensityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn cov2(v: f64, c: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[v, c, c, v])
}

fn mean2(x: f64, y: f64) -> DVector<f64> {
    DVector::from_vec(vec![x, y])
}

/// Tabulated parameters of one benchmark density.
pub fn catalog(id: DensityId) -> MixtureParams {
    let (weights, means, covs): (Vec<f64>, Vec<DVector<f64>>, Vec<DMatrix<f64>>) = match id {
        DensityId::Gaussian => (
            vec![1.0],
            vec![mean2(0.0, 0.0)],
            vec![cov2(1.25, 0.75)],
        ),
        DensityId::SkewedUnimodal => (
            vec![1.0 / 5.0, 1.0 / 5.0, 3.0 / 5.0],
            vec![
                mean2(0.0, 0.0),
                mean2(0.3535534, 0.3535534),
                mean2(0.7660323, 0.7660323),
            ],
            vec![
                cov2(1.25, 0.75),
                cov2(0.6804138, 0.4082483),
                cov2(0.5176083, 0.3105650),
            ],
        ),
        DensityId::StronglySkewed => (
            vec![1.0 / 8.0; 8],
            vec![
                mean2(0.0, 0.0),
                mean2(-0.7071068, -0.7071068),
                mean2(-1.178511, -1.178511),
                mean2(-1.492781, -1.492781),
                mean2(-1.702294, -1.702294),
                mean2(-1.84197, -1.84197),
                mean2(-1.935086, -1.935086),
                mean2(-1.997164, -1.997164),
            ],
            vec![
                cov2(1.25, 0.75),
                cov2(0.5555556, 0.3333333),
                cov2(0.2469136, 0.1481481),
                cov2(0.10973937, 0.06584362),
                cov2(0.04877305, 0.02926383),
                cov2(0.02167691, 0.01300615),
                cov2(0.009634183, 0.005780510),
                cov2(0.004281859, 0.002569116),
            ],
        ),
        DensityId::Kurtotic => (
            vec![2.0 / 3.0, 1.0 / 3.0],
            vec![mean2(0.0, 0.0), mean2(0.0, 0.0)],
            vec![cov2(1.25, 0.75), cov2(0.03952847, 0.02371708)],
        ),
        DensityId::Outlier => (
            vec![1.0 / 10.0, 9.0 / 10.0],
            vec![mean2(0.0, 0.0), mean2(0.0, 0.0)],
            vec![cov2(1.25, 0.75), cov2(0.03952847, 0.02371708)],
        ),
        DensityId::Bimodal => (
            vec![0.5, 0.5],
            vec![mean2(-0.5303301, -0.5303301), mean2(0.5303301, 0.5303301)],
            vec![cov2(0.6804138, -0.4082483), cov2(0.6804138, -0.4082483)],
        ),
        DensityId::SeparatedBimodal => (
            vec![0.5, 0.5],
            vec![mean2(-1.06066, -1.06066), mean2(1.06066, 1.06066)],
            vec![cov2(0.6804138, -0.4082483), cov2(0.6804138, -0.4082483)],
        ),
        DensityId::AsymmetricBimodal => (
            vec![0.75, 0.25],
            vec![mean2(0.0, 0.0), mean2(0.7071068, 0.7071068)],
            vec![cov2(1.25, -0.75), cov2(0.13888889, -0.08333333)],
        ),
        DensityId::Trimodal => (
            vec![2.0 / 5.0, 2.0 / 5.0, 1.0 / 5.0],
            vec![
                mean2(-0.8485281, -0.8485281),
                mean2(0.8485281, 0.8485281),
                mean2(0.0, 0.0),
            ],
            vec![
                cov2(0.5809475, -0.3485685),
                cov2(0.5809475, -0.3485685),
                cov2(0.15625, -0.09375),
            ],
        ),
        DensityId::Claw => (
            vec![2.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0],
            vec![
                mean2(0.0, 0.0),
                mean2(-0.7071068, -0.7071068),
                mean2(-0.3535534, -0.3535534),
                mean2(0.0, 0.0),
                mean2(0.3535534, 0.3535534),
                mean2(0.7071068, 0.7071068),
            ],
            vec![
                cov2(0.625, 0.375),
                cov2(0.03952847, -0.02371708),
                cov2(0.03952847, -0.02371708),
                cov2(0.03952847, -0.02371708),
                cov2(0.03952847, -0.02371708),
                cov2(0.03952847, -0.02371708),
            ],
        ),
    };
    MixtureParams::from_covariances(weights, means, covs).expect("catalog constants are valid")
}

/// How a bivariate catalog entry is lifted into more dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtensionSpec {
    /// Append this many independent standard-normal coordinates to every
    /// component.
    Pad { extra_dims: usize },
    /// The tabulated 3- or 6-dimensional two-component family with mode
    /// separation 1.5, 3 or 5 (center displacement = separation / 2 along
    /// the diagonal of the first two coordinates).
    BimodalKd { dim: usize, separation: f64 },
}

/// Printed displacement literal for a tabulated separation.
fn kd_displacement(separation: f64) -> Result<f64> {
    if separation == 1.5 {
        Ok(0.5303301)
    } else if separation == 3.0 {
        Ok(1.06066)
    } else if separation == 5.0 {
        Ok(1.767767)
    } else {
        Err(Error::InvalidInput(format!(
            "unsupported separation {separation}; tabulated values are 1.5, 3, 5"
        )))
    }
}

/// Apply an extension to a catalog entry. `Pad` works on any base entry;
/// `BimodalKd` ignores the base parameters and returns the tabulated family.
pub fn extend(base: &MixtureParams, spec: &ExtensionSpec) -> Result<MixtureParams> {
    match *spec {
        ExtensionSpec::Pad { extra_dims } => {
            if extra_dims == 0 {
                return Ok(base.clone());
            }
            let d = base.dim();
            let dd = d + extra_dims;
            let g = base.n_components();
            let mut means = Vec::with_capacity(g);
            let mut covs = Vec::with_capacity(g);
            for k in 0..g {
                let mut mu = DVector::zeros(dd);
                mu.rows_mut(0, d).copy_from(base.mean(k));
                means.push(mu);
                let mut s = DMatrix::identity(dd, dd);
                s.view_mut((0, 0), (d, d)).copy_from(base.covariance(k));
                covs.push(s);
            }
            MixtureParams::from_covariances(base.weights().to_vec(), means, covs)
        }
        ExtensionSpec::BimodalKd { dim, separation } => {
            let m = kd_displacement(separation)?;
            let sigma = match dim {
                3 => DMatrix::from_row_slice(
                    3,
                    3,
                    &[1.5, -0.5, 0.0, -0.5, 1.5, 0.0, 0.0, 0.0, 0.5],
                ),
                6 => {
                    let mut s = DMatrix::zeros(6, 6);
                    s[(0, 0)] = 3.0;
                    s[(0, 1)] = 1.0;
                    s[(1, 0)] = 1.0;
                    s[(1, 1)] = 3.0;
                    s[(2, 2)] = 1.0;
                    s[(3, 3)] = 1.0;
                    s[(4, 4)] = 0.5;
                    s[(5, 5)] = 0.25;
                    s
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "bimodal extension is tabulated for 3 or 6 dimensions, not {other}"
                    )))
                }
            };
            let mut lo = DVector::zeros(dim);
            let mut hi = DVector::zeros(dim);
            lo[0] = -m;
            lo[1] = -m;
            hi[0] = m;
            hi[1] = m;
            MixtureParams::from_covariances(vec![0.5, 0.5], vec![lo, hi], vec![sigma.clone(), sigma])
        }
    }
}

/// A catalog entry plus optional extension, addressable by a stable id
/// string (used in benchmark reports and manifests).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSpec {
    pub base: DensityId,
    pub extension: Option<ExtensionSpec>,
}

impl TruthSpec {
    pub fn bivariate(base: DensityId) -> Self {
        TruthSpec { base, extension: None }
    }

    /// Resolve a (base, target dimension, separation) request from the
    /// command line: dims > 2 pads with standard normals, except for the
    /// bimodal base with a separation given, which selects the tabulated
    /// 3D/6D family.
    pub fn resolve(base: DensityId, dims: usize, separation: Option<f64>) -> Result<Self> {
        if let Some(sep) = separation {
            if base != DensityId::Bimodal {
                return Err(Error::InvalidInput(
                    "--sep only applies to the bimodal density".into(),
                ));
            }
            kd_displacement(sep)?;
            return Ok(TruthSpec {
                base,
                extension: Some(ExtensionSpec::BimodalKd { dim: dims, separation: sep }),
            });
        }
        match dims {
            0 | 1 => Err(Error::InvalidInput("dims must be at least 2".into())),
            2 => Ok(TruthSpec::bivariate(base)),
            d => Ok(TruthSpec {
                base,
                extension: Some(ExtensionSpec::Pad { extra_dims: d - 2 }),
            }),
        }
    }

    pub fn params(&self) -> Result<MixtureParams> {
        let base = catalog(self.base);
        match &self.extension {
            None => Ok(base),
            Some(ext) => extend(&base, ext),
        }
    }

    pub fn id_string(&self) -> String {
        match &self.extension {
            None => self.base.name().to_string(),
            Some(ExtensionSpec::Pad { extra_dims }) => {
                format!("{}_{}d", self.base.name(), 2 + extra_dims)
            }
            Some(ExtensionSpec::BimodalKd { dim, separation }) => {
                format!("bimodal_kd_{dim}d_sep{separation}")
            }
        }
    }
}

/// Parse an id produced by `TruthSpec::id_string`: a base name, a padded
/// form like `claw_4d`, or a tabulated form like `bimodal_kd_6d_sep3`.
pub fn parse_truth_id(id: &str) -> Result<TruthSpec> {
    if let Ok(base) = DensityId::from_name(id) {
        return Ok(TruthSpec::bivariate(base));
    }
    if let Some(rest) = id.strip_prefix("bimodal_kd_") {
        let (dim_part, sep_part) = rest
            .split_once("_sep")
            .ok_or_else(|| Error::InvalidInput(format!("malformed truth id '{id}'")))?;
        let dim: usize = dim_part
            .strip_suffix('d')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidInput(format!("malformed truth id '{id}'")))?;
        let sep: f64 = sep_part
            .parse()
            .map_err(|_| Error::InvalidInput(format!("malformed truth id '{id}'")))?;
        return TruthSpec::resolve(DensityId::Bimodal, dim, Some(sep));
    }
    if let Some((name, dims_part)) = id.rsplit_once('_') {
        if let Some(dims) = dims_part.strip_suffix('d').and_then(|s| s.parse::<usize>().ok()) {
            let base = DensityId::from_name(name)?;
            return TruthSpec::resolve(base, dims, None);
        }
    }
    Err(Error::InvalidInput(format!("unknown truth id '{id}'")))
}

/// Draw `n` observations, fully determined by the stream key.
pub fn sample(params: &MixtureParams, n: usize, key: &StreamKey) -> DataMatrix {
    sample_with_labels(params, n, key).0
}

/// As `sample`, also returning the component index of each draw.
pub fn sample_with_labels(params: &MixtureParams, n: usize, key: &StreamKey) -> (DataMatrix, Vec<usize>) {
    let mut rng = key.rng();
    sample_labeled_with_rng(params, n, &mut rng)
}

/// Draw from an already-positioned stream (used for batched draws where
/// each batch owns a sub-stream).
pub fn sample_with_rng(params: &MixtureParams, n: usize, rng: &mut CounterRng) -> DataMatrix {
    sample_labeled_with_rng(params, n, rng).0
}

fn sample_labeled_with_rng(
    params: &MixtureParams,
    n: usize,
    rng: &mut CounterRng,
) -> (DataMatrix, Vec<usize>) {
    assert!(n >= 1, "need at least one draw");
    let d = params.dim();
    let g = params.n_components();
    let mut rows = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut comp = g - 1;
        for (k, &w) in params.weights().iter().enumerate() {
            acc += w;
            if u < acc {
                comp = k;
                break;
            }
        }
        labels.push(comp);
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        let x = params.mean(comp) + params.chol_lower(comp) * z;
        rows.row_mut(i).copy_from(&x.transpose());
    }
    (DataMatrix::new(rows).expect("sampled values are finite"), labels)
}
