//! The ten parsimonious covariance structures.
//!
//! Each mixture covariance is decomposed as `sigma_g = lambda_g D_g A_g D_g'`
//! with `lambda_g` a scalar volume, `D_g` an orthogonal orientation and `A_g`
//! a positive diagonal shape normalized to unit determinant. A model name
//! constrains the three factors across components: E(qual), V(ariable) or
//! I(dentity), in volume-shape-orientation order. EEV, for example, shares
//! volume and shape but lets each component rotate freely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constraint on one factor of the decomposition across components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Equal,
    Variable,
    Identity,
}

/// One of the ten model names.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CovarianceSpec {
    EII,
    VII,
    EEI,
    VEI,
    EVI,
    VVI,
    EEE,
    EEV,
    VEV,
    VVV,
}

use CovarianceSpec::*;

impl CovarianceSpec {
    /// All ten structures in canonical (spherical, diagonal, ellipsoidal)
    /// order. This is also the tie-break order used by the sweep.
    pub const ALL: [CovarianceSpec; 10] = [EII, VII, EEI, VEI, EVI, VVI, EEE, EEV, VEV, VVV];

    /// The three structures that remain distinct with a single component.
    pub const SINGLE_COMPONENT: [CovarianceSpec; 3] = [EII, EEI, EEE];

    pub fn name(&self) -> &'static str {
        match self {
            EII => "EII",
            VII => "VII",
            EEI => "EEI",
            VEI => "VEI",
            EVI => "EVI",
            VVI => "VVI",
            EEE => "EEE",
            EEV => "EEV",
            VEV => "VEV",
            VVV => "VVV",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        CovarianceSpec::ALL
            .iter()
            .find(|s| s.name().eq_ignore_ascii_case(name))
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown covariance structure '{name}'")))
    }

    pub fn volume(&self) -> Constraint {
        match self {
            EII | EEI | EVI | EEE | EEV => Constraint::Equal,
            VII | VEI | VVI | VEV | VVV => Constraint::Variable,
        }
    }

    pub fn shape(&self) -> Constraint {
        match self {
            EII | VII => Constraint::Identity,
            EEI | VEI | EEE | EEV | VEV => Constraint::Equal,
            EVI | VVI | VVV => Constraint::Variable,
        }
    }

    pub fn orientation(&self) -> Constraint {
        match self {
            EII | VII | EEI | VEI | EVI | VVI => Constraint::Identity,
            EEE => Constraint::Equal,
            EEV | VEV | VVV => Constraint::Variable,
        }
    }

    /// Free parameters in the covariances alone.
    fn covariance_param_count(&self, g: usize, d: usize) -> usize {
        let rot = d * (d - 1) / 2; // free parameters of one orthogonal matrix
        match self {
            EII => 1,
            VII => g,
            EEI => d,
            VEI => g + (d - 1),
            EVI => 1 + g * (d - 1),
            VVI => g * d,
            EEE => d * (d + 1) / 2,
            EEV => 1 + (d - 1) + g * rot,
            VEV => g + (d - 1) + g * rot,
            VVV => g * d * (d + 1) / 2,
        }
    }

    /// Total free parameters of a G-component model in d dimensions:
    /// mixing proportions + means + covariance factors. This is the kappa
    /// that enters the BIC penalty.
    pub fn param_count(&self, g: usize, d: usize) -> usize {
        assert!(g >= 1 && d >= 1, "param_count needs g >= 1 and d >= 1");
        (g - 1) + g * d + self.covariance_param_count(g, d)
    }
}

impl std::fmt::Display for CovarianceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip_and_reject_unknown() {
        for s in CovarianceSpec::ALL {
            assert_eq!(CovarianceSpec::from_name(s.name()).unwrap(), s);
        }
        assert!(CovarianceSpec::from_name("XYZ").is_err());
    }

    #[test]
    fn spherical_single_component_count() {
        // proportions 0, means 2, one volume
        assert_eq!(EII.param_count(1, 2), 3);
    }

    #[test]
    fn unconstrained_two_component_count() {
        // 1 proportion + 4 means + 2 * 3 covariance entries, counted by hand
        assert_eq!(VVV.param_count(2, 2), 11);
    }

    #[test]
    fn vev_count_in_four_dimensions() {
        // 1 + 8 + (2 volumes + 3 shape + 2 * 6 rotation), counted by hand
        assert_eq!(VEV.param_count(2, 4), 26);
        assert_eq!(VEV.param_count(3, 4), 38);
    }

    #[test]
    fn variable_volume_counts_increase_with_g() {
        for spec in CovarianceSpec::ALL {
            if spec.volume() == Constraint::Variable {
                for d in 1..=5 {
                    for g in 1..8 {
                        assert!(
                            spec.param_count(g + 1, d) > spec.param_count(g, d),
                            "{spec} not increasing at g={g}, d={d}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_counts_match_hand_tallies() {
        assert_eq!(EEI.param_count(3, 2), 2 + 6 + 2);
        assert_eq!(VEI.param_count(3, 2), 2 + 6 + 3 + 1);
        assert_eq!(EVI.param_count(3, 2), 2 + 6 + 1 + 3);
        assert_eq!(VVI.param_count(3, 2), 2 + 6 + 6);
        assert_eq!(EEE.param_count(3, 2), 2 + 6 + 3);
        assert_eq!(EEV.param_count(3, 2), 2 + 6 + 1 + 1 + 3);
    }
}
