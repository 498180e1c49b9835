//! Bounded simulator input spaces and points within them.
//!
//! The full space has fourteen inputs: an isotropic stiffness scale
//! `C_region` (kPa) and an anisotropy scaling `alpha_region` for each of the
//! five wall regions, the end-diastolic and end-systolic pressures (mmHg),
//! the pericardial spring stiffness (kPa/µm) and the pericardial coverage
//! threshold. After global sensitivity analysis the five `C_region` inputs
//! are pinned to a single value and calibration continues in the remaining
//! nine-dimensional space.
//!
//! Design, emulation and calibration all work in normalized `[0, 1]^d`
//! coordinates; [`ParameterSpace`] owns the mapping to physical units and to
//! forward-model inputs.

use crate::geometry::Region;
use crate::material::GuccioneParams;
use crate::mechanics::{LoadingParameters, RegionalMaterialMap};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Range of the regional isotropic stiffness scale, kPa.
pub const C_RANGE_KPA: (f64, f64) = (0.2, 6.8);
/// Range of the regional anisotropy scaling (dimensionless).
pub const ALPHA_RANGE: (f64, f64) = (0.125, 4.0);
/// Range of the end-diastolic pressure, mmHg.
pub const EDP_RANGE_MMHG: (f64, f64) = (1.0, 12.0);
/// Range of the end-systolic pressure, mmHg.
pub const ESP_RANGE_MMHG: (f64, f64) = (13.0, 37.0);
/// Range of the pericardial spring stiffness, kPa/µm.
pub const K_PERI_RANGE: (f64, f64) = (0.0001, 0.005);
/// Range of the pericardial coverage threshold (area quantile).
pub const PTH_RANGE: (f64, f64) = (0.50, 0.95);

/// Value the regional stiffness scales are pinned to in the reduced space.
pub const FIXED_C_KPA: f64 = 1.7;

/// One named, bounded scalar input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDescriptor {
    pub name: String,
    pub unit: String,
    pub lower: f64,
    pub upper: f64,
}

/// Errors from space construction and coordinate conversion.
#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("point has {got} coordinates, space has {want} inputs")]
    DimensionMismatch { got: usize, want: usize },
    #[error("input '{name}' = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("input '{name}' is not finite")]
    NonFinite { name: String },
    #[error("input '{name}' has invalid bounds (need finite lower < upper)")]
    InvalidBounds { name: String },
    #[error("input names are not unique")]
    DuplicateName,
    #[error("space does not have the simulator input layout")]
    UnsupportedLayout,
}

/// An ordered set of bounded inputs with the mapping to simulator inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    inputs: Vec<InputDescriptor>,
    /// `Some(c)` when the five regional stiffness scales are pinned to `c`
    /// and no longer appear as inputs.
    fixed_c_kpa: Option<f64>,
}

impl ParameterSpace {
    /// The full fourteen-input space: per-region `(C, alpha)` pairs in wall
    /// order, then EDP, ESP, pericardial stiffness and coverage threshold.
    pub fn full() -> Self {
        let mut inputs = Vec::with_capacity(14);
        for region in Region::WALL {
            inputs.push(InputDescriptor {
                name: format!("c_{}", region.name()),
                unit: "kPa".into(),
                lower: C_RANGE_KPA.0,
                upper: C_RANGE_KPA.1,
            });
            inputs.push(InputDescriptor {
                name: format!("alpha_{}", region.name()),
                unit: "-".into(),
                lower: ALPHA_RANGE.0,
                upper: ALPHA_RANGE.1,
            });
        }
        inputs.extend(Self::loading_inputs());
        ParameterSpace {
            inputs,
            fixed_c_kpa: None,
        }
    }

    /// The reduced nine-input space with every `C_region` pinned to `c_kpa`:
    /// the five `alpha_region` inputs in wall order, then the loading inputs.
    pub fn with_fixed_c(c_kpa: f64) -> Self {
        let mut inputs = Vec::with_capacity(9);
        for region in Region::WALL {
            inputs.push(InputDescriptor {
                name: format!("alpha_{}", region.name()),
                unit: "-".into(),
                lower: ALPHA_RANGE.0,
                upper: ALPHA_RANGE.1,
            });
        }
        inputs.extend(Self::loading_inputs());
        ParameterSpace {
            inputs,
            fixed_c_kpa: Some(c_kpa),
        }
    }

    /// An arbitrary bounded box, for emulation or sensitivity analysis of
    /// functions other than the simulator. [`Self::model_inputs`] rejects
    /// such spaces.
    pub fn custom(inputs: Vec<InputDescriptor>) -> Result<Self, SpaceError> {
        for d in &inputs {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(SpaceError::InvalidBounds {
                    name: d.name.clone(),
                });
            }
        }
        let mut names: Vec<&str> = inputs.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(SpaceError::DuplicateName);
        }
        Ok(ParameterSpace {
            inputs,
            fixed_c_kpa: None,
        })
    }

    fn loading_inputs() -> [InputDescriptor; 4] {
        [
            InputDescriptor {
                name: "edp".into(),
                unit: "mmHg".into(),
                lower: EDP_RANGE_MMHG.0,
                upper: EDP_RANGE_MMHG.1,
            },
            InputDescriptor {
                name: "esp".into(),
                unit: "mmHg".into(),
                lower: ESP_RANGE_MMHG.0,
                upper: ESP_RANGE_MMHG.1,
            },
            InputDescriptor {
                name: "k_peri".into(),
                unit: "kPa/um".into(),
                lower: K_PERI_RANGE.0,
                upper: K_PERI_RANGE.1,
            },
            InputDescriptor {
                name: "pth".into(),
                unit: "-".into(),
                lower: PTH_RANGE.0,
                upper: PTH_RANGE.1,
            },
        ]
    }

    /// Number of inputs.
    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    /// Input descriptors in order.
    pub fn inputs(&self) -> &[InputDescriptor] {
        &self.inputs
    }

    /// Input names in order.
    pub fn names(&self) -> Vec<&str> {
        self.inputs.iter().map(|d| d.name.as_str()).collect()
    }

    /// `(lower, upper)` of input `i`.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.inputs[i].lower, self.inputs[i].upper)
    }

    /// The pinned stiffness scale, if this is the reduced space.
    pub fn fixed_c_kpa(&self) -> Option<f64> {
        self.fixed_c_kpa
    }

    /// Maps normalized `[0, 1]^d` coordinates to physical units.
    pub fn to_physical(&self, z: &[f64]) -> Result<Vec<f64>, SpaceError> {
        self.check_dim(z)?;
        Ok(self
            .inputs
            .iter()
            .zip(z)
            .map(|(d, &zi)| d.lower + zi * (d.upper - d.lower))
            .collect())
    }

    /// Maps physical coordinates to normalized `[0, 1]^d`.
    pub fn to_normalized(&self, x: &[f64]) -> Result<Vec<f64>, SpaceError> {
        self.check_dim(x)?;
        Ok(self
            .inputs
            .iter()
            .zip(x)
            .map(|(d, &xi)| (xi - d.lower) / (d.upper - d.lower))
            .collect())
    }

    /// Whether the physical point lies inside the box (bounds inclusive).
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .inputs
                .iter()
                .zip(x)
                .all(|(d, &xi)| xi >= d.lower && xi <= d.upper)
    }

    /// Builds a validated point from physical coordinates.
    pub fn point_from_physical(&self, x: &[f64]) -> Result<ParameterPoint, SpaceError> {
        self.check_dim(x)?;
        for (d, &xi) in self.inputs.iter().zip(x) {
            if !xi.is_finite() {
                return Err(SpaceError::NonFinite {
                    name: d.name.clone(),
                });
            }
            if xi < d.lower || xi > d.upper {
                return Err(SpaceError::OutOfBounds {
                    name: d.name.clone(),
                    value: xi,
                    lower: d.lower,
                    upper: d.upper,
                });
            }
        }
        Ok(ParameterPoint {
            physical: x.to_vec(),
            normalized: self.to_normalized(x)?,
        })
    }

    /// Builds a validated point from normalized coordinates.
    pub fn point_from_normalized(&self, z: &[f64]) -> Result<ParameterPoint, SpaceError> {
        let x = self.to_physical(z)?;
        self.point_from_physical(&x)
    }

    /// Converts a physical point to the forward-model inputs it encodes.
    ///
    /// In the full space the layout is `(C, alpha)` per wall region followed
    /// by the four loading inputs; in the reduced space the `C` slots are
    /// absent and every region uses the pinned value. All parameters not in
    /// the space (exponent weights, rim stiffness, transient shape) keep
    /// their defaults.
    pub fn model_inputs(
        &self,
        x: &[f64],
    ) -> Result<(RegionalMaterialMap, LoadingParameters), SpaceError> {
        self.check_dim(x)?;
        let reference = match self.fixed_c_kpa {
            None => ParameterSpace::full(),
            Some(c) => ParameterSpace::with_fixed_c(c),
        };
        if self.inputs != reference.inputs {
            return Err(SpaceError::UnsupportedLayout);
        }
        let mut materials = RegionalMaterialMap::default();
        let loading_offset = match self.fixed_c_kpa {
            None => {
                for (w, wall) in materials.walls.iter_mut().enumerate() {
                    *wall = GuccioneParams {
                        c_kpa: x[2 * w],
                        alpha: x[2 * w + 1],
                        ..GuccioneParams::default()
                    };
                }
                10
            }
            Some(c_kpa) => {
                for (w, wall) in materials.walls.iter_mut().enumerate() {
                    *wall = GuccioneParams {
                        c_kpa,
                        alpha: x[w],
                        ..GuccioneParams::default()
                    };
                }
                5
            }
        };
        let loading = LoadingParameters {
            edp_mmhg: x[loading_offset],
            esp_mmhg: x[loading_offset + 1],
            k_peri_kpa_per_um: x[loading_offset + 2],
            pth: x[loading_offset + 3],
            ..LoadingParameters::default()
        };
        Ok((materials, loading))
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), SpaceError> {
        if x.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch {
                got: x.len(),
                want: self.dim(),
            });
        }
        Ok(())
    }
}

/// A point of a [`ParameterSpace`] in both coordinate systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    /// Coordinates in physical units, in input order.
    pub physical: Vec<f64>,
    /// The same point in `[0, 1]^d`.
    pub normalized: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_space_matches_input_table() {
        let space = ParameterSpace::full();
        assert_eq!(space.dim(), 14);
        let names = space.names();
        assert_eq!(names[0], "c_anterior");
        assert_eq!(names[1], "alpha_anterior");
        assert_eq!(names[8], "c_roof");
        assert_eq!(names[9], "alpha_roof");
        assert_eq!(names[10..], ["edp", "esp", "k_peri", "pth"]);
        assert_eq!(space.bounds(0), (0.2, 6.8));
        assert_eq!(space.bounds(1), (0.125, 4.0));
        assert_eq!(space.bounds(10), (1.0, 12.0));
        assert_eq!(space.bounds(11), (13.0, 37.0));
        assert_eq!(space.bounds(12), (0.0001, 0.005));
        assert_eq!(space.bounds(13), (0.50, 0.95));
        let mut unique = names.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), names.len());
        for d in space.inputs() {
            assert!(d.lower < d.upper);
        }
    }

    #[test]
    fn reduced_space_drops_stiffness_scales() {
        let space = ParameterSpace::with_fixed_c(FIXED_C_KPA);
        assert_eq!(space.dim(), 9);
        assert!(space.names().iter().all(|n| !n.starts_with("c_")));
        assert_eq!(space.names()[0], "alpha_anterior");
        assert_eq!(space.fixed_c_kpa(), Some(1.7));
    }

    #[test]
    fn normalization_round_trips() {
        let space = ParameterSpace::full();
        let z: Vec<f64> = (0..14).map(|i| (i as f64 + 0.5) / 14.0).collect();
        let x = space.to_physical(&z).unwrap();
        let back = space.to_normalized(&x).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let mid = space.to_physical(&[0.5; 14]).unwrap();
        assert!((mid[0] - 3.5).abs() < 1e-12);
        assert!((mid[10] - 6.5).abs() < 1e-12);
    }

    #[test]
    fn model_inputs_full_layout() {
        let space = ParameterSpace::full();
        let mut x = vec![0.0; 14];
        for (w, v) in x.iter_mut().enumerate().take(10) {
            *v = if w % 2 == 0 {
                1.0 + 0.5 * (w / 2) as f64
            } else {
                0.5 + 0.25 * (w / 2) as f64
            };
        }
        x[10] = 5.0;
        x[11] = 20.0;
        x[12] = 0.002;
        x[13] = 0.8;
        let (materials, loading) = space.model_inputs(&x).unwrap();
        for (w, wall) in materials.walls.iter().enumerate() {
            assert_eq!(wall.c_kpa, 1.0 + 0.5 * w as f64);
            assert_eq!(wall.alpha, 0.5 + 0.25 * w as f64);
            assert_eq!(wall.b_f, GuccioneParams::default().b_f);
        }
        assert_eq!(loading.edp_mmhg, 5.0);
        assert_eq!(loading.esp_mmhg, 20.0);
        assert_eq!(loading.k_peri_kpa_per_um, 0.002);
        assert_eq!(loading.pth, 0.8);
        assert_eq!(loading.t_es, LoadingParameters::default().t_es);
    }

    #[test]
    fn model_inputs_reduced_pins_c() {
        let space = ParameterSpace::with_fixed_c(FIXED_C_KPA);
        let x = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 25.0, 0.001, 0.7];
        let (materials, loading) = space.model_inputs(&x).unwrap();
        for (w, wall) in materials.walls.iter().enumerate() {
            assert_eq!(wall.c_kpa, FIXED_C_KPA);
            assert_eq!(wall.alpha, x[w]);
        }
        assert_eq!(loading.edp_mmhg, 8.0);
        assert_eq!(loading.pth, 0.7);
    }

    #[test]
    fn point_validation() {
        let space = ParameterSpace::with_fixed_c(FIXED_C_KPA);
        let inside = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 25.0, 0.001, 0.7];
        let p = space.point_from_physical(&inside).unwrap();
        assert_eq!(p.physical.len(), 9);
        assert!(p.normalized.iter().all(|z| (0.0..=1.0).contains(z)));
        assert!(space.contains(&inside));

        let mut outside = inside;
        outside[0] = 0.1;
        assert!(matches!(
            space.point_from_physical(&outside),
            Err(SpaceError::OutOfBounds { .. })
        ));
        assert!(!space.contains(&outside));
        assert!(matches!(
            space.point_from_physical(&inside[..5]),
            Err(SpaceError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn custom_spaces_validate_and_reject_model_mapping() {
        let inputs = vec![
            InputDescriptor {
                name: "x1".into(),
                unit: "-".into(),
                lower: -1.0,
                upper: 1.0,
            },
            InputDescriptor {
                name: "x2".into(),
                unit: "-".into(),
                lower: 0.0,
                upper: 2.0,
            },
        ];
        let space = ParameterSpace::custom(inputs.clone()).unwrap();
        assert_eq!(space.dim(), 2);
        assert!(matches!(
            space.model_inputs(&[0.0, 1.0]),
            Err(SpaceError::UnsupportedLayout)
        ));

        let mut bad = inputs.clone();
        bad[1].name = "x1".into();
        assert!(matches!(
            ParameterSpace::custom(bad),
            Err(SpaceError::DuplicateName)
        ));
        let mut flipped = inputs;
        flipped[0].lower = 2.0;
        assert!(matches!(
            ParameterSpace::custom(flipped),
            Err(SpaceError::InvalidBounds { .. })
        ));
    }

    #[test]
    fn serde_round_trip() {
        let space = ParameterSpace::full();
        let json = serde_json::to_string(&space).unwrap();
        let back: ParameterSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, space);
    }
}
