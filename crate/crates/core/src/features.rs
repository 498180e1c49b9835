//! Scalar output features extracted from a forward simulation, and the
//! observation type they are compared against during calibration.
//!
//! The feature vector is fixed and ordered: end-systolic cavity volume in
//! millilitres, then the global and five regional mean displacement
//! magnitudes between end-diastole and end-systole in millimetres. The
//! regional entries follow [`Region::WALL`](crate::geometry::Region)
//! order: anterior, posterior, septum, lateral, roof.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Number of scalar outputs per simulation.
pub const N_FEATURES: usize = 7;

/// Canonical feature names, in vector order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "esv_ml",
    "d_global_mm",
    "d_anterior_mm",
    "d_posterior_mm",
    "d_septum_mm",
    "d_lateral_mm",
    "d_roof_mm",
];

/// One simulation's scalar outputs, in [`FEATURE_NAMES`] order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector([0.0; N_FEATURES])
    }

    /// End-systolic volume, ml.
    pub fn esv_ml(&self) -> f64 {
        self.0[0]
    }

    /// Global mean ED→ES displacement, mm.
    pub fn d_global_mm(&self) -> f64 {
        self.0[1]
    }

    /// Regional mean displacements in wall order, mm.
    pub fn regional_mm(&self) -> &[f64] {
        &self.0[2..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for FeatureVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, v)) in FEATURE_NAMES.iter().zip(self.0.iter()).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={v:.4}")?;
        }
        Ok(())
    }
}

/// Where an observation's target values came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    /// Simulated from a known truth point.
    Synthetic,
    /// Loaded from an external features file.
    External,
}

/// A measured (or synthesised) feature vector with per-feature noise
/// standard deviations, as used by implausibility and the likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub mean: FeatureVector,
    pub noise_sd: FeatureVector,
    pub source: ObservationSource,
}

impl Observation {
    /// Builds the standard measurement-noise model around a synthetic-truth
    /// feature vector: an absolute displacement uncertainty in millimetres
    /// on every displacement feature and a relative one on the volume.
    pub fn with_noise_model(mean: FeatureVector, sd_mm: f64, esv_rel: f64) -> Observation {
        let mut noise_sd = FeatureVector::zeros();
        noise_sd[0] = esv_rel * mean.esv_ml().abs();
        for i in 1..N_FEATURES {
            noise_sd[i] = sd_mm;
        }
        Observation {
            mean,
            noise_sd,
            source: ObservationSource::Synthetic,
        }
    }

    /// Wraps externally measured targets and their uncertainties.
    pub fn external(mean: FeatureVector, noise_sd: FeatureVector) -> Observation {
        Observation {
            mean,
            noise_sd,
            source: ObservationSource::External,
        }
    }
}
