//! Desk-scale Bayesian estimation of regional atrial wall stiffness.
//!
//! The crate implements the full inverse pipeline around a hyperelastic
//! thin-shell model of passive atrial filling:
//!
//! * [`geometry`] — idealised hemispherical shell meshes with region tags,
//!   circumferential fibre fields and enclosed-volume computation;
//! * [`material`] — Guccione and Neo-Hookean strain-energy laws;
//! * [`mechanics`] — quasi-static membrane equilibrium, backward-displacement
//!   unloading, the pressure/annulus transient and biomarker extraction;
//! * [`emulator`] — Gaussian-process emulators of the simulator outputs;
//! * [`sensitivity`] — Saltelli/Sobol global sensitivity analysis;
//! * [`calibration`] — history matching (NROY waves) and affine-invariant
//!   ensemble MCMC;
//! * [`cohortstats`] — linear mixed models and paired t-tests for cohort
//!   summaries;
//! * [`pipeline`] — configuration, artifact files and the staged CLI driver.

pub mod calibration;
pub mod emulator;
pub mod features;
pub mod geometry;
pub mod material;
pub mod mechanics;
pub mod optim;
pub mod sensitivity;
pub mod space;

pub use features::{FeatureVector, Observation, FEATURE_NAMES, N_FEATURES};
pub use material::{GreenLagrangeStrain, GuccioneParams, MaterialError, NeoHookeanParams};
pub use space::{ParameterPoint, ParameterSpace};
