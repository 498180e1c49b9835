//! Quasi-static membrane mechanics of the shell chamber.
//!
//! The wall is a constant-strain-triangle membrane: each element carries the
//! Guccione (wall regions) or Neo-Hookean (rim band) strain energy evaluated
//! from the in-plane deformation gradient in its fibre frame, multiplied by
//! thickness and rest area. Loading consists of a uniform transmural
//! pressure (work term `−p·V` on the enclosed volume), a one-sided
//! pericardial penalty on outward motion, omnidirectional vein-anchor
//! springs, and a rigid prescribed trajectory of the rim (mitral annulus
//! analogue). Equilibria minimise total potential energy with L-BFGS under
//! incremental loading; the unloaded configuration is recovered by
//! backward-displacement fixed-point iteration and the filling transient is
//! marched over one cycle to extract volume and displacement biomarkers.

mod assembly;
mod loading;
mod solve;
mod transient;
mod unload;

pub use assembly::MechanicsModel;
pub use loading::{
    pericardial_scale, pressure_transient, rim_offset, LoadingParameters, MMHG_TO_KPA,
};
pub use solve::{solve_equilibrium, EquilibriumState, LoadTarget, SolverOptions};
pub use transient::{extract_features, run_transient, SimulationResult, TransientOptions};
pub use unload::{unload_reference, UnloadIterate, UnloadOptions, UnloadResult};

use crate::geometry::{GeometryError, Region};
use crate::material::{GuccioneParams, MaterialError, NeoHookeanParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constitutive assignment per region: Guccione walls, Neo-Hookean rim.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionalMaterialMap {
    /// Wall parameters ordered as [`Region::WALL`].
    pub walls: [GuccioneParams; 5],
    /// Stiff rim-band parameters.
    pub rim: NeoHookeanParams,
}

impl Default for RegionalMaterialMap {
    fn default() -> Self {
        RegionalMaterialMap {
            walls: [GuccioneParams::default(); 5],
            rim: NeoHookeanParams::rim(),
        }
    }
}

impl RegionalMaterialMap {
    /// Same Guccione parameters in every wall region.
    pub fn uniform(wall: GuccioneParams) -> Self {
        RegionalMaterialMap {
            walls: [wall; 5],
            rim: NeoHookeanParams::rim(),
        }
    }

    /// Wall parameters for a region (`None` for the rim).
    pub fn wall_params(&self, region: Region) -> Option<&GuccioneParams> {
        Region::WALL
            .iter()
            .position(|r| *r == region)
            .map(|i| &self.walls[i])
    }
}

/// Errors from equilibrium solves, unloading and the transient.
#[derive(Debug, Error)]
pub enum MechanicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(
        "equilibrium solve diverged at load fraction {fraction:.4}: gradient norm {grad_norm:.3e} \
         above tolerance {tol:.3e} after {iterations} iterations"
    )]
    NonConvergence {
        fraction: f64,
        grad_norm: f64,
        tol: f64,
        iterations: usize,
    },
    #[error("unloading failed to reach {tol_rel:.2}% volume agreement in {iterations} iterations (best {best_rel:.2}%)")]
    UnloadDivergence {
        iterations: usize,
        tol_rel: f64,
        best_rel: f64,
    },
}
