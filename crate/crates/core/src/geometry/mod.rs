//! Idealised shell geometry: hemisphere and sphere meshes, region tags,
//! fibre fields, enclosed volume and regional displacement summaries.
//!
//! The chamber analogue is a hemisphere of radius `R` above the plane
//! `z = 0` with its open rim on the equator. Triangles carry one of six
//! region tags: a `roof` cap around the pole, a stiff `rim` band adjacent to
//! the equator, and four lateral-wall quadrants (`anterior`, `septum`,
//! `posterior`, `lateral`) split by azimuth. Fibres run circumferentially
//! (the local longitude direction projected into each triangle plane) with a
//! fixed in-plane fallback direction at pole-adjacent triangles.

mod displacement;
mod io;
mod mesh;
mod volume;

pub use displacement::{regional_displacement, DisplacementField, RegionalDisplacement};
pub use io::{read_mesh, read_mesh_path, write_mesh, write_mesh_path};
pub use mesh::{
    assign_fibers, assign_regions, build_hemisphere_mesh, build_sphere_mesh, HemisphereSpec,
    ShellMesh, ThicknessSpec,
};
pub use volume::{enclosed_volume, enclosed_volume_and_gradient};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Wall region labels. Declaration order fixes reporting and CSV column
/// order throughout the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Anterior,
    Posterior,
    Septum,
    Lateral,
    Roof,
    Rim,
}

impl Region {
    /// All regions in declaration order.
    pub const ALL: [Region; 6] = [
        Region::Anterior,
        Region::Posterior,
        Region::Septum,
        Region::Lateral,
        Region::Roof,
        Region::Rim,
    ];

    /// The five wall regions reported as biomarkers (everything but the rim).
    pub const WALL: [Region; 5] = [
        Region::Anterior,
        Region::Posterior,
        Region::Septum,
        Region::Lateral,
        Region::Roof,
    ];

    /// Stable lowercase name used in file formats.
    pub fn name(self) -> &'static str {
        match self {
            Region::Anterior => "anterior",
            Region::Posterior => "posterior",
            Region::Septum => "septum",
            Region::Lateral => "lateral",
            Region::Roof => "roof",
            Region::Rim => "rim",
        }
    }

    /// Parses the lowercase region name.
    pub fn from_name(s: &str) -> Option<Region> {
        Region::ALL.iter().copied().find(|r| r.name() == s)
    }

    /// Index into [`Region::ALL`].
    pub fn index(self) -> usize {
        Region::ALL.iter().position(|r| *r == self).unwrap()
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Errors raised by mesh construction, queries and file I/O.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid mesh specification: {0}")]
    InvalidSpec(String),
    #[error("mesh is not watertight: {n_open} non-rim boundary edges")]
    OpenSurface { n_open: usize },
    #[error("enclosed volume is non-positive ({volume_mm3:.3e} mm³): surface orientation is flipped")]
    FlippedOrientation { volume_mm3: f64 },
    #[error("region `{0}` has no triangles")]
    MissingRegion(Region),
    #[error("displacement field has {got} vertices, mesh has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("degenerate triangle {index} (area {area_mm2:.3e} mm²)")]
    DegenerateTriangle { index: usize, area_mm2: f64 },
    #[error("mesh file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh I/O error: {0}")]
    Io(#[from] std::io::Error),
}
