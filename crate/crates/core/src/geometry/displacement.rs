//! Displacement fields and regional displacement biomarkers.

use super::{GeometryError, Region, ShellMesh};
use nalgebra::Vector3;

/// Per-vertex displacement from the end-diastolic reference, in mm.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    pub d: Vec<Vector3<f64>>,
}

impl DisplacementField {
    /// All-zero field for a mesh.
    pub fn zeros(n_vertices: usize) -> Self {
        DisplacementField {
            d: vec![Vector3::zeros(); n_vertices],
        }
    }

    /// Field taking the mesh reference to `positions`.
    pub fn between(mesh: &ShellMesh, positions: &[Vector3<f64>]) -> Self {
        DisplacementField {
            d: mesh
                .vertices
                .iter()
                .zip(positions)
                .map(|(p, x)| x - p)
                .collect(),
        }
    }
}

/// Mean displacement magnitudes per wall region and globally, in mm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionalDisplacement {
    /// Mean over all non-rim triangles.
    pub global_mm: f64,
    /// Mean per wall region, ordered as [`Region::WALL`].
    pub regional_mm: [f64; 5],
}

impl RegionalDisplacement {
    /// Value for one wall region.
    pub fn for_region(&self, region: Region) -> Option<f64> {
        Region::WALL
            .iter()
            .position(|r| *r == region)
            .map(|i| self.regional_mm[i])
    }
}

/// Per-region mean of `|displacement at triangle centre|` over non-rim
/// triangles, where the centre displacement is the mean of the triangle's
/// vertex displacements.
pub fn regional_displacement(
    mesh: &ShellMesh,
    field: &DisplacementField,
) -> Result<RegionalDisplacement, GeometryError> {
    if field.d.len() != mesh.n_vertices() {
        return Err(GeometryError::DimensionMismatch {
            got: field.d.len(),
            expected: mesh.n_vertices(),
        });
    }
    let mut sums = [0.0_f64; 5];
    let mut counts = [0usize; 5];
    let mut global_sum = 0.0;
    let mut global_count = 0usize;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let region = mesh.regions[t];
        if region == Region::Rim {
            continue;
        }
        let centre = (field.d[tri[0]] + field.d[tri[1]] + field.d[tri[2]]) / 3.0;
        let mag = centre.norm();
        let slot = Region::WALL.iter().position(|r| *r == region).unwrap();
        sums[slot] += mag;
        counts[slot] += 1;
        global_sum += mag;
        global_count += 1;
    }
    for (i, region) in Region::WALL.iter().enumerate() {
        if counts[i] == 0 {
            return Err(GeometryError::MissingRegion(*region));
        }
    }
    Ok(RegionalDisplacement {
        global_mm: global_sum / global_count as f64,
        regional_mm: std::array::from_fn(|i| sums[i] / counts[i] as f64),
    })
}
