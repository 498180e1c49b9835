//! Enclosed chamber volume by the divergence theorem.
//!
//! The volume of the closed surface is `V = Σ_T (a × b)·c / 6` over
//! consistently outward-wound triangles. Open hemisphere meshes are closed
//! by a fan of cap triangles from the rim loop to the (current) rim
//! centroid, wound opposite to the surface-induced boundary orientation so
//! the cap normal points out of the chamber.

use super::displacement::DisplacementField;
use super::{GeometryError, ShellMesh};
use nalgebra::Vector3;
use std::collections::HashSet;

/// Enclosed volume in mm³ of the mesh, optionally displaced.
pub fn enclosed_volume(
    mesh: &ShellMesh,
    displacement: Option<&DisplacementField>,
) -> Result<f64, GeometryError> {
    let positions = displaced_positions(mesh, displacement)?;
    let (volume, _) = volume_and_gradient_impl(&positions, &mesh.triangles, &cap_edges(mesh)?, false);
    if volume <= 0.0 {
        return Err(GeometryError::FlippedOrientation { volume_mm3: volume });
    }
    Ok(volume)
}

/// Enclosed volume and its gradient with respect to every vertex position.
///
/// The gradient includes the chain-rule contribution of rim vertices through
/// the cap centroid. Fails on the same topology conditions as
/// [`enclosed_volume`] but does not reject negative volumes (the solver may
/// pass transient states).
pub fn enclosed_volume_and_gradient(
    mesh: &ShellMesh,
    positions: &[Vector3<f64>],
) -> Result<(f64, Vec<Vector3<f64>>), GeometryError> {
    if positions.len() != mesh.n_vertices() {
        return Err(GeometryError::DimensionMismatch {
            got: positions.len(),
            expected: mesh.n_vertices(),
        });
    }
    let (v, g) = volume_and_gradient_impl(positions, &mesh.triangles, &cap_edges(mesh)?, true);
    Ok((v, g))
}

/// Directed boundary edges validated against the rim loop. Empty for a
/// closed mesh.
fn cap_edges(mesh: &ShellMesh) -> Result<Vec<(usize, usize)>, GeometryError> {
    let boundary = mesh.boundary_edges();
    if boundary.is_empty() {
        return Ok(boundary);
    }
    let rim: HashSet<usize> = mesh.rim_vertices.iter().copied().collect();
    let off_rim = boundary
        .iter()
        .filter(|(a, b)| !rim.contains(a) || !rim.contains(b))
        .count();
    if off_rim > 0 {
        return Err(GeometryError::OpenSurface { n_open: off_rim });
    }
    // The boundary must form a single closed loop over the rim vertices:
    // every rim vertex appears exactly once as a tail and once as a head.
    let mut tails: HashSet<usize> = HashSet::new();
    let mut heads: HashSet<usize> = HashSet::new();
    for (a, b) in &boundary {
        if !tails.insert(*a) || !heads.insert(*b) {
            return Err(GeometryError::OpenSurface {
                n_open: boundary.len(),
            });
        }
    }
    if tails.len() != rim.len() || heads.len() != rim.len() {
        return Err(GeometryError::OpenSurface {
            n_open: boundary.len(),
        });
    }
    Ok(boundary)
}

fn volume_and_gradient_impl(
    positions: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    cap: &[(usize, usize)],
    with_gradient: bool,
) -> (f64, Vec<Vector3<f64>>) {
    let mut volume = 0.0;
    let mut grad = if with_gradient {
        vec![Vector3::zeros(); positions.len()]
    } else {
        Vec::new()
    };

    for tri in triangles {
        let (a, b, c) = (positions[tri[0]], positions[tri[1]], positions[tri[2]]);
        volume += a.cross(&b).dot(&c) / 6.0;
        if with_gradient {
            grad[tri[0]] += b.cross(&c) / 6.0;
            grad[tri[1]] += c.cross(&a) / 6.0;
            grad[tri[2]] += a.cross(&b) / 6.0;
        }
    }

    if !cap.is_empty() {
        // Rim centroid closes the surface; cap triangles are wound opposite
        // to the induced boundary orientation.
        let rim_ids: Vec<usize> = cap.iter().map(|(a, _)| *a).collect();
        let inv_m = 1.0 / rim_ids.len() as f64;
        let centroid: Vector3<f64> = rim_ids.iter().map(|&v| positions[v]).sum::<Vector3<f64>>() * inv_m;
        let mut grad_centroid = Vector3::zeros();
        for &(i, j) in cap {
            let (a, b, c) = (positions[j], positions[i], centroid);
            volume += a.cross(&b).dot(&c) / 6.0;
            if with_gradient {
                grad[j] += b.cross(&c) / 6.0;
                grad[i] += c.cross(&a) / 6.0;
                grad_centroid += a.cross(&b) / 6.0;
            }
        }
        if with_gradient {
            for &v in &rim_ids {
                grad[v] += grad_centroid * inv_m;
            }
        }
    }

    (volume, grad)
}

fn displaced_positions(
    mesh: &ShellMesh,
    displacement: Option<&DisplacementField>,
) -> Result<Vec<Vector3<f64>>, GeometryError> {
    match displacement {
        None => Ok(mesh.vertices.clone()),
        Some(field) => {
            if field.d.len() != mesh.n_vertices() {
                return Err(GeometryError::DimensionMismatch {
                    got: field.d.len(),
                    expected: mesh.n_vertices(),
                });
            }
            Ok(mesh
                .vertices
                .iter()
                .zip(&field.d)
                .map(|(p, d)| p + d)
                .collect())
        }
    }
}
