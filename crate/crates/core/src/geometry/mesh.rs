//! Construction of the hemisphere (and benchmark sphere) shell meshes.
//!
//! Meshes are structured latitude/longitude triangulations: `n = 2^(r+1)`
//! co-latitude bands at refinement `r`, each ring holding `4n` vertices, so
//! vertex count grows roughly fourfold per refinement level. The equator
//! ring of the hemisphere lies exactly in the plane `z = 0` and forms the
//! ordered rim loop. All triangles are wound so their normals point away
//! from the chamber interior.

use super::{GeometryError, Region};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Per-triangle wall thickness specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThicknessSpec {
    /// One thickness for every triangle, in mm.
    Uniform { thickness_mm: f64 },
    /// Thickness per region tag, in mm, ordered as [`Region::ALL`].
    PerRegion { thickness_mm: [f64; 6] },
}

impl ThicknessSpec {
    /// Thickness for a region under this specification.
    pub fn for_region(&self, region: Region) -> f64 {
        match self {
            ThicknessSpec::Uniform { thickness_mm } => *thickness_mm,
            ThicknessSpec::PerRegion { thickness_mm } => thickness_mm[region.index()],
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let ok = match self {
            ThicknessSpec::Uniform { thickness_mm } => *thickness_mm > 0.0,
            ThicknessSpec::PerRegion { thickness_mm } => thickness_mm.iter().all(|t| *t > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidSpec(
                "thickness values must be positive".into(),
            ))
        }
    }
}

/// Parameters of the idealised hemispherical chamber mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HemisphereSpec {
    /// Chamber radius in mm.
    pub radius_mm: f64,
    /// Refinement level; the mesh has `2^(r+1)` co-latitude bands.
    pub refinement: u32,
    /// Wall thickness specification.
    pub thickness: ThicknessSpec,
    /// Roof cap half-angle (co-latitude of the roof/quadrant boundary), deg.
    pub cap_angle_deg: f64,
    /// Width of the stiff rim band above the equator, deg.
    pub rim_band_deg: f64,
    /// Co-latitude radius of the vein anchor patch around the pole, deg.
    pub vein_patch_deg: f64,
}

impl Default for HemisphereSpec {
    fn default() -> Self {
        HemisphereSpec {
            radius_mm: 20.0,
            refinement: 2,
            thickness: ThicknessSpec::Uniform { thickness_mm: 2.0 },
            cap_angle_deg: 35.0,
            rim_band_deg: 5.0,
            vein_patch_deg: 12.0,
        }
    }
}

/// Triangulated shell with region tags, fibre frames and thickness.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellMesh {
    /// Vertex positions in mm (the imaged end-diastolic configuration).
    pub vertices: Vec<Vector3<f64>>,
    /// Triangles as vertex index triples, wound with outward normals.
    pub triangles: Vec<[usize; 3]>,
    /// Region tag per triangle.
    pub regions: Vec<Region>,
    /// Unit fibre direction per triangle, in the triangle plane.
    pub fibers: Vec<Vector3<f64>>,
    /// Unit sheet direction per triangle, in-plane and orthogonal to fibre.
    pub sheets: Vec<Vector3<f64>>,
    /// Wall thickness per triangle in mm.
    pub thickness: Vec<f64>,
    /// Ordered rim loop vertex ids (empty for the closed benchmark sphere).
    pub rim_vertices: Vec<usize>,
    /// Vertex ids of the pulmonary-vein anchor patch.
    pub vein_vertices: Vec<usize>,
    /// Nominal chamber radius in mm.
    pub radius_mm: f64,
}

impl ShellMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Unit outward normal of triangle `t` in the reference configuration.
    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let [i, j, k] = self.triangles[t];
        let e1 = self.vertices[j] - self.vertices[i];
        let e2 = self.vertices[k] - self.vertices[i];
        e1.cross(&e2).normalize()
    }

    /// Area of triangle `t` in mm².
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        let e1 = self.vertices[j] - self.vertices[i];
        let e2 = self.vertices[k] - self.vertices[i];
        0.5 * e1.cross(&e2).norm()
    }

    /// Centroid of triangle `t`.
    pub fn triangle_centroid(&self, t: usize) -> Vector3<f64> {
        let [i, j, k] = self.triangles[t];
        (self.vertices[i] + self.vertices[j] + self.vertices[k]) / 3.0
    }

    /// Total curved surface area in mm².
    pub fn surface_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// True if the vertex belongs to the rim loop.
    pub fn is_rim_vertex(&self, v: usize) -> bool {
        self.rim_vertices.contains(&v)
    }

    /// Area-weighted unit outward normal at each vertex.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let area = self.triangle_area(t);
            let n = self.triangle_normal(t);
            for &v in tri {
                normals[v] += area * n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// One-third of the area of all triangles touching each vertex.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let share = self.triangle_area(t) / 3.0;
            for &v in tri {
                areas[v] += share;
            }
        }
        areas
    }

    /// Undirected edge → adjacent triangle indices.
    pub(crate) fn edge_map(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                map.entry(key).or_default().push(t);
            }
        }
        map
    }

    /// Directed boundary edges (used by exactly one triangle), in the
    /// orientation induced by the surface winding.
    pub(crate) fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let counts = self.edge_map();
        let mut edges = Vec::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                if counts[&(a.min(b), a.max(b))].len() == 1 {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    /// Structural validity: edge manifoldness, positive areas, and a rim
    /// loop that matches the declared rim vertices.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= self.n_vertices() {
                    return Err(GeometryError::InvalidSpec(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
            }
            let area = self.triangle_area(t);
            if !area.is_finite() || area <= 1e-12 {
                return Err(GeometryError::DegenerateTriangle {
                    index: t,
                    area_mm2: area,
                });
            }
        }
        if self.regions.len() != self.n_triangles()
            || self.fibers.len() != self.n_triangles()
            || self.sheets.len() != self.n_triangles()
            || self.thickness.len() != self.n_triangles()
        {
            return Err(GeometryError::InvalidSpec(
                "per-triangle attribute arrays must match triangle count".into(),
            ));
        }
        for (key, tris) in self.edge_map() {
            if tris.len() > 2 {
                return Err(GeometryError::InvalidSpec(format!(
                    "edge {key:?} shared by {} triangles",
                    tris.len()
                )));
            }
        }
        // Boundary edges must lie on the declared rim loop.
        let rim: std::collections::HashSet<usize> = self.rim_vertices.iter().copied().collect();
        let boundary = self.boundary_edges();
        let off_rim = boundary
            .iter()
            .filter(|(a, b)| !rim.contains(a) || !rim.contains(b))
            .count();
        if off_rim > 0 {
            return Err(GeometryError::OpenSurface { n_open: off_rim });
        }
        if boundary.is_empty() != self.rim_vertices.is_empty() {
            return Err(GeometryError::InvalidSpec(
                "rim vertex list inconsistent with mesh boundary".into(),
            ));
        }
        Ok(())
    }

    /// Copy of the mesh re-anchored at new reference positions (used by the
    /// unloading iteration). Region tags, thickness and connectivity are
    /// kept; fibre frames are re-derived from the new geometry.
    pub fn with_reference_positions(&self, positions: Vec<Vector3<f64>>) -> ShellMesh {
        let mut mesh = self.clone();
        assert_eq!(positions.len(), mesh.n_vertices());
        mesh.vertices = positions;
        assign_fibers(&mut mesh);
        mesh
    }
}

fn colatitude_deg(p: &Vector3<f64>) -> f64 {
    p.xy().norm().atan2(p.z).to_degrees()
}

fn azimuth_deg(p: &Vector3<f64>) -> f64 {
    p.y.atan2(p.x).to_degrees()
}

/// Builds the hemispherical chamber mesh for a specification.
pub fn build_hemisphere_mesh(spec: &HemisphereSpec) -> Result<ShellMesh, GeometryError> {
    if !spec.radius_mm.is_finite() || spec.radius_mm <= 0.0 {
        return Err(GeometryError::InvalidSpec(format!(
            "radius must be positive, got {}",
            spec.radius_mm
        )));
    }
    if spec.refinement > 7 {
        return Err(GeometryError::InvalidSpec(format!(
            "refinement {} exceeds the supported maximum of 7",
            spec.refinement
        )));
    }
    if !(spec.cap_angle_deg > 0.0 && spec.cap_angle_deg < 90.0) {
        return Err(GeometryError::InvalidSpec(format!(
            "cap angle must lie in (0°, 90°), got {}",
            spec.cap_angle_deg
        )));
    }
    if !(spec.rim_band_deg >= 0.0 && spec.rim_band_deg < 45.0) {
        return Err(GeometryError::InvalidSpec(format!(
            "rim band must lie in [0°, 45°), got {}",
            spec.rim_band_deg
        )));
    }
    spec.thickness.validate()?;

    let n = 1usize << (spec.refinement + 1); // co-latitude bands
    let m = 4 * n; // vertices per ring
    let r = spec.radius_mm;

    // Alternate rings are staggered by half an azimuthal step so that every
    // band triangle is isoceles and mirror-symmetric; the circumferential
    // fibre direction then lies exactly in the triangle plane.
    let delta = 2.0 * std::f64::consts::PI / m as f64;
    let offset = |i: usize| if i % 2 == 1 { 0.5 } else { 0.0 };
    let mut vertices = Vec::with_capacity(1 + n * m);
    vertices.push(Vector3::new(0.0, 0.0, r)); // pole
    for i in 1..=n {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / n as f64;
        let (sin_t, cos_t) = (theta.sin(), theta.cos());
        let z = if i == n { 0.0 } else { r * cos_t };
        for j in 0..m {
            let phi = delta * (j as f64 + offset(i));
            vertices.push(Vector3::new(r * sin_t * phi.cos(), r * sin_t * phi.sin(), z));
        }
    }
    let ring = |i: usize, j: usize| 1 + (i - 1) * m + (j % m);

    let mut triangles = Vec::with_capacity(m + (n - 1) * 2 * m);
    for j in 0..m {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n {
        for j in 0..m {
            let (u0, u1) = (ring(i, j), ring(i, j + 1));
            let (l0, l1) = (ring(i + 1, j), ring(i + 1, j + 1));
            if offset(i + 1) > offset(i) {
                // Lower ring staggered right of the upper ring.
                triangles.push([u0, l0, u1]);
                triangles.push([l0, l1, u1]);
            } else {
                // Upper ring staggered right of the lower ring.
                triangles.push([u0, l0, l1]);
                triangles.push([u0, l1, u1]);
            }
        }
    }

    let rim_vertices: Vec<usize> = (0..m).map(|j| ring(n, j)).collect();
    let vein_vertices: Vec<usize> = vertices
        .iter()
        .enumerate()
        .filter(|(_, p)| colatitude_deg(p) <= spec.vein_patch_deg)
        .map(|(v, _)| v)
        .collect();

    let n_tris = triangles.len();
    let mut mesh = ShellMesh {
        vertices,
        triangles,
        regions: vec![Region::Roof; n_tris],
        fibers: vec![Vector3::zeros(); n_tris],
        sheets: vec![Vector3::zeros(); n_tris],
        thickness: vec![1.0; n_tris],
        rim_vertices,
        vein_vertices,
        radius_mm: r,
    };
    assign_regions(&mut mesh, spec.cap_angle_deg, spec.rim_band_deg);
    assign_fibers(&mut mesh);
    for t in 0..mesh.n_triangles() {
        mesh.thickness[t] = spec.thickness.for_region(mesh.regions[t]);
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Builds a closed sphere mesh for the inflation benchmark. All triangles
/// carry the `roof` tag; region semantics are not meaningful here.
pub fn build_sphere_mesh(
    radius_mm: f64,
    refinement: u32,
    thickness_mm: f64,
) -> Result<ShellMesh, GeometryError> {
    if !(radius_mm.is_finite() && radius_mm > 0.0 && thickness_mm.is_finite() && thickness_mm > 0.0) {
        return Err(GeometryError::InvalidSpec(
            "radius and thickness must be positive".into(),
        ));
    }
    if refinement > 7 {
        return Err(GeometryError::InvalidSpec(format!(
            "refinement {refinement} exceeds the supported maximum of 7"
        )));
    }
    let n = 1usize << (refinement + 1); // bands per hemisphere
    let m = 4 * n;
    let rings = 2 * n - 1;
    let r = radius_mm;

    let delta = 2.0 * std::f64::consts::PI / m as f64;
    let offset = |i: usize| if i % 2 == 1 { 0.5 } else { 0.0 };
    let mut vertices = Vec::with_capacity(2 + rings * m);
    vertices.push(Vector3::new(0.0, 0.0, r)); // north pole
    for i in 1..=rings {
        let theta = std::f64::consts::PI * i as f64 / (2 * n) as f64;
        for j in 0..m {
            let phi = delta * (j as f64 + offset(i));
            vertices.push(Vector3::new(
                r * theta.sin() * phi.cos(),
                r * theta.sin() * phi.sin(),
                r * theta.cos(),
            ));
        }
    }
    let south = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, -r));
    let ring = |i: usize, j: usize| 1 + (i - 1) * m + (j % m);

    let mut triangles = Vec::new();
    for j in 0..m {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..rings {
        for j in 0..m {
            let (u0, u1) = (ring(i, j), ring(i, j + 1));
            let (l0, l1) = (ring(i + 1, j), ring(i + 1, j + 1));
            if offset(i + 1) > offset(i) {
                triangles.push([u0, l0, u1]);
                triangles.push([l0, l1, u1]);
            } else {
                triangles.push([u0, l0, l1]);
                triangles.push([u0, l1, u1]);
            }
        }
    }
    for j in 0..m {
        triangles.push([ring(rings, j + 1), ring(rings, j), south]);
    }

    let n_tris = triangles.len();
    let mut mesh = ShellMesh {
        vertices,
        triangles,
        regions: vec![Region::Roof; n_tris],
        fibers: vec![Vector3::zeros(); n_tris],
        sheets: vec![Vector3::zeros(); n_tris],
        thickness: vec![thickness_mm; n_tris],
        rim_vertices: Vec::new(),
        vein_vertices: Vec::new(),
        radius_mm: r,
    };
    assign_fibers(&mut mesh);
    mesh.validate()?;
    Ok(mesh)
}

/// Retags every triangle from its geometry: a roof cap for centroid
/// co-latitudes below `cap_angle_deg`, a rim band for triangles touching a
/// vertex within `rim_band_deg` of the equator, and four azimuthal
/// quadrants in between (anterior around +x, septum around +y, posterior
/// around −x, lateral around −y). A cleanup pass removes isolated
/// single-triangle islands by adopting the majority neighbour tag.
pub fn assign_regions(mesh: &mut ShellMesh, cap_angle_deg: f64, rim_band_deg: f64) {
    let rim_colat = 90.0 - rim_band_deg;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let touches_rim = tri
            .iter()
            .any(|&v| colatitude_deg(&mesh.vertices[v]) >= rim_colat - 1e-9);
        let c = mesh.triangle_centroid(t);
        let colat = colatitude_deg(&c);
        mesh.regions[t] = if touches_rim {
            Region::Rim
        } else if colat < cap_angle_deg {
            Region::Roof
        } else {
            match azimuth_deg(&c).rem_euclid(360.0) {
                a if !(45.0..315.0).contains(&a) => Region::Anterior,
                a if a < 135.0 => Region::Septum,
                a if a < 225.0 => Region::Posterior,
                _ => Region::Lateral,
            }
        };
    }

    // Island cleanup: a triangle none of whose edge neighbours shares its
    // tag adopts the most common neighbour tag (ties by region order).
    let edge_map = mesh.edge_map();
    let mut neighbours = vec![Vec::new(); mesh.n_triangles()];
    for tris in edge_map.values() {
        if let [a, b] = tris[..] {
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
    }
    for _ in 0..8 {
        let mut changed = false;
        for (t, nbrs) in neighbours.iter().enumerate() {
            let tags: Vec<Region> = nbrs.iter().map(|&u| mesh.regions[u]).collect();
            if !tags.is_empty() && !tags.contains(&mesh.regions[t]) {
                let mut counts = [0usize; 6];
                for tag in &tags {
                    counts[tag.index()] += 1;
                }
                let best = Region::ALL[counts
                    .iter()
                    .enumerate()
                    .max_by_key(|(i, c)| (**c, usize::MAX - i))
                    .unwrap()
                    .0];
                mesh.regions[t] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Fallback threshold below which the circumferential direction is
/// considered degenerate and the projected global x-axis is used instead.
const POLE_FALLBACK_COLAT_DEG: f64 = 2.0;

/// Assigns circumferential fibre directions and in-plane sheet directions.
///
/// The fibre is the local longitude direction `(−sin φ, cos φ, 0)` at the
/// triangle centroid, projected into the triangle plane and normalised;
/// within [`POLE_FALLBACK_COLAT_DEG`] of either pole the projected global
/// x-axis is used. The sheet direction is `n × f`.
pub fn assign_fibers(mesh: &mut ShellMesh) {
    for t in 0..mesh.n_triangles() {
        let c = mesh.triangle_centroid(t);
        let colat = colatitude_deg(&c);
        let raw = if !(POLE_FALLBACK_COLAT_DEG..=180.0 - POLE_FALLBACK_COLAT_DEG).contains(&colat) {
            Vector3::new(1.0, 0.0, 0.0)
        } else {
            let phi = c.y.atan2(c.x);
            Vector3::new(-phi.sin(), phi.cos(), 0.0)
        };
        let n = mesh.triangle_normal(t);
        let projected = raw - n * raw.dot(&n);
        let fibre = if projected.norm() > 1e-9 {
            projected.normalize()
        } else {
            // The raw direction is parallel to the normal; fall back to the
            // projected x-axis (cannot itself be parallel for our meshes).
            let alt = Vector3::new(1.0, 0.0, 0.0);
            (alt - n * alt.dot(&n)).normalize()
        };
        mesh.fibers[t] = fibre;
        mesh.sheets[t] = n.cross(&fibre).normalize();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn refinement_zero_base_mesh_is_valid() {
        let mesh = build_hemisphere_mesh(&HemisphereSpec {
            refinement: 0,
            ..HemisphereSpec::default()
        })
        .unwrap();
        assert_eq!(mesh.n_vertices(), 17);
        assert_eq!(mesh.n_triangles(), 24);
        mesh.validate().unwrap();
        // Rim loop is the 8-vertex equator ring, exactly at z = 0.
        assert_eq!(mesh.rim_vertices.len(), 8);
        for &v in &mesh.rim_vertices {
            assert_eq!(mesh.vertices[v].z, 0.0);
        }
    }

    #[test]
    fn vertex_count_grows_about_fourfold_per_level() {
        let counts: Vec<usize> = (0..4)
            .map(|r| {
                build_hemisphere_mesh(&HemisphereSpec {
                    refinement: r,
                    ..HemisphereSpec::default()
                })
                .unwrap()
                .n_vertices()
            })
            .collect();
        for w in counts.windows(2) {
            let ratio = w[1] as f64 / w[0] as f64;
            assert!((3.5..4.5).contains(&ratio), "growth ratio {ratio}");
        }
    }

    #[test]
    fn all_six_region_tags_present_at_refinement_three() {
        let mesh = build_hemisphere_mesh(&HemisphereSpec {
            refinement: 3,
            ..HemisphereSpec::default()
        })
        .unwrap();
        for region in Region::ALL {
            assert!(mesh.regions.contains(&region), "missing {region}");
        }
    }

    #[test]
    fn no_region_islands() {
        for refinement in [1, 2, 3] {
            let mesh = build_hemisphere_mesh(&HemisphereSpec {
                refinement,
                ..HemisphereSpec::default()
            })
            .unwrap();
            let edge_map = mesh.edge_map();
            let mut neighbours = vec![Vec::new(); mesh.n_triangles()];
            for tris in edge_map.values() {
                if let [a, b] = tris[..] {
                    neighbours[a].push(b);
                    neighbours[b].push(a);
                }
            }
            for (t, nbrs) in neighbours.iter().enumerate() {
                let shared = nbrs
                    .iter()
                    .filter(|&&u| mesh.regions[u] == mesh.regions[t])
                    .count();
                assert!(
                    shared > 0,
                    "triangle {t} ({}) isolated at refinement {refinement}",
                    mesh.regions[t]
                );
            }
        }
    }

    #[test]
    fn roof_area_fraction_matches_spherical_cap_formula() {
        // Cap angle 30°: analytic fraction of the curved surface is
        // 1 − cos 30° ≈ 0.13397. Tag boundaries quantise to mesh bands, so
        // the discrete fraction converges as the mesh refines.
        let analytic = 1.0 - (30.0_f64).to_radians().cos();
        let fraction_at = |refinement: u32| {
            let mut mesh = build_hemisphere_mesh(&HemisphereSpec {
                refinement,
                ..HemisphereSpec::default()
            })
            .unwrap();
            assign_regions(&mut mesh, 30.0, 5.0);
            let roof: f64 = (0..mesh.n_triangles())
                .filter(|&t| mesh.regions[t] == Region::Roof)
                .map(|t| mesh.triangle_area(t))
                .sum();
            roof / mesh.surface_area()
        };
        // Absolute two percentage points at refinement 3 …
        assert!(
            (fraction_at(3) - analytic).abs() < 0.02,
            "refinement 3 fraction {}",
            fraction_at(3)
        );
        // … and 2 % relative once the bands resolve the cap boundary.
        assert_relative_eq!(fraction_at(5), analytic, max_relative = 0.02);
    }

    #[test]
    fn per_region_thickness_map_is_applied() {
        let mut thickness_mm = [1.5; 6];
        thickness_mm[Region::Roof.index()] = 3.0;
        let mesh = build_hemisphere_mesh(&HemisphereSpec {
            refinement: 2,
            thickness: ThicknessSpec::PerRegion { thickness_mm },
            ..HemisphereSpec::default()
        })
        .unwrap();
        for t in 0..mesh.n_triangles() {
            let expect = if mesh.regions[t] == Region::Roof {
                3.0
            } else {
                1.5
            };
            assert_eq!(mesh.thickness[t], expect, "triangle {t}");
        }
    }

    #[test]
    fn fibres_are_unit_in_plane_and_circumferential() {
        let mesh = build_hemisphere_mesh(&HemisphereSpec {
            refinement: 3,
            ..HemisphereSpec::default()
        })
        .unwrap();
        for t in 0..mesh.n_triangles() {
            let f = mesh.fibers[t];
            let s = mesh.sheets[t];
            let n = mesh.triangle_normal(t);
            assert_relative_eq!(f.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-12);
            assert!(f.dot(&n).abs() < 1e-12, "fibre out of plane at {t}");
            assert!(f.dot(&s).abs() < 1e-12, "frame not orthogonal at {t}");
        }
        // Triangles near the equator: the longitude direction is already
        // horizontal and in-plane, so fibres have no vertical component.
        for t in 0..mesh.n_triangles() {
            let c = mesh.triangle_centroid(t);
            if colatitude_deg(&c) > 85.0 {
                assert!(
                    mesh.fibers[t].z.abs() < 1e-6,
                    "equatorial fibre has z = {}",
                    mesh.fibers[t].z
                );
            }
        }
    }

    #[test]
    fn pole_triangles_use_fallback_direction() {
        // A refinement-5 mesh has pole-fan centroids within 2° co-latitude.
        let mesh = build_hemisphere_mesh(&HemisphereSpec {
            refinement: 5,
            ..HemisphereSpec::default()
        })
        .unwrap();
        let mut fallback_seen = 0;
        for t in 0..mesh.n_triangles() {
            let c = mesh.triangle_centroid(t);
            if colatitude_deg(&c) < POLE_FALLBACK_COLAT_DEG {
                fallback_seen += 1;
                let n = mesh.triangle_normal(t);
                let raw = Vector3::new(1.0, 0.0, 0.0);
                let expect = (raw - n * raw.dot(&n)).normalize();
                assert_relative_eq!(mesh.fibers[t].dot(&expect), 1.0, epsilon = 1e-9);
            }
        }
        assert!(fallback_seen > 0, "no pole-fan triangles under threshold");
    }

    #[test]
    fn sphere_mesh_is_closed() {
        let mesh = build_sphere_mesh(10.0, 1, 1.0).unwrap();
        assert!(mesh.boundary_edges().is_empty());
        assert!(mesh.rim_vertices.is_empty());
        mesh.validate().unwrap();
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(build_hemisphere_mesh(&HemisphereSpec {
            radius_mm: -1.0,
            ..HemisphereSpec::default()
        })
        .is_err());
        assert!(build_hemisphere_mesh(&HemisphereSpec {
            refinement: 12,
            ..HemisphereSpec::default()
        })
        .is_err());
        assert!(build_hemisphere_mesh(&HemisphereSpec {
            thickness: ThicknessSpec::Uniform { thickness_mm: 0.0 },
            ..HemisphereSpec::default()
        })
        .is_err());
    }
}
