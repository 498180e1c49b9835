//! Total-potential-energy assembly for the membrane shell.
//!
//! Per element, the in-plane deformation gradient in the fibre frame is
//! `G = D · B` where `D` holds the deformed edge vectors (3×2) and
//! `B = Dref⁻¹` the inverse reference edge matrix in the orthonormal
//! fibre/sheet frame. The strain energy depends on `C₂ = GᵀG` only; its
//! gradient with respect to the deformed edges is `∂ψ/∂D = G·M·Bᵀ` with
//!
//! ```text
//! M = [ ∂ψ/∂E_ff     ∂ψ/∂E_fs / 2 ]
//!     [ ∂ψ/∂E_fs / 2  ∂ψ/∂E_ss    ]
//! ```
//!
//! where the `∂ψ/∂E` entries include the chain-rule contribution of the
//! through-thickness strain `E_nn(det C₂)` under the incompressibility
//! reduction (or the `κ ln²J` area penalty otherwise).

use super::loading::{pericardial_scale, LoadingParameters};
use super::{MechanicsError, RegionalMaterialMap};
use crate::geometry::{Region, ShellMesh};
use crate::material::{
    guccione_energy, guccione_stress, GreenLagrangeStrain, GuccioneParams, MaterialError,
    NeoHookeanParams,
};
use nalgebra::{Matrix2, Vector3};

#[derive(Clone, Copy, Debug)]
enum MaterialKind {
    Guccione(GuccioneParams),
    NeoHookean(NeoHookeanParams),
}

/// Width of the C² smoothing layer of the one-sided penalty, mm.
const PENALTY_SMOOTHING_MM: f64 = 1e-3;

/// C² approximation of `u ↦ ½·max(0, u)²` with a cubic-Hermite force in a
/// `PENALTY_SMOOTHING_MM`-wide layer. The kink of the exact one-sided
/// quadratic has a discontinuous second derivative that degrades the
/// quasi-Newton solver; the smoothed version differs from it by at most
/// `δ²/12` in value and is exact for `u ≥ δ`, up to a constant shift.
fn smoothed_plus_quadratic(u: f64) -> (f64, f64) {
    const D: f64 = PENALTY_SMOOTHING_MM;
    if u <= 0.0 {
        (0.0, 0.0)
    } else if u < D {
        let u2 = u * u;
        (
            2.0 * u2 * u / (3.0 * D) - u2 * u2 / (4.0 * D * D),
            2.0 * u2 / D - u2 * u / (D * D),
        )
    } else {
        (0.5 * u * u - D * D / 12.0, u)
    }
}

#[derive(Clone, Copy, Debug)]
struct ElementRef {
    /// Inverse of the 2×2 reference edge matrix in the fibre frame.
    b: Matrix2<f64>,
    /// Reference area in mm².
    area_mm2: f64,
    /// Wall thickness in mm.
    thickness_mm: f64,
    /// Outward reference normal (for inversion detection).
    normal: Vector3<f64>,
}

/// Discretised mechanical model bound to a reference configuration.
///
/// `reference` supplies the strain-free geometry (the unloaded estimate
/// during the transient; the imaged mesh elsewhere), while `anchor`
/// supplies the imaged end-diastolic positions to which the pericardial
/// penalty and vein springs are attached.
pub struct MechanicsModel {
    triangles: Vec<[usize; 3]>,
    elements: Vec<ElementRef>,
    materials: Vec<MaterialKind>,
    /// Directed rim boundary edges used to close the volume integral.
    cap_edges: Vec<(usize, usize)>,
    rim_ids: Vec<usize>,
    /// Anchor (imaged ED) positions, normals and areas for the penalties.
    anchor_pos: Vec<Vector3<f64>>,
    anchor_normal: Vec<Vector3<f64>>,
    anchor_area: Vec<f64>,
    /// Combined pericardial stiffness·coverage per vertex, kPa/mm.
    k_peri_mm: Vec<f64>,
    /// Vein-anchor spring stiffness per vertex, kPa/mm (zero off the patch).
    k_vein_mm: Vec<f64>,
    /// Free (non-rim) vertex ids in ascending order.
    free: Vec<usize>,
    /// Per-vertex inverse stiffness estimate (mm per kPa·mm²), used to
    /// precondition the equilibrium solves.
    compliance: Vec<f64>,
    incompressible: bool,
    n_vertices: usize,
}

impl MechanicsModel {
    /// Builds the model. `reference` and `anchor` must share topology.
    pub fn new(
        reference: &ShellMesh,
        anchor: &ShellMesh,
        materials: &RegionalMaterialMap,
        load: &LoadingParameters,
    ) -> Result<MechanicsModel, MechanicsError> {
        if reference.n_vertices() != anchor.n_vertices()
            || reference.triangles != anchor.triangles
        {
            return Err(MechanicsError::InvalidState(
                "reference and anchor meshes must share topology".into(),
            ));
        }
        let n_tris = reference.n_triangles();
        let mut elements = Vec::with_capacity(n_tris);
        let mut kinds = Vec::with_capacity(n_tris);
        for t in 0..n_tris {
            let [i, j, k] = reference.triangles[t];
            let d1 = reference.vertices[j] - reference.vertices[i];
            let d2 = reference.vertices[k] - reference.vertices[i];
            let normal_raw = d1.cross(&d2);
            let two_area = normal_raw.norm();
            if two_area <= 1e-12 {
                return Err(MechanicsError::InvalidState(format!(
                    "degenerate reference triangle {t}"
                )));
            }
            let f = reference.fibers[t];
            let s = reference.sheets[t];
            let dref = Matrix2::new(f.dot(&d1), f.dot(&d2), s.dot(&d1), s.dot(&d2));
            let det = dref.determinant();
            if det <= 0.0 {
                return Err(MechanicsError::InvalidState(format!(
                    "left-handed fibre frame on triangle {t}"
                )));
            }
            elements.push(ElementRef {
                b: dref.try_inverse().ok_or_else(|| {
                    MechanicsError::InvalidState(format!("singular reference edges on triangle {t}"))
                })?,
                area_mm2: 0.5 * two_area,
                thickness_mm: reference.thickness[t],
                normal: normal_raw / two_area,
            });
            kinds.push(match reference.regions[t] {
                Region::Rim => MaterialKind::NeoHookean(materials.rim),
                wall => MaterialKind::Guccione(*materials.wall_params(wall).unwrap()),
            });
        }

        let scale = pericardial_scale(anchor, load.pth);
        let anchor_area = anchor.vertex_areas();
        // kPa/µm → kPa/mm.
        let k_peri = load.k_peri_kpa_per_um * 1000.0;
        let k_vein = load.k_vein_kpa_per_um * 1000.0;
        let mut k_vein_mm = vec![0.0; anchor.n_vertices()];
        for &v in &anchor.vein_vertices {
            k_vein_mm[v] = k_vein;
        }

        let rim_set: std::collections::HashSet<usize> =
            reference.rim_vertices.iter().copied().collect();
        let free = (0..reference.n_vertices())
            .filter(|v| !rim_set.contains(v))
            .collect();

        // Per-vertex stiffness estimate: membrane tangent modulus times
        // thickness shared over the triangle's vertices, plus the anchor
        // penalties. Inverted, it preconditions the minimiser so the stiff
        // rim band and the compliant wall converge at similar rates.
        let mut stiffness = vec![0.0_f64; reference.n_vertices()];
        for (t, tri) in reference.triangles.iter().enumerate() {
            let modulus = match &kinds[t] {
                MaterialKind::Guccione(p) => p.c_kpa * p.alpha * p.b_f.max(p.b_t),
                MaterialKind::NeoHookean(p) => 4.0 * p.c_kpa,
            };
            let share = modulus * reference.thickness[t] / 3.0;
            for &v in tri {
                stiffness[v] += share;
            }
        }
        for v in 0..reference.n_vertices() {
            stiffness[v] += (k_peri * scale[v] + k_vein_mm[v]) * anchor_area[v];
        }
        let k_floor = stiffness.iter().cloned().fold(0.0_f64, f64::max).max(1.0) * 1e-8;
        let compliance = stiffness.iter().map(|k| 1.0 / k.max(k_floor)).collect();

        Ok(MechanicsModel {
            triangles: reference.triangles.clone(),
            elements,
            materials: kinds,
            cap_edges: reference.boundary_edges(),
            rim_ids: reference.rim_vertices.clone(),
            anchor_pos: anchor.vertices.clone(),
            anchor_normal: anchor.vertex_normals(),
            anchor_area,
            k_peri_mm: scale.iter().map(|s| s * k_peri).collect(),
            k_vein_mm,
            free,
            compliance,
            incompressible: load.incompressible,
            n_vertices: reference.n_vertices(),
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Free (non-rim) vertex ids.
    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    /// Rim vertex ids (prescribed during solves).
    pub fn rim_vertices(&self) -> &[usize] {
        &self.rim_ids
    }

    /// Anchor (imaged ED) positions.
    pub fn anchor_positions(&self) -> &[Vector3<f64>] {
        &self.anchor_pos
    }

    /// Per-vertex inverse stiffness estimate for preconditioning.
    pub fn compliance(&self) -> &[f64] {
        &self.compliance
    }

    /// Largest anchor radius, used to scale convergence tolerances.
    pub fn characteristic_radius_mm(&self) -> f64 {
        self.anchor_pos
            .iter()
            .map(|p| p.norm())
            .fold(0.0_f64, f64::max)
    }

    /// Enclosed volume of the deformed surface (rim cap included), mm³.
    pub fn volume(&self, positions: &[Vector3<f64>]) -> f64 {
        let (v, _) = self.volume_impl(positions, false);
        v
    }

    /// Total potential energy at `positions` under `pressure_kpa`, with the
    /// gradient accumulated into `grad` (which is zeroed first).
    ///
    /// Energy units are kPa·mm³; the gradient is kPa·mm² per coordinate.
    pub fn energy_and_gradient(
        &self,
        positions: &[Vector3<f64>],
        pressure_kpa: f64,
        grad: &mut [Vector3<f64>],
    ) -> Result<f64, MechanicsError> {
        assert_eq!(positions.len(), self.n_vertices);
        assert_eq!(grad.len(), self.n_vertices);
        grad.iter_mut().for_each(|g| *g = Vector3::zeros());
        let mut energy = 0.0;

        // Elastic membrane energy.
        for (t, tri) in self.triangles.iter().enumerate() {
            let el = &self.elements[t];
            let d1 = positions[tri[1]] - positions[tri[0]];
            let d2 = positions[tri[2]] - positions[tri[0]];
            if d1.cross(&d2).dot(&el.normal) <= 0.0 {
                return Err(MaterialError::InvertedElement { det: 0.0 }.into());
            }
            // G = D · B, columns g0, g1.
            let g0 = d1 * el.b[(0, 0)] + d2 * el.b[(1, 0)];
            let g1 = d1 * el.b[(0, 1)] + d2 * el.b[(1, 1)];
            let c00 = g0.dot(&g0);
            let c11 = g1.dot(&g1);
            let c01 = g0.dot(&g1);
            let det_c = c00 * c11 - c01 * c01;
            if det_c <= 0.0 {
                return Err(MaterialError::InvertedElement { det: det_c }.into());
            }
            let (psi, m00, m11, m01) = match &self.materials[t] {
                MaterialKind::Guccione(p) => {
                    self.guccione_element(c00, c11, c01, det_c, p)?
                }
                MaterialKind::NeoHookean(p) => {
                    self.neo_hookean_element(c00, c11, c01, det_c, p)?
                }
            };
            let w = el.thickness_mm * el.area_mm2;
            energy += w * psi;
            // ∂ψ/∂g0 = m00·g0 + m01·g1 ; ∂ψ/∂g1 = m11·g1 + m01·g0; then map
            // through Bᵀ to edge gradients.
            let dg0 = g0 * m00 + g1 * m01;
            let dg1 = g1 * m11 + g0 * m01;
            let gd1 = (dg0 * el.b[(0, 0)] + dg1 * el.b[(0, 1)]) * w;
            let gd2 = (dg0 * el.b[(1, 0)] + dg1 * el.b[(1, 1)]) * w;
            grad[tri[0]] -= gd1 + gd2;
            grad[tri[1]] += gd1;
            grad[tri[2]] += gd2;
        }

        // One-sided pericardial penalty and vein springs on displacement
        // from the imaged anchor configuration.
        for v in 0..self.n_vertices {
            let u = positions[v] - self.anchor_pos[v];
            let k_p = self.k_peri_mm[v] * self.anchor_area[v];
            if k_p > 0.0 {
                let un = u.dot(&self.anchor_normal[v]);
                let (phi, dphi) = smoothed_plus_quadratic(un);
                if phi > 0.0 {
                    energy += k_p * phi;
                    grad[v] += self.anchor_normal[v] * (k_p * dphi);
                }
            }
            let k_v = self.k_vein_mm[v] * self.anchor_area[v];
            if k_v > 0.0 {
                energy += 0.5 * k_v * u.norm_squared();
                grad[v] += u * k_v;
            }
        }

        // Pressure work −p·V.
        if pressure_kpa != 0.0 {
            let (volume, vgrad) = self.volume_impl(positions, true);
            energy -= pressure_kpa * volume;
            for v in 0..self.n_vertices {
                grad[v] -= vgrad[v] * pressure_kpa;
            }
        }

        Ok(energy)
    }

    /// Guccione membrane response: energy density and the effective
    /// derivative matrix entries (m00, m11, m01) = ∂ψ/∂(c00, c11, 2·c01)…
    /// expressed directly in the `M` convention of the module docs.
    fn guccione_element(
        &self,
        c00: f64,
        c11: f64,
        c01: f64,
        det_c: f64,
        p: &GuccioneParams,
    ) -> Result<(f64, f64, f64, f64), MechanicsError> {
        let e_ff = 0.5 * (c00 - 1.0);
        let e_ss = 0.5 * (c11 - 1.0);
        let e_fs = 0.5 * c01;
        let (e_nn, j) = if self.incompressible {
            (0.5 * (1.0 / det_c - 1.0), 1.0)
        } else {
            (0.0, det_c.sqrt())
        };
        let strain = GreenLagrangeStrain {
            e_ff,
            e_ss,
            e_nn,
            e_fs,
            e_fn: 0.0,
            e_sn: 0.0,
            j,
        };
        let psi = guccione_energy(&strain, p)?;
        let s = guccione_stress(&strain, p)?;
        let (mut d_ff, mut d_ss, mut d_fs) = (s.s_ff, s.s_ss, s.s_fs);
        if self.incompressible {
            // E_nn = (det C₂⁻¹ − 1)/2 with det C₂ = (2E_ff+1)(2E_ss+1) − 4E_fs².
            let dd = -0.5 / (det_c * det_c);
            d_ff += s.s_nn * dd * 2.0 * c11;
            d_ss += s.s_nn * dd * 2.0 * c00;
            d_fs += s.s_nn * dd * -4.0 * c01;
        } else {
            // κ/8·ln²(det C₂) area penalty.
            let dpen = 0.25 * p.kappa_kpa * det_c.ln() / det_c;
            d_ff += dpen * 2.0 * c11;
            d_ss += dpen * 2.0 * c00;
            d_fs += dpen * -4.0 * c01;
        }
        // dψ = d_ff dE_ff + d_ss dE_ss + d_fs dE_fs with dE_ff = g0·dg0,
        // dE_ss = g1·dg1 and dE_fs = (g0·dg1 + g1·dg0)/2, so the symmetric
        // derivative matrix has m00 = d_ff, m11 = d_ss, m01 = d_fs/2.
        Ok((psi, d_ff, d_ss, 0.5 * d_fs))
    }

    /// Neo-Hookean membrane response (same return convention).
    fn neo_hookean_element(
        &self,
        c00: f64,
        c11: f64,
        c01: f64,
        det_c: f64,
        p: &NeoHookeanParams,
    ) -> Result<(f64, f64, f64, f64), MechanicsError> {
        let c = p.c_kpa;
        // Incompressible: λ_n² = 1/det C₂, I₁ = tr C₂ + 1/det C₂, J = 1.
        // Otherwise λ_n = 1, I₁ = tr C₂ + 1 and J = √det C₂ feeds the
        // κ/2·ln²J penalty inside `neo_hookean_energy`.
        let (i1, j) = if self.incompressible {
            (c00 + c11 + 1.0 / det_c, 1.0)
        } else {
            (c00 + c11 + 1.0, det_c.sqrt())
        };
        let psi = crate::material::neo_hookean_energy(i1, j, p)?;
        let (d_ff, d_ss, d_fs) = if self.incompressible {
            let dd = -1.0 / (det_c * det_c);
            (
                c * (2.0 + dd * 2.0 * c11),
                c * (2.0 + dd * 2.0 * c00),
                c * (dd * -4.0 * c01),
            )
        } else {
            let dpen = 0.25 * p.kappa_kpa * det_c.ln() / det_c;
            (
                c * 2.0 + dpen * 2.0 * c11,
                c * 2.0 + dpen * 2.0 * c00,
                dpen * -4.0 * c01,
            )
        };
        Ok((psi, d_ff, d_ss, 0.5 * d_fs))
    }

    fn volume_impl(&self, positions: &[Vector3<f64>], with_grad: bool) -> (f64, Vec<Vector3<f64>>) {
        let mut volume = 0.0;
        let mut grad = if with_grad {
            vec![Vector3::zeros(); positions.len()]
        } else {
            Vec::new()
        };
        for tri in &self.triangles {
            let (a, b, c) = (positions[tri[0]], positions[tri[1]], positions[tri[2]]);
            volume += a.cross(&b).dot(&c) / 6.0;
            if with_grad {
                grad[tri[0]] += b.cross(&c) / 6.0;
                grad[tri[1]] += c.cross(&a) / 6.0;
                grad[tri[2]] += a.cross(&b) / 6.0;
            }
        }
        if !self.cap_edges.is_empty() {
            let inv_m = 1.0 / self.rim_ids.len() as f64;
            let centroid: Vector3<f64> =
                self.rim_ids.iter().map(|&v| positions[v]).sum::<Vector3<f64>>() * inv_m;
            let mut grad_centroid = Vector3::zeros();
            for &(i, j) in &self.cap_edges {
                let (a, b, c) = (positions[j], positions[i], centroid);
                volume += a.cross(&b).dot(&c) / 6.0;
                if with_grad {
                    grad[j] += b.cross(&c) / 6.0;
                    grad[i] += c.cross(&a) / 6.0;
                    grad_centroid += a.cross(&b) / 6.0;
                }
            }
            if with_grad {
                for &v in &self.rim_ids {
                    grad[v] += grad_centroid * inv_m;
                }
            }
        }
        (volume, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_hemisphere_mesh, HemisphereSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn default_model(refinement: u32, load: &LoadingParameters) -> (ShellMesh, MechanicsModel) {
        let mesh = build_hemisphere_mesh(&HemisphereSpec {
            refinement,
            ..HemisphereSpec::default()
        })
        .unwrap();
        let model = MechanicsModel::new(&mesh, &mesh, &RegionalMaterialMap::default(), load).unwrap();
        (mesh, model)
    }

    #[test]
    fn rest_state_has_zero_energy_and_gradient() {
        let load = LoadingParameters::default();
        let (mesh, model) = default_model(2, &load);
        let mut grad = vec![Vector3::zeros(); mesh.n_vertices()];
        let e = model
            .energy_and_gradient(&mesh.vertices, 0.0, &mut grad)
            .unwrap();
        assert!(e.abs() < 1e-10, "rest energy {e}");
        let gmax = grad.iter().map(|g| g.norm()).fold(0.0_f64, f64::max);
        assert!(gmax < 1e-10, "rest gradient {gmax}");
    }

    #[test]
    fn pressure_term_gradient_is_minus_p_times_volume_gradient() {
        let load = LoadingParameters {
            k_peri_kpa_per_um: 0.0,
            k_vein_kpa_per_um: 0.0,
            ..LoadingParameters::default()
        };
        let (mesh, model) = default_model(1, &load);
        let p = 0.8;
        let mut grad = vec![Vector3::zeros(); mesh.n_vertices()];
        let e = model
            .energy_and_gradient(&mesh.vertices, p, &mut grad)
            .unwrap();
        // At the rest state the elastic part vanishes: E = −p·V exactly.
        let v = model.volume(&mesh.vertices);
        assert_relative_eq!(e, -p * v, max_relative = 1e-9);
        let (_, vgrad) = model.volume_impl(&mesh.vertices, true);
        for vtx in 0..mesh.n_vertices() {
            let expect = -vgrad[vtx] * p;
            assert!(
                (grad[vtx] - expect).norm() < 1e-8 * (1.0 + expect.norm()),
                "vertex {vtx}"
            );
        }
    }

    /// Full-assembly gradient check against central finite differences on
    /// randomly perturbed states, both thickness treatments, two meshes.
    #[test]
    fn gradient_matches_finite_differences() {
        for (refinement, incompressible) in [(1u32, true), (1, false), (2, true)] {
            let load = LoadingParameters {
                incompressible,
                k_peri_kpa_per_um: 0.002,
                pth: 0.6,
                ..LoadingParameters::default()
            };
            let (mesh, model) = default_model(refinement, &load);
            let mut rng = ChaCha12Rng::seed_from_u64(42 + refinement as u64);
            let p = 0.6;
            for _ in 0..3 {
                // Smooth-ish random perturbation, outward-biased so the
                // pericardial one-sided term participates.
                let positions: Vec<Vector3<f64>> = mesh
                    .vertices
                    .iter()
                    .zip(mesh.vertex_normals())
                    .map(|(x, n)| {
                        x + n * rng.gen_range(0.0..0.4)
                            + Vector3::new(
                                rng.gen_range(-0.1..0.1),
                                rng.gen_range(-0.1..0.1),
                                rng.gen_range(-0.1..0.1),
                            )
                    })
                    .collect();
                let mut grad = vec![Vector3::zeros(); mesh.n_vertices()];
                let e0 = model.energy_and_gradient(&positions, p, &mut grad).unwrap();
                assert!(e0.is_finite());
                let mut g2 = vec![Vector3::zeros(); mesh.n_vertices()];
                let h = 1e-6;
                // Spot-check a spread of vertices (poles, mid, rim).
                let picks = [0usize, 5, mesh.n_vertices() / 2, mesh.rim_vertices[1]];
                for &v in &picks {
                    for axis in 0..3 {
                        let mut plus = positions.clone();
                        plus[v][axis] += h;
                        let mut minus = positions.clone();
                        minus[v][axis] -= h;
                        let ep = model.energy_and_gradient(&plus, p, &mut g2).unwrap();
                        let em = model.energy_and_gradient(&minus, p, &mut g2).unwrap();
                        let fd = (ep - em) / (2.0 * h);
                        let denom = grad[v][axis].abs().max(1e-4);
                        assert!(
                            ((fd - grad[v][axis]) / denom).abs() < 1e-5,
                            "refinement {refinement} incompressible {incompressible} \
                             vertex {v} axis {axis}: fd {fd} vs {}",
                            grad[v][axis]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn pericardial_penalty_ignores_inward_motion() {
        let load = LoadingParameters {
            k_peri_kpa_per_um: 0.005,
            k_vein_kpa_per_um: 0.0,
            pth: 0.9,
            ..LoadingParameters::default()
        };
        let (mesh, model) = default_model(1, &load);
        // Move every vertex inward along the anchor normal.
        let normals = mesh.vertex_normals();
        let positions: Vec<Vector3<f64>> = mesh
            .vertices
            .iter()
            .zip(&normals)
            .map(|(x, n)| x - n * 0.5)
            .collect();
        let mut grad = vec![Vector3::zeros(); mesh.n_vertices()];
        let e = model.energy_and_gradient(&positions, 0.0, &mut grad).unwrap();
        // Inward motion stores elastic energy but no pericardial energy:
        // compare against the same state with the penalty disabled.
        let load_off = LoadingParameters {
            k_peri_kpa_per_um: 0.0,
            ..load
        };
        let model_off =
            MechanicsModel::new(&mesh, &mesh, &RegionalMaterialMap::default(), &load_off).unwrap();
        let e_off = model_off
            .energy_and_gradient(&positions, 0.0, &mut grad)
            .unwrap();
        assert_relative_eq!(e, e_off, max_relative = 1e-12);
    }

    #[test]
    fn inverted_element_is_rejected() {
        let load = LoadingParameters::default();
        let (mesh, model) = default_model(1, &load);
        let mut positions = mesh.vertices.clone();
        // Collapse the pole through the surface.
        positions[0].z = -2.0 * mesh.radius_mm;
        let mut grad = vec![Vector3::zeros(); mesh.n_vertices()];
        assert!(model.energy_and_gradient(&positions, 0.0, &mut grad).is_err());
    }
}
