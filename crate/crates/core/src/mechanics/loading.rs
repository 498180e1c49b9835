//! Loading protocol: pressure transient, rim trajectory and the pericardial
//! coverage map.

use crate::geometry::{Region, ShellMesh};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Conversion factor from mmHg to kPa.
pub const MMHG_TO_KPA: f64 = 0.133322;

/// Loading and boundary-condition parameters of one simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadingParameters {
    /// End-diastolic (baseline) pressure in mmHg.
    pub edp_mmhg: f64,
    /// Peak (end-systolic) pressure in mmHg.
    pub esp_mmhg: f64,
    /// Pericardial penalty stiffness in kPa/µm.
    pub k_peri_kpa_per_um: f64,
    /// Pericardial coverage: surface-area quantile below which the penalty
    /// acts at full strength.
    pub pth: f64,
    /// Omnidirectional vein-anchor spring constant in kPa/µm.
    pub k_vein_kpa_per_um: f64,
    /// Cycle fraction at which pressure and rim excursion peak.
    pub t_es: f64,
    /// Duration of the conduit-phase pressure decline after `t_es`.
    pub decline_duration: f64,
    /// Peak downward rim translation in mm.
    pub rim_amplitude_mm: f64,
    /// Eliminate the through-thickness stretch by incompressibility.
    pub incompressible: bool,
}

impl Default for LoadingParameters {
    fn default() -> Self {
        LoadingParameters {
            edp_mmhg: 8.0,
            esp_mmhg: 25.0,
            k_peri_kpa_per_um: 0.001,
            pth: 0.7,
            k_vein_kpa_per_um: 0.001,
            t_es: 0.4,
            decline_duration: 0.3,
            rim_amplitude_mm: 4.0,
            incompressible: true,
        }
    }
}

impl LoadingParameters {
    pub fn edp_kpa(&self) -> f64 {
        self.edp_mmhg * MMHG_TO_KPA
    }

    pub fn esp_kpa(&self) -> f64 {
        self.esp_mmhg * MMHG_TO_KPA
    }
}

/// Chamber pressure in kPa at cycle fraction `t ∈ [0, 1]`.
///
/// C¹ piecewise-cosine profile: rise from EDP to ESP over `[0, t_es]`,
/// conduit decline back to the EDP plateau over `[t_es, t_es + decline]`,
/// constant EDP thereafter. The maximum is at `t_es`.
pub fn pressure_transient(t: f64, load: &LoadingParameters) -> f64 {
    let (p_ed, p_es) = (load.edp_kpa(), load.esp_kpa());
    let t_es = load.t_es;
    let decline_end = (t_es + load.decline_duration).min(1.0);
    let ramp = |s: f64| 0.5 * (1.0 - (std::f64::consts::PI * s.clamp(0.0, 1.0)).cos());
    if t <= t_es {
        p_ed + (p_es - p_ed) * ramp(t / t_es)
    } else if t < decline_end {
        p_es - (p_es - p_ed) * ramp((t - t_es) / (decline_end - t_es))
    } else {
        p_ed
    }
}

/// Rigid rim translation at cycle fraction `t`: a smooth downward (−z) bump
/// of amplitude `rim_amplitude_mm`, zero at both cycle ends and peaking at
/// `t_es`.
pub fn rim_offset(t: f64, load: &LoadingParameters) -> Vector3<f64> {
    let t_es = load.t_es;
    let bump = |s: f64| 0.5 * (1.0 - (std::f64::consts::PI * s.clamp(0.0, 1.0)).cos());
    let scale = if t <= t_es {
        bump(t / t_es)
    } else {
        bump((1.0 - t) / (1.0 - t_es))
    };
    Vector3::new(0.0, 0.0, -load.rim_amplitude_mm * scale)
}

/// Per-vertex pericardial coverage scale `s(v) ∈ [0, 1]`.
///
/// The co-latitude of each vertex is mapped to its surface-area quantile
/// `q = 1 − cos θ` (exact for a hemisphere). Coverage is 1 for `q ≤ pth`
/// and cosine-tapers to 0 where the rim band begins; rim-band onset is taken
/// from the lowest co-latitude among rim-tagged triangle vertices (90° when
/// the mesh has no rim band).
pub fn pericardial_scale(mesh: &ShellMesh, pth: f64) -> Vec<f64> {
    let mut rim_onset_deg: f64 = 90.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.regions[t] == Region::Rim {
            for &v in tri {
                let p = &mesh.vertices[v];
                let colat = p.xy().norm().atan2(p.z).to_degrees();
                rim_onset_deg = rim_onset_deg.min(colat);
            }
        }
    }
    let q_rim = 1.0 - rim_onset_deg.to_radians().cos();
    let pth_eff = pth.min(q_rim);
    mesh.vertices
        .iter()
        .map(|p| {
            let colat = p.xy().norm().atan2(p.z);
            let q = 1.0 - colat.cos();
            if q <= pth_eff {
                1.0
            } else if q >= q_rim {
                0.0
            } else {
                0.5 * (1.0 + (std::f64::consts::PI * (q - pth_eff) / (q_rim - pth_eff)).cos())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_hemisphere_mesh, HemisphereSpec};
    use approx::assert_relative_eq;

    #[test]
    fn pressure_boundary_values() {
        let load = LoadingParameters::default();
        assert_relative_eq!(pressure_transient(0.0, &load), 8.0 * MMHG_TO_KPA);
        assert_relative_eq!(pressure_transient(load.t_es, &load), 25.0 * MMHG_TO_KPA);
        assert_relative_eq!(pressure_transient(1.0, &load), 8.0 * MMHG_TO_KPA);
        // Plateau after the decline window.
        assert_relative_eq!(pressure_transient(0.85, &load), 8.0 * MMHG_TO_KPA);
    }

    #[test]
    fn pressure_peaks_at_t_es_and_is_c1() {
        let load = LoadingParameters::default();
        let peak = pressure_transient(load.t_es, &load);
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            assert!(pressure_transient(t, &load) <= peak + 1e-12);
        }
        // C¹: centred finite-difference slopes agree across each knot.
        let h = 1e-6;
        for knot in [load.t_es, load.t_es + load.decline_duration] {
            let left = (pressure_transient(knot - h, &load) - pressure_transient(knot - 3.0 * h, &load)) / (2.0 * h);
            let right = (pressure_transient(knot + 3.0 * h, &load) - pressure_transient(knot + h, &load)) / (2.0 * h);
            assert!(
                (left - right).abs() < 1e-3,
                "slope jump {left} vs {right} at {knot}"
            );
        }
    }

    #[test]
    fn mmhg_conversion_constant() {
        assert_relative_eq!(10.0 * MMHG_TO_KPA, 1.33322, max_relative = 1e-12);
    }

    #[test]
    fn rim_trajectory_boundary_values_and_peak() {
        let load = LoadingParameters::default();
        assert_eq!(rim_offset(0.0, &load), Vector3::zeros());
        assert_relative_eq!(rim_offset(load.t_es, &load).z, -4.0);
        assert_relative_eq!(rim_offset(1.0, &load).z, 0.0, epsilon = 1e-12);
        // Pure −z translation, monotone into the peak.
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let o = rim_offset(t, &load);
            assert_eq!((o.x, o.y), (0.0, 0.0));
            assert!(o.z <= 0.0 && o.z >= -4.0);
        }
    }

    #[test]
    fn pericardial_scale_is_monotone_in_quantile_and_bounded() {
        let mesh = build_hemisphere_mesh(&HemisphereSpec {
            refinement: 3,
            ..HemisphereSpec::default()
        })
        .unwrap();
        let s = pericardial_scale(&mesh, 0.6);
        // Bounds, and pole value 1 / rim value 0.
        for v in &s {
            assert!((0.0..=1.0).contains(v));
        }
        assert_eq!(s[0], 1.0);
        for &v in &mesh.rim_vertices {
            assert_eq!(s[v], 0.0);
        }
        // Non-increasing in co-latitude quantile.
        let mut pairs: Vec<(f64, f64)> = mesh
            .vertices
            .iter()
            .zip(&s)
            .map(|(p, s)| (1.0 - (p.xy().norm().atan2(p.z)).cos(), *s))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }

    #[test]
    fn pericardial_scale_handles_pth_above_rim_onset() {
        let mesh = build_hemisphere_mesh(&HemisphereSpec::default()).unwrap();
        let s = pericardial_scale(&mesh, 0.95);
        for (v, p) in mesh.vertices.iter().enumerate() {
            let colat = p.xy().norm().atan2(p.z).to_degrees();
            if colat < 80.0 {
                assert_eq!(s[v], 1.0, "vertex {v} at colat {colat}");
            }
        }
    }
}
