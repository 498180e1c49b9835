//! Hyperelastic constitutive laws for the shell wall.
//!
//! The wall regions use the transversely isotropic Guccione law
//!
//! ```text
//! Ψ = (C/2)·(exp(Q) − 1) + (κ/2)·ln²(J)
//! Q = α·(b_f·E_ff² + 2·b_ft·(E_fs² + E_fn²) + b_t·(E_ss² + E_nn² + 2·E_sn²))
//! ```
//!
//! with the Green–Lagrange strain `E` expressed in the local
//! fibre/sheet/normal frame and `α` a dimensionless regional scaling of the
//! anisotropic exponent (α = 1 recovers the literature baseline). The stiff
//! mitral-rim and pulmonary-vein analogues use a compressible Neo-Hookean law
//! `Ψ = c·(I₁ − 3) + (κ/2)·ln²(J)`.
//!
//! Membrane kinematics enter through [`green_lagrange_from_f`]: given the
//! in-plane deformation gradient in the fibre frame, the through-thickness
//! stretch is either eliminated by incompressibility (`λ_n = 1/det F`,
//! `J = 1`) or treated as plane stress-free (`E_nn = 0`, `J = det F`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cap on the Guccione exponent `Q`; beyond this the exponential term is
/// treated as numerically divergent rather than evaluated.
pub const MAX_GUCCIONE_EXPONENT: f64 = 50.0;

/// Errors from constitutive evaluations.
#[derive(Debug, Error)]
pub enum MaterialError {
    /// The exponent `Q` exceeded [`MAX_GUCCIONE_EXPONENT`]; the strain state
    /// is far outside the law's intended range and the solve should be
    /// treated as divergent.
    #[error("Guccione exponent Q = {q:.3} exceeds the cap of {cap}; strain state is divergent")]
    ExponentOverflow { q: f64, cap: f64 },
    /// Non-positive in-plane Jacobian: the element is inverted or collapsed.
    #[error("non-positive in-plane Jacobian det F = {det:.6e}: inverted element")]
    InvertedElement { det: f64 },
    /// A material constant that must be positive was not.
    #[error("material parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
}

/// Parameters of the Guccione law. Stress-like constants are in kPa.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuccioneParams {
    /// Stress-like stiffness scale `C` in kPa.
    pub c_kpa: f64,
    /// Regional, dimensionless scaling of the anisotropic exponent.
    pub alpha: f64,
    /// Fibre exponent weight.
    pub b_f: f64,
    /// Fibre/transverse shear exponent weight.
    pub b_ft: f64,
    /// Transverse exponent weight.
    pub b_t: f64,
    /// Volumetric penalty modulus κ in kPa.
    pub kappa_kpa: f64,
}

impl Default for GuccioneParams {
    fn default() -> Self {
        GuccioneParams {
            c_kpa: 1.7,
            alpha: 1.0,
            b_f: 8.0,
            b_ft: 4.0,
            b_t: 3.0,
            kappa_kpa: 1000.0,
        }
    }
}

impl GuccioneParams {
    /// Baseline parameters with a regional exponent scaling.
    pub fn with_alpha(alpha: f64) -> Self {
        GuccioneParams {
            alpha,
            ..GuccioneParams::default()
        }
    }

    /// Isotropised variant (`b_f = b_ft = b_t = b`), used by the closed-form
    /// sphere-inflation benchmark.
    pub fn isotropic(c_kpa: f64, alpha: f64, b: f64) -> Self {
        GuccioneParams {
            c_kpa,
            alpha,
            b_f: b,
            b_ft: b,
            b_t: b,
            kappa_kpa: 1000.0,
        }
    }

    fn validate(&self) -> Result<(), MaterialError> {
        for (name, value) in [
            ("c_kpa", self.c_kpa),
            ("alpha", self.alpha),
            ("b_f", self.b_f),
            ("b_ft", self.b_ft),
            ("b_t", self.b_t),
        ] {
            if value <= 0.0 {
                return Err(MaterialError::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Parameters of the Neo-Hookean law, constants in kPa.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeoHookeanParams {
    /// Shear-like stiffness `c` in kPa.
    pub c_kpa: f64,
    /// Volumetric penalty modulus κ in kPa.
    pub kappa_kpa: f64,
}

impl NeoHookeanParams {
    /// Soft pulmonary-vein ring analogue.
    pub fn vein_ring() -> Self {
        NeoHookeanParams {
            c_kpa: 7.45,
            kappa_kpa: 1000.0,
        }
    }

    /// Stiff mitral-rim / valve analogue.
    pub fn rim() -> Self {
        NeoHookeanParams {
            c_kpa: 1000.0,
            kappa_kpa: 1000.0,
        }
    }
}

/// Green–Lagrange strain in the fibre (f) / sheet (s) / normal (n) frame,
/// together with the volume ratio `J` used by the volumetric penalty.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GreenLagrangeStrain {
    pub e_ff: f64,
    pub e_ss: f64,
    pub e_nn: f64,
    pub e_fs: f64,
    pub e_fn: f64,
    pub e_sn: f64,
    /// Volume ratio: 1 under the membrane incompressibility reduction,
    /// otherwise the in-plane Jacobian.
    pub j: f64,
}

/// Work-conjugate stress components `S_ij = ∂Ψ/∂E_ij` of the exponential
/// term of the Guccione law, in kPa.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GuccioneStress {
    pub s_ff: f64,
    pub s_ss: f64,
    pub s_nn: f64,
    pub s_fs: f64,
    pub s_fn: f64,
    pub s_sn: f64,
}

/// Membrane strain from the 2×2 in-plane deformation gradient expressed in
/// the fibre frame (rows/columns ordered fibre, sheet).
///
/// With `incompressible` set, the through-thickness stretch is
/// `λ_n = 1/det F` and `J = 1`; otherwise `E_nn = 0` and `J = det F`.
pub fn green_lagrange_from_f(
    f: &nalgebra::Matrix2<f64>,
    incompressible: bool,
) -> Result<GreenLagrangeStrain, MaterialError> {
    let det = f.determinant();
    if det <= 0.0 || !det.is_finite() {
        return Err(MaterialError::InvertedElement { det });
    }
    let c = f.transpose() * f;
    let e_ff = 0.5 * (c[(0, 0)] - 1.0);
    let e_ss = 0.5 * (c[(1, 1)] - 1.0);
    let e_fs = 0.5 * c[(0, 1)];
    let (e_nn, j) = if incompressible {
        let lambda_n = 1.0 / det;
        (0.5 * (lambda_n * lambda_n - 1.0), 1.0)
    } else {
        (0.0, det)
    };
    Ok(GreenLagrangeStrain {
        e_ff,
        e_ss,
        e_nn,
        e_fs,
        e_fn: 0.0,
        e_sn: 0.0,
        j,
    })
}

/// The anisotropic exponent `Q(E)`.
pub fn guccione_exponent(e: &GreenLagrangeStrain, p: &GuccioneParams) -> f64 {
    p.alpha
        * (p.b_f * e.e_ff * e.e_ff
            + 2.0 * p.b_ft * (e.e_fs * e.e_fs + e.e_fn * e.e_fn)
            + p.b_t * (e.e_ss * e.e_ss + e.e_nn * e.e_nn + 2.0 * e.e_sn * e.e_sn))
}

/// Strain-energy density of the Guccione law in kPa.
pub fn guccione_energy(e: &GreenLagrangeStrain, p: &GuccioneParams) -> Result<f64, MaterialError> {
    p.validate()?;
    let q = guccione_exponent(e, p);
    if q > MAX_GUCCIONE_EXPONENT {
        return Err(MaterialError::ExponentOverflow {
            q,
            cap: MAX_GUCCIONE_EXPONENT,
        });
    }
    if e.j <= 0.0 {
        return Err(MaterialError::InvertedElement { det: e.j });
    }
    let ln_j = e.j.ln();
    Ok(0.5 * p.c_kpa * (q.exp() - 1.0) + 0.5 * p.kappa_kpa * ln_j * ln_j)
}

/// Work-conjugate stress of the exponential term, `S_ij = ∂Ψ_exp/∂E_ij`,
/// treating the six strain components as independent.
pub fn guccione_stress(
    e: &GreenLagrangeStrain,
    p: &GuccioneParams,
) -> Result<GuccioneStress, MaterialError> {
    p.validate()?;
    let q = guccione_exponent(e, p);
    if q > MAX_GUCCIONE_EXPONENT {
        return Err(MaterialError::ExponentOverflow {
            q,
            cap: MAX_GUCCIONE_EXPONENT,
        });
    }
    let scale = p.c_kpa * p.alpha * q.exp();
    Ok(GuccioneStress {
        s_ff: scale * p.b_f * e.e_ff,
        s_ss: scale * p.b_t * e.e_ss,
        s_nn: scale * p.b_t * e.e_nn,
        s_fs: scale * 2.0 * p.b_ft * e.e_fs,
        s_fn: scale * 2.0 * p.b_ft * e.e_fn,
        s_sn: scale * 2.0 * p.b_t * e.e_sn,
    })
}

/// Neo-Hookean strain-energy density in kPa from the first invariant of the
/// right Cauchy–Green tensor and the volume ratio.
pub fn neo_hookean_energy(i1: f64, j: f64, p: &NeoHookeanParams) -> Result<f64, MaterialError> {
    if p.c_kpa <= 0.0 {
        return Err(MaterialError::NonPositiveParameter {
            name: "c_kpa",
            value: p.c_kpa,
        });
    }
    if j <= 0.0 || !j.is_finite() {
        return Err(MaterialError::InvertedElement { det: j });
    }
    let ln_j = j.ln();
    Ok(p.c_kpa * (i1 - 3.0) + 0.5 * p.kappa_kpa * ln_j * ln_j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_deformation_gives_zero_strain() {
        for flag in [true, false] {
            let e = green_lagrange_from_f(&Matrix2::identity(), flag).unwrap();
            assert_eq!(
                (e.e_ff, e.e_ss, e.e_nn, e.e_fs, e.e_fn, e.e_sn),
                (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
            );
            assert_eq!(e.j, 1.0);
        }
    }

    #[test]
    fn uniaxial_fibre_stretch_strains() {
        // F = diag(1.1, 1.0): E_ff = (1.21-1)/2 = 0.105.
        let f = Matrix2::new(1.1, 0.0, 0.0, 1.0);
        let e = green_lagrange_from_f(&f, true).unwrap();
        assert_relative_eq!(e.e_ff, 0.105, max_relative = 1e-12);
        assert_relative_eq!(e.e_ss, 0.0, epsilon = 1e-15);
        // λ_n = 1/1.1, E_nn = (λ_n² − 1)/2 = (1/1.21 − 1)/2.
        let e_nn_expect = 0.5 * (1.0 / 1.21 - 1.0);
        assert_relative_eq!(e.e_nn, e_nn_expect, max_relative = 1e-12);
        assert_relative_eq!(e.e_nn, -0.08678, max_relative = 1e-4);
        assert_eq!(e.j, 1.0);

        let e_open = green_lagrange_from_f(&f, false).unwrap();
        assert_eq!(e_open.e_nn, 0.0);
        assert_relative_eq!(e_open.j, 1.1, max_relative = 1e-15);
    }

    #[test]
    fn simple_shear_strains() {
        // F = [[1, 0.1], [0, 1]]: C = FᵀF has C_01 = 0.1, C_11 = 1.01.
        let f = Matrix2::new(1.0, 0.1, 0.0, 1.0);
        let e = green_lagrange_from_f(&f, true).unwrap();
        assert_relative_eq!(e.e_fs, 0.05, max_relative = 1e-12);
        assert_relative_eq!(e.e_ss, 0.005, max_relative = 1e-12);
        assert_relative_eq!(e.e_ff, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inverted_gradient_is_rejected() {
        let f = Matrix2::new(-1.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            green_lagrange_from_f(&f, true),
            Err(MaterialError::InvertedElement { .. })
        ));
    }

    #[test]
    fn guccione_energy_zero_at_rest() {
        let e = GreenLagrangeStrain {
            j: 1.0,
            ..Default::default()
        };
        let psi = guccione_energy(&e, &GuccioneParams::default()).unwrap();
        assert_eq!(psi, 0.0);
    }

    #[test]
    fn guccione_energy_pure_fibre_strain_reference_values() {
        // C = 1.7, b_f = 8, E_ff = 0.1: Q = α·8·0.01; Ψ = 0.85·(e^Q − 1).
        let e = GreenLagrangeStrain {
            e_ff: 0.1,
            j: 1.0,
            ..Default::default()
        };
        let psi1 = guccione_energy(&e, &GuccioneParams::with_alpha(1.0)).unwrap();
        assert_relative_eq!(psi1, 0.85 * ((0.08_f64).exp() - 1.0), max_relative = 1e-14);
        assert_relative_eq!(psi1, 0.070794, max_relative = 1e-4);

        let psi2 = guccione_energy(&e, &GuccioneParams::with_alpha(2.0)).unwrap();
        assert_relative_eq!(psi2, 0.85 * ((0.16_f64).exp() - 1.0), max_relative = 1e-14);
        // Direct evaluation: 0.85·(e^0.16 − 1) = 0.14748424034…
        assert_relative_eq!(psi2, 0.147484, max_relative = 1e-4);
    }

    #[test]
    fn guccione_energy_increases_with_alpha() {
        let e = GreenLagrangeStrain {
            e_ff: 0.05,
            e_ss: -0.02,
            e_fs: 0.01,
            j: 1.0,
            ..Default::default()
        };
        let mut last = 0.0;
        for alpha in [0.125, 0.5, 1.0, 2.0, 4.0] {
            let psi = guccione_energy(&e, &GuccioneParams::with_alpha(alpha)).unwrap();
            assert!(psi > last, "α = {alpha}: {psi} ≤ {last}");
            last = psi;
        }
    }

    #[test]
    fn guccione_exponent_overflow_is_an_error() {
        let e = GreenLagrangeStrain {
            e_ff: 10.0,
            j: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            guccione_energy(&e, &GuccioneParams::default()),
            Err(MaterialError::ExponentOverflow { .. })
        ));
    }

    #[test]
    fn guccione_stress_fibre_component_reference_value() {
        // S_ff = C·α·b_f·E_ff·e^Q = 1.7·8·0.1·e^0.08 = 1.4732704…
        let e = GreenLagrangeStrain {
            e_ff: 0.1,
            j: 1.0,
            ..Default::default()
        };
        let s = guccione_stress(&e, &GuccioneParams::default()).unwrap();
        assert_relative_eq!(s.s_ff, 1.7 * 0.8 * (0.08_f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(s.s_ff, 1.47327, max_relative = 1e-5);
    }

    /// Central finite differences of the exponential energy term against the
    /// analytic stress over randomly drawn admissible strain states.
    #[test]
    fn guccione_stress_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(71);
        let p = GuccioneParams {
            c_kpa: 1.7,
            alpha: 1.6,
            b_f: 8.0,
            b_ft: 4.0,
            b_t: 3.0,
            kappa_kpa: 1000.0,
        };
        let exp_term = |e: &GreenLagrangeStrain| -> f64 {
            // Isolate the exponential part: at J = 1 the volumetric term is 0.
            guccione_energy(e, &p).unwrap()
        };
        for _ in 0..100 {
            let mut e = GreenLagrangeStrain {
                e_ff: rng.gen_range(-0.25..0.25),
                e_ss: rng.gen_range(-0.25..0.25),
                e_nn: rng.gen_range(-0.25..0.25),
                e_fs: rng.gen_range(-0.2..0.2),
                e_fn: rng.gen_range(-0.2..0.2),
                e_sn: rng.gen_range(-0.2..0.2),
                j: 1.0,
            };
            let s = guccione_stress(&e, &p).unwrap();
            let h = 1e-6;
            type StrainAccessor = fn(&mut GreenLagrangeStrain) -> &mut f64;
            let comps: [(&str, StrainAccessor, f64); 6] = [
                ("e_ff", |e| &mut e.e_ff, s.s_ff),
                ("e_ss", |e| &mut e.e_ss, s.s_ss),
                ("e_nn", |e| &mut e.e_nn, s.s_nn),
                ("e_fs", |e| &mut e.e_fs, s.s_fs),
                ("e_fn", |e| &mut e.e_fn, s.s_fn),
                ("e_sn", |e| &mut e.e_sn, s.s_sn),
            ];
            for (name, field, analytic) in comps {
                let orig = *field(&mut e);
                *field(&mut e) = orig + h;
                let fp = exp_term(&e);
                *field(&mut e) = orig - h;
                let fm = exp_term(&e);
                *field(&mut e) = orig;
                let fd = (fp - fm) / (2.0 * h);
                let denom = analytic.abs().max(1e-8);
                assert!(
                    (fd - analytic).abs() / denom < 1e-6,
                    "{name}: fd {fd} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn neo_hookean_reference_values() {
        // c = 7.45, I₁ = 3.3, J = 1: Ψ = 7.45·0.3 = 2.235 kPa.
        let psi = neo_hookean_energy(3.3, 1.0, &NeoHookeanParams::vein_ring()).unwrap();
        assert_relative_eq!(psi, 2.235, max_relative = 1e-12);
        // κ = 1000, I₁ = 3, J = e: volumetric term 500·ln²(e) = 500 kPa.
        let psi_vol = neo_hookean_energy(
            3.0,
            std::f64::consts::E,
            &NeoHookeanParams {
                c_kpa: 1.0,
                kappa_kpa: 1000.0,
            },
        )
        .unwrap();
        assert_relative_eq!(psi_vol, 500.0, max_relative = 1e-12);
    }

    #[test]
    fn neo_hookean_rejects_non_positive_volume_ratio() {
        assert!(matches!(
            neo_hookean_energy(3.0, 0.0, &NeoHookeanParams::rim()),
            Err(MaterialError::InvertedElement { .. })
        ));
        assert!(matches!(
            neo_hookean_energy(3.0, -1.0, &NeoHookeanParams::rim()),
            Err(MaterialError::InvertedElement { .. })
        ));
    }

    #[test]
    fn non_positive_parameters_are_rejected() {
        let e = GreenLagrangeStrain {
            e_ff: 0.1,
            j: 1.0,
            ..Default::default()
        };
        let bad = GuccioneParams {
            alpha: 0.0,
            ..GuccioneParams::default()
        };
        assert!(matches!(
            guccione_energy(&e, &bad),
            Err(MaterialError::NonPositiveParameter { name: "alpha", .. })
        ));
    }
}
