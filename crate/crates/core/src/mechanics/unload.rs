//! Backward-displacement estimation of the unloaded reference
//! configuration.
//!
//! The imaged end-diastolic surface is already pressurised, so treating it
//! as strain-free overestimates compliance. Starting from the imaged
//! geometry `X₀`, each iterate solves the forward preload problem
//! `x(X_k)` (inflation to EDP with the rim pinned) and walks the reference
//! against the residual:
//!
//! ```text
//! X_{k+1} = X_k − ω · (x(X_k) − x_target)
//! ```
//!
//! with `x_target` the imaged positions. Iteration stops when the
//! preloaded cavity volume matches the imaged volume to a relative
//! tolerance. The relaxation `ω` starts at 1, is adapted by Aitken's Δ²
//! rule (which estimates the optimal relaxation of the linearised fixed
//! point from consecutive residuals), and is halved whenever a candidate
//! reference cannot be inflated (inverted elements or a non-convergent
//! solve). Steps must shrink the volume error; for very soft walls the
//! backward direction can turn uphill in volume before the criterion is
//! met, in which case the iteration corrects the volume along a uniform
//! interior-scaling mode instead (a 1-D secant, since the inflated volume
//! responds monotonically to reference scale).

use super::assembly::MechanicsModel;
use super::loading::LoadingParameters;
use super::solve::{solve_equilibrium, EquilibriumState, LoadTarget, SolverOptions};
use super::{MechanicsError, RegionalMaterialMap};
use crate::geometry::ShellMesh;
use nalgebra::Vector3;

/// Controls for [`unload_reference`].
#[derive(Clone, Copy, Debug)]
pub struct UnloadOptions {
    /// Relative cavity-volume tolerance (fraction, e.g. 0.01 for 1 %).
    pub tol_volume_rel: f64,
    /// Maximum backward-displacement iterations.
    pub max_iterations: usize,
    /// Maximum relaxation halvings when a candidate fails to inflate.
    pub max_halvings: u32,
    /// Equilibrium solver settings for the inner preload solves.
    pub solver: SolverOptions,
    /// Gradient-tolerance relaxation applied to preload solves during the
    /// reference search. The volume slop this introduces must stay well
    /// below `tol_volume_rel` or the volume residual the iteration steers
    /// by drowns in solver noise; the accepted state is re-polished at the
    /// strict tolerance before returning.
    pub search_tol_factor: f64,
}

impl Default for UnloadOptions {
    fn default() -> Self {
        UnloadOptions {
            tol_volume_rel: 0.01,
            max_iterations: 30,
            max_halvings: 6,
            solver: SolverOptions::default(),
            search_tol_factor: 5.0,
        }
    }
}

/// One record of the unloading iteration history.
#[derive(Clone, Copy, Debug)]
pub struct UnloadIterate {
    /// Iteration number, starting at 0 for the imaged-geometry trial.
    pub iteration: usize,
    /// |V(x(X_k)) − V_imaged| / V_imaged.
    pub volume_error_rel: f64,
    /// RMS mismatch between the preloaded and imaged positions, mm.
    pub rms_mm: f64,
    /// Relaxation factor used to produce this iterate.
    pub omega: f64,
}

/// Outcome of a successful unloading run.
pub struct UnloadResult {
    /// Estimated unloaded reference geometry.
    pub reference: ShellMesh,
    /// Preload (EDP) equilibrium computed on the final reference.
    pub preloaded: EquilibriumState,
    /// Per-iteration convergence history.
    pub history: Vec<UnloadIterate>,
}

/// Estimates the unloaded reference for an imaged end-diastolic mesh.
pub fn unload_reference(
    imaged: &ShellMesh,
    materials: &RegionalMaterialMap,
    load: &LoadingParameters,
    opts: &UnloadOptions,
) -> Result<UnloadResult, MechanicsError> {
    let target_positions = &imaged.vertices;
    let (target_volume, is_rim) = {
        let probe = MechanicsModel::new(imaged, imaged, materials, load)?;
        let mut mask = vec![false; imaged.vertices.len()];
        for &v in probe.rim_vertices() {
            mask[v] = true;
        }
        (probe.volume(target_positions), mask)
    };
    if !target_volume.is_finite() || target_volume <= 0.0 {
        return Err(MechanicsError::InvalidState(format!(
            "imaged mesh volume {target_volume} must be positive"
        )));
    }
    let edp = LoadTarget {
        pressure_kpa: load.edp_kpa(),
        rim_offset: Vector3::zeros(),
    };

    // The search only needs cavity volumes accurate to a fraction of
    // `tol_volume_rel`, so preload solves run at a relaxed gradient
    // tolerance; the accepted state is polished strictly at the end.
    let search_solver = SolverOptions {
        tol_abs: opts.solver.tol_abs * opts.search_tol_factor,
        tol_rel: opts.solver.tol_rel * opts.search_tol_factor,
        tol_mm: opts.solver.tol_mm * opts.search_tol_factor,
        ..opts.solver
    };

    // Forward preload solve on a candidate reference. Warm starts reuse the
    // previous preloaded positions when available.
    let preload = |reference: &ShellMesh,
                   warm: Option<&[Vector3<f64>]>|
     -> Result<EquilibriumState, MechanicsError> {
        let model = MechanicsModel::new(reference, imaged, materials, load)?;
        if let Some(start) = warm {
            if let Ok(state) = solve_equilibrium(&model, start, &edp, &edp, &search_solver.warm())
            {
                return Ok(state);
            }
        }
        solve_equilibrium(
            &model,
            &reference.vertices,
            &LoadTarget::zero(),
            &edp,
            &search_solver,
        )
    };

    let mut reference = imaged.clone();
    let mut state = preload(&reference, None)?;
    let mut history = Vec::new();
    let mut omega = 1.0_f64;
    let mut best: Option<(f64, ShellMesh, EquilibriumState)> = None;
    // Previous residual for the Aitken relaxation update.
    let mut prev_residual: Option<Vec<Vector3<f64>>> = None;
    // Sticky strategy flag: once the backward direction has gone uphill in
    // volume, later iterations try the scaling mode first.
    let mut prefer_scale = false;

    for iteration in 0..=opts.max_iterations {
        let volume_error_rel = (state.volume_mm3 - target_volume).abs() / target_volume;
        history.push(UnloadIterate {
            iteration,
            volume_error_rel,
            rms_mm: rms_mismatch(&state.positions, target_positions),
            omega,
        });
        let improved = best
            .as_ref()
            .map(|(e, _, _)| volume_error_rel < *e)
            .unwrap_or(true);
        if improved {
            best = Some((volume_error_rel, reference.clone(), state.clone()));
        }
        if volume_error_rel <= opts.tol_volume_rel {
            // Re-solve the accepted preload at the strict tolerance so the
            // returned state is as accurate as any other equilibrium.
            let model = MechanicsModel::new(&reference, imaged, materials, load)?;
            let polish = SolverOptions {
                max_iterations: 2 * opts.solver.max_iterations,
                ..opts.solver
            };
            let preloaded =
                solve_equilibrium(&model, &state.positions, &edp, &edp, &polish.warm())?;
            return Ok(UnloadResult {
                reference,
                preloaded,
                history,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }

        let residual: Vec<Vector3<f64>> = state
            .positions
            .iter()
            .zip(target_positions)
            .map(|(x_cur, x_tgt)| x_cur - x_tgt)
            .collect();
        // Aitken Δ²: ω ← −ω·⟨r_prev, Δr⟩/|Δr|², the optimal relaxation of
        // the secant model through the last two residuals. The map mixes
        // slow volume-like modes (which want large ω) with unit-gain shape
        // modes that diverge for ω > 2, so the estimate is clamped to the
        // range a scalar relaxation can use safely.
        if let Some(prev) = &prev_residual {
            let mut num = 0.0;
            let mut den = 0.0;
            for (r, rp) in residual.iter().zip(prev) {
                let dr = r - rp;
                num += rp.dot(&dr);
                den += dr.norm_squared();
            }
            if den > 0.0 {
                omega = (-omega * num / den).clamp(0.25, 2.0);
            }
        }
        prev_residual = Some(residual.clone());

        let rms_cur = rms_mismatch(&state.positions, target_positions);
        let v_cur = (state.volume_mm3 - target_volume) / target_volume;

        // Candidate acceptance: the volume error must shrink and the
        // positional mismatch must not blow up. Backward steps are tried
        // first (they contract the full shape residual); if one fails the
        // volume test, the iteration falls back to a 1-D secant on uniform
        // scaling of the interior reference about the rim centroid — the
        // enclosed volume responds monotonically (and near-linearly) to
        // that mode even where the backward direction is uphill. After the
        // trial budget the last inflatable candidate is accepted as-is;
        // the best iterate is tracked above.
        let rim_centroid = {
            let (sum, count) = reference
                .vertices
                .iter()
                .zip(&is_rim)
                .filter(|(_, &r)| r)
                .fold((Vector3::zeros(), 0usize), |(s, c), (x, _)| (s + x, c + 1));
            sum / count.max(1) as f64
        };
        // (scale, signed volume error) pairs for the secant fallback.
        let mut scale_mode = prefer_scale;
        let mut scale_points: Vec<(f64, f64)> = if scale_mode {
            vec![(1.0, v_cur)]
        } else {
            Vec::new()
        };
        let mut scale_damp = 1.0_f64;
        let mut halvings = 0u32;
        loop {
            let (candidate, scale_used) = if scale_mode {
                let (s_last, v_last) = *scale_points.last().expect("seeded on entry");
                let raw = if scale_points.len() == 1 {
                    // First probe: a deliberate half-step for a slope
                    // estimate (the response is roughly 1:1 in relative
                    // volume per relative scale cubed, ~1.25 empirically).
                    s_last - 0.25 * v_last
                } else {
                    let (s_prev, v_prev) = scale_points[scale_points.len() - 2];
                    if (v_last - v_prev).abs() > 1e-12 {
                        s_last - v_last * (s_last - s_prev) / (v_last - v_prev)
                    } else {
                        s_last - 0.25 * v_last
                    }
                };
                let s = 1.0 + (raw.clamp(0.5, 1.5) - 1.0) * scale_damp;
                let positions: Vec<Vector3<f64>> = reference
                    .vertices
                    .iter()
                    .zip(&is_rim)
                    .map(|(x, &r)| {
                        if r {
                            *x
                        } else {
                            rim_centroid + (x - rim_centroid) * s
                        }
                    })
                    .collect();
                (reference.with_reference_positions(positions), Some(s))
            } else {
                let positions: Vec<Vector3<f64>> = reference
                    .vertices
                    .iter()
                    .zip(&residual)
                    .map(|(x_ref, r)| x_ref - r * omega)
                    .collect();
                (reference.with_reference_positions(positions), None)
            };
            match preload(&candidate, Some(&state.positions)) {
                Ok(next) => {
                    let v_next = (next.volume_mm3 - target_volume) / target_volume;
                    let rms_next = rms_mismatch(&next.positions, target_positions);
                    let volume_ok =
                        v_next.abs() <= opts.tol_volume_rel || v_next.abs() < v_cur.abs();
                    let shape_ok = rms_next <= rms_cur * 1.25 + 1e-6;
                    if (volume_ok && shape_ok) || halvings >= opts.max_halvings {
                        reference = candidate;
                        state = next;
                        prefer_scale = scale_mode;
                        if scale_mode {
                            // The secant history spans a different step
                            // mode; restart the relaxation estimate.
                            omega = 1.0;
                            prev_residual = None;
                        }
                        break;
                    }
                    match scale_used {
                        Some(s) => scale_points.push((s, v_next)),
                        None => {
                            scale_mode = true;
                            scale_points.push((1.0, v_cur));
                        }
                    }
                    halvings += 1;
                    // The secant model no longer applies after a rejection.
                    prev_residual = None;
                }
                Err(_) if halvings < opts.max_halvings => {
                    halvings += 1;
                    if scale_mode {
                        scale_damp *= 0.5;
                    } else {
                        omega *= 0.5;
                    }
                    prev_residual = None;
                }
                Err(e) => return Err(e),
            }
        }
    }

    let best_rel = best.map(|(e, _, _)| e).unwrap_or(f64::INFINITY);
    Err(MechanicsError::UnloadDivergence {
        iterations: opts.max_iterations,
        tol_rel: opts.tol_volume_rel * 100.0,
        best_rel: best_rel * 100.0,
    })
}

fn rms_mismatch(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    (sum / a.len() as f64).sqrt()
}
