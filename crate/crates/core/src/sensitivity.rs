//! Variance-based global sensitivity analysis over the emulators.
//!
//! Saltelli's scheme turns `N_base` quasi-random base samples into
//! `N_base·(d + 2)` evaluation points — matrices `A`, `B` and the radial
//! matrices `AB_i` (A with column `i` taken from B) — from which first-order
//! indices `S_i` and total effects `S_Ti` follow with the standard
//! estimators. Inputs are ranked across outputs by their maximum total
//! effect, normalized so the scores sum to one.

use crate::space::ParameterSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported sample count of the underlying Sobol' sequence.
pub const MAX_SOBOL_SAMPLES: usize = 1 << 16;

/// Bootstrap resamples behind the confidence half-widths.
pub const N_BOOTSTRAP: usize = 100;

/// Total effects below this are reported but flagged as estimator noise
/// gone wrong.
pub const NEGATIVE_INDEX_FLAG: f64 = -0.05;

/// Errors from design generation and index estimation.
#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("parameter space has no inputs")]
    EmptySpace,
    #[error("need 1 ≤ n_base ≤ {MAX_SOBOL_SAMPLES}, got {0}")]
    InvalidSize(usize),
    #[error("expected {want} evaluations for the design, got {got}")]
    EvaluationMismatch { got: usize, want: usize },
    #[error("evaluations contain non-finite values")]
    NonFinite,
    #[error("output variance is zero; sensitivity indices are undefined")]
    ZeroVariance,
    #[error("no results to rank")]
    NoResults,
}

/// A Saltelli evaluation design in physical units.
///
/// Row layout: `n_base` rows of `A`, then `n_base` rows of `B`, then for
/// each input `i` a block of `n_base` rows `AB_i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaltelliDesign {
    pub input_names: Vec<String>,
    pub n_base: usize,
    pub points: Vec<Vec<f64>>,
}

impl SaltelliDesign {
    pub fn dim(&self) -> usize {
        self.input_names.len()
    }

    /// Total number of evaluation points, `n_base·(d + 2)`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the Saltelli design from a scrambled Sobol' sequence.
///
/// `A` and `B` take dimensions `0..d` and `d..2d` of the same sequence, so
/// the two matrices are independent low-discrepancy samples. The design is
/// deterministic for a fixed `seed`. A non-power-of-two `n_base` is allowed
/// but warned about, since it degrades the sequence's balance.
pub fn saltelli_design(
    space: &ParameterSpace,
    n_base: usize,
    seed: u32,
) -> Result<SaltelliDesign, SensitivityError> {
    let d = space.dim();
    if d == 0 {
        return Err(SensitivityError::EmptySpace);
    }
    if n_base == 0 || n_base > MAX_SOBOL_SAMPLES {
        return Err(SensitivityError::InvalidSize(n_base));
    }
    if !n_base.is_power_of_two() {
        log::warn!("Saltelli n_base = {n_base} is not a power of two");
    }

    let point = |row: usize, dim_offset: u32| -> Vec<f64> {
        (0..d)
            .map(|k| f64::from(sobol_burley::sample(row as u32, dim_offset + k as u32, seed)))
            .collect()
    };
    let mut normalized = Vec::with_capacity(n_base * (d + 2));
    for row in 0..n_base {
        normalized.push(point(row, 0));
    }
    for row in 0..n_base {
        normalized.push(point(row, d as u32));
    }
    for i in 0..d {
        for row in 0..n_base {
            let mut z = point(row, 0);
            z[i] = f64::from(sobol_burley::sample(row as u32, (d + i) as u32, seed));
            normalized.push(z);
        }
    }

    let points = normalized
        .iter()
        .map(|z| space.to_physical(z).expect("design dimension is fixed"))
        .collect();
    Ok(SaltelliDesign {
        input_names: space.names().iter().map(|s| s.to_string()).collect(),
        n_base,
        points,
    })
}

/// First-order and total-effect indices for one output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SobolResult {
    pub input_names: Vec<String>,
    pub n_base: usize,
    /// First-order indices `S_i`.
    pub first_order: Vec<f64>,
    /// Total effects `S_Ti`.
    pub total_effect: Vec<f64>,
    /// Bootstrap confidence half-widths for `S_i`.
    pub first_order_ci: Vec<f64>,
    /// Bootstrap confidence half-widths for `S_Ti`.
    pub total_effect_ci: Vec<f64>,
}

impl SobolResult {
    /// Names of inputs whose indices are negative beyond estimator noise.
    pub fn flagged_negative(&self) -> Vec<&str> {
        self.input_names
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                self.first_order[*i] < NEGATIVE_INDEX_FLAG
                    || self.total_effect[*i] < NEGATIVE_INDEX_FLAG
            })
            .map(|(_, n)| n.as_str())
            .collect()
    }
}

/// Estimates Sobol' indices from evaluations laid out as the design.
///
/// Uses the standard Saltelli estimators on centred outputs:
/// `S_i = mean(f_B·(f_ABi − f_A)) / V` and
/// `S_Ti = mean((f_A − f_ABi)²) / (2V)` with `V` the variance of the
/// combined `A`/`B` evaluations. Half-widths come from [`N_BOOTSTRAP`]
/// seeded bootstrap resamples of the base rows.
pub fn sobol_indices(
    design: &SaltelliDesign,
    evaluations: &[f64],
    seed: u64,
) -> Result<SobolResult, SensitivityError> {
    let n = design.n_base;
    let d = design.dim();
    let want = n * (d + 2);
    if evaluations.len() != want {
        return Err(SensitivityError::EvaluationMismatch {
            got: evaluations.len(),
            want,
        });
    }
    if !evaluations.iter().all(|v| v.is_finite()) {
        return Err(SensitivityError::NonFinite);
    }

    // Centring makes the estimators exactly invariant to affine output
    // rescaling and removes the O(mean²/N) bias terms.
    let grand_mean = evaluations.iter().sum::<f64>() / want as f64;
    let f: Vec<f64> = evaluations.iter().map(|v| v - grand_mean).collect();
    let fa = &f[..n];
    let fb = &f[n..2 * n];

    let rows: Vec<usize> = (0..n).collect();
    let (first, total) = estimate(fa, fb, &f[2 * n..], d, &rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot_first = vec![Vec::with_capacity(N_BOOTSTRAP); d];
    let mut boot_total = vec![Vec::with_capacity(N_BOOTSTRAP); d];
    for _ in 0..N_BOOTSTRAP {
        let resample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        if let Ok((bf, bt)) = estimate(fa, fb, &f[2 * n..], d, &resample) {
            for i in 0..d {
                boot_first[i].push(bf[i]);
                boot_total[i].push(bt[i]);
            }
        }
    }
    let half_width = |samples: &[f64]| -> f64 {
        if samples.len() < 2 {
            return f64::NAN;
        }
        let m = samples.iter().sum::<f64>() / samples.len() as f64;
        let var =
            samples.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        1.959964 * var.sqrt()
    };
    let first_order_ci: Vec<f64> = boot_first.iter().map(|s| half_width(s)).collect();
    let total_effect_ci: Vec<f64> = boot_total.iter().map(|s| half_width(s)).collect();

    let result = SobolResult {
        input_names: design.input_names.clone(),
        n_base: n,
        first_order: first,
        total_effect: total,
        first_order_ci,
        total_effect_ci,
    };
    for name in result.flagged_negative() {
        log::warn!("sensitivity index for '{name}' is negative beyond estimator noise");
    }
    Ok(result)
}

/// Core estimators over a row subset (identity for the point estimate,
/// resampled with replacement for the bootstrap).
fn estimate(
    fa: &[f64],
    fb: &[f64],
    fab: &[f64],
    d: usize,
    rows: &[usize],
) -> Result<(Vec<f64>, Vec<f64>), SensitivityError> {
    let m = rows.len() as f64;
    let mean: f64 = rows.iter().map(|&r| fa[r] + fb[r]).sum::<f64>() / (2.0 * m);
    let variance = rows
        .iter()
        .map(|&r| (fa[r] - mean).powi(2) + (fb[r] - mean).powi(2))
        .sum::<f64>()
        / (2.0 * m);
    if variance <= 0.0 {
        return Err(SensitivityError::ZeroVariance);
    }

    let n = fa.len();
    let mut first = Vec::with_capacity(d);
    let mut total = Vec::with_capacity(d);
    for i in 0..d {
        let block = &fab[i * n..(i + 1) * n];
        let mut s = 0.0;
        let mut t = 0.0;
        for &r in rows {
            s += fb[r] * (block[r] - fa[r]);
            t += (fa[r] - block[r]).powi(2);
        }
        first.push(s / m / variance);
        total.push(t / (2.0 * m) / variance);
    }
    Ok((first, total))
}

/// Cross-output ranking by normalized maximum total effect.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParameterRanking {
    /// Input names in descending score order (declaration order on ties).
    pub names: Vec<String>,
    /// Normalized scores, summing to one, aligned with `names`.
    pub scores: Vec<f64>,
}

/// Ranks inputs by `max_j S_Ti(output j)`, normalized to sum to one.
pub fn rank_parameters(results: &[SobolResult]) -> Result<ParameterRanking, SensitivityError> {
    let first = results.first().ok_or(SensitivityError::NoResults)?;
    let d = first.input_names.len();
    let mut raw = vec![f64::NEG_INFINITY; d];
    for r in results {
        for (v, st) in raw.iter_mut().zip(&r.total_effect) {
            *v = v.max(*st);
        }
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(SensitivityError::ZeroVariance);
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap().then(a.cmp(&b)));
    Ok(ParameterRanking {
        names: order
            .iter()
            .map(|&i| first.input_names[i].clone())
            .collect(),
        scores: order.iter().map(|&i| raw[i] / sum).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::InputDescriptor;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn boxed(names: &[&str], lower: f64, upper: f64) -> ParameterSpace {
        ParameterSpace::custom(
            names
                .iter()
                .map(|n| InputDescriptor {
                    name: (*n).into(),
                    unit: "-".into(),
                    lower,
                    upper,
                })
                .collect(),
        )
        .unwrap()
    }

    fn evaluate(design: &SaltelliDesign, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        design.points.iter().map(|p| f(p)).collect()
    }

    #[test]
    fn design_counts_and_bounds() {
        let space = boxed(&["a", "b"], -1.0, 3.0);
        let design = saltelli_design(&space, 4, 0).unwrap();
        assert_eq!(design.len(), 16);
        assert_eq!(design.dim(), 2);
        assert!(design
            .points
            .iter()
            .all(|p| p.iter().all(|v| (-1.0..=3.0).contains(v))));
    }

    #[test]
    fn design_is_seed_deterministic() {
        let space = boxed(&["a", "b", "c"], 0.0, 1.0);
        let d1 = saltelli_design(&space, 8, 42).unwrap();
        let d2 = saltelli_design(&space, 8, 42).unwrap();
        let d3 = saltelli_design(&space, 8, 43).unwrap();
        assert_eq!(d1.points, d2.points);
        assert_ne!(d1.points, d3.points);
    }

    #[test]
    fn design_rejects_degenerate_requests() {
        let empty = ParameterSpace::custom(vec![]).unwrap();
        assert!(matches!(
            saltelli_design(&empty, 8, 0),
            Err(SensitivityError::EmptySpace)
        ));
        let space = boxed(&["a"], 0.0, 1.0);
        assert!(matches!(
            saltelli_design(&space, 0, 0),
            Err(SensitivityError::InvalidSize(0))
        ));
        assert!(matches!(
            saltelli_design(&space, MAX_SOBOL_SAMPLES + 1, 0),
            Err(SensitivityError::InvalidSize(_))
        ));
    }

    #[test]
    fn ishigami_indices_match_analytic_values() {
        let a = 7.0;
        let b = 0.1;
        // Analytic variance decomposition of the Ishigami function.
        let v1 = 0.5 * (1.0 + b * PI.powi(4) / 5.0).powi(2);
        let v2 = a * a / 8.0;
        let v13 = 8.0 * b * b * PI.powi(8) / 225.0;
        let v = v1 + v2 + v13;
        let s1 = v1 / v;
        let s2 = v2 / v;
        let st1 = (v1 + v13) / v;
        let st3 = v13 / v;

        let space = boxed(&["x1", "x2", "x3"], -PI, PI);
        let design = saltelli_design(&space, 1 << 14, 5).unwrap();
        let evals = evaluate(&design, |p| {
            p[0].sin() + a * p[1].sin().powi(2) + b * p[2].powi(4) * p[0].sin()
        });
        let result = sobol_indices(&design, &evals, 0).unwrap();

        assert_relative_eq!(result.first_order[0], s1, epsilon = 0.02);
        assert_relative_eq!(result.first_order[1], s2, epsilon = 0.02);
        assert_relative_eq!(result.first_order[2], 0.0, epsilon = 0.02);
        assert_relative_eq!(result.total_effect[0], st1, epsilon = 0.02);
        assert_relative_eq!(result.total_effect[1], s2, epsilon = 0.02);
        assert_relative_eq!(result.total_effect[2], st3, epsilon = 0.02);
        assert!(result.flagged_negative().is_empty());
    }

    #[test]
    fn additive_function_splits_variance() {
        let space = boxed(&["x1", "x2"], 0.0, 1.0);
        let design = saltelli_design(&space, 1 << 12, 1).unwrap();
        let evals = evaluate(&design, |p| p[0] + 2.0 * p[1]);
        let result = sobol_indices(&design, &evals, 0).unwrap();
        assert_relative_eq!(result.total_effect[0], 0.2, epsilon = 0.02);
        assert_relative_eq!(result.total_effect[1], 0.8, epsilon = 0.02);
        let sum: f64 = result.first_order.iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 0.03);
    }

    #[test]
    fn irrelevant_input_scores_zero() {
        let space = boxed(&["x1", "x2"], 0.0, 1.0);
        let design = saltelli_design(&space, 1 << 12, 2).unwrap();
        let evals = evaluate(&design, |p| (2.0 * p[0]).exp());
        let result = sobol_indices(&design, &evals, 0).unwrap();
        assert!(result.first_order[1].abs() < 0.01);
        assert!(result.total_effect[1].abs() < 0.01);
    }

    #[test]
    fn indices_are_affine_invariant() {
        let space = boxed(&["x1", "x2"], 0.0, 1.0);
        let design = saltelli_design(&space, 1 << 10, 3).unwrap();
        let base = evaluate(&design, |p| p[0] * p[0] + p[1]);
        let scaled: Vec<f64> = base.iter().map(|v| -4.0 * v + 11.0).collect();
        let r1 = sobol_indices(&design, &base, 0).unwrap();
        let r2 = sobol_indices(&design, &scaled, 0).unwrap();
        for i in 0..2 {
            assert_relative_eq!(r1.first_order[i], r2.first_order[i], epsilon = 1e-12);
            assert_relative_eq!(r1.total_effect[i], r2.total_effect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn bootstrap_widths_shrink_with_sample_size() {
        let space = boxed(&["x1", "x2", "x3"], -PI, PI);
        let width_at = |n_base: usize| {
            let design = saltelli_design(&space, n_base, 5).unwrap();
            let evals = evaluate(&design, |p| {
                p[0].sin() + 7.0 * p[1].sin().powi(2) + 0.1 * p[2].powi(4) * p[0].sin()
            });
            let r = sobol_indices(&design, &evals, 9).unwrap();
            r.total_effect_ci.iter().sum::<f64>()
        };
        let widths: Vec<f64> = [1 << 8, 1 << 9, 1 << 10, 1 << 11]
            .iter()
            .map(|&n| width_at(n))
            .collect();
        for pair in widths.windows(2) {
            assert!(pair[1] < pair[0], "widths not shrinking: {widths:?}");
        }
    }

    #[test]
    fn zero_variance_and_mismatch_are_rejected() {
        let space = boxed(&["x1"], 0.0, 1.0);
        let design = saltelli_design(&space, 8, 0).unwrap();
        let flat = vec![2.5; design.len()];
        assert!(matches!(
            sobol_indices(&design, &flat, 0),
            Err(SensitivityError::ZeroVariance)
        ));
        assert!(matches!(
            sobol_indices(&design, &flat[..3], 0),
            Err(SensitivityError::EvaluationMismatch { .. })
        ));
    }

    #[test]
    fn ranking_normalizes_and_orders() {
        let mk = |total: Vec<f64>| SobolResult {
            input_names: vec!["a".into(), "b".into(), "c".into()],
            n_base: 8,
            first_order: total.clone(),
            total_effect: total,
            first_order_ci: vec![0.0; 3],
            total_effect_ci: vec![0.0; 3],
        };
        let results = vec![mk(vec![0.1, 0.5, 0.2]), mk(vec![0.3, 0.2, 0.2])];
        let ranking = rank_parameters(&results).unwrap();
        assert_eq!(ranking.names, ["b", "a", "c"]);
        assert_relative_eq!(ranking.scores.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(ranking.scores[0], 0.5, epsilon = 1e-12);

        let single = rank_parameters(&results[..1]).unwrap();
        assert_eq!(single.names, ["b", "c", "a"]);

        // Tie between a and c resolves by declaration order.
        let tied = rank_parameters(&[mk(vec![0.4, 0.6, 0.4])]).unwrap();
        assert_eq!(tied.names, ["b", "a", "c"]);
    }
}
