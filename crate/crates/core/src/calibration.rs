//! History matching and ensemble MCMC over the emulators.
//!
//! Calibration proceeds in two stages. History matching repeatedly shrinks
//! the input box: each wave trains emulators on all simulations so far,
//! evaluates the implausibility
//! `I(x) = max_i |E[f_i(x)] − μ_i| / sqrt(Var[f_i(x)] + σ_i²)`
//! over a space-filling test set, keeps the not-ruled-out-yet (NROY) points
//! and picks a well-spread batch of them as the next wave's simulations.
//! Once the NROY region stops shrinking, an affine-invariant ensemble
//! sampler (the stretch move) draws from the posterior restricted to the
//! final NROY region, from which MAP estimates and credible intervals
//! follow.

use crate::emulator::{fit_gpe, Emulator, EmulatorError, GpeConfig, Prediction};
use crate::features::{FeatureVector, Observation, N_FEATURES};
use crate::space::{ParameterPoint, ParameterSpace, SpaceError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Implausibility threshold defining posterior support (three-sigma rule).
pub const SUPPORT_THRESHOLD: f64 = 3.0;

/// Attempts per design point before the enclosing cloud is declared too
/// sparse to sample.
const LHS_REJECTION_CAP: usize = 2000;

/// Errors from design generation, history matching and MCMC.
#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need {want} emulators (one per output feature), got {got}")]
    EmulatorCount { got: usize, want: usize },
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("design size must be at least 1")]
    EmptyDesign,
    #[error("no test point satisfied I ≤ {threshold} in wave {wave}; target unreachable")]
    EmptyNroy { threshold: f64, wave: usize },
    #[error("cloud too sparse: stratum rejection failed after {LHS_REJECTION_CAP} attempts")]
    SparseRegion,
    #[error("ensemble walkers all initialized at one point")]
    DegenerateEnsemble,
    #[error("{walkers} walkers cannot span {dim} dimensions; need at least {need}")]
    TooFewWalkers {
        walkers: usize,
        dim: usize,
        need: usize,
    },
    #[error("chain holds no samples")]
    EmptyChain,
    #[error("simulation failed in wave {wave}: {message}")]
    Simulation { wave: usize, message: String },
}

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

/// Low-discrepancy design of `n` points scaled to the space's bounds,
/// deterministic per `seed`.
pub fn sobol_design(
    space: &ParameterSpace,
    n: usize,
    seed: u32,
) -> Result<Vec<Vec<f64>>, CalibrationError> {
    if n == 0 {
        return Err(CalibrationError::EmptyDesign);
    }
    let d = space.dim();
    (0..n)
        .map(|row| {
            let z: Vec<f64> = (0..d)
                .map(|k| f64::from(sobol_burley::sample(row as u32, k as u32, seed)))
                .collect();
            space.to_physical(&z).map_err(CalibrationError::from)
        })
        .collect()
}

/// Latin hypercube over the full box: each dimension's `n` strata are hit
/// exactly once. Deterministic per `seed`.
pub fn lhs_design(
    space: &ParameterSpace,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, CalibrationError> {
    let full: Vec<(f64, f64)> = (0..space.dim()).map(|_| (0.0, 1.0)).collect();
    lhs_normalized(space.dim(), n, &full, &mut |_| true, seed)?
        .into_iter()
        .map(|z| space.to_physical(&z).map_err(CalibrationError::from))
        .collect()
}

/// Latin hypercube over a cloud-shaped region: stratification applies to
/// the cloud's bounding box and each draw is rejected into the cloud via
/// `membership` (resampling within the same stratum), so a full-box cloud
/// reduces to a plain LHS.
pub fn lhs_design_in_cloud(
    space: &ParameterSpace,
    cloud: &NroyCloud,
    membership: &mut dyn FnMut(&[f64]) -> bool,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, CalibrationError> {
    let bbox = cloud.bounding_box();
    lhs_normalized(space.dim(), n, &bbox, membership, seed)?
        .into_iter()
        .map(|z| space.to_physical(&z).map_err(CalibrationError::from))
        .collect()
}

/// Stratified sampling in normalized coordinates with per-stratum rejection.
fn lhs_normalized(
    d: usize,
    n: usize,
    bbox: &[(f64, f64)],
    membership: &mut dyn FnMut(&[f64]) -> bool,
    seed: u64,
) -> Result<Vec<Vec<f64>>, CalibrationError> {
    if n == 0 {
        return Err(CalibrationError::EmptyDesign);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One independent stratum permutation per dimension, stored row-major.
    let mut strata = vec![vec![0usize; d]; n];
    for k in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        for (row, s) in strata.iter_mut().zip(&perm) {
            row[k] = *s;
        }
    }
    let mut points = Vec::with_capacity(n);
    for row in &strata {
        let mut attempts = 0;
        loop {
            // First try honours the row's stratum in every dimension, so a
            // box-shaped cloud yields an exact Latin hypercube. A stratum
            // combination pins one tiny cell, which a general cloud almost
            // never intersects, so retries fall back to uniform draws over
            // the bounding box.
            let z: Vec<f64> = (0..d)
                .map(|k| {
                    let (lo, hi) = bbox[k];
                    let u = if attempts == 0 {
                        (row[k] as f64 + rng.r#gen::<f64>()) / n as f64
                    } else {
                        rng.r#gen::<f64>()
                    };
                    lo + u * (hi - lo)
                })
                .collect();
            if membership(&z) {
                points.push(z);
                break;
            }
            attempts += 1;
            if attempts >= LHS_REJECTION_CAP {
                return Err(CalibrationError::SparseRegion);
            }
        }
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// Implausibility and likelihood
// ---------------------------------------------------------------------------

/// Emulator predictions for all features at one physical point.
pub fn predict_features(
    x: &[f64],
    emulators: &[Emulator],
) -> Result<Vec<Prediction>, CalibrationError> {
    if emulators.len() != N_FEATURES {
        return Err(CalibrationError::EmulatorCount {
            got: emulators.len(),
            want: N_FEATURES,
        });
    }
    emulators
        .iter()
        .map(|em| em.predict_one(x).map_err(CalibrationError::from))
        .collect()
}

/// Implausibility from per-feature predictions:
/// `max_i |E_i − μ_i| / sqrt(Var_i + σ_i²)`.
pub fn implausibility_from(preds: &[Prediction], obs: &Observation) -> f64 {
    preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let denom = (p.variance.max(0.0) + obs.noise_sd[i] * obs.noise_sd[i]).sqrt();
            (p.mean - obs.mean[i]).abs() / denom
        })
        .fold(0.0, f64::max)
}

/// Implausibility of a physical point under the emulator set.
pub fn implausibility(
    x: &[f64],
    emulators: &[Emulator],
    obs: &Observation,
) -> Result<f64, CalibrationError> {
    Ok(implausibility_from(&predict_features(x, emulators)?, obs))
}

/// Gaussian log-likelihood from per-feature predictions, with the emulator
/// variance added to the observation variance feature by feature.
pub fn log_likelihood_from(preds: &[Prediction], obs: &Observation) -> f64 {
    preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s2 = p.variance.max(0.0) + obs.noise_sd[i] * obs.noise_sd[i];
            let misfit = obs.mean[i] - p.mean;
            -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - misfit * misfit / (2.0 * s2)
        })
        .sum()
}

/// Log-likelihood of a physical point under the emulator set.
pub fn log_likelihood(
    x: &[f64],
    emulators: &[Emulator],
    obs: &Observation,
) -> Result<f64, CalibrationError> {
    Ok(log_likelihood_from(&predict_features(x, emulators)?, obs))
}

// ---------------------------------------------------------------------------
// History matching
// ---------------------------------------------------------------------------

/// The not-ruled-out-yet region after a wave.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NroyCloud {
    /// 1-based wave index that produced this cloud.
    pub wave: usize,
    /// Implausibility threshold the points satisfy (under that wave's
    /// emulators).
    pub threshold: f64,
    /// Retained test points in normalized coordinates.
    pub points: Vec<Vec<f64>>,
    /// Estimated NROY volume fraction of the initial box after each wave so
    /// far (cumulative across waves).
    pub fraction_history: Vec<f64>,
}

impl NroyCloud {
    /// Latest global NROY volume fraction.
    pub fn fraction(&self) -> f64 {
        *self.fraction_history.last().unwrap_or(&1.0)
    }

    /// Axis-aligned bounding box of the retained points (normalized).
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let d = self.points.first().map_or(0, Vec::len);
        (0..d)
            .map(|k| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for p in &self.points {
                    lo = lo.min(p[k]);
                    hi = hi.max(p[k]);
                }
                (lo, hi)
            })
            .collect()
    }
}

/// Greedy maximin subset: starts at the point nearest the set's centroid
/// and repeatedly adds the point farthest from everything selected.
pub fn greedy_maximin(points: &[Vec<f64>], n_select: usize) -> Vec<usize> {
    if points.is_empty() || n_select == 0 {
        return Vec::new();
    }
    let d = points[0].len();
    let centroid: Vec<f64> = (0..d)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / points.len() as f64)
        .collect();
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let first = (0..points.len())
        .min_by(|&a, &b| {
            dist2(&points[a], &centroid)
                .partial_cmp(&dist2(&points[b], &centroid))
                .unwrap()
                .then(a.cmp(&b))
        })
        .unwrap();
    let mut selected = vec![first];
    let mut min_d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while selected.len() < n_select.min(points.len()) {
        let next = (0..points.len())
            .max_by(|&a, &b| min_d2[a].partial_cmp(&min_d2[b]).unwrap().then(b.cmp(&a)))
            .unwrap();
        if min_d2[next] == 0.0 {
            break; // only duplicates of selected points remain
        }
        selected.push(next);
        for (i, p) in points.iter().enumerate() {
            min_d2[i] = min_d2[i].min(dist2(p, &points[next]));
        }
    }
    selected
}

/// One wave of history matching.
///
/// Samples `n_test` points from `prev` (or the full box for wave 1),
/// retains those with `I ≤ threshold` under `emulators`, and proposes the
/// next wave's `n_simul` simulations by greedy maximin over the retained
/// set. `prev` carries the previous wave's cloud together with the
/// emulators that defined it, so the test set can be rejected into the
/// previous NROY region rather than just its bounding box.
#[allow(clippy::too_many_arguments)]
pub fn hm_wave(
    space: &ParameterSpace,
    prev: Option<(&NroyCloud, &[Emulator])>,
    emulators: &[Emulator],
    obs: &Observation,
    threshold: f64,
    n_test: usize,
    n_simul: usize,
    seed: u64,
) -> Result<(NroyCloud, Vec<Vec<f64>>), CalibrationError> {
    if emulators.len() != N_FEATURES {
        return Err(CalibrationError::EmulatorCount {
            got: emulators.len(),
            want: N_FEATURES,
        });
    }
    let wave = prev.map_or(1, |(cloud, _)| cloud.wave + 1);

    let test_points: Vec<Vec<f64>> = match prev {
        None => {
            let full: Vec<(f64, f64)> = (0..space.dim()).map(|_| (0.0, 1.0)).collect();
            lhs_normalized(space.dim(), n_test, &full, &mut |_| true, seed)?
        }
        Some((cloud, prev_emulators)) => {
            let bbox = cloud.bounding_box();
            let mut member = |z: &[f64]| -> bool {
                let x = match space.to_physical(z) {
                    Ok(x) => x,
                    Err(_) => return false,
                };
                implausibility(&x, prev_emulators, obs)
                    .map(|i| i <= cloud.threshold)
                    .unwrap_or(false)
            };
            lhs_normalized(space.dim(), n_test, &bbox, &mut member, seed)?
        }
    };

    let implausibilities: Vec<f64> = test_points
        .par_iter()
        .map(|z| {
            let x = space.to_physical(z)?;
            implausibility(&x, emulators, obs)
        })
        .collect::<Result<_, _>>()?;

    let retained: Vec<Vec<f64>> = test_points
        .into_iter()
        .zip(&implausibilities)
        .filter(|(_, i)| **i <= threshold)
        .map(|(z, _)| z)
        .collect();
    if retained.is_empty() {
        return Err(CalibrationError::EmptyNroy { threshold, wave });
    }

    let wave_fraction = retained.len() as f64 / implausibilities.len() as f64;
    let mut fraction_history = prev.map_or(Vec::new(), |(c, _)| c.fraction_history.clone());
    let global = wave_fraction * prev.map_or(1.0, |(c, _)| c.fraction());
    fraction_history.push(global);

    let design: Vec<Vec<f64>> = greedy_maximin(&retained, n_simul)
        .into_iter()
        .map(|i| space.to_physical(&retained[i]).map_err(CalibrationError::from))
        .collect::<Result<_, _>>()?;

    Ok((
        NroyCloud {
            wave,
            threshold,
            points: retained,
            fraction_history,
        },
        design,
    ))
}

/// Wave schedule and sizes for [`run_history_matching`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HmSchedule {
    /// Threshold for wave 1.
    pub initial_threshold: f64,
    /// Per-wave threshold decrement.
    pub threshold_decrement: f64,
    /// Floor the threshold never drops below (three-sigma rule).
    pub final_threshold: f64,
    /// Simulations in wave 1.
    pub wave1_simulations: usize,
    /// Simulations in each later wave.
    pub later_simulations: usize,
    /// Test points evaluated per wave.
    pub n_test: usize,
    /// Hard cap on the number of waves.
    pub max_waves: usize,
    /// Stop once the global NROY fraction drops by less than this between
    /// waves.
    pub stop_reduction: f64,
    /// Emulator fit settings.
    pub gpe: GpeConfig,
    pub seed: u64,
}

impl Default for HmSchedule {
    fn default() -> Self {
        HmSchedule {
            initial_threshold: 3.5,
            threshold_decrement: 0.5,
            final_threshold: 3.0,
            wave1_simulations: 200,
            later_simulations: 100,
            n_test: 20_000,
            max_waves: 6,
            stop_reduction: 0.01,
            gpe: GpeConfig::default(),
            seed: 0,
        }
    }
}

impl HmSchedule {
    /// Threshold used by the given 1-based wave.
    pub fn threshold(&self, wave: usize) -> f64 {
        (self.initial_threshold - self.threshold_decrement * (wave.saturating_sub(1)) as f64)
            .max(self.final_threshold)
    }
}

/// Everything one wave produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveArtifacts {
    pub wave: usize,
    pub threshold: f64,
    /// Simulations run *for* this wave (physical coordinates).
    pub design: Vec<Vec<f64>>,
    /// Their outputs, aligned with `design`.
    pub outputs: Vec<FeatureVector>,
    /// Fraction of this wave's test points retained.
    pub retained_fraction: f64,
    /// Estimated NROY volume fraction of the initial box after this wave.
    pub global_fraction: f64,
}

/// Result of a full history-matching run.
#[derive(Clone, Debug)]
pub struct HmResult {
    pub final_cloud: NroyCloud,
    pub waves: Vec<WaveArtifacts>,
    /// Emulators of the final wave, one per feature.
    pub emulators: Vec<Emulator>,
    /// All simulated inputs (physical), cumulative across waves.
    pub x_all: Vec<Vec<f64>>,
    /// All simulated outputs, aligned with `x_all`.
    pub y_all: Vec<FeatureVector>,
}

/// Runs waves of history matching until the NROY region stops shrinking,
/// the wave cap is reached, or a wave rules everything out.
///
/// `simulate` maps a physical input point to the simulator's feature
/// vector; waves run it over their whole design (in parallel where
/// possible) and retrain the emulators on all data so far.
pub fn run_history_matching<S>(
    space: &ParameterSpace,
    simulate: &S,
    obs: &Observation,
    schedule: &HmSchedule,
) -> Result<HmResult, CalibrationError>
where
    S: Fn(&[f64]) -> Result<FeatureVector, String> + Sync,
{
    let run_design = |design: &[Vec<f64>], wave: usize| -> Result<Vec<FeatureVector>, CalibrationError> {
        design
            .par_iter()
            .map(|x| {
                simulate(x).map_err(|message| CalibrationError::Simulation { wave, message })
            })
            .collect()
    };

    let mut x_all = sobol_design(space, schedule.wave1_simulations, schedule.seed as u32)?;
    let mut y_all = run_design(&x_all, 1)?;

    let mut waves: Vec<WaveArtifacts> = Vec::new();
    let mut prev: Option<(NroyCloud, Vec<Emulator>)> = None;
    let mut pending_design = x_all.clone();
    let mut pending_outputs = y_all.clone();

    loop {
        let wave = prev.as_ref().map_or(1, |(c, _)| c.wave + 1);
        let emulators: Vec<Emulator> = (0..N_FEATURES)
            .map(|i| {
                let column: Vec<f64> = y_all.iter().map(|f| f[i]).collect();
                fit_gpe(space, &x_all, &column, &schedule.gpe)
            })
            .collect::<Result<_, _>>()?;

        let threshold = schedule.threshold(wave);
        let (cloud, next_design) = hm_wave(
            space,
            prev.as_ref().map(|(c, e)| (c, e.as_slice())),
            &emulators,
            obs,
            threshold,
            schedule.n_test,
            schedule.later_simulations,
            schedule.seed.wrapping_add(wave as u64),
        )?;

        waves.push(WaveArtifacts {
            wave,
            threshold,
            design: std::mem::take(&mut pending_design),
            outputs: std::mem::take(&mut pending_outputs),
            retained_fraction: cloud.fraction()
                / prev.as_ref().map_or(1.0, |(c, _)| c.fraction()),
            global_fraction: cloud.fraction(),
        });

        let reduction = prev
            .as_ref()
            .map(|(c, _)| c.fraction() - cloud.fraction())
            .unwrap_or(1.0 - cloud.fraction());
        let stop = wave >= schedule.max_waves
            || (wave > 1 && reduction < schedule.stop_reduction);
        if stop {
            return Ok(HmResult {
                final_cloud: cloud,
                waves,
                emulators,
                x_all,
                y_all,
            });
        }

        let outputs = run_design(&next_design, wave + 1)?;
        x_all.extend(next_design.iter().cloned());
        y_all.extend(outputs.iter().cloned());
        pending_design = next_design;
        pending_outputs = outputs;
        prev = Some((cloud, emulators));
    }
}

// ---------------------------------------------------------------------------
// Ensemble MCMC
// ---------------------------------------------------------------------------

/// Stretch-move log acceptance ratio for a proposal drawn with stretch
/// factor `z` in `d` dimensions: `(d − 1)·ln z + logp(y) − logp(x)`.
pub fn stretch_ln_accept(z: f64, d: usize, logp_new: f64, logp_old: f64) -> f64 {
    (d as f64 - 1.0) * z.ln() + logp_new - logp_old
}

/// Ensemble sampler settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McmcOptions {
    pub walkers: usize,
    /// Ensemble iterations (each advances every walker once).
    pub steps: usize,
    /// Iterations discarded from the front of the chain.
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in iteration.
    pub thin: usize,
    /// Stretch-move scale `a`; `z ~ g(z) ∝ 1/√z` on `[1/a, a]`.
    pub stretch_a: f64,
    pub seed: u64,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            walkers: 18,
            steps: 20_000,
            burn_in: 2_000,
            thin: 10,
            stretch_a: 2.0,
            seed: 0,
        }
    }
}

/// Post-burn-in, thinned samples from the ensemble sampler.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Chain {
    pub space: ParameterSpace,
    pub walkers: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Kept samples in normalized coordinates, iteration-major then walker.
    pub samples: Vec<Vec<f64>>,
    /// Log-posterior value of each kept sample.
    pub log_posterior: Vec<f64>,
    /// Accepted fraction of all proposals.
    pub acceptance: f64,
}

impl Chain {
    /// Kept samples in physical units.
    pub fn physical_samples(&self) -> Result<Vec<Vec<f64>>, SpaceError> {
        self.samples.iter().map(|z| self.space.to_physical(z)).collect()
    }

    /// Per-dimension posterior mean in normalized coordinates.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.space.dim();
        let mut m = vec![0.0; d];
        for s in &self.samples {
            for (k, v) in s.iter().enumerate() {
                m[k] += v;
            }
        }
        for v in &mut m {
            *v /= self.samples.len() as f64;
        }
        m
    }

    /// Equal-tailed credible interval of one normalized coordinate.
    pub fn credible_interval(&self, dim: usize, level: f64) -> (f64, f64) {
        let mut values: Vec<f64> = self.samples.iter().map(|s| s[dim]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tail = 0.5 * (1.0 - level);
        let lo = ((values.len() as f64 - 1.0) * tail).round() as usize;
        let hi = ((values.len() as f64 - 1.0) * (1.0 - tail)).round() as usize;
        (values[lo], values[hi])
    }
}

/// Runs the affine-invariant ensemble sampler on an arbitrary log density
/// over normalized coordinates.
///
/// `init` seeds the walkers. Each iteration updates the two half-ensembles
/// in turn, so every proposal stretches against the other half's current
/// state. Samples are recorded after `burn_in` iterations, every `thin`
/// iterations, all walkers at once.
pub fn ensemble_sample<F>(
    space: &ParameterSpace,
    logp: F,
    init: &[Vec<f64>],
    opts: &McmcOptions,
) -> Result<Chain, CalibrationError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = space.dim();
    let need = (2 * d).max(4);
    if opts.walkers < need {
        return Err(CalibrationError::TooFewWalkers {
            walkers: opts.walkers,
            dim: d,
            need,
        });
    }
    if init.len() != opts.walkers {
        return Err(CalibrationError::TooFewWalkers {
            walkers: init.len(),
            dim: d,
            need: opts.walkers,
        });
    }
    if init.windows(2).all(|w| w[0] == w[1]) && opts.walkers > 1 {
        return Err(CalibrationError::DegenerateEnsemble);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut positions: Vec<Vec<f64>> = init.to_vec();
    let mut logps: Vec<f64> = positions.iter().map(|z| logp(z)).collect();

    let mut samples = Vec::new();
    let mut log_posterior = Vec::new();
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let a = opts.stretch_a;
    let half = opts.walkers / 2;

    for step in 0..opts.steps {
        for (lo, hi, other_lo, other_hi) in [
            (0, half, half, opts.walkers),
            (half, opts.walkers, 0, half),
        ] {
            for i in lo..hi {
                let j = rng.gen_range(other_lo..other_hi);
                let u: f64 = rng.r#gen();
                let z = ((a - 1.0) * u + 1.0).powi(2) / a;
                let proposal: Vec<f64> = positions[i]
                    .iter()
                    .zip(&positions[j])
                    .map(|(xi, xj)| xj + z * (xi - xj))
                    .collect();
                let lp = logp(&proposal);
                proposed += 1;
                let ln_accept = stretch_ln_accept(z, d, lp, logps[i]);
                if ln_accept >= 0.0 || rng.r#gen::<f64>().ln() < ln_accept {
                    positions[i] = proposal;
                    logps[i] = lp;
                    accepted += 1;
                }
            }
        }
        if step >= opts.burn_in && (step - opts.burn_in).is_multiple_of(opts.thin) {
            samples.extend(positions.iter().cloned());
            log_posterior.extend(logps.iter().copied());
        }
    }

    Ok(Chain {
        space: space.clone(),
        walkers: opts.walkers,
        steps: opts.steps,
        burn_in: opts.burn_in,
        thin: opts.thin,
        samples,
        log_posterior,
        acceptance: accepted as f64 / proposed.max(1) as f64,
    })
}

/// Posterior sampling over the final NROY region.
///
/// The prior is uniform on the cloud's bounding box with NROY membership
/// (`I(x) ≤ 3` under the final-wave emulators) as its support; the
/// likelihood is the Gaussian of [`log_likelihood`]. Walkers start from the
/// cloud's retained points.
pub fn ensemble_mcmc(
    space: &ParameterSpace,
    cloud: &NroyCloud,
    emulators: &[Emulator],
    obs: &Observation,
    opts: &McmcOptions,
) -> Result<Chain, CalibrationError> {
    if emulators.len() != N_FEATURES {
        return Err(CalibrationError::EmulatorCount {
            got: emulators.len(),
            want: N_FEATURES,
        });
    }
    if cloud.points.is_empty() {
        return Err(CalibrationError::EmptyNroy {
            threshold: cloud.threshold,
            wave: cloud.wave,
        });
    }
    let bbox = cloud.bounding_box();
    let logp = |z: &[f64]| -> f64 {
        let inside = z
            .iter()
            .zip(&bbox)
            .all(|(v, (lo, hi))| v >= lo && v <= hi);
        if !inside {
            return f64::NEG_INFINITY;
        }
        let x = match space.to_physical(z) {
            Ok(x) => x,
            Err(_) => return f64::NEG_INFINITY,
        };
        let preds = match predict_features(&x, emulators) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        if implausibility_from(&preds, obs) > SUPPORT_THRESHOLD {
            return f64::NEG_INFINITY;
        }
        log_likelihood_from(&preds, obs)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(0x9e3779b97f4a7c15));
    let init: Vec<Vec<f64>> = (0..opts.walkers)
        .map(|_| cloud.points[rng.gen_range(0..cloud.points.len())].clone())
        .collect();
    if init.windows(2).all(|w| w[0] == w[1]) && opts.walkers > 1 {
        return Err(CalibrationError::DegenerateEnsemble);
    }
    ensemble_sample(space, logp, &init, opts)
}

/// The kept sample with the highest stored log-posterior (first occurrence
/// on ties).
pub fn map_estimate(chain: &Chain) -> Result<(ParameterPoint, f64), CalibrationError> {
    if chain.samples.is_empty() {
        return Err(CalibrationError::EmptyChain);
    }
    let mut best = 0;
    for (i, lp) in chain.log_posterior.iter().enumerate() {
        if *lp > chain.log_posterior[best] {
            best = i;
        }
    }
    let point = chain.space.point_from_normalized(&chain.samples[best])?;
    Ok((point, chain.log_posterior[best]))
}

/// Index of the simulated point nearest to `target` in normalized
/// coordinates (lowest index on ties). `simulated` is in physical units.
pub fn nearest_plausible(
    space: &ParameterSpace,
    target: &ParameterPoint,
    simulated: &[Vec<f64>],
) -> Result<usize, CalibrationError> {
    if simulated.is_empty() {
        return Err(CalibrationError::EmptyDesign);
    }
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, x) in simulated.iter().enumerate() {
        let z = space.to_normalized(x)?;
        let d2: f64 = z
            .iter()
            .zip(&target.normalized)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    Ok(best)
}
