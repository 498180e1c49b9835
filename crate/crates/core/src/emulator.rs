//! Gaussian-process emulation of scalar simulator outputs.
//!
//! Each output feature gets an independent universal-kriging emulator: a
//! linear mean `h(x)ᵀβ` with `h(x) = [1, x₁…x_d]` plus a zero-mean GP with
//! anisotropic squared-exponential kernel
//! `k(x, x′) = σ_f² · exp(−½ Σ_i (x_i − x′_i)²/δ_i²)`,
//! working on inputs normalized to `[0, 1]^d` and outputs standardized to
//! zero mean and unit variance. `β` and `σ_f²` have closed-form optima given
//! the lengthscales, so fitting minimises the concentrated negative log
//! marginal likelihood over `log δ` alone, with multi-start L-BFGS inside a
//! bounded reparameterization and an escalating diagonal jitter for
//! factorization robustness.

use crate::optim::{minimize, LbfgsOptions};
use crate::space::{InputDescriptor, ParameterSpace, SpaceError};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lengthscale search bounds in normalized input units.
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e2);

/// Diagonal jitter schedule tried in order until the correlation matrix
/// factorizes.
const JITTER_SCHEDULE: [f64; 4] = [1e-10, 1e-8, 1e-6, 1e-4];

/// Floor on the profiled process variance in standardized output units,
/// guarding the log-likelihood against exactly reproducible outputs.
const SIGMA2_FLOOR: f64 = 1e-12;

/// Hyperparameter-fit settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GpeConfig {
    /// Number of L-BFGS restarts over random initial lengthscales.
    pub n_restarts: usize,
    /// L-BFGS iteration cap per restart.
    pub max_iterations: usize,
    /// Seed for the restart draws (and fold assignment in cross-validation).
    pub seed: u64,
}

impl Default for GpeConfig {
    fn default() -> Self {
        GpeConfig {
            n_restarts: 8,
            max_iterations: 40,
            seed: 0,
        }
    }
}

/// Errors from emulator fitting, prediction and scoring.
#[derive(Debug, Error)]
pub enum EmulatorError {
    #[error("design has {rows} rows but {outputs} outputs")]
    ShapeMismatch { rows: usize, outputs: usize },
    #[error("point has {got} coordinates, emulator has {want} inputs")]
    DimensionMismatch { got: usize, want: usize },
    #[error("training data contain non-finite values")]
    NonFinite,
    #[error("design is rank-deficient under the linear mean basis")]
    RankDeficient,
    #[error("correlation matrix failed to factorize at maximum jitter")]
    Factorization,
    #[error("every hyperparameter restart produced a non-finite likelihood")]
    FitFailed,
    #[error("coefficient of determination undefined: outputs have zero variance")]
    UndefinedScore,
    #[error("cross-validation fold {fold} has {size} points; at least 2 required")]
    FoldTooSmall { fold: usize, size: usize },
    #[error("need at least {want} points, got {got}")]
    TooFewPoints { got: usize, want: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("emulator file: {0}")]
    File(#[from] serde_json::Error),
    #[error("unsupported emulator file version {0}")]
    FileVersion(u32),
}

/// Posterior mean and variance at one point, in output units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    /// True when the queried point lies outside the training bounds.
    pub extrapolated: bool,
}

impl Prediction {
    /// Posterior standard deviation.
    pub fn sd(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// A fitted Gaussian-process emulator of one scalar output.
#[derive(Clone, Debug)]
pub struct Emulator {
    inputs: Vec<InputDescriptor>,
    /// Kernel lengthscales in normalized input units.
    lengthscales: Vec<f64>,
    /// Profiled process variance in standardized output units.
    sigma_f2: f64,
    /// Diagonal jitter the final factorization used.
    jitter: f64,
    /// Mean coefficients for `h(z) = [1, z₁…z_d]`, standardized outputs.
    beta: DVector<f64>,
    /// Training inputs, rows normalized to `[0, 1]^d`.
    x: DMatrix<f64>,
    /// Standardized training outputs.
    y: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    /// Cholesky factor of `R + jitter·I`.
    chol: Cholesky<f64, Dyn>,
    /// `(R + jitter·I)⁻¹ (y − Hβ)`.
    alpha: DVector<f64>,
}

/// Serialized form of [`Emulator`]; all derived quantities are rebuilt on
/// load so a round trip reproduces predictions exactly.
#[derive(Serialize, Deserialize)]
struct EmulatorFile {
    version: u32,
    inputs: Vec<InputDescriptor>,
    lengthscales: Vec<f64>,
    sigma_f2: f64,
    jitter: f64,
    beta: Vec<f64>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

const EMULATOR_FILE_VERSION: u32 = 1;

/// Per-dimension squared differences between all training-point pairs,
/// reused across every likelihood evaluation.
struct SquaredDists(Vec<DMatrix<f64>>);

impl SquaredDists {
    fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let stack = (0..x.ncols())
            .map(|k| {
                DMatrix::from_fn(n, n, |i, j| {
                    let d = x[(i, k)] - x[(j, k)];
                    d * d
                })
            })
            .collect();
        SquaredDists(stack)
    }

    /// Unit-variance correlation matrix for lengthscales `delta` (no jitter).
    fn correlation(&self, delta: &[f64]) -> DMatrix<f64> {
        let n = self.0[0].nrows();
        let mut q = DMatrix::zeros(n, n);
        for (k, d2) in self.0.iter().enumerate() {
            let inv = 0.5 / (delta[k] * delta[k]);
            q += d2 * inv;
        }
        q.map(|v| (-v).exp())
    }
}

/// Fits the emulator for one output column.
///
/// `x` holds one training point per row in physical units; rows must lie
/// inside (or on) the bounds of `space`. A warning-free fit needs
/// `n ≥ 10·d` points; fewer are accepted since early waves can be small,
/// but at least `d + 2` are required so the profiled variance is defined.
pub fn fit_gpe(
    space: &ParameterSpace,
    x: &[Vec<f64>],
    y: &[f64],
    config: &GpeConfig,
) -> Result<Emulator, EmulatorError> {
    let d = space.dim();
    let n = x.len();
    if n != y.len() {
        return Err(EmulatorError::ShapeMismatch {
            rows: n,
            outputs: y.len(),
        });
    }
    if n == 0 {
        return Err(EmulatorError::TooFewPoints { got: 0, want: 1 });
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(EmulatorError::NonFinite);
    }

    let mut xn = DMatrix::zeros(n, d);
    for (i, row) in x.iter().enumerate() {
        let z = space.to_normalized(row)?;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(EmulatorError::NonFinite);
        }
        for (k, zk) in z.iter().enumerate() {
            xn[(i, k)] = *zk;
        }
    }

    if n < 10 * d {
        log::warn!("GP fit with n = {n} < 10·d = {} training points", 10 * d);
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_scale = if var.sqrt() > 1e-300 { var.sqrt() } else { 1.0 };
    let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));

    let dists = SquaredDists::new(&xn);
    let h = basis(&xn);
    // The linear mean needs an identifiable design: with enough points a
    // rank drop means redundant basis columns (for example a frozen input).
    if n > d {
        let rank = h.clone().svd(false, false).rank(1e-10 * (n.max(d + 1) as f64).sqrt());
        if rank < d + 1 {
            return Err(EmulatorError::RankDeficient);
        }
    }

    // Bounded log-lengthscale parameterization: log δ = s·tanh(u) spans
    // exactly (log lo, log hi) with s the log half-width.
    let s = 0.5 * (LENGTHSCALE_BOUNDS.1.ln() - LENGTHSCALE_BOUNDS.0.ln());
    let nll_at = |u: &[f64], grad: &mut [f64]| -> f64 {
        let t: Vec<f64> = u.iter().map(|ui| ui.tanh()).collect();
        let delta: Vec<f64> = t.iter().map(|ti| (s * ti).exp()).collect();
        match concentrated_nll(&dists, &h, &ys, &delta) {
            Some((value, dv)) => {
                for k in 0..u.len() {
                    grad[k] = dv[k] * s * (1.0 - t[k] * t[k]);
                }
                value
            }
            None => {
                grad.fill(0.0);
                f64::NAN
            }
        }
    };

    let opts = LbfgsOptions {
        max_iters: config.max_iterations,
        grad_tol_inf: 1e-5,
        ..LbfgsOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for restart in 0..config.n_restarts.max(1) {
        // First start at δ = 1, the midpoint of the log-bounds; the rest
        // draw log δ uniformly over the central portion of the range.
        let u0: Vec<f64> = if restart == 0 {
            vec![0.0; d]
        } else {
            (0..d)
                .map(|_| {
                    let logd = rng.gen_range(-3.0_f64..2.0);
                    (logd / s).clamp(-0.999, 0.999).atanh()
                })
                .collect()
        };
        let result = minimize(nll_at, &u0, &opts);
        if !result.f.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(f, _)| result.f < *f) {
            best = Some((result.f, result.x));
        }
    }
    let (_, u_best) = best.ok_or(EmulatorError::FitFailed)?;
    let delta: Vec<f64> = u_best.iter().map(|ui| (s * ui.tanh()).exp()).collect();

    let (chol, jitter, rmat) =
        factorize(&dists.correlation(&delta)).ok_or(EmulatorError::Factorization)?;
    let (beta, sigma_f2, alpha) = profiled_fit(&chol, &rmat, &h, &ys)?;

    Ok(Emulator {
        inputs: space.inputs().to_vec(),
        lengthscales: delta,
        sigma_f2,
        jitter,
        beta,
        x: xn,
        y: ys,
        y_mean,
        y_scale,
        chol,
        alpha,
    })
}

/// `[1, z₁…z_d]` rows for every training point.
fn basis(xn: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = (xn.nrows(), xn.ncols());
    DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { xn[(i, j - 1)] })
}

/// Cholesky-factorizes `corr + g·I`, escalating `g` through the schedule.
/// Returns the factor, the jitter used and the jittered matrix itself (kept
/// for iterative refinement of solves).
fn factorize(corr: &DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, f64, DMatrix<f64>)> {
    for &g in &JITTER_SCHEDULE {
        let mut r = corr.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += g;
        }
        if let Some(chol) = Cholesky::new(r.clone()) {
            return Some((chol, g, r));
        }
    }
    None
}

/// Solves `R x = b` with one step of iterative refinement, recovering most
/// of the accuracy lost to round-off when `R` is badly conditioned.
fn refined_solve(chol: &Cholesky<f64, Dyn>, r: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let x0 = chol.solve(b);
    let resid = b - r * &x0;
    x0 + chol.solve(&resid)
}

/// Generalized-least-squares mean coefficients, profiled process variance
/// and the prediction weights `α = R⁻¹(y − Hβ)`.
fn profiled_fit(
    chol: &Cholesky<f64, Dyn>,
    rmat: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, f64, DVector<f64>), EmulatorError> {
    let n = y.len();
    let p = h.ncols();
    let rinv_h = chol.solve(h);
    let m = h.transpose() * &rinv_h;
    let rhs = rinv_h.transpose() * y;
    // Least-norm solve so under-determined means (n < d + 1) still work;
    // genuine column redundancy in an over-determined design is an error.
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|v| **v > tol).count();
    if n >= p && rank < p {
        return Err(EmulatorError::RankDeficient);
    }
    let beta = svd
        .solve(&rhs, tol)
        .map_err(|_| EmulatorError::RankDeficient)?;
    let r = y - h * &beta;
    let alpha = refined_solve(chol, rmat, &r);
    let sigma_f2 = (r.dot(&alpha) / n as f64).max(SIGMA2_FLOOR);
    Ok((beta, sigma_f2, alpha))
}

/// Concentrated negative log marginal likelihood and its gradient with
/// respect to `log δ`. Returns `None` when the evaluation is not finite.
fn concentrated_nll(
    dists: &SquaredDists,
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    delta: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let n = y.len() as f64;
    let corr = dists.correlation(delta);
    let (chol, _, rmat) = factorize(&corr)?;
    let (_, sigma2, alpha) = profiled_fit(&chol, &rmat, h, y).ok()?;

    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let value = 0.5 * (n * (2.0 * std::f64::consts::PI * sigma2).ln() + n + log_det);
    if !value.is_finite() {
        return None;
    }

    // dNLL/dlogδ_k = ½·tr(R⁻¹ ∂R) − αᵀ ∂R α / (2σ̂²), with
    // ∂R/∂logδ_k = corr ∘ D²_k/δ_k² (the jitter term is constant).
    let rinv = chol.inverse();
    let grad = (0..delta.len())
        .map(|k| {
            let inv = 1.0 / (delta[k] * delta[k]);
            let mut trace = 0.0;
            let mut quad = 0.0;
            let d2 = &dists.0[k];
            for j in 0..d2.ncols() {
                for i in 0..d2.nrows() {
                    let dr = corr[(i, j)] * d2[(i, j)] * inv;
                    trace += rinv[(i, j)] * dr;
                    quad += alpha[i] * dr * alpha[j];
                }
            }
            0.5 * trace - 0.5 * quad / sigma2
        })
        .collect();
    Some((value, grad))
}

impl Emulator {
    /// Input descriptors (names and bounds) the emulator was trained on.
    pub fn inputs(&self) -> &[InputDescriptor] {
        &self.inputs
    }

    /// Number of inputs.
    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    /// Number of training points.
    pub fn n_train(&self) -> usize {
        self.x.nrows()
    }

    /// Kernel lengthscales in normalized units.
    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    /// Diagonal jitter the training factorization needed. The base value of
    /// the schedule means the fit interpolates; escalated values trade
    /// interpolation accuracy for a usable factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Process variance in output units.
    pub fn signal_variance(&self) -> f64 {
        self.sigma_f2 * self.y_scale * self.y_scale
    }

    /// Posterior prediction at one point in physical units.
    pub fn predict_one(&self, x: &[f64]) -> Result<Prediction, EmulatorError> {
        if x.len() != self.dim() {
            return Err(EmulatorError::DimensionMismatch {
                got: x.len(),
                want: self.dim(),
            });
        }
        let z: Vec<f64> = self
            .inputs
            .iter()
            .zip(x)
            .map(|(d, &xi)| (xi - d.lower) / (d.upper - d.lower))
            .collect();
        let extrapolated = z.iter().any(|zi| !(-1e-9..=1.0 + 1e-9).contains(zi));

        let n = self.x.nrows();
        let rstar = DVector::from_fn(n, |i, _| {
            let mut q = 0.0;
            for (k, zk) in z.iter().enumerate() {
                let dd = (zk - self.x[(i, k)]) / self.lengthscales[k];
                q += dd * dd;
            }
            (-0.5 * q).exp()
        });
        let mut mean = self.beta[0] + rstar.dot(&self.alpha);
        for (k, zk) in z.iter().enumerate() {
            mean += self.beta[k + 1] * zk;
        }
        let w = self.chol.solve(&rstar);
        let var = self.sigma_f2 * (1.0 - rstar.dot(&w)).max(0.0);

        Ok(Prediction {
            mean: self.y_mean + self.y_scale * mean,
            variance: self.y_scale * self.y_scale * var,
            extrapolated,
        })
    }

    /// Posterior predictions at a batch of points in physical units.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<Prediction>, EmulatorError> {
        x.iter().map(|row| self.predict_one(row)).collect()
    }

    /// Serializes to the structured-text emulator file format.
    pub fn to_json(&self) -> String {
        let file = EmulatorFile {
            version: EMULATOR_FILE_VERSION,
            inputs: self.inputs.clone(),
            lengthscales: self.lengthscales.clone(),
            sigma_f2: self.sigma_f2,
            jitter: self.jitter,
            beta: self.beta.iter().copied().collect(),
            x: (0..self.x.nrows())
                .map(|i| self.x.row(i).iter().copied().collect())
                .collect(),
            y: self.y.iter().copied().collect(),
            y_mean: self.y_mean,
            y_scale: self.y_scale,
        };
        serde_json::to_string_pretty(&file).expect("emulator serialization cannot fail")
    }

    /// Loads an emulator file, rebuilding the factorized covariance.
    pub fn from_json(text: &str) -> Result<Emulator, EmulatorError> {
        let file: EmulatorFile = serde_json::from_str(text)?;
        if file.version != EMULATOR_FILE_VERSION {
            return Err(EmulatorError::FileVersion(file.version));
        }
        let n = file.x.len();
        let d = file.inputs.len();
        let mut xn = DMatrix::zeros(n, d);
        for (i, row) in file.x.iter().enumerate() {
            if row.len() != d {
                return Err(EmulatorError::DimensionMismatch {
                    got: row.len(),
                    want: d,
                });
            }
            for (k, v) in row.iter().enumerate() {
                xn[(i, k)] = *v;
            }
        }
        let y = DVector::from_vec(file.y);
        let beta = DVector::from_vec(file.beta);
        let dists = SquaredDists::new(&xn);
        let mut r = dists.correlation(&file.lengthscales);
        for i in 0..n {
            r[(i, i)] += file.jitter;
        }
        let chol = Cholesky::new(r.clone()).ok_or(EmulatorError::Factorization)?;
        let h = basis(&xn);
        let alpha = refined_solve(&chol, &r, &(&y - &h * &beta));
        Ok(Emulator {
            inputs: file.inputs,
            lengthscales: file.lengthscales,
            sigma_f2: file.sigma_f2,
            jitter: file.jitter,
            beta,
            x: xn,
            y,
            y_mean: file.y_mean,
            y_scale: file.y_scale,
            chol,
            alpha,
        })
    }
}

/// Coefficient of determination `1 − RSS/TSS`.
pub fn r2_score(pred_means: &[f64], y: &[f64]) -> Result<f64, EmulatorError> {
    if pred_means.len() != y.len() {
        return Err(EmulatorError::ShapeMismatch {
            rows: pred_means.len(),
            outputs: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(EmulatorError::TooFewPoints {
            got: y.len(),
            want: 2,
        });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(EmulatorError::UndefinedScore);
    }
    let rss: f64 = pred_means
        .iter()
        .zip(y)
        .map(|(p, v)| (p - v).powi(2))
        .sum();
    Ok(1.0 - rss / tss)
}

/// Independent standard error: the fraction of points whose prediction
/// error is within two posterior standard deviations.
pub fn ise_score(preds: &[Prediction], y: &[f64]) -> Result<f64, EmulatorError> {
    if preds.len() != y.len() {
        return Err(EmulatorError::ShapeMismatch {
            rows: preds.len(),
            outputs: y.len(),
        });
    }
    if preds.is_empty() {
        return Err(EmulatorError::TooFewPoints { got: 0, want: 1 });
    }
    let inside = preds
        .iter()
        .zip(y)
        .filter(|(p, v)| (p.mean - **v).abs() < 2.0 * p.sd())
        .count();
    Ok(inside as f64 / preds.len() as f64)
}

/// Cross-validation scores.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvScores {
    pub fold_r2: Vec<f64>,
    pub fold_ise: Vec<f64>,
    pub mean_r2: f64,
    pub mean_ise: f64,
}

/// K-fold cross-validation of the emulator on one output column.
///
/// Fold assignment shuffles indices with the config seed and deals them
/// round-robin, so scores are deterministic for a fixed seed.
pub fn cross_validate(
    space: &ParameterSpace,
    x: &[Vec<f64>],
    y: &[f64],
    k_folds: usize,
    config: &GpeConfig,
) -> Result<CvScores, EmulatorError> {
    let n = x.len();
    if n < k_folds || k_folds < 2 {
        return Err(EmulatorError::TooFewPoints {
            got: n,
            want: k_folds.max(2),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Fisher–Yates with explicit draws keeps the assignment stable.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let folds: Vec<Vec<usize>> = (0..k_folds)
        .map(|f| order.iter().copied().skip(f).step_by(k_folds).collect())
        .collect();
    for (f, fold) in folds.iter().enumerate() {
        if fold.len() < 2 {
            return Err(EmulatorError::FoldTooSmall {
                fold: f,
                size: fold.len(),
            });
        }
    }

    let mut fold_r2 = Vec::with_capacity(k_folds);
    let mut fold_ise = Vec::with_capacity(k_folds);
    for held_out in &folds {
        let mask: Vec<bool> = {
            let mut m = vec![true; n];
            for &i in held_out {
                m[i] = false;
            }
            m
        };
        let x_train: Vec<Vec<f64>> = (0..n).filter(|i| mask[*i]).map(|i| x[i].clone()).collect();
        let y_train: Vec<f64> = (0..n).filter(|i| mask[*i]).map(|i| y[i]).collect();
        let em = fit_gpe(space, &x_train, &y_train, config)?;
        let x_test: Vec<Vec<f64>> = held_out.iter().map(|&i| x[i].clone()).collect();
        let y_test: Vec<f64> = held_out.iter().map(|&i| y[i]).collect();
        let preds = em.predict(&x_test)?;
        let means: Vec<f64> = preds.iter().map(|p| p.mean).collect();
        fold_r2.push(r2_score(&means, &y_test)?);
        fold_ise.push(ise_score(&preds, &y_test)?);
    }
    let mean_r2 = fold_r2.iter().sum::<f64>() / k_folds as f64;
    let mean_ise = fold_ise.iter().sum::<f64>() / k_folds as f64;
    Ok(CvScores {
        fold_r2,
        fold_ise,
        mean_r2,
        mean_ise,
    })
}
