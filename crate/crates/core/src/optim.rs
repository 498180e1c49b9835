//! Limited-memory BFGS minimiser shared by the shell solver and the
//! emulator hyperparameter search.
//!
//! The objective callback fills the gradient and returns the function value;
//! it may return `f64::INFINITY` for inadmissible states (e.g. an inverted
//! element or an overflowing strain exponent), which the backtracking line
//! search treats as a rejection. Descent is enforced by an Armijo condition
//! slackened by an assumed relative evaluation noise, so accepted values are
//! non-increasing up to that noise.

/// Options controlling an L-BFGS run.
#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    /// Maximum number of outer iterations.
    pub max_iters: usize,
    /// Number of curvature pairs kept for the two-loop recursion.
    pub history: usize,
    /// Convergence threshold on the infinity norm of the gradient.
    pub grad_tol_inf: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Multiplicative backtracking factor in (0, 1).
    pub backtrack: f64,
    /// Maximum backtracking steps per line search.
    pub max_backtracks: usize,
    /// Relative floating-point noise assumed in objective values. The
    /// Armijo test is slackened by `noise_rel·|f|` so that steps whose
    /// true decrease is smaller than the evaluation noise are not
    /// spuriously rejected near convergence.
    pub noise_rel: f64,
    /// Additional convergence threshold on the preconditioned gradient
    /// `‖D·g‖∞`, active only when a compliance diagonal `D` is supplied.
    /// When coordinate stiffnesses span several decades a raw gradient
    /// norm is not commensurable across coordinates; `D·g` measures the
    /// stationarity residual in step units instead, so either test
    /// passing counts as convergence.
    pub scaled_grad_tol_inf: Option<f64>,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iters: 500,
            history: 10,
            grad_tol_inf: 1e-10,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 48,
            noise_rel: 1e-14,
            scaled_grad_tol_inf: None,
        }
    }
}

/// Outcome of a minimisation run.
#[derive(Clone, Debug)]
pub struct LbfgsResult {
    /// Iterate closest to satisfying the convergence tests.
    pub x: Vec<f64>,
    /// Objective value at that iterate.
    pub f: f64,
    /// Infinity norm of the gradient at that iterate.
    pub grad_norm_inf: f64,
    /// Outer iterations performed.
    pub iterations: usize,
    /// Objective evaluations performed.
    pub evaluations: usize,
    /// Whether a convergence test (raw or preconditioned gradient norm)
    /// was satisfied.
    pub converged: bool,
    /// Set when the initial point already has a non-finite objective.
    pub non_finite_start: bool,
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Minimises `f` starting from `x0`.
///
/// `f(x, grad)` must fill `grad` with the gradient at `x` and return the
/// objective value there.
pub fn minimize<F>(f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_preconditioned(f, x0, None, opts)
}

/// [`minimize`] with an optional fixed diagonal preconditioner.
///
/// `compliance[i]` estimates the inverse Hessian diagonal (so stiff
/// coordinates get small entries). It replaces the identity in the
/// two-loop recursion's initial matrix `H₀ = γ·D`, with `γ` from the
/// usual secant scaling generalised to `sᵀy / yᵀDy`.
pub fn minimize_preconditioned<F>(
    mut f: F,
    x0: &[f64],
    compliance: Option<&[f64]>,
    opts: &LbfgsOptions,
) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    if let Some(d) = compliance {
        assert_eq!(d.len(), n, "preconditioner length mismatch");
        debug_assert!(d.iter().all(|v| *v > 0.0 && v.is_finite()));
    }
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut evaluations = 1usize;
    let mut fx = f(&x, &mut grad);

    if !fx.is_finite() {
        return LbfgsResult {
            x,
            f: fx,
            grad_norm_inf: f64::INFINITY,
            iterations: 0,
            evaluations,
            converged: false,
            non_finite_start: true,
        };
    }

    // Curvature history, most recent last.
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    // Convergence score: the smallest ratio of a gradient norm to its
    // threshold, over the active tests. A score of at most 1 converges.
    let scaled_tol = match (opts.scaled_grad_tol_inf, compliance) {
        (Some(t), Some(_)) => Some(t),
        _ => None,
    };
    let score = |g: &[f64]| -> f64 {
        let raw = inf_norm(g) / opts.grad_tol_inf;
        match (scaled_tol, compliance) {
            (Some(t), Some(d)) => {
                let weighted = g
                    .iter()
                    .zip(d)
                    .map(|(gi, di)| (gi * di).abs())
                    .fold(0.0_f64, f64::max);
                raw.min(weighted / t)
            }
            _ => raw,
        }
    };

    let mut iterations = 0usize;
    let mut converged = score(&grad) <= 1.0;

    let mut x_new = vec![0.0; n];
    let mut grad_new = vec![0.0; n];

    // Best-scoring iterate seen, returned if the endgame wanders.
    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut best_gnorm = inf_norm(&grad);
    let mut best_score = score(&grad);

    // Applies H₀ = γ·D (with D the compliance diagonal, identity when
    // absent) to a vector in place.
    let apply_h0 = |v: &mut [f64], gamma: f64| {
        match compliance {
            Some(d) => {
                for (vi, di) in v.iter_mut().zip(d) {
                    *vi *= gamma * di;
                }
            }
            None => v.iter_mut().for_each(|vi| *vi *= gamma),
        }
    };
    let y_d_y = |y: &[f64]| -> f64 {
        match compliance {
            Some(d) => y.iter().zip(d).map(|(yi, di)| yi * yi * di).sum(),
            None => dot(y, y),
        }
    };
    let mut restarted = false;

    while !converged && iterations < opts.max_iters {
        iterations += 1;

        // Two-loop recursion for the search direction d = -H * grad.
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &d);
            alphas[i] = a;
            axpy(-a, &y_hist[i], &mut d);
        }
        let gamma = if k > 0 {
            let last = k - 1;
            let ydy = y_d_y(&y_hist[last]);
            if ydy > 0.0 {
                1.0 / (rho_hist[last] * ydy)
            } else {
                1.0
            }
        } else {
            1.0
        };
        apply_h0(&mut d, gamma);
        for i in 0..k {
            let b = rho_hist[i] * dot(&y_hist[i], &d);
            axpy(alphas[i] - b, &s_hist[i], &mut d);
        }

        let mut dir_deriv = dot(&grad, &d);
        if !dir_deriv.is_finite() || dir_deriv >= 0.0 {
            // Fall back to preconditioned steepest descent if the metric
            // degenerated.
            d = grad.iter().map(|g| -g).collect();
            apply_h0(&mut d, 1.0);
            dir_deriv = dot(&grad, &d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            if dir_deriv == 0.0 {
                // Zero gradient in the preconditioned metric: stationary.
                break;
            }
        }

        // Backtracking Armijo line search, slackened by the assumed
        // evaluation noise so progress is not blocked at the noise floor.
        let noise = opts.noise_rel * fx.abs();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            evaluations += 1;
            let f_new = f(&x_new, &mut grad_new);
            if f_new.is_finite() && f_new <= fx + opts.armijo_c1 * step * dir_deriv + noise {
                // Accept; update curvature history. Pairs from microscopic
                // noise-limited steps carry no curvature information (the
                // gradient difference is mostly evaluation noise), so only
                // well-conditioned pairs are kept: s·y must be an O(1)
                // fraction of |s||y|.
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| grad_new[i] - grad[i]).collect();
                let sy = dot(&s, &y);
                let ss = dot(&s, &s).sqrt();
                let yy = dot(&y, &y).sqrt();
                if sy > 1e-8 * ss * yy {
                    s_hist.push(s);
                    y_hist.push(y);
                    rho_hist.push(1.0 / sy);
                    if s_hist.len() > opts.history {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                }
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut grad, &mut grad_new);
                fx = f_new;
                accepted = true;
                restarted = false;
                break;
            }
            step *= opts.backtrack;
        }

        if !accepted {
            if !restarted && !s_hist.is_empty() {
                // Stale curvature can poison the direction; drop it and
                // retry once from a preconditioned steepest-descent step.
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                restarted = true;
                continue;
            }
            // No further progress possible along any remembered curvature.
            break;
        }
        let sc = score(&grad);
        if sc < best_score {
            best_score = sc;
            best_gnorm = inf_norm(&grad);
            best_f = fx;
            best_x.copy_from_slice(&x);
        }
        converged = sc <= 1.0;
    }

    LbfgsResult {
        grad_norm_inf: best_gnorm,
        x: best_x,
        f: best_f,
        iterations,
        evaluations,
        converged: best_score <= 1.0,
        non_finite_start: false,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
