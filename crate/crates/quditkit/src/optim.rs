//! Quasi-Newton minimization shared by the gate decomposer and the pulse
//! optimizer.
//!
//! L-BFGS with a strong-Wolfe line search. Objectives supply the value and
//! analytic gradient in one call; everything is deterministic for fixed
//! inputs.

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient norm fell below the tolerance.
    GradientConverged,
    /// Objective improvement stalled.
    Stalled,
    /// Objective fell below the caller's target value.
    TargetReached,
    /// Iteration budget exhausted.
    MaxIterations,
    /// Line search could not make progress.
    LineSearchFailed,
}

/// Result of an L-BFGS run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

/// Options controlling the minimization.
#[derive(Debug, Clone)]
pub struct Options {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    /// Stop once the objective drops below this value (useful when the
    /// objective is a non-negative infidelity with a known floor).
    pub target_value: f64,
    /// History length for the inverse-Hessian approximation.
    pub memory: usize,
    /// Relative objective stall threshold.
    pub stall_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iterations: 5000,
            gradient_tol: 1e-12,
            target_value: f64::NEG_INFINITY,
            memory: 12,
            stall_tol: 1e-16,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f` starting from `x0`. `f` writes the gradient into its second
/// argument and returns the objective value.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &Options) -> MinimizeResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);
    let mut evaluations = 1usize;

    if n == 0 {
        return MinimizeResult {
            x,
            value,
            gradient_norm: 0.0,
            iterations: 0,
            evaluations,
            stop: StopReason::GradientConverged,
        };
    }

    let m = opts.memory;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0usize;
    let mut stall_count = 0usize;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        if value < opts.target_value {
            stop = StopReason::TargetReached;
            break;
        }
        let gnorm = norm(&grad);
        if gnorm < opts.gradient_tol {
            stop = StopReason::GradientConverged;
            break;
        }

        // Two-loop recursion for the search direction.
        let mut q = grad.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &q);
            alphas[i] = a;
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= a * yj;
            }
        }
        if k > 0 {
            let ys = dot(&y_hist[k - 1], &s_hist[k - 1]);
            let yy = dot(&y_hist[k - 1], &y_hist[k - 1]);
            if yy > 0.0 && ys > 0.0 {
                let gamma = ys / yy;
                for qj in q.iter_mut() {
                    *qj *= gamma;
                }
            }
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alphas[i] - beta) * sj;
            }
        }
        let mut direction: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dg = dot(&direction, &grad);
        if dg >= 0.0 {
            // Not a descent direction; reset to steepest descent.
            direction = grad.iter().map(|g| -g).collect();
            dg = -dot(&grad, &grad);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        let step0 = if k == 0 {
            (1.0 / norm(&direction)).min(1.0)
        } else {
            1.0
        };
        match wolfe_search(&mut f, &x, value, &direction, dg, step0, &mut evaluations) {
            Some((new_value, new_x, new_grad)) => {
                let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let ys = dot(&y, &s);
                if ys > 1e-14 * norm(&y) * norm(&s) {
                    if s_hist.len() == m {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                    rho_hist.push(1.0 / ys);
                    s_hist.push(s);
                    y_hist.push(y);
                }
                let improvement = value - new_value;
                x = new_x;
                grad = new_grad;
                value = new_value;
                if improvement <= opts.stall_tol * (value.abs() + 1e-30) {
                    stall_count += 1;
                    if stall_count >= 3 {
                        stop = StopReason::Stalled;
                        break;
                    }
                } else {
                    stall_count = 0;
                }
            }
            None => {
                stop = StopReason::LineSearchFailed;
                break;
            }
        }
    }

    MinimizeResult {
        gradient_norm: norm(&grad),
        x,
        value,
        iterations,
        evaluations,
        stop,
    }
}

/// Strong-Wolfe line search (c1 = 1e-4, c2 = 0.9) with bracketing and
/// interpolation in the zoom phase.
fn wolfe_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    direction: &[f64],
    dg0: f64,
    step0: f64,
    evaluations: &mut usize,
) -> Option<(f64, Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    const MAX_EVALS: usize = 30;

    let n = x.len();
    let mut eval_at = |t: f64, evals: &mut usize| -> (f64, Vec<f64>, Vec<f64>) {
        let xt: Vec<f64> = x.iter().zip(direction).map(|(xi, di)| xi + t * di).collect();
        let mut gt = vec![0.0; n];
        let ft = f(&xt, &mut gt);
        *evals += 1;
        (ft, xt, gt)
    };

    let mut t_prev = 0.0f64;
    let mut f_prev = f0;
    let mut dg_prev = dg0;
    let mut t = step0;
    let mut lo: Option<(f64, f64, f64)> = None; // (t, f, dg)
    let mut hi: Option<(f64, f64, f64)> = None;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;

    // Bracketing phase.
    for _ in 0..MAX_EVALS {
        let (ft, xt, gt) = eval_at(t, evaluations);
        let dgt = dot(&gt, direction);
        if ft > f0 + C1 * t * dg0 || (t_prev > 0.0 && ft >= f_prev) {
            lo = Some((t_prev, f_prev, dg_prev));
            hi = Some((t, ft, dgt));
            break;
        }
        if dgt.abs() <= -C2 * dg0 {
            return Some((ft, xt, gt));
        }
        best = Some((ft, xt, gt));
        if dgt >= 0.0 {
            lo = Some((t, ft, dgt));
            hi = Some((t_prev, f_prev, dg_prev));
            break;
        }
        t_prev = t;
        f_prev = ft;
        dg_prev = dgt;
        t *= 2.0;
        if t > 1e10 {
            return best.filter(|(fb, _, _)| *fb < f0);
        }
    }

    let (mut tlo, mut flo, mut dglo) = lo?;
    let (mut thi, mut fhi, _) = hi?;

    // Zoom phase.
    for _ in 0..MAX_EVALS {
        if (thi - tlo).abs() < 1e-16 * tlo.abs().max(1.0) {
            break;
        }
        // Quadratic interpolation from (flo, dglo, fhi); bisection fallback.
        let dt = thi - tlo;
        let mut tj = tlo - 0.5 * dglo * dt * dt / (fhi - flo - dglo * dt);
        let (a, b) = if tlo < thi { (tlo, thi) } else { (thi, tlo) };
        if !tj.is_finite() || tj <= a + 0.1 * (b - a) || tj >= b - 0.1 * (b - a) {
            tj = 0.5 * (tlo + thi);
        }
        let (fj, xj, gj) = eval_at(tj, evaluations);
        let dgj = dot(&gj, direction);
        if fj > f0 + C1 * tj * dg0 || fj >= flo {
            thi = tj;
            fhi = fj;
        } else {
            if dgj.abs() <= -C2 * dg0 {
                return Some((fj, xj, gj));
            }
            if dgj * (thi - tlo) >= 0.0 {
                thi = tlo;
                fhi = flo;
            }
            tlo = tj;
            flo = fj;
            dglo = dgj;
            best = Some((fj, xj, gj));
        }
    }

    // Accept the best sufficient-decrease point even if curvature failed.
    best.filter(|(fb, _, _)| *fb < f0)
}

/// Golden-section minimization of a univariate function on [a, b].
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}
