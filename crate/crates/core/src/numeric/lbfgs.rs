//! A compact L-BFGS minimizer with backtracking Armijo line search and
//! central-difference gradients. Used as the inner loop of the
//! augmented-Lagrangian solvers; the objectives are smooth, low-dimensional
//! (tens of variables), and cheap, so numerical gradients are the pragmatic
//! choice.

const MEMORY: usize = 8;

pub struct LbfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub fd_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { max_iters: 300, grad_tol: 1e-9, fd_step: 1e-6 }
    }
}

fn numeric_grad(f: &impl Fn(&[f64]) -> f64, x: &mut Vec<f64>, h: f64) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let xi = x[i];
        x[i] = xi + h;
        let fp = f(x);
        x[i] = xi - h;
        let fm = f(x);
        x[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Minimizes `f` starting from `x0`; returns `(x, f(x))`.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &LbfgsOptions) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = numeric_grad(&f, &mut x, opts.fd_step);

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut stall = 0usize;

    for _ in 0..opts.max_iters {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < opts.grad_tol {
            break;
        }

        // Two-loop recursion for the search direction.
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &q);
            alpha[i] = a;
            axpy(&mut q, -a, &y_hist[i]);
        }
        let gamma = if m > 0 {
            let y = &y_hist[m - 1];
            dot(&s_hist[m - 1], y) / dot(y, y).max(1e-300)
        } else {
            1.0
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for i in 0..m {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            axpy(&mut q, alpha[i] - beta, &s_hist[i]);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dg = dot(&dir, &g);
        if dg >= 0.0 {
            // Not a descent direction (stale curvature); restart with steepest descent.
            dir = g.iter().map(|v| -v).collect();
            dg = -gnorm * gnorm;
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Armijo backtracking.
        let mut step = 1.0;
        let c1 = 1e-4;
        let mut x_new = x.clone();
        let mut f_new = fx;
        let mut accepted = false;
        for _ in 0..50 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new);
            if f_new <= fx + c1 * step * dg {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }

        let g_new = numeric_grad(&f, &mut x_new, opts.fd_step);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
        }
        if (fx - f_new).abs() < 1e-14 * (1.0 + fx.abs()) {
            stall += 1;
            if stall >= 3 {
                x = x_new;
                fx = f_new;
                break;
            }
            // Drop stale curvature and retry from steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        } else {
            stall = 0;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    (x, fx)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
        let (x, fx) = minimize(f, &[0.0, 0.0], &LbfgsOptions::default());
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[1], -1.0, epsilon = 1e-6);
        assert!(fx < 1e-10);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = LbfgsOptions { max_iters: 2000, ..Default::default() };
        let (x, fx) = minimize(f, &[-1.2, 1.0], &opts);
        assert!(fx < 1e-8, "fx = {fx}, x = {x:?}");
    }
}
