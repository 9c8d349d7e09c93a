//! Limited-memory BFGS with backtracking (Armijo) line search.

use std::collections::VecDeque;

/// A smooth objective over `R^dim`.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Objective value at `x`; writes the gradient into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// `f(x + step * dir) - f(x)`.
    ///
    /// Line searches compare this against tiny directional decreases, so
    /// implementors should override the default when the objective can be
    /// differenced more accurately than by subtracting two large values.
    fn delta(&self, x: &[f64], dir: &[f64], step: f64) -> f64 {
        let moved: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        let mut scratch = vec![0.0; x.len()];
        self.value_grad(&moved, &mut scratch) - self.value_grad(x, &mut scratch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-6,
            max_iter: 1000,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting at `x0`.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `-H g` for the implicit inverse Hessian `H`.
fn direction(history: &VecDeque<Pair>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; history.len()];
    for (i, p) in history.iter().enumerate().rev() {
        alpha[i] = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(qv, yv)| *qv -= alpha[i] * yv);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (i, p) in history.iter().enumerate() {
        let beta = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(qv, sv)| *qv += (alpha[i] - beta) * sv);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], settings: &LbfgsSettings) -> LbfgsResult {
    let n = obj.dim();
    assert_eq!(x0.len(), n, "initial point has wrong dimension");
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    let mut trace = vec![f];
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(settings.memory);
    let mut iterations = 0;

    while iterations < settings.max_iter && norm_inf(&g) > settings.grad_tol {
        let mut d = direction(&history, &g);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = if history.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..settings.max_backtracks {
            let change = obj.delta(&x, &d, step);
            if change.is_finite() && change <= settings.armijo * step * slope {
                accepted = true;
                break;
            }
            step *= settings.backtrack;
        }
        if !accepted {
            if history.is_empty() {
                // steepest descent failed too: numerically stuck
                break;
            }
            history.clear();
            continue;
        }

        let x_new: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
        let mut g_new = vec![0.0; n];
        let f_new = obj.value_grad(&x_new, &mut g_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        x = x_new;
        g = g_new;
        f = f_new;
        trace.push(f);
        iterations += 1;
    }

    let grad_norm_inf = norm_inf(&g);
    LbfgsResult {
        x,
        value: f,
        grad_norm_inf,
        iterations,
        converged: grad_norm_inf <= settings.grad_tol,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        }
    }

    struct Quadratic(Vec<f64>);

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let mut f = 0.0;
            for (i, (&xi, &ci)) in x.iter().zip(&self.0).enumerate() {
                let s = (i + 1) as f64;
                g[i] = s * (xi - ci);
                f += 0.5 * s * (xi - ci).powi(2);
            }
            f
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let r = minimize(&Rosenbrock, &[-1.2, 1.0], &LbfgsSettings { max_iter: 500, ..Default::default() });
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn solves_ill_conditioned_quadratic() {
        let c: Vec<f64> = (0..20).map(|i| i as f64 - 7.0).collect();
        let r = minimize(&Quadratic(c.clone()), &vec![0.0; 20], &LbfgsSettings::default());
        assert!(r.converged);
        for (a, b) in r.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn already_optimal_start_takes_no_steps() {
        let r = minimize(&Quadratic(vec![1.0, 2.0]), &[1.0, 2.0], &LbfgsSettings::default());
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }
}
