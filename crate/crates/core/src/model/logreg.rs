//! ℓ2-regularised logistic regression.
//!
//! Minimises `J(w, b) = ½‖w‖² + C · Σᵢ log(1 + exp(−ỹᵢ (w·xᵢ + b)))` with
//! `ỹ ∈ {−1, +1}` and an unpenalised intercept, by L-BFGS from `w = 0, b = 0`.

use super::lbfgs::{self, LbfgsSettings, Objective};
use super::{check_dim, ModelError};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegHyper {
    pub c: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub fit_intercept: bool,
}

impl LogRegHyper {
    pub const DEFAULT_GRAD_TOL: f64 = 1e-6;
    pub const DEFAULT_MAX_ITER: usize = 1000;

    pub fn with_c(c: f64) -> Self {
        Self {
            c,
            grad_tol: Self::DEFAULT_GRAD_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
            fit_intercept: true,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ModelError::InvalidHyper(format!("C must be positive, got {}", self.c)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(ModelError::InvalidHyper("grad_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(ModelError::InvalidHyper("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub converged: bool,
    pub final_grad_norm: f64,
    pub iterations: usize,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }
}

/// `log(1 + exp(-m))` without overflow.
pub(crate) fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + exp(-z))`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The training objective over packed parameters `[w..., b]`.
pub struct LogisticObjective<'a> {
    x: ArrayView2<'a, f64>,
    y_signed: Vec<f64>,
    c: f64,
    fit_intercept: bool,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &[u8], c: f64, fit_intercept: bool) -> Self {
        let y_signed = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        Self {
            x,
            y_signed,
            c,
            fit_intercept,
        }
    }

    fn split<'p>(&self, theta: &'p [f64]) -> (&'p [f64], f64) {
        let d = self.x.ncols();
        (&theta[..d], if self.fit_intercept { theta[d] } else { 0.0 })
    }

    fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        self.x.row(i).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; theta.len()];
        self.value_grad(theta, &mut g)
    }
}

impl Objective for LogisticObjective<'_> {
    fn dim(&self) -> usize {
        self.x.ncols() + usize::from(self.fit_intercept)
    }

    fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.x.ncols();
        let (w, b) = self.split(theta);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let mut gb = 0.0;
        for (i, &yt) in self.y_signed.iter().enumerate() {
            let m = yt * (self.row_dot(i, w) + b);
            loss += softplus_neg(m);
            // d loss / d z = -ỹ σ(-m)
            let coef = -yt * sigmoid(-m);
            for (g, v) in grad[..d].iter_mut().zip(self.x.row(i)) {
                *g += coef * v;
            }
            gb += coef;
        }
        let mut ww = 0.0;
        for (g, &wj) in grad[..d].iter_mut().zip(w) {
            *g = wj + self.c * *g;
            ww += wj * wj;
        }
        if self.fit_intercept {
            grad[d] = self.c * gb;
        }
        0.5 * ww + self.c * loss
    }

    fn delta(&self, theta: &[f64], dir: &[f64], step: f64) -> f64 {
        let (w, b) = self.split(theta);
        let (dw, db) = self.split(dir);
        let reg = step * w.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>()
            + 0.5 * step * step * dw.iter().map(|v| v * v).sum::<f64>();
        let mut change = 0.0;
        for (i, &yt) in self.y_signed.iter().enumerate() {
            let m = yt * (self.row_dot(i, w) + b);
            let dm = step * yt * (self.row_dot(i, dw) + db);
            change += if dm.abs() < 1.0 {
                // ℓ(m + δ) − ℓ(m) = log1p(σ(−m) · expm1(−δ)), accurate for small δ
                (sigmoid(-m) * (-dm).exp_m1()).ln_1p()
            } else {
                softplus_neg(m + dm) - softplus_neg(m)
            };
        }
        reg + self.c * change
    }
}

fn check_training_set(x: ArrayView2<f64>, y: &[u8]) -> Result<(), ModelError> {
    if x.nrows() == 0 {
        return Err(ModelError::Empty);
    }
    if x.nrows() != y.len() {
        return Err(ModelError::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    Ok(())
}

pub fn train_logreg(x: ArrayView2<f64>, y: &[u8], h: &LogRegHyper) -> Result<LinearModel, ModelError> {
    let dim = x.ncols() + usize::from(h.fit_intercept);
    train_logreg_from(x, y, h, &vec![0.0; dim])
}

/// Same as [`train_logreg`] but starting the optimiser at `init = [w..., b]`.
pub fn train_logreg_from(
    x: ArrayView2<f64>,
    y: &[u8],
    h: &LogRegHyper,
    init: &[f64],
) -> Result<LinearModel, ModelError> {
    h.validate()?;
    check_training_set(x, y)?;
    if y.iter().all(|&l| l == y[0]) {
        return Err(ModelError::SingleClass);
    }
    let obj = LogisticObjective::new(x, y, h.c, h.fit_intercept);
    check_dim(obj.dim(), init.len())?;
    let settings = LbfgsSettings {
        grad_tol: h.grad_tol,
        max_iter: h.max_iter,
        ..LbfgsSettings::default()
    };
    let res = lbfgs::minimize(&obj, init, &settings);
    if !res.converged {
        log::warn!(
            "logistic regression (C = {}) stopped after {} iterations with |grad| = {:.3e}",
            h.c,
            res.iterations,
            res.grad_norm_inf
        );
    }
    let d = x.ncols();
    Ok(LinearModel {
        w: res.x[..d].to_vec(),
        b: if h.fit_intercept { res.x[d] } else { 0.0 },
        converged: res.converged,
        final_grad_norm: res.grad_norm_inf,
        iterations: res.iterations,
    })
}

pub fn predict_proba_linear(m: &LinearModel, x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
    check_dim(m.w.len(), x.ncols())?;
    Ok(x
        .rows()
        .into_iter()
        .map(|row| sigmoid(row.iter().zip(&m.w).map(|(v, w)| v * w).sum::<f64>() + m.b))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn no_intercept(c: f64) -> LogRegHyper {
        LogRegHyper {
            fit_intercept: false,
            ..LogRegHyper::with_c(c)
        }
    }

    #[test]
    fn scalar_stationarity() {
        // stationarity: w = 2 C σ(−w)
        let oracle = bisect(|w| w - 2.0 * sigmoid(-w), 0.0, 2.0, 1e-9);
        let x = array![[1.0], [-1.0]];
        let m = train_logreg(x.view(), &[1, 0], &no_intercept(1.0)).unwrap();
        assert!((m.w[0] - oracle).abs() < 1e-6, "{} vs {oracle}", m.w[0]);
        assert!(m.converged);
    }

    #[test]
    fn strong_regularisation_shrinks_to_zero() {
        let x = array![[1.0], [-1.0]];
        let m = train_logreg(x.view(), &[1, 0], &no_intercept(1e-6)).unwrap();
        assert!(m.w[0].abs() < 1e-4);
    }

    #[test]
    fn deterministic() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 31 + j * 17) % 13) as f64 / 6.0 - 1.0);
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let h = LogRegHyper::with_c(3.0);
        let a = train_logreg(x.view(), &y, &h).unwrap();
        let b = train_logreg(x.view(), &y, &h).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_examples() {
        let zero = LinearModel { w: vec![0.0, 0.0], b: 0.0, converged: true, final_grad_norm: 0.0, iterations: 0 };
        let x = array![[1.0, 2.0], [-3.0, 0.5]];
        assert_eq!(predict_proba_linear(&zero, x.view()).unwrap(), vec![0.5, 0.5]);
        let sat = LinearModel { b: 50.0, ..zero.clone() };
        assert!(predict_proba_linear(&sat, x.view()).unwrap().iter().all(|&p| p >= 1.0 - 1e-20));
        let one = LinearModel { w: vec![1.0], ..zero.clone() };
        assert_eq!(predict_proba_linear(&one, array![[0.0]].view()).unwrap(), vec![0.5]);
        assert!(matches!(
            predict_proba_linear(&zero, array![[1.0]].view()),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn accurate_delta_matches_direct_difference() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 2 == 0)).collect();
        let obj = LogisticObjective::new(x.view(), &y, 2.0, true);
        let theta = [0.3, -0.2, 0.1];
        let dir = [1.0, 0.5, -0.25];
        for step in [1e-3, 0.1, 1.0, 5.0] {
            let moved: Vec<f64> = theta.iter().zip(dir).map(|(a, d)| a + step * d).collect();
            let direct = obj.value(&moved) - obj.value(&theta);
            let d = obj.delta(&theta, &dir, step);
            assert!((d - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{d} {direct}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(train_logreg(x.view(), &[1, 1], &LogRegHyper::with_c(1.0)), Err(ModelError::SingleClass)));
        assert!(train_logreg(x.view(), &[1, 0], &LogRegHyper::with_c(0.0)).is_err());
        assert!(train_logreg(x.view(), &[1], &LogRegHyper::with_c(1.0)).is_err());
    }
}
