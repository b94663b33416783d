//! Binary logistic regression fitted by batch gradient descent.
//!
//! The objective is the mean log loss plus an L2 penalty on the weights
//! (not the intercept):
//!
//! ```text
//! J(w, b) = (1/n) Σ [softplus(z_i) - y_i z_i] + (l2 / 2n) ||w||²,   z_i = w·x_i + b
//! ```
//!
//! Scaling the penalty by `1/n` makes `l2` play the role of an inverse
//! regularization strength `1/C` applied to the summed loss.

use serde::{Deserialize, Serialize};

use crate::matrix::{dot, SparseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub lr: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2: 1.0,
            lr: 0.1,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Objective value and gradient `(loss, d/dw, d/db)`.
pub fn objective(x: &SparseMatrix, y: &[bool], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &label) in x.rows().iter().zip(y) {
        let z = dot(row, w) + b;
        let t = if label { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        gb += r;
        for &(j, v) in row {
            gw[j as usize] += r * v;
        }
    }
    let sq: f64 = w.iter().map(|v| v * v).sum();
    loss = loss / n + l2 / (2.0 * n) * sq;
    for (g, &wj) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 / n * wj;
    }
    (loss, gw, gb / n)
}

impl Logistic {
    pub fn fit(x: &SparseMatrix, y: &[bool], params: &LogisticParams) -> Result<Self> {
        let LogisticParams { l2, lr, max_iter, tol } = *params;
        if !(l2 >= 0.0) {
            return Err(Error::invalid("l2", format!("{l2} (must be >= 0)")));
        }
        if !(lr > 0.0) {
            return Err(Error::invalid("lr", format!("{lr} (must be > 0)")));
        }
        if !x.all_finite() {
            return Err(Error::invalid("features", "non-finite feature value"));
        }
        if x.n_rows() == 0 {
            return Err(Error::Empty("training set".into()));
        }
        let mut w = vec![0.0; x.n_cols()];
        let mut b = 0.0;
        let (mut loss, mut gw, mut gb) = objective(x, y, &w, b, l2);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iter {
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= lr * g;
            }
            b -= lr * gb;
            iterations += 1;
            let (next, ngw, ngb) = objective(x, y, &w, b, l2);
            let decrease = loss - next;
            loss = next;
            gw = ngw;
            gb = ngb;
            if decrease.abs() < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::debug!("logistic regression stopped at max_iter = {max_iter} (loss {loss})");
        }
        Ok(Logistic {
            weights: w,
            intercept: b,
            converged,
            iterations,
            final_loss: loss,
        })
    }

    pub fn score(&self, row: &[(u32, f64)]) -> f64 {
        sigmoid(dot(row, &self.weights) + self.intercept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_toy_set() {
        let x = SparseMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        // positive iff first coordinate is 1
        let y = [false, false, true, true];
        let m = Logistic::fit(&x, &y, &LogisticParams::default()).unwrap();
        for (i, &t) in y.iter().enumerate() {
            assert_eq!(m.score(x.row(i)) > 0.5, t);
        }
    }

    #[test]
    fn zero_features_give_base_rate_intercept() {
        let x = SparseMatrix::from_rows(3, vec![vec![]; 10]).unwrap();
        let y: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let p = LogisticParams {
            tol: 1e-14,
            max_iter: 20_000,
            ..Default::default()
        };
        let m = Logistic::fit(&x, &y, &p).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        let expect = (0.3f64 / 0.7).ln();
        assert!((m.intercept - expect).abs() < 1e-5, "{} vs {expect}", m.intercept);
        assert!(m.converged);
    }

    #[test]
    fn weights_shrink_with_l2() {
        let x = SparseMatrix::from_dense(&[
            vec![1.0, 0.2],
            vec![0.8, 0.0],
            vec![0.1, 1.0],
            vec![0.0, 0.7],
            vec![0.9, 0.9],
        ])
        .unwrap();
        let y = [true, true, false, false, true];
        let mut prev = f64::INFINITY;
        for l2 in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            // keep lr * l2 / n well below 2 so descent stays stable
            let p = LogisticParams {
                l2,
                lr: 0.1f64.min(1.0 / (1.0 + l2 / 5.0)),
                max_iter: 5000,
                tol: 1e-12,
            };
            let m = Logistic::fit(&x, &y, &p).unwrap();
            let norm = m.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            assert!(norm < prev, "l2={l2}: {norm} !< {prev}");
            prev = norm;
        }
    }

    #[test]
    fn rejects_non_finite() {
        let x = SparseMatrix::from_dense(&[vec![f64::NAN], vec![1.0]]).unwrap();
        assert!(Logistic::fit(&x, &[true, false], &LogisticParams::default()).is_err());
        let ok = SparseMatrix::from_dense(&[vec![1.0], vec![0.0]]).unwrap();
        let bad = LogisticParams {
            lr: 0.0,
            ..Default::default()
        };
        assert!(Logistic::fit(&ok, &[true, false], &bad).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }
}
