//! Multinomial naive Bayes with additive smoothing.

use serde::{Deserialize, Serialize};

use crate::matrix::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbParams {
    pub alpha: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { alpha: 1.0 }
    }
}

/// Index 0 is the negative class, 1 the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub class_log_prior: [f64; 2],
    pub feature_log_prob: [Vec<f64>; 2],
}

impl NaiveBayes {
    pub fn fit(x: &SparseMatrix, y: &[bool], params: &NbParams) -> Result<Self> {
        let alpha = params.alpha;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("{alpha} (must be > 0)")));
        }
        if x.rows().iter().flatten().any(|&(_, v)| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(
                "features",
                "multinomial naive Bayes needs finite nonnegative values",
            ));
        }
        let d = x.n_cols();
        let mut class_count = [0usize; 2];
        let mut feature_count = [vec![0.0; d], vec![0.0; d]];
        for (row, &label) in x.rows().iter().zip(y) {
            let c = label as usize;
            class_count[c] += 1;
            for &(j, v) in row {
                feature_count[c][j as usize] += v;
            }
        }
        if class_count[0] == 0 || class_count[1] == 0 {
            return Err(Error::SingleClass);
        }
        let n = y.len() as f64;
        let class_log_prior = class_count.map(|c| (c as f64 / n).ln());
        let feature_log_prob = feature_count.map(|counts| {
            let denom = (counts.iter().sum::<f64>() + alpha * d as f64).ln();
            counts.iter().map(|&c| (c + alpha).ln() - denom).collect()
        });
        Ok(NaiveBayes {
            class_log_prior,
            feature_log_prob,
        })
    }

    /// `[P(negative | x), P(positive | x)]`.
    pub fn posterior(&self, row: &[(u32, f64)]) -> [f64; 2] {
        let joint: [f64; 2] = std::array::from_fn(|c| {
            self.class_log_prior[c]
                + row
                    .iter()
                    .map(|&(j, v)| v * self.feature_log_prob[c][j as usize])
                    .sum::<f64>()
        });
        let m = joint[0].max(joint[1]);
        let lse = m + ((joint[0] - m).exp() + (joint[1] - m).exp()).ln();
        [(joint[0] - lse).exp(), (joint[1] - lse).exp()]
    }

    /// `|log P(x_j | positive) - log P(x_j | negative)|` per feature.
    pub fn importances(&self) -> Vec<f64> {
        self.feature_log_prob[1]
            .iter()
            .zip(&self.feature_log_prob[0])
            .map(|(p, n)| (p - n).abs())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjoint() -> (SparseMatrix, Vec<bool>) {
        let x = SparseMatrix::from_dense(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        (x, vec![true, true, false, false])
    }

    #[test]
    fn disjoint_vocab_closed_form() {
        // positive class: theta(a) = theta(b) = (1+1)/(2+4) = 1/3, theta(c) = theta(d) = 1/6
        let (x, y) = disjoint();
        let nb = NaiveBayes::fit(&x, &y, &NbParams::default()).unwrap();
        for (i, &label) in y.iter().enumerate() {
            let p = nb.posterior(x.row(i));
            let own = p[label as usize];
            assert!((own - 2.0 / 3.0).abs() < 1e-12, "{p:?}");
            assert!(own > 0.5);
        }
        assert!((nb.feature_log_prob[1][0] - (1.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn identical_features_give_prior() {
        // uniform counts give equal smoothed likelihoods in both classes
        let x = SparseMatrix::from_dense(&vec![vec![1.0, 1.0]; 4]).unwrap();
        let y = [true, false, false, false];
        let nb = NaiveBayes::fit(&x, &y, &NbParams::default()).unwrap();
        let p = nb.posterior(x.row(0));
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let (x, y) = disjoint();
        assert!(NaiveBayes::fit(&x, &y, &NbParams { alpha: 0.0 }).is_err());
        assert!(matches!(
            NaiveBayes::fit(&x, &[true; 4], &NbParams::default()),
            Err(Error::SingleClass)
        ));
        let neg = SparseMatrix::from_dense(&[vec![-1.0], vec![1.0]]).unwrap();
        assert!(NaiveBayes::fit(&neg, &[true, false], &NbParams::default()).is_err());
    }
}
