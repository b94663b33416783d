//! Small gradient-boosted trees model for the log loss.
//!
//! Depth-limited regression trees are fitted to the loss gradient; leaf
//! values take a Newton step and are shrunk by the learning rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{best_threshold, node_columns, Node, SplitStat, Tree};
use crate::matrix::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbt {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Normalized total split gain per feature.
    pub importances: Vec<f64>,
}

#[derive(Clone, Copy, Default, Debug)]
struct GradStat {
    n: f64,
    g: f64,
    h: f64,
}

impl SplitStat for GradStat {
    fn add(&mut self, o: &Self) {
        self.n += o.n;
        self.g += o.g;
        self.h += o.h;
    }
    fn minus(&self, o: &Self) -> Self {
        GradStat {
            n: self.n - o.n,
            g: self.g - o.g,
            h: self.h - o.h,
        }
    }
    fn count(&self) -> f64 {
        self.n
    }
}

impl Gbt {
    pub fn fit(x: &SparseMatrix, y: &[bool], params: &GbtParams) -> Result<Self> {
        let n = x.n_rows();
        let pos = y.iter().filter(|&&v| v).count();
        if pos == 0 || pos == n {
            return Err(Error::SingleClass);
        }
        if !(params.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        let base = (pos as f64 / (n - pos) as f64).ln();
        let mut f = vec![base; n];
        let mut trees = Vec::with_capacity(params.n_rounds);
        let mut gain: BTreeMap<u32, f64> = BTreeMap::new();

        for _ in 0..params.n_rounds {
            // residual = -dL/dF, hessian = p(1-p)
            let stats: Vec<GradStat> = f
                .iter()
                .zip(y)
                .map(|(&fi, &yi)| {
                    let p = sigmoid(fi);
                    GradStat {
                        n: 1.0,
                        g: yi as u8 as f64 - p,
                        h: (p * (1.0 - p)).max(1e-12),
                    }
                })
                .collect();
            let tree = grow(x, &stats, params, &mut gain);
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += params.learning_rate * tree.eval(x.row(i));
            }
            trees.push(tree);
        }

        let mut importances = vec![0.0; x.n_cols()];
        for (j, v) in gain {
            importances[j as usize] = v;
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Gbt {
            base_score: base,
            learning_rate: params.learning_rate,
            trees,
            importances,
        })
    }

    pub fn score(&self, row: &[(u32, f64)]) -> f64 {
        let raw = self.base_score + self.learning_rate * self.trees.iter().map(|t| t.eval(row)).sum::<f64>();
        sigmoid(raw)
    }
}

fn grow(x: &SparseMatrix, stats: &[GradStat], params: &GbtParams, gain: &mut BTreeMap<u32, f64>) -> Tree {
    let score = |s: &GradStat| s.g * s.g / s.h;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let all: Vec<usize> = (0..x.n_rows()).collect();
    let mut stack = vec![(0usize, all, 0usize)];
    while let Some((slot, idx, depth)) = stack.pop() {
        let total = idx.iter().fold(GradStat::default(), |mut a, &i| {
            a.add(&stats[i]);
            a
        });
        nodes[slot] = Node::Leaf {
            value: total.g / total.h,
        };
        if depth >= params.max_depth || idx.len() < 2 * params.min_samples_leaf.max(1) {
            continue;
        }
        let mut best: Option<(u32, f64, f64)> = None;
        for (feature, entries) in node_columns(x, &idx) {
            let mut e: Vec<(f64, GradStat)> = entries.into_iter().map(|(v, p)| (v, stats[idx[p]])).collect();
            let cost = |l: &GradStat, r: &GradStat| -(score(l) + score(r));
            if let Some((thr, c)) = best_threshold(&mut e, total, params.min_samples_leaf.max(1) as f64, cost) {
                if best.is_none_or(|(_, _, bc)| c < bc) {
                    best = Some((feature, thr, c));
                }
            }
        }
        let Some((feature, threshold, c)) = best else { continue };
        let split_gain = -c - score(&total);
        if split_gain <= 1e-12 {
            continue;
        }
        *gain.entry(feature).or_default() += split_gain;
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, feature as usize) <= threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[slot] = Node::Split {
            feature,
            threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        stack.push((left + 1, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_threshold_rule() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, ((i * 7) % 5) as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 25).collect();
        let x = SparseMatrix::from_dense(&rows).unwrap();
        let m = Gbt::fit(&x, &y, &GbtParams::default()).unwrap();
        let correct = (0..40).filter(|&i| (m.score(x.row(i)) > 0.5) == y[i]).count();
        assert_eq!(correct, 40);
        assert!(m.importances[0] > m.importances[1]);
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
    }
}
