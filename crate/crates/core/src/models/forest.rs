//! Random forest of Gini-split classification trees.
//!
//! Each tree sees a bootstrap sample of the rows. At every node the
//! candidate features are the columns with a nonzero entry in the node,
//! visited in random order; at least `⌊√d⌋` non-constant candidates are
//! scored, and the search continues past that only until a valid split is
//! found. Columns that are zero throughout the node cannot split it and are
//! skipped without being counted.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{best_threshold, node_columns, Node, SplitStat, Tree};
use crate::matrix::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    /// Leaf values are the fraction of positive bootstrap rows in the leaf.
    pub trees: Vec<Tree>,
    /// Normalized total Gini decrease per feature.
    pub importances: Vec<f64>,
}

#[derive(Clone, Copy, Default, Debug)]
struct ClassCount {
    n: f64,
    pos: f64,
}

impl SplitStat for ClassCount {
    fn add(&mut self, o: &Self) {
        self.n += o.n;
        self.pos += o.pos;
    }
    fn minus(&self, o: &Self) -> Self {
        ClassCount {
            n: self.n - o.n,
            pos: self.pos - o.pos,
        }
    }
    fn count(&self) -> f64 {
        self.n
    }
}

fn gini(c: &ClassCount) -> f64 {
    if c.n == 0.0 {
        return 0.0;
    }
    let p = c.pos / c.n;
    2.0 * p * (1.0 - p)
}

impl RandomForest {
    pub fn fit(x: &SparseMatrix, y: &[bool], params: &ForestParams, seed: u64) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(Error::invalid("n_trees", "must be at least 1"));
        }
        if x.n_rows() == 0 {
            return Err(Error::Empty("training set".into()));
        }
        if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
            return Err(Error::SingleClass);
        }
        let d = x.n_cols();
        let max_features = ((d as f64).sqrt() as usize).max(1);

        let grown: Vec<(Tree, BTreeMap<u32, f64>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let n = x.n_rows();
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                grow(x, y, sample, params, max_features, &mut rng)
            })
            .collect();

        let mut importances = vec![0.0; d];
        let mut trees = Vec::with_capacity(grown.len());
        for (tree, imp) in grown {
            for (j, v) in imp {
                importances[j as usize] += v;
            }
            trees.push(tree);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        Ok(RandomForest { trees, importances })
    }

    /// Fraction of trees voting positive.
    pub fn score(&self, row: &[(u32, f64)]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.eval(row) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

fn grow(
    x: &SparseMatrix,
    y: &[bool],
    sample: Vec<usize>,
    params: &ForestParams,
    max_features: usize,
    rng: &mut ChaCha8Rng,
) -> (Tree, BTreeMap<u32, f64>) {
    let n_root = sample.len() as f64;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut importance: BTreeMap<u32, f64> = BTreeMap::new();
    // (node slot, rows, depth)
    let mut stack = vec![(0usize, sample, 0usize)];

    while let Some((slot, idx, depth)) = stack.pop() {
        let stats = idx.iter().fold(ClassCount::default(), |mut c, &i| {
            c.n += 1.0;
            c.pos += y[i] as u8 as f64;
            c
        });
        let leaf = Node::Leaf {
            value: stats.pos / stats.n,
        };
        let impurity = gini(&stats);
        let stop = impurity == 0.0
            || idx.len() < params.min_samples_split.max(2)
            || params.max_depth.is_some_and(|m| depth >= m);
        if stop {
            nodes[slot] = leaf;
            continue;
        }

        let mut columns: Vec<(u32, Vec<(f64, usize)>)> = node_columns(x, &idx).into_iter().collect();
        columns.shuffle(rng);
        let mut best: Option<(u32, f64, f64)> = None;
        let mut visited = 0;
        for (feature, entries) in columns {
            if visited >= max_features && best.is_some() {
                break;
            }
            let mut e: Vec<(f64, ClassCount)> = entries
                .into_iter()
                .map(|(v, pos)| {
                    (
                        v,
                        ClassCount {
                            n: 1.0,
                            pos: y[idx[pos]] as u8 as f64,
                        },
                    )
                })
                .collect();
            let cost = |l: &ClassCount, r: &ClassCount| (l.n * gini(l) + r.n * gini(r)) / stats.n;
            if let Some((thr, c)) = best_threshold(&mut e, stats, 1.0, cost) {
                visited += 1;
                if best.is_none_or(|(_, _, bc)| c < bc) {
                    best = Some((feature, thr, c));
                }
            }
        }

        let Some((feature, threshold, child_impurity)) = best else {
            nodes[slot] = leaf;
            continue;
        };
        *importance.entry(feature).or_default() += stats.n / n_root * (impurity - child_impurity);

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| x.get(i, feature as usize) <= threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[slot] = Node::Split {
            feature,
            threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        stack.push((left + 1, right_idx, depth + 1));
        stack.push((left, left_idx, depth + 1));
    }
    (Tree { nodes }, importance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(n: usize, d: usize, seed: u64) -> (SparseMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let y = (0..n).map(|_| rng.random::<bool>()).collect();
        (SparseMatrix::from_dense(&rows).unwrap(), y)
    }

    #[test]
    fn perfect_feature_dominates() {
        let (x, y) = noisy(200, 6, 1);
        let mut dense = x.to_dense();
        for (r, &label) in dense.iter_mut().zip(&y) {
            // coin-flip noise columns, column 3 equals the label
            r.iter_mut().for_each(|v| *v = (*v > 0.5) as u8 as f64);
            r[3] = label as u8 as f64;
        }
        let x = SparseMatrix::from_dense(&dense).unwrap();
        let rf = RandomForest::fit(
            &x,
            &y,
            &ForestParams {
                n_trees: 50,
                ..Default::default()
            },
            7,
        )
        .unwrap();
        assert!(rf.importances[3] > 0.9, "{:?}", rf.importances);
        assert!((rf.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (row, &label) in x.rows().iter().zip(&y) {
            assert_eq!(rf.score(row) > 0.5, label);
        }
    }

    #[test]
    fn seeded_single_tree_is_reproducible() {
        let (x, y) = noisy(80, 5, 3);
        let p = ForestParams {
            n_trees: 1,
            ..Default::default()
        };
        let a = RandomForest::fit(&x, &y, &p, 42).unwrap();
        let b = RandomForest::fit(&x, &y, &p, 42).unwrap();
        assert_eq!(a, b);
        let c = RandomForest::fit(&x, &y, &p, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_importances_roughly_uniform() {
        let d = 10;
        let (x, y) = noisy(300, d, 11);
        let rf = RandomForest::fit(
            &x,
            &y,
            &ForestParams {
                n_trees: 200,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        let uniform = 1.0 / d as f64;
        for &v in &rf.importances {
            assert!(v < 3.0 * uniform, "{:?}", rf.importances);
        }
    }

    #[test]
    fn constant_feature_never_splits() {
        let (x, y) = noisy(100, 4, 9);
        let mut dense = x.to_dense();
        dense.iter_mut().for_each(|r| r[2] = 0.5);
        let x = SparseMatrix::from_dense(&dense).unwrap();
        let rf = RandomForest::fit(
            &x,
            &y,
            &ForestParams {
                n_trees: 20,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        assert_eq!(rf.importances[2], 0.0);
    }

    #[test]
    fn max_depth_is_respected() {
        let (x, y) = noisy(100, 4, 2);
        let p = ForestParams {
            n_trees: 5,
            max_depth: Some(2),
            ..Default::default()
        };
        let rf = RandomForest::fit(&x, &y, &p, 1).unwrap();
        assert!(rf.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn unanimous_trees_give_extreme_scores() {
        let x = SparseMatrix::from_dense(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0]]).unwrap();
        let y = [false, false, true, true];
        let rf = RandomForest::fit(
            &x,
            &y,
            &ForestParams {
                n_trees: 1,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        for i in 0..4 {
            let s = rf.score(x.row(i));
            assert!(s == 0.0 || s == 1.0);
        }
    }

    #[test]
    fn degenerate_input() {
        let (x, _) = noisy(10, 2, 1);
        assert!(matches!(
            RandomForest::fit(&x, &[true; 10], &ForestParams::default(), 0),
            Err(Error::SingleClass)
        ));
        let p = ForestParams {
            n_trees: 0,
            ..Default::default()
        };
        assert!(RandomForest::fit(&x, &[true, false].repeat(5), &p, 0).is_err());
    }
}
