//! Binary decision trees over sparse rows, shared by the random forest and
//! gradient-boosted models. Missing entries are zeros.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matrix::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, row: &[(u32, f64)]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = match row.binary_search_by_key(feature, |&(c, _)| c) {
                        Ok(k) => row[k].1,
                        Err(_) => 0.0,
                    };
                    at = if v <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left as usize).max(go(t, *right as usize)),
            }
        }
        go(self, 0)
    }
}

/// Additive per-sample statistic accumulated while scanning split points.
pub(crate) trait SplitStat: Copy + Default {
    fn add(&mut self, other: &Self);
    fn minus(&self, other: &Self) -> Self;
    fn count(&self) -> f64;
}

/// Nonzero entries of every column touched by the rows `idx`, as
/// `(value, position in idx)`, keyed by column.
pub(crate) fn node_columns(x: &SparseMatrix, idx: &[usize]) -> BTreeMap<u32, Vec<(f64, usize)>> {
    let mut cols: BTreeMap<u32, Vec<(f64, usize)>> = BTreeMap::new();
    for (pos, &i) in idx.iter().enumerate() {
        for &(c, v) in x.row(i) {
            cols.entry(c).or_default().push((v, pos));
        }
    }
    cols
}

/// Best threshold for one column. `entries` are the column's nonzero
/// `(value, stat)` pairs; the remaining rows (`total` minus their sum) sit
/// at zero. `cost(left, right)` is minimized. Returns `None` when the column
/// is constant over the node or no split leaves `min_leaf` rows per side.
pub(crate) fn best_threshold<S: SplitStat>(
    entries: &mut Vec<(f64, S)>,
    total: S,
    min_leaf: f64,
    cost: impl Fn(&S, &S) -> f64,
) -> Option<(f64, f64)> {
    let mut nz = S::default();
    for (_, s) in entries.iter() {
        nz.add(s);
    }
    let zeros = total.minus(&nz);
    if zeros.count() > 0.0 {
        entries.push((0.0, zeros));
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<(f64, f64)> = None;
    let mut left = S::default();
    let mut k = 0;
    while k < entries.len() {
        let v = entries[k].0;
        while k < entries.len() && entries[k].0 == v {
            left.add(&entries[k].1);
            k += 1;
        }
        if k == entries.len() {
            break;
        }
        let right = total.minus(&left);
        if left.count() < min_leaf || right.count() < min_leaf {
            continue;
        }
        let c = cost(&left, &right);
        if best.is_none_or(|(_, bc)| c < bc) {
            let next = entries[k].0;
            let mut thr = v + (next - v) / 2.0;
            if thr >= next || !thr.is_finite() {
                thr = v;
            }
            best = Some((thr, c));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Copy, Default, Debug)]
    struct Cnt(f64, f64);

    impl SplitStat for Cnt {
        fn add(&mut self, o: &Self) {
            self.0 += o.0;
            self.1 += o.1;
        }
        fn minus(&self, o: &Self) -> Self {
            Cnt(self.0 - o.0, self.1 - o.1)
        }
        fn count(&self) -> f64 {
            self.0
        }
    }

    fn gini(c: &Cnt) -> f64 {
        let p = c.1 / c.0;
        1.0 - p * p - (1.0 - p) * (1.0 - p)
    }

    #[test]
    fn finds_separating_threshold_with_implicit_zeros() {
        // three zeros (negative), values 2 and 3 (positive)
        let mut e = vec![(2.0, Cnt(1.0, 1.0)), (3.0, Cnt(1.0, 1.0))];
        let total = Cnt(5.0, 2.0);
        let (thr, cost) = best_threshold(&mut e, total, 1.0, |l, r| (l.0 * gini(l) + r.0 * gini(r)) / 5.0).unwrap();
        assert_eq!(thr, 1.0);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn constant_column_has_no_split() {
        let mut e = vec![(1.0, Cnt(1.0, 1.0)), (1.0, Cnt(1.0, 0.0))];
        assert!(best_threshold(&mut e, Cnt(2.0, 1.0), 1.0, |_, _| 0.0).is_none());
    }

    #[test]
    fn eval_walks_splits() {
        let t = Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
            ],
        };
        assert_eq!(t.eval(&[(0, 9.0)]), 0.0);
        assert_eq!(t.eval(&[(1, 0.7)]), 1.0);
        assert_eq!(t.depth(), 1);
    }
}
