use serde::{Deserialize, Serialize};

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> TreeParams {
        TreeParams { max_depth: 8, min_leaf: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Fraction of positive training rows.
        p: f64,
        rows: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classifier over Gini impurity. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    pub nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

// Improvements smaller than this count as ties.
const TIE: f64 = 1e-12;

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl TreeModel {
    /// Grows a tree on the columns `cols` of `ds`.
    pub fn train(ds: &Dataset, cols: &[usize], params: TreeParams) -> TreeModel {
        let mut cols = cols.to_vec();
        cols.sort_unstable();
        let mut tree = TreeModel { params, nodes: Vec::new() };
        let idx: Vec<usize> = (0..ds.len()).collect();
        tree.grow(ds, &cols, idx, 0);
        tree
    }

    fn grow(&mut self, ds: &Dataset, cols: &[usize], idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| ds.labels[i]).count();
        self.nodes.push(Node::Leaf {
            p: if n == 0 { 0.5 } else { pos as f64 / n as f64 },
            rows: n,
        });
        let min_leaf = self.params.min_leaf.max(1);
        if depth >= self.params.max_depth || n < 2 * min_leaf || pos == 0 || pos == n {
            return id;
        }
        let parent = gini(pos, n);
        let mut best: Option<Best> = None;
        let mut order = idx.clone();
        for &f in cols {
            order.sort_by(|&a, &b| ds.rows[a][f].total_cmp(&ds.rows[b][f]));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += ds.labels[order[k - 1]] as usize;
                let (lo, hi) = (ds.rows[order[k - 1]][f], ds.rows[order[k]][f]);
                if lo == hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let score = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(pos - left_pos, n - k)) / n as f64;
                if best.as_ref().is_none_or(|b| score < b.score - TIE) {
                    best = Some(Best { score, feature: f, threshold: lo + (hi - lo) / 2.0 });
                }
            }
        }
        let Some(best) = best.filter(|b| b.score < parent - TIE) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| ds.rows[i][best.feature] <= best.threshold);
        let left = self.grow(ds, cols, l, depth + 1);
        let right = self.grow(ds, cols, r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { p, .. } => return p,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) >= 0.5
    }

    pub fn accuracy(&self, ds: &Dataset) -> f64 {
        let correct = ds.rows.iter().zip(&ds.labels).filter(|(x, &y)| self.predict(&x[..]) == y).count();
        correct as f64 / ds.len().max(1) as f64
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::NUM_FEATURES;

    fn data(xs: &[(f64, f64, bool)]) -> Dataset {
        let mut ds = Dataset::default();
        for &(a, b, y) in xs {
            let mut row = [0.0; NUM_FEATURES];
            row[0] = a;
            row[1] = b;
            ds.push(row, y);
        }
        ds
    }

    #[test]
    fn separable_data_gives_a_stump() {
        let xs: Vec<_> = (0..200).map(|i| (i as f64, 0.0, i >= 120)).collect();
        let t = TreeModel::train(&data(&xs), &[0, 1], TreeParams { max_depth: 8, min_leaf: 5 });
        assert_eq!(t.depth(), 1);
        assert_eq!(t.root_split(), Some((0, 119.5)));
        assert_eq!(t.accuracy(&data(&xs)), 1.0);
    }

    #[test]
    fn ties_go_to_the_lowest_feature() {
        let xs: Vec<_> = (0..100).map(|i| (i as f64, i as f64, i >= 50)).collect();
        let t = TreeModel::train(&data(&xs), &[1, 0], TreeParams { max_depth: 3, min_leaf: 1 });
        assert_eq!(t.root_split(), Some((0, 49.5)));
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let xs: Vec<_> = (0..100).map(|i| (1.0, 2.0, i % 2 == 0)).collect();
        let t = TreeModel::train(&data(&xs), &[0, 1], TreeParams::default());
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn respects_min_leaf() {
        let xs: Vec<_> = (0..100).map(|i| (i as f64, 0.0, i < 3)).collect();
        let t = TreeModel::train(&data(&xs), &[0], TreeParams { max_depth: 8, min_leaf: 10 });
        for n in &t.nodes {
            if let Node::Leaf { rows, .. } = n {
                assert!(*rows >= 10);
            }
        }
    }
}
