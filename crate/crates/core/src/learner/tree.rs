//! CART regression trees.
//!
//! Splits minimize the summed squared error of the two children (variance
//! reduction). Candidate thresholds are midpoints between consecutive
//! distinct feature values and a row goes left when `x <= threshold`. Ties
//! on equal reduction go to the lowest feature index, then the lowest
//! threshold.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
        n: u32,
    },
}

/// Nodes in depth-first order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64, n: u32) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value, n }],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features examined per split.
    pub n_candidates: usize,
    pub min_samples_leaf: usize,
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// Builds one tree. `columns[f][i]` is feature `f` of row `i`; `samples`
/// lists the rows to fit, duplicates allowed.
pub(crate) struct TreeBuilder<'a, R: Rng> {
    columns: &'a [Vec<f64>],
    target: &'a [f64],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<TreeNode>,
    scratch: Vec<(f64, f64)>,
    features: Vec<usize>,
}

impl<'a, R: Rng> TreeBuilder<'a, R> {
    pub fn new(columns: &'a [Vec<f64>], target: &'a [f64], params: TreeParams, rng: &'a mut R) -> Self {
        Self {
            columns,
            target,
            params,
            rng,
            nodes: Vec::new(),
            scratch: Vec::new(),
            features: (0..columns.len()).collect(),
        }
    }

    pub fn build(mut self, samples: &mut [u32]) -> Tree {
        self.grow(samples, 0);
        Tree { nodes: self.nodes }
    }

    fn push_leaf(&mut self, samples: &[u32]) -> u32 {
        // running mean: a pure node keeps its exact value
        let mut value = 0.0;
        for (k, &i) in samples.iter().enumerate() {
            value += (self.target[i as usize] - value) / (k + 1) as f64;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(TreeNode::Leaf {
            value,
            n: samples.len() as u32,
        });
        id
    }

    fn grow(&mut self, samples: &mut [u32], depth: usize) -> u32 {
        let n = samples.len();
        let first = self.target[samples[0] as usize];
        let pure = samples.iter().all(|&i| self.target[i as usize] == first);
        if pure || depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf {
            return self.push_leaf(samples);
        }

        let Some(best) = self.find_split(samples) else {
            return self.push_leaf(samples);
        };

        // partition in place: rows with x <= threshold first
        let column = &self.columns[best.feature];
        let mut mid = 0;
        for k in 0..n {
            if column[samples[k] as usize] <= best.threshold {
                samples.swap(mid, k);
                mid += 1;
            }
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            left: 0,
            right: 0,
        });
        let (left_rows, right_rows) = samples.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        if let TreeNode::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id as u32
    }

    /// Draws `n_candidates` features without replacement and returns the
    /// best split among them. If none of them can split the node, the
    /// remaining features are tried in draw order until one can.
    fn find_split(&mut self, samples: &[u32]) -> Option<Best> {
        self.features.shuffle(self.rng);
        let k = self.params.n_candidates.min(self.features.len());
        let mut drawn: Vec<usize> = self.features[..k].to_vec();
        drawn.sort_unstable();

        let mut best: Option<Best> = None;
        for &f in &drawn {
            self.consider(f, samples, &mut best);
        }
        if best.is_none() {
            for idx in k..self.features.len() {
                let f = self.features[idx];
                self.consider(f, samples, &mut best);
                if best.is_some() {
                    break;
                }
            }
        }
        best
    }

    fn consider(&mut self, feature: usize, samples: &[u32], best: &mut Option<Best>) {
        let column = &self.columns[feature];
        self.scratch.clear();
        self.scratch
            .extend(samples.iter().map(|&i| (column[i as usize], self.target[i as usize])));
        self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let n = self.scratch.len();
        let total: f64 = self.scratch.iter().map(|p| p.1).sum();
        let msl = self.params.min_samples_leaf;
        let mut left_sum = 0.0;
        for p in 0..n - 1 {
            left_sum += self.scratch[p].1;
            let (x, next) = (self.scratch[p].0, self.scratch[p + 1].0);
            let n_left = p + 1;
            let n_right = n - n_left;
            if x == next || n_left < msl || n_right < msl {
                continue;
            }
            // child SSE = const - (sum_l^2 / n_l + sum_r^2 / n_r)
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64;
            let better = match best {
                None => true,
                Some(b) => score > b.score,
            };
            if better {
                let mut threshold = 0.5 * (x + next);
                if threshold >= next {
                    threshold = x;
                }
                *best = Some(Best {
                    score,
                    feature,
                    threshold,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fit(columns: &[Vec<f64>], y: &[f64], params: TreeParams) -> Tree {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut samples: Vec<u32> = (0..y.len() as u32).collect();
        TreeBuilder::new(columns, y, params, &mut rng).build(&mut samples)
    }

    #[test]
    fn single_split_on_step() {
        let cols = vec![vec![1.0, 2.0, 8.0, 9.0]];
        let y = [0.0, 0.0, 10.0, 10.0];
        let t = fit(&cols, &y, TreeParams { max_depth: 1, n_candidates: 1, min_samples_leaf: 1 });
        match &t.nodes[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 5.0),
            other => panic!("{other:?}"),
        }
        assert_eq!(t.predict(&[1.5]), 0.0);
        assert_eq!(t.predict(&[8.5]), 10.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn tie_prefers_lowest_feature_then_threshold() {
        // both features separate the targets identically
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]];
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = fit(&cols, &y, TreeParams { max_depth: 1, n_candidates: 2, min_samples_leaf: 1 });
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
        // equal reduction at 1.5 and 3.5 on a symmetric target
        let cols = vec![vec![1.0, 2.0, 3.0]];
        let y = [0.0, 1.0, 0.0];
        let t = fit(&cols, &y, TreeParams { max_depth: 1, n_candidates: 1, min_samples_leaf: 1 });
        assert!(matches!(t.nodes[0], TreeNode::Split { threshold, .. } if threshold == 1.5));
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let cols = vec![(0..10).map(|i| i as f64).collect::<Vec<_>>()];
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let t = fit(&cols, &y, TreeParams { max_depth: 48, n_candidates: 1, min_samples_leaf: 3 });
        assert!(t.nodes.iter().all(|n| match n {
            TreeNode::Leaf { n, .. } => *n >= 3,
            _ => true,
        }));
    }

    #[test]
    fn unbounded_depth_memorizes() {
        let cols = vec![vec![3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0]];
        let y = [1.0, 4.0, 2.0, 5.0, 3.0, 1.5, 4.5, 2.5];
        let t = fit(&cols, &y, TreeParams { max_depth: usize::MAX, n_candidates: 1, min_samples_leaf: 1 });
        for (i, want) in y.iter().enumerate() {
            assert_eq!(t.predict(&[cols[0][i]]), *want);
        }
    }

    #[test]
    fn falls_back_when_drawn_features_are_constant() {
        let cols = vec![vec![1.0; 4], vec![1.0; 4], vec![0.0, 1.0, 2.0, 3.0]];
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = fit(&cols, &y, TreeParams { max_depth: 1, n_candidates: 1, min_samples_leaf: 1 });
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 2, .. }));
    }
}
