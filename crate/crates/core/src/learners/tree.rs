//! Least-squares CART regression trees over quantile split candidates.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix, QuantileIndex};
use crate::error::{BoostError, Result};
use crate::par::Exec;

/// Splits whose gain is below this fraction of the node's sum of squared
/// targets are treated as zero gain (floating-point noise).
const GAIN_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub depth_limit: usize,
    pub min_split_gain: f64,
    pub l2_leaf: f64,
    pub quantiles: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            depth_limit: 3,
            min_split_gain: 0.0,
            l2_leaf: 0.0,
            quantiles: 100,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth_limit == 0 {
            return Err(BoostError::config("depth_limit must be positive"));
        }
        if !(self.min_split_gain >= 0.0 && self.min_split_gain.is_finite()) {
            return Err(BoostError::config("min_split_gain must be a nonnegative number"));
        }
        if !(self.l2_leaf >= 0.0 && self.l2_leaf.is_finite()) {
            return Err(BoostError::config("l2_leaf must be a nonnegative number"));
        }
        if self.quantiles == 0 {
            return Err(BoostError::config("quantiles must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

/// Binary tree stored as a node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    depth_limit: usize,
    n_features: usize,
}

impl RegressionTree {
    pub fn leaf(value: f64, n_features: usize) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
            depth_limit: 1,
            n_features,
        }
    }

    /// A depth-1 tree: `value <= threshold` goes to `left`.
    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64, n_features: usize) -> Self {
        RegressionTree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    gain: 0.0,
                },
                Node::Leaf { value: left },
                Node::Leaf { value: right },
            ],
            depth_limit: 1,
            n_features,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.cols() != self.n_features {
            return Err(BoostError::input(format!(
                "tree expects {} columns, got {}",
                self.n_features,
                rows.cols()
            )));
        }
        Ok((0..rows.rows()).map(|i| self.predict_row(rows.row(i))).collect())
    }

    /// Copy with every leaf value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RegressionTree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { value } => Node::Leaf {
                    value: value * factor,
                },
                ref split => split.clone(),
            })
            .collect();
        RegressionTree {
            nodes,
            ..self.clone()
        }
    }

    pub(crate) fn check_structure(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(BoostError::Format("tree has no nodes".into()));
        }
        // Children must point forward, which also rules out cycles.
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature, left, right, ..
            } = *node
            {
                if feature >= self.n_features
                    || left <= i
                    || right <= i
                    || left >= self.nodes.len()
                    || right >= self.nodes.len()
                {
                    return Err(BoostError::Format(format!("malformed split node {i}")));
                }
            }
        }
        Ok(())
    }
}

/// Per-feature bin codes for every row, computed once per dataset.
#[derive(Debug, Clone)]
pub struct BinnedFeatures {
    // bins[feature][row]
    bins: Vec<Vec<u32>>,
    n_rows: usize,
}

impl BinnedFeatures {
    pub fn new(data: &Dataset, index: &QuantileIndex) -> Result<Self> {
        if index.n_features() != data.n_features() {
            return Err(BoostError::input(format!(
                "quantile index covers {} features, dataset has {}",
                index.n_features(),
                data.n_features()
            )));
        }
        let bins = (0..data.n_features())
            .map(|j| {
                data.features()
                    .column(j)
                    .map(|v| index.bin(j, v) as u32)
                    .collect()
            })
            .collect();
        Ok(BinnedFeatures {
            bins,
            n_rows: data.n_rows(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
}

/// Output of a fit: the tree and its predictions on the training rows.
#[derive(Debug, Clone)]
pub struct TreeFit {
    pub tree: RegressionTree,
    pub train_predictions: Vec<f64>,
}

/// Greedy least-squares tree fit. See [`fit_tree_binned`].
pub fn fit_tree(
    target: &[f64],
    data: &Dataset,
    index: &QuantileIndex,
    config: &TreeConfig,
) -> Result<RegressionTree> {
    let binned = BinnedFeatures::new(data, index)?;
    Ok(fit_tree_binned(target, &binned, index, config, Exec::default())?.tree)
}

/// Top-down greedy fit of `target` by squared error.
///
/// Each node takes the candidate split with the largest gain
/// `S_L^2/(N_L+l2) + S_R^2/(N_R+l2) - S^2/(N+l2)`, ties going to the lowest
/// feature index and then the lowest threshold. Leaves hold `S/(N+l2)`.
/// Growth stops at the depth limit, at nodes with fewer than two rows, or
/// when the best gain is not positive or is below `min_split_gain`.
pub fn fit_tree_binned(
    target: &[f64],
    binned: &BinnedFeatures,
    index: &QuantileIndex,
    config: &TreeConfig,
    exec: Exec,
) -> Result<TreeFit> {
    config.validate()?;
    if target.len() != binned.n_rows() {
        return Err(BoostError::input(format!(
            "target has {} values for {} rows",
            target.len(),
            binned.n_rows()
        )));
    }
    let mut builder = Builder {
        target,
        binned,
        index,
        config,
        exec,
        nodes: Vec::new(),
        predictions: vec![0.0; target.len()],
    };
    let rows: Vec<u32> = (0..target.len() as u32).collect();
    builder.grow(rows, 0);
    Ok(TreeFit {
        tree: RegressionTree {
            nodes: builder.nodes,
            depth_limit: config.depth_limit,
            n_features: index.n_features(),
        },
        train_predictions: builder.predictions,
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct Builder<'a> {
    target: &'a [f64],
    binned: &'a BinnedFeatures,
    index: &'a QuantileIndex,
    config: &'a TreeConfig,
    exec: Exec,
    nodes: Vec<Node>,
    predictions: Vec<f64>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> usize {
        let id = self.nodes.len();
        let (sum, sum_sq) = rows.iter().fold((0.0, 0.0), |(s, q), &i| {
            let t = self.target[i as usize];
            (s + t, q + t * t)
        });
        let count = rows.len() as f64;
        let leaf_value = sum / (count + self.config.l2_leaf);

        let split = if depth < self.config.depth_limit && rows.len() >= 2 {
            self.best_split(&rows, sum)
                .filter(|c| c.gain > GAIN_NOISE * sum_sq && c.gain >= self.config.min_split_gain)
        } else {
            None
        };

        let Some(best) = split else {
            self.nodes.push(Node::Leaf { value: leaf_value });
            for &i in &rows {
                self.predictions[i as usize] = leaf_value;
            }
            return id;
        };

        let codes = &self.binned.bins[best.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&i| codes[i as usize] as usize <= best.bin);
        drop(rows);

        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: self.index.thresholds(best.feature)[best.bin],
            left: 0,
            right: 0,
            gain: best.gain,
        });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    fn best_split(&self, rows: &[u32], sum: f64) -> Option<Candidate> {
        let lambda = self.config.l2_leaf;
        let n = rows.len() as f64;
        let parent_score = sum * sum / (n + lambda);
        let per_feature = self.exec.map(self.index.n_features(), |feature| {
            let thresholds = self.index.thresholds(feature);
            if thresholds.is_empty() {
                return None;
            }
            let codes = &self.binned.bins[feature];
            let mut sums = vec![0.0; thresholds.len() + 1];
            let mut counts = vec![0usize; thresholds.len() + 1];
            for &i in rows {
                let b = codes[i as usize] as usize;
                sums[b] += self.target[i as usize];
                counts[b] += 1;
            }
            let mut best: Option<Candidate> = None;
            let (mut left_sum, mut left_count) = (0.0, 0usize);
            for bin in 0..thresholds.len() {
                left_sum += sums[bin];
                left_count += counts[bin];
                let right_count = rows.len() - left_count;
                if left_count == 0 || right_count == 0 {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / (left_count as f64 + lambda)
                    + right_sum * right_sum / (right_count as f64 + lambda)
                    - parent_score;
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate { feature, bin, gain });
                }
            }
            best
        });
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<Candidate>, c| match acc {
                Some(a) if c.gain <= a.gain => Some(a),
                _ => Some(c),
            })
    }
}
