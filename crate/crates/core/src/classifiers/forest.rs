//! Random forest of Gini CART trees.
//!
//! Splits send `x[feature] <= threshold` left; thresholds are midpoints
//! between consecutive distinct values. Among equally good splits the lowest
//! feature index wins, then the lowest threshold. Leaf and forest vote ties
//! go to label 0.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_width, check_xy, ClassWeight};
use crate::error::Result;
use crate::numkit::Rng;

/// Minimum impurity decrease for a split to count as an improvement.
const MIN_DECREASE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub m_features: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub class_weight: ClassWeight,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            m_features: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
            class_weight: ClassWeight::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: u8,
        counts: [u64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted Gini decrease at this node (not scaled by node size).
        impurity_decrease: f64,
        samples: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub tree_seeds: Vec<u64>,
    pub m_features: usize,
    pub n_features: usize,
    /// Total size-weighted impurity decrease per feature, normalized to sum
    /// to 1; all zeros when no tree has a split.
    pub importances: Vec<f64>,
}

/// Gini impurity of weighted class totals.
pub fn gini(w0: f64, w1: f64) -> f64 {
    let total = w0 + w1;
    if total <= 0.0 {
        return 0.0;
    }
    let p0 = w0 / total;
    let p1 = w1 / total;
    1.0 - p0 * p0 - p1 * p1
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Best split of the rows `indices` over the candidate `features`.
///
/// `features` must be sorted ascending for the documented tie-break.
pub fn best_split(
    x: ArrayView2<f64>,
    y: &[u8],
    class_w: [f64; 2],
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let mut totals = [0.0f64; 2];
    for &i in indices {
        totals[usize::from(y[i])] += class_w[usize::from(y[i])];
    }
    let total_w = totals[0] + totals[1];
    let parent = gini(totals[0], totals[1]);
    if parent <= 0.0 {
        return None;
    }
    let n = indices.len();
    let min_leaf = min_leaf.max(1);
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = indices.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
        let mut left = [0.0f64; 2];
        for k in 0..n - 1 {
            let i = order[k];
            left[usize::from(y[i])] += class_w[usize::from(y[i])];
            let (v, next) = (x[[i, f]], x[[order[k + 1], f]]);
            if v == next || k + 1 < min_leaf || n - k - 1 < min_leaf {
                continue;
            }
            let right = [totals[0] - left[0], totals[1] - left[1]];
            let wl = left[0] + left[1];
            let wr = right[0] + right[1];
            let decrease = parent
                - (wl / total_w) * gini(left[0], left[1])
                - (wr / total_w) * gini(right[0], right[1]);
            if decrease > MIN_DECREASE && best.is_none_or(|b| decrease > b.impurity_decrease) {
                best = Some(Split {
                    feature: f,
                    threshold: v + (next - v) / 2.0,
                    impurity_decrease: decrease,
                });
            }
        }
    }
    best
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    class_w: [f64; 2],
    config: &'a ForestConfig,
    m_features: usize,
    rng: Rng,
    nodes: Vec<Node>,
    /// Size-weighted decrease per feature for this tree.
    gains: Vec<f64>,
    root_weight: f64,
}

impl TreeBuilder<'_> {
    fn build(&mut self, indices: &[usize], depth: usize) -> usize {
        let mut counts = [0u64; 2];
        for &i in indices {
            counts[usize::from(self.y[i])] += 1;
        }
        let w0 = counts[0] as f64 * self.class_w[0];
        let w1 = counts[1] as f64 * self.class_w[1];
        let leaf = Node::Leaf {
            label: u8::from(w1 > w0),
            counts,
        };

        let depth_ok = self.config.max_depth.is_none_or(|d| depth < d);
        let splittable = depth_ok
            && counts[0] > 0
            && counts[1] > 0
            && indices.len() >= 2 * self.config.min_leaf.max(1);
        let split = if splittable {
            let d = self.x.ncols();
            let mut features = if self.m_features >= d {
                (0..d).collect::<Vec<_>>()
            } else {
                self.rng.sample_indices(d, self.m_features)
            };
            features.sort_unstable();
            best_split(
                self.x,
                self.y,
                self.class_w,
                indices,
                &features,
                self.config.min_leaf,
            )
        } else {
            None
        };

        let id = self.nodes.len();
        self.nodes.push(leaf);
        let Some(split) = split else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
        self.gains[split.feature] += (w0 + w1) / self.root_weight * split.impurity_decrease;
        let left = self.build(&left_rows, depth + 1);
        let right = self.build(&right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            impurity_decrease: split.impurity_decrease,
            samples: indices.len() as u64,
        };
        id
    }
}

pub fn fit_forest(x: ArrayView2<f64>, y: &[u8], config: &ForestConfig) -> Result<ForestModel> {
    check_xy(x, y)?;
    if config.n_trees == 0 {
        return Err(crate::Error::InvalidParameter(
            "forest needs at least one tree".into(),
        ));
    }
    let n = x.nrows();
    let d = x.ncols();
    let m_features = config
        .m_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let class_w = config.class_weight.weights(y);
    let master = Rng::new(config.seed);
    let tree_seeds: Vec<u64> = (0..config.n_trees)
        .map(|t| master.derive_indexed("tree", t as u64).seed())
        .collect();

    let grown: Vec<(DecisionTree, Vec<f64>)> = tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = Rng::new(seed);
            let indices: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let root_weight = indices.iter().map(|&i| class_w[usize::from(y[i])]).sum();
            let mut builder = TreeBuilder {
                x,
                y,
                class_w,
                config,
                m_features,
                rng,
                nodes: Vec::new(),
                gains: vec![0.0; d],
                root_weight,
            };
            builder.build(&indices, 0);
            (
                DecisionTree {
                    nodes: builder.nodes,
                },
                builder.gains,
            )
        })
        .collect();

    let mut importances = vec![0.0; d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, gains) in grown {
        for (imp, g) in importances.iter_mut().zip(&gains) {
            *imp += g;
        }
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for imp in &mut importances {
            *imp /= total;
        }
    }
    Ok(ForestModel {
        trees,
        tree_seeds,
        m_features,
        n_features: d,
        importances,
    })
}

/// Majority vote over trees; a tied vote predicts 0.
pub fn predict_forest(model: &ForestModel, x: ArrayView2<f64>) -> Result<Vec<u8>> {
    check_width(x, model.n_features)?;
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            let ones = model
                .trees
                .iter()
                .filter(|t| t.predict_row(&row) == 1)
                .count();
            u8::from(2 * ones > model.trees.len())
        })
        .collect())
}

pub fn feature_importances(model: &ForestModel) -> &[f64] {
    &model.importances
}
