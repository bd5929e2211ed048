use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Minimum number of (bootstrap) samples in a leaf.
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Share of features tried at each split (at least one).
    pub feature_fraction: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_leaf: 3,
            max_depth: None,
            feature_fraction: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned regression tree; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
}

impl Forest {
    /// Mean of the tree predictions.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }
}

fn leaf_value(y: &[f64], idx: &[usize]) -> f64 {
    let first = y[idx[0]];
    if idx.iter().all(|&i| y[i] == first) {
        return first;
    }
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    rng: rng::Rng,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: leaf_value(self.y, &idx),
        });
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || idx.len() < 2 * self.params.min_leaf {
            return slot;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let p = self.x.cols();
        let mut features: Vec<usize> = (0..p).collect();
        rng::shuffle(&mut self.rng, &mut features);
        features.truncate(self.mtry);
        features.sort_unstable();

        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let min_leaf = self.params.min_leaf;
        // maximize sum_l^2/n_l + sum_r^2/n_r, equivalent to SSE reduction
        let base = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.y[order[k]];
                let nl = k + 1;
                let nr = n - nl;
                let xv = self.x[(order[k], f)];
                let xn = self.x[(order[k + 1], f)];
                if nl < min_leaf || nr < min_leaf || xv == xn {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - base;
                if gain > 1e-12 * (1.0 + base.abs()) && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (xv + xn)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn check_inputs(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::WidthMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.rows() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: x.rows(),
        });
    }
    if params.min_leaf == 0 || params.min_leaf > x.rows() {
        return Err(Error::InvalidInput("leaf size must lie in [1, n]".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidInput("forest needs at least one tree".into()));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest inputs".into()));
    }
    Ok(())
}

/// Bootstrap samples (row indices with replacement), one per tree.
pub fn bootstrap_bags(n: usize, n_trees: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..n_trees)
        .map(|t| {
            let mut r = rng::seeded(rng::derive_seed(seed, t as u64));
            (0..n).map(|_| rng::index(&mut r, n)).collect()
        })
        .collect()
}

/// Bagged variance-reduction regression trees.
pub fn fit_random_forest(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Result<Forest> {
    check_inputs(x, y, params)?;
    let bags = bootstrap_bags(x.rows(), params.n_trees, seed);
    fit_random_forest_bagged(x, y, params, &bags, seed)
}

/// Grows one tree per supplied bag. Feature subsampling draws from streams
/// keyed by `seed` and tree index only, so relabelling rows (with the bags
/// relabelled to match) yields the same forest.
pub fn fit_random_forest_bagged(
    x: &Matrix,
    y: &[f64],
    params: &ForestParams,
    bags: &[Vec<usize>],
    seed: u64,
) -> Result<Forest> {
    check_inputs(x, y, params)?;
    let p = x.cols();
    let mtry = ((params.feature_fraction * p as f64) as usize).clamp(1, p.max(1));
    let trees = bags
        .iter()
        .enumerate()
        .map(|(t, bag)| {
            let mut g = Grower {
                x,
                y,
                params,
                mtry,
                rng: rng::seeded(rng::derive_seed(seed, 0x5EED_0000 + t as u64)),
                nodes: Vec::new(),
            };
            g.grow(bag.clone(), 0);
            RegressionTree { nodes: g.nodes }
        })
        .collect();
    Ok(Forest {
        trees,
        params: params.clone(),
        seed,
        n_features: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn step_data(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = rng::seeded(seed);
        let xs: Vec<f64> = (0..n).map(|_| 2.0 * rng::uniform(&mut r) - 1.0).collect();
        let y = xs.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        (Matrix::from_vec(n, 1, xs).unwrap(), y)
    }

    #[test]
    fn depth_zero_predicts_the_mean() {
        let (x, y) = step_data(50, 1);
        let params = ForestParams {
            max_depth: Some(0),
            n_trees: 1,
            ..Default::default()
        };
        // a single tree over the identity bag is exactly the sample mean
        let bag: Vec<usize> = (0..50).collect();
        let f = fit_random_forest_bagged(&x, &y, &params, &[bag], 0).unwrap();
        let mean = y.iter().sum::<f64>() / 50.0;
        assert!((f.predict_row(&[0.3]) - mean).abs() < 1e-12);
        assert!((f.predict_row(&[-0.7]) - mean).abs() < 1e-12);
    }

    #[test]
    fn step_function_is_learned() {
        let (x, y) = step_data(200, 2);
        let f = fit_random_forest(&x, &y, &ForestParams::default(), 7).unwrap();
        let (xt, yt) = step_data(500, 3);
        let mse: f64 = (0..500)
            .map(|i| (f.predict_row(xt.row(i)) - yt[i]).powi(2))
            .sum::<f64>()
            / 500.0;
        assert!(mse < 0.05, "mse {mse}");
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let (x, y) = step_data(60, 4);
        let f = fit_random_forest(
            &x,
            &y,
            &ForestParams {
                n_trees: 7,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        for v in [-0.9, -0.1, 0.05, 0.8] {
            let by_hand = f.trees.iter().map(|t| t.predict_row(&[v])).sum::<f64>() / 7.0;
            assert_eq!(f.predict_row(&[v]), by_hand);
        }
    }

    #[test]
    fn row_permutation_with_matching_bags_gives_same_forest() {
        let mut r = rng::seeded(9);
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng::normal(&mut r), rng::normal(&mut r)]).collect();
        let y: Vec<f64> = rows.iter().map(|v| v[0] - 0.5 * v[1] * v[1]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let params = ForestParams {
            n_trees: 10,
            feature_fraction: 0.5,
            ..Default::default()
        };
        let bags = bootstrap_bags(n, 10, 33);
        let a = fit_random_forest_bagged(&x, &y, &params, &bags, 33).unwrap();

        // perm[new] = old
        let mut perm: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut r, &mut perm);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let bags_p: Vec<Vec<usize>> = bags.iter().map(|b| b.iter().map(|&i| inv[i]).collect()).collect();
        let b = fit_random_forest_bagged(&xp, &yp, &params, &bags_p, 33).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, fit_random_forest_bagged(&x, &y, &params, &bags, 33).unwrap());
    }

    #[test]
    fn leaf_larger_than_n_is_rejected() {
        let (x, y) = step_data(5, 1);
        let params = ForestParams {
            min_leaf: 6,
            ..Default::default()
        };
        assert!(fit_random_forest(&x, &y, &params, 0).is_err());
    }
}
