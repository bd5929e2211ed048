//! Treatment rules over a treatment grouping.
//!
//! A [`TreeItr`] holds one binary rule per decision node of the grouping
//! plus a null decision ("step 0") that says whether any non-null group
//! should be given at all. Nodes are fitted bottom-up; recommendation walks
//! root-down. A [`FlatItr`] regresses reward on features and treatment
//! indicators and picks the best single treatment.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::classifier::{self, ClassifierConfig, DecisionFunction, FunctionClass};
use crate::learners::{Regressor, RegressorSpec};
use crate::math::{self, Matrix};
use crate::model::FeatureMatrix;
use crate::rng;
use crate::treatment_tree::{group_rewards, CenteredRewards, Child, TreatmentGrouping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QlVariant {
    /// Observed rewards of the selected descendant group.
    Ql1,
    /// Predicted optimal reward from the child node's fit.
    Ql2,
}

/// What a higher node sees as an arm's reward on a line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// The group the already-fitted descendant rules pick for that line.
    #[default]
    SelectedGroup,
    /// The best observed group reward anywhere below the arm.
    MaxDownstream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItrMethod {
    QLearning {
        variant: QlVariant,
        learner: RegressorSpec,
    },
    Owl {
        class: FunctionClass,
        /// Penalty as a multiple of the node's mean absolute reward.
        lambda: f64,
        /// Regression used for the null decision.
        step0: RegressorSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItrConfig {
    pub method: ItrMethod,
    #[serde(default)]
    pub propagation: Propagation,
}

impl ItrConfig {
    pub fn qlearning(variant: QlVariant, learner: RegressorSpec) -> Self {
        Self {
            method: ItrMethod::QLearning { variant, learner },
            propagation: Propagation::SelectedGroup,
        }
    }

    pub fn owl(class: FunctionClass, lambda: f64) -> Self {
        Self {
            method: ItrMethod::Owl {
                class,
                lambda,
                step0: RegressorSpec::lasso(0.1),
            },
            propagation: Propagation::SelectedGroup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeModel {
    /// One reward regression per arm; the larger prediction wins.
    Regression { left: Regressor, right: Regressor },
    /// `sign(f(x))`, with `+1` meaning the left arm.
    Decision { function: DecisionFunction },
}

impl NodeModel {
    /// Arm scores `(left, right)`: predicted rewards, or `(f, -f)`.
    pub fn arm_scores(&self, x: &[f64]) -> (f64, f64) {
        match self {
            NodeModel::Regression { left, right } => (left.predict_row(x), right.predict_row(x)),
            NodeModel::Decision { function } => {
                let f = function.decision_value(x);
                (f, -f)
            }
        }
    }

    /// Ties go left.
    pub fn goes_left(&self, x: &[f64]) -> bool {
        let (l, r) = self.arm_scores(x);
        l >= r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRule {
    /// Index into the grouping's decision nodes.
    pub node: usize,
    pub model: NodeModel,
    pub left_treatments: Vec<usize>,
    pub right_treatments: Vec<usize>,
    /// Lines used in the fit.
    pub n_lines: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    Null,
    Group(usize),
}

/// Anything that maps a feature row to a set of treatment indices.
pub trait TreatmentRule {
    fn feature_names(&self) -> &[String];
    fn recommend_set(&self, x: &[f64]) -> Result<Vec<usize>>;

    fn check_width(&self, x: &[f64]) -> Result<()> {
        let w = self.feature_names().len();
        if x.len() != w {
            return Err(Error::WidthMismatch {
                expected: w,
                got: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeItr {
    pub grouping: TreatmentGrouping,
    pub feature_names: Vec<String>,
    pub config: ItrConfig,
    /// Same order as `grouping.nodes`.
    pub nodes: Vec<NodeRule>,
    /// Predicts the reward of the best non-null group; positive means treat.
    pub step0: Regressor,
}

impl TreeItr {
    pub fn step0_score(&self, x: &[f64]) -> f64 {
        self.step0.predict_row(x)
    }

    /// Leaf group reached from `from` by following node rules.
    pub fn descend(&self, from: Child, x: &[f64]) -> usize {
        let mut at = from;
        loop {
            match at {
                Child::Group(g) => return g,
                Child::Node(k) => {
                    let n = &self.grouping.nodes[k];
                    at = if self.nodes[k].model.goes_left(x) {
                        n.left
                    } else {
                        n.right
                    };
                }
            }
        }
    }

    /// Decision nodes visited on the way to the non-null recommendation.
    pub fn path(&self, x: &[f64]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut at = Child::Node(0);
        while let Child::Node(k) = at {
            out.push(k);
            let n = &self.grouping.nodes[k];
            at = if self.nodes[k].model.goes_left(x) {
                n.left
            } else {
                n.right
            };
        }
        out
    }

    pub fn recommend(&self, x: &[f64]) -> Result<Recommendation> {
        TreatmentRule::check_width(self, x)?;
        if self.step0_score(x) > 0.0 {
            Ok(Recommendation::Group(self.descend(Child::Node(0), x)))
        } else {
            Ok(Recommendation::Null)
        }
    }

    pub fn treatments_of(&self, rec: Recommendation) -> &[usize] {
        match rec {
            Recommendation::Null => &self.grouping.null_group,
            Recommendation::Group(g) => &self.grouping.groups[g],
        }
    }
}

impl TreatmentRule for TreeItr {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn recommend_set(&self, x: &[f64]) -> Result<Vec<usize>> {
        let rec = self.recommend(x)?;
        Ok(self.treatments_of(rec).to_vec())
    }
}

/// Feature rows in the order of `line_ids`.
pub fn aligned_features(features: &FeatureMatrix, line_ids: &[String]) -> Result<Matrix> {
    let idx = line_ids
        .iter()
        .map(|l| {
            features
                .line_index(l)
                .ok_or_else(|| Error::Validation(format!("no features for line `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(features.values().select_rows(&idx))
}

fn owl_bandwidth(class: FunctionClass, x: &Matrix) -> FunctionClass {
    match class {
        FunctionClass::Gaussian { bandwidth: None } => {
            let mut z = x.clone();
            for j in 0..x.cols() {
                let c = x.column(j);
                let (mu, sd) = (math::mean(&c), math::sqrt(math::variance_pop(&c)));
                for i in 0..x.rows() {
                    z[(i, j)] = if sd > 0.0 { (x[(i, j)] - mu) / sd } else { 0.0 };
                }
            }
            FunctionClass::Gaussian {
                bandwidth: Some(classifier::median_bandwidth(&z)),
            }
        }
        other => other,
    }
}

struct Fitter<'a> {
    cfg: &'a ItrConfig,
    grouping: &'a TreatmentGrouping,
    x: Matrix,
    gr: Vec<Vec<Option<f64>>>,
    nodes: Vec<Option<NodeRule>>,
}

impl Fitter<'_> {
    fn descend(&self, from: Child, x: &[f64]) -> usize {
        let mut at = from;
        loop {
            match at {
                Child::Group(g) => return g,
                Child::Node(k) => {
                    let rule = self.nodes[k].as_ref().expect("descendants fitted first");
                    let n = &self.grouping.nodes[k];
                    at = if rule.model.goes_left(x) { n.left } else { n.right };
                }
            }
        }
    }

    /// Per-line reward of an arm, given its descendants are fitted.
    fn arm_values(&self, child: Child) -> Vec<Option<f64>> {
        let m = self.x.rows();
        match child {
            Child::Group(g) => self.gr[g].clone(),
            Child::Node(k) => {
                let pseudo = matches!(
                    self.cfg.method,
                    ItrMethod::QLearning {
                        variant: QlVariant::Ql2,
                        ..
                    }
                );
                if pseudo {
                    let rule = self.nodes[k].as_ref().expect("descendants fitted first");
                    return (0..m)
                        .map(|j| {
                            let (l, r) = rule.model.arm_scores(self.x.row(j));
                            Some(l.max(r))
                        })
                        .collect();
                }
                match self.cfg.propagation {
                    Propagation::SelectedGroup => {
                        (0..m).map(|j| self.gr[self.descend(child, self.x.row(j))][j]).collect()
                    }
                    Propagation::MaxDownstream => {
                        let under = self.grouping.groups_under(child);
                        (0..m)
                            .map(|j| under.iter().filter_map(|&g| self.gr[g][j]).reduce(f64::max))
                            .collect()
                    }
                }
            }
        }
    }

    fn fit_node(&self, k: usize, seed: u64) -> Result<NodeRule> {
        let node = &self.grouping.nodes[k];
        let lv = self.arm_values(node.left);
        let rv = self.arm_values(node.right);
        let rows: Vec<usize> = (0..self.x.rows())
            .filter(|&j| lv[j].is_some() && rv[j].is_some())
            .collect();
        if rows.len() < 2 {
            return Err(Error::UnfittableNode {
                node: k,
                reason: format!("{} line(s) observed on both arms", rows.len()),
            });
        }
        let xs = self.x.select_rows(&rows);
        let yl: Vec<f64> = rows.iter().map(|&j| lv[j].expect("kept")).collect();
        let yr: Vec<f64> = rows.iter().map(|&j| rv[j].expect("kept")).collect();
        let model = match &self.cfg.method {
            ItrMethod::QLearning { learner, .. } => NodeModel::Regression {
                left: learner.fit(&xs, &yl, rng::derive_seed(seed, 2 * k as u64))?,
                right: learner.fit(&xs, &yr, rng::derive_seed(seed, 2 * k as u64 + 1))?,
            },
            ItrMethod::Owl { class, lambda, .. } => {
                // each line contributes one observation per arm, interleaved
                let n = rows.len();
                let mut stacked = Matrix::zeros(2 * n, xs.cols());
                let mut labels = Vec::with_capacity(2 * n);
                let mut rewards = Vec::with_capacity(2 * n);
                for i in 0..n {
                    stacked.row_mut(2 * i).copy_from_slice(xs.row(i));
                    stacked.row_mut(2 * i + 1).copy_from_slice(xs.row(i));
                    labels.extend([1.0, -1.0]);
                    rewards.extend([yl[i], yr[i]]);
                }
                let scale = rewards.iter().map(|r| math::abs(*r)).sum::<f64>() / (2 * n) as f64;
                if scale == 0.0 {
                    return Err(Error::DegenerateWeights);
                }
                let cfg = ClassifierConfig::new(lambda * scale, owl_bandwidth(*class, &xs));
                NodeModel::Decision {
                    function: classifier::fit_weighted_classifier(&stacked, &labels, &rewards, &cfg)?,
                }
            }
        };
        let side = |c: Child| -> Vec<usize> {
            let mut t: Vec<usize> = self
                .grouping
                .groups_under(c)
                .iter()
                .flat_map(|&g| self.grouping.groups[g].iter().copied())
                .collect();
            t.sort_unstable();
            t
        };
        Ok(NodeRule {
            node: k,
            model,
            left_treatments: side(node.left),
            right_treatments: side(node.right),
            n_lines: rows.len(),
        })
    }
}

/// Fits a tree rule on `rewards` over `grouping`, with features looked up
/// by line id.
pub fn fit_tree_itr(
    cfg: &ItrConfig,
    rewards: &CenteredRewards,
    grouping: &TreatmentGrouping,
    features: &FeatureMatrix,
    seed: u64,
) -> Result<TreeItr> {
    if grouping.nodes.is_empty() {
        return Err(Error::InvalidInput("grouping has no decision nodes".into()));
    }
    let x = aligned_features(features, &rewards.line_ids)?;
    let gr = group_rewards(rewards, grouping)?;
    let mut fitter = Fitter {
        cfg,
        grouping,
        x,
        gr,
        nodes: vec![None; grouping.nodes.len()],
    };
    for k in grouping.bottom_up() {
        let rule = fitter.fit_node(k, seed)?;
        fitter.nodes[k] = Some(rule);
    }

    let values = fitter.arm_values(Child::Node(0));
    let rows: Vec<usize> = (0..values.len()).filter(|&j| values[j].is_some()).collect();
    if rows.len() < 2 {
        return Err(Error::UnfittableNode {
            node: 0,
            reason: "too few lines for the null decision".into(),
        });
    }
    let y: Vec<f64> = rows.iter().map(|&j| values[j].expect("kept")).collect();
    let step0_learner = match &cfg.method {
        ItrMethod::QLearning { learner, .. } => learner,
        ItrMethod::Owl { step0, .. } => step0,
    };
    let step0 = step0_learner.fit(&fitter.x.select_rows(&rows), &y, rng::derive_seed(seed, 0xFFFF))?;
    Ok(TreeItr {
        grouping: grouping.clone(),
        feature_names: features.feature_names().to_vec(),
        config: cfg.clone(),
        nodes: fitter.nodes.into_iter().map(|n| n.expect("all fitted")).collect(),
        step0,
    })
}

pub fn fit_tree_qlearning(
    rewards: &CenteredRewards,
    grouping: &TreatmentGrouping,
    variant: QlVariant,
    learner: RegressorSpec,
    features: &FeatureMatrix,
    seed: u64,
) -> Result<TreeItr> {
    fit_tree_itr(
        &ItrConfig::qlearning(variant, learner),
        rewards,
        grouping,
        features,
        seed,
    )
}

pub fn fit_tree_owl(
    rewards: &CenteredRewards,
    grouping: &TreatmentGrouping,
    class: FunctionClass,
    lambda: f64,
    features: &FeatureMatrix,
    seed: u64,
) -> Result<TreeItr> {
    fit_tree_itr(&ItrConfig::owl(class, lambda), rewards, grouping, features, seed)
}

/// Single regression over (line, treatment) observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatItr {
    pub feature_names: Vec<String>,
    /// Candidate (non-null) treatment indices.
    pub treatments: Vec<usize>,
    /// Whether the design includes feature × treatment interactions.
    pub interactions: bool,
    pub model: Regressor,
}

impl FlatItr {
    fn design_row(&self, x: &[f64], k: usize, out: &mut Vec<f64>) {
        design_row(x, k, self.treatments.len(), self.interactions, out);
    }

    /// Predicted reward of every candidate treatment.
    pub fn predictions(&self, x: &[f64]) -> Vec<f64> {
        let mut row = Vec::new();
        (0..self.treatments.len())
            .map(|k| {
                row.clear();
                self.design_row(x, k, &mut row);
                self.model.predict_row(&row)
            })
            .collect()
    }

    /// Best treatment; ties go to the earlier one.
    pub fn recommend(&self, x: &[f64]) -> Result<usize> {
        TreatmentRule::check_width(self, x)?;
        let p = self.predictions(x);
        let mut best = 0;
        for k in 1..p.len() {
            if p[k] > p[best] {
                best = k;
            }
        }
        Ok(self.treatments[best])
    }
}

impl TreatmentRule for FlatItr {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn recommend_set(&self, x: &[f64]) -> Result<Vec<usize>> {
        Ok(vec![self.recommend(x)?])
    }
}

fn design_row(x: &[f64], k: usize, n_treatments: usize, interactions: bool, out: &mut Vec<f64>) {
    out.extend_from_slice(x);
    out.extend((0..n_treatments).map(|t| if t == k { 1.0 } else { 0.0 }));
    if interactions {
        for t in 0..n_treatments {
            if t == k {
                out.extend_from_slice(x);
            } else {
                out.extend(core::iter::repeat_n(0.0, x.len()));
            }
        }
    }
}

/// Regresses reward on features and treatment indicators (plus their
/// interactions for the lasso) and recommends the best predicted treatment.
pub fn fit_off_the_shelf(
    rewards: &CenteredRewards,
    features: &FeatureMatrix,
    learner: &RegressorSpec,
    seed: u64,
) -> Result<FlatItr> {
    let x = aligned_features(features, &rewards.line_ids)?;
    let interactions = matches!(learner, RegressorSpec::Lasso { .. });
    let nt = rewards.non_null.len();
    let width = x.cols() + nt + if interactions { nt * x.cols() } else { 0 };
    let mut data = Vec::new();
    let mut y = Vec::new();
    for j in 0..rewards.n_lines() {
        for k in 0..nt {
            if let Some(r) = rewards.r[k][j] {
                design_row(x.row(j), k, nt, interactions, &mut data);
                y.push(r);
            }
        }
    }
    let design = Matrix::from_vec(y.len(), width, data)?;
    Ok(FlatItr {
        feature_names: features.feature_names().to_vec(),
        treatments: rewards.non_null.clone(),
        interactions,
        model: learner.fit(&design, &y, seed)?,
    })
}
