//! Weighted ensembles of tree rules.
//!
//! Every sub-rule is fitted on the same grouping. The ensemble walks the
//! tree root-down, comparing weighted sums of the sub-rules' arm scores at
//! each node, and treats iff the weighted null-decision score is positive.
//! With a unit weight vector this reproduces the corresponding sub-rule
//! exactly, so vertex starts make the annealed weights at least as good as
//! the best single rule on the cross-validated objective.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    assign_folds, estimate_value, fold_data, split, summarize_values, FoldResult, ScreeningSpec, TuningPoint,
    ValueReport,
};
use crate::itr::{aligned_features, fit_tree_itr, ItrConfig, Recommendation, TreatmentRule, TreeItr};
use crate::learners::{smooth_outcomes, ForestParams};
use crate::math::{self, Matrix};
use crate::model::PdxDataset;
use crate::rng;
use crate::treatment_tree::{build_tree, cut_tree, fit_reward_transform, CenteredRewards, Child, TreatmentGrouping};

/// Score of `group` under `itr` at `x`: the arm score, at the group's parent
/// node, of the arm holding the group. Decision-function nodes give `f` to
/// the left arm and `-f` to the right.
pub fn latent_score(itr: &TreeItr, x: &[f64], group: usize) -> Result<f64> {
    itr.check_width(x)?;
    let (k, left) = itr.grouping.parent_of_group(group).ok_or(Error::UnknownGroup)?;
    let (l, r) = itr.nodes[k].model.arm_scores(x);
    Ok(if left { l } else { r })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    /// Random starts in addition to one start per simplex vertex.
    pub random_chains: usize,
    pub iterations: usize,
    /// Geometric cooling factor.
    pub gamma: f64,
    /// Sd of the Gaussian proposal before projection onto the simplex.
    pub step: f64,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            random_chains: 4,
            iterations: 2000,
            gamma: 0.95,
            step: 0.1,
            seed: 0,
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Per-line inputs of the ensemble decision, for one sub-rule.
#[derive(Debug, Clone, PartialEq)]
struct RuleScores {
    step0: f64,
    /// `(left, right)` arm scores at every node.
    arms: Vec<(f64, f64)>,
}

fn scores_of(itr: &TreeItr, x: &[f64]) -> RuleScores {
    RuleScores {
        step0: itr.step0_score(x),
        arms: itr.nodes.iter().map(|n| n.model.arm_scores(x)).collect(),
    }
}

/// Ensemble decision from per-rule scores; a unit weight reproduces the
/// rule it selects.
fn combine(grouping: &TreatmentGrouping, weights: &[f64], scores: &[RuleScores]) -> Recommendation {
    let step0: f64 = weights.iter().zip(scores).map(|(w, s)| w * s.step0).sum();
    if step0 <= 0.0 {
        return Recommendation::Null;
    }
    let mut at = Child::Node(0);
    loop {
        match at {
            Child::Group(g) => return Recommendation::Group(g),
            Child::Node(k) => {
                let (mut l, mut r) = (0.0, 0.0);
                for (w, s) in weights.iter().zip(scores) {
                    l += w * s.arms[k].0;
                    r += w * s.arms[k].1;
                }
                let n = &grouping.nodes[k];
                at = if l >= r { n.left } else { n.right };
            }
        }
    }
}

fn check_compatible(sub_itrs: &[TreeItr]) -> Result<()> {
    if sub_itrs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: sub_itrs.len(),
        });
    }
    let first = &sub_itrs[0];
    for s in &sub_itrs[1..] {
        if !s.grouping.same_structure(&first.grouping) || s.feature_names != first.feature_names {
            return Err(Error::IncompatibleGroupings);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct LineTable {
    rules: Vec<RuleScores>,
    /// Concordant reward sum and mouse count for each leaf group.
    groups: Vec<(f64, usize)>,
    null: (f64, usize),
}

/// Held-out scores of every sub-rule, ready for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    grouping: TreatmentGrouping,
    folds: Vec<Vec<LineTable>>,
}

impl ScoreTable {
    /// Adds one held-out fold: sub-rules fitted without these lines, and the
    /// lines' rewards and features.
    pub fn push_fold(&mut self, sub_itrs: &[TreeItr], rewards: &CenteredRewards, x: &Matrix) -> Result<()> {
        check_compatible(sub_itrs)?;
        if !sub_itrs[0].grouping.same_structure(&self.grouping) {
            return Err(Error::IncompatibleGroupings);
        }
        let sum = |set: &[usize], j: usize| {
            set.iter().fold((0.0, 0usize), |(s, n), &t| match rewards.reward(t, j) {
                Some(v) => (s + v, n + 1),
                None => (s, n),
            })
        };
        let mut lines = Vec::with_capacity(x.rows());
        for j in 0..x.rows() {
            let row = x.row(j);
            for s in sub_itrs {
                s.check_width(row)?;
            }
            lines.push(LineTable {
                rules: sub_itrs.iter().map(|s| scores_of(s, row)).collect(),
                groups: self.grouping.groups.iter().map(|g| sum(g, j)).collect(),
                null: sum(&self.grouping.null_group, j),
            });
        }
        self.folds.push(lines);
        Ok(())
    }

    pub fn new(grouping: TreatmentGrouping) -> Self {
        Self {
            grouping,
            folds: Vec::new(),
        }
    }

    /// Mean held-out value over folds with at least one concordant mouse.
    pub fn objective(&self, weights: &[f64]) -> Option<f64> {
        let mut vals = Vec::with_capacity(self.folds.len());
        for lines in &self.folds {
            let (mut s, mut n) = (0.0, 0usize);
            for line in lines {
                let (ls, ln) = match combine(&self.grouping, weights, &line.rules) {
                    Recommendation::Null => line.null,
                    Recommendation::Group(g) => line.groups[g],
                };
                s += ls;
                n += ln;
            }
            if n > 0 {
                vals.push(s / n as f64);
            }
        }
        (!vals.is_empty()).then(|| math::mean(&vals))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLearner {
    /// Sub-rules refitted on all lines.
    pub sub_itrs: Vec<TreeItr>,
    pub weights: Vec<f64>,
    pub sa: SaConfig,
    /// Cross-validated objective at the chosen weights, when fitted.
    pub cv_objective: Option<f64>,
    /// Objective of each sub-rule alone.
    pub vertex_objectives: Vec<f64>,
}

impl SuperLearner {
    pub fn from_parts(sub_itrs: Vec<TreeItr>, weights: Vec<f64>, sa: SaConfig) -> Result<Self> {
        check_compatible(&sub_itrs)?;
        if weights.len() != sub_itrs.len() {
            return Err(Error::WidthMismatch {
                expected: sub_itrs.len(),
                got: weights.len(),
            });
        }
        Ok(Self {
            sub_itrs,
            weights,
            sa,
            cv_objective: None,
            vertex_objectives: Vec::new(),
        })
    }

    pub fn grouping(&self) -> &TreatmentGrouping {
        &self.sub_itrs[0].grouping
    }
}

pub fn recommend_sl(sl: &SuperLearner, x: &[f64]) -> Result<Recommendation> {
    sl.check_width(x)?;
    let scores: Vec<RuleScores> = sl.sub_itrs.iter().map(|s| scores_of(s, x)).collect();
    Ok(combine(sl.grouping(), &sl.weights, &scores))
}

impl TreatmentRule for SuperLearner {
    fn feature_names(&self) -> &[String] {
        &self.sub_itrs[0].feature_names
    }

    fn recommend_set(&self, x: &[f64]) -> Result<Vec<usize>> {
        Ok(match recommend_sl(self, x)? {
            Recommendation::Null => self.grouping().null_group.clone(),
            Recommendation::Group(g) => self.grouping().groups[g].clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub vertex_objectives: Vec<f64>,
}

/// Maximizes `table.objective` over the simplex. Chains start at every
/// vertex and at `random_chains` random points; the best point seen by any
/// chain is returned, earliest chain first on ties.
pub fn anneal(table: &ScoreTable, m: usize, cfg: &SaConfig) -> Result<AnnealResult> {
    let f = |w: &[f64]| table.objective(w).unwrap_or(f64::NEG_INFINITY);
    let vertex = |i: usize| {
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        w
    };
    let vertex_objectives: Vec<f64> = (0..m).map(|i| f(&vertex(i))).collect();
    let finite: Vec<f64> = vertex_objectives.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::NoConcordantMice);
    }
    let spread = math::sd_sample(&finite);
    let t0 = if spread > 0.0 {
        spread
    } else {
        1e-3 * (1.0 + finite.iter().fold(0.0f64, |a, v| a.max(math::abs(*v))))
    };

    let mut starts: Vec<Vec<f64>> = (0..m).map(vertex).collect();
    let mut r = rng::seeded(rng::derive_seed(cfg.seed, 0x5A));
    for _ in 0..cfg.random_chains {
        let e: Vec<f64> = (0..m).map(|_| -math::ln(1.0 - rng::uniform(&mut r))).collect();
        let s: f64 = e.iter().sum();
        starts.push(e.iter().map(|v| v / s).collect());
    }

    let mut best = (vertex(0), vertex_objectives[0]);
    for (c, start) in starts.into_iter().enumerate() {
        let mut r = rng::seeded(rng::derive_seed(cfg.seed, c as u64));
        let mut w = start;
        let mut fw = f(&w);
        if fw > best.1 {
            best = (w.clone(), fw);
        }
        let mut temp = t0;
        for _ in 0..cfg.iterations {
            let proposal: Vec<f64> = w.iter().map(|v| v + cfg.step * rng::normal(&mut r)).collect();
            let proposal = project_to_simplex(&proposal);
            let fp = f(&proposal);
            let delta = fp - fw;
            let u = rng::uniform(&mut r);
            if delta >= 0.0 || (temp > 0.0 && u < math::exp(delta / temp)) {
                w = proposal;
                fw = fp;
                if fw > best.1 {
                    best = (w.clone(), fw);
                }
            }
            temp *= cfg.gamma;
        }
    }
    Ok(AnnealResult {
        weights: best.0,
        objective: best.1,
        vertex_objectives,
    })
}

/// Reference grouping shared by all sub-rules, built on the full data.
pub fn reference_grouping(dataset: &PdxDataset, c1: usize, c2: usize) -> Result<TreatmentGrouping> {
    let rewards = fit_reward_transform(dataset, c1)?.apply(dataset)?;
    cut_tree(&build_tree(&rewards)?, c2)
}

/// One ensemble member: a tree rule configuration, optionally fitted on
/// forest-smoothed outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlMember {
    pub config: ItrConfig,
    #[serde(default)]
    pub smoothed: bool,
}

impl From<ItrConfig> for SlMember {
    fn from(config: ItrConfig) -> Self {
        Self {
            config,
            smoothed: false,
        }
    }
}

/// Fits every member on `train`; smoothed members see forest-smoothed
/// outcomes, computed once and shared.
fn fit_members(
    members: &[SlMember],
    train: &PdxDataset,
    grouping: &TreatmentGrouping,
    smoothing: &ForestParams,
    seed: u64,
) -> Result<Vec<TreeItr>> {
    let raw = fit_reward_transform(train, grouping.c1)?.apply(train)?;
    let smoothed = if members.iter().any(|m| m.smoothed) {
        let s = smooth_outcomes(train, smoothing, rng::derive_seed(seed, 0x5300))?;
        Some(fit_reward_transform(&s, grouping.c1)?.apply(&s)?)
    } else {
        None
    };
    members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let rewards = if m.smoothed {
                smoothed.as_ref().expect("computed above")
            } else {
                &raw
            };
            fit_tree_itr(
                &m.config,
                rewards,
                grouping,
                train.features(),
                rng::derive_seed(seed, i as u64),
            )
        })
        .collect()
}

/// Held-out score table of `members` over `k` line folds. Folds where any
/// member cannot be fitted are left out and reported.
pub fn cv_score_table(
    members: &[SlMember],
    dataset: &PdxDataset,
    grouping: &TreatmentGrouping,
    k: usize,
    smoothing: &ForestParams,
    seed: u64,
) -> Result<(ScoreTable, Vec<(usize, String)>)> {
    let m = dataset.m();
    if k < 2 || k > m {
        return Err(Error::OutOfRange {
            what: "folds",
            value: k,
            min: 2,
            max: m,
        });
    }
    let fold = assign_folds(m, k, seed);
    let mut table = ScoreTable::new(grouping.clone());
    let mut skipped = Vec::new();
    for f in 0..k {
        let (tr, te) = split(&fold, f);
        let outcome = (|| -> Result<()> {
            let train = dataset.select_lines(&tr);
            let test = dataset.select_lines(&te);
            let fitted = fit_members(members, &train, grouping, smoothing, rng::derive_seed(seed, f as u64))?;
            let held = fit_reward_transform(&train, grouping.c1)?.apply(&test)?;
            let x = aligned_features(test.features(), &held.line_ids)?;
            table.push_fold(&fitted, &held, &x)
        })();
        if let Err(e) = outcome {
            skipped.push((f, format!("{e}")));
        }
    }
    Ok((table, skipped))
}

/// Fits the ensemble: cross-validated scores, annealed weights, and
/// sub-rules refitted on all lines.
pub fn fit_superlearner(
    members: &[SlMember],
    dataset: &PdxDataset,
    grouping: &TreatmentGrouping,
    folds: usize,
    sa: &SaConfig,
    smoothing: &ForestParams,
) -> Result<SuperLearner> {
    if members.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: members.len(),
        });
    }
    let (table, _) = cv_score_table(members, dataset, grouping, folds, smoothing, sa.seed)?;
    let annealed = anneal(&table, members.len(), sa)?;
    let sub_itrs = fit_members(members, dataset, grouping, smoothing, rng::derive_seed(sa.seed, 0xA000))?;
    check_compatible(&sub_itrs)?;
    Ok(SuperLearner {
        sub_itrs,
        weights: annealed.weights,
        sa: *sa,
        cv_objective: Some(annealed.objective),
        vertex_objectives: annealed.vertex_objectives,
    })
}

/// Ensemble members and settings for cross-validated evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLearnerSpec {
    pub name: String,
    pub members: Vec<SlMember>,
    pub c1: usize,
    pub c2: usize,
    /// Folds used inside each training split to fit the weights.
    pub inner_folds: usize,
    #[serde(default)]
    pub sa: SaConfig,
    #[serde(default)]
    pub screening: Option<ScreeningSpec>,
    /// Forest used for smoothed members.
    #[serde(default)]
    pub smoothing: ForestParams,
}

/// Outer `k`-fold value of the ensemble; weights and sub-rules are refitted
/// inside every training split.
pub fn cross_validate_superlearner(
    spec: &SuperLearnerSpec,
    data: &PdxDataset,
    k: usize,
    seed: u64,
) -> Result<ValueReport> {
    let m = data.m();
    if k < 2 || k > m {
        return Err(Error::OutOfRange {
            what: "folds",
            value: k,
            min: 2,
            max: m,
        });
    }
    let fold = assign_folds(m, k, seed);
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for f in 0..k {
        let fold_seed = rng::derive_seed(seed, 1000 + f as u64);
        let (tr_idx, te_idx) = split(&fold, f);
        let outcome = (|| -> Result<FoldResult> {
            let (train, test) = fold_data(spec.screening.as_ref(), None, data, &tr_idx, &te_idx, fold_seed)?;
            let grouping = reference_grouping(&train, spec.c1, spec.c2)?;
            let sa = SaConfig {
                seed: fold_seed,
                ..spec.sa
            };
            let sl = fit_superlearner(
                &spec.members,
                &train,
                &grouping,
                spec.inner_folds.min(train.m()),
                &sa,
                &spec.smoothing,
            )?;
            let rewards = fit_reward_transform(&train, spec.c1)?.apply(&test)?;
            let value = estimate_value(&sl, test.features(), &rewards)?;
            let (v_obs, v_opt) = summarize_values(&rewards);
            Ok(FoldResult {
                fold: f,
                chosen: TuningPoint {
                    c1: spec.c1,
                    c2: Some(spec.c2),
                    lambda: None,
                },
                value,
                v_obs,
                v_opt,
                n_lines: te_idx.len(),
            })
        })();
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => skipped.push((f, format!("{e}"))),
        }
    }
    Ok(ValueReport::from_folds(
        spec.name.clone(),
        spec.screening.as_ref().map(|s| s.l_sup),
        seed,
        k,
        results,
        skipped,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::estimate_value;
    use crate::itr::{NodeModel, NodeRule, QlVariant};
    use crate::learners::classifier::{DecisionForm, DecisionFunction, FunctionClass};
    use crate::learners::{LinearModel, Regressor, RegressorSpec};
    use crate::model::{FeatureMatrix, TreatmentId};
    use crate::synthetic::{generate, SyntheticConfig};
    use crate::treatment_tree::DecisionNode;
    use proptest::prelude::*;

    fn lin(intercept: f64, coefficients: Vec<f64>) -> Regressor {
        Regressor::Lasso(LinearModel {
            intercept,
            coefficients,
            lambda: 0.0,
        })
    }

    fn treatments(j: usize) -> Vec<TreatmentId> {
        let mut t = vec![TreatmentId::untreated("U")];
        t.extend((1..=j).map(|i| TreatmentId::new(format!("T{i}"))));
        t
    }

    /// Root splits group 0 from a node over groups 1 and 2.
    fn three_groups() -> TreatmentGrouping {
        TreatmentGrouping {
            treatments: treatments(3),
            null_group: vec![0],
            groups: vec![vec![1], vec![2], vec![3]],
            nodes: vec![
                DecisionNode {
                    dendrogram_id: 6,
                    left: Child::Group(0),
                    right: Child::Node(1),
                    height: 2.0,
                },
                DecisionNode {
                    dendrogram_id: 5,
                    left: Child::Group(1),
                    right: Child::Group(2),
                    height: 1.0,
                },
            ],
            c1: 0,
            c2: 2,
        }
    }

    fn two_groups() -> TreatmentGrouping {
        TreatmentGrouping {
            treatments: treatments(2),
            null_group: vec![0],
            groups: vec![vec![1], vec![2]],
            nodes: vec![DecisionNode {
                dendrogram_id: 2,
                left: Child::Group(0),
                right: Child::Group(1),
                height: 1.0,
            }],
            c1: 0,
            c2: 1,
        }
    }

    fn regression_itr(grouping: TreatmentGrouping, arms: Vec<(Regressor, Regressor)>, step0: Regressor) -> TreeItr {
        let width = step0.width();
        TreeItr {
            feature_names: (0..width).map(|k| format!("G{k}.rna")).collect(),
            nodes: arms
                .into_iter()
                .enumerate()
                .map(|(k, (left, right))| NodeRule {
                    node: k,
                    model: NodeModel::Regression { left, right },
                    left_treatments: vec![],
                    right_treatments: vec![],
                    n_lines: 0,
                })
                .collect(),
            grouping,
            config: ItrConfig::qlearning(QlVariant::Ql1, RegressorSpec::lasso(0.1)),
            step0,
        }
    }

    #[test]
    fn latent_scores_read_off_the_parent_node() {
        let itr = regression_itr(
            two_groups(),
            vec![(lin(0.8, vec![0.0]), lin(0.2, vec![0.0]))],
            lin(1.0, vec![0.0]),
        );
        assert_eq!(latent_score(&itr, &[3.0], 0).unwrap(), 0.8);
        assert_eq!(latent_score(&itr, &[3.0], 1).unwrap(), 0.2);
        assert_eq!(latent_score(&itr, &[3.0], 2), Err(Error::UnknownGroup));

        let mut owl = itr.clone();
        owl.nodes[0].model = NodeModel::Decision {
            function: DecisionFunction {
                form: DecisionForm::Linear {
                    weights: vec![0.0],
                    bias: 0.4,
                },
                lambda: 1.0,
                means: vec![0.0],
                sds: vec![1.0],
            },
        };
        assert!((latent_score(&owl, &[1.0], 0).unwrap() - 0.4).abs() < 1e-12);
        assert!((latent_score(&owl, &[1.0], 1).unwrap() + 0.4).abs() < 1e-12);

        let deep = regression_itr(
            three_groups(),
            vec![
                (lin(0.1, vec![1.0]), lin(0.2, vec![0.0])),
                (lin(0.3, vec![0.0]), lin(0.0, vec![-2.0])),
            ],
            lin(1.0, vec![0.0]),
        );
        // group 0 hangs off the root; groups 1 and 2 off node 1
        assert!((latent_score(&deep, &[0.5], 0).unwrap() - 0.6).abs() < 1e-12);
        assert!((latent_score(&deep, &[0.5], 1).unwrap() - 0.3).abs() < 1e-12);
        assert!((latent_score(&deep, &[0.5], 2).unwrap() + 1.0).abs() < 1e-12);
    }

    fn pair() -> SuperLearner {
        let a = regression_itr(
            three_groups(),
            vec![
                (lin(0.1, vec![1.0]), lin(0.2, vec![0.0])),
                (lin(0.3, vec![0.0]), lin(0.0, vec![-2.0])),
            ],
            lin(1.0, vec![0.0]),
        );
        let b = regression_itr(
            three_groups(),
            vec![
                (lin(0.0, vec![0.0]), lin(1.0, vec![0.0])),
                (lin(0.0, vec![0.0]), lin(0.5, vec![0.0])),
            ],
            lin(-0.5, vec![0.0]),
        );
        SuperLearner::from_parts(vec![a, b], vec![0.5, 0.5], SaConfig::default()).unwrap()
    }

    #[test]
    fn weighted_sum_hand_trace() {
        let mut sl = pair();
        // x = 0.5: step0 = 0.25 > 0; root l = 0.3, r = 0.6 goes right;
        // node 1 l = 0.15, r = -0.25 goes left: group 1
        assert_eq!(recommend_sl(&sl, &[0.5]).unwrap(), Recommendation::Group(1));
        // x = -1: root l = -0.45, r = 0.6; node 1 l = 0.15, r = 1.25: group 2
        assert_eq!(recommend_sl(&sl, &[-1.0]).unwrap(), Recommendation::Group(2));
        sl.weights = vec![0.2, 0.8];
        // step0 = 0.2 - 0.4 < 0
        assert_eq!(recommend_sl(&sl, &[0.5]).unwrap(), Recommendation::Null);
        assert!(matches!(
            recommend_sl(&sl, &[0.5, 1.0]),
            Err(Error::WidthMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_scores_go_to_the_left_group() {
        let itr = regression_itr(
            two_groups(),
            vec![(lin(0.5, vec![0.0]), lin(0.5, vec![0.0]))],
            lin(1.0, vec![0.0]),
        );
        let sl = SuperLearner::from_parts(vec![itr.clone(), itr], vec![0.3, 0.7], SaConfig::default()).unwrap();
        assert_eq!(recommend_sl(&sl, &[2.0]).unwrap(), Recommendation::Group(0));
    }

    #[test]
    fn incompatible_groupings_rejected() {
        let a = regression_itr(
            two_groups(),
            vec![(lin(0.5, vec![0.0]), lin(0.5, vec![0.0]))],
            lin(1.0, vec![0.0]),
        );
        let b = pair().sub_itrs[0].clone();
        assert_eq!(
            SuperLearner::from_parts(vec![a, b], vec![0.5, 0.5], SaConfig::default()),
            Err(Error::IncompatibleGroupings)
        );
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_to_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.6, 0.6]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    /// Sub-rule 0 is right for x > 0 and sub-rule 1 for x < 0; each scores
    /// with confidence only on its own half.
    #[test]
    fn complementary_rules_combine_beyond_either() {
        let m = 40;
        let xs: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / m as f64).collect();
        // features (x, |x|); each rule leans 0.1 toward its wrong arm on the
        // half it does not cover
        let a = regression_itr(
            two_groups(),
            vec![(lin(0.1, vec![1.0, 1.0]), lin(0.0, vec![0.0, 0.0]))],
            lin(1.0, vec![0.0, 0.0]),
        );
        let b = regression_itr(
            two_groups(),
            vec![(lin(0.0, vec![0.0, 0.0]), lin(0.1, vec![-1.0, 1.0]))],
            lin(1.0, vec![0.0, 0.0]),
        );
        // truth: group 0 best iff x > 0
        let mut r0 = Vec::new();
        let mut r1 = Vec::new();
        let mut x = Matrix::zeros(m, 2);
        for (i, &v) in xs.iter().enumerate() {
            x[(i, 0)] = v;
            x[(i, 1)] = math::abs(v);
            r0.push(Some(if v > 0.0 { 1.0 } else { -1.0 }));
            r1.push(Some(if v > 0.0 { -1.0 } else { 1.0 }));
        }
        let rewards = CenteredRewards {
            treatments: treatments(2),
            line_ids: (0..m).map(|i| format!("L{i}")).collect(),
            null_group: vec![0],
            non_null: vec![1, 2],
            r: vec![r0, r1],
            null_rewards: vec![vec![Some(0.0); m]],
            null_mean: vec![Some(0.0); m],
            scale: vec![1.0; 3],
            c1: 0,
        };
        let mut table = ScoreTable::new(two_groups());
        table.push_fold(&[a.clone(), b.clone()], &rewards, &x).unwrap();
        let fm = FeatureMatrix::new(rewards.line_ids.clone(), a.feature_names.clone(), x.clone()).unwrap();
        // the table objective agrees with the direct value estimate at vertices
        let va = estimate_value(&a, &fm, &rewards).unwrap();
        let vb = estimate_value(&b, &fm, &rewards).unwrap();
        assert!((table.objective(&[1.0, 0.0]).unwrap() - va).abs() < 1e-12);
        assert!((table.objective(&[0.0, 1.0]).unwrap() - vb).abs() < 1e-12);
        assert!(va < 1.0 && vb < 1.0);
        let res = anneal(
            &table,
            2,
            &SaConfig {
                iterations: 300,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.objective >= va.max(vb));
        assert!((res.objective - 1.0).abs() < 1e-12, "{res:?}");
    }

    #[test]
    fn fitted_superlearner_dominates_its_vertices() {
        let (d, _) = generate(&SyntheticConfig::three_groups(30, 6, 0.3, 8)).unwrap();
        let grouping = reference_grouping(&d, 0, 2).unwrap();
        let configs = vec![
            ItrConfig::qlearning(QlVariant::Ql1, RegressorSpec::lasso(0.05)),
            ItrConfig::qlearning(QlVariant::Ql2, RegressorSpec::lasso(0.3)),
            ItrConfig::owl(FunctionClass::Linear, 0.1),
        ];
        let sa = SaConfig {
            iterations: 200,
            seed: 4,
            ..Default::default()
        };
        let members: Vec<SlMember> = configs.into_iter().map(Into::into).collect();
        let sl = fit_superlearner(&members, &d, &grouping, 5, &sa, &ForestParams::default()).unwrap();
        let best_vertex = sl.vertex_objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(sl.cv_objective.unwrap() >= best_vertex);
        let s: f64 = sl.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-9 && sl.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn unit_weights_reproduce_each_fitted_rule() {
        let (d, _) = generate(&SyntheticConfig::three_groups(30, 6, 0.3, 9)).unwrap();
        let grouping = reference_grouping(&d, 0, 2).unwrap();
        let rewards = fit_reward_transform(&d, 0).unwrap().apply(&d).unwrap();
        let fitted: Vec<TreeItr> = [
            ItrConfig::qlearning(QlVariant::Ql1, RegressorSpec::lasso(0.05)),
            ItrConfig::owl(FunctionClass::Gaussian { bandwidth: None }, 0.1),
        ]
        .iter()
        .map(|c| fit_tree_itr(c, &rewards, &grouping, d.features(), 1).unwrap())
        .collect();
        for i in 0..2 {
            let mut w = vec![0.0; 2];
            w[i] = 1.0;
            let sl = SuperLearner::from_parts(fitted.clone(), w, SaConfig::default()).unwrap();
            for j in 0..d.m() {
                let x = d.features().values().row(j);
                assert_eq!(recommend_sl(&sl, x).unwrap(), fitted[i].recommend(x).unwrap());
            }
        }
    }

    #[test]
    fn nested_evaluation_runs() {
        let (d, _) = generate(&SyntheticConfig::three_groups(30, 6, 0.2, 12)).unwrap();
        let spec = SuperLearnerSpec {
            name: "sl2".into(),
            members: vec![
                ItrConfig::qlearning(QlVariant::Ql1, RegressorSpec::lasso(0.05)).into(),
                SlMember {
                    config: ItrConfig::qlearning(QlVariant::Ql1, RegressorSpec::lasso(0.05)),
                    smoothed: true,
                },
                ItrConfig::owl(FunctionClass::Linear, 0.1).into(),
            ],
            c1: 0,
            c2: 2,
            inner_folds: 3,
            sa: SaConfig {
                iterations: 100,
                ..Default::default()
            },
            screening: None,
            smoothing: ForestParams {
                n_trees: 20,
                ..Default::default()
            },
        };
        let a = cross_validate_superlearner(&spec, &d, 3, 2).unwrap();
        assert_eq!(a.per_fold_values.len() + a.skipped_folds.len(), 3);
        assert!(!a.per_fold_values.is_empty());
        assert_eq!(a, cross_validate_superlearner(&spec, &d, 3, 2).unwrap());
    }

    proptest! {
        #[test]
        fn projection_lands_on_the_simplex(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_to_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn common_rescaling_keeps_recommendations(e in -8i32..8, x in -2.0f64..2.0, w0 in 0.0f64..1.0) {
            let sl = {
                let mut s = pair();
                s.weights = vec![w0, 1.0 - w0];
                s
            };
            let c = libm::exp2(e as f64);
            let mut scaled = sl.clone();
            for itr in &mut scaled.sub_itrs {
                for n in &mut itr.nodes {
                    if let NodeModel::Regression { left: Regressor::Lasso(l), right: Regressor::Lasso(r) } = &mut n.model {
                        for m in [l, r] {
                            m.intercept *= c;
                            m.coefficients.iter_mut().for_each(|v| *v *= c);
                        }
                    }
                }
                if let Regressor::Lasso(s0) = &mut itr.step0 {
                    s0.intercept *= c;
                    s0.coefficients.iter_mut().for_each(|v| *v *= c);
                }
            }
            prop_assert_eq!(recommend_sl(&sl, &[x]).unwrap(), recommend_sl(&scaled, &[x]).unwrap());
        }
    }
}
