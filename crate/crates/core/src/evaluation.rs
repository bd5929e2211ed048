//! Value estimation, nested cross-validation and tuning.
//!
//! A rule's value on a set of lines is the mean centered reward over the
//! mice whose treatment lies in the group recommended for their line. Lines
//! are the unit of resampling; rewards on held-out lines are standardized
//! and centered with the transform fitted on the training lines.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::itr::{
    aligned_features, fit_off_the_shelf, fit_tree_itr, FlatItr, ItrConfig, ItrMethod, Propagation, QlVariant,
    TreatmentRule, TreeItr,
};
use crate::learners::classifier::FunctionClass;
use crate::learners::lasso::lambda_grid;
use crate::learners::{smooth_outcomes, ForestParams, RegressorSpec};
use crate::math;
use crate::model::{FeatureMatrix, PdxDataset};
use crate::rng;
use crate::screening::{rank_genes, select_top, ScreeningMode};
use crate::treatment_tree::{
    build_tree, cut_tree, fit_reward_transform, CenteredRewards, RewardTransform, TreatmentGrouping,
};

/// Mean reward over concordant mice, given each line's recommended set of
/// treatment indices (`recommended[j]` for `rewards.line_ids[j]`).
pub fn estimate_value_from_sets(rewards: &CenteredRewards, recommended: &[Vec<usize>]) -> Result<f64> {
    if recommended.len() != rewards.n_lines() {
        return Err(Error::WidthMismatch {
            expected: rewards.n_lines(),
            got: recommended.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (j, set) in recommended.iter().enumerate() {
        let mut set = set.clone();
        set.sort_unstable();
        set.dedup();
        for t in set {
            if let Some(r) = rewards.reward(t, j) {
                sum += r;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoConcordantMice);
    }
    Ok(sum / count as f64)
}

/// Value of `rule` on the lines of `rewards`, features looked up by line.
pub fn estimate_value<R: TreatmentRule + ?Sized>(
    rule: &R,
    features: &FeatureMatrix,
    rewards: &CenteredRewards,
) -> Result<f64> {
    let x = aligned_features(features, &rewards.line_ids)?;
    let sets = (0..x.rows())
        .map(|j| rule.recommend_set(x.row(j)))
        .collect::<Result<Vec<_>>>()?;
    estimate_value_from_sets(rewards, &sets)
}

/// `(v_obs, v_opt)`: the mean of all non-null rewards, and the mean over
/// lines of each line's best non-null reward.
pub fn summarize_values(rewards: &CenteredRewards) -> (f64, f64) {
    let mut obs_sum = 0.0;
    let mut obs_n = 0usize;
    let mut opt_sum = 0.0;
    let mut opt_n = 0usize;
    for j in 0..rewards.n_lines() {
        let mut best: Option<f64> = None;
        for row in &rewards.r {
            if let Some(v) = row[j] {
                obs_sum += v;
                obs_n += 1;
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        if let Some(b) = best {
            opt_sum += b;
            opt_n += 1;
        }
    }
    let ratio = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    (ratio(obs_sum, obs_n), ratio(opt_sum, opt_n))
}

/// The observed-best non-null treatment of every line (first on ties).
pub fn observed_best_sets(rewards: &CenteredRewards) -> Vec<Vec<usize>> {
    (0..rewards.n_lines())
        .map(|j| {
            let mut best: Option<(f64, usize)> = None;
            for (k, row) in rewards.r.iter().enumerate() {
                if let Some(v) = row[j] {
                    if best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, rewards.non_null[k]));
                    }
                }
            }
            best.map(|(_, t)| vec![t]).unwrap_or_default()
        })
        .collect()
}

/// Fold index of every line: a seeded shuffle dealt round-robin.
pub fn assign_folds(m: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    rng::shuffle(&mut rng::seeded(seed), &mut order);
    let mut fold = vec![0; m];
    for (pos, &line) in order.iter().enumerate() {
        fold[line] = pos % k;
    }
    fold
}

/// Training and held-out line indices of fold `f`.
pub fn split(fold: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..fold.len()).partition(|&j| fold[j] != f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    Lasso,
    Forest { params: ForestParams },
}

impl Learner {
    fn spec(&self, lambda: Option<f64>) -> RegressorSpec {
        match self {
            Learner::Lasso => RegressorSpec::lasso(lambda.unwrap_or(0.1)),
            Learner::Forest { params } => RegressorSpec::Forest { params: params.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    TreeQl {
        variant: QlVariant,
        learner: Learner,
        #[serde(default)]
        propagation: Propagation,
    },
    TreeOwl {
        class: FunctionClass,
        #[serde(default)]
        propagation: Propagation,
    },
    /// Off-the-shelf regression over treatment indicators.
    Flat { learner: Learner },
}

impl Method {
    fn uses_lambda(&self) -> bool {
        matches!(
            self,
            Method::TreeQl {
                learner: Learner::Lasso,
                ..
            } | Method::TreeOwl { .. }
                | Method::Flat {
                    learner: Learner::Lasso
                }
        )
    }

    fn uses_tree(&self) -> bool {
        !matches!(self, Method::Flat { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Method::TreeQl { variant, learner, .. } => {
                let v = match variant {
                    QlVariant::Ql1 => "ql1",
                    QlVariant::Ql2 => "ql2",
                };
                match learner {
                    Learner::Lasso => v.to_string(),
                    Learner::Forest { .. } => format!("{v}_rf"),
                }
            }
            Method::TreeOwl { class, .. } => match class {
                FunctionClass::Linear => "owl_linear".into(),
                FunctionClass::Gaussian { .. } => "owl_gaussian".into(),
            },
            Method::Flat { learner } => match learner {
                Learner::Lasso => "lasso".into(),
                Learner::Forest { .. } => "rf".into(),
            },
        }
    }

    /// Tree rule configuration at a tuning point.
    pub fn itr_config(&self, lambda: Option<f64>) -> Option<ItrConfig> {
        match self {
            Method::TreeQl {
                variant,
                learner,
                propagation,
            } => Some(ItrConfig {
                method: ItrMethod::QLearning {
                    variant: *variant,
                    learner: learner.spec(lambda),
                },
                propagation: *propagation,
            }),
            Method::TreeOwl { class, propagation } => {
                let mut cfg = ItrConfig::owl(*class, lambda.unwrap_or(0.1));
                cfg.propagation = *propagation;
                Some(cfg)
            }
            Method::Flat { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub c1: Vec<usize>,
    pub c2: Vec<usize>,
    /// Lasso penalty as a fraction of `lambda_max`, or the OWL penalty
    /// multiple; ignored by forests.
    pub lambda: Vec<f64>,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self {
            c1: vec![0, 1],
            c2: vec![1, 2, 3],
            lambda: lambda_grid(1.0, 20, 1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub c1: usize,
    pub c2: Option<usize>,
    pub lambda: Option<f64>,
}

impl TuningPoint {
    /// Orders points by preference among equal values: smaller c2, then
    /// smaller c1, then larger lambda.
    fn parsimony_cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.c2.cmp(&other.c2).then(self.c1.cmp(&other.c1)).then_with(|| {
            let a = self.lambda.unwrap_or(0.0);
            let b = other.lambda.unwrap_or(0.0);
            b.total_cmp(&a)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningSpec {
    pub l_sup: usize,
    #[serde(default)]
    pub mode: ScreeningMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub grid: TuningGrid,
    /// Denoise training outcomes with a forest before fitting.
    #[serde(default)]
    pub smoothing: Option<ForestParams>,
    #[serde(default)]
    pub screening: Option<ScreeningSpec>,
    pub inner_folds: usize,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            grid: TuningGrid::default(),
            smoothing: None,
            screening: None,
            inner_folds: 3,
        }
    }

    pub fn label(&self) -> String {
        let mut s = self.method.label();
        if self.smoothing.is_some() {
            s.push_str("_smoothed");
        }
        s
    }

    /// Grid points, with dimensions the method ignores collapsed.
    pub fn points(&self) -> Vec<TuningPoint> {
        let c2: Vec<Option<usize>> = if self.method.uses_tree() {
            self.grid.c2.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let lambda: Vec<Option<f64>> = if self.method.uses_lambda() {
            self.grid.lambda.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for &c1 in &self.grid.c1 {
            for &c in &c2 {
                for &l in &lambda {
                    out.push(TuningPoint { c1, c2: c, lambda: l });
                }
            }
        }
        out
    }
}

/// A fitted rule and the reward transform of its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedRule {
    Tree { itr: TreeItr, transform: RewardTransform },
    Flat { itr: FlatItr, transform: RewardTransform },
}

impl FittedRule {
    pub fn transform(&self) -> &RewardTransform {
        match self {
            FittedRule::Tree { transform, .. } | FittedRule::Flat { transform, .. } => transform,
        }
    }

    pub fn rule(&self) -> &dyn TreatmentRule {
        match self {
            FittedRule::Tree { itr, .. } => itr,
            FittedRule::Flat { itr, .. } => itr,
        }
    }

    /// Value on `data`, whose rewards are built with the training transform.
    pub fn evaluate(&self, data: &PdxDataset) -> Result<(f64, CenteredRewards)> {
        let rewards = self.transform().apply(data)?;
        let v = estimate_value(self.rule(), data.features(), &rewards)?;
        Ok((v, rewards))
    }
}

/// Reward transform and (for tree methods) grouping at fixed `c1`, `c2`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub transform: RewardTransform,
    pub rewards: CenteredRewards,
    pub grouping: Option<TreatmentGrouping>,
}

pub fn prepare(data: &PdxDataset, c1: usize, c2: Option<usize>) -> Result<Prepared> {
    let transform = fit_reward_transform(data, c1)?;
    let rewards = transform.apply(data)?;
    let grouping = match c2 {
        Some(c2) => Some(cut_tree(&build_tree(&rewards)?, c2)?),
        None => None,
    };
    Ok(Prepared {
        transform,
        rewards,
        grouping,
    })
}

fn fit_prepared(
    method: &Method,
    prep: &Prepared,
    lambda: Option<f64>,
    features: &FeatureMatrix,
    seed: u64,
) -> Result<FittedRule> {
    match (method.itr_config(lambda), &prep.grouping) {
        (Some(cfg), Some(grouping)) => Ok(FittedRule::Tree {
            itr: fit_tree_itr(&cfg, &prep.rewards, grouping, features, seed)?,
            transform: prep.transform.clone(),
        }),
        (None, _) => {
            let Method::Flat { learner } = method else {
                unreachable!("non-tree methods are flat")
            };
            Ok(FittedRule::Flat {
                itr: fit_off_the_shelf(&prep.rewards, features, &learner.spec(lambda), seed)?,
                transform: prep.transform.clone(),
            })
        }
        (Some(_), None) => Err(Error::InvalidInput("tree method needs a c2 value".into())),
    }
}

/// Fits `method` at one tuning point.
pub fn fit_at(method: &Method, point: &TuningPoint, data: &PdxDataset, seed: u64) -> Result<FittedRule> {
    let prep = prepare(data, point.c1, point.c2)?;
    fit_prepared(method, &prep, point.lambda, data.features(), seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub point: TuningPoint,
    /// Mean inner validation value, or the failure cause.
    pub value: core::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: TuningPoint,
    pub scores: Vec<GridScore>,
}

/// Inner `K'`-fold selection over the grid; the highest mean validation
/// value wins and exact ties go to the most parsimonious point.
pub fn tune(spec: &MethodSpec, data: &PdxDataset, seed: u64) -> Result<TuneResult> {
    let points = spec.points();
    if points.is_empty() {
        return Err(Error::InvalidInput("empty tuning grid".into()));
    }
    if points.len() == 1 {
        return Ok(TuneResult {
            best: points[0],
            scores: Vec::new(),
        });
    }
    let m = data.m();
    let k = spec.inner_folds.min(m);
    if k < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: m });
    }
    let fold = assign_folds(m, k, rng::derive_seed(seed, 0x1EE));
    let splits: Vec<(PdxDataset, PdxDataset)> = (0..k)
        .map(|f| {
            let (tr, va) = split(&fold, f);
            (data.select_lines(&tr), data.select_lines(&va))
        })
        .collect();

    let mut prepared: BTreeMap<(usize, usize, Option<usize>), core::result::Result<Prepared, String>> = BTreeMap::new();
    let mut scores = Vec::with_capacity(points.len());
    for point in &points {
        let mut vals = Vec::new();
        let mut causes = Vec::new();
        for (f, (train, valid)) in splits.iter().enumerate() {
            let prep = prepared
                .entry((f, point.c1, point.c2))
                .or_insert_with(|| prepare(train, point.c1, point.c2).map_err(|e| e.to_string()));
            let outcome = match prep {
                Ok(prep) => fit_prepared(
                    &spec.method,
                    prep,
                    point.lambda,
                    train.features(),
                    rng::derive_seed(seed, f as u64),
                )
                .and_then(|rule| rule.evaluate(valid))
                .map(|(v, _)| v)
                .map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            match outcome {
                Ok(v) => vals.push(v),
                Err(e) => causes.push(e),
            }
        }
        let value = if vals.is_empty() {
            Err(causes.first().cloned().unwrap_or_else(|| "no folds".into()))
        } else {
            Ok(math::mean(&vals))
        };
        scores.push(GridScore { point: *point, value });
    }

    let mut best: Option<(f64, TuningPoint)> = None;
    for s in &scores {
        if let Ok(v) = s.value {
            let better = match best {
                None => true,
                Some((bv, bp)) => v > bv || (v == bv && s.point.parsimony_cmp(&bp).is_lt()),
            };
            if better {
                best = Some((v, s.point));
            }
        }
    }
    match best {
        Some((_, point)) => Ok(TuneResult { best: point, scores }),
        None => Err(Error::AllGridPointsFailed(
            scores
                .iter()
                .filter_map(|s| s.value.as_ref().err().map(|e| format!("{:?}: {e}", s.point)))
                .collect(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub chosen: TuningPoint,
    pub value: f64,
    pub v_obs: f64,
    pub v_opt: f64,
    pub n_lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub method: String,
    pub l_sup: Option<usize>,
    pub seed: u64,
    pub folds: usize,
    pub per_fold_values: Vec<f64>,
    pub fold_results: Vec<FoldResult>,
    /// Folds that produced no value, with the reason.
    pub skipped_folds: Vec<(usize, String)>,
    pub v_bar: f64,
    /// Sample sd across evaluated folds (zero with fewer than two).
    pub sd: f64,
    pub v_obs: f64,
    pub v_opt: f64,
    pub p_opt: Option<f64>,
    pub p_obs: Option<f64>,
}

impl ValueReport {
    /// Assembles the summary; `v_obs`/`v_opt` average the fold-wise values.
    pub fn from_folds(
        method: String,
        l_sup: Option<usize>,
        seed: u64,
        folds: usize,
        fold_results: Vec<FoldResult>,
        skipped_folds: Vec<(usize, String)>,
    ) -> Self {
        let per_fold_values: Vec<f64> = fold_results.iter().map(|f| f.value).collect();
        let v_bar = math::mean(&per_fold_values);
        let sd = math::sd_sample(&per_fold_values);
        let v_obs = math::mean(&fold_results.iter().map(|f| f.v_obs).collect::<Vec<_>>());
        let v_opt = math::mean(&fold_results.iter().map(|f| f.v_opt).collect::<Vec<_>>());
        let ratio = |d: f64| (d != 0.0 && !per_fold_values.is_empty()).then(|| v_bar / d);
        Self {
            method,
            l_sup,
            seed,
            folds,
            p_opt: ratio(v_opt),
            p_obs: ratio(v_obs),
            per_fold_values,
            fold_results,
            skipped_folds,
            v_bar,
            sd,
            v_obs,
            v_opt,
        }
    }
}

/// Training and held-out data of one outer fold after the optional
/// screening and smoothing steps, which only look at training lines.
pub fn fold_data(
    screening: Option<&ScreeningSpec>,
    smoothing: Option<&ForestParams>,
    data: &PdxDataset,
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<(PdxDataset, PdxDataset)> {
    let mut tr = data.select_lines(train);
    let mut te = data.select_lines(test);
    if let Some(sc) = screening {
        let ranked = rank_genes(&tr, sc.mode)?;
        let keep = select_top(&ranked, tr.features().feature_names(), sc.l_sup)?;
        tr = tr.with_features(tr.features().select_named(&keep.feature_names)?)?;
        te = te.with_features(te.features().select_named(&keep.feature_names)?)?;
    }
    if let Some(params) = smoothing {
        tr = smooth_outcomes(&tr, params, rng::derive_seed(seed, 0x5300))?;
    }
    Ok((tr, te))
}

/// Outer `k`-fold estimate of the value of `spec`, tuning inside every
/// training split.
pub fn cross_validate(spec: &MethodSpec, data: &PdxDataset, k: usize, seed: u64) -> Result<ValueReport> {
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
            let (train, test) = fold_data(
                spec.screening.as_ref(),
                spec.smoothing.as_ref(),
                data,
                &tr_idx,
                &te_idx,
                fold_seed,
            )?;
            let tuned = tune(spec, &train, fold_seed)?;
            let rule = fit_at(&spec.method, &tuned.best, &train, fold_seed)?;
            let (value, rewards) = rule.evaluate(&test)?;
            let (v_obs, v_opt) = summarize_values(&rewards);
            Ok(FoldResult {
                fold: f,
                chosen: tuned.best,
                value,
                v_obs,
                v_opt,
                n_lines: te_idx.len(),
            })
        })();
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => skipped.push((f, e.to_string())),
        }
    }
    Ok(ValueReport::from_folds(
        spec.label(),
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
    use crate::model::TreatmentId;
    use crate::synthetic::{generate, SyntheticConfig};

    fn manual(r: Vec<Vec<Option<f64>>>) -> CenteredRewards {
        let j = r.len();
        let m = r[0].len();
        let mut treatments = vec![TreatmentId::untreated("U")];
        treatments.extend((1..=j).map(|t| TreatmentId::new(format!("T{t}"))));
        CenteredRewards {
            treatments,
            line_ids: (0..m).map(|i| format!("L{i}")).collect(),
            null_group: vec![0],
            non_null: (1..=j).collect(),
            r,
            null_rewards: vec![vec![Some(0.0); m]],
            null_mean: vec![Some(0.0); m],
            scale: vec![1.0; j + 1],
            c1: 0,
        }
    }

    #[test]
    fn worked_two_line_example() {
        let rw = manual(vec![
            vec![Some(0.4), Some(0.0)],
            vec![Some(0.6), Some(0.2)],
            vec![Some(1.0), Some(1.0)],
        ]);
        // line 0 gets {T1, T2}, line 1 gets {T3}
        let v = estimate_value_from_sets(&rw, &[vec![1, 2], vec![3]]).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            estimate_value_from_sets(&manual(vec![vec![Some(1.0)], vec![None]]), &[vec![2]]),
            Err(Error::NoConcordantMice)
        );
    }

    #[test]
    fn summary_hand_values() {
        let rw = manual(vec![
            vec![Some(0.4), Some(0.0)],
            vec![Some(0.6), Some(0.2)],
            vec![Some(1.0), Some(0.1)],
        ]);
        let (obs, opt) = summarize_values(&rw);
        assert!((opt - 0.6).abs() < 1e-12);
        assert!((obs - 2.3 / 6.0).abs() < 1e-12);
        let single = manual(vec![vec![Some(0.3), Some(-0.1)]]);
        let (o, p) = summarize_values(&single);
        assert_eq!(o, p);
    }

    #[test]
    fn observed_best_rule_attains_v_opt_exactly() {
        let (d, _) = generate(&SyntheticConfig::three_groups(25, 4, 0.5, 3)).unwrap();
        let rw = fit_reward_transform(&d, 1).unwrap().apply(&d).unwrap();
        let v = estimate_value_from_sets(&rw, &observed_best_sets(&rw)).unwrap();
        assert_eq!(v, summarize_values(&rw).1);
    }

    #[test]
    fn folds_partition_lines() {
        let f = assign_folds(23, 5, 9);
        for k in 0..5 {
            let n = f.iter().filter(|&&x| x == k).count();
            assert!(n == 4 || n == 5);
        }
        assert_eq!(f, assign_folds(23, 5, 9));
    }

    fn small_spec(method: Method) -> MethodSpec {
        MethodSpec {
            grid: TuningGrid {
                c1: vec![0],
                c2: vec![1, 2],
                lambda: vec![0.3, 0.05],
            },
            ..MethodSpec::new(method)
        }
    }

    #[test]
    fn leave_one_line_out_runs_and_is_deterministic() {
        let (d, _) = generate(&SyntheticConfig::three_groups(6, 4, 0.1, 4)).unwrap();
        let spec = small_spec(Method::TreeQl {
            variant: QlVariant::Ql1,
            learner: Learner::Lasso,
            propagation: Propagation::SelectedGroup,
        });
        let a = cross_validate(&spec, &d, 6, 1).unwrap();
        assert!(a.per_fold_values.len() <= 6);
        assert_eq!(a.per_fold_values.len() + a.skipped_folds.len(), 6);
        let b = cross_validate(&spec, &d, 6, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tuning_rules() {
        let (d, _) = generate(&SyntheticConfig::three_groups(30, 4, 0.1, 5)).unwrap();
        let mut spec = small_spec(Method::Flat {
            learner: Learner::Lasso,
        });
        spec.grid.lambda = vec![0.2];
        let t = tune(&spec, &d, 0).unwrap();
        assert_eq!(
            t.best,
            TuningPoint {
                c1: 0,
                c2: None,
                lambda: Some(0.2)
            }
        );
        // a forest ignores lambda and c2, so every grid point ties: parsimony decides
        let mut spec = small_spec(Method::Flat {
            learner: Learner::Forest {
                params: ForestParams {
                    n_trees: 5,
                    ..Default::default()
                },
            },
        });
        spec.grid.c1 = vec![1, 0];
        assert_eq!(spec.points().len(), 2);
        let t = tune(&spec, &d, 0).unwrap();
        assert_eq!(t.scores.len(), 2);
        // a constant penalty beats shrinking everything to zero on a strong signal
        let mut spec = small_spec(Method::TreeQl {
            variant: QlVariant::Ql1,
            learner: Learner::Lasso,
            propagation: Propagation::SelectedGroup,
        });
        spec.grid.c2 = vec![2];
        spec.grid.lambda = vec![1.0, 0.01];
        let t = tune(&spec, &d, 0).unwrap();
        assert_eq!(t.best.lambda, Some(0.01));
    }

    #[test]
    fn parsimony_order() {
        let p = |c1, c2, l| TuningPoint {
            c1,
            c2: Some(c2),
            lambda: Some(l),
        };
        assert!(p(1, 1, 0.1).parsimony_cmp(&p(0, 2, 0.1)).is_lt());
        assert!(p(0, 2, 0.1).parsimony_cmp(&p(1, 2, 0.1)).is_lt());
        assert!(p(0, 2, 0.5).parsimony_cmp(&p(0, 2, 0.1)).is_lt());
    }
}
