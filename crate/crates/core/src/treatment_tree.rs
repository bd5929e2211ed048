//! Null-group centering of standardized responses and the hierarchical
//! treatment tree.
//!
//! Treatments are referred to by their index in the dataset's treatment
//! list throughout; rewards, dendrograms and groupings all carry that list so
//! they can be checked against each other.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{assemble_response_matrix, PdxDataset, TreatmentId};

/// Fitted standardization: per-treatment scale and the null group. Fit on
/// training lines, it can be applied to held-out lines of the same study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTransform {
    pub treatments: Vec<TreatmentId>,
    /// Sample sd of each treatment's response vector.
    pub scale: Vec<f64>,
    /// Untreated arm first, then its nearest neighbours by distance.
    pub null_group: Vec<usize>,
    pub c1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredRewards {
    pub treatments: Vec<TreatmentId>,
    pub line_ids: Vec<String>,
    pub null_group: Vec<usize>,
    /// Treatment indices of the rows of `r`, ascending.
    pub non_null: Vec<usize>,
    /// Centered rewards, `non_null.len()` × m.
    pub r: Vec<Vec<Option<f64>>>,
    /// Centered rewards of the null-group members, `null_group.len()` × m.
    pub null_rewards: Vec<Vec<Option<f64>>>,
    /// Per-line mean standardized response of the null group.
    pub null_mean: Vec<Option<f64>>,
    pub scale: Vec<f64>,
    pub c1: usize,
}

impl CenteredRewards {
    pub fn n_lines(&self) -> usize {
        self.line_ids.len()
    }

    /// Centered reward of any treatment (null or not) on a line.
    pub fn reward(&self, treatment: usize, line: usize) -> Option<f64> {
        if let Some(k) = self.non_null.iter().position(|&t| t == treatment) {
            return self.r[k][line];
        }
        let k = self.null_group.iter().position(|&t| t == treatment)?;
        self.null_rewards[k][line]
    }

    /// Lines on which every non-null treatment has a reward.
    pub fn complete_lines(&self) -> Vec<usize> {
        (0..self.n_lines())
            .filter(|&j| self.r.iter().all(|row| row[j].is_some()))
            .collect()
    }

    pub fn select_lines(&self, idx: &[usize]) -> Self {
        let pick = |rows: &[Vec<Option<f64>>]| -> Vec<Vec<Option<f64>>> {
            rows.iter().map(|row| idx.iter().map(|&j| row[j]).collect()).collect()
        };
        Self {
            treatments: self.treatments.clone(),
            line_ids: idx.iter().map(|&j| self.line_ids[j].clone()).collect(),
            null_group: self.null_group.clone(),
            non_null: self.non_null.clone(),
            r: pick(&self.r),
            null_rewards: pick(&self.null_rewards),
            null_mean: idx.iter().map(|&j| self.null_mean[j]).collect(),
            scale: self.scale.clone(),
            c1: self.c1,
        }
    }

    pub fn transform(&self) -> RewardTransform {
        RewardTransform {
            treatments: self.treatments.clone(),
            scale: self.scale.clone(),
            null_group: self.null_group.clone(),
            c1: self.c1,
        }
    }

    /// Multiplies every reward by `c`; used by invariance checks.
    pub fn scaled(&self, c: f64) -> Self {
        let mul = |rows: &[Vec<Option<f64>>]| -> Vec<Vec<Option<f64>>> {
            rows.iter()
                .map(|row| row.iter().map(|v| v.map(|x| x * c)).collect())
                .collect()
        };
        Self {
            r: mul(&self.r),
            null_rewards: mul(&self.null_rewards),
            null_mean: self.null_mean.iter().map(|v| v.map(|x| x * c)).collect(),
            ..self.clone()
        }
    }
}

impl RewardTransform {
    /// Standardizes and centers `dataset`, whose treatments must match the
    /// ones this transform was fit on.
    pub fn apply(&self, dataset: &PdxDataset) -> Result<CenteredRewards> {
        if dataset.treatments() != self.treatments.as_slice() {
            return Err(Error::InvalidInput(
                "dataset treatments differ from the fitted transform".into(),
            ));
        }
        let table = assemble_response_matrix(dataset)?;
        let p = self.treatments.len();
        let m = table.n_lines();
        let scaled: Vec<Vec<Option<f64>>> = (0..p)
            .map(|i| table.response[i].iter().map(|v| v.map(|y| y / self.scale[i])).collect())
            .collect();
        let null_mean: Vec<Option<f64>> = (0..m)
            .map(|j| {
                let vals: Vec<f64> = self.null_group.iter().filter_map(|&i| scaled[i][j]).collect();
                (!vals.is_empty()).then(|| math::mean(&vals))
            })
            .collect();
        let center = |i: usize| -> Vec<Option<f64>> { (0..m).map(|j| Some(scaled[i][j]? - null_mean[j]?)).collect() };
        let in_null: BTreeSet<usize> = self.null_group.iter().copied().collect();
        let non_null: Vec<usize> = (0..p).filter(|i| !in_null.contains(i)).collect();
        Ok(CenteredRewards {
            treatments: self.treatments.clone(),
            line_ids: table.line_ids.clone(),
            null_group: self.null_group.clone(),
            r: non_null.iter().map(|&i| center(i)).collect(),
            null_rewards: self.null_group.iter().map(|&i| center(i)).collect(),
            non_null,
            null_mean,
            scale: self.scale.clone(),
            c1: self.c1,
        })
    }
}

/// Fits the scale and null group on `dataset`.
///
/// Each treatment's response vector is divided by its sample sd. The null
/// group is the untreated arm plus its `c1` nearest treatments by Euclidean
/// distance over lines where every treatment was applied (ties by index).
pub fn fit_reward_transform(dataset: &PdxDataset, c1: usize) -> Result<RewardTransform> {
    let table = assemble_response_matrix(dataset)?;
    let p = table.n_treatments();
    let untreated = table
        .untreated_index()
        .ok_or_else(|| Error::Validation("no untreated arm".into()))?;
    if p < 2 || c1 > p - 2 {
        return Err(Error::OutOfRange {
            what: "c1",
            value: c1,
            min: 0,
            max: p.saturating_sub(2),
        });
    }
    let mut scale = Vec::with_capacity(p);
    for i in 0..p {
        let vals: Vec<f64> = table.response[i].iter().flatten().copied().collect();
        let sd = math::sd_sample(&vals);
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::DegenerateResponse {
                treatment: table.treatments[i].id.clone(),
            });
        }
        scale.push(sd);
    }

    let mut null_group = vec![untreated];
    if c1 > 0 {
        let complete: Vec<usize> = (0..table.n_lines())
            .filter(|&j| (0..p).all(|i| table.applied(i, j)))
            .collect();
        if complete.is_empty() {
            return Err(Error::NoCompleteLines);
        }
        let vec_of = |i: usize| -> Vec<f64> {
            complete
                .iter()
                .map(|&j| table.response[i][j].expect("complete line") / scale[i])
                .collect()
        };
        let base = vec_of(untreated);
        let mut by_distance: Vec<(f64, usize)> = (0..p)
            .filter(|&i| i != untreated)
            .map(|i| (math::euclidean(&base, &vec_of(i)), i))
            .collect();
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        null_group.extend(by_distance.iter().take(c1).map(|&(_, i)| i));
    }
    Ok(RewardTransform {
        treatments: table.treatments,
        scale,
        null_group,
        c1,
    })
}

/// Standardizes each treatment's responses, forms the null group and
/// subtracts its per-line mean from every other treatment.
pub fn standardize_and_center(dataset: &PdxDataset, c1: usize) -> Result<CenteredRewards> {
    fit_reward_transform(dataset, c1)?.apply(dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Child node ids; leaves are `0..n`, merge `k` creates node `n + k`.
    /// `left` is the child holding the smaller leaf index.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub treatments: Vec<TreatmentId>,
    /// Treatment index of each leaf.
    pub leaves: Vec<usize>,
    pub null_group: Vec<usize>,
    pub c1: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Leaf positions under a node id.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let n = self.n_leaves();
        if node < n {
            return vec![node];
        }
        let mg = self.merges[node - n];
        let mut out = self.members(mg.left);
        out.extend(self.members(mg.right));
        out.sort_unstable();
        out
    }
}

/// Average-linkage agglomerative clustering of the non-null reward rows over
/// complete lines.
pub fn build_tree(rewards: &CenteredRewards) -> Result<Dendrogram> {
    let n = rewards.non_null.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let complete = rewards.complete_lines();
    if complete.is_empty() {
        return Err(Error::NoCompleteLines);
    }
    let rows: Vec<Vec<f64>> = rewards
        .r
        .iter()
        .map(|row| complete.iter().map(|&j| row[j].expect("complete line")).collect())
        .collect();
    let mut leaf_dist = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let d = math::euclidean(&rows[a], &rows[b]);
            leaf_dist[a][b] = d;
            leaf_dist[b][a] = d;
        }
    }

    // (node id, sorted members); kept ordered by smallest member
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n - 1);
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let (ma, mb) = (&active[a].1, &active[b].1);
                let mut s = 0.0;
                for &x in ma {
                    for &y in mb {
                        s += leaf_dist[x][y];
                    }
                }
                let d = s / (ma.len() * mb.len()) as f64;
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two clusters");
        let (right_id, right_members) = active.remove(b);
        let (left_id, mut members) = active.remove(a);
        members.extend(right_members);
        members.sort_unstable();
        let id = n + merges.len();
        merges.push(Merge {
            left: left_id,
            right: right_id,
            height,
            size: members.len(),
        });
        let pos = active
            .iter()
            .position(|(_, m)| m[0] > members[0])
            .unwrap_or(active.len());
        active.insert(pos, (id, members));
    }
    Ok(Dendrogram {
        treatments: rewards.treatments.clone(),
        leaves: rewards.non_null.clone(),
        null_group: rewards.null_group.clone(),
        c1: rewards.c1,
        merges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Child {
    Group(usize),
    Node(usize),
}

/// A dendrogram node above the cut: one binary decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionNode {
    /// Node id in the source dendrogram.
    pub dendrogram_id: usize,
    /// Arm `a_1(t)`, taken on ties.
    pub left: Child,
    /// Arm `a_0(t)`.
    pub right: Child,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentGrouping {
    pub treatments: Vec<TreatmentId>,
    pub null_group: Vec<usize>,
    /// Leaf groups of treatment indices, ordered by smallest member.
    pub groups: Vec<Vec<usize>>,
    /// Decision nodes in root-down order; `nodes[0]` is the root.
    pub nodes: Vec<DecisionNode>,
    pub c1: usize,
    pub c2: usize,
}

impl TreatmentGrouping {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Leaf groups below a child.
    pub fn groups_under(&self, child: Child) -> Vec<usize> {
        match child {
            Child::Group(g) => vec![g],
            Child::Node(k) => {
                let mut out = self.groups_under(self.nodes[k].left);
                out.extend(self.groups_under(self.nodes[k].right));
                out
            }
        }
    }

    /// Node index and arm side (`true` = left) of each group's parent.
    pub fn parent_of_group(&self, group: usize) -> Option<(usize, bool)> {
        self.nodes.iter().enumerate().find_map(|(k, n)| {
            if n.left == Child::Group(group) {
                Some((k, true))
            } else if n.right == Child::Group(group) {
                Some((k, false))
            } else {
                None
            }
        })
    }

    /// Group containing a treatment, if it is non-null.
    pub fn group_of(&self, treatment: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&treatment))
    }

    /// Node indices ordered so every node follows its descendants.
    pub fn bottom_up(&self) -> Vec<usize> {
        (0..self.nodes.len()).rev().collect()
    }

    pub fn same_structure(&self, other: &TreatmentGrouping) -> bool {
        self.treatments == other.treatments
            && self.null_group == other.null_group
            && self.groups == other.groups
            && self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.left == b.left && a.right == b.right)
    }
}

/// Undoes the top `c2` merges, giving `c2 + 1` leaf groups and `c2`
/// decision nodes.
pub fn cut_tree(dend: &Dendrogram, c2: usize) -> Result<TreatmentGrouping> {
    let n = dend.n_leaves();
    if c2 < 1 || c2 + 1 > n {
        return Err(Error::OutOfRange {
            what: "c2",
            value: c2,
            min: 1,
            max: n.saturating_sub(1),
        });
    }
    let kept = n - 1 - c2;
    // every node id that is a maximal cluster after the first `kept` merges
    let mut roots: BTreeSet<usize> = (0..n).collect();
    for (k, mg) in dend.merges[..kept].iter().enumerate() {
        roots.remove(&mg.left);
        roots.remove(&mg.right);
        roots.insert(n + k);
    }
    let mut clusters: Vec<(usize, Vec<usize>)> = roots
        .iter()
        .map(|&id| {
            let members: Vec<usize> = dend.members(id).iter().map(|&leaf| dend.leaves[leaf]).collect();
            (id, members)
        })
        .collect();
    for c in &mut clusters {
        c.1.sort_unstable();
    }
    clusters.sort_by_key(|c| c.1[0]);

    let top: Vec<usize> = (kept..n - 1).rev().collect();
    let child_of = |id: usize| -> Child {
        if let Some(g) = clusters.iter().position(|c| c.0 == id) {
            Child::Group(g)
        } else {
            let k = top.iter().position(|&mk| n + mk == id).expect("child above the cut");
            Child::Node(k)
        }
    };
    let nodes = top
        .iter()
        .map(|&k| {
            let mg = dend.merges[k];
            DecisionNode {
                dendrogram_id: n + k,
                left: child_of(mg.left),
                right: child_of(mg.right),
                height: mg.height,
            }
        })
        .collect();
    Ok(TreatmentGrouping {
        treatments: dend.treatments.clone(),
        null_group: dend.null_group.clone(),
        groups: clusters.into_iter().map(|c| c.1).collect(),
        nodes,
        c1: dend.c1,
        c2,
    })
}

/// Per-line mean centered reward within each leaf group; `None` where the
/// line received none of the group's treatments.
pub fn group_rewards(rewards: &CenteredRewards, grouping: &TreatmentGrouping) -> Result<Vec<Vec<Option<f64>>>> {
    if rewards.treatments != grouping.treatments || rewards.null_group != grouping.null_group {
        return Err(Error::IncompatibleGroupings);
    }
    let m = rewards.n_lines();
    grouping
        .groups
        .iter()
        .map(|g| {
            let rows = g
                .iter()
                .map(|&t| rewards.non_null.iter().position(|&x| x == t).ok_or(Error::UnknownGroup))
                .collect::<Result<Vec<_>>>()?;
            Ok((0..m)
                .map(|j| {
                    let vals: Vec<f64> = rows.iter().filter_map(|&k| rewards.r[k][j]).collect();
                    (!vals.is_empty()).then(|| math::mean(&vals))
                })
                .collect())
        })
        .collect()
}
