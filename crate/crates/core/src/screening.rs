//! Unsupervised feature/treatment filtering and supervised gene ranking by
//! distance covariance.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};
use crate::model::{assemble_response_matrix, parse_feature_name, FeatureMatrix, PdxDataset, Platform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreeningCriteria {
    /// Fraction of lowest-variance features to drop, in `[0, 1)`.
    pub min_variance_quantile: f64,
    /// `.rna` features must have a mean strictly above this; `None` disables
    /// the expression filter.
    pub min_mean_expression: Option<f64>,
    /// Treatments applied in fewer than `treatment_coverage * m` lines are dropped.
    pub treatment_coverage: f64,
}

impl Default for ScreeningCriteria {
    fn default() -> Self {
        Self {
            min_variance_quantile: 0.2,
            min_mean_expression: Some(0.0),
            treatment_coverage: 0.9,
        }
    }
}

impl ScreeningCriteria {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.min_variance_quantile) {
            return Err(Error::InvalidInput("min_variance_quantile must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.treatment_coverage) {
            return Err(Error::InvalidInput("treatment_coverage must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Drops zero-variance features, the lowest `min_variance_quantile` share of
/// features by variance, and weakly expressed `.rna` features. Column order
/// is preserved.
pub fn filter_features(features: &FeatureMatrix, criteria: &ScreeningCriteria) -> Result<FeatureMatrix> {
    criteria.validate()?;
    let p = features.n_features();
    let values = features.values();
    let stats: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let col = values.column(j);
            (math::mean(&col), math::variance_pop(&col))
        })
        .collect();

    let mut by_variance: Vec<usize> = (0..p).collect();
    by_variance.sort_by(|&a, &b| stats[a].1.total_cmp(&stats[b].1).then(a.cmp(&b)));
    let n_drop = math::floor(criteria.min_variance_quantile * p as f64) as usize;
    let dropped: BTreeSet<usize> = by_variance[..n_drop].iter().copied().collect();

    let keep: Vec<usize> = (0..p)
        .filter(|j| !dropped.contains(j))
        .filter(|&j| stats[j].1 > 0.0)
        .filter(|&j| {
            match (
                criteria.min_mean_expression,
                parse_feature_name(&features.feature_names()[j]),
            ) {
                (Some(threshold), Some((_, Platform::Rna))) => stats[j].0 > threshold,
                _ => true,
            }
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    Ok(features.select_features(&keep))
}

/// Drops treatments applied in fewer than `coverage * m` lines. The
/// untreated arm is always kept; lines left without any record are dropped.
pub fn filter_treatments(dataset: &PdxDataset, coverage: f64) -> Result<PdxDataset> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(Error::InvalidInput("coverage must lie in [0, 1]".into()));
    }
    let table = assemble_response_matrix(dataset)?;
    let m = dataset.m() as f64;
    let keep: Vec<usize> = (0..dataset.p())
        .filter(|&i| {
            let applied = table.response[i].iter().filter(|r| r.is_some()).count() as f64;
            table.treatments[i].is_untreated || applied >= coverage * m
        })
        .collect();
    if keep.len() < 2 {
        return Err(Error::TooFewTreatments { remaining: keep.len() });
    }
    let reduced = dataset.select_treatments(&keep);
    let with_records: BTreeSet<&str> = reduced.records().iter().map(|r| r.line_id.as_str()).collect();
    let lines: Vec<usize> = reduced
        .features()
        .line_ids()
        .iter()
        .enumerate()
        .filter(|(_, l)| with_records.contains(l.as_str()))
        .map(|(j, _)| j)
        .collect();
    if lines.len() == reduced.m() {
        Ok(reduced)
    } else {
        Ok(reduced.select_lines(&lines))
    }
}

fn double_centered_distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = math::euclidean(x.row(i), x.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let row_means: Vec<f64> = (0..n).map(|i| math::mean(d.row(i))).collect();
    let grand = math::mean(&row_means);
    for i in 0..n {
        for j in 0..n {
            d[(i, j)] = d[(i, j)] - row_means[i] - row_means[j] + grand;
        }
    }
    d
}

/// Sample distance covariance (V-statistic, 1/n² normalization).
pub fn dcov(x: &Matrix, y: &Matrix) -> Result<f64> {
    if x.rows() != y.rows() {
        return Err(Error::WidthMismatch {
            expected: x.rows(),
            got: y.rows(),
        });
    }
    let n = x.rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite("distance covariance input".into()));
    }
    let a = double_centered_distances(x);
    let b = double_centered_distances(y);
    let v2 = a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| p * q).sum::<f64>() / (n * n) as f64;
    // V² is non-negative in exact arithmetic; clamp rounding noise.
    Ok(math::sqrt(v2.max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreeningMode {
    /// Dependence between a gene and the response to each treatment.
    Prognostic,
    /// Dependence between a gene and response differences of treatment pairs.
    Predictive,
    /// Maximum of the prognostic and predictive scores.
    #[default]
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneScore {
    pub gene: String,
    pub score: f64,
}

/// Feature column indices grouped by gene, genes in first-appearance order.
pub fn gene_blocks(features: &FeatureMatrix) -> Vec<(String, Vec<usize>)> {
    let mut order: Vec<(String, Vec<usize>)> = Vec::new();
    let mut pos: BTreeMap<String, usize> = BTreeMap::new();
    for (j, name) in features.feature_names().iter().enumerate() {
        let gene = parse_feature_name(name).map_or(name.as_str(), |(g, _)| g).to_string();
        match pos.get(&gene) {
            Some(&k) => order[k].1.push(j),
            None => {
                pos.insert(gene.clone(), order.len());
                order.push((gene, vec![j]));
            }
        }
    }
    order
}

/// Scores each gene by distance covariance with the (bivariate when every
/// record carries a companion outcome) response and sorts by descending
/// score, ties by gene name.
pub fn rank_genes(dataset: &PdxDataset, mode: ScreeningMode) -> Result<Vec<GeneScore>> {
    let table = assemble_response_matrix(dataset)?;
    let bivariate = dataset.has_companion();
    let values = dataset.features().values();
    let p = table.n_treatments();
    let m = table.n_lines();

    let outcome = |i: usize, j: usize| -> Option<Vec<f64>> {
        let r = table.response[i][j]?;
        if bivariate {
            Some(vec![r, table.companion[i][j]?])
        } else {
            Some(vec![r])
        }
    };

    // (line subset, response rows) per comparison, computed once for all genes.
    let mut comparisons: Vec<(Vec<usize>, Matrix)> = Vec::new();
    if matches!(mode, ScreeningMode::Prognostic | ScreeningMode::Combined) {
        for i in 0..p {
            let (lines, rows): (Vec<usize>, Vec<Vec<f64>>) =
                (0..m).filter_map(|j| outcome(i, j).map(|y| (j, y))).unzip();
            if lines.len() >= 2 {
                comparisons.push((lines, Matrix::from_rows(&rows)?));
            }
        }
    }
    if matches!(mode, ScreeningMode::Predictive | ScreeningMode::Combined) {
        for a in 0..p {
            for b in a + 1..p {
                let (lines, rows): (Vec<usize>, Vec<Vec<f64>>) = (0..m)
                    .filter_map(|j| {
                        let ya = outcome(a, j)?;
                        let yb = outcome(b, j)?;
                        Some((j, ya.iter().zip(&yb).map(|(u, v)| u - v).collect()))
                    })
                    .unzip();
                if lines.len() >= 2 {
                    comparisons.push((lines, Matrix::from_rows(&rows)?));
                }
            }
        }
    }
    if comparisons.is_empty() {
        return Err(Error::NoCompleteLines);
    }

    let mut scores = Vec::new();
    for (gene, cols) in gene_blocks(dataset.features()) {
        let block = values.select_cols(&cols);
        let mut best = 0.0f64;
        for (lines, y) in &comparisons {
            best = best.max(dcov(&block.select_rows(lines), y)?);
        }
        scores.push(GeneScore { gene, score: best });
    }
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.gene.cmp(&b.gene)));
    Ok(scores)
}

/// The top `l_sup` genes and all of their platform features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneFeatureSet {
    pub l_sup: usize,
    pub genes: Vec<String>,
    pub feature_names: Vec<String>,
}

/// Keeps the first `l_sup` ranked genes; features keep their column order.
pub fn select_top(ranked: &[GeneScore], feature_names: &[String], l_sup: usize) -> Result<GeneFeatureSet> {
    if l_sup > ranked.len() {
        return Err(Error::NotEnoughGenes {
            requested: l_sup,
            available: ranked.len(),
        });
    }
    let genes: Vec<String> = ranked[..l_sup].iter().map(|g| g.gene.clone()).collect();
    let chosen: BTreeSet<&str> = genes.iter().map(String::as_str).collect();
    let feature_names = feature_names
        .iter()
        .filter(|n| {
            let gene = parse_feature_name(n).map_or(n.as_str(), |(g, _)| g);
            chosen.contains(gene)
        })
        .cloned()
        .collect();
    Ok(GeneFeatureSet {
        l_sup,
        genes,
        feature_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ResponseRecord, TreatmentId};
    use crate::rng;
    use alloc::format;
    use proptest::prelude::*;

    /// Independent O(n^4)-free but loop-only brute force: explicit a_ij,
    /// row/column/grand means and the double sum.
    fn brute_dcov(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
        let n = x.len();
        let dist = |u: &[f64], v: &[f64]| -> f64 {
            let mut s = 0.0;
            for k in 0..u.len() {
                s += (u[k] - v[k]) * (u[k] - v[k]);
            }
            s.sqrt()
        };
        let centered = |z: &[Vec<f64>]| -> Vec<Vec<f64>> {
            let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dist(&z[i], &z[j])).collect()).collect();
            let mut out = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut ri = 0.0;
                    let mut cj = 0.0;
                    let mut g = 0.0;
                    for k in 0..n {
                        ri += a[i][k];
                        cj += a[k][j];
                        for l in 0..n {
                            g += a[k][l];
                        }
                    }
                    out[i][j] = a[i][j] - ri / n as f64 - cj / n as f64 + g / (n * n) as f64;
                }
            }
            out
        };
        let a = centered(x);
        let b = centered(y);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[i][j] * b[i][j];
            }
        }
        (s / (n * n) as f64).max(0.0).sqrt()
    }

    #[test]
    fn dcov_constant_is_zero() {
        let x = Matrix::from_rows(&[vec![3.0], vec![3.0], vec![3.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0], vec![5.0], vec![2.0]]).unwrap();
        assert_eq!(dcov(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn dcov_two_point_hand_value() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0], vec![5.0]]).unwrap();
        let brute = brute_dcov(&[vec![0.0], vec![2.0]], &[vec![1.0], vec![5.0]]);
        assert!((brute - 2f64.sqrt()).abs() < 1e-15);
        assert!((dcov(&x, &y).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dcov_matches_brute_force_random_n6() {
        let mut r = rng::seeded(11);
        let x: Vec<Vec<f64>> = (0..6).map(|_| (0..2).map(|_| rng::normal(&mut r)).collect()).collect();
        let y: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng::normal(&mut r)).collect()).collect();
        let got = dcov(&Matrix::from_rows(&x).unwrap(), &Matrix::from_rows(&y).unwrap()).unwrap();
        assert!((got - brute_dcov(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn dcov_rejects_single_row() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(dcov(&x, &x), Err(Error::TooFewSamples { .. })));
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        (2usize..7, 1usize..4, 1usize..4).prop_flat_map(|(n, p, q)| {
            (
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, p), n),
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, q), n),
            )
        })
    }

    proptest! {
        #[test]
        fn dcov_symmetric_and_nonnegative((x, y) in arb_pair()) {
            let xm = Matrix::from_rows(&x).unwrap();
            let ym = Matrix::from_rows(&y).unwrap();
            let a = dcov(&xm, &ym).unwrap();
            let b = dcov(&ym, &xm).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn dcov_translation_rotation_scaling((x, y) in arb_pair(), shift in -3.0f64..3.0, theta in 0.0f64..6.28, c in 0.1f64..4.0) {
            let xm = Matrix::from_rows(&x).unwrap();
            let ym = Matrix::from_rows(&y).unwrap();
            let base = dcov(&xm, &ym).unwrap();
            let shifted: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
            prop_assert!((dcov(&Matrix::from_rows(&shifted).unwrap(), &ym).unwrap() - base).abs() < 1e-9);
            // rotate the first two coordinates when available
            if x[0].len() >= 2 {
                let (s, co) = (theta.sin(), theta.cos());
                let rot: Vec<Vec<f64>> = x.iter().map(|r| {
                    let mut o = r.clone();
                    o[0] = co * r[0] - s * r[1];
                    o[1] = s * r[0] + co * r[1];
                    o
                }).collect();
                prop_assert!((dcov(&Matrix::from_rows(&rot).unwrap(), &ym).unwrap() - base).abs() < 1e-9);
            }
            let xs: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
            let ys: Vec<Vec<f64>> = y.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
            let scaled = dcov(&Matrix::from_rows(&xs).unwrap(), &Matrix::from_rows(&ys).unwrap()).unwrap();
            prop_assert!((scaled - c * base).abs() < 1e-9 * (1.0 + base));
        }
    }

    fn fm(names: &[&str], cols: &[Vec<f64>]) -> FeatureMatrix {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        FeatureMatrix::new(
            (0..n).map(|i| format!("L{i}")).collect(),
            names.iter().map(|s| s.to_string()).collect(),
            Matrix::from_rows(&rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_variance_feature_removed() {
        let f = fm(&["A.cn", "B.cn"], &[vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]]);
        let crit = ScreeningCriteria {
            min_variance_quantile: 0.0,
            min_mean_expression: None,
            treatment_coverage: 0.9,
        };
        let out = filter_features(&f, &crit).unwrap();
        assert_eq!(out.feature_names(), &["B.cn".to_string()]);
    }

    #[test]
    fn vacuous_criteria_is_identity() {
        let f = fm(&["A.rna", "B.cn"], &[vec![-1.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]]);
        let crit = ScreeningCriteria {
            min_variance_quantile: 0.0,
            min_mean_expression: Some(f64::NEG_INFINITY),
            treatment_coverage: 0.0,
        };
        assert_eq!(filter_features(&f, &crit).unwrap(), f);
    }

    #[test]
    fn variance_quantile_half_keeps_half() {
        let names: Vec<String> = (0..10).map(|k| format!("G{k}.cn")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        // variances grow with k, all distinct
        let cols: Vec<Vec<f64>> = (0..10)
            .map(|k| vec![0.0, (k + 1) as f64, 0.0, -((k + 1) as f64)])
            .collect();
        let f = fm(&refs, &cols);
        let crit = ScreeningCriteria {
            min_variance_quantile: 0.5,
            min_mean_expression: None,
            treatment_coverage: 0.9,
        };
        let out = filter_features(&f, &crit).unwrap();
        assert_eq!(out.n_features(), 5);
        assert_eq!(out.feature_names()[0], "G5.cn");
    }

    #[test]
    fn low_expression_rna_removed_but_cn_kept() {
        let f = fm(&["A.rna", "A.cn"], &[vec![-2.0, -1.0, 0.0], vec![-2.0, -1.0, 0.0]]);
        let out = filter_features(
            &f,
            &ScreeningCriteria {
                min_variance_quantile: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.feature_names(), &["A.cn".to_string()]);
        let only_rna = fm(&["A.rna"], &[vec![-2.0, -1.0, 0.0]]);
        assert_eq!(
            filter_features(&only_rna, &ScreeningCriteria::default()),
            Err(Error::EmptyFeatureSet)
        );
    }

    fn coverage_dataset() -> PdxDataset {
        let lines: Vec<String> = (0..10).map(|j| format!("L{j}")).collect();
        let features = FeatureMatrix::new(
            lines.clone(),
            vec!["G.cn".into()],
            Matrix::from_vec(10, 1, (0..10).map(|v| v as f64).collect()).unwrap(),
        )
        .unwrap();
        let mut records = Vec::new();
        for (j, l) in lines.iter().enumerate() {
            if j < 5 {
                records.push(ResponseRecord::new(l.clone(), "untreated", 0.0));
            }
            records.push(ResponseRecord::new(l.clone(), "T1", j as f64));
            if j < 8 {
                records.push(ResponseRecord::new(l.clone(), "T2", 1.0));
            }
        }
        PdxDataset::new(
            features,
            vec![
                TreatmentId::untreated("untreated"),
                TreatmentId::new("T1"),
                TreatmentId::new("T2"),
            ],
            records,
        )
        .unwrap()
    }

    #[test]
    fn coverage_filter_drops_sparse_treatment_but_keeps_untreated() {
        let d = coverage_dataset();
        let out = filter_treatments(&d, 0.9).unwrap();
        let ids: Vec<&str> = out.treatments().iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["untreated", "T1"]);
        assert_eq!(out.m(), 10);
        assert_eq!(filter_treatments(&d, 0.0).unwrap(), d);
    }

    #[test]
    fn coverage_filter_errors_when_too_few_remain() {
        let d = coverage_dataset();
        assert!(matches!(
            filter_treatments(&d.select_treatments(&[0, 2]), 0.9),
            Err(Error::TooFewTreatments { remaining: 1 })
        ));
    }

    fn ranking_dataset() -> PdxDataset {
        let m = 30;
        let mut r = rng::seeded(5);
        let lines: Vec<String> = (0..m).map(|j| format!("L{j}")).collect();
        let names: Vec<String> = vec!["SIG.rna", "N1.rna", "N2.rna", "N3.rna", "N4.rna", "N5.rna", "FLAT.rna"]
            .into_iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for _ in 0..m {
            let mut row: Vec<f64> = (0..6).map(|_| rng::normal(&mut r)).collect();
            row.push(1.0);
            rows.push(row);
        }
        let mut records = Vec::new();
        for (j, l) in lines.iter().enumerate() {
            records.push(
                ResponseRecord::new(l.clone(), "untreated", rng::normal(&mut r)).with_companion(rng::normal(&mut r)),
            );
            let sig = rows[j][0];
            records.push(ResponseRecord::new(l.clone(), "T1", sig).with_companion(sig));
            records.push(ResponseRecord::new(l.clone(), "T2", rng::normal(&mut r)).with_companion(rng::normal(&mut r)));
        }
        PdxDataset::new(
            FeatureMatrix::new(lines, names, Matrix::from_rows(&rows).unwrap()).unwrap(),
            vec![
                TreatmentId::untreated("untreated"),
                TreatmentId::new("T1"),
                TreatmentId::new("T2"),
            ],
            records,
        )
        .unwrap()
    }

    #[test]
    fn signal_gene_ranked_first_flat_gene_last() {
        let d = ranking_dataset();
        for mode in [ScreeningMode::Prognostic, ScreeningMode::Combined] {
            let ranked = rank_genes(&d, mode).unwrap();
            assert_eq!(ranked[0].gene, "SIG");
            assert_eq!(ranked.last().unwrap().gene, "FLAT");
            assert_eq!(ranked.last().unwrap().score, 0.0);
        }
        let pred = rank_genes(&d, ScreeningMode::Predictive).unwrap();
        assert_eq!(pred[0].gene, "SIG");
    }

    #[test]
    fn equal_scores_tie_by_name() {
        let f = fm(&["B.rna", "A.rna"], &[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]);
        let lines = f.line_ids().to_vec();
        let mut records = Vec::new();
        for (j, l) in lines.iter().enumerate() {
            records.push(ResponseRecord::new(l.clone(), "u", j as f64));
            records.push(ResponseRecord::new(l.clone(), "T", 2.0 * j as f64));
        }
        let d = PdxDataset::new(f, vec![TreatmentId::untreated("u"), TreatmentId::new("T")], records).unwrap();
        let ranked = rank_genes(&d, ScreeningMode::Combined).unwrap();
        assert_eq!(ranked[0].score, ranked[1].score);
        assert_eq!(ranked[0].gene, "A");
    }

    #[test]
    fn select_top_counts_and_nesting() {
        let names: Vec<String> = (0..60)
            .flat_map(|g| ["rna", "cn", "mut"].map(|s| format!("G{g}.{s}")))
            .collect();
        let ranked: Vec<GeneScore> = (0..60)
            .map(|g| GeneScore {
                gene: format!("G{g}"),
                score: 60.0 - g as f64,
            })
            .collect();
        let all = select_top(&ranked, &names, 60).unwrap();
        assert_eq!(all.feature_names, names);
        let top50 = select_top(&ranked, &names, 50).unwrap();
        assert_eq!(top50.genes.len(), 50);
        assert!(top50.feature_names.len() <= 150);
        let mut prev: Option<GeneFeatureSet> = None;
        for l in [5, 10, 20, 40] {
            let s = select_top(&ranked, &names, l).unwrap();
            if let Some(p) = prev {
                assert!(p.feature_names.iter().all(|f| s.feature_names.contains(f)));
            }
            prev = Some(s);
        }
        assert!(matches!(
            select_top(&ranked, &names, 61),
            Err(Error::NotEnoughGenes {
                requested: 61,
                available: 60
            })
        ));
    }
}
