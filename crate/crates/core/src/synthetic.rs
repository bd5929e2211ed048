//! Synthetic multi-treatment studies with known conditional means, and the
//! optimal value of a treatment grouping under those means.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};
use crate::model::{FeatureMatrix, PdxDataset, ResponseRecord, TreatmentId};
use crate::rng;

/// Threshold term: `below` when `z[feature] <= threshold`, else `above`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub feature: usize,
    pub threshold: f64,
    pub below: f64,
    pub above: f64,
}

/// `intercept + sum coef * z[feature] + sum steps`, over the latent
/// standard-normal feature vector `z`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanFunction {
    pub intercept: f64,
    pub linear: Vec<(usize, f64)>,
    pub steps: Vec<Step>,
}

impl MeanFunction {
    pub fn constant(c: f64) -> Self {
        Self {
            intercept: c,
            ..Default::default()
        }
    }

    pub fn linear(intercept: f64, terms: &[(usize, f64)]) -> Self {
        Self {
            intercept,
            linear: terms.to_vec(),
            steps: Vec::new(),
        }
    }

    pub fn step(feature: usize, threshold: f64, below: f64, above: f64) -> Self {
        Self {
            intercept: 0.0,
            linear: Vec::new(),
            steps: vec![Step {
                feature,
                threshold,
                below,
                above,
            }],
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut v = self.intercept;
        for &(f, c) in &self.linear {
            v += c * z[f];
        }
        for s in &self.steps {
            v += if z[s.feature] <= s.threshold { s.below } else { s.above };
        }
        v
    }

    fn max_feature(&self) -> Option<usize> {
        self.linear
            .iter()
            .map(|t| t.0)
            .chain(self.steps.iter().map(|s| s.feature))
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub lines: usize,
    pub features: usize,
    /// Shared baseline `h_0`.
    pub baseline: MeanFunction,
    /// One effect per non-null treatment; the untreated arm has none.
    pub effects: Vec<MeanFunction>,
    pub noise_sd: f64,
    /// Probability that a non-null (line, treatment) pair is unobserved.
    pub drop_rate: f64,
    /// Also emit a noisy second outcome for bivariate screening.
    pub companion: bool,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Six treatments in three effect classes; the best class depends on
    /// the first two latent features.
    pub fn three_groups(lines: usize, features: usize, noise_sd: f64, seed: u64) -> Self {
        let a = MeanFunction::linear(0.0, &[(0, 1.0)]);
        let b = MeanFunction::linear(0.0, &[(0, -1.0)]);
        let c = MeanFunction::linear(-0.3, &[(1, 1.0)]);
        Self {
            lines,
            features,
            baseline: MeanFunction::linear(0.0, &[(features - 1, 0.5)]),
            effects: vec![a.clone(), a, b.clone(), b, c.clone(), c],
            noise_sd,
            drop_rate: 0.0,
            companion: false,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracle {
    pub baseline: MeanFunction,
    /// Effects indexed like the dataset's treatments; the untreated arm
    /// (index 0) is identically zero.
    pub effects: Vec<MeanFunction>,
    pub noise_sd: f64,
    /// Non-null treatments with identical effect functions.
    pub classes: Vec<Vec<usize>>,
    /// Added to each latent feature when it is stored.
    pub offsets: Vec<f64>,
    /// Latent features of the generated lines.
    pub latent: Matrix,
}

impl SyntheticOracle {
    /// Conditional mean effect of every non-null treatment, `lines × J`,
    /// for latent rows `z`.
    pub fn effect_means(&self, z: &Matrix) -> Matrix {
        let j = self.effects.len() - 1;
        let mut out = Matrix::zeros(z.rows(), j);
        for i in 0..z.rows() {
            for t in 0..j {
                out[(i, t)] = self.effects[t + 1].eval(z.row(i));
            }
        }
        out
    }

    /// Recovers latent features from stored ones.
    pub fn latent_of(&self, stored: &[f64]) -> Vec<f64> {
        stored.iter().zip(&self.offsets).map(|(v, o)| v - o).collect()
    }
}

/// Column names `GENE{g}.rna` / `GENE{g}.cn`, two platforms per gene.
pub fn feature_names(p: usize) -> Vec<String> {
    (0..p)
        .map(|k| {
            let platform = if k % 2 == 0 { "rna" } else { "cn" };
            format!("GENE{}.{platform}", k / 2 + 1)
        })
        .collect()
}

pub fn generate(cfg: &SyntheticConfig) -> Result<(PdxDataset, SyntheticOracle)> {
    let (m, p, j) = (cfg.lines, cfg.features, cfg.effects.len());
    if m < 2 || p < 2 || j < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 lines, features and treatments".into(),
        ));
    }
    if !(cfg.noise_sd >= 0.0) || !(0.0..1.0).contains(&cfg.drop_rate) {
        return Err(Error::InvalidInput(
            "noise sd must be >= 0 and drop rate in [0, 1)".into(),
        ));
    }
    let too_wide = core::iter::once(&cfg.baseline)
        .chain(&cfg.effects)
        .filter_map(MeanFunction::max_feature)
        .any(|f| f >= p);
    if too_wide {
        return Err(Error::InvalidInput(
            "mean function uses a feature beyond the feature count".into(),
        ));
    }

    let mut frng = rng::seeded(rng::derive_seed(cfg.seed, 1));
    let latent = Matrix::from_vec(m, p, (0..m * p).map(|_| rng::normal(&mut frng)).collect())?;
    // rna columns sit well above zero so expression filters keep them
    let offsets: Vec<f64> = (0..p).map(|k| if k % 2 == 0 { 5.0 } else { 0.0 }).collect();
    let mut stored = latent.clone();
    for i in 0..m {
        for k in 0..p {
            stored[(i, k)] += offsets[k];
        }
    }
    let lines: Vec<String> = (0..m).map(|i| format!("L{:03}", i + 1)).collect();
    let features = FeatureMatrix::new(lines.clone(), feature_names(p), stored)?;

    let mut treatments = vec![TreatmentId::untreated("untreated")];
    treatments.extend((1..=j).map(|t| TreatmentId::new(format!("T{t}"))));
    let mut effects = vec![MeanFunction::default()];
    effects.extend(cfg.effects.iter().cloned());

    let mut nrng = rng::seeded(rng::derive_seed(cfg.seed, 2));
    let mut drng = rng::seeded(rng::derive_seed(cfg.seed, 3));
    let mut records = Vec::with_capacity(m * (j + 1));
    for (i, line) in lines.iter().enumerate() {
        let z = latent.row(i);
        let base = cfg.baseline.eval(z);
        for (t, tr) in treatments.iter().enumerate() {
            let noise = rng::normal(&mut nrng);
            let extra = rng::normal(&mut nrng);
            let dropped = t > 0 && cfg.drop_rate > 0.0 && rng::uniform(&mut drng) < cfg.drop_rate;
            if dropped {
                continue;
            }
            let y = base + effects[t].eval(z) + cfg.noise_sd * noise;
            let mut rec = ResponseRecord::new(line.clone(), tr.id.clone(), y);
            if cfg.companion {
                rec = rec.with_companion(0.5 * y + cfg.noise_sd * extra);
            }
            records.push(rec);
        }
    }
    let dataset = PdxDataset::new(features, treatments, records)?;

    let mut classes: Vec<Vec<usize>> = Vec::new();
    for t in 1..=j {
        match classes.iter_mut().find(|c| effects[c[0]] == effects[t]) {
            Some(c) => c.push(t),
            None => classes.push(vec![t]),
        }
    }
    Ok((
        dataset,
        SyntheticOracle {
            baseline: cfg.baseline.clone(),
            effects,
            noise_sd: cfg.noise_sd,
            classes,
            offsets,
            latent,
        },
    ))
}

/// `mean_x max_G |G|^-1 sum_{a in G} means[x][a]` for a finite feature
/// sample; `means` is `lines × treatments` and `grouping` partitions
/// (a subset of) its columns.
pub fn optimal_value_from_means(means: &Matrix, grouping: &[Vec<usize>]) -> Result<f64> {
    if grouping.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidInput("empty treatment group".into()));
    }
    if grouping.is_empty() || means.rows() == 0 {
        return Err(Error::InvalidInput("no groups or no feature rows".into()));
    }
    if grouping.iter().flatten().any(|&a| a >= means.cols()) {
        return Err(Error::UnknownGroup);
    }
    let best: Vec<f64> = (0..means.rows())
        .map(|i| {
            grouping
                .iter()
                .map(|g| g.iter().map(|&a| means[(i, a)]).sum::<f64>() / g.len() as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(math::mean(&best))
}

/// Where the expectation over features is taken.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSample<'a> {
    /// Exact average over these latent rows.
    Finite(&'a Matrix),
    /// Fresh standard-normal draws.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Optimal value of `grouping` (groups of non-null treatment indices, as
/// in the dataset's treatment list) under the oracle's effects.
pub fn oracle_optimal_value(
    oracle: &SyntheticOracle,
    grouping: &[Vec<usize>],
    sample: FeatureSample<'_>,
) -> Result<f64> {
    let j = oracle.effects.len() - 1;
    if grouping.iter().flatten().any(|&t| t == 0 || t > j) {
        return Err(Error::UnknownGroup);
    }
    let shifted: Vec<Vec<usize>> = grouping.iter().map(|g| g.iter().map(|t| t - 1).collect()).collect();
    match sample {
        FeatureSample::Finite(z) => optimal_value_from_means(&oracle.effect_means(z), &shifted),
        FeatureSample::MonteCarlo { draws, seed } => {
            let p = oracle.latent.cols();
            let mut r = rng::seeded(seed);
            let z = Matrix::from_vec(draws, p, (0..draws * p).map(|_| rng::normal(&mut r)).collect())?;
            optimal_value_from_means(&oracle.effect_means(&z), &shifted)
        }
    }
}
