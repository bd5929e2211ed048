use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pdx_itr_core::autoencoder::{encode_features, train_autoencoder, Encoder, TrainConfig};
use pdx_itr_core::evaluation::{
    cross_validate, fit_at, tune, FittedRule, MethodSpec, ScreeningSpec, TuningPoint, ValueReport,
};
use pdx_itr_core::itr::TreatmentRule;
use pdx_itr_core::learners::smooth_outcomes;
use pdx_itr_core::model::{FeatureMatrix, PdxDataset};
use pdx_itr_core::rng::derive_seed;
use pdx_itr_core::screening::{filter_features, filter_treatments, gene_blocks, rank_genes, select_top};
use pdx_itr_core::superlearner::{
    cross_validate_superlearner, fit_superlearner, reference_grouping, SuperLearner, SuperLearnerSpec,
};
use pdx_itr_core::treatment_tree::{build_tree, fit_reward_transform};
use pdx_itr_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{MethodEntry, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{dendrogram_text, write_artifact, write_atomic, FORMAT_VERSION};
use crate::io::{read_features, read_responses, ResponseKind};
use crate::report::{write_reports, CellReport};

pub const RULE_FORMAT: &str = "rule";
pub const MANIFEST_FORMAT: &str = "run-manifest";

/// One entry of the analysis grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub response: ResponseKind,
    pub entry: MethodEntry,
    pub l_sup: Option<usize>,
}

impl Cell {
    pub fn id(&self) -> String {
        let l = self.l_sup.map(|l| l.to_string()).unwrap_or_else(|| "all".into());
        format!("{}__{}__lsup-{l}", self.response.as_str(), self.entry.label())
    }
}

/// Responses × methods × L_sup. Latent-feature cells are not screened, so
/// they appear once per response.
pub fn cells(cfg: &PipelineConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &response in &cfg.responses {
        for entry in &cfg.methods {
            let l_sups: Vec<Option<usize>> = if entry.dae || cfg.l_sup.is_empty() {
                vec![None]
            } else {
                cfg.l_sup.iter().copied().map(Some).collect()
            };
            for l_sup in l_sups {
                out.push(Cell {
                    response,
                    entry: entry.clone(),
                    l_sup,
                });
            }
        }
    }
    out
}

/// Filtered inputs shared by every cell.
pub struct Inputs {
    pub features: FeatureMatrix,
    pub datasets: BTreeMap<ResponseKind, PdxDataset>,
    /// Autoencoder and its latent features, when any cell asks for them.
    pub latent: Option<(Encoder, FeatureMatrix)>,
}

impl Inputs {
    pub fn dataset(&self, kind: ResponseKind) -> CliResult<&PdxDataset> {
        self.datasets
            .get(&kind)
            .ok_or_else(|| CliError::Config(format!("response `{}` was not loaded", kind.as_str())))
    }

    fn cell_dataset(&self, cell: &Cell) -> CliResult<PdxDataset> {
        let data = self.dataset(cell.response)?;
        if cell.entry.dae {
            let (_, latent) = self.latent.as_ref().expect("trained when a cell needs it");
            Ok(data.with_features(latent.clone())?)
        } else {
            Ok(data.clone())
        }
    }
}

pub fn load_inputs(cfg: &PipelineConfig, responses: &[ResponseKind], with_latent: bool) -> CliResult<Inputs> {
    let raw = read_features(&cfg.input.features)?;
    let features = filter_features(&raw, &cfg.filter)?;
    log::info!(
        "{} lines, {} of {} features kept after filtering",
        features.n_lines(),
        features.n_features(),
        raw.n_features()
    );
    let available = gene_blocks(&features).len();
    if let Some(&requested) = cfg.l_sup.iter().max() {
        if requested > available {
            return Err(CoreError::NotEnoughGenes { requested, available }.into());
        }
    }
    let resp = read_responses(&cfg.input.responses)?;
    let mut datasets = BTreeMap::new();
    for &kind in responses {
        let d = resp.dataset(features.clone(), kind, &cfg.input.untreated)?;
        datasets.insert(kind, filter_treatments(&d, cfg.filter.treatment_coverage)?);
    }
    let latent = if with_latent {
        let tc = TrainConfig {
            seed: derive_seed(cfg.seed, 0xDAE),
            ..cfg.autoencoder.clone()
        };
        let enc = train_autoencoder(&features, &tc)?;
        let z = encode_features(&enc, &features)?;
        Some((enc, z))
    } else {
        None
    };
    Ok(Inputs {
        features,
        datasets,
        latent,
    })
}

/// A rule fitted on all lines, with what it needs to score new lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleArtifact {
    pub cell: String,
    /// Treatment names; recommended indices refer to this list.
    pub treatments: Vec<String>,
    /// Columns of the features file the rule (or its encoder) reads.
    pub input_features: Vec<String>,
    #[serde(default)]
    pub encoder: Option<Encoder>,
    pub rule: RuleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    Single {
        chosen: TuningPoint,
        fitted: Box<FittedRule>,
    },
    Ensemble {
        ensemble: SuperLearner,
    },
}

impl RuleArtifact {
    pub fn rule(&self) -> &dyn TreatmentRule {
        match &self.rule {
            RuleKind::Single { fitted, .. } => fitted.rule(),
            RuleKind::Ensemble { ensemble } => ensemble,
        }
    }

    /// Recommended treatment names for every line in `features`.
    pub fn recommend(&self, features: &FeatureMatrix) -> CliResult<Vec<(String, Vec<String>)>> {
        let mut x = features.select_named(&self.input_features)?;
        if let Some(enc) = &self.encoder {
            x = encode_features(enc, &x)?;
        }
        let rule = self.rule();
        let x = x.select_named(rule.feature_names())?;
        let mut out = Vec::with_capacity(x.n_lines());
        for (i, id) in x.line_ids().iter().enumerate() {
            let set = rule.recommend_set(x.values().row(i))?;
            let names = set
                .iter()
                .map(|&t| {
                    self.treatments
                        .get(t)
                        .cloned()
                        .ok_or_else(|| CliError::Runtime(format!("rule refers to unknown treatment {t}")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            out.push((id.clone(), names));
        }
        Ok(out)
    }
}

fn screening(cfg: &PipelineConfig, cell: &Cell) -> Option<ScreeningSpec> {
    cell.l_sup.map(|l_sup| ScreeningSpec {
        l_sup,
        mode: cfg.screening_mode,
    })
}

fn method_spec(cfg: &PipelineConfig, cell: &Cell) -> Option<MethodSpec> {
    let method = cell.entry.method(&cfg.forest)?;
    Some(MethodSpec {
        method,
        grid: cfg.tuning_grid(),
        smoothing: cell.entry.smoothed.then(|| cfg.forest.clone()),
        screening: screening(cfg, cell),
        inner_folds: cfg.inner_folds,
    })
}

fn sl_spec(cfg: &PipelineConfig, cell: &Cell, seed: u64) -> CliResult<SuperLearnerSpec> {
    let members = cfg
        .sl_members(cell.entry.name)
        .ok_or_else(|| CliError::Config(format!("`{}` is not a superlearner preset", cell.entry.label())))?;
    Ok(SuperLearnerSpec {
        name: cell.entry.label(),
        members,
        c1: cfg.superlearner.c1,
        c2: cfg.superlearner.c2,
        inner_folds: cfg.inner_folds,
        sa: cfg.sa_config(seed),
        screening: screening(cfg, cell),
        smoothing: cfg.forest.clone(),
    })
}

/// Outer cross-validated value of one cell. All cells share the configured
/// seed so methods are compared on the same folds.
pub fn evaluate_cell(cfg: &PipelineConfig, inputs: &Inputs, cell: &Cell) -> CliResult<ValueReport> {
    let data = inputs.cell_dataset(cell)?;
    let mut report = match method_spec(cfg, cell) {
        Some(spec) => cross_validate(&spec, &data, cfg.folds, cfg.seed)?,
        None => cross_validate_superlearner(&sl_spec(cfg, cell, cfg.seed)?, &data, cfg.folds, cfg.seed)?,
    };
    report.method = cell.entry.label();
    Ok(report)
}

/// Fits the cell's rule on all lines: screening and smoothing as in the
/// cross-validation, then tuning (or weight annealing) on the full data.
pub fn fit_cell(cfg: &PipelineConfig, inputs: &Inputs, cell: &Cell) -> CliResult<RuleArtifact> {
    let mut data = inputs.cell_dataset(cell)?;
    let input_features = if cell.entry.dae {
        inputs.features.feature_names().to_vec()
    } else {
        Vec::new()
    };
    if let Some(sc) = screening(cfg, cell) {
        let ranked = rank_genes(&data, sc.mode)?;
        let keep = select_top(&ranked, data.features().feature_names(), sc.l_sup)?;
        data = data.with_features(data.features().select_named(&keep.feature_names)?)?;
    }
    let treatments = data.treatments().iter().map(|t| t.id.clone()).collect();
    let rule = match method_spec(cfg, cell) {
        Some(spec) => {
            if let Some(params) = &spec.smoothing {
                data = smooth_outcomes(&data, params, derive_seed(cfg.seed, 0x5300))?;
            }
            let plain = MethodSpec {
                smoothing: None,
                screening: None,
                ..spec
            };
            let chosen = tune(&plain, &data, cfg.seed)?.best;
            let fitted = fit_at(&plain.method, &chosen, &data, cfg.seed)?;
            RuleKind::Single {
                chosen,
                fitted: Box::new(fitted),
            }
        }
        None => {
            let spec = sl_spec(cfg, cell, cfg.seed)?;
            let grouping = reference_grouping(&data, spec.c1, spec.c2)?;
            let ensemble = fit_superlearner(
                &spec.members,
                &data,
                &grouping,
                spec.inner_folds,
                &spec.sa,
                &spec.smoothing,
            )?;
            RuleKind::Ensemble { ensemble }
        }
    };
    let mut art = RuleArtifact {
        cell: cell.id(),
        treatments,
        input_features,
        encoder: cell
            .entry
            .dae
            .then(|| inputs.latent.as_ref().expect("trained").0.clone()),
        rule,
    };
    if art.input_features.is_empty() {
        art.input_features = art.rule().feature_names().to_vec();
    }
    Ok(art)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Cross-validated reports only.
    Evaluate,
    /// Reports plus full-data rules and dendrograms.
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputFingerprint {
    pub path: PathBuf,
    pub bytes: u64,
    /// FNV-1a 64 of the file contents, hex.
    pub fnv64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellStatus {
    pub cell: String,
    pub status: String,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub format_version: u32,
    pub stage: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<InputFingerprint>,
    pub cells: Vec<CellStatus>,
    pub outputs: Vec<PathBuf>,
}

fn fnv64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn fingerprint(path: &Path) -> CliResult<InputFingerprint> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(InputFingerprint {
        path: path.to_path_buf(),
        bytes: bytes.len() as u64,
        fnv64: format!("{:016x}", fnv64(&bytes)),
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out: PathBuf,
    pub cells: Vec<CellReport>,
    pub failures: usize,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every cell on a pool of `workers` threads and writes reports,
/// rules, dendrograms and a manifest under `cfg.out`. Failed cells are
/// recorded rather than aborting the run.
pub fn run(cfg: &PipelineConfig, stage: Stage, workers: usize) -> CliResult<RunSummary> {
    cfg.validate()?;
    let grid = cells(cfg);
    let inputs = load_inputs(cfg, &cfg.responses, grid.iter().any(|c| c.entry.dae))?;
    let out = cfg.out.clone();
    let rules_dir = out.join("rules");

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let results: Vec<(CellReport, Vec<PathBuf>)> = pool.install(|| {
        grid.par_iter()
            .map(|cell| {
                let id = cell.id();
                log::info!("cell {id}");
                let work = || -> CliResult<(ValueReport, Vec<PathBuf>)> {
                    let report = evaluate_cell(cfg, &inputs, cell)?;
                    let mut files = Vec::new();
                    if stage == Stage::Full {
                        let art = fit_cell(cfg, &inputs, cell)?;
                        let p = rules_dir.join(format!("{id}.json"));
                        write_artifact(&p, RULE_FORMAT, &art)?;
                        files.push(p);
                    }
                    Ok((report, files))
                };
                let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(work))
                    .unwrap_or_else(|p| Err(CliError::Runtime(panic_message(p))));
                let (report, error, files) = match outcome {
                    Ok((r, f)) => (Some(r), None, f),
                    Err(e) => {
                        log::error!("cell {id} failed: {e}");
                        (None, Some(e.to_string()), Vec::new())
                    }
                };
                (
                    CellReport {
                        cell: id,
                        response: cell.response,
                        method: cell.entry.label(),
                        l_sup: cell.l_sup,
                        report,
                        error,
                    },
                    files,
                )
            })
            .collect()
    });

    let mut outputs = Vec::new();
    let mut reports = Vec::with_capacity(results.len());
    for (r, files) in results {
        outputs.extend(files);
        reports.push(r);
    }
    outputs.extend(write_reports(&out, &reports)?);
    if stage == Stage::Full {
        for (&kind, data) in &inputs.datasets {
            for &c1 in &cfg.grid.c1 {
                let written = fit_reward_transform(data, c1)
                    .and_then(|t| t.apply(data))
                    .and_then(|r| build_tree(&r));
                match written {
                    Ok(d) => {
                        let p = out.join("dendrograms").join(format!("{}_c1-{c1}.txt", kind.as_str()));
                        write_atomic(&p, dendrogram_text(&d).as_bytes())?;
                        outputs.push(p);
                    }
                    Err(e) => log::warn!("no dendrogram for {} at c1 = {c1}: {e}", kind.as_str()),
                }
            }
        }
    }
    let failures = reports.iter().filter(|r| r.report.is_none()).count();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        format_version: FORMAT_VERSION,
        stage: match stage {
            Stage::Evaluate => "evaluate",
            Stage::Full => "run",
        }
        .into(),
        seed: cfg.seed,
        config: cfg.clone(),
        inputs: vec![fingerprint(&cfg.input.features)?, fingerprint(&cfg.input.responses)?],
        cells: reports
            .iter()
            .map(|r| CellStatus {
                cell: r.cell.clone(),
                status: if r.report.is_some() { "ok" } else { "failed" }.into(),
                error: r.error.clone(),
            })
            .collect(),
        outputs: outputs
            .iter()
            .map(|p| p.strip_prefix(&out).unwrap_or(p).to_path_buf())
            .collect(),
    };
    write_artifact(&out.join("manifest.json"), MANIFEST_FORMAT, &manifest)?;
    Ok(RunSummary {
        out,
        cells: reports,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
