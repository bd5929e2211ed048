use std::path::{Path, PathBuf};

use pdx_itr_core::autoencoder::TrainConfig;
use pdx_itr_core::evaluation::{Learner, Method, TuningGrid};
use pdx_itr_core::itr::{ItrConfig, Propagation, QlVariant};
use pdx_itr_core::learners::classifier::FunctionClass;
use pdx_itr_core::learners::forest::ForestParams;
use pdx_itr_core::learners::RegressorSpec;
use pdx_itr_core::screening::{ScreeningCriteria, ScreeningMode};
use pdx_itr_core::superlearner::{SaConfig, SlMember};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::ResponseKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub features: PathBuf,
    pub responses: PathBuf,
    #[serde(default = "default_untreated")]
    pub untreated: String,
}

fn default_untreated() -> String {
    "untreated".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Ql1,
    Ql2,
    Ql1Rf,
    Ql2Rf,
    OwlLinear,
    OwlGaussian,
    Lasso,
    Rf,
    Sl4,
    Sl6,
    Sl8,
}

impl MethodName {
    pub fn is_superlearner(self) -> bool {
        matches!(self, MethodName::Sl4 | MethodName::Sl6 | MethodName::Sl8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub name: MethodName,
    /// Fit on forest-smoothed outcomes.
    #[serde(default)]
    pub smoothed: bool,
    /// Replace the features by the autoencoder's latent representation.
    #[serde(default)]
    pub dae: bool,
    #[serde(default)]
    pub propagation: Propagation,
}

impl MethodEntry {
    pub fn label(&self) -> String {
        let mut s = serde_json::to_value(self.name)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        if self.propagation == Propagation::MaxDownstream {
            s.push_str("_maxdown");
        }
        if self.smoothed {
            s.push_str("_smoothed");
        }
        if self.dae {
            s.push_str("_dae");
        }
        s
    }

    /// The single-rule method; `None` for superlearner presets.
    pub fn method(&self, forest: &ForestParams) -> Option<Method> {
        let rf = || Learner::Forest { params: forest.clone() };
        let propagation = self.propagation;
        let ql = |variant, learner| Method::TreeQl {
            variant,
            learner,
            propagation,
        };
        Some(match self.name {
            MethodName::Ql1 => ql(QlVariant::Ql1, Learner::Lasso),
            MethodName::Ql2 => ql(QlVariant::Ql2, Learner::Lasso),
            MethodName::Ql1Rf => ql(QlVariant::Ql1, rf()),
            MethodName::Ql2Rf => ql(QlVariant::Ql2, rf()),
            MethodName::OwlLinear => Method::TreeOwl {
                class: FunctionClass::Linear,
                propagation,
            },
            MethodName::OwlGaussian => Method::TreeOwl {
                class: FunctionClass::Gaussian { bandwidth: None },
                propagation,
            },
            MethodName::Lasso => Method::Flat {
                learner: Learner::Lasso,
            },
            MethodName::Rf => Method::Flat { learner: rf() },
            MethodName::Sl4 | MethodName::Sl6 | MethodName::Sl8 => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub c1: Vec<usize>,
    pub c2: Vec<usize>,
    /// Lasso penalties as fractions of `lambda_max`; OWL penalties relative
    /// to the mean absolute reward.
    pub lambda: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = TuningGrid::default();
        Self {
            c1: g.c1,
            c2: g.c2,
            lambda: g.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperLearnerConfig {
    pub c1: usize,
    pub c2: usize,
    /// Fixed lasso penalty fraction for the lasso-based members.
    pub lambda: f64,
    pub iterations: usize,
    pub random_chains: usize,
}

impl Default for SuperLearnerConfig {
    fn default() -> Self {
        let sa = SaConfig::default();
        Self {
            c1: 0,
            c2: 2,
            lambda: 0.05,
            iterations: sa.iterations,
            random_chains: sa.random_chains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    #[serde(default = "default_responses")]
    pub responses: Vec<ResponseKind>,
    /// Number of screened genes per cell; empty means no screening.
    #[serde(default)]
    pub l_sup: Vec<usize>,
    #[serde(default)]
    pub screening_mode: ScreeningMode,
    #[serde(default)]
    pub filter: ScreeningCriteria,
    pub methods: Vec<MethodEntry>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_inner_folds")]
    pub inner_folds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub autoencoder: TrainConfig,
    #[serde(default)]
    pub superlearner: SuperLearnerConfig,
}

fn default_responses() -> Vec<ResponseKind> {
    vec![ResponseKind::NegBar]
}
fn default_folds() -> usize {
    5
}
fn default_inner_folds() -> usize {
    3
}
fn default_seed() -> u64 {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("pdx-itr-out")
}

impl PipelineConfig {
    /// Parses a TOML config; relative paths are taken from the config's
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for p in [&mut cfg.input.features, &mut cfg.input.responses, &mut cfg.out] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.methods.is_empty() {
            return bad("`methods` must list at least one method");
        }
        if self.responses.is_empty() {
            return bad("`responses` must not be empty");
        }
        if self.grid.c1.is_empty() || self.grid.c2.is_empty() || self.grid.lambda.is_empty() {
            return bad("tuning grids must be non-empty");
        }
        if self.grid.c2.contains(&0) {
            return bad("c2 values must be at least 1");
        }
        if self.grid.lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("lambda values must be finite and non-negative");
        }
        if self.l_sup.contains(&0) {
            return bad("l_sup values must be positive");
        }
        if self.folds < 2 || self.inner_folds < 2 {
            return bad("folds and inner_folds must be at least 2");
        }
        if self.superlearner.c2 == 0 || self.superlearner.iterations == 0 {
            return bad("superlearner c2 and iterations must be positive");
        }
        for m in &self.methods {
            if m.name.is_superlearner() && (m.smoothed || m.dae) {
                return bad("superlearner presets fix their own smoothing and do not take `dae`");
            }
            if m.name.is_superlearner() && m.propagation != Propagation::SelectedGroup {
                return bad("superlearner presets use the default propagation");
            }
        }
        self.filter.validate()?;
        if self.methods.iter().any(|m| m.dae) {
            self.autoencoder.validate()?;
        }
        for p in [&self.input.features, &self.input.responses] {
            if !p.is_file() {
                return Err(CliError::Config(format!("input file `{}` does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn tuning_grid(&self) -> TuningGrid {
        TuningGrid {
            c1: self.grid.c1.clone(),
            c2: self.grid.c2.clone(),
            lambda: self.grid.lambda.clone(),
        }
    }

    pub fn sa_config(&self, seed: u64) -> SaConfig {
        SaConfig {
            iterations: self.superlearner.iterations,
            random_chains: self.superlearner.random_chains,
            seed,
            ..SaConfig::default()
        }
    }

    /// Members of a superlearner preset: SL4 combines the smoothed
    /// Q-learning rules, SL6 adds the unsmoothed forest ones, SL8 the
    /// unsmoothed lasso ones.
    pub fn sl_members(&self, name: MethodName) -> Option<Vec<SlMember>> {
        let lasso = RegressorSpec::lasso(self.superlearner.lambda);
        let rf = RegressorSpec::Forest {
            params: self.forest.clone(),
        };
        let member = |variant, learner: &RegressorSpec, smoothed| SlMember {
            config: ItrConfig::qlearning(variant, learner.clone()),
            smoothed,
        };
        let mut out = vec![
            member(QlVariant::Ql1, &lasso, true),
            member(QlVariant::Ql2, &lasso, true),
            member(QlVariant::Ql1, &rf, true),
            member(QlVariant::Ql2, &rf, true),
        ];
        match name {
            MethodName::Sl4 => {}
            MethodName::Sl6 => {
                out.push(member(QlVariant::Ql1, &rf, false));
                out.push(member(QlVariant::Ql2, &rf, false));
            }
            MethodName::Sl8 => {
                out.push(member(QlVariant::Ql1, &rf, false));
                out.push(member(QlVariant::Ql2, &rf, false));
                out.push(member(QlVariant::Ql1, &lasso, false));
                out.push(member(QlVariant::Ql2, &lasso, false));
            }
            _ => return None,
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        methods = [{ name = "ql1" }, { name = "rf", smoothed = true }, { name = "sl6" }]
        [input]
        features = "f.tsv"
        responses = "r.tsv"
    "#;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = PipelineConfig::from_toml(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.input.features, PathBuf::from("/data/f.tsv"));
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.responses, vec![ResponseKind::NegBar]);
        assert_eq!(cfg.methods[1].label(), "rf_smoothed");
        assert_eq!(cfg.sl_members(MethodName::Sl6).unwrap().len(), 6);
        assert_eq!(cfg.sl_members(MethodName::Sl8).unwrap().len(), 8);
        assert!(cfg.methods[2].method(&cfg.forest).is_none());
    }

    #[test]
    fn unknown_fields_and_empty_grids_rejected() {
        assert!(PipelineConfig::from_toml(&format!("bogus = 1\n{MINIMAL}"), Path::new("")).is_err());
        let mut cfg = PipelineConfig::from_toml(MINIMAL, Path::new("")).unwrap();
        cfg.grid.c2.clear();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_inputs_rejected() {
        let cfg = PipelineConfig::from_toml(MINIMAL, Path::new("/nonexistent")).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("does not exist"));
        assert_eq!(err.exit_code(), 1);
    }
}
