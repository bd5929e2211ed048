//! Supervised learners used inside tree nodes and as baselines.

pub mod classifier;
pub mod forest;
pub mod lasso;
pub mod smoothing;

use serde::{Deserialize, Serialize};

pub use classifier::{
    fit_weighted_classifier, fit_weighted_classifier_traced, ClassifierConfig, DecisionFunction, FunctionClass,
};
pub use forest::{fit_random_forest, Forest, ForestParams};
pub use lasso::{fit_lasso, lambda_max, LinearModel};
pub use smoothing::smooth_outcomes;

use crate::error::{Error, Result};
use crate::math::Matrix;

/// A fitted regression model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Lasso(LinearModel),
    Forest(Forest),
}

impl Regressor {
    pub fn width(&self) -> usize {
        match self {
            Regressor::Lasso(m) => m.width(),
            Regressor::Forest(f) => f.n_features,
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Lasso(m) => m.predict_row(x),
            Regressor::Forest(f) => f.predict_row(x),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<alloc::vec::Vec<f64>> {
        if x.cols() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                got: x.cols(),
            });
        }
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

/// How a regression learner is configured before seeing data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorSpec {
    /// Penalty given as a fraction of the fit's own `lambda_max`.
    Lasso {
        lambda_fraction: f64,
    },
    Forest {
        params: ForestParams,
    },
}

impl RegressorSpec {
    pub fn lasso(lambda_fraction: f64) -> Self {
        RegressorSpec::Lasso { lambda_fraction }
    }

    pub fn forest() -> Self {
        RegressorSpec::Forest {
            params: ForestParams::default(),
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[f64], seed: u64) -> Result<Regressor> {
        match self {
            RegressorSpec::Lasso { lambda_fraction } => {
                if !(*lambda_fraction >= 0.0) {
                    return Err(Error::InvalidInput(
                        "lasso penalty fraction must be non-negative".into(),
                    ));
                }
                let lam = lambda_max(x, y)? * lambda_fraction;
                fit_lasso(x, y, lam).map(Regressor::Lasso)
            }
            RegressorSpec::Forest { params } => {
                // small nodes cannot honour a large leaf size; shrink it instead of failing
                let mut params = params.clone();
                params.min_leaf = params.min_leaf.min(x.rows()).max(1);
                fit_random_forest(x, y, &params, seed).map(Regressor::Forest)
            }
        }
    }
}
