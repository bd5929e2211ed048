use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    /// Coefficients on the original feature scale.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl LinearModel {
    pub fn constant(value: f64, width: usize) -> Self {
        Self {
            intercept: value,
            coefficients: vec![0.0; width],
            lambda: 0.0,
        }
    }

    pub fn width(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + math::dot(&self.coefficients, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    /// Stop once a sweep lowers the objective by less than this fraction.
    pub rel_tol: f64,
    /// ...and no standardized coefficient moved by more than this multiple
    /// of the response sd.
    pub coef_tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            coef_tol: 1e-9,
            max_sweeps: 100_000,
        }
    }
}

/// Column-standardized design (population sd); zero-sd columns are marked
/// inactive and keep a zero coefficient.
struct Standardized {
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
    y_mean: f64,
    y: Vec<f64>,
}

fn standardize(x: &Matrix, y: &[f64]) -> Result<Standardized> {
    let n = x.rows();
    if n != y.len() {
        return Err(Error::WidthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso inputs".into()));
    }
    let mut cols = Vec::with_capacity(x.cols());
    let mut means = Vec::with_capacity(x.cols());
    let mut sds = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let c = x.column(j);
        let mu = math::mean(&c);
        let sd = math::sqrt(math::variance_pop(&c));
        let z = if sd > 0.0 {
            c.iter().map(|v| (v - mu) / sd).collect()
        } else {
            vec![0.0; n]
        };
        cols.push(z);
        means.push(mu);
        sds.push(sd);
    }
    let y_mean = math::mean(y);
    Ok(Standardized {
        cols,
        means,
        sds,
        y_mean,
        y: y.iter().map(|v| v - y_mean).collect(),
    })
}

/// Smallest penalty at which every coefficient is zero: `max_j |z_j' y| / n`
/// on standardized columns.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> Result<f64> {
    let s = standardize(x, y)?;
    let n = x.rows() as f64;
    Ok(s.cols
        .iter()
        .map(|c| math::abs(math::dot(c, &s.y)) / n)
        .fold(0.0, f64::max))
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Result of a traced fit: the model plus the standardized-scale objective
/// after every sweep (index 0 is the all-zero start).
#[derive(Debug, Clone)]
pub struct LassoTrace {
    pub model: LinearModel,
    pub objective: Vec<f64>,
    pub sweeps: usize,
}

/// Minimizes `(1/2n)||y - b0 - Z beta||^2 + lambda ||beta||_1` over
/// standardized columns by cyclic coordinate descent. The intercept is not
/// penalized; coefficients are reported on the original scale.
pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    fit_lasso_traced(x, y, lambda, &LassoConfig::default()).map(|t| t.model)
}

pub fn fit_lasso_traced(x: &Matrix, y: &[f64], lambda: f64, cfg: &LassoConfig) -> Result<LassoTrace> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(
            "lasso penalty must be a finite non-negative number".into(),
        ));
    }
    let s = standardize(x, y)?;
    let n = x.rows() as f64;
    let p = x.cols();
    let mut beta = vec![0.0; p];
    // g = Z'r / n, updated from Gram columns computed on first use
    let c: Vec<f64> = s.cols.iter().map(|col| math::dot(col, &s.y) / n).collect();
    let mut g = c.clone();
    let mut gram: Vec<Option<Vec<f64>>> = vec![None; p];
    let mut active: Vec<usize> = Vec::new();
    let yy = math::dot(&s.y, &s.y) / n;
    let objective = |beta: &[f64], g: &[f64]| -> f64 {
        let fit: f64 = beta
            .iter()
            .zip(c.iter().zip(g))
            .map(|(b, (ci, gi))| b * (ci + gi))
            .sum();
        0.5 * (yy - fit) + lambda * beta.iter().map(|b| math::abs(*b)).sum::<f64>()
    };
    let step_tol = cfg.coef_tol * math::sqrt(math::variance_pop(&s.y));
    let mut trace = vec![objective(&beta, &g)];
    let mut sweeps = 0;
    let mut full = true;
    let all: Vec<usize> = (0..p).filter(|&j| s.sds[j] > 0.0).collect();
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_step = 0.0f64;
        let set = if full { all.clone() } else { active.clone() };
        for j in set {
            let new = soft_threshold(g[j] + beta[j], lambda);
            let delta = new - beta[j];
            if delta != 0.0 {
                let col = gram[j].get_or_insert_with(|| {
                    active.push(j);
                    s.cols.iter().map(|other| math::dot(other, &s.cols[j]) / n).collect()
                });
                for (gk, gjk) in g.iter_mut().zip(col.iter()) {
                    *gk -= delta * gjk;
                }
                beta[j] = new;
                max_step = max_step.max(math::abs(delta));
            }
        }
        let obj = objective(&beta, &g);
        let prev = *trace.last().expect("non-empty");
        trace.push(obj);
        let small_gain = prev - obj <= cfg.rel_tol * prev.abs().max(f64::MIN_POSITIVE);
        let settled = max_step <= step_tol && small_gain;
        if settled && full {
            break;
        }
        // iterate on the active set until it settles, then recheck everything
        full = settled;
    }
    let coefficients: Vec<f64> = (0..p)
        .map(|j| if s.sds[j] > 0.0 { beta[j] / s.sds[j] } else { 0.0 })
        .collect();
    let intercept = s.y_mean - math::dot(&coefficients, &s.means);
    Ok(LassoTrace {
        model: LinearModel {
            intercept,
            coefficients,
            lambda,
        },
        objective: trace,
        sweeps,
    })
}

/// `count` penalties log-spaced from `lambda_max` down to
/// `min_ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![lambda_max];
    }
    let lo = math::ln(min_ratio);
    (0..count)
        .map(|k| lambda_max * math::exp(lo * k as f64 / (count - 1) as f64))
        .collect()
}
