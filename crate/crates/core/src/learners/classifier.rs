//! Reward-weighted hinge-loss classification.
//!
//! Minimizes
//!
//! ```text
//! (1/n) sum_i |R_i| [ I(R_i >= 0) (1 - A_i f(x_i))_+ + I(R_i < 0) (1 + A_i f(x_i))_+ ] + lambda J(f)
//! ```
//!
//! over linear functions (`J = ||w||^2`) or a Gaussian-kernel expansion
//! (`J = alpha' K alpha`), with an unpenalized bias. A negative reward is the
//! same as a positive one with the label flipped, so the solver works with
//! weights `c_i = |R_i|` and effective labels `y_i = A_i sign(R_i)`.
//!
//! The solver is majorize-minimize: each hinge `(v)_+ = (v + |v|)/2` is
//! bounded above by a quadratic touching it at the current margin, the
//! quadratic is minimized exactly by one linear solve, and a backtracking
//! step on the true objective keeps every iterate no worse than the last.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionClass {
    Linear,
    /// Gaussian kernel; `None` uses the median pairwise distance.
    Gaussian {
        bandwidth: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub lambda: f64,
    pub class: FunctionClass,
    pub max_iter: usize,
    /// Stop once an iteration lowers the objective by less than this fraction.
    pub rel_tol: f64,
}

impl ClassifierConfig {
    pub fn new(lambda: f64, class: FunctionClass) -> Self {
        Self {
            lambda,
            class,
            max_iter: 2000,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionForm {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Kernel {
        /// Standardized training inputs.
        support: Matrix,
        alpha: Vec<f64>,
        bandwidth: f64,
        bias: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionFunction {
    pub form: DecisionForm,
    pub lambda: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

fn gaussian(a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
    math::exp(-math::squared_distance(a, b) / (2.0 * bandwidth * bandwidth))
}

impl DecisionFunction {
    pub fn width(&self) -> usize {
        self.means.len()
    }

    fn standardize_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    /// Raw decision value `f(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let z = self.standardize_row(x);
        match &self.form {
            DecisionForm::Linear { weights, bias } => math::dot(weights, &z) + bias,
            DecisionForm::Kernel {
                support,
                alpha,
                bandwidth,
                bias,
            } => {
                (0..support.rows())
                    .map(|i| alpha[i] * gaussian(support.row(i), &z, *bandwidth))
                    .sum::<f64>()
                    + bias
            }
        }
    }

    /// `f(x)`, with values indistinguishable from zero at machine
    /// precision (relative to the coefficient mass) reported as exactly 0.
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let f = self.value(x);
        let mass = match &self.form {
            DecisionForm::Linear { weights, bias } => {
                math::abs(*bias) + weights.iter().map(|w| math::abs(*w)).sum::<f64>()
            }
            DecisionForm::Kernel { alpha, bias, .. } => {
                math::abs(*bias) + alpha.iter().map(|a| math::abs(*a)).sum::<f64>()
            }
        };
        if math::abs(f) <= 1e-12 * (1.0 + mass) {
            0.0
        } else {
            f
        }
    }

    /// `sign(f(x))` with `sign(0) = +1`.
    pub fn label(&self, x: &[f64]) -> f64 {
        if self.decision_value(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierTrace {
    pub function: DecisionFunction,
    /// Objective at the start and after every iteration.
    pub objective: Vec<f64>,
}

struct Problem {
    z: Matrix,
    y: Vec<f64>,
    c: Vec<f64>,
    n: f64,
    lambda: f64,
    kernel: Option<(Matrix, f64)>,
}

impl Problem {
    fn scores(&self, theta: &[f64]) -> Vec<f64> {
        let k = theta.len() - 1;
        let bias = theta[k];
        match &self.kernel {
            None => (0..self.z.rows())
                .map(|i| math::dot(self.z.row(i), &theta[..k]) + bias)
                .collect(),
            Some((gram, _)) => gram.matvec(&theta[..k]).into_iter().map(|v| v + bias).collect(),
        }
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        let k = theta.len() - 1;
        match &self.kernel {
            None => theta[..k].iter().map(|w| w * w).sum(),
            Some((gram, _)) => math::dot(&theta[..k], &gram.matvec(&theta[..k])),
        }
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        let f = self.scores(theta);
        let loss: f64 = f
            .iter()
            .zip(&self.y)
            .zip(&self.c)
            .map(|((fi, yi), ci)| ci * (1.0 - yi * fi).max(0.0))
            .sum();
        loss / self.n + self.lambda * self.penalty(theta)
    }

    /// Minimizer of the quadratic majorizer at `theta`.
    fn mm_step(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let f = self.scores(theta);
        let n_obs = self.y.len();
        // omega_i multiplies v_i^2, kappa_i multiplies v_i
        let mut omega = vec![0.0; n_obs];
        let mut kappa = vec![0.0; n_obs];
        for i in 0..n_obs {
            let v = 1.0 - self.y[i] * f[i];
            let touch = math::abs(v).max(1e-8);
            omega[i] = self.c[i] / (4.0 * self.n * touch);
            kappa[i] = self.c[i] / (2.0 * self.n);
        }
        match &self.kernel {
            None => {
                let p = self.z.cols();
                let dim = p + 1;
                let mut a = Matrix::zeros(dim, dim);
                let mut rhs = vec![0.0; dim];
                let mut zi = vec![0.0; dim];
                for i in 0..n_obs {
                    zi[..p].copy_from_slice(self.z.row(i));
                    zi[p] = 1.0;
                    let w2 = 2.0 * omega[i];
                    let r = (2.0 * omega[i] + kappa[i]) * self.y[i];
                    for r_ in 0..dim {
                        rhs[r_] += r * zi[r_];
                        let s = w2 * zi[r_];
                        if s == 0.0 {
                            continue;
                        }
                        for c_ in 0..dim {
                            a[(r_, c_)] += s * zi[c_];
                        }
                    }
                }
                for j in 0..p {
                    a[(j, j)] += 2.0 * self.lambda;
                }
                math::solve(&a, &rhs)
            }
            Some((gram, _)) => {
                // [2 lambda I + 2 Omega K, 2 omega; 1', 0] [alpha; b] = [y (2 omega + kappa); 0]
                let dim = n_obs + 1;
                let mut a = Matrix::zeros(dim, dim);
                let mut rhs = vec![0.0; dim];
                for i in 0..n_obs {
                    for j in 0..n_obs {
                        a[(i, j)] = 2.0 * omega[i] * gram[(i, j)];
                    }
                    a[(i, i)] += 2.0 * self.lambda;
                    a[(i, n_obs)] = 2.0 * omega[i];
                    a[(n_obs, i)] = 1.0;
                    rhs[i] = self.y[i] * (2.0 * omega[i] + kappa[i]);
                }
                math::solve(&a, &rhs)
            }
        }
    }
}

/// Fits a weighted hinge-loss decision function. `labels` are ±1 arm
/// indicators; `rewards` weight each observation (sign flips the target).
pub fn fit_weighted_classifier(
    x: &Matrix,
    labels: &[f64],
    rewards: &[f64],
    cfg: &ClassifierConfig,
) -> Result<DecisionFunction> {
    fit_weighted_classifier_traced(x, labels, rewards, cfg).map(|t| t.function)
}

pub fn fit_weighted_classifier_traced(
    x: &Matrix,
    labels: &[f64],
    rewards: &[f64],
    cfg: &ClassifierConfig,
) -> Result<ClassifierTrace> {
    let n = x.rows();
    if labels.len() != n || rewards.len() != n {
        return Err(Error::WidthMismatch {
            expected: n,
            got: labels.len().min(rewards.len()),
        });
    }
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if labels.iter().any(|a| *a != 1.0 && *a != -1.0) {
        return Err(Error::InvalidInput("labels must be +1 or -1".into()));
    }
    if !x.is_finite() || rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("classifier inputs".into()));
    }
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::InvalidInput("classifier penalty must be positive".into()));
    }
    if rewards.iter().all(|r| *r == 0.0) {
        return Err(Error::DegenerateWeights);
    }

    let p = x.cols();
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for j in 0..p {
        let col = x.column(j);
        means.push(math::mean(&col));
        sds.push(math::sqrt(math::variance_pop(&col)));
    }
    let mut z = Matrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            if sds[j] > 0.0 {
                z[(i, j)] = (x[(i, j)] - means[j]) / sds[j];
            }
        }
    }
    let y: Vec<f64> = labels
        .iter()
        .zip(rewards)
        .map(|(a, r)| if *r >= 0.0 { *a } else { -a })
        .collect();
    let c: Vec<f64> = rewards.iter().map(|r| math::abs(*r)).collect();

    let kernel = match cfg.class {
        FunctionClass::Linear => None,
        FunctionClass::Gaussian { bandwidth } => {
            let bw = match bandwidth {
                Some(b) if b > 0.0 => b,
                Some(_) => return Err(Error::InvalidInput("bandwidth must be positive".into())),
                None => median_bandwidth(&z),
            };
            let mut gram = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = gaussian(z.row(i), z.row(j), bw);
                    gram[(i, j)] = v;
                    gram[(j, i)] = v;
                }
            }
            Some((gram, bw))
        }
    };
    let dim = match &kernel {
        None => p + 1,
        Some(_) => n + 1,
    };
    let problem = Problem {
        z,
        y,
        c,
        n: n as f64,
        lambda: cfg.lambda,
        kernel,
    };

    let mut theta = vec![0.0; dim];
    let mut obj = problem.objective(&theta);
    let mut trace = vec![obj];
    for _ in 0..cfg.max_iter {
        let Ok(target) = problem.mm_step(&theta) else {
            break;
        };
        // Backtrack along the MM direction until the true objective does not rise.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(&target).map(|(t, g)| t + step * (g - t)).collect();
            let co = problem.objective(&cand);
            if co.is_finite() && co <= obj {
                accepted = Some((cand, co));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, co)) = accepted else {
            break;
        };
        let gain = obj - co;
        theta = cand;
        obj = co;
        trace.push(obj);
        if gain <= cfg.rel_tol * obj.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let bias = theta[dim - 1];
    theta.truncate(dim - 1);
    let form = match problem.kernel {
        None => DecisionForm::Linear { weights: theta, bias },
        Some((_, bandwidth)) => DecisionForm::Kernel {
            support: problem.z,
            alpha: theta,
            bandwidth,
            bias,
        },
    };
    Ok(ClassifierTrace {
        function: DecisionFunction {
            form,
            lambda: cfg.lambda,
            means,
            sds,
        },
        objective: trace,
    })
}

/// Median pairwise Euclidean distance; 1 when all points coincide.
pub fn median_bandwidth(z: &Matrix) -> f64 {
    let n = z.rows();
    let mut d = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(math::euclidean(z.row(i), z.row(j)));
        }
    }
    let med = math::median(&d);
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Objective value of a fitted function on (x, labels, rewards).
pub fn weighted_hinge_objective(f: &DecisionFunction, x: &Matrix, labels: &[f64], rewards: &[f64]) -> f64 {
    let n = x.rows() as f64;
    let loss: f64 = (0..x.rows())
        .map(|i| {
            let y = if rewards[i] >= 0.0 { labels[i] } else { -labels[i] };
            math::abs(rewards[i]) * (1.0 - y * f.value(x.row(i))).max(0.0)
        })
        .sum();
    let penalty = match &f.form {
        DecisionForm::Linear { weights, .. } => weights.iter().map(|w| w * w).sum::<f64>(),
        DecisionForm::Kernel {
            support,
            alpha,
            bandwidth,
            ..
        } => {
            let mut s = 0.0;
            for i in 0..support.rows() {
                for j in 0..support.rows() {
                    s += alpha[i] * alpha[j] * gaussian(support.row(i), support.row(j), *bandwidth);
                }
            }
            s
        }
    };
    loss / n + f.lambda * penalty
}
