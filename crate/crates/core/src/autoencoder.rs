//! Autoencoder dimension reduction with a PCA baseline.
//!
//! The network is `p -> 4h -> h -> 4h -> p` with tanh hidden units and a
//! linear output layer, trained with Adam on standardized inputs. Features
//! with zero variance are standardized to zero, carry no loss, and decode to
//! their training mean.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};
use crate::model::FeatureMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Candidate bottleneck widths; a single entry skips cross-validation.
    pub bottleneck_grid: Vec<usize>,
    pub folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 0,
            bottleneck_grid: vec![1, 2, 4, 8],
            folds: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.folds < 2 || self.bottleneck_grid.is_empty() {
            return Err(Error::InvalidInput("training settings must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        if self.bottleneck_grid.contains(&0) {
            return Err(Error::InvalidInput("bottleneck width must be positive".into()));
        }
        Ok(())
    }
}

/// Dense feed-forward network with all parameters in one flat vector.
/// Layer `k` maps `widths[k]` to `widths[k + 1]`; its weights are stored
/// row-major (output by input) followed by its biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub widths: Vec<usize>,
    pub params: Vec<f64>,
}

impl Network {
    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for k in 0..self.widths.len() - 1 {
            let last = *off.last().expect("non-empty");
            off.push(last + self.widths[k + 1] * (self.widths[k] + 1));
        }
        off
    }

    pub fn n_params(widths: &[usize]) -> usize {
        widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Activations for layers `from..to`, starting at input `x`. Every layer
    /// but the last of the whole network is tanh.
    fn forward_range(&self, x: &[f64], from: usize, to: usize) -> Vec<Vec<f64>> {
        let off = self.offsets();
        let mut acts = vec![x.to_vec()];
        for k in from..to {
            let (nin, nout) = (self.widths[k], self.widths[k + 1]);
            let w = &self.params[off[k]..off[k] + nout * nin];
            let b = &self.params[off[k] + nout * nin..off[k + 1]];
            let input = acts.last().expect("non-empty");
            let mut out = Vec::with_capacity(nout);
            for o in 0..nout {
                let s = math::dot(&w[o * nin..(o + 1) * nin], input) + b[o];
                out.push(if k + 1 < self.n_layers() { math::tanh(s) } else { s });
            }
            acts.push(out);
        }
        acts
    }

    /// Adds the gradient of `weight * sum_j mask_j (out_j - target_j)^2` for
    /// one row into `grad`; returns the unweighted masked squared error.
    fn accumulate(&self, z: &[f64], mask: &[bool], weight: f64, grad: &mut [f64]) -> f64 {
        let acts = self.forward_range(z, 0, self.n_layers());
        let off = self.offsets();
        let out = acts.last().expect("non-empty");
        let mut sse = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(z)
            .zip(mask)
            .map(|((o, t), &m)| {
                if m {
                    let d = o - t;
                    sse += d * d;
                    2.0 * weight * d
                } else {
                    0.0
                }
            })
            .collect();
        for k in (0..self.n_layers()).rev() {
            let (nin, nout) = (self.widths[k], self.widths[k + 1]);
            if k + 1 < self.n_layers() {
                // through tanh: d/ds tanh(s) = 1 - a^2
                for (d, a) in delta.iter_mut().zip(&acts[k + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &acts[k];
            let wo = off[k];
            let bo = off[k] + nout * nin;
            let mut back = vec![0.0; nin];
            for o in 0..nout {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[bo + o] += d;
                let row = wo + o * nin;
                for i in 0..nin {
                    grad[row + i] += d * input[i];
                    back[i] += d * self.params[row + i];
                }
            }
            delta = back;
        }
        sse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub network: Network,
    /// Index of the bottleneck in `network.widths`.
    pub bottleneck_layer: usize,
    /// Mean validation error per grid width (empty without cross-validation).
    pub cv_errors: Vec<(usize, f64)>,
    /// Reconstruction error on the training rows.
    pub training_mse: f64,
}

impl Encoder {
    pub fn input_width(&self) -> usize {
        self.means.len()
    }

    pub fn bottleneck(&self) -> usize {
        self.network.widths[self.bottleneck_layer]
    }

    fn active(&self) -> Vec<bool> {
        self.sds.iter().map(|s| *s > 0.0).collect()
    }

    fn standardize_row(&self, x: &[f64]) -> Vec<f64> {
        standardize_row(x, &self.means, &self.sds)
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::WidthMismatch {
                expected: self.input_width(),
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Standardized reconstruction of one row; inactive features are zero.
    fn reconstruct_standardized(&self, z: &[f64]) -> Vec<f64> {
        let acts = self.network.forward_range(z, 0, self.network.n_layers());
        let mut out = acts.last().expect("non-empty").clone();
        for (o, s) in out.iter_mut().zip(&self.sds) {
            if *s <= 0.0 {
                *o = 0.0;
            }
        }
        out
    }
}

fn standardize_row(x: &[f64], means: &[f64], sds: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(means.iter().zip(sds))
        .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
        .collect()
}

fn column_stats(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    (0..x.cols())
        .map(|j| {
            let c = x.column(j);
            (math::mean(&c), math::sqrt(math::variance_pop(&c)))
        })
        .unzip()
}

/// Latent representation, `n x h`.
pub fn encode(enc: &Encoder, x: &Matrix) -> Result<Matrix> {
    enc.check_width(x)?;
    let h = enc.bottleneck();
    let mut out = Matrix::zeros(x.rows(), h);
    for i in 0..x.rows() {
        let z = enc.standardize_row(x.row(i));
        let acts = enc.network.forward_range(&z, 0, enc.bottleneck_layer);
        out.row_mut(i).copy_from_slice(acts.last().expect("non-empty"));
    }
    Ok(out)
}

/// Maps latents back to the original feature scale.
pub fn decode(enc: &Encoder, latent: &Matrix) -> Result<Matrix> {
    if latent.cols() != enc.bottleneck() {
        return Err(Error::WidthMismatch {
            expected: enc.bottleneck(),
            got: latent.cols(),
        });
    }
    let p = enc.input_width();
    let mut out = Matrix::zeros(latent.rows(), p);
    for i in 0..latent.rows() {
        let acts = enc
            .network
            .forward_range(latent.row(i), enc.bottleneck_layer, enc.network.n_layers());
        let z = acts.last().expect("non-empty");
        for j in 0..p {
            out[(i, j)] = if enc.sds[j] > 0.0 {
                enc.means[j] + enc.sds[j] * z[j]
            } else {
                enc.means[j]
            };
        }
    }
    Ok(out)
}

/// Mean squared standardized residual over rows and non-constant features.
pub fn reconstruction_error(enc: &Encoder, x: &Matrix) -> Result<f64> {
    enc.check_width(x)?;
    let active = enc.active();
    let pa = active.iter().filter(|a| **a).count();
    if pa == 0 || x.rows() == 0 {
        return Ok(0.0);
    }
    let mut sse = 0.0;
    for i in 0..x.rows() {
        let z = enc.standardize_row(x.row(i));
        let r = enc.reconstruct_standardized(&z);
        for j in 0..z.len() {
            if active[j] {
                sse += (r[j] - z[j]) * (r[j] - z[j]);
            }
        }
    }
    Ok(sse / (x.rows() * pa) as f64)
}

/// Reconstruction error of the rank-`h` principal-component projection of
/// standardized `x`: trailing eigenvalues of `Z'Z` over `n * p_active`.
pub fn pca_error(x: &Matrix, h: usize) -> Result<f64> {
    let p = x.cols();
    if h >= p {
        return Err(Error::OutOfRange {
            what: "principal components",
            value: h,
            min: 0,
            max: p.saturating_sub(1),
        });
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (means, sds) = column_stats(x);
    let active: Vec<usize> = (0..p).filter(|&j| sds[j] > 0.0).collect();
    let pa = active.len();
    if h >= pa {
        return Ok(0.0);
    }
    let mut gram = Matrix::zeros(pa, pa);
    for i in 0..n {
        let z: Vec<f64> = active.iter().map(|&j| (x[(i, j)] - means[j]) / sds[j]).collect();
        for a in 0..pa {
            for b in a..pa {
                gram[(a, b)] += z[a] * z[b];
            }
        }
    }
    for a in 0..pa {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let (values, _) = math::symmetric_eigen(&gram);
    let trailing: f64 = values[h..].iter().map(|v| v.max(0.0)).sum();
    Ok(trailing / (n * pa) as f64)
}

fn init_network(p: usize, h: usize, seed: u64) -> Network {
    let widths = vec![p, 4 * h, h, 4 * h, p];
    let mut r = rng::seeded(seed);
    let mut params = Vec::with_capacity(Network::n_params(&widths));
    for w in widths.windows(2) {
        // Glorot uniform weights, zero biases
        let limit = math::sqrt(6.0 / (w[0] + w[1]) as f64);
        for _ in 0..w[0] * w[1] {
            params.push(limit * (2.0 * rng::uniform(&mut r) - 1.0));
        }
        params.extend(core::iter::repeat_n(0.0, w[1]));
    }
    Network { widths, params }
}

/// Loss (mean masked squared error) and its gradient over the given rows.
pub fn loss_and_gradient(net: &Network, z: &Matrix, rows: &[usize], mask: &[bool]) -> (f64, Vec<f64>) {
    let pa = mask.iter().filter(|m| **m).count().max(1);
    let weight = 1.0 / (rows.len() * pa) as f64;
    let mut grad = vec![0.0; net.params.len()];
    let mut sse = 0.0;
    for &i in rows {
        sse += net.accumulate(z.row(i), mask, weight, &mut grad);
    }
    (sse * weight, grad)
}

fn train_network(x: &Matrix, h: usize, cfg: &TrainConfig, seed: u64) -> Result<Encoder> {
    let (n, p) = (x.rows(), x.cols());
    let (means, sds) = column_stats(x);
    let mask: Vec<bool> = sds.iter().map(|s| *s > 0.0).collect();
    let mut z = Matrix::zeros(n, p);
    for i in 0..n {
        z.row_mut(i).copy_from_slice(&standardize_row(x.row(i), &means, &sds));
    }
    let mut net = init_network(p, h, rng::derive_seed(seed, 1));
    let mut shuffle_rng = rng::seeded(rng::derive_seed(seed, 2));
    let batch = if n < 64 { n } else { cfg.batch_size.min(n) };
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; net.params.len()];
    let mut v = vec![0.0; net.params.len()];
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        if batch < n {
            rng::shuffle(&mut shuffle_rng, &mut order);
        }
        for chunk in order.chunks(batch) {
            let (loss, grad) = loss_and_gradient(&net, &z, chunk, &mask);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            t += 1;
            let c1 = 1.0 - math::powi(b1, t);
            let c2 = 1.0 - math::powi(b2, t);
            for k in 0..grad.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
                net.params[k] -= cfg.learning_rate * (m[k] / c1) / (math::sqrt(v[k] / c2) + eps);
            }
        }
    }
    let mut enc = Encoder {
        feature_names: Vec::new(),
        means,
        sds,
        network: net,
        bottleneck_layer: 2,
        cv_errors: Vec::new(),
        training_mse: 0.0,
    };
    enc.training_mse = reconstruction_error(&enc, x)?;
    if !enc.training_mse.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }
    Ok(enc)
}

/// Trains on `x`, choosing the bottleneck by k-fold validation error when
/// the grid has more than one width (ties go to the smaller width).
pub fn train_autoencoder(x: &FeatureMatrix, cfg: &TrainConfig) -> Result<Encoder> {
    cfg.validate()?;
    let values = x.values();
    let (n, p) = (values.rows(), values.cols());
    if !values.is_finite() {
        return Err(Error::NonFinite("autoencoder inputs".into()));
    }
    let mut grid: Vec<usize> = cfg.bottleneck_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    grid.retain(|&h| h < p);
    let Some(&smallest) = grid.first() else {
        return Err(Error::OutOfRange {
            what: "bottleneck",
            value: cfg.bottleneck_grid[0],
            min: 1,
            max: p.saturating_sub(1),
        });
    };
    if n < smallest + 1 {
        return Err(Error::TooFewSamples {
            needed: smallest + 1,
            got: n,
        });
    }

    let mut cv_errors = Vec::new();
    let chosen = if grid.len() == 1 {
        grid[0]
    } else {
        let k = cfg.folds.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut rng::seeded(rng::derive_seed(cfg.seed, 0xF01D)), &mut order);
        let mut best: Option<(f64, usize)> = None;
        for &h in &grid {
            let mut total = 0.0;
            for fold in 0..k {
                let valid: Vec<usize> = order.iter().copied().skip(fold).step_by(k).collect();
                let train: Vec<usize> = (0..n).filter(|i| !valid.contains(i)).collect();
                let seed = rng::derive_seed(cfg.seed, ((h as u64) << 16) | fold as u64);
                let enc = train_network(&values.select_rows(&train), h, cfg, seed)?;
                total += reconstruction_error(&enc, &values.select_rows(&valid))?;
            }
            let err = total / k as f64;
            cv_errors.push((h, err));
            if best.is_none_or(|(e, _)| err < e) {
                best = Some((err, h));
            }
        }
        best.expect("non-empty grid").1
    };
    let mut enc = train_network(values, chosen, cfg, rng::derive_seed(cfg.seed, chosen as u64))?;
    enc.feature_names = x.feature_names().to_vec();
    enc.cv_errors = cv_errors;
    Ok(enc)
}

/// Replaces the features of `x` by their latent coordinates, named `latent{k}`.
pub fn encode_features(enc: &Encoder, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x.feature_names() != enc.feature_names.as_slice() {
        return Err(Error::InvalidInput(
            "feature names differ from the encoder's training features".into(),
        ));
    }
    let latent = encode(enc, x.values())?;
    let names = (0..enc.bottleneck())
        .map(|k| alloc::format!("latent{}", k + 1))
        .collect();
    FeatureMatrix::new(x.line_ids().to_vec(), names, latent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(n: usize, seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        let mut data = Vec::new();
        for _ in 0..n {
            let t = 2.0 * rng::uniform(&mut r) - 1.0;
            data.extend([t, t * t, math::tanh(3.0 * t)]);
        }
        Matrix::from_vec(n, 3, data).unwrap()
    }

    fn fm(x: Matrix) -> FeatureMatrix {
        let lines = (0..x.rows()).map(|i| alloc::format!("L{i}")).collect();
        let names = (0..x.cols()).map(|j| alloc::format!("G{j}.rna")).collect();
        FeatureMatrix::new(lines, names, x).unwrap()
    }

    fn cfg(h: usize, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            bottleneck_grid: vec![h],
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::seeded(5);
        for trial in 0..5 {
            let net = init_network(4, 1 + trial % 2, 100 + trial as u64);
            let z = Matrix::from_vec(6, 4, (0..24).map(|_| rng::normal(&mut r)).collect()).unwrap();
            let mask = [true, true, false, true];
            let rows: Vec<usize> = (0..6).collect();
            let (_, g) = loss_and_gradient(&net, &z, &rows, &mask);
            for k in 0..net.params.len() {
                let step = 1e-5;
                let mut plus = net.clone();
                plus.params[k] += step;
                let mut minus = net.clone();
                minus.params[k] -= step;
                let fd = (loss_and_gradient(&plus, &z, &rows, &mask).0 - loss_and_gradient(&minus, &z, &rows, &mask).0)
                    / (2.0 * step);
                let rel = (fd - g[k]).abs() / (fd.abs() + g[k].abs()).max(1e-6);
                assert!(rel < 1e-4, "param {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn constant_columns_reconstruct_exactly() {
        let x = Matrix::from_vec(5, 2, vec![3.0; 10]).unwrap();
        let enc = train_autoencoder(&fm(x.clone()), &cfg(1, 5)).unwrap();
        assert_eq!(reconstruction_error(&enc, &x).unwrap(), 0.0);
        let back = decode(&enc, &encode(&enc, &x).unwrap()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn curve_beats_pca_at_one_dimension() {
        let x = curve(120, 3);
        let enc = train_autoencoder(&fm(x.clone()), &cfg(1, 1500)).unwrap();
        let ae = reconstruction_error(&enc, &x).unwrap();
        let pca = pca_error(&x, 1).unwrap();
        assert!(ae < pca, "ae {ae} pca {pca}");
        assert_eq!(enc.training_mse, ae);
    }

    #[test]
    fn zeroed_decoder_gives_unit_error() {
        let x = curve(40, 4);
        let mut enc = train_autoencoder(&fm(x.clone()), &cfg(1, 2)).unwrap();
        let off = Network::n_params(&enc.network.widths[..=2]);
        for w in enc.network.params[off..].iter_mut() {
            *w = 0.0;
        }
        assert!((reconstruction_error(&enc, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pca_examples() {
        // exact line in 3-D
        let x = Matrix::from_rows(
            &(0..10)
                .map(|i| {
                    let t = i as f64;
                    vec![t, 2.0 * t + 1.0, -t]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(pca_error(&x, 1).unwrap() < 1e-12);
        assert!(pca_error(&x, 3).is_err());
        // isotropic noise: half the mass survives h = 2 of 4
        let mut r = rng::seeded(7);
        let x = Matrix::from_vec(4000, 4, (0..16000).map(|_| rng::normal(&mut r)).collect()).unwrap();
        let e = pca_error(&x, 2).unwrap();
        assert!((e - 0.5).abs() < 0.05, "{e}");
        let mut prev = f64::INFINITY;
        for h in 0..4 {
            let e = pca_error(&x, h).unwrap();
            assert!(e <= prev + 1e-12);
            prev = e;
        }
    }

    #[test]
    fn encoding_shape_and_determinism() {
        let x = curve(30, 8);
        let enc = train_autoencoder(&fm(x.clone()), &cfg(2, 20)).unwrap();
        let a = encode(&enc, &x).unwrap();
        assert_eq!((a.rows(), a.cols()), (30, 2));
        let twice = Matrix::from_rows(&[x.row(0).to_vec(), x.row(0).to_vec()]).unwrap();
        let b = encode(&enc, &twice).unwrap();
        assert_eq!(b.row(0), b.row(1));
        assert_eq!(enc, train_autoencoder(&fm(x.clone()), &cfg(2, 20)).unwrap());
        assert!(encode(&enc, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn cross_validation_picks_from_grid() {
        let x = curve(40, 9);
        let c = TrainConfig {
            epochs: 50,
            bottleneck_grid: vec![2, 1, 5],
            ..Default::default()
        };
        let enc = train_autoencoder(&fm(x), &c).unwrap();
        assert_eq!(enc.cv_errors.iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(enc.bottleneck() == 1 || enc.bottleneck() == 2);
    }
}
