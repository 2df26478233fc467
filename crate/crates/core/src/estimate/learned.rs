use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Image;
use crate::mesh::{StackedBasis, SubspaceBasis};
use crate::par::{self, Execution};
use crate::rng::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// `q̂ = W ỹ + b` for one fixed basis.
    PerMeshAffine,
    /// A shared linear map from per-triangle pooled features to the triangle
    /// mean; works for any basis.
    SharedPooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Starting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    #[default]
    Zero,
    /// Start from `q̂ = B_λᵀ ỹ`, the projection of the warm start.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Fraction of the samples held out for validation.
    pub validation_fraction: f64,
    pub init: Init,
    pub seed: Seed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            validation_fraction: 0.2,
            init: Init::Zero,
            seed: Seed(0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// A training pair: ground truth `x` and its warm start `ỹ`.
#[derive(Debug, Clone)]
pub struct Sample {
    pub truth: Image,
    pub warm: Image,
}

/// Number of pooled features per triangle: mean of `ỹ`, area, centroid, bias.
pub const POOLED_FEATURES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    kind: EstimatorKind,
    input_dim: usize,
    output_dim: usize,
    params: Vec<f64>,
    basis: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: EstimatorKind,
    input_dim: usize,
    output_dim: usize,
    params: usize,
    basis: Option<String>,
}

impl Estimator {
    /// Zero-initialized estimator for `basis`.
    pub fn zeros(kind: EstimatorKind, basis: &SubspaceBasis) -> Self {
        let n = basis.grid().len();
        match kind {
            EstimatorKind::PerMeshAffine => {
                let k = basis.dim();
                Estimator {
                    kind,
                    input_dim: n,
                    output_dim: k,
                    params: vec![0.0; k * n + k],
                    basis: Some(basis.fingerprint()),
                }
            }
            EstimatorKind::SharedPooled => Estimator {
                kind,
                input_dim: n,
                output_dim: 0,
                params: vec![0.0; POOLED_FEATURES],
                basis: None,
            },
        }
    }

    /// Estimator whose output is `B_λᵀ ỹ`.
    pub fn projection(kind: EstimatorKind, basis: &SubspaceBasis) -> Self {
        let mut est = Self::zeros(kind, basis);
        match kind {
            EstimatorKind::PerMeshAffine => {
                let n = est.input_dim;
                for (p, &c) in basis.pixel_columns().iter().enumerate() {
                    let c = c as usize;
                    est.params[c * n + p] = 1.0 / (basis.count(c) as f64).sqrt();
                }
            }
            EstimatorKind::SharedPooled => est.params[0] = 1.0,
        }
        est
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Fingerprint of the basis a per-mesh estimator belongs to.
    pub fn basis_fingerprint(&self) -> Option<&str> {
        self.basis.as_deref()
    }

    fn check(&self, basis: &SubspaceBasis, warm: &Image) -> Result<()> {
        check_len("warm start", self.input_dim, warm.values().len())?;
        warm.ensure_grid(basis.grid())?;
        if self.kind == EstimatorKind::PerMeshAffine {
            check_len("estimator outputs", self.output_dim, basis.dim())?;
            if let Some(fp) = &self.basis {
                if *fp != basis.fingerprint() {
                    return Err(Error::invalid("estimator was trained for a different basis"));
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: self.kind,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            params: self.params.len(),
            basis: self.basis.clone(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        for &p in &self.params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse("header", "missing newline after JSON header"))?;
        let header: Header =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::parse("header", e.to_string()))?;
        let expected = match header.kind {
            EstimatorKind::PerMeshAffine => header.output_dim * header.input_dim + header.output_dim,
            EstimatorKind::SharedPooled => POOLED_FEATURES,
        };
        if header.params != expected {
            return Err(Error::parse("params", format!("expected {expected}, header says {}", header.params)));
        }
        let blob = &bytes[nl + 1..];
        if blob.len() != 4 * expected {
            return Err(Error::parse("payload", format!("expected {} bytes, found {}", 4 * expected, blob.len())));
        }
        let params = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Estimator {
            kind: header.kind,
            input_dim: header.input_dim,
            output_dim: header.output_dim,
            params,
            basis: header.basis,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Coefficient estimate `q̂` for `basis` from the warm start.
pub fn estimate_coeffs(est: &Estimator, basis: &SubspaceBasis, warm: &Image) -> Result<Vec<f64>> {
    est.check(basis, warm)?;
    let input = Prepared::new(est.kind, basis, warm.values());
    let mut q = vec![0.0; basis.dim()];
    predict(est, &input, &mut q);
    Ok(q)
}

/// Per-sample inputs in the form each kind consumes.
enum Prepared<'a> {
    Raw(&'a [f64]),
    /// Row-major K×F features and `sqrt(count_k)`.
    Pooled(Vec<f64>, Vec<f64>),
}

impl<'a> Prepared<'a> {
    fn new(kind: EstimatorKind, basis: &SubspaceBasis, warm: &'a [f64]) -> Self {
        match kind {
            EstimatorKind::PerMeshAffine => Prepared::Raw(warm),
            EstimatorKind::SharedPooled => {
                let (f, s) = pooled_features(basis, warm);
                Prepared::Pooled(f, s)
            }
        }
    }
}

/// Per-column `[mean ỹ, area, centroid x, centroid y, 1]` and `sqrt(count)`.
fn pooled_features(basis: &SubspaceBasis, warm: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let grid = basis.grid();
    let k = basis.dim();
    let mut sums = vec![[0.0; 3]; k];
    for (p, &c) in basis.pixel_columns().iter().enumerate() {
        let [cx, cy] = grid.center(p);
        let s = &mut sums[c as usize];
        s[0] += warm[p];
        s[1] += cx;
        s[2] += cy;
    }
    let n = grid.len() as f64;
    let mut feats = Vec::with_capacity(k * POOLED_FEATURES);
    let mut root = Vec::with_capacity(k);
    for (s, &count) in sums.iter().zip(basis.counts()) {
        let c = count as f64;
        feats.extend_from_slice(&[s[0] / c, c / n, s[1] / c, s[2] / c, 1.0]);
        root.push(c.sqrt());
    }
    (feats, root)
}

fn predict(est: &Estimator, input: &Prepared, q: &mut [f64]) {
    match input {
        Prepared::Raw(x) => {
            let n = est.input_dim;
            let (w, b) = est.params.split_at(est.output_dim * n);
            for (k, qk) in q.iter_mut().enumerate() {
                *qk = b[k] + w[k * n..(k + 1) * n].iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>();
            }
        }
        Prepared::Pooled(f, root) => {
            for (k, qk) in q.iter_mut().enumerate() {
                let phi = &f[k * POOLED_FEATURES..(k + 1) * POOLED_FEATURES];
                *qk = root[k] * phi.iter().zip(&est.params).map(|(a, w)| a * w).sum::<f64>();
            }
        }
    }
}

/// Adds `scale · ∂‖q̂ − q‖²/∂θ` given the residual `q̂ − q`.
fn accumulate_grad(est: &Estimator, input: &Prepared, residual: &[f64], scale: f64, grad: &mut [f64]) {
    match input {
        Prepared::Raw(x) => {
            let n = est.input_dim;
            let (gw, gb) = grad.split_at_mut(est.output_dim * n);
            for (k, &r) in residual.iter().enumerate() {
                let c = 2.0 * scale * r;
                if c == 0.0 {
                    continue;
                }
                gb[k] += c;
                for (g, v) in gw[k * n..(k + 1) * n].iter_mut().zip(x.iter()) {
                    *g += c * v;
                }
            }
        }
        Prepared::Pooled(f, root) => {
            for (k, &r) in residual.iter().enumerate() {
                let c = 2.0 * scale * r * root[k];
                for (g, v) in grad.iter_mut().zip(&f[k * POOLED_FEATURES..(k + 1) * POOLED_FEATURES]) {
                    *g += c * v;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Parameters with the lowest validation loss (last epoch when there is
    /// no validation split).
    pub estimator: Estimator,
    /// Mean squared coefficient error on the training split, before training
    /// and after every epoch.
    pub train_loss: Vec<f64>,
    /// Same on the validation split; empty without one.
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

/// One training example bound to a basis.
struct Example<'a> {
    input: Prepared<'a>,
    target: Vec<f64>,
}

/// Minimizes the mean squared coefficient error `‖Γ(ỹ) − B_λᵀ x‖²` over
/// `dataset`, which by orthonormality equals the image-space projection error.
pub fn train_estimator(
    dataset: &[Sample],
    basis: &SubspaceBasis,
    kind: EstimatorKind,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_on(dataset, std::slice::from_ref(basis), kind, cfg)
}

/// A shared-pooled estimator fit jointly over every basis of `stack`.
pub fn train_shared(dataset: &[Sample], stack: &StackedBasis, cfg: &TrainConfig) -> Result<TrainReport> {
    train_on(dataset, stack.bases(), EstimatorKind::SharedPooled, cfg)
}

/// One per-mesh estimator per basis of `stack`, trained independently.
pub fn train_ensemble(
    dataset: &[Sample],
    stack: &StackedBasis,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<Vec<TrainReport>> {
    par::try_map_indexed(exec, stack.len(), |l| {
        let cfg = TrainConfig {
            seed: cfg.seed.child(l as u64),
            ..cfg.clone()
        };
        train_estimator(dataset, &stack.bases()[l], EstimatorKind::PerMeshAffine, &cfg)
    })
}

/// Coefficients from every estimator of an ensemble, stacked.
pub fn estimate_stacked(ests: &[Estimator], stack: &StackedBasis, warm: &Image) -> Result<Vec<f64>> {
    let shared = ests.len() == 1 && ests[0].kind == EstimatorKind::SharedPooled;
    if !shared {
        check_len("estimators", stack.len(), ests.len())?;
    }
    let parts = stack
        .bases()
        .iter()
        .enumerate()
        .map(|(l, b)| estimate_coeffs(&ests[if shared { 0 } else { l }], b, warm))
        .collect::<Result<Vec<_>>>()?;
    stack.stack(&parts)
}

fn train_on(dataset: &[Sample], bases: &[SubspaceBasis], kind: EstimatorKind, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if bases.is_empty() {
        return Err(Error::invalid("no basis to train for"));
    }
    let mut est = match cfg.init {
        Init::Zero => Estimator::zeros(kind, &bases[0]),
        Init::Projection => Estimator::projection(kind, &bases[0]),
    };
    for s in dataset {
        est.check(&bases[0], &s.warm)?;
        s.truth.ensure_grid(bases[0].grid())?;
    }

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut cfg.seed.tagged("split").rng());
    let n_val = ((dataset.len() as f64) * cfg.validation_fraction).floor() as usize;
    let n_val = n_val.min(dataset.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let examples = |idx: &[usize]| -> Result<Vec<Example<'_>>> {
        let mut out = Vec::with_capacity(idx.len() * bases.len());
        for &i in idx {
            for b in bases {
                out.push(Example {
                    input: Prepared::new(kind, b, dataset[i].warm.values()),
                    target: b.coeffs(&dataset[i].truth)?,
                });
            }
        }
        Ok(out)
    };
    let train = examples(train_idx)?;
    let val = examples(val_idx)?;

    let mut opt = OptState::new(est.params.len());
    let mut grad = vec![0.0; est.params.len()];
    let mut q = Vec::new();
    let mut train_loss = vec![mean_loss(&est, &train, &mut q)];
    let mut val_loss = if val.is_empty() { Vec::new() } else { vec![mean_loss(&est, &val, &mut q)] };
    let mut best = (val_loss.first().copied().unwrap_or(f64::INFINITY), 0, est.params.clone());

    let mut perm: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        perm.shuffle(&mut cfg.seed.child(epoch as u64).rng());
        for batch in perm.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let ex = &train[i];
                q.resize(ex.target.len(), 0.0);
                predict(&est, &ex.input, &mut q);
                for (qi, t) in q.iter_mut().zip(&ex.target) {
                    *qi -= t;
                }
                let scale = 1.0 / (batch.len() * ex.target.len()) as f64;
                accumulate_grad(&est, &ex.input, &q, scale, &mut grad);
            }
            opt.step(cfg, &mut est.params, &grad);
        }
        let tl = mean_loss(&est, &train, &mut q);
        if !tl.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        train_loss.push(tl);
        if val.is_empty() {
            best = (tl, epoch, Vec::new());
        } else {
            let vl = mean_loss(&est, &val, &mut q);
            val_loss.push(vl);
            if vl < best.0 {
                best = (vl, epoch, est.params.clone());
            }
        }
    }
    if !val.is_empty() {
        est.params = best.2;
    }
    Ok(TrainReport {
        estimator: est,
        train_loss,
        val_loss,
        best_epoch: best.1,
    })
}

fn mean_loss(est: &Estimator, examples: &[Example], q: &mut Vec<f64>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for ex in examples {
        q.resize(ex.target.len(), 0.0);
        predict(est, &ex.input, q);
        total += q.iter().zip(&ex.target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += ex.target.len();
    }
    total / count.max(1) as f64
}

struct OptState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        OptState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, cfg: &TrainConfig, params: &mut [f64], grad: &[f64]) {
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam => {
                self.t += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                }
            }
        }
    }
}
