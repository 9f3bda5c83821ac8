//! Desk-scale training: linear/MLP encoders with manual backpropagation,
//! plain SGD, multiview augmentation, eigenvalue-trajectory recording, and an
//! online linear probe.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::{atomic_write, batch_iter, DatasetHandle};
use crate::gradients::analytic_grad;
use crate::linalg::Matrix;
use crate::objectives::{ObjectiveSpec, ViewSet};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FROS";
pub const CHECKPOINT_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    Linear,
    Mlp,
}

/// Trainable map from inputs to embeddings; stands in for the encoder plus
/// projector at desk scale.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub kind: EncoderKind,
    pub layers: Vec<Layer>,
}

fn init_layer<R: Rng>(fan_in: usize, fan_out: usize, act: Activation, rng: &mut R) -> Layer {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w = Matrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-bound..=bound))
        .expect("finite init");
    Layer { w, b: vec![0.0; fan_out], act }
}

impl Encoder {
    pub fn linear<R: Rng>(input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        Self {
            kind: EncoderKind::Linear,
            layers: vec![init_layer(input_dim, output_dim, Activation::Identity, rng)],
        }
    }

    /// ReLU hidden layers, identity output layer.
    pub fn mlp<R: Rng>(input_dim: usize, hidden: &[usize], output_dim: usize, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden {
            layers.push(init_layer(prev, h, Activation::Relu, rng));
            prev = h;
        }
        layers.push(init_layer(prev, output_dim, Activation::Identity, rng));
        Self { kind: EncoderKind::Mlp, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").w.cols()
    }

    /// Forward pass; the cache holds each layer input and pre-activation.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dim(format!(
                "encoder expects {} input columns, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut pre = cur.matmul(&layer.w)?;
            let (n, d) = pre.shape();
            let mut data = pre.as_slice().to_vec();
            for i in 0..n {
                for j in 0..d {
                    data[i * d + j] += layer.b[j];
                }
            }
            pre = Matrix::new(n, d, data)?;
            let post = Matrix::from_fn(n, d, |i, j| layer.act.apply(pre.get(i, j)))?;
            inputs.push(cur);
            preacts.push(pre);
            cur = post;
        }
        Ok((cur, ForwardCache { inputs, preacts }))
    }

    /// Backpropagate `dl_dz` through the cached forward pass; returns exact
    /// parameter gradients.
    pub fn backward(&self, cache: &ForwardCache, dl_dz: &Matrix) -> Result<ParamGrads> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Dim("cache does not match encoder depth".into()));
        }
        let mut grads = vec![None; self.layers.len()];
        let mut upstream = dl_dz.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.preacts[l];
            if upstream.shape() != pre.shape() {
                return Err(Error::Dim(format!(
                    "layer {l}: upstream gradient shape {:?} does not match cached {:?}",
                    upstream.shape(),
                    pre.shape()
                )));
            }
            let d_pre = Matrix::from_fn(pre.rows(), pre.cols(), |i, j| {
                upstream.get(i, j) * layer.act.derivative(pre.get(i, j))
            })?;
            let x = &cache.inputs[l];
            let dw = x.transpose().matmul(&d_pre)?;
            let mut db = vec![0.0; pre.cols()];
            for i in 0..pre.rows() {
                for (bj, v) in db.iter_mut().zip(d_pre.row(i)) {
                    *bj += v;
                }
            }
            upstream = d_pre.matmul(&layer.w.transpose())?;
            grads[l] = Some((dw, db));
        }
        Ok(ParamGrads { layers: grads.into_iter().map(|g| g.expect("filled")).collect() })
    }

    /// Plain SGD: `w <- w - lr * g`, no momentum, no weight decay.
    pub fn sgd_step(&mut self, grads: &ParamGrads, lr: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Dim("gradient depth does not match encoder".into()));
        }
        for (layer, (dw, db)) in self.layers.iter_mut().zip(&grads.layers) {
            layer.w = layer.w.sub(&dw.scale(lr))?;
            for (b, g) in layer.b.iter_mut().zip(db) {
                *b -= lr * g;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    preacts: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

impl ParamGrads {
    pub fn zeros_like(enc: &Encoder) -> Self {
        Self {
            layers: enc
                .layers
                .iter()
                .map(|l| (Matrix::zeros(l.w.rows(), l.w.cols()), vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &ParamGrads) -> Result<()> {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w = w.add(ow)?;
            for (x, y) in b.iter_mut().zip(ob) {
                *x += y;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

/// Image-free augmentations: additive Gaussian noise, random feature
/// dropout, and cyclic feature shift (crop stand-in).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugSpec {
    pub noise_std: f64,
    pub dropout_prob: f64,
    pub shift_max: usize,
}

impl AugSpec {
    pub fn none() -> Self {
        Self { noise_std: 0.0, dropout_prob: 0.0, shift_max: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_std < 0.0 {
            return Err(Error::Param(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::Param(format!(
                "dropout_prob must be in [0,1), got {}",
                self.dropout_prob
            )));
        }
        Ok(())
    }
}

/// V independently augmented copies of the batch; deterministic given the
/// RNG state.
pub fn make_views<R: Rng>(batch: &Matrix, v: usize, aug: &AugSpec, rng: &mut R) -> Result<ViewSet> {
    if v < 2 {
        return Err(Error::Param(format!("need at least 2 views, got {v}")));
    }
    aug.validate()?;
    let (n, d) = batch.shape();
    let views = (0..v)
        .map(|_| {
            let mut data = Vec::with_capacity(n * d);
            for i in 0..n {
                let row = batch.row(i);
                let shift = if aug.shift_max > 0 { rng.gen_range(0..=aug.shift_max) % d } else { 0 };
                for j in 0..d {
                    let mut val = row[(j + shift) % d];
                    if aug.noise_std > 0.0 {
                        let noise: f64 = StandardNormal.sample(rng);
                        val += aug.noise_std * noise;
                    }
                    if aug.dropout_prob > 0.0 && rng.gen::<f64>() < aug.dropout_prob {
                        val = 0.0;
                    }
                    data.push(val);
                }
            }
            Matrix::new(n, d, data)
        })
        .collect::<Result<_>>()?;
    ViewSet::new(views)
}

// ---------------------------------------------------------------------------
// Training configuration and trajectory
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: ObjectiveSpec,
    pub encoder: EncoderSpec,
    pub views: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub top_k: usize,
    pub augmentation: AugSpec,
    pub probe_enabled: bool,
    pub record_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.views < 2 {
            return Err(Error::Config(format!("views must be >= 2, got {}", self.views)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        if self.top_k > self.encoder.output_dim {
            return Err(Error::Config(format!(
                "top_k {} exceeds embedding dimension {}",
                self.top_k, self.encoder.output_dim
            )));
        }
        if self.encoder.kind == EncoderKind::Linear && !self.encoder.hidden.is_empty() {
            return Err(Error::Config("linear encoder takes no hidden layers".into()));
        }
        if self.encoder.kind == EncoderKind::Mlp && self.encoder.hidden.is_empty() {
            return Err(Error::Config("mlp encoder needs at least one hidden layer".into()));
        }
        self.augmentation.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// One recorded step: loss decomposition, optional probe accuracy, and the
/// top-k eigenvalues of the view-1 embedding covariance.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub loss: f64,
    pub inv: f64,
    pub var: f64,
    pub acc: Option<f64>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub top_k: usize,
    pub points: Vec<TrajectoryPoint>,
}

impl TrajectoryRecord {
    /// CSV with header `step,loss,inv,var,acc,lambda_1..lambda_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,inv,var,acc");
        for k in 1..=self.top_k {
            out.push_str(&format!(",lambda_{k}"));
        }
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{:.16e},{:.16e},{:.16e},", p.step, p.loss, p.inv, p.var));
            if let Some(a) = p.acc {
                out.push_str(&format!("{a:.16e}"));
            }
            for l in &p.eigenvalues {
                out.push_str(&format!(",{l:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("empty trajectory file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 6 || cols[..5] != ["step", "loss", "inv", "var", "acc"] {
            return Err(Error::Format("line 1: unrecognized trajectory header".into()));
        }
        let top_k = cols.len() - 5;
        let mut points = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} fields, got {}",
                    i + 1,
                    cols.len(),
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Format(format!("line {}: bad {what} '{s}'", i + 1)))
            };
            let step: usize = fields[0]
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad step '{}'", i + 1, fields[0])))?;
            let acc = if fields[4].is_empty() { None } else { Some(parse(fields[4], "acc")?) };
            let eigenvalues = fields[5..]
                .iter()
                .map(|s| parse(s, "eigenvalue"))
                .collect::<Result<Vec<f64>>>()?;
            points.push(TrajectoryPoint {
                step,
                loss: parse(fields[1], "loss")?,
                inv: parse(fields[2], "inv")?,
                var: parse(fields[3], "var")?,
                acc,
                eigenvalues,
            });
        }
        if points.is_empty() {
            return Err(Error::Format("trajectory has no data rows".into()));
        }
        Ok(Self { top_k, points })
    }

    /// Probe accuracy series as (step, accuracy) pairs.
    pub fn accuracy_series(&self) -> Vec<(usize, f64)> {
        self.points.iter().filter_map(|p| p.acc.map(|a| (p.step, a))).collect()
    }
}

/// First recorded step where the smallest tracked eigenvalue has previously
/// risen above `rise_frac * lambda_1` and now declines; `None` if never.
pub fn saturation_step(traj: &TrajectoryRecord, rise_frac: f64) -> Option<usize> {
    let pts = &traj.points;
    let last = |p: &TrajectoryPoint| *p.eigenvalues.last().expect("nonempty spectrum");
    let mut risen = false;
    for i in 1..pts.len() {
        risen = risen || last(&pts[i - 1]) > rise_frac * pts[i - 1].eigenvalues[0];
        if risen && last(&pts[i]) < last(&pts[i - 1]) {
            return Some(pts[i].step);
        }
    }
    None
}

/// `lambda_1 / lambda_k` at the given recorded step.
pub fn condition_number(traj: &TrajectoryRecord, step: usize) -> Result<f64> {
    let p = traj
        .points
        .iter()
        .find(|p| p.step == step)
        .ok_or_else(|| Error::Param(format!("step {step} was not recorded")))?;
    let lk = *p.eigenvalues.last().expect("nonempty spectrum");
    if lk <= 1e-15 {
        return Err(Error::Degenerate(format!("lambda_k at step {step} is {lk}")));
    }
    Ok(p.eigenvalues[0] / lk)
}

/// First step whose accuracy reaches `target`; `None` otherwise.
pub fn steps_to_accuracy(series: &[(usize, f64)], target: f64) -> Option<usize> {
    series.iter().find(|(_, a)| *a >= target).map(|(s, _)| *s)
}

// ---------------------------------------------------------------------------
// Online probe
// ---------------------------------------------------------------------------

/// Multinomial logistic regression trained by SGD on frozen embeddings.
#[derive(Debug, Clone)]
pub struct OnlineProbe {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub lr: f64,
    classes: usize,
}

impl OnlineProbe {
    pub fn new(dim: usize, classes: usize, lr: f64) -> Self {
        Self { w: Matrix::zeros(dim, classes), b: vec![0.0; classes], lr, classes }
    }

    fn logits(&self, z: &Matrix) -> Result<Matrix> {
        let raw = z.matmul(&self.w)?;
        Matrix::from_fn(raw.rows(), raw.cols(), |i, j| raw.get(i, j) + self.b[j])
    }

    /// Top-1 accuracy of the current probe on a labeled batch.
    pub fn accuracy(&self, z: &Matrix, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(z)?;
        let mut correct = 0usize;
        for (i, &label) in labels.iter().enumerate() {
            let row = logits.row(i);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(j, _)| j)
                .unwrap();
            if argmax == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / labels.len() as f64)
    }

    /// One SGD step of softmax cross-entropy on a frozen embedding batch.
    pub fn step(&mut self, z: &Matrix, labels: &[usize]) -> Result<()> {
        if z.rows() != labels.len() {
            return Err(Error::Dim("probe batch/label mismatch".into()));
        }
        let n = z.rows();
        let logits = self.logits(z)?;
        // softmax probabilities minus one-hot targets
        let delta = Matrix::from_fn(n, self.classes, |i, j| {
            let row = logits.row(i);
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let denom: f64 = row.iter().map(|&v| (v - m).exp()).sum();
            let p = (row[j] - m).exp() / denom;
            p - if labels[i] == j { 1.0 } else { 0.0 }
        })?;
        let dw = z.transpose().matmul(&delta)?.scale(1.0 / n as f64);
        self.w = self.w.sub(&dw.scale(self.lr))?;
        for j in 0..self.classes {
            let mut g = 0.0;
            for i in 0..n {
                g += delta.get(i, j);
            }
            self.b[j] -= self.lr * g / n as f64;
        }
        Ok(())
    }
}

/// Train a probe alone on fixed features; returns (step, accuracy) pairs at
/// each eval interval.
pub fn probe_series(
    ds: &DatasetHandle,
    batch_size: usize,
    steps: usize,
    lr: f64,
    seed: u64,
    eval_every: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut probe = OnlineProbe::new(ds.dim(), ds.class_count, lr);
    let mut it = batch_iter(ds, batch_size, seed)?;
    let mut series = Vec::new();
    for step in 0..=steps {
        let (z, labels) = it.next_batch();
        if step % eval_every == 0 || step == steps {
            series.push((step, probe.accuracy(&z, &labels)?));
        }
        if step < steps {
            probe.step(&z, &labels)?;
        }
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

const PROBE_LR: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trajectory: TrajectoryRecord,
    pub encoder: Encoder,
}

fn check_finite(step: usize, term: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical { step, term: term.to_string() })
    }
}

/// Deterministic SGD training run; records the loss decomposition, probe
/// accuracy, and the top-k raw eigenvalues of the view-1 embedding covariance
/// every `record_every` steps (plus the initial and final state).
pub fn train_run(config: &TrainConfig, data: &DatasetHandle) -> Result<TrainOutcome> {
    config.validate()?;
    if config.batch_size > data.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds dataset size {}",
            config.batch_size,
            data.len()
        )));
    }
    let mut root = ChaCha12Rng::seed_from_u64(config.seed);
    let init_seed: u64 = root.gen();
    let batch_seed: u64 = root.gen();
    let aug_seed: u64 = root.gen();

    let mut init_rng = ChaCha12Rng::seed_from_u64(init_seed);
    let mut encoder = match config.encoder.kind {
        EncoderKind::Linear => {
            Encoder::linear(data.dim(), config.encoder.output_dim, &mut init_rng)
        }
        EncoderKind::Mlp => Encoder::mlp(
            data.dim(),
            &config.encoder.hidden,
            config.encoder.output_dim,
            &mut init_rng,
        ),
    };
    let mut aug_rng = ChaCha12Rng::seed_from_u64(aug_seed);
    let mut it = batch_iter(data, config.batch_size, batch_seed)?;
    let mut probe = config
        .probe_enabled
        .then(|| OnlineProbe::new(config.encoder.output_dim, data.class_count, PROBE_LR));

    let mut points = Vec::new();
    for step in 0..=config.steps {
        let (batch, labels) = it.next_batch();
        let input_views = make_views(&batch, config.views, &config.augmentation, &mut aug_rng)?;

        // a weight blow-up can surface as a non-finite matrix entry anywhere
        // in the forward/gradient chain; tag it with the failing step
        let tag = |e: Error| match e {
            Error::NonFinite(term) => Error::Numerical { step, term },
            other => other,
        };
        let mut caches = Vec::with_capacity(config.views);
        let mut embeddings = Vec::with_capacity(config.views);
        for x in input_views.views() {
            let (z, cache) = encoder.forward(x).map_err(tag)?;
            embeddings.push(z);
            caches.push(cache);
        }
        let vs = ViewSet::new(embeddings)?;
        let grad = analytic_grad(&vs, &config.objective).map_err(tag)?;
        check_finite(step, "loss", grad.value)?;

        // probe runs on the clean (unaugmented) batch embeddings
        let acc = if let Some(probe) = probe.as_mut() {
            let (clean_z, _) = encoder.forward(&batch)?;
            let a = probe.accuracy(&clean_z, &labels)?;
            probe.step(&clean_z, &labels)?;
            Some(a)
        } else {
            None
        };

        if step % config.record_every == 0 || step == config.steps {
            let res = crate::objectives::evaluate(&vs, &config.objective)?;
            let cov = vs.views()[0].center_columns().covariance();
            let eig = cov.sym_eig()?;
            let eigenvalues: Vec<f64> =
                eig.eigenvalues.iter().take(config.top_k).map(|&l| l.max(0.0)).collect();
            points.push(TrajectoryPoint {
                step,
                loss: res.total,
                inv: res.invariance_part,
                var: res.variance_part,
                acc,
                eigenvalues,
            });
        }

        if step == config.steps {
            break;
        }
        let mut total = ParamGrads::zeros_like(&encoder);
        for (cache, g) in caches.iter().zip(&grad.grads) {
            if let Some(&bad) = g.as_slice().iter().find(|v| !v.is_finite()) {
                let _ = bad;
                return Err(Error::Numerical { step, term: "embedding gradient".into() });
            }
            total.accumulate(&encoder.backward(cache, g)?)?;
        }
        encoder.sgd_step(&total, config.learning_rate)?;
    }

    Ok(TrainOutcome {
        trajectory: TrajectoryRecord { top_k: config.top_k, points },
        encoder,
    })
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

/// Versioned binary checkpoint: magic `FROS`, version u32, layer count u32,
/// then per layer `in u32, out u32, activation u8`, row-major little-endian
/// f64 weights, and f64 biases.
pub fn save_checkpoint(enc: &Encoder, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(enc.layers.len() as u32).to_le_bytes());
    for layer in &enc.layers {
        out.extend_from_slice(&(layer.w.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.w.cols() as u32).to_le_bytes());
        out.push(match layer.act {
            Activation::Identity => 0,
            Activation::Relu => 1,
        });
        for &v in layer.w.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &layer.b {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    atomic_write(path, &out)
}

pub fn load_checkpoint(path: &Path) -> Result<Encoder> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Format(format!(
                "checkpoint truncated at byte {} (wanted {n} more)",
                *pos
            )));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let act = match take(&mut pos, 1)?[0] {
            0 => Activation::Identity,
            1 => Activation::Relu,
            a => return Err(Error::Format(format!("unknown activation code {a}"))),
        };
        let mut w = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            w.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
        }
        let mut b = Vec::with_capacity(cols);
        for _ in 0..cols {
            b.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
        }
        layers.push(Layer { w: Matrix::new(rows, cols, w)?, b, act });
    }
    if pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes in checkpoint", bytes.len() - pos)));
    }
    if layers.is_empty() {
        return Err(Error::Format("checkpoint has no layers".into()));
    }
    let kind = if layers.iter().any(|l| l.act == Activation::Relu) {
        EncoderKind::Mlp
    } else {
        EncoderKind::Linear
    };
    Ok(Encoder { kind, layers })
}

// ---------------------------------------------------------------------------
// Reference experiment
// ---------------------------------------------------------------------------

/// The stepwise-dynamics dataset: 10 strongly separated Gaussian classes in
/// 64 dimensions. Features carry a global scale factor so that lr=0.01 is a
/// stable step size for every objective, including the hinge and covariance
/// penalties whose gradients grow with the input scale; the class/noise
/// spectrum shape is unaffected.
pub fn reference_dataset(seed: u64) -> DatasetHandle {
    let mut ds =
        crate::datasets::synth_gaussian_mixture(10, 64, 100, 20.0, seed).expect("valid parameters");
    let scaled: Vec<f64> =
        ds.features.as_slice().iter().map(|v| v * REFERENCE_FEATURE_SCALE).collect();
    ds.features = Matrix::new(ds.features.rows(), ds.features.cols(), scaled).expect("finite");
    ds
}

pub const REFERENCE_FEATURE_SCALE: f64 = 0.18;

/// Linear 64 -> 20 encoder, N=256, lr=0.01, 2000 steps, recording every 10.
pub fn reference_config(objective: ObjectiveSpec, views: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        objective,
        encoder: EncoderSpec { kind: EncoderKind::Linear, hidden: vec![], output_dim: 20 },
        views,
        batch_size: 256,
        learning_rate: 0.01,
        steps: 2000,
        seed,
        top_k: 20,
        augmentation: AugSpec { noise_std: 0.18, dropout_prob: 0.0, shift_max: 0 },
        probe_enabled: true,
        record_every: 10,
    }
}

/// The operationalized rise threshold for saturation detection.
pub const REFERENCE_RISE_FRAC: f64 = 0.05;

/// The multiview-efficiency dataset: overlapping Gaussian classes so the
/// probe target is only reachable once the representation has improved.
pub fn multiview_dataset(seed: u64) -> DatasetHandle {
    crate::datasets::synth_gaussian_mixture(10, 64, 100, 5.0, seed).expect("valid parameters")
}

/// MLP 64 -> 32 -> 20 encoder under heavy augmentation noise; more views per
/// step speed up the probe's path to the accuracy target.
pub fn multiview_config(objective: ObjectiveSpec, views: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        objective,
        encoder: EncoderSpec { kind: EncoderKind::Mlp, hidden: vec![32], output_dim: 20 },
        views,
        batch_size: 256,
        learning_rate: 0.01,
        steps: 2000,
        seed,
        top_k: 20,
        augmentation: AugSpec { noise_std: 1.5, dropout_prob: 0.0, shift_max: 0 },
        probe_enabled: true,
        record_every: 10,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_gaussian_mixture;
    use crate::objectives::{ObjectiveKind, ObjectiveSpec};

    fn small_config(kind: ObjectiveKind, steps: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            objective: ObjectiveSpec::new(kind),
            encoder: EncoderSpec { kind: EncoderKind::Linear, hidden: vec![], output_dim: 6 },
            views: 2,
            batch_size: 32,
            learning_rate: 0.01,
            steps,
            seed,
            top_k: 6,
            augmentation: AugSpec { noise_std: 0.5, dropout_prob: 0.0, shift_max: 0 },
            probe_enabled: true,
            record_every: 5,
        }
    }

    #[test]
    fn make_views_examples() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let batch = Matrix::random_standard(8, 4, &mut rng);

        let vs = make_views(&batch, 3, &AugSpec::none(), &mut rng).unwrap();
        for v in vs.views() {
            assert_eq!(v.as_slice(), batch.as_slice());
        }

        // noise-only: mean |deviation| approximates the half-normal mean
        let sigma = 0.7;
        let aug = AugSpec { noise_std: sigma, dropout_prob: 0.0, shift_max: 0 };
        let big = Matrix::zeros(500, 40);
        let vs = make_views(&big, 2, &aug, &mut rng).unwrap();
        let mean_abs: f64 = vs.views()[0].as_slice().iter().map(|v| v.abs()).sum::<f64>()
            / (500.0 * 40.0);
        let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean_abs - expected).abs() < 0.02, "{mean_abs} vs {expected}");

        // determinism
        let mut r1 = ChaCha12Rng::seed_from_u64(9);
        let mut r2 = ChaCha12Rng::seed_from_u64(9);
        let aug = AugSpec { noise_std: 0.3, dropout_prob: 0.2, shift_max: 2 };
        let a = make_views(&batch, 2, &aug, &mut r1).unwrap();
        let b = make_views(&batch, 2, &aug, &mut r2).unwrap();
        for (x, y) in a.views().iter().zip(b.views()) {
            assert_eq!(x.as_slice(), y.as_slice());
        }

        assert!(make_views(&batch, 1, &AugSpec::none(), &mut rng).is_err());
        let bad = AugSpec { noise_std: -1.0, dropout_prob: 0.0, shift_max: 0 };
        assert!(make_views(&batch, 2, &bad, &mut rng).is_err());
    }

    #[test]
    fn forward_examples() {
        let enc = Encoder {
            kind: EncoderKind::Linear,
            layers: vec![Layer { w: Matrix::identity(3), b: vec![0.0; 3], act: Activation::Identity }],
        };
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let x = Matrix::random_standard(5, 3, &mut rng);
        let (z, _) = enc.forward(&x).unwrap();
        assert_eq!(z.as_slice(), x.as_slice());

        // relu clamps negatives
        let enc = Encoder {
            kind: EncoderKind::Mlp,
            layers: vec![Layer { w: Matrix::identity(2), b: vec![0.0; 2], act: Activation::Relu }],
        };
        let x = Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let (z, _) = enc.forward(&x).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 2.0]);

        // matches direct composition of primitives
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let enc = Encoder::mlp(4, &[6], 3, &mut rng);
        let x = Matrix::random_standard(7, 4, &mut rng);
        let (z, _) = enc.forward(&x).unwrap();
        let h = x.matmul(&enc.layers[0].w).unwrap();
        let h = Matrix::from_fn(7, 6, |i, j| (h.get(i, j) + enc.layers[0].b[j]).max(0.0)).unwrap();
        let manual = h.matmul(&enc.layers[1].w).unwrap();
        let manual =
            Matrix::from_fn(7, 3, |i, j| manual.get(i, j) + enc.layers[1].b[j]).unwrap();
        assert!(z.sub(&manual).unwrap().frobenius_norm() < 1e-12);

        // shape mismatch
        assert!(enc.forward(&Matrix::zeros(2, 5)).is_err());
    }

    #[test]
    fn backward_examples() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let enc = Encoder::linear(4, 3, &mut rng);
        let x = Matrix::random_standard(6, 4, &mut rng);
        let (_, cache) = enc.forward(&x).unwrap();

        // zero upstream -> zero grads
        let g = enc.backward(&cache, &Matrix::zeros(6, 3)).unwrap();
        assert!(g.layers[0].0.frobenius_norm() == 0.0);

        // single linear layer: dW = X^T dZ
        let dz = Matrix::random_standard(6, 3, &mut rng);
        let g = enc.backward(&cache, &dz).unwrap();
        let expected = x.transpose().matmul(&dz).unwrap();
        assert!(g.layers[0].0.sub(&expected).unwrap().frobenius_norm() < 1e-12);

        // stale cache shape
        assert!(enc.backward(&cache, &Matrix::zeros(5, 3)).is_err());
    }

    #[test]
    fn encoder_params_pass_finite_difference_check() {
        // loss = ||Z||_F^2; dL/dZ = 2Z
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let enc = Encoder::mlp(3, &[5], 2, &mut rng);
        let x = Matrix::random_standard(8, 3, &mut rng);
        let (z, cache) = enc.forward(&x).unwrap();
        let grads = enc.backward(&cache, &z.scale(2.0)).unwrap();

        let h = 1e-6;
        for l in 0..enc.layers.len() {
            let (rows, cols) = enc.layers[l].w.shape();
            for idx in [(0, 0), (rows - 1, cols - 1)] {
                let eval = |delta: f64| {
                    let mut e = enc.clone();
                    let mut data = e.layers[l].w.as_slice().to_vec();
                    data[idx.0 * cols + idx.1] += delta;
                    e.layers[l].w = Matrix::new(rows, cols, data).unwrap();
                    let (z, _) = e.forward(&x).unwrap();
                    z.frobenius_norm().powi(2)
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads.layers[l].0.get(idx.0, idx.1);
                assert!((fd - an).abs() < 1e-5 * fd.abs().max(1.0), "layer {l} {idx:?}: {an} vs {fd}");
            }
            // bias gradient, first entry
            let eval_b = |delta: f64| {
                let mut e = enc.clone();
                e.layers[l].b[0] += delta;
                let (z, _) = e.forward(&x).unwrap();
                z.frobenius_norm().powi(2)
            };
            let fd = (eval_b(h) - eval_b(-h)) / (2.0 * h);
            assert!((fd - grads.layers[l].1[0]).abs() < 1e-5 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn sgd_examples() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut enc = Encoder::linear(2, 2, &mut rng);
        let before = enc.layers[0].w.clone();
        let grads = ParamGrads {
            layers: vec![(Matrix::identity(2), vec![1.0, 1.0])],
        };
        enc.sgd_step(&grads, 0.0).unwrap();
        assert_eq!(enc.layers[0].w.as_slice(), before.as_slice());

        // one step on f(w) = w^2 from w=1, lr=0.1 -> 0.8
        let mut enc = Encoder {
            kind: EncoderKind::Linear,
            layers: vec![Layer {
                w: Matrix::from_rows(&[vec![1.0]]).unwrap(),
                b: vec![0.0],
                act: Activation::Identity,
            }],
        };
        let g = ParamGrads { layers: vec![(Matrix::from_rows(&[vec![2.0]]).unwrap(), vec![0.0])] };
        enc.sgd_step(&g, 0.1).unwrap();
        assert!((enc.layers[0].w.get(0, 0) - 0.8).abs() < 1e-15);

        // loss decreases on a quadratic surrogate over 10 steps
        let x = Matrix::random_standard(16, 3, &mut rng);
        let mut enc = Encoder::linear(3, 2, &mut rng);
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let (z, cache) = enc.forward(&x).unwrap();
            let loss = z.frobenius_norm().powi(2);
            assert!(loss < last);
            last = loss;
            let g = enc.backward(&cache, &z.scale(2.0)).unwrap();
            enc.sgd_step(&g, 0.005).unwrap();
        }
    }

    #[test]
    fn train_run_examples() {
        let ds = synth_gaussian_mixture(4, 8, 20, 5.0, 1).unwrap();
        let mut cfg = small_config(ObjectiveKind::FroSsl, 0, 3);
        cfg.batch_size = 16;
        let out = train_run(&cfg, &ds).unwrap();
        assert_eq!(out.trajectory.points.len(), 1);
        assert_eq!(out.trajectory.points[0].step, 0);

        // determinism: identical configs give identical CSVs
        let mut cfg = small_config(ObjectiveKind::FroSsl, 20, 7);
        cfg.batch_size = 16;
        let a = train_run(&cfg, &ds).unwrap();
        let b = train_run(&cfg, &ds).unwrap();
        assert_eq!(a.trajectory.to_csv(), b.trajectory.to_csv());

        // eigenvalues stay non-negative and sorted
        for p in &a.trajectory.points {
            assert!(p.eigenvalues.iter().all(|&l| l >= 0.0));
            assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }

        // config validation
        let mut bad = small_config(ObjectiveKind::FroSsl, 5, 1);
        bad.top_k = 7;
        assert!(matches!(train_run(&bad, &ds), Err(Error::Config(_))));
    }

    #[test]
    fn zero_augmentation_keeps_invariance_zero() {
        let ds = synth_gaussian_mixture(3, 8, 20, 4.0, 2).unwrap();
        for kind in [ObjectiveKind::FroSsl, ObjectiveKind::VicReg, ObjectiveKind::Ivne] {
            let mut cfg = small_config(kind, 10, 5);
            cfg.batch_size = 16;
            cfg.learning_rate = 0.001;
            cfg.augmentation = AugSpec::none();
            let out = train_run(&cfg, &ds).unwrap();
            for p in &out.trajectory.points {
                assert!(p.inv.abs() < 1e-9, "{kind:?} step {}: inv {}", p.step, p.inv);
            }
        }
    }

    #[test]
    fn saturation_and_condition_examples() {
        let mk = |eigs: Vec<(f64, f64)>| TrajectoryRecord {
            top_k: 2,
            points: eigs
                .into_iter()
                .enumerate()
                .map(|(i, (l1, lk))| TrajectoryPoint {
                    step: i * 10,
                    loss: 0.0,
                    inv: 0.0,
                    var: 0.0,
                    acc: None,
                    eigenvalues: vec![l1, lk],
                })
                .collect(),
        };

        // rises by step 100 (index 10), peaks at 150 (15), declines at 160 (16)
        let mut eigs = vec![(1.0, 0.0); 10];
        for i in 0..6 {
            eigs.push((1.0, 0.1 + 0.02 * i as f64));
        }
        eigs.push((1.0, 0.15));
        let traj = mk(eigs);
        assert_eq!(saturation_step(&traj, 0.05), Some(160));

        // monotone rise -> none
        let traj = mk((0..10).map(|i| (1.0, 0.01 * i as f64)).collect());
        assert_eq!(saturation_step(&traj, 0.05), None);

        let traj = mk(vec![(10.0, 0.1)]);
        assert!((condition_number(&traj, 0).unwrap() - 100.0).abs() < 1e-12);
        let iso = mk(vec![(2.0, 2.0)]);
        assert!((condition_number(&iso, 0).unwrap() - 1.0).abs() < 1e-12);
        let degenerate = mk(vec![(1.0, 0.0)]);
        assert!(condition_number(&degenerate, 0).is_err());
        assert!(condition_number(&iso, 99).is_err());
    }

    #[test]
    fn steps_to_accuracy_examples() {
        let series = vec![(0, 0.5), (10, 0.7), (20, 0.9)];
        assert_eq!(steps_to_accuracy(&series, 0.8), Some(20));
        assert_eq!(steps_to_accuracy(&series, 0.95), None);
        assert_eq!(steps_to_accuracy(&[], 0.5), None);
    }

    #[test]
    fn probe_examples() {
        // separable blobs reach >= 0.95 within 500 probe steps
        let ds = synth_gaussian_mixture(2, 6, 100, 10.0, 3).unwrap();
        let series = probe_series(&ds, 50, 500, 0.5, 1, 10).unwrap();
        let best = series.iter().map(|(_, a)| *a).fold(0.0, f64::max);
        assert!(best >= 0.95, "best accuracy {best}");

        // random labels hover at chance
        let mut shuffled = ds.clone();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        shuffled.labels = (0..shuffled.len()).map(|_| rng.gen_range(0..2)).collect();
        let series = probe_series(&shuffled, 50, 300, 0.5, 1, 50).unwrap();
        let last = series.last().unwrap().1;
        assert!((last - 0.5).abs() <= 0.2, "chance-level accuracy {last}");

        // determinism
        let a = probe_series(&ds, 50, 100, 0.5, 9, 10).unwrap();
        let b = probe_series(&ds, 50, 100, 0.5, 9, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let ds = synth_gaussian_mixture(3, 8, 20, 4.0, 4).unwrap();
        let mut cfg = small_config(ObjectiveKind::FroSsl, 10, 11);
        cfg.batch_size = 16;
        let out = train_run(&cfg, &ds).unwrap();
        let csv = out.trajectory.to_csv();
        assert!(csv.starts_with("step,loss,inv,var,acc,lambda_1,"));
        let parsed = TrajectoryRecord::from_csv(&csv).unwrap();
        assert_eq!(parsed.points.len(), out.trajectory.points.len());
        assert_eq!(parsed.to_csv(), csv);

        assert!(TrajectoryRecord::from_csv("").is_err());
        assert!(TrajectoryRecord::from_csv("step,loss\n1,2\n").is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.frossl");
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let enc = Encoder::mlp(5, &[7], 3, &mut rng);
        save_checkpoint(&enc, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.kind, EncoderKind::Mlp);
        assert_eq!(loaded.layers.len(), 2);
        for (a, b) in enc.layers.iter().zip(&loaded.layers) {
            assert_eq!(a.w.as_slice(), b.w.as_slice());
            assert_eq!(a.b, b.b);
            assert_eq!(a.act, b.act);
        }

        // corrupted magic
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.frossl");
        fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&bad), Err(Error::Format(_))));

        // truncated
        let bytes = fs::read(&path).unwrap();
        fs::write(&bad, &bytes[..bytes.len() - 4]).unwrap();
        assert!(load_checkpoint(&bad).is_err());
    }

    #[test]
    fn nan_learning_rate_aborts_with_step_diagnostic() {
        let ds = synth_gaussian_mixture(3, 8, 20, 4.0, 6).unwrap();
        let mut cfg = small_config(ObjectiveKind::VicReg, 200, 13);
        cfg.batch_size = 16;
        cfg.learning_rate = 10.0; // divergent step size for the cubic covariance penalty
        match train_run(&cfg, &ds) {
            Err(Error::Numerical { step, term }) => {
                assert!(step > 0);
                assert!(!term.is_empty());
            }
            other => panic!("expected numerical abort, got {other:?}"),
        }
    }
}
