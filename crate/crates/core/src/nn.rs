//! Small fully connected regression networks: ReLU hidden layers, linear
//! output, L1 loss and mini-batch SGD.

use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, ArrayView2, Axis, NdFloat};
use num_traits::{FromPrimitive, ToPrimitive};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::dataset::seeded_rng;
use crate::{Error, Result};

/// Floating point type a network can be evaluated in.
pub trait Real: NdFloat + FromPrimitive + ToPrimitive + Default {}
impl Real for f32 {}
impl Real for f64 {}

fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite constant")
}

/// One affine layer. `weights` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Layer<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer { weights: Array2::zeros((fan_out, fan_in)), bias: Array1::zeros(fan_out) }
    }

    fn cast<U: Real>(&self) -> Layer<U> {
        Layer {
            weights: self.weights.mapv(|w| real(w.to_f64().unwrap())),
            bias: self.bias.mapv(|w| real(w.to_f64().unwrap())),
        }
    }
}

/// Multi-layer perceptron with ReLU on every hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T = f32> {
    sizes: Vec<usize>,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Mlp<T> {
    /// He-style initialisation: weights ~ N(0, 2/fan_in), zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(sizes)?;
        let mut rng = seeded_rng(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || real(normal.sample(&mut rng)));
                Layer { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Mlp { sizes: sizes.to_vec(), layers })
    }

    /// Builds a model from explicit layers, checking shapes and finiteness.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        let mut sizes = vec![layers[0].weights.ncols()];
        for layer in &layers {
            let (out, inp) = layer.weights.dim();
            if inp != *sizes.last().unwrap() || layer.bias.len() != out {
                return Err(Error::invalid("layer shapes do not chain"));
            }
            if layer.weights.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite parameter"));
            }
            sizes.push(out);
        }
        check_sizes(&sizes)?;
        Ok(Mlp { sizes, layers })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp { sizes: self.sizes.clone(), layers: self.layers.iter().map(Layer::cast).collect() }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.input_size() {
            return Err(Error::DimensionMismatch { expected: self.input_size(), got: input.len() });
        }
        let mut out = Vec::new();
        self.forward_into(input, &mut Vec::new(), &mut out);
        Ok(out)
    }

    /// Allocation-reusing forward pass; `input` must have the right length.
    pub fn forward_into(&self, input: &[T], scratch: &mut Vec<T>, out: &mut Vec<T>) {
        debug_assert_eq!(input.len(), self.input_size());
        out.clear();
        out.extend_from_slice(input);
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            std::mem::swap(scratch, out);
            out.clear();
            let w = layer.weights.as_slice().expect("standard layout");
            let fan_in = layer.weights.ncols();
            for (row, &b) in w.chunks_exact(fan_in).zip(layer.bias.iter()) {
                let z = b + dot(row, scratch);
                out.push(if li < last && z <= T::zero() { T::zero() } else { z });
            }
        }
    }

    /// Batched forward pass, one sample per row.
    pub fn forward_batch(&self, inputs: ArrayView2<T>) -> Array2<T> {
        let mut a = inputs.to_owned();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias;
            if li < last {
                z.mapv_inplace(relu);
            }
            a = z;
        }
        a
    }

    /// Mean L1 loss over a batch and the parameter gradients.
    pub fn gradients(&self, inputs: ArrayView2<T>, targets: ArrayView2<T>) -> (T, Vec<Layer<T>>) {
        let n_layers = self.layers.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(inputs.to_owned());
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = acts[li].dot(&layer.weights.t());
            z += &layer.bias;
            if li + 1 < n_layers {
                z.mapv_inplace(relu);
            }
            acts.push(z);
        }
        let out = &acts[n_layers];
        let count: T = real((out.len()).max(1) as f64);
        let mut loss = T::zero();
        let mut delta = Array2::zeros(out.raw_dim());
        ndarray::Zip::from(&mut delta).and(out).and(&targets).for_each(|d, &p, &t| {
            let r = p - t;
            loss += r.abs();
            *d = sign(r) / count;
        });
        loss = loss / count;

        let mut grads: Vec<Layer<T>> = Vec::with_capacity(n_layers);
        for li in (0..n_layers).rev() {
            let weights = delta.t().dot(&acts[li]);
            let bias = delta.sum_axis(Axis(0));
            if li > 0 {
                let mut prev = delta.dot(&self.layers[li].weights);
                // hidden activations are post-ReLU: positive exactly where z > 0
                ndarray::Zip::from(&mut prev).and(&acts[li]).for_each(|d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = prev;
            }
            grads.push(Layer { weights, bias });
        }
        grads.reverse();
        (loss, grads)
    }

    /// Mean L1 loss of the model over a data set.
    pub fn loss(&self, inputs: ArrayView2<T>, targets: ArrayView2<T>) -> T {
        const CHUNK: usize = 4096;
        let n = inputs.nrows();
        if n == 0 {
            return T::zero();
        }
        let mut total = 0.0f64;
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let pred = self.forward_batch(inputs.slice(s![start..end, ..]));
            let tgt = targets.slice(s![start..end, ..]);
            total += pred.iter().zip(tgt.iter()).map(|(&p, &t)| (p - t).abs().to_f64().unwrap()).sum::<f64>();
            start = end;
        }
        real(total / (n * self.output_size()) as f64)
    }

    fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::invalid("layer sizes need at least input and output"));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("layer sizes must be positive"));
    }
    Ok(())
}

fn relu<T: Real>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}

// subgradient of |r| at 0 is 0
fn sign<T: Real>(r: T) -> T {
    if r > T::zero() {
        T::one()
    } else if r < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Mean absolute difference between two equal-length vectors.
pub fn l1_loss<T: Real>(pred: &[T], target: &[T]) -> Result<T> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Ok(T::zero());
    }
    let sum = pred.iter().zip(target).fold(T::zero(), |acc, (&p, &t)| acc + (p - t).abs());
    Ok(sum / real(pred.len() as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Heavy-ball momentum coefficient; 0 gives plain SGD.
    pub momentum: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    /// Epochs over which the learning rate ramps up linearly from zero.
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.2,
            momentum: 0.9,
            lr_decay: 0.98,
            warmup_epochs: 5,
            batch_size: 500,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid("lr_decay must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        Ok(())
    }
}

/// Per-epoch losses recorded during training.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were returned.
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// Rows of inputs paired with rows of targets.
#[derive(Clone, Copy, Debug)]
pub struct Samples<'a, T> {
    pub inputs: ArrayView2<'a, T>,
    pub targets: ArrayView2<'a, T>,
}

impl<'a, T: Real> Samples<'a, T> {
    pub fn new(inputs: ArrayView2<'a, T>, targets: ArrayView2<'a, T>) -> Self {
        Samples { inputs, targets }
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, model: &Mlp<T>) -> Result<()> {
        if self.inputs.nrows() != self.targets.nrows() {
            return Err(Error::DimensionMismatch { expected: self.inputs.nrows(), got: self.targets.nrows() });
        }
        if self.inputs.ncols() != model.input_size() {
            return Err(Error::DimensionMismatch { expected: model.input_size(), got: self.inputs.ncols() });
        }
        if self.targets.ncols() != model.output_size() {
            return Err(Error::DimensionMismatch { expected: model.output_size(), got: self.targets.ncols() });
        }
        Ok(())
    }
}

/// Mini-batch SGD on the mean L1 loss with early stopping.
///
/// Model selection uses `valid` when it is non-empty and the epoch's training
/// loss otherwise. The returned model holds the best parameters seen.
pub fn train<T: Real>(
    model: &Mlp<T>,
    train: Samples<T>,
    valid: Samples<T>,
    cfg: &TrainConfig,
) -> Result<(Mlp<T>, TrainHistory)> {
    cfg.validate()?;
    train.check(model)?;
    if !valid.is_empty() {
        valid.check(model)?;
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rate = cfg.learning_rate;
    let mu: T = real(cfg.momentum);
    let mut current = model.clone();
    let mut velocity: Vec<Layer<T>> =
        current.layers.iter().map(|l| Layer::zeros(l.weights.ncols(), l.weights.nrows())).collect();
    let mut rng = seeded_rng(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = TrainHistory { best_loss: f64::INFINITY, ..Default::default() };
    let mut best = current.clone();
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        let epoch_rate = rate;
        rate *= cfg.lr_decay;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        let n_batches = order.len().div_ceil(cfg.batch_size);
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let step = epoch * n_batches + bi + 1;
            let ramp = cfg.warmup_epochs * n_batches;
            let lr: T = if step < ramp { real(epoch_rate * step as f64 / ramp as f64) } else { real(epoch_rate) };
            let x = train.inputs.select(Axis(0), batch);
            let y = train.targets.select(Axis(0), batch);
            let (loss, grads) = current.gradients(x.view(), y.view());
            let loss = loss.to_f64().unwrap();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            for ((layer, vel), grad) in current.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                vel.weights.zip_mut_with(&grad.weights, |v, &g| *v = mu * *v + g);
                vel.bias.zip_mut_with(&grad.bias, |v, &g| *v = mu * *v + g);
                layer.weights.scaled_add(-lr, &vel.weights);
                layer.bias.scaled_add(-lr, &vel.bias);
            }
        }
        if !current.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        let train_loss = epoch_loss / train.len() as f64;
        history.train_loss.push(train_loss);
        let score = if valid.is_empty() {
            train_loss
        } else {
            let v = current.loss(valid.inputs, valid.targets).to_f64().unwrap();
            history.valid_loss.push(v);
            v
        };
        if !score.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if score < history.best_loss {
            history.best_loss = score;
            history.best_epoch = epoch;
            best.clone_from(&current);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, history))
}

/// Outcome of a finite-difference gradient check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters skipped because a ReLU or the L1 residual changes sign
    /// within `epsilon`.
    pub skipped: usize,
}

/// Compares backprop gradients of the L1 loss against central differences,
/// evaluated in f64.
pub fn grad_check<T: Real>(model: &Mlp<T>, input: &[T], target: &[T], epsilon: f64) -> Result<GradCheck> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if input.len() != model.input_size() {
        return Err(Error::DimensionMismatch { expected: model.input_size(), got: input.len() });
    }
    if target.len() != model.output_size() {
        return Err(Error::DimensionMismatch { expected: model.output_size(), got: target.len() });
    }
    let mut net: Mlp<f64> = model.cast();
    let x: Vec<f64> = input.iter().map(|v| v.to_f64().unwrap()).collect();
    let y: Vec<f64> = target.iter().map(|v| v.to_f64().unwrap()).collect();
    let xa = Array2::from_shape_vec((1, x.len()), x.clone()).expect("shape");
    let ya = Array2::from_shape_vec((1, y.len()), y.clone()).expect("shape");
    let (_, grads) = net.gradients(xa.view(), ya.view());
    let base = trace(&net, &x, &y);

    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for li in 0..net.layers.len() {
        let n_w = net.layers[li].weights.len();
        let n_b = net.layers[li].bias.len();
        for pi in 0..n_w + n_b {
            let analytic = if pi < n_w {
                let cols = grads[li].weights.ncols();
                grads[li].weights[(pi / cols, pi % cols)]
            } else {
                grads[li].bias[pi - n_w]
            };
            let original = param(&mut net, li, pi, n_w, None);
            param(&mut net, li, pi, n_w, Some(original + epsilon));
            let plus = trace(&net, &x, &y);
            param(&mut net, li, pi, n_w, Some(original - epsilon));
            let minus = trace(&net, &x, &y);
            param(&mut net, li, pi, n_w, Some(original));
            if plus.pattern != base.pattern || minus.pattern != base.pattern {
                out.skipped += 1;
                continue;
            }
            let numeric = (plus.loss - minus.loss) / (2.0 * epsilon);
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic - numeric).abs() / scale;
            out.max_rel_error = out.max_rel_error.max(rel);
            out.checked += 1;
        }
    }
    Ok(out)
}

fn param(net: &mut Mlp<f64>, li: usize, pi: usize, n_w: usize, set: Option<f64>) -> f64 {
    let layer = &mut net.layers[li];
    let slot = if pi < n_w {
        let cols = layer.weights.ncols();
        &mut layer.weights[(pi / cols, pi % cols)]
    } else {
        &mut layer.bias[pi - n_w]
    };
    if let Some(v) = set {
        *slot = v;
    }
    *slot
}

struct Trace {
    loss: f64,
    pattern: Vec<i8>,
}

fn trace(net: &Mlp<f64>, x: &[f64], y: &[f64]) -> Trace {
    let mut pattern = Vec::new();
    let mut a = x.to_vec();
    let last = net.layers.len() - 1;
    for (li, layer) in net.layers.iter().enumerate() {
        let fan_in = layer.weights.ncols();
        let w = layer.weights.as_slice().unwrap();
        a = w
            .chunks_exact(fan_in)
            .zip(layer.bias.iter())
            .map(|(row, &b)| {
                let z = b + row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
                if li < last {
                    pattern.push(sign(z) as i8);
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect();
    }
    for (p, t) in a.iter().zip(y) {
        pattern.push(sign(p - t) as i8);
    }
    Trace { loss: l1_loss(&a, y).unwrap(), pattern }
}

const MODEL_MAGIC: &[u8; 4] = b"PVNN";
const MODEL_VERSION: u32 = 1;

impl Mlp<f32> {
    /// Writes layer sizes and parameters as little-endian f32.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        for layer in &self.layers {
            for v in layer.weights.iter().chain(layer.bias.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format("not a model file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let sizes = (0..n).map(|_| read_u32(&mut r).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
            return Err(Error::Format("implausible layer size".into()));
        }
        let mut layers = Vec::with_capacity(n - 1);
        for w in sizes.windows(2) {
            let mut weights = Array2::zeros((w[1], w[0]));
            for v in weights.iter_mut() {
                *v = read_f32(&mut r)?;
            }
            let mut bias = Array1::zeros(w[1]);
            for v in bias.iter_mut() {
                *v = read_f32(&mut r)?;
            }
            layers.push(Layer { weights, bias });
        }
        Mlp::from_layers(layers).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Inference-only copy of an f32 network with each weight matrix stored
/// input-major, so a layer is a sequence of contiguous axpy updates.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedMlp {
    layers: Vec<PackedLayer>,
}

#[derive(Clone, Debug, PartialEq)]
struct PackedLayer {
    /// `n_in × n_out`, row per input.
    weights: Vec<f32>,
    bias: Vec<f32>,
    n_out: usize,
}

impl PackedMlp {
    pub fn new(model: &Mlp<f32>) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|l| PackedLayer {
                weights: l.weights.t().iter().copied().collect(),
                bias: l.bias.to_vec(),
                n_out: l.weights.nrows(),
            })
            .collect();
        PackedMlp { layers }
    }

    /// Same result as [`Mlp::forward_into`] up to float summation order.
    pub fn forward_into(&self, input: &[f32], scratch: &mut Vec<f32>, out: &mut Vec<f32>) {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports the enabled features.
            unsafe { self.forward_avx2(input, scratch, out) };
            return;
        }
        self.forward_generic(input, scratch, out);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn forward_avx2(&self, input: &[f32], scratch: &mut Vec<f32>, out: &mut Vec<f32>) {
        self.forward_generic(input, scratch, out);
    }

    #[inline(always)]
    fn forward_generic(&self, input: &[f32], scratch: &mut Vec<f32>, out: &mut Vec<f32>) {
        out.clear();
        out.extend_from_slice(input);
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            std::mem::swap(scratch, out);
            out.clear();
            out.extend_from_slice(&layer.bias);
            for (&x, row) in scratch.iter().zip(layer.weights.chunks_exact(layer.n_out)) {
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += x * w;
                }
            }
            if li < last {
                for o in out.iter_mut() {
                    *o = o.max(0.0);
                }
            }
        }
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Format(format!("truncated model data: {e}")))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}
