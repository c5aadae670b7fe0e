//! Spiking readout: current-based LIF layers, fast-sigmoid surrogate
//! gradients, and synaptic-operation accounting.
//!
//! Discrete dynamics per layer and step t:
//!
//!   I[t] = syn_decay * I[t-1] + W x[t] (+ V s[t-1] for recurrent layers)
//!   m_pre[t] = mem_decay * m[t-1] + I[t]
//!   s[t] = 1 if m_pre[t] >= threshold else 0
//!   m[t] = m_pre[t] - threshold * s[t]   (subtract reset)
//!        | m_pre[t] * (1 - s[t])         (zero reset)
//!
//! The readout is a non-spiking linear layer whose outputs are averaged
//! over all steps before the cross-entropy loss. Backpropagation replaces
//! the spike derivative with the fast-sigmoid slope 1/(1+beta|x|)^2.
//! SynOps count one operation per presynaptic event times each
//! postsynaptic target actually traversed; input-layer events and hidden
//! spikes are tallied separately.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adapt::{adamax_step, AdamaxState};
use crate::error::{Error, Result};
use crate::repr::EventRepresentation;
use crate::scalar::Real;

const CHECKPOINT_MAGIC: &[u8; 4] = b"SNNC";
const CHECKPOINT_VERSION: u32 = 1;

/// Fast sigmoid f(x) = x / (1 + beta |x|).
pub fn fast_sigmoid<R: Real>(x: R, beta: R) -> R {
    x / (R::one() + beta * x.abs())
}

/// Backward slope of the fast sigmoid: 1 / (1 + beta |x|)^2.
pub fn fast_sigmoid_surrogate<R: Real>(x: R, beta: R) -> R {
    let denom = R::one() + beta * x.abs();
    R::one() / (denom * denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetMode {
    Subtract,
    Zero,
}

/// LIF neuron constants shared by all hidden layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifConfig<R> {
    pub mem_decay: R,
    pub syn_decay: R,
    pub threshold: R,
    pub reset: ResetMode,
    pub surrogate_beta: R,
}

impl<R: Real> LifConfig<R> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: R| x > R::zero() && x < R::one();
        if !unit(self.mem_decay) || !unit(self.syn_decay) {
            return Err(Error::Config("decays must lie strictly in (0, 1)".into()));
        }
        if !(self.threshold > R::zero()) {
            return Err(Error::Config("threshold must be > 0".into()));
        }
        if !(self.surrogate_beta > R::zero()) {
            return Err(Error::Config("surrogate beta must be > 0".into()));
        }
        Ok(())
    }
}

impl<R: Real> Default for LifConfig<R> {
    fn default() -> Self {
        Self {
            mem_decay: R::from_f64_lossy(0.9),
            syn_decay: R::from_f64_lossy(0.8),
            threshold: R::one(),
            reset: ResetMode::Subtract,
            surrogate_beta: R::from_f64_lossy(10.0),
        }
    }
}

/// Dense weights of one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LifLayer<R> {
    pub input_size: usize,
    pub size: usize,
    /// size x input_size, row-major.
    pub weights: Vec<R>,
    /// size x size recurrent weights, if the layer is recurrent.
    pub recurrent: Option<Vec<R>>,
}

/// Mutable per-layer state advanced by [`lif_step`].
#[derive(Debug, Clone)]
pub struct LifLayerState<R> {
    pub synaptic_current: Vec<R>,
    pub membrane: Vec<R>,
    pub spikes: Vec<R>,
    pub synops_in: u64,
}

impl<R: Real> LifLayerState<R> {
    pub fn zeros(size: usize) -> Self {
        Self {
            synaptic_current: vec![R::zero(); size],
            membrane: vec![R::zero(); size],
            spikes: vec![R::zero(); size],
            synops_in: 0,
        }
    }
}

fn nonzero_count<R: Real>(xs: &[R]) -> u64 {
    xs.iter().filter(|&&x| x != R::zero()).count() as u64
}

/// One step of the current-based LIF dynamics. Returns the pre-reset
/// membrane, which training caches for the surrogate backward pass.
pub fn lif_step<R: Real>(
    state: &mut LifLayerState<R>,
    input: &[R],
    layer: &LifLayer<R>,
    cfg: &LifConfig<R>,
) -> Result<Vec<R>> {
    if input.len() != layer.input_size {
        return Err(Error::Shape(format!(
            "lif_step: input length {} != {}",
            input.len(),
            layer.input_size
        )));
    }
    let size = layer.size;
    state.synops_in += nonzero_count(input) * size as u64;
    let prev_spikes = state.spikes.clone();
    if layer.recurrent.is_some() {
        state.synops_in += nonzero_count(&prev_spikes) * size as u64;
    }
    let mut m_pre = Vec::with_capacity(size);
    for u in 0..size {
        let mut drive = R::zero();
        for (i, &x) in input.iter().enumerate() {
            if x != R::zero() {
                drive += layer.weights[u * layer.input_size + i] * x;
            }
        }
        if let Some(rec) = &layer.recurrent {
            for (i, &s) in prev_spikes.iter().enumerate() {
                if s != R::zero() {
                    drive += rec[u * size + i] * s;
                }
            }
        }
        state.synaptic_current[u] = cfg.syn_decay * state.synaptic_current[u] + drive;
        let pre = cfg.mem_decay * state.membrane[u] + state.synaptic_current[u];
        let spike = pre >= cfg.threshold;
        state.spikes[u] = if spike { R::one() } else { R::zero() };
        state.membrane[u] = match cfg.reset {
            ResetMode::Subtract => {
                if spike {
                    pre - cfg.threshold
                } else {
                    pre
                }
            }
            ResetMode::Zero => {
                if spike {
                    R::zero()
                } else {
                    pre
                }
            }
        };
        m_pre.push(pre);
    }
    Ok(m_pre)
}

/// Architecture description.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub recurrent: Vec<bool>,
    pub num_classes: usize,
    /// Initialization mean multiplier: mu = multiplier * sigma.
    pub init_multiplier: f64,
}

impl NetworkSpec {
    pub fn feed_forward(input_size: usize, hidden: usize, num_classes: usize) -> Self {
        Self {
            input_size,
            hidden_sizes: vec![hidden],
            recurrent: vec![false],
            num_classes,
            init_multiplier: 1.0,
        }
    }

    pub fn recurrent(input_size: usize, hidden: usize, num_classes: usize) -> Self {
        Self {
            input_size,
            hidden_sizes: vec![hidden],
            recurrent: vec![true],
            num_classes,
            init_multiplier: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.len() != self.recurrent.len() {
            return Err(Error::Config(
                "hidden_sizes and recurrent flags must be nonempty and equal length".into(),
            ));
        }
        if self.input_size == 0 || self.num_classes < 2 {
            return Err(Error::Config("need input units and >= 2 classes".into()));
        }
        if self.hidden_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// SynOps tally of a forward pass, input-layer traffic kept separate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynOps {
    pub input_layer: u64,
    pub hidden: u64,
}

impl SynOps {
    pub fn total(&self) -> u64 {
        self.input_layer + self.hidden
    }
}

impl std::ops::Add for SynOps {
    type Output = SynOps;

    fn add(self, other: SynOps) -> SynOps {
        SynOps {
            input_layer: self.input_layer + other.input_layer,
            hidden: self.hidden + other.hidden,
        }
    }
}

/// Full spike/membrane record of one forward pass.
pub struct ForwardTrace<R> {
    /// Dense input vectors per step.
    pub inputs: Vec<Vec<R>>,
    /// Per layer, per step: pre-reset membranes.
    pub m_pre: Vec<Vec<Vec<R>>>,
    /// Per layer, per step: binary spike vectors.
    pub spikes: Vec<Vec<Vec<R>>>,
    pub scores: Vec<R>,
    pub synops: SynOps,
}

/// A LIF network with a linear time-averaged readout.
#[derive(Debug, Clone, PartialEq)]
pub struct LifNetwork<R> {
    pub spec: NetworkSpec,
    pub cfg: LifConfig<R>,
    pub layers: Vec<LifLayer<R>>,
    /// num_classes x last_hidden.
    pub readout_weights: Vec<R>,
    pub readout_bias: Vec<R>,
}

impl<R: Real> LifNetwork<R> {
    /// Initialize with the custom-mean Glorot-style scheme:
    /// sigma = sqrt(2 / (fan_in + fan_out)), mu = multiplier * sigma for
    /// spiking layers, mu = 0 for the readout.
    pub fn new(spec: NetworkSpec, cfg: LifConfig<R>, seed: u64) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut fan_in = spec.input_size;
        for (idx, &size) in spec.hidden_sizes.iter().enumerate() {
            let sigma = (2.0 / (fan_in + size) as f64).sqrt();
            let normal = Normal::new(spec.init_multiplier * sigma, sigma)
                .map_err(|e| Error::Config(e.to_string()))?;
            let weights = (0..size * fan_in)
                .map(|_| R::from_f64_lossy(normal.sample(&mut rng)))
                .collect();
            let recurrent = if spec.recurrent[idx] {
                let sigma_r = (1.0 / size as f64).sqrt();
                let normal_r = Normal::new(spec.init_multiplier * sigma_r, sigma_r)
                    .map_err(|e| Error::Config(e.to_string()))?;
                Some(
                    (0..size * size)
                        .map(|_| R::from_f64_lossy(normal_r.sample(&mut rng)))
                        .collect(),
                )
            } else {
                None
            };
            layers.push(LifLayer {
                input_size: fan_in,
                size,
                weights,
                recurrent,
            });
            fan_in = size;
        }
        let sigma_ro = (2.0 / (fan_in + spec.num_classes) as f64).sqrt();
        let normal_ro = Normal::new(0.0, sigma_ro).map_err(|e| Error::Config(e.to_string()))?;
        let readout_weights = (0..spec.num_classes * fan_in)
            .map(|_| R::from_f64_lossy(normal_ro.sample(&mut rng)))
            .collect();
        let readout_bias = vec![R::zero(); spec.num_classes];
        Ok(Self {
            spec,
            cfg,
            layers,
            readout_weights,
            readout_bias,
        })
    }

    fn dense_inputs(&self, rep: &EventRepresentation<R>) -> Result<Vec<Vec<R>>> {
        if rep.num_channels != self.spec.input_size {
            return Err(Error::Shape(format!(
                "representation has {} channels, network expects {}",
                rep.num_channels, self.spec.input_size
            )));
        }
        let mut inputs = vec![vec![R::zero(); self.spec.input_size]; rep.num_steps];
        for e in &rep.events {
            inputs[e.step as usize][e.channel as usize] = e.value;
        }
        Ok(inputs)
    }

    /// Forward pass with full trace capture.
    pub fn forward_trace(&self, rep: &EventRepresentation<R>) -> Result<ForwardTrace<R>> {
        let inputs = self.dense_inputs(rep)?;
        let num_steps = inputs.len();
        let num_layers = self.layers.len();
        let mut states: Vec<LifLayerState<R>> = self
            .layers
            .iter()
            .map(|l| LifLayerState::zeros(l.size))
            .collect();
        let mut m_pre = vec![Vec::with_capacity(num_steps); num_layers];
        let mut spikes = vec![Vec::with_capacity(num_steps); num_layers];
        let mut synops = SynOps::default();
        let mut score_sum = vec![R::zero(); self.spec.num_classes];
        for x in &inputs {
            synops.input_layer += nonzero_count(x) * self.layers[0].size as u64;
            let mut feed = x.clone();
            for (l, layer) in self.layers.iter().enumerate() {
                if l > 0 {
                    synops.hidden += nonzero_count(&feed) * layer.size as u64;
                }
                if layer.recurrent.is_some() {
                    synops.hidden += nonzero_count(&states[l].spikes) * layer.size as u64;
                }
                let pre = lif_step(&mut states[l], &feed, layer, &self.cfg)?;
                m_pre[l].push(pre);
                spikes[l].push(states[l].spikes.clone());
                feed = states[l].spikes.clone();
            }
            synops.hidden += nonzero_count(&feed) * self.spec.num_classes as u64;
            let last = self.layers.len() - 1;
            for c in 0..self.spec.num_classes {
                let mut y = self.readout_bias[c];
                for (u, &s) in feed.iter().enumerate() {
                    y += self.readout_weights[c * self.layers[last].size + u] * s;
                }
                score_sum[c] += y;
            }
        }
        let steps = R::from_usize(num_steps.max(1)).unwrap();
        let scores = score_sum.into_iter().map(|s| s / steps).collect();
        Ok(ForwardTrace {
            inputs,
            m_pre,
            spikes,
            scores,
            synops,
        })
    }

    /// Class scores plus the SynOps tally for one representation.
    pub fn forward(&self, rep: &EventRepresentation<R>) -> Result<(Vec<R>, SynOps)> {
        let trace = self.forward_trace(rep)?;
        Ok((trace.scores, trace.synops))
    }

    pub fn predict(&self, rep: &EventRepresentation<R>) -> Result<usize> {
        let (scores, _) = self.forward(rep)?;
        Ok(argmax(&scores))
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        for layer in &self.layers {
            n += layer.weights.len();
            if let Some(rec) = &layer.recurrent {
                n += rec.len();
            }
        }
        n + self.readout_weights.len() + self.readout_bias.len()
    }

    fn flatten_params(&self) -> Vec<R> {
        let mut flat = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            if let Some(rec) = &layer.recurrent {
                flat.extend_from_slice(rec);
            }
        }
        flat.extend_from_slice(&self.readout_weights);
        flat.extend_from_slice(&self.readout_bias);
        flat
    }

    fn unflatten_params(&mut self, flat: &[R]) {
        let mut off = 0;
        for layer in &mut self.layers {
            let n = layer.weights.len();
            layer.weights.copy_from_slice(&flat[off..off + n]);
            off += n;
            if let Some(rec) = &mut layer.recurrent {
                let n = rec.len();
                rec.copy_from_slice(&flat[off..off + n]);
                off += n;
            }
        }
        let n = self.readout_weights.len();
        self.readout_weights.copy_from_slice(&flat[off..off + n]);
        off += n;
        let n = self.readout_bias.len();
        self.readout_bias.copy_from_slice(&flat[off..off + n]);
    }

    /// Cross-entropy loss and flattened parameter gradient for one sample,
    /// backpropagated through the unrolled dynamics with the fast-sigmoid
    /// surrogate. `tbptt_window` of None means full BPTT.
    pub fn loss_and_grad(
        &self,
        rep: &EventRepresentation<R>,
        label: usize,
        tbptt_window: Option<usize>,
    ) -> Result<(R, Vec<R>)> {
        if label >= self.spec.num_classes {
            return Err(Error::Training(format!("label {label} out of range")));
        }
        let trace = self.forward_trace(rep)?;
        let num_steps = trace.inputs.len();
        let num_layers = self.layers.len();
        let classes = self.spec.num_classes;

        // softmax cross-entropy on the averaged scores
        let max_score = trace
            .scores
            .iter()
            .cloned()
            .fold(R::neg_infinity(), R::max);
        let exps: Vec<R> = trace.scores.iter().map(|&s| (s - max_score).exp()).collect();
        let z: R = exps.iter().cloned().sum();
        let probs: Vec<R> = exps.iter().map(|&e| e / z).collect();
        let loss = -(probs[label].max(R::from_f64_lossy(1e-300))).ln();
        if !loss.is_finite() {
            return Err(Error::Training("non-finite loss".into()));
        }
        let mut g_scores = probs;
        g_scores[label] -= R::one();

        let mut grad_layers: Vec<(Vec<R>, Option<Vec<R>>)> = self
            .layers
            .iter()
            .map(|l| {
                (
                    vec![R::zero(); l.weights.len()],
                    l.recurrent.as_ref().map(|r| vec![R::zero(); r.len()]),
                )
            })
            .collect();
        let mut grad_ro_w = vec![R::zero(); self.readout_weights.len()];
        let mut grad_ro_b = vec![R::zero(); self.readout_bias.len()];

        // spike gradients per layer per step, filled top-down
        let mut g_spikes: Vec<Vec<Vec<R>>> = self
            .layers
            .iter()
            .map(|l| vec![vec![R::zero(); l.size]; num_steps])
            .collect();

        let last = num_layers - 1;
        let last_size = self.layers[last].size;
        let steps_r = R::from_usize(num_steps.max(1)).unwrap();
        for t in 0..num_steps {
            let s_last = &trace.spikes[last][t];
            for c in 0..classes {
                let g_y = g_scores[c] / steps_r;
                grad_ro_b[c] += g_y;
                for u in 0..last_size {
                    grad_ro_w[c * last_size + u] += g_y * s_last[u];
                    g_spikes[last][t][u] += self.readout_weights[c * last_size + u] * g_y;
                }
            }
        }

        let theta = self.cfg.threshold;
        let beta = self.cfg.surrogate_beta;
        let window = tbptt_window.unwrap_or(num_steps).max(1);
        for l in (0..num_layers).rev() {
            let layer = &self.layers[l];
            let size = layer.size;
            let mut g_m = vec![R::zero(); size];
            let mut g_i = vec![R::zero(); size];
            for t in (0..num_steps).rev() {
                let m_pre = &trace.m_pre[l][t];
                let spikes = &trace.spikes[l][t];
                let mut g_i_t = vec![R::zero(); size];
                for u in 0..size {
                    let slope = fast_sigmoid_surrogate(m_pre[u] - theta, beta);
                    let g_s = g_spikes[l][t][u];
                    let g_mpre = match self.cfg.reset {
                        ResetMode::Subtract => g_m[u] + slope * (g_s - theta * g_m[u]),
                        ResetMode::Zero => {
                            g_m[u] * (R::one() - spikes[u])
                                + slope * (g_s - g_m[u] * m_pre[u])
                        }
                    };
                    g_i_t[u] = g_mpre + g_i[u];
                    g_m[u] = self.cfg.mem_decay * g_mpre;
                    g_i[u] = self.cfg.syn_decay * g_i_t[u];
                }
                let input: &[R] = if l == 0 {
                    &trace.inputs[t]
                } else {
                    &trace.spikes[l - 1][t]
                };
                for u in 0..size {
                    let g = g_i_t[u];
                    if g == R::zero() {
                        continue;
                    }
                    for (i, &x) in input.iter().enumerate() {
                        if x != R::zero() {
                            grad_layers[l].0[u * layer.input_size + i] += g * x;
                        }
                    }
                }
                if l > 0 {
                    for u in 0..size {
                        let g = g_i_t[u];
                        if g == R::zero() {
                            continue;
                        }
                        for i in 0..layer.input_size {
                            g_spikes[l - 1][t][i] += layer.weights[u * layer.input_size + i] * g;
                        }
                    }
                }
                if let Some(rec) = &layer.recurrent {
                    if t > 0 {
                        let prev = &trace.spikes[l][t - 1];
                        let g_rec = grad_layers[l].1.as_mut().expect("recurrent grads");
                        for u in 0..size {
                            let g = g_i_t[u];
                            if g == R::zero() {
                                continue;
                            }
                            for i in 0..size {
                                g_rec[u * size + i] += g * prev[i];
                                g_spikes[l][t - 1][i] += rec[u * size + i] * g;
                            }
                        }
                    }
                }
                // truncation boundary: detach carried state gradients
                if (num_steps - t) % window == 0 {
                    g_m.iter_mut().for_each(|g| *g = R::zero());
                    g_i.iter_mut().for_each(|g| *g = R::zero());
                }
            }
        }

        let mut flat = Vec::with_capacity(self.num_params());
        for (w, rec) in grad_layers {
            flat.extend(w);
            if let Some(r) = rec {
                flat.extend(r);
            }
        }
        flat.extend(grad_ro_w);
        flat.extend(grad_ro_b);
        Ok((loss, flat))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
        w.write_u32::<LittleEndian>(self.spec.input_size as u32)?;
        w.write_u32::<LittleEndian>(self.spec.num_classes as u32)?;
        w.write_f64::<LittleEndian>(self.spec.init_multiplier)?;
        w.write_u32::<LittleEndian>(self.spec.hidden_sizes.len() as u32)?;
        for (i, &size) in self.spec.hidden_sizes.iter().enumerate() {
            w.write_u32::<LittleEndian>(size as u32)?;
            w.write_u8(self.spec.recurrent[i] as u8)?;
        }
        w.write_f64::<LittleEndian>(self.cfg.mem_decay.to_f64_lossy())?;
        w.write_f64::<LittleEndian>(self.cfg.syn_decay.to_f64_lossy())?;
        w.write_f64::<LittleEndian>(self.cfg.threshold.to_f64_lossy())?;
        w.write_u8(match self.cfg.reset {
            ResetMode::Subtract => 0,
            ResetMode::Zero => 1,
        })?;
        w.write_f64::<LittleEndian>(self.cfg.surrogate_beta.to_f64_lossy())?;
        for &p in &self.flatten_params() {
            w.write_f64::<LittleEndian>(p.to_f64_lossy())?;
        }
        Ok(())
    }

    pub fn read_from<Rd: Read>(r: &mut Rd) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let input_size = r.read_u32::<LittleEndian>()? as usize;
        let num_classes = r.read_u32::<LittleEndian>()? as usize;
        let init_multiplier = r.read_f64::<LittleEndian>()?;
        let num_hidden = r.read_u32::<LittleEndian>()? as usize;
        let mut hidden_sizes = Vec::with_capacity(num_hidden);
        let mut recurrent = Vec::with_capacity(num_hidden);
        for _ in 0..num_hidden {
            hidden_sizes.push(r.read_u32::<LittleEndian>()? as usize);
            recurrent.push(r.read_u8()? != 0);
        }
        let spec = NetworkSpec {
            input_size,
            hidden_sizes,
            recurrent,
            num_classes,
            init_multiplier,
        };
        let cfg = LifConfig {
            mem_decay: R::from_f64_lossy(r.read_f64::<LittleEndian>()?),
            syn_decay: R::from_f64_lossy(r.read_f64::<LittleEndian>()?),
            threshold: R::from_f64_lossy(r.read_f64::<LittleEndian>()?),
            reset: match r.read_u8()? {
                0 => ResetMode::Subtract,
                1 => ResetMode::Zero,
                other => return Err(Error::Format(format!("bad reset mode {other}"))),
            },
            surrogate_beta: R::from_f64_lossy(r.read_f64::<LittleEndian>()?),
        };
        let mut net = Self::new(spec, cfg, 0)?;
        let n = net.num_params();
        let mut flat = Vec::with_capacity(n);
        for _ in 0..n {
            flat.push(R::from_f64_lossy(r.read_f64::<LittleEndian>()?));
        }
        net.unflatten_params(&flat);
        Ok(net)
    }
}

fn argmax<R: Real>(xs: &[R]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Optimizer settings for [`train`].
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig<R> {
    pub learning_rate: R,
    pub batch_size: usize,
    pub num_epochs: usize,
    pub l2_weight: R,
    /// None: full BPTT. Some(w): truncated window in time steps.
    pub tbptt_window: Option<usize>,
    pub adamax_beta1: R,
    pub adamax_beta2: R,
    pub adamax_eps: R,
    pub seed: u64,
}

impl<R: Real> TrainConfig<R> {
    pub fn new(learning_rate: R) -> Self {
        Self {
            learning_rate,
            batch_size: 16,
            num_epochs: 50,
            l2_weight: R::from_f64_lossy(1e-5),
            tbptt_window: None,
            adamax_beta1: R::from_f64_lossy(0.9),
            adamax_beta2: R::from_f64_lossy(0.999),
            adamax_eps: R::from_f64_lossy(1e-8),
            seed: 0,
        }
    }
}

/// Per-epoch training log.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace<R> {
    pub train_loss: Vec<R>,
    pub valid_accuracy: Vec<R>,
    pub mean_synops: Vec<f64>,
}

impl<R: Real> TrainTrace<R> {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "epoch,train_loss,valid_acc,mean_synops")?;
        for i in 0..self.train_loss.len() {
            writeln!(
                w,
                "{},{},{},{}",
                i + 1,
                self.train_loss[i].to_f64_lossy(),
                self.valid_accuracy[i].to_f64_lossy(),
                self.mean_synops[i]
            )?;
        }
        Ok(())
    }
}

/// Fraction of representations whose argmax score matches their label.
pub fn accuracy<R: Real>(net: &LifNetwork<R>, reps: &[EventRepresentation<R>]) -> Result<R> {
    if reps.is_empty() {
        return Err(Error::Training("accuracy over empty collection".into()));
    }
    let mut correct = 0usize;
    for rep in reps {
        let label = rep
            .label
            .ok_or_else(|| Error::Training("unlabeled representation".into()))?;
        if net.predict(rep)? == label as usize {
            correct += 1;
        }
    }
    Ok(R::from_usize(correct).unwrap() / R::from_usize(reps.len()).unwrap())
}

/// Minimize the cross-entropy of the time-averaged readout with Adamax
/// and L2 weight regularization.
pub fn train<R: Real>(
    net: &mut LifNetwork<R>,
    train_set: &[EventRepresentation<R>],
    valid_set: &[EventRepresentation<R>],
    tcfg: &TrainConfig<R>,
) -> Result<TrainTrace<R>> {
    if train_set.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let mut flat = net.flatten_params();
    let mut opt = AdamaxState::new(flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut trace = TrainTrace::default();
    for _ in 0..tcfg.num_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = R::zero();
        for batch in order.chunks(tcfg.batch_size) {
            let mut grad = vec![R::zero(); flat.len()];
            let mut batch_loss = R::zero();
            for &idx in batch {
                let rep = &train_set[idx];
                let label = rep
                    .label
                    .ok_or_else(|| Error::Training("unlabeled training sample".into()))?
                    as usize;
                let (loss, g) = net.loss_and_grad(rep, label, tcfg.tbptt_window)?;
                batch_loss += loss;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
            let inv = R::one() / R::from_usize(batch.len()).unwrap();
            for (g, &p) in grad.iter_mut().zip(flat.iter()) {
                *g = *g * inv + tcfg.l2_weight * p;
            }
            adamax_step(
                &mut flat,
                &grad,
                &mut opt,
                tcfg.learning_rate,
                tcfg.adamax_beta1,
                tcfg.adamax_beta2,
                tcfg.adamax_eps,
            );
            net.unflatten_params(&flat);
            epoch_loss += batch_loss;
        }
        let valid_acc = if valid_set.is_empty() {
            R::zero()
        } else {
            accuracy(net, valid_set)?
        };
        let mut synops_total = 0u64;
        for rep in valid_set {
            let (_, ops) = net.forward(rep)?;
            synops_total += ops.total();
        }
        trace
            .train_loss
            .push(epoch_loss / R::from_usize(train_set.len()).unwrap());
        trace.valid_accuracy.push(valid_acc);
        trace
            .mean_synops
            .push(synops_total as f64 / valid_set.len().max(1) as f64);
    }
    Ok(trace)
}

/// Recount SynOps from recorded rasters; the independent check for the
/// running counters.
pub fn recount_synops<R: Real>(net: &LifNetwork<R>, trace: &ForwardTrace<R>) -> SynOps {
    let mut ops = SynOps::default();
    let num_steps = trace.inputs.len();
    for t in 0..num_steps {
        ops.input_layer += nonzero_count(&trace.inputs[t]) * net.layers[0].size as u64;
        for (l, layer) in net.layers.iter().enumerate() {
            if l > 0 {
                ops.hidden += nonzero_count(&trace.spikes[l - 1][t]) * layer.size as u64;
            }
            if layer.recurrent.is_some() && t > 0 {
                ops.hidden += nonzero_count(&trace.spikes[l][t - 1]) * layer.size as u64;
            }
        }
        let last = net.layers.len() - 1;
        ops.hidden += nonzero_count(&trace.spikes[last][t]) * net.spec.num_classes as u64;
    }
    ops
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::{ReprEvent, ReprKind};

    fn rep_from_grid(values: &[(u32, u32, f64)], channels: usize, steps: usize) -> EventRepresentation<f64> {
        EventRepresentation {
            num_channels: channels,
            num_steps: steps,
            kind: ReprKind::Lca,
            label: Some(0),
            events: values
                .iter()
                .map(|&(channel, step, value)| ReprEvent {
                    channel,
                    step,
                    value,
                })
                .collect(),
        }
    }

    #[test]
    fn surrogate_slope_values() {
        assert_eq!(fast_sigmoid_surrogate(0.0, 10.0), 1.0);
        assert_eq!(fast_sigmoid_surrogate(1.0, 1.0), 0.25);
    }

    #[test]
    fn surrogate_slope_matches_finite_differences() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let beta: f64 = rng.gen_range(0.5..20.0);
            if x.abs() < 1e-3 {
                continue; // |x| kink
            }
            let fd = (fast_sigmoid(x + h, beta) - fast_sigmoid(x - h, beta)) / (2.0 * h);
            assert!((fast_sigmoid_surrogate(x, beta) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn lif_step_quiet_without_input() {
        let cfg = LifConfig::<f64>::default();
        let layer = LifLayer {
            input_size: 2,
            size: 3,
            weights: vec![0.5; 6],
            recurrent: None,
        };
        let mut state = LifLayerState::zeros(3);
        lif_step(&mut state, &[0.0, 0.0], &layer, &cfg).unwrap();
        assert!(state.membrane.iter().all(|&m| m == 0.0));
        assert!(state.spikes.iter().all(|&s| s == 0.0));
        assert_eq!(state.synops_in, 0);
    }

    #[test]
    fn lif_step_pure_membrane_decay() {
        let cfg = LifConfig::<f64>::default();
        let layer = LifLayer {
            input_size: 1,
            size: 1,
            weights: vec![0.0],
            recurrent: None,
        };
        let mut state = LifLayerState::zeros(1);
        state.membrane[0] = 0.5;
        lif_step(&mut state, &[0.0], &layer, &cfg).unwrap();
        assert!((state.membrane[0] - 0.9 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn lif_step_counts_synops() {
        let cfg = LifConfig::<f64>::default();
        let layer = LifLayer {
            input_size: 4,
            size: 3,
            weights: vec![0.01; 12],
            recurrent: None,
        };
        let mut state = LifLayerState::zeros(3);
        // 2 input spikes into a dense layer of 3 units -> 6 ops
        lif_step(&mut state, &[1.0, 0.0, 1.0, 0.0], &layer, &cfg).unwrap();
        assert_eq!(state.synops_in, 6);
    }

    #[test]
    fn subtract_reset_rate_nonincreasing_in_threshold() {
        let layer = LifLayer {
            input_size: 1,
            size: 1,
            weights: vec![1.0],
            recurrent: None,
        };
        let rate_at = |threshold: f64| {
            let cfg = LifConfig {
                threshold,
                ..LifConfig::<f64>::default()
            };
            let mut state = LifLayerState::zeros(1);
            let mut spikes = 0;
            for _ in 0..200 {
                lif_step(&mut state, &[0.4], &layer, &cfg).unwrap();
                if state.spikes[0] > 0.0 {
                    spikes += 1;
                }
            }
            spikes
        };
        let mut last = usize::MAX;
        for threshold in [0.5, 1.0, 2.0, 4.0] {
            let r = rate_at(threshold);
            assert!(r <= last);
            last = r;
        }
        assert!(rate_at(0.5) > 0);
    }

    #[test]
    fn spike_rasters_invariant_to_beta() {
        let rep = rep_from_grid(&[(0, 0, 1.0), (1, 2, 0.5), (2, 3, 1.0)], 3, 5);
        let spec = NetworkSpec::feed_forward(3, 8, 2);
        let mut rasters = Vec::new();
        for beta in [1.0, 10.0, 100.0] {
            let cfg = LifConfig {
                surrogate_beta: beta,
                ..LifConfig::<f64>::default()
            };
            let net = LifNetwork::new(spec.clone(), cfg, 99).unwrap();
            let trace = net.forward_trace(&rep).unwrap();
            rasters.push(trace.spikes);
        }
        assert_eq!(rasters[0], rasters[1]);
        assert_eq!(rasters[1], rasters[2]);
    }

    #[test]
    fn all_zero_input_produces_no_hidden_synops() {
        let rep = rep_from_grid(&[], 3, 5);
        let net = LifNetwork::new(
            NetworkSpec::feed_forward(3, 8, 2),
            LifConfig::<f64>::default(),
            1,
        )
        .unwrap();
        let (_, ops) = net.forward(&rep).unwrap();
        assert_eq!(ops.total(), 0);
    }

    #[test]
    fn synops_magnitude_blind() {
        let rep = rep_from_grid(&[(0, 0, 0.3), (1, 1, 0.2)], 3, 4);
        let mut doubled = rep.clone();
        for e in &mut doubled.events {
            e.value *= 2.0;
        }
        let net = LifNetwork::new(
            NetworkSpec::feed_forward(3, 6, 2),
            LifConfig::<f64>::default(),
            5,
        )
        .unwrap();
        let (_, a) = net.forward(&rep).unwrap();
        let (_, b) = net.forward(&doubled).unwrap();
        assert_eq!(a.input_layer, b.input_layer);
    }

    #[test]
    fn synops_counter_matches_raster_recount() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for case in 0..10 {
            let channels = rng.gen_range(2..6);
            let steps = rng.gen_range(3..10);
            let mut events = Vec::new();
            for channel in 0..channels {
                for step in 0..steps {
                    if rng.gen_bool(0.4) {
                        events.push((channel as u32, step as u32, rng.gen_range(0.1..1.0)));
                    }
                }
            }
            let rep = rep_from_grid(&events, channels, steps);
            let spec = if case % 2 == 0 {
                NetworkSpec::feed_forward(channels, 7, 3)
            } else {
                NetworkSpec::recurrent(channels, 5, 3)
            };
            let net = LifNetwork::new(spec, LifConfig::<f64>::default(), case).unwrap();
            let trace = net.forward_trace(&rep).unwrap();
            assert_eq!(trace.synops, recount_synops(&net, &trace));
        }
    }

    #[test]
    fn synops_additive_over_batches() {
        let net = LifNetwork::new(
            NetworkSpec::feed_forward(3, 6, 2),
            LifConfig::<f64>::default(),
            2,
        )
        .unwrap();
        let a = rep_from_grid(&[(0, 0, 1.0)], 3, 4);
        let b = rep_from_grid(&[(1, 1, 0.5), (2, 2, 0.7)], 3, 4);
        let (_, ops_a) = net.forward(&a).unwrap();
        let (_, ops_b) = net.forward(&b).unwrap();
        let batch_total = ops_a + ops_b;
        assert_eq!(batch_total.total(), ops_a.total() + ops_b.total());
    }

    #[test]
    fn gradient_matches_linearized_finite_differences() {
        // FD oracle on the surrogate-linearized forward: spikes replaced by
        // s0 + slope0 * (m_pre - m_pre0) with slopes frozen at the nominal
        // point; its finite differences equal the analytic BPTT gradient.
        let rep = rep_from_grid(&[(0, 0, 0.8), (1, 1, 0.6), (2, 2, 0.9), (0, 3, 0.7)], 3, 4);
        let cfg = LifConfig {
            surrogate_beta: 2.0,
            ..LifConfig::<f64>::default()
        };
        for spec in [
            NetworkSpec::feed_forward(3, 3, 2),
            NetworkSpec::recurrent(3, 3, 2),
        ] {
            let net = LifNetwork::new(spec, cfg, 31).unwrap();
            let (_, grad) = net.loss_and_grad(&rep, 1, None).unwrap();
            let nominal = net.forward_trace(&rep).unwrap();
            let flat0 = net.flatten_params();
            let h = 1e-6;
            let mut checked = 0;
            for idx in (0..flat0.len()).step_by(3) {
                let mut plus = flat0.clone();
                let mut minus = flat0.clone();
                plus[idx] += h;
                minus[idx] -= h;
                let lp = linearized_loss(&net, 1, &nominal, &plus);
                let lm = linearized_loss(&net, 1, &nominal, &minus);
                let fd = (lp - lm) / (2.0 * h);
                if grad[idx].abs() > 1e-7 {
                    let rel = (grad[idx] - fd).abs() / grad[idx].abs().max(fd.abs());
                    assert!(rel < 1e-3, "param {idx}: analytic {} vs fd {fd}", grad[idx]);
                    checked += 1;
                }
            }
            assert!(checked > 5);
        }
    }

    // Forward pass with the spike nonlinearity linearized around the
    // nominal trace: differentiable, so plain finite differences apply.
    fn linearized_loss(
        net: &LifNetwork<f64>,
        label: usize,
        nominal: &ForwardTrace<f64>,
        flat: &[f64],
    ) -> f64 {
        let mut net2 = net.clone();
        net2.unflatten_params(flat);
        let num_steps = nominal.inputs.len();
        let classes = net2.spec.num_classes;
        let theta = net2.cfg.threshold;
        let beta = net2.cfg.surrogate_beta;
        let num_layers = net2.layers.len();
        let mut current: Vec<Vec<f64>> =
            net2.layers.iter().map(|l| vec![0.0; l.size]).collect();
        let mut membrane: Vec<Vec<f64>> =
            net2.layers.iter().map(|l| vec![0.0; l.size]).collect();
        let mut prev_spikes: Vec<Vec<f64>> =
            net2.layers.iter().map(|l| vec![0.0; l.size]).collect();
        let mut score_sum = vec![0.0; classes];
        for t in 0..num_steps {
            let mut feed = nominal.inputs[t].clone();
            for l in 0..num_layers {
                let layer = &net2.layers[l];
                let size = layer.size;
                let mut spikes_t = vec![0.0; size];
                for u in 0..size {
                    let mut drive = 0.0;
                    for (i, &x) in feed.iter().enumerate() {
                        drive += layer.weights[u * layer.input_size + i] * x;
                    }
                    if let Some(rec) = &layer.recurrent {
                        for i in 0..size {
                            drive += rec[u * size + i] * prev_spikes[l][i];
                        }
                    }
                    current[l][u] = net2.cfg.syn_decay * current[l][u] + drive;
                    let pre = net2.cfg.mem_decay * membrane[l][u] + current[l][u];
                    let pre0 = nominal.m_pre[l][t][u];
                    let s0 = nominal.spikes[l][t][u];
                    let slope = fast_sigmoid_surrogate(pre0 - theta, beta);
                    let s = s0 + slope * (pre - pre0);
                    membrane[l][u] = match net2.cfg.reset {
                        ResetMode::Subtract => pre - theta * s,
                        ResetMode::Zero => pre * (1.0 - s),
                    };
                    spikes_t[u] = s;
                }
                prev_spikes[l] = spikes_t.clone();
                feed = spikes_t;
            }
            let last_size = net2.layers[num_layers - 1].size;
            for c in 0..classes {
                let mut y = net2.readout_bias[c];
                for u in 0..last_size {
                    y += net2.readout_weights[c * last_size + u] * feed[u];
                }
                score_sum[c] += y;
            }
        }
        let scores: Vec<f64> = score_sum.iter().map(|s| s / num_steps as f64).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|&s| (s - max).exp()).sum();
        -(scores[label] - max - z.ln())
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let reps = vec![
            rep_from_grid(&[(0, 0, 1.0)], 2, 3),
            {
                let mut r = rep_from_grid(&[(1, 1, 1.0)], 2, 3);
                r.label = Some(1);
                r
            },
        ];
        let mut net = LifNetwork::new(
            NetworkSpec::feed_forward(2, 4, 2),
            LifConfig::<f64>::default(),
            7,
        )
        .unwrap();
        let before = net.clone();
        let mut tcfg = TrainConfig::new(0.0);
        tcfg.num_epochs = 2;
        tcfg.l2_weight = 0.0;
        train(&mut net, &reps, &reps, &tcfg).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = LifNetwork::<f64>::new(
            NetworkSpec::recurrent(4, 6, 3),
            LifConfig::default(),
            13,
        )
        .unwrap();
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let loaded = LifNetwork::<f64>::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(net, loaded);
    }

    #[test]
    fn quiescence_guard_with_custom_mean_init() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let net = LifNetwork::new(
            NetworkSpec::feed_forward(10, 32, 2),
            LifConfig::<f64>::default(),
            21,
        )
        .unwrap();
        let mut alive = 0;
        let total = 100;
        for _ in 0..total {
            let mut events = Vec::new();
            for channel in 0..10u32 {
                for step in 0..20u32 {
                    if rng.gen_bool(0.3) {
                        events.push((channel, step, rng.gen_range(0.2..1.0)));
                    }
                }
            }
            let rep = rep_from_grid(&events, 10, 20);
            let trace = net.forward_trace(&rep).unwrap();
            if trace.spikes[0].iter().any(|s| s.iter().any(|&x| x > 0.0)) {
                alive += 1;
            }
        }
        assert!(alive >= 95, "only {alive}/{total} samples spiked");
    }
}
