//! Gammachirp parameter adaptation.
//!
//! Descends the scaled energy
//!
//!   E = 1/2 ||D a - s||^2 + alpha * lambda * S(a)
//!
//! with respect to the per-channel modulation parameters (c, b, l) by
//! reverse-mode differentiation through the unrolled LCA iterations,
//! truncated to the last W steps, followed by an Adamax update. Atom
//! re-normalization is part of the differentiated forward graph.
//!
//! da/dv for the hard threshold is taken as identity on active units and
//! zero elsewhere. Under that convention the sparsity path vanishes
//! identically (active units have v = a and L0 is flat in a), so the
//! gradient is carried entirely by the reconstruction path.

use std::io::Write;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bank::{
    raw_impulse_response, raw_impulse_response_grads, FilterBank, BANDWIDTH_BOUNDS,
    GAMMA_ORDER_BOUNDS,
};
use crate::error::{Error, Result};
use crate::lca::{encode, Dictionary, LcaConfig, LcaState};
use crate::scalar::{dot, norm2, Real};

/// Adaptation hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdaptConfig<R> {
    pub learning_rate: R,
    pub batch_size: usize,
    /// TBPTT window, in LCA iterations.
    pub tbptt_window: usize,
    /// Sparsity penalty scale alpha.
    pub sparsity_scale: R,
    pub num_epochs: usize,
    pub adamax_beta1: R,
    pub adamax_beta2: R,
    pub adamax_eps: R,
    pub seed: u64,
}

impl<R: Real> AdaptConfig<R> {
    pub fn new(learning_rate: R) -> Self {
        Self {
            learning_rate,
            batch_size: 8,
            tbptt_window: 64,
            sparsity_scale: R::one(),
            num_epochs: 20,
            adamax_beta1: R::from_f64_lossy(0.9),
            adamax_beta2: R::from_f64_lossy(0.999),
            adamax_eps: R::from_f64_lossy(1e-8),
            seed: 0,
        }
    }

    pub fn validate(&self, lca: &LcaConfig<R>) -> Result<()> {
        if !(self.learning_rate >= R::zero()) {
            return Err(Error::Config("learning_rate must be >= 0".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.tbptt_window < 1 || self.tbptt_window > lca.num_iterations {
            return Err(Error::Config(format!(
                "tbptt_window {} must be in [1, {}]",
                self.tbptt_window, lca.num_iterations
            )));
        }
        if !(self.sparsity_scale >= R::zero()) {
            return Err(Error::Config("sparsity_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-channel energy gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients<R> {
    pub d_chirp: Vec<R>,
    pub d_bandwidth: Vec<R>,
    pub d_gamma_order: Vec<R>,
}

impl<R: Real> ParamGradients<R> {
    pub fn zeros(num_channels: usize) -> Self {
        Self {
            d_chirp: vec![R::zero(); num_channels],
            d_bandwidth: vec![R::zero(); num_channels],
            d_gamma_order: vec![R::zero(); num_channels],
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for i in 0..self.d_chirp.len() {
            if !self.d_chirp[i].is_finite()
                || !self.d_bandwidth[i].is_finite()
                || !self.d_gamma_order[i].is_finite()
            {
                return Err(Error::NonFiniteGradient { channel: i });
            }
        }
        Ok(())
    }

    fn add_assign(&mut self, other: &Self) {
        for i in 0..self.d_chirp.len() {
            self.d_chirp[i] += other.d_chirp[i];
            self.d_bandwidth[i] += other.d_bandwidth[i];
            self.d_gamma_order[i] += other.d_gamma_order[i];
        }
    }

    fn scale(&mut self, factor: R) {
        for i in 0..self.d_chirp.len() {
            self.d_chirp[i] *= factor;
            self.d_bandwidth[i] *= factor;
            self.d_gamma_order[i] *= factor;
        }
    }
}

/// Energy with the alpha-scaled sparsity penalty.
pub fn scaled_energy<R: Real>(
    signal: &[R],
    dict: &Dictionary<R>,
    coeffs: &[R],
    lambda: R,
    alpha: R,
) -> Result<R> {
    let recon = dict.reconstruct(coeffs)?;
    if signal.len() != recon.len() {
        return Err(Error::Shape("scaled_energy: signal length".into()));
    }
    let mse: R = signal
        .iter()
        .zip(&recon)
        .map(|(&s, &r)| {
            let d = r - s;
            d * d
        })
        .sum();
    let l0 = coeffs.iter().filter(|&&a| a != R::zero()).count();
    let half = R::from_f64_lossy(0.5);
    Ok(half * mse + alpha * lambda * lambda * half * R::from_usize(l0).unwrap())
}

// Accumulate y[m] * x[j*r + t] into per-channel atom gradients, i.e. the
// strided-correlation form of the outer product x y^T projected onto the
// block structure of D.
fn accumulate_atom_grad<R: Real>(
    dict: &Dictionary<R>,
    x_signal: &[R],
    y_coeffs: &[R],
    factor: R,
    grad_atoms: &mut [Vec<R>],
) {
    let frames = dict.num_frames;
    let filter_len = dict.bank.filter_len();
    for i in 0..dict.num_channels() {
        let grad = &mut grad_atoms[i];
        for j in 0..frames {
            let y = y_coeffs[i * frames + j];
            if y == R::zero() {
                continue;
            }
            let fy = factor * y;
            let off = j * dict.stride_samples;
            for t in 0..filter_len {
                grad[t] += fy * x_signal[off + t];
            }
        }
    }
}

/// Analytic gradient of the scaled energy at the end of the LCA solve with
/// respect to (c, b, l), through the last `tbptt_window` iterations.
pub fn grad_params<R: Real>(
    signal: &[R],
    dict: &Dictionary<R>,
    cfg: &LcaConfig<R>,
    acfg: &AdaptConfig<R>,
) -> Result<ParamGradients<R>> {
    cfg.validate()?;
    acfg.validate(cfg)?;
    let padded = dict.pad_signal(signal)?;
    let projection = dict.project(&padded)?;
    let total_iters = cfg.num_iterations;
    let window = acfg.tbptt_window.min(total_iters);

    // forward, storing the trajectory
    let mut activations: Vec<Vec<R>> = Vec::with_capacity(total_iters + 1);
    let mut potentials: Vec<Vec<R>> = Vec::with_capacity(total_iters + 1);
    let n = dict.total_atoms();
    activations.push(vec![R::zero(); n]);
    potentials.push(vec![R::zero(); n]);
    let mut state = LcaState::zeros(n);
    for _ in 0..total_iters {
        state = crate::lca::lca_step(&state, &projection, dict, cfg)?;
        potentials.push(state.potentials.clone());
        activations.push(state.activations.clone());
    }

    let k = dict.num_channels();
    let filter_len = dict.bank.filter_len();
    let mut grad_atoms: Vec<Vec<R>> = vec![vec![R::zero(); filter_len]; k];

    // final-loss direct term: residual times a_T
    let a_final = &activations[total_iters];
    let recon = dict.reconstruct(a_final)?;
    let residual: Vec<R> = recon
        .iter()
        .zip(&padded)
        .map(|(&r, &s)| r - s)
        .collect();
    accumulate_atom_grad(dict, &residual, a_final, R::one(), &mut grad_atoms);

    // dL/da_T from the MSE term; sparsity path is identically zero (see
    // module docs), so alpha does not enter.
    let back = dict.project(&residual)?;
    let mut g_v: Vec<R> = potentials[total_iters]
        .iter()
        .zip(&back)
        .map(|(&v, &g)| {
            if v.abs() < cfg.threshold {
                R::zero()
            } else {
                g
            }
        })
        .collect();

    let eta = cfg.step_ratio;
    let one_minus_eta = R::one() - eta;
    let first_in_window = total_iters - window + 1;
    for iter in (first_in_window..=total_iters).rev() {
        let a_prev = &activations[iter - 1];
        // v[iter] = eta * D^T (s - D a_prev) + eta * a_prev + (1-eta) v[iter-1]
        let recon_prev = dict.reconstruct(a_prev)?;
        let u: Vec<R> = padded
            .iter()
            .zip(&recon_prev)
            .map(|(&s, &r)| s - r)
            .collect();
        accumulate_atom_grad(dict, &u, &g_v, eta, &mut grad_atoms);
        let dg = dict.reconstruct(&g_v)?;
        accumulate_atom_grad(dict, &dg, a_prev, -eta, &mut grad_atoms);
        if iter == first_in_window {
            break;
        }
        let back = dict.project(&dg)?;
        let v_prev = &potentials[iter - 1];
        for m in 0..n {
            let g_a_prev = eta * (g_v[m] - back[m]);
            let through_threshold = if v_prev[m].abs() < cfg.threshold {
                R::zero()
            } else {
                g_a_prev
            };
            g_v[m] = one_minus_eta * g_v[m] + through_threshold;
        }
    }

    // chain through normalization and the analytic response derivatives
    let mut grads = ParamGradients::zeros(k);
    for i in 0..k {
        let p = &dict.bank.params[i];
        let raw = raw_impulse_response(p, &dict.bank.config);
        let raw_norm = norm2(&raw);
        let atom = dict.bank.atom(i);
        let g_phi = &grad_atoms[i];
        let radial = dot(atom, g_phi);
        let g_raw: Vec<R> = g_phi
            .iter()
            .zip(atom)
            .map(|(&g, &phi)| (g - phi * radial) / raw_norm)
            .collect();
        let rg = raw_impulse_response_grads(p, &dict.bank.config);
        grads.d_chirp[i] = dot(&g_raw, &rg.d_chirp);
        grads.d_bandwidth[i] = dot(&g_raw, &rg.d_bandwidth);
        grads.d_gamma_order[i] = dot(&g_raw, &rg.d_gamma_order);
    }
    grads.check_finite()?;
    Ok(grads)
}

/// Adamax accumulators over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamaxState<R> {
    pub first_moment: Vec<R>,
    pub inf_norm: Vec<R>,
    pub step_count: usize,
}

impl<R: Real> AdamaxState<R> {
    pub fn new(num_params: usize) -> Self {
        Self {
            first_moment: vec![R::zero(); num_params],
            inf_norm: vec![R::zero(); num_params],
            step_count: 0,
        }
    }
}

/// One Adamax update: m <- b1 m + (1-b1) g, u <- max(b2 u, |g|),
/// theta <- theta - lr/(1-b1^t) * m / max(u, eps).
pub fn adamax_step<R: Real>(
    params: &mut [R],
    grads: &[R],
    state: &mut AdamaxState<R>,
    learning_rate: R,
    beta1: R,
    beta2: R,
    eps: R,
) {
    debug_assert_eq!(params.len(), grads.len());
    state.step_count += 1;
    let bias = R::one() - beta1.powi(state.step_count as i32);
    let lr = learning_rate / bias;
    for m in 0..params.len() {
        let g = grads[m];
        state.first_moment[m] = beta1 * state.first_moment[m] + (R::one() - beta1) * g;
        state.inf_norm[m] = (beta2 * state.inf_norm[m]).max(g.abs());
        params[m] = params[m] - lr * state.first_moment[m] / state.inf_norm[m].max(eps);
    }
}

/// Per-epoch adaptation summary.
#[derive(Debug, Clone, Default)]
pub struct AdaptTrace<R> {
    pub mean_scaled_energy: Vec<R>,
    pub mean_l0: Vec<R>,
    pub mean_mse: Vec<R>,
}

impl<R: Real> AdaptTrace<R> {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "epoch,mean_scaled_energy,mean_L0,mean_mse")?;
        for i in 0..self.mean_scaled_energy.len() {
            writeln!(
                w,
                "{},{},{},{}",
                i + 1,
                self.mean_scaled_energy[i].to_f64_lossy(),
                self.mean_l0[i].to_f64_lossy(),
                self.mean_mse[i].to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

fn clamp<R: Real>(x: R, lo: f64, hi: f64) -> R {
    x.max(R::from_f64_lossy(lo)).min(R::from_f64_lossy(hi))
}

fn rebuild_bank<R: Real>(bank: &FilterBank<R>, flat: &[R]) -> Result<FilterBank<R>> {
    let k = bank.num_channels();
    let mut params = bank.params.clone();
    for i in 0..k {
        params[i].chirp = flat[i];
        params[i].bandwidth_scale = clamp(flat[k + i], BANDWIDTH_BOUNDS.0, BANDWIDTH_BOUNDS.1);
        params[i].gamma_order = clamp(
            flat[2 * k + i],
            GAMMA_ORDER_BOUNDS.0,
            GAMMA_ORDER_BOUNDS.1,
        );
    }
    FilterBank::build(bank.config, params)
}

/// Mean (scaled energy, L0, mse) of a bank over a corpus.
pub fn evaluate_corpus<R: Real>(
    corpus: &[Vec<R>],
    bank: &FilterBank<R>,
    stride: usize,
    cfg: &LcaConfig<R>,
    alpha: R,
) -> Result<(R, R, R)> {
    let per_signal: Vec<(R, R, R)> = corpus
        .par_iter()
        .map(|signal| {
            let dict = Dictionary::new(bank.clone(), stride, signal.len())?;
            let (code, _) = encode(signal, &dict, cfg)?;
            let coeffs = code.to_coeffs();
            let padded = dict.pad_signal(signal)?;
            let e = scaled_energy(&padded, &dict, &coeffs, cfg.threshold, alpha)?;
            let recon = dict.reconstruct(&coeffs)?;
            let mse: R = padded
                .iter()
                .zip(&recon)
                .map(|(&s, &r)| {
                    let d = r - s;
                    d * d
                })
                .sum::<R>()
                * R::from_f64_lossy(0.5);
            Ok((e, R::from_usize(code.l0()).unwrap(), mse))
        })
        .collect::<Result<_>>()?;
    let count = R::from_usize(per_signal.len()).unwrap();
    let sum = per_signal.iter().fold(
        (R::zero(), R::zero(), R::zero()),
        |acc, &(e, l0, mse)| (acc.0 + e, acc.1 + l0, acc.2 + mse),
    );
    Ok((sum.0 / count, sum.1 / count, sum.2 / count))
}

/// Mini-batch TBPTT adaptation of (c, b, l) starting from `bank0`.
pub fn adapt<R: Real>(
    corpus: &[Vec<R>],
    bank0: &FilterBank<R>,
    stride: usize,
    cfg: &LcaConfig<R>,
    acfg: &AdaptConfig<R>,
) -> Result<(FilterBank<R>, AdaptTrace<R>)> {
    cfg.validate()?;
    acfg.validate(cfg)?;
    if corpus.is_empty() {
        return Err(Error::Config("adapt: empty corpus".into()));
    }
    let k = bank0.num_channels();
    let mut bank = bank0.clone();
    let mut flat: Vec<R> = Vec::with_capacity(3 * k);
    flat.extend(bank.params.iter().map(|p| p.chirp));
    flat.extend(bank.params.iter().map(|p| p.bandwidth_scale));
    flat.extend(bank.params.iter().map(|p| p.gamma_order));
    let mut opt = AdamaxState::new(3 * k);
    let mut trace = AdaptTrace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(acfg.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();

    for _ in 0..acfg.num_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(acfg.batch_size) {
            let batch_grads: Vec<ParamGradients<R>> = batch
                .par_iter()
                .map(|&idx| {
                    let signal = &corpus[idx];
                    let dict = Dictionary::new(bank.clone(), stride, signal.len())?;
                    grad_params(signal, &dict, cfg, acfg)
                })
                .collect::<Result<_>>()?;
            let mut mean = ParamGradients::zeros(k);
            for g in &batch_grads {
                mean.add_assign(g);
            }
            mean.scale(R::one() / R::from_usize(batch.len()).unwrap());
            let mut flat_grads = Vec::with_capacity(3 * k);
            flat_grads.extend_from_slice(&mean.d_chirp);
            flat_grads.extend_from_slice(&mean.d_bandwidth);
            flat_grads.extend_from_slice(&mean.d_gamma_order);
            adamax_step(
                &mut flat,
                &flat_grads,
                &mut opt,
                acfg.learning_rate,
                acfg.adamax_beta1,
                acfg.adamax_beta2,
                acfg.adamax_eps,
            );
            bank = rebuild_bank(&bank, &flat)?;
            // keep the flat vector consistent with the clamped parameters
            for i in 0..k {
                flat[k + i] = bank.params[i].bandwidth_scale;
                flat[2 * k + i] = bank.params[i].gamma_order;
            }
        }
        let (e, l0, mse) = evaluate_corpus(corpus, &bank, stride, cfg, acfg.sparsity_scale)?;
        trace.mean_scaled_energy.push(e);
        trace.mean_l0.push(l0);
        trace.mean_mse.push(mse);
    }
    Ok((bank, trace))
}
