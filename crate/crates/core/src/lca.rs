//! Locally competitive algorithm over a block-strided dictionary.
//!
//! The dictionary places every bank atom at frame offsets j*r across the
//! signal. Coefficients are indexed channel-major: m = channel * T + frame.
//! The membrane dynamics
//!
//!   v[n] = (dt/tau) * (p - (D^T D - I) a[n-1]) + (1 - dt/tau) * v[n-1]
//!   a[n] = T_lambda(v[n])
//!
//! descend the energy E = 1/2 ||D a - s||^2 + lambda * S(a) with
//! S(a) = (lambda/2) * L0(a). The inhibition term is evaluated as
//! D^T (D a) - a; the Gram matrix is never materialized. A dense-matrix
//! view of D exists for oracle checks.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::bank::FilterBank;
use crate::error::{Error, Result};
use crate::scalar::Real;

const CODE_MAGIC: &[u8; 4] = b"SPCD";
const CODE_VERSION: u32 = 1;

/// Strided filter-bank operator.
#[derive(Debug, Clone)]
pub struct Dictionary<R> {
    pub bank: FilterBank<R>,
    pub stride_samples: usize,
    /// Padded signal length; a multiple of the frame grid.
    pub signal_len_samples: usize,
    /// Length callers are expected to provide before padding.
    pub source_len_samples: usize,
    pub num_frames: usize,
}

impl<R: Real> Dictionary<R> {
    /// Build the operator for signals of `source_len` samples, zero-padding
    /// the tail to the next exact frame grid.
    pub fn new(bank: FilterBank<R>, stride_samples: usize, source_len: usize) -> Result<Self> {
        let filter_len = bank.filter_len();
        if stride_samples < 1 || stride_samples > filter_len {
            return Err(Error::Config(format!(
                "stride {} must be in [1, {}]",
                stride_samples, filter_len
            )));
        }
        if source_len == 0 {
            return Err(Error::Config("signal length must be positive".into()));
        }
        let padded = if source_len <= filter_len {
            filter_len
        } else {
            let over = source_len - filter_len;
            let frames = over.div_ceil(stride_samples);
            filter_len + frames * stride_samples
        };
        let num_frames = (padded - filter_len) / stride_samples + 1;
        Ok(Self {
            bank,
            stride_samples,
            signal_len_samples: padded,
            source_len_samples: source_len,
            num_frames,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.bank.num_channels()
    }

    pub fn total_atoms(&self) -> usize {
        self.num_channels() * self.num_frames
    }

    pub fn coeff_index(&self, channel: usize, frame: usize) -> usize {
        channel * self.num_frames + frame
    }

    /// Zero-pad a source-length signal to the frame grid.
    pub fn pad_signal(&self, signal: &[R]) -> Result<Vec<R>> {
        if signal.len() == self.signal_len_samples {
            return Ok(signal.to_vec());
        }
        if signal.len() != self.source_len_samples {
            return Err(Error::Shape(format!(
                "signal length {} does not match dictionary source length {}",
                signal.len(),
                self.source_len_samples
            )));
        }
        let mut padded = signal.to_vec();
        padded.resize(self.signal_len_samples, R::zero());
        Ok(padded)
    }

    /// Projection p = D^T s via strided correlation.
    pub fn project(&self, signal: &[R]) -> Result<Vec<R>> {
        if signal.len() != self.signal_len_samples {
            return Err(Error::Shape(format!(
                "project: signal length {} != {}",
                signal.len(),
                self.signal_len_samples
            )));
        }
        let mut p = vec![R::zero(); self.total_atoms()];
        for (i, atom) in self.bank.atoms().iter().enumerate() {
            for j in 0..self.num_frames {
                let off = j * self.stride_samples;
                let window = &signal[off..off + atom.len()];
                p[self.coeff_index(i, j)] = crate::scalar::dot(atom, window);
            }
        }
        Ok(p)
    }

    /// Reconstruction D a via overlap-add of strided atoms.
    pub fn reconstruct(&self, coeffs: &[R]) -> Result<Vec<R>> {
        if coeffs.len() != self.total_atoms() {
            return Err(Error::Shape(format!(
                "reconstruct: coefficient length {} != {}",
                coeffs.len(),
                self.total_atoms()
            )));
        }
        let mut signal = vec![R::zero(); self.signal_len_samples];
        for (i, atom) in self.bank.atoms().iter().enumerate() {
            for j in 0..self.num_frames {
                let a = coeffs[self.coeff_index(i, j)];
                if a == R::zero() {
                    continue;
                }
                let off = j * self.stride_samples;
                for (t, &phi) in atom.iter().enumerate() {
                    signal[off + t] += a * phi;
                }
            }
        }
        Ok(signal)
    }

    /// Dense view of D, shape (signal_len, total_atoms). Oracle only;
    /// quadratic in memory.
    pub fn dense_matrix(&self) -> Vec<Vec<R>> {
        let mut d = vec![vec![R::zero(); self.total_atoms()]; self.signal_len_samples];
        for (i, atom) in self.bank.atoms().iter().enumerate() {
            for j in 0..self.num_frames {
                let col = self.coeff_index(i, j);
                let off = j * self.stride_samples;
                for (t, &phi) in atom.iter().enumerate() {
                    d[off + t][col] = phi;
                }
            }
        }
        d
    }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy)]
pub struct LcaConfig<R> {
    /// Threshold and Lagrange multiplier lambda.
    pub threshold: R,
    /// Euler step ratio dt/tau.
    pub step_ratio: R,
    pub num_iterations: usize,
    /// Optional early exit when ||v[n] - v[n-1]||_inf drops below this.
    pub convergence_tol: Option<R>,
}

impl<R: Real> LcaConfig<R> {
    pub fn new(threshold: R) -> Self {
        Self {
            threshold,
            step_ratio: R::from_f64_lossy(0.01),
            num_iterations: 64,
            convergence_tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > R::zero()) {
            return Err(Error::Config("threshold must be > 0".into()));
        }
        if !(self.step_ratio > R::zero() && self.step_ratio < R::one()) {
            return Err(Error::Config("step_ratio must be in (0, 1)".into()));
        }
        if self.num_iterations < 1 {
            return Err(Error::Config("num_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hard thresholding T_lambda; values with |v| < lambda are zeroed,
/// ties at lambda activate.
pub fn hard_threshold<R: Real>(v: &[R], lambda: R) -> Vec<R> {
    v.iter()
        .map(|&x| if x.abs() < lambda { R::zero() } else { x })
        .collect()
}

/// Membrane state of one solve.
#[derive(Debug, Clone)]
pub struct LcaState<R> {
    pub potentials: Vec<R>,
    pub activations: Vec<R>,
    pub iteration: usize,
}

impl<R: Real> LcaState<R> {
    pub fn zeros(total_atoms: usize) -> Self {
        Self {
            potentials: vec![R::zero(); total_atoms],
            activations: vec![R::zero(); total_atoms],
            iteration: 0,
        }
    }
}

/// One Euler step of the LCA dynamics.
pub fn lca_step<R: Real>(
    state: &LcaState<R>,
    projection: &[R],
    dict: &Dictionary<R>,
    cfg: &LcaConfig<R>,
) -> Result<LcaState<R>> {
    if state.iteration >= cfg.num_iterations {
        return Err(Error::State(format!(
            "lca_step: iteration budget {} exhausted",
            cfg.num_iterations
        )));
    }
    let n = dict.total_atoms();
    if projection.len() != n || state.potentials.len() != n {
        return Err(Error::Shape("lca_step: state/projection length".into()));
    }
    let eta = cfg.step_ratio;
    // (D^T D - I) a computed as D^T (D a) - a
    let recon = dict.reconstruct(&state.activations)?;
    let back = dict.project(&recon)?;
    let mut potentials = Vec::with_capacity(n);
    for m in 0..n {
        let inhibition = back[m] - state.activations[m];
        let drive = projection[m] - inhibition;
        potentials.push(eta * drive + (R::one() - eta) * state.potentials[m]);
    }
    let activations = hard_threshold(&potentials, cfg.threshold);
    Ok(LcaState {
        potentials,
        activations,
        iteration: state.iteration + 1,
    })
}

/// Energy E = 1/2 ||D a - s||^2 + lambda * (lambda/2) * L0(a).
pub fn energy<R: Real>(
    signal: &[R],
    dict: &Dictionary<R>,
    coeffs: &[R],
    lambda: R,
) -> Result<R> {
    let recon = dict.reconstruct(coeffs)?;
    if signal.len() != recon.len() {
        return Err(Error::Shape("energy: signal length".into()));
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
    Ok(half * mse + lambda * lambda * half * R::from_usize(l0).unwrap())
}

/// Per-iteration energy terms of one encode.
#[derive(Debug, Clone, Default)]
pub struct EnergyTrace<R> {
    pub mse_term: Vec<R>,
    pub sparsity_term: Vec<R>,
}

impl<R: Real> EnergyTrace<R> {
    pub fn total(&self, iteration: usize) -> R {
        self.mse_term[iteration] + self.sparsity_term[iteration]
    }

    pub fn len(&self) -> usize {
        self.mse_term.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mse_term.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "iteration,mse_term,sparsity_term,total")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                i + 1,
                self.mse_term[i].to_f64_lossy(),
                self.sparsity_term[i].to_f64_lossy(),
                self.total(i).to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// One nonzero coefficient of a finished encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEvent<R> {
    pub channel: u32,
    pub frame: u32,
    pub value: R,
}

/// Sparse encoding result.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode<R> {
    pub events: Vec<SparseEvent<R>>,
    pub num_channels: usize,
    pub num_frames: usize,
    pub source_len: usize,
    pub lambda_used: R,
    pub sample_rate_hz: R,
    pub stride_samples: usize,
}

impl<R: Real> SparseCode<R> {
    pub fn l0(&self) -> usize {
        self.events.len()
    }

    /// Expand back to a dense coefficient vector (channel-major).
    pub fn to_coeffs(&self) -> Vec<R> {
        let mut coeffs = vec![R::zero(); self.num_channels * self.num_frames];
        for e in &self.events {
            coeffs[e.channel as usize * self.num_frames + e.frame as usize] = e.value;
        }
        coeffs
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CODE_MAGIC)?;
        w.write_u32::<LittleEndian>(CODE_VERSION)?;
        w.write_u32::<LittleEndian>(self.num_channels as u32)?;
        w.write_u32::<LittleEndian>(self.num_frames as u32)?;
        w.write_u64::<LittleEndian>(self.source_len as u64)?;
        w.write_f64::<LittleEndian>(self.lambda_used.to_f64_lossy())?;
        w.write_f64::<LittleEndian>(self.sample_rate_hz.to_f64_lossy())?;
        w.write_u32::<LittleEndian>(self.stride_samples as u32)?;
        w.write_u64::<LittleEndian>(self.events.len() as u64)?;
        for e in &self.events {
            w.write_u32::<LittleEndian>(e.channel)?;
            w.write_u32::<LittleEndian>(e.frame)?;
            w.write_f64::<LittleEndian>(e.value.to_f64_lossy())?;
        }
        Ok(())
    }

    pub fn read_from<Rd: Read>(r: &mut Rd) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CODE_MAGIC {
            return Err(Error::Format("bad sparse code magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CODE_VERSION {
            return Err(Error::Format(format!("unsupported code version {version}")));
        }
        let num_channels = r.read_u32::<LittleEndian>()? as usize;
        let num_frames = r.read_u32::<LittleEndian>()? as usize;
        let source_len = r.read_u64::<LittleEndian>()? as usize;
        let lambda = r.read_f64::<LittleEndian>()?;
        let fs = r.read_f64::<LittleEndian>()?;
        let stride = r.read_u32::<LittleEndian>()? as usize;
        let count = r.read_u64::<LittleEndian>()? as usize;
        let mut events = Vec::with_capacity(count);
        for _ in 0..count {
            let channel = r.read_u32::<LittleEndian>()?;
            let frame = r.read_u32::<LittleEndian>()?;
            let value = R::from_f64_lossy(r.read_f64::<LittleEndian>()?);
            events.push(SparseEvent {
                channel,
                frame,
                value,
            });
        }
        Ok(Self {
            events,
            num_channels,
            num_frames,
            source_len,
            lambda_used: R::from_f64_lossy(lambda),
            sample_rate_hz: R::from_f64_lossy(fs),
            stride_samples: stride,
        })
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "channel,frame,value")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.channel, e.frame, e.value.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// Run the full solve from zero state and collect nonzero activations.
pub fn encode<R: Real>(
    signal: &[R],
    dict: &Dictionary<R>,
    cfg: &LcaConfig<R>,
) -> Result<(SparseCode<R>, EnergyTrace<R>)> {
    cfg.validate()?;
    let padded = dict.pad_signal(signal)?;
    let projection = dict.project(&padded)?;
    let mut state = LcaState::zeros(dict.total_atoms());
    let mut trace = EnergyTrace::default();
    let half = R::from_f64_lossy(0.5);
    for _ in 0..cfg.num_iterations {
        let prev = state.potentials.clone();
        state = lca_step(&state, &projection, dict, cfg)?;
        let recon = dict.reconstruct(&state.activations)?;
        let mse: R = padded
            .iter()
            .zip(&recon)
            .map(|(&s, &r)| {
                let d = r - s;
                d * d
            })
            .sum();
        let l0 = state
            .activations
            .iter()
            .filter(|&&a| a != R::zero())
            .count();
        trace.mse_term.push(half * mse);
        trace
            .sparsity_term
            .push(cfg.threshold * cfg.threshold * half * R::from_usize(l0).unwrap());
        if let Some(tol) = cfg.convergence_tol {
            if crate::scalar::max_abs_diff(&state.potentials, &prev) < tol {
                break;
            }
        }
    }
    let mut events = Vec::new();
    for (m, &a) in state.activations.iter().enumerate() {
        if a != R::zero() {
            let channel = (m / dict.num_frames) as u32;
            let frame = (m % dict.num_frames) as u32;
            events.push(SparseEvent {
                channel,
                frame,
                value: a,
            });
        }
    }
    Ok((
        SparseCode {
            events,
            num_channels: dict.num_channels(),
            num_frames: dict.num_frames,
            source_len: signal.len(),
            lambda_used: cfg.threshold,
            sample_rate_hz: dict.bank.config.sample_rate_hz,
            stride_samples: dict.stride_samples,
        },
        trace,
    ))
}

/// Final LCA state of a solve (potentials included), for fixed-point checks.
pub fn solve_state<R: Real>(
    signal: &[R],
    dict: &Dictionary<R>,
    cfg: &LcaConfig<R>,
) -> Result<(LcaState<R>, R)> {
    cfg.validate()?;
    let padded = dict.pad_signal(signal)?;
    let projection = dict.project(&padded)?;
    let mut state = LcaState::zeros(dict.total_atoms());
    let mut last_delta = R::infinity();
    for _ in 0..cfg.num_iterations {
        let prev = state.potentials.clone();
        state = lca_step(&state, &projection, dict, cfg)?;
        last_delta = crate::scalar::max_abs_diff(&state.potentials, &prev);
        if let Some(tol) = cfg.convergence_tol {
            if last_delta < tol {
                break;
            }
        }
    }
    Ok((state, last_delta))
}
