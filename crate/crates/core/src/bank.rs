//! Gammachirp filter bank on the ERB scale.
//!
//! Each channel is a gammachirp impulse response
//!
//!   phi_i(t) = t^(l_i - 1) * exp(-2 pi b_i ERB(f_i) t) * cos(2 pi f_i t + c_i ln t)
//!
//! sampled on a grid starting at t = 1/fs (the chirp phase is singular at
//! t = 0) and L2-normalized. A gammatone is the special case c = 0, b = 1,
//! l = 4.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::scalar::{norm2, Real};

/// Clamp range for the gamma order `l` during adaptation.
pub const GAMMA_ORDER_BOUNDS: (f64, f64) = (1.1, 10.0);
/// Clamp range for the bandwidth scale `b` during adaptation.
pub const BANDWIDTH_BOUNDS: (f64, f64) = (0.1, 10.0);

const BANK_MAGIC: &[u8; 4] = b"GCBK";
const BANK_VERSION: u32 = 1;

/// Equivalent Rectangular Bandwidth in Hz at a center frequency.
pub fn erb<R: Real>(freq_hz: R) -> Result<R> {
    if freq_hz < R::zero() {
        return Err(Error::Domain(format!(
            "erb: negative frequency {freq_hz}"
        )));
    }
    Ok(R::from_f64_lossy(24.7) + R::from_f64_lossy(0.108) * freq_hz)
}

/// ERB-number (integral of 1/ERB(f) df), used for uniform channel spacing.
pub fn hz_to_erb_number<R: Real>(freq_hz: R) -> R {
    let a = R::from_f64_lossy(0.108);
    let k = R::from_f64_lossy(24.7);
    (R::one() + a * freq_hz / k).ln() / a
}

/// Inverse of [`hz_to_erb_number`].
pub fn erb_number_to_hz<R: Real>(n: R) -> R {
    let a = R::from_f64_lossy(0.108);
    let k = R::from_f64_lossy(24.7);
    k * ((a * n).exp() - R::one()) / a
}

/// Per-channel gammachirp modulation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammachirpParams<R> {
    pub channel_index: usize,
    pub center_freq_hz: R,
    /// Gamma envelope order `l`; must stay > 1.
    pub gamma_order: R,
    /// Bandwidth scale `b`; must stay > 0.
    pub bandwidth_scale: R,
    /// Chirp parameter `c`; unconstrained.
    pub chirp: R,
}

impl<R: Real> GammachirpParams<R> {
    /// Gammatone defaults: c = 0, b = 1, l = 4.
    pub fn gammatone(channel_index: usize, center_freq_hz: R) -> Self {
        Self {
            channel_index,
            center_freq_hz,
            gamma_order: R::from_f64_lossy(4.0),
            bandwidth_scale: R::one(),
            chirp: R::zero(),
        }
    }

    pub fn validate(&self, sample_rate_hz: R) -> Result<()> {
        if !(self.gamma_order > R::one()) {
            return Err(Error::Config(format!(
                "channel {}: gamma_order {} must be > 1",
                self.channel_index, self.gamma_order
            )));
        }
        if !(self.bandwidth_scale > R::zero()) {
            return Err(Error::Config(format!(
                "channel {}: bandwidth_scale {} must be > 0",
                self.channel_index, self.bandwidth_scale
            )));
        }
        let nyquist = sample_rate_hz / R::from_f64_lossy(2.0);
        if !(self.center_freq_hz > R::zero() && self.center_freq_hz < nyquist) {
            return Err(Error::Config(format!(
                "channel {}: center frequency {} outside (0, {})",
                self.channel_index, self.center_freq_hz, nyquist
            )));
        }
        Ok(())
    }
}

/// Geometry of a filter bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankConfig<R> {
    pub num_channels: usize,
    pub filter_len_samples: usize,
    pub sample_rate_hz: R,
    pub freq_min_hz: R,
    pub freq_max_hz: R,
}

impl<R: Real> BankConfig<R> {
    /// Bank geometry with the default frequency range [20 Hz, 0.4 fs].
    pub fn new(num_channels: usize, filter_len_samples: usize, sample_rate_hz: R) -> Self {
        Self {
            num_channels,
            filter_len_samples,
            sample_rate_hz,
            freq_min_hz: R::from_f64_lossy(20.0),
            freq_max_hz: R::from_f64_lossy(0.4) * sample_rate_hz,
        }
    }

    pub fn with_freq_range(mut self, freq_min_hz: R, freq_max_hz: R) -> Self {
        self.freq_min_hz = freq_min_hz;
        self.freq_max_hz = freq_max_hz;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_channels < 1 {
            return Err(Error::Config("num_channels must be >= 1".into()));
        }
        if self.filter_len_samples < 2 {
            return Err(Error::Config("filter_len_samples must be >= 2".into()));
        }
        let nyquist = self.sample_rate_hz / R::from_f64_lossy(2.0);
        if !(R::zero() < self.freq_min_hz
            && self.freq_min_hz < self.freq_max_hz
            && self.freq_max_hz < nyquist)
        {
            return Err(Error::Config(format!(
                "frequency range [{}, {}] must satisfy 0 < min < max < fs/2 = {}",
                self.freq_min_hz, self.freq_max_hz, nyquist
            )));
        }
        Ok(())
    }
}

/// Center frequencies uniformly spaced on the ERB-number scale.
pub fn center_frequencies<R: Real>(config: &BankConfig<R>) -> Result<Vec<R>> {
    config.validate()?;
    let k = config.num_channels;
    if k == 1 {
        return Ok(vec![config.freq_min_hz]);
    }
    let lo = hz_to_erb_number(config.freq_min_hz);
    let hi = hz_to_erb_number(config.freq_max_hz);
    let step = (hi - lo) / R::from_usize(k - 1).unwrap();
    let mut freqs = Vec::with_capacity(k);
    for i in 0..k {
        let n = lo + step * R::from_usize(i).unwrap();
        freqs.push(erb_number_to_hz(n));
    }
    // pin the endpoints exactly
    freqs[0] = config.freq_min_hz;
    freqs[k - 1] = config.freq_max_hz;
    Ok(freqs)
}

/// Raw (unnormalized) gammachirp samples on the grid t_n = (n+1)/fs.
pub fn raw_impulse_response<R: Real>(p: &GammachirpParams<R>, config: &BankConfig<R>) -> Vec<R> {
    let two_pi = R::from_f64_lossy(std::f64::consts::TAU);
    let erb_f = erb(p.center_freq_hz).expect("validated center frequency");
    let decay = two_pi * p.bandwidth_scale * erb_f;
    let omega = two_pi * p.center_freq_hz;
    let mut out = Vec::with_capacity(config.filter_len_samples);
    for n in 0..config.filter_len_samples {
        let t = R::from_usize(n + 1).unwrap() / config.sample_rate_hz;
        let env = t.powf(p.gamma_order - R::one()) * (-decay * t).exp();
        let phase = omega * t + p.chirp * t.ln();
        out.push(env * phase.cos());
    }
    out
}

/// Unit-norm gammachirp impulse response.
pub fn impulse_response<R: Real>(
    p: &GammachirpParams<R>,
    config: &BankConfig<R>,
) -> Result<Vec<R>> {
    p.validate(config.sample_rate_hz)?;
    let mut samples = raw_impulse_response(p, config);
    let norm = norm2(&samples);
    if !(norm > R::zero()) || !norm.is_finite() {
        return Err(Error::Config(format!(
            "channel {}: degenerate impulse response (norm {})",
            p.channel_index, norm
        )));
    }
    for s in &mut samples {
        *s = *s / norm;
    }
    Ok(samples)
}

/// Partial derivatives of the raw response with respect to (c, b, l),
/// evaluated sample-wise on the same grid as [`raw_impulse_response`].
pub struct RawResponseGrads<R> {
    pub d_chirp: Vec<R>,
    pub d_bandwidth: Vec<R>,
    pub d_gamma_order: Vec<R>,
}

pub fn raw_impulse_response_grads<R: Real>(
    p: &GammachirpParams<R>,
    config: &BankConfig<R>,
) -> RawResponseGrads<R> {
    let two_pi = R::from_f64_lossy(std::f64::consts::TAU);
    let erb_f = erb(p.center_freq_hz).expect("validated center frequency");
    let decay = two_pi * p.bandwidth_scale * erb_f;
    let omega = two_pi * p.center_freq_hz;
    let len = config.filter_len_samples;
    let mut d_c = Vec::with_capacity(len);
    let mut d_b = Vec::with_capacity(len);
    let mut d_l = Vec::with_capacity(len);
    for n in 0..len {
        let t = R::from_usize(n + 1).unwrap() / config.sample_rate_hz;
        let log_t = t.ln();
        let env = t.powf(p.gamma_order - R::one()) * (-decay * t).exp();
        let phase = omega * t + p.chirp * log_t;
        let psi = env * phase.cos();
        d_c.push(-env * phase.sin() * log_t);
        d_b.push(-two_pi * erb_f * t * psi);
        d_l.push(log_t * psi);
    }
    RawResponseGrads {
        d_chirp: d_c,
        d_bandwidth: d_b,
        d_gamma_order: d_l,
    }
}

/// An immutable bank of unit-norm atoms, one per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank<R> {
    pub config: BankConfig<R>,
    pub params: Vec<GammachirpParams<R>>,
    atoms: Vec<Vec<R>>,
}

impl<R: Real> FilterBank<R> {
    /// Build a bank from explicit per-channel parameters.
    pub fn build(config: BankConfig<R>, params: Vec<GammachirpParams<R>>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.num_channels {
            return Err(Error::Config(format!(
                "expected {} channel parameter sets, got {}",
                config.num_channels,
                params.len()
            )));
        }
        let mut atoms = Vec::with_capacity(params.len());
        for p in &params {
            atoms.push(impulse_response(p, &config)?);
        }
        Ok(Self {
            config,
            params,
            atoms,
        })
    }

    /// Gammatone bank (c = 0, b = 1, l = 4) on ERB-spaced center frequencies.
    pub fn gammatone(config: BankConfig<R>) -> Result<Self> {
        let freqs = center_frequencies(&config)?;
        let params = freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| GammachirpParams::gammatone(i, f))
            .collect();
        Self::build(config, params)
    }

    pub fn num_channels(&self) -> usize {
        self.config.num_channels
    }

    pub fn filter_len(&self) -> usize {
        self.config.filter_len_samples
    }

    pub fn atom(&self, channel: usize) -> &[R] {
        &self.atoms[channel]
    }

    pub fn atoms(&self) -> &[Vec<R>] {
        &self.atoms
    }

    /// Serialize to the versioned GCBK binary container.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(BANK_MAGIC)?;
        w.write_u32::<LittleEndian>(BANK_VERSION)?;
        w.write_u32::<LittleEndian>(self.config.num_channels as u32)?;
        w.write_u32::<LittleEndian>(self.config.filter_len_samples as u32)?;
        w.write_f64::<LittleEndian>(self.config.sample_rate_hz.to_f64_lossy())?;
        w.write_f64::<LittleEndian>(self.config.freq_min_hz.to_f64_lossy())?;
        w.write_f64::<LittleEndian>(self.config.freq_max_hz.to_f64_lossy())?;
        for p in &self.params {
            w.write_u32::<LittleEndian>(p.channel_index as u32)?;
            w.write_f64::<LittleEndian>(p.center_freq_hz.to_f64_lossy())?;
            w.write_f64::<LittleEndian>(p.gamma_order.to_f64_lossy())?;
            w.write_f64::<LittleEndian>(p.bandwidth_scale.to_f64_lossy())?;
            w.write_f64::<LittleEndian>(p.chirp.to_f64_lossy())?;
        }
        for atom in &self.atoms {
            for &s in atom {
                w.write_f64::<LittleEndian>(s.to_f64_lossy())?;
            }
        }
        Ok(())
    }

    /// Deserialize from the GCBK container.
    pub fn read_from<Rd: Read>(r: &mut Rd) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BANK_MAGIC {
            return Err(Error::Format("bad bank magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != BANK_VERSION {
            return Err(Error::Format(format!("unsupported bank version {version}")));
        }
        let k = r.read_u32::<LittleEndian>()? as usize;
        let filter_len = r.read_u32::<LittleEndian>()? as usize;
        let fs = r.read_f64::<LittleEndian>()?;
        let fmin = r.read_f64::<LittleEndian>()?;
        let fmax = r.read_f64::<LittleEndian>()?;
        let config = BankConfig {
            num_channels: k,
            filter_len_samples: filter_len,
            sample_rate_hz: R::from_f64_lossy(fs),
            freq_min_hz: R::from_f64_lossy(fmin),
            freq_max_hz: R::from_f64_lossy(fmax),
        };
        let mut params = Vec::with_capacity(k);
        for _ in 0..k {
            let channel_index = r.read_u32::<LittleEndian>()? as usize;
            let center = r.read_f64::<LittleEndian>()?;
            let l = r.read_f64::<LittleEndian>()?;
            let b = r.read_f64::<LittleEndian>()?;
            let c = r.read_f64::<LittleEndian>()?;
            params.push(GammachirpParams {
                channel_index,
                center_freq_hz: R::from_f64_lossy(center),
                gamma_order: R::from_f64_lossy(l),
                bandwidth_scale: R::from_f64_lossy(b),
                chirp: R::from_f64_lossy(c),
            });
        }
        let mut atoms = Vec::with_capacity(k);
        for _ in 0..k {
            let mut atom = Vec::with_capacity(filter_len);
            for _ in 0..filter_len {
                atom.push(R::from_f64_lossy(r.read_f64::<LittleEndian>()?));
            }
            atoms.push(atom);
        }
        Ok(Self {
            config,
            params,
            atoms,
        })
    }

    /// Dump parameters and atom samples as CSV.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "channel,center_freq_hz,gamma_order,bandwidth_scale,chirp")?;
        for p in &self.params {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.channel_index,
                p.center_freq_hz.to_f64_lossy(),
                p.gamma_order.to_f64_lossy(),
                p.bandwidth_scale.to_f64_lossy(),
                p.chirp.to_f64_lossy()
            )?;
        }
        writeln!(w, "channel,sample,value")?;
        for (i, atom) in self.atoms.iter().enumerate() {
            for (n, &s) in atom.iter().enumerate() {
                writeln!(w, "{},{},{}", i, n, s.to_f64_lossy())?;
            }
        }
        Ok(())
    }
}
