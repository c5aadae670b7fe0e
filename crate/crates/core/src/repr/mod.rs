//! Dataset-level representation pipeline: encoding, normalization,
//! spike-time binning, and the sparsity ratio.

pub mod wav;

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::bank::FilterBank;
use crate::error::{Error, Result};
use crate::lca::{encode, Dictionary, LcaConfig, SparseCode};
use crate::scalar::Real;

pub use wav::{load_wav, write_wav, AudioSignal};

const REPR_MAGIC: &[u8; 4] = b"EVRP";
const REPR_VERSION: u32 = 1;

/// Provenance of an event representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReprKind {
    Lca,
    Alca,
    ExternalSpikeHistogram,
}

impl ReprKind {
    fn to_u8(self) -> u8 {
        match self {
            ReprKind::Lca => 0,
            ReprKind::Alca => 1,
            ReprKind::ExternalSpikeHistogram => 2,
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(ReprKind::Lca),
            1 => Ok(ReprKind::Alca),
            2 => Ok(ReprKind::ExternalSpikeHistogram),
            _ => Err(Error::Format(format!("unknown representation kind {v}"))),
        }
    }
}

/// One nonzero cell of the (channel, step) grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprEvent<R> {
    pub channel: u32,
    pub step: u32,
    pub value: R,
}

/// A sparse time-frequency grid of event values.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRepresentation<R> {
    pub num_channels: usize,
    pub num_steps: usize,
    pub kind: ReprKind,
    pub label: Option<u32>,
    /// Sorted by (channel, step); no duplicate keys.
    pub events: Vec<ReprEvent<R>>,
}

impl<R: Real> EventRepresentation<R> {
    pub fn from_sparse_code(code: &SparseCode<R>, kind: ReprKind, label: Option<u32>) -> Self {
        let events = code
            .events
            .iter()
            .map(|e| ReprEvent {
                channel: e.channel,
                step: e.frame,
                value: e.value,
            })
            .collect();
        Self {
            num_channels: code.num_channels,
            num_steps: code.num_frames,
            kind,
            label,
            events,
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.events.len()
    }

    /// Sum of event values (spike totals for histogram kinds).
    pub fn value_total(&self) -> R {
        self.events.iter().map(|e| e.value).sum()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(REPR_MAGIC)?;
        w.write_u32::<LittleEndian>(REPR_VERSION)?;
        w.write_u32::<LittleEndian>(self.num_channels as u32)?;
        w.write_u32::<LittleEndian>(self.num_steps as u32)?;
        w.write_u8(self.kind.to_u8())?;
        w.write_i64::<LittleEndian>(self.label.map_or(-1, |l| l as i64))?;
        w.write_u64::<LittleEndian>(self.events.len() as u64)?;
        for e in &self.events {
            w.write_u32::<LittleEndian>(e.channel)?;
            w.write_u32::<LittleEndian>(e.step)?;
            w.write_f64::<LittleEndian>(e.value.to_f64_lossy())?;
        }
        Ok(())
    }

    pub fn read_from<Rd: Read>(r: &mut Rd) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != REPR_MAGIC {
            return Err(Error::Format("bad representation magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != REPR_VERSION {
            return Err(Error::Format(format!(
                "unsupported representation version {version}"
            )));
        }
        let num_channels = r.read_u32::<LittleEndian>()? as usize;
        let num_steps = r.read_u32::<LittleEndian>()? as usize;
        let kind = ReprKind::from_u8(r.read_u8()?)?;
        let label_raw = r.read_i64::<LittleEndian>()?;
        let label = if label_raw < 0 {
            None
        } else {
            Some(label_raw as u32)
        };
        let count = r.read_u64::<LittleEndian>()? as usize;
        let mut events = Vec::with_capacity(count);
        for _ in 0..count {
            let channel = r.read_u32::<LittleEndian>()?;
            let step = r.read_u32::<LittleEndian>()?;
            let value = R::from_f64_lossy(r.read_f64::<LittleEndian>()?);
            events.push(ReprEvent {
                channel,
                step,
                value,
            });
        }
        Ok(Self {
            num_channels,
            num_steps,
            kind,
            label,
            events,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}

/// Load every `.evrp` file in a directory, sorted by file name.
pub fn load_repr_dir<R: Real>(dir: &Path) -> Result<Vec<EventRepresentation<R>>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "evrp"))
        .collect();
    paths.sort();
    paths.iter().map(|p| EventRepresentation::load(p)).collect()
}

/// Dataset split identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split '{other}'"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: u32,
    pub split: Split,
}

/// CSV-backed dataset manifest (columns: path, label, split).
#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse_csv(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("path")) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Format(format!(
                    "manifest line {}: expected path,label,split",
                    lineno + 1
                )));
            }
            let raw_path = PathBuf::from(parts[0].trim());
            let path = if raw_path.is_absolute() {
                raw_path
            } else {
                base_dir.join(raw_path)
            };
            if !seen.insert(path.clone()) {
                return Err(Error::Format(format!(
                    "manifest line {}: duplicate path {}",
                    lineno + 1,
                    path.display()
                )));
            }
            let label: u32 = parts[1].trim().parse().map_err(|_| {
                Error::Format(format!("manifest line {}: bad label", lineno + 1))
            })?;
            let split: Split = parts[2].parse()?;
            entries.push(ManifestEntry { path, label, split });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let manifest = Self::parse_csv(&text, base)?;
        for entry in &manifest.entries {
            if !entry.path.exists() {
                return Err(Error::Ingestion {
                    path: entry.path.display().to_string(),
                    reason: "file listed in manifest does not exist".into(),
                });
            }
        }
        Ok(manifest)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// Options for dataset encoding.
#[derive(Debug, Clone, Copy)]
pub struct EncodeOptions {
    pub stride_samples: usize,
    /// Pad every signal to at least this many samples before encoding.
    pub min_len_samples: Option<usize>,
    pub kind: ReprKind,
}

/// Encode every manifest entry; per-file failures are collected rather
/// than aborting the run.
pub fn encode_dataset<R: Real>(
    manifest: &DatasetManifest,
    bank: &FilterBank<R>,
    cfg: &LcaConfig<R>,
    opts: &EncodeOptions,
) -> (Vec<(ManifestEntry, EventRepresentation<R>)>, Vec<(PathBuf, Error)>) {
    let results: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let encoded = encode_entry(entry, bank, cfg, opts);
            (entry.clone(), encoded)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (entry, res) in results {
        match res {
            Ok(rep) => ok.push((entry, rep)),
            Err(e) => failed.push((entry.path.clone(), e)),
        }
    }
    (ok, failed)
}

fn encode_entry<R: Real>(
    entry: &ManifestEntry,
    bank: &FilterBank<R>,
    cfg: &LcaConfig<R>,
    opts: &EncodeOptions,
) -> Result<EventRepresentation<R>> {
    let audio = load_wav::<R>(&entry.path)?;
    let mut samples = audio.samples;
    if let Some(min_len) = opts.min_len_samples {
        if samples.len() < min_len {
            samples.resize(min_len, R::zero());
        }
    }
    let dict = Dictionary::new(bank.clone(), opts.stride_samples, samples.len())?;
    let (code, _) = encode(&samples, &dict, cfg)?;
    Ok(EventRepresentation::from_sparse_code(
        &code,
        opts.kind,
        Some(entry.label),
    ))
}

/// Scale all values to [0, 1] by the training-split max magnitude.
///
/// Zeros stay zero, so the sparsity pattern is untouched; non-training
/// values are clipped to 1.
pub fn normalize_01<R: Real>(
    train: &mut [EventRepresentation<R>],
    eval: &mut [EventRepresentation<R>],
) -> Result<R> {
    let max = train
        .iter()
        .flat_map(|rep| rep.events.iter())
        .map(|e| e.value.abs())
        .fold(R::zero(), R::max);
    if !(max > R::zero()) {
        return Err(Error::Normalization(
            "training split has no nonzero values".into(),
        ));
    }
    for rep in train.iter_mut() {
        for e in &mut rep.events {
            e.value = e.value.abs() / max;
        }
    }
    for rep in eval.iter_mut() {
        for e in &mut rep.events {
            e.value = (e.value.abs() / max).min(R::one());
        }
    }
    Ok(max)
}

/// Histogram spike times into (channel, bin) counts.
pub fn bin_spike_times<R: Real>(
    spike_times: &[(u32, f64)],
    num_channels: usize,
    duration_s: f64,
    bin_width_s: f64,
) -> Result<EventRepresentation<R>> {
    if !(bin_width_s > 0.0) {
        return Err(Error::Config("bin width must be > 0".into()));
    }
    if !(duration_s > 0.0) {
        return Err(Error::Config("duration must be > 0".into()));
    }
    let ratio = duration_s / bin_width_s;
    // near-integer bin counts snap rather than rounding up on float fuzz
    let num_bins = if (ratio - ratio.round()).abs() < 1e-6 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let mut counts = vec![0u64; num_channels * num_bins];
    for &(channel, time) in spike_times {
        if channel as usize >= num_channels {
            return Err(Error::Ingestion {
                path: String::new(),
                reason: format!("spike channel {channel} out of range"),
            });
        }
        if !(0.0..=duration_s).contains(&time) {
            return Err(Error::Ingestion {
                path: String::new(),
                reason: format!("spike time {time} outside [0, {duration_s}]"),
            });
        }
        let bin = ((time / bin_width_s) as usize).min(num_bins - 1);
        counts[channel as usize * num_bins + bin] += 1;
    }
    let mut events = Vec::new();
    for channel in 0..num_channels {
        for bin in 0..num_bins {
            let c = counts[channel * num_bins + bin];
            if c > 0 {
                events.push(ReprEvent {
                    channel: channel as u32,
                    step: bin as u32,
                    value: R::from_u64(c).unwrap(),
                });
            }
        }
    }
    Ok(EventRepresentation {
        num_channels,
        num_steps: num_bins,
        kind: ReprKind::ExternalSpikeHistogram,
        label: None,
        events,
    })
}

/// Parse a "channel,time_s" spike event CSV.
pub fn parse_spike_csv(text: &str) -> Result<Vec<(u32, f64)>> {
    let mut spikes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("channel")) {
            continue;
        }
        let (ch, t) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!("spike line {}: expected channel,time", lineno + 1))
        })?;
        let channel: u32 = ch
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("spike line {}: bad channel", lineno + 1)))?;
        let time: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("spike line {}: bad time", lineno + 1)))?;
        spikes.push((channel, time));
    }
    Ok(spikes)
}

/// Sparsity ratio: mean nonzero count of the coded representations over
/// the mean spike count of the reference representations. Reference
/// histogram kinds count total spikes (pre-normalization values); other
/// kinds count nonzero cells.
pub fn sparsity_ratio<R: Real>(
    coded: &[EventRepresentation<R>],
    reference: &[EventRepresentation<R>],
) -> Result<R> {
    if coded.is_empty() || reference.is_empty() {
        return Err(Error::Domain("sparsity_ratio: empty collection".into()));
    }
    let coded_mean: R = coded
        .iter()
        .map(|rep| R::from_usize(rep.nonzero_count()).unwrap())
        .sum::<R>()
        / R::from_usize(coded.len()).unwrap();
    let reference_mean: R = reference
        .iter()
        .map(|rep| match rep.kind {
            ReprKind::ExternalSpikeHistogram => rep.value_total(),
            _ => R::from_usize(rep.nonzero_count()).unwrap(),
        })
        .sum::<R>()
        / R::from_usize(reference.len()).unwrap();
    if !(reference_mean > R::zero()) {
        return Err(Error::Domain(
            "sparsity_ratio: reference has no activity".into(),
        ));
    }
    Ok(coded_mean / reference_mean)
}
