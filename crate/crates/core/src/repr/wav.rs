//! Minimal PCM WAV ingestion and export.
//!
//! Reads 16-bit integer PCM (format tag 1), downmixing multi-channel
//! input to mono by averaging, with samples scaled to [-1, 1].
//! Compressed or float formats are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A mono audio signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal<R> {
    pub samples: Vec<R>,
    pub sample_rate_hz: R,
    pub source_id: String,
}

fn ingestion_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Load a PCM WAV file as a mono signal in [-1, 1].
pub fn load_wav<R: Real>(path: &Path) -> Result<AudioSignal<R>> {
    let file = File::open(path).map_err(|e| ingestion_error(path, e.to_string()))?;
    let mut r = BufReader::new(file);

    let mut tag = [0u8; 4];
    r.read_exact(&mut tag)
        .map_err(|e| ingestion_error(path, e.to_string()))?;
    if &tag != b"RIFF" {
        return Err(ingestion_error(path, "not a RIFF file"));
    }
    r.read_u32::<LittleEndian>()?;
    r.read_exact(&mut tag)?;
    if &tag != b"WAVE" {
        return Err(ingestion_error(path, "not a WAVE file"));
    }

    let mut format: Option<(u16, u16, u32, u16)> = None;
    loop {
        if r.read_exact(&mut tag).is_err() {
            return Err(ingestion_error(path, "missing data chunk"));
        }
        let size = r.read_u32::<LittleEndian>()?;
        match &tag {
            b"fmt " => {
                let audio_format = r.read_u16::<LittleEndian>()?;
                let num_channels = r.read_u16::<LittleEndian>()?;
                let sample_rate = r.read_u32::<LittleEndian>()?;
                r.read_u32::<LittleEndian>()?; // byte rate
                r.read_u16::<LittleEndian>()?; // block align
                let bits = r.read_u16::<LittleEndian>()?;
                if size > 16 {
                    r.seek(SeekFrom::Current((size - 16) as i64))?;
                }
                format = Some((audio_format, num_channels, sample_rate, bits));
            }
            b"data" => {
                let (audio_format, num_channels, sample_rate, bits) = format
                    .ok_or_else(|| ingestion_error(path, "data chunk before fmt chunk"))?;
                if audio_format != 1 {
                    return Err(ingestion_error(
                        path,
                        format!("unsupported format tag {audio_format} (PCM only)"),
                    ));
                }
                if bits != 16 {
                    return Err(ingestion_error(
                        path,
                        format!("unsupported bit depth {bits} (16-bit only)"),
                    ));
                }
                if num_channels == 0 {
                    return Err(ingestion_error(path, "zero channels"));
                }
                let num_frames = size as usize / (2 * num_channels as usize);
                if num_frames == 0 {
                    return Err(ingestion_error(path, "empty data chunk"));
                }
                let scale = R::from_f64_lossy(1.0 / 32768.0);
                let ch = R::from_u16(num_channels).unwrap();
                let mut samples = Vec::with_capacity(num_frames);
                for _ in 0..num_frames {
                    let mut acc = R::zero();
                    for _ in 0..num_channels {
                        let s = r.read_i16::<LittleEndian>()?;
                        acc += R::from_i16(s).unwrap();
                    }
                    samples.push(acc * scale / ch);
                }
                return Ok(AudioSignal {
                    samples,
                    sample_rate_hz: R::from_u32(sample_rate).unwrap(),
                    source_id: path.display().to_string(),
                });
            }
            _ => {
                // skip unknown chunk (word aligned)
                let skip = size + (size & 1);
                r.seek(SeekFrom::Current(skip as i64))?;
            }
        }
    }
}

/// Write a mono signal as 16-bit PCM, clipping to [-1, 1].
pub fn write_wav<R: Real>(path: &Path, samples: &[R], sample_rate_hz: u32) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let data_len = (samples.len() * 2) as u32;
    w.write_all(b"RIFF")?;
    w.write_u32::<LittleEndian>(36 + data_len)?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_u32::<LittleEndian>(16)?;
    w.write_u16::<LittleEndian>(1)?; // PCM
    w.write_u16::<LittleEndian>(1)?; // mono
    w.write_u32::<LittleEndian>(sample_rate_hz)?;
    w.write_u32::<LittleEndian>(sample_rate_hz * 2)?;
    w.write_u16::<LittleEndian>(2)?;
    w.write_u16::<LittleEndian>(16)?;
    w.write_all(b"data")?;
    w.write_u32::<LittleEndian>(data_len)?;
    for &s in samples {
        let x = s.to_f64_lossy().clamp(-1.0, 1.0);
        let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_i16::<LittleEndian>(q)?;
    }
    Ok(())
}
