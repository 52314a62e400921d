//! Minimal RIFF/WAVE codec: mono, 16-bit PCM or 32-bit IEEE float.
//!
//! Dataset audio moves through these two functions only. 32-bit float files
//! round-trip exactly; 16-bit files quantize with at most one half-step of
//! error on write (2^−16, or 2^−15 at the clamp edge). Unknown RIFF chunks
//! are skipped on read, so files carrying extra metadata still load.

use crate::error::{Error, Result};
use crate::signal::Waveform;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// On-disk encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    /// Format tag 1, 16 bits per sample; samples scaled by 2^15 and clamped.
    Int16,
    /// Format tag 3, 32 bits per sample; lossless for f32-representable data.
    Float32,
}

const TAG_PCM: u16 = 1;
const TAG_FLOAT: u16 = 3;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::WavFormat { path: path.to_path_buf(), reason: reason.into() }
}

fn read_exact_or(reader: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            format_err(path, "file truncated mid-chunk")
        } else {
            Error::io(path, e)
        }
    })
}

fn read_u16(reader: &mut impl Read, path: &Path) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact_or(reader, &mut b, path)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(reader: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(reader, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

struct FmtChunk {
    audio_format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Read a mono 16-bit PCM or 32-bit float WAV file into f64 samples.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact_or(&mut reader, &mut magic, path)?;
    if &magic != b"RIFF" {
        return Err(format_err(path, "missing RIFF magic"));
    }
    let _riff_size = read_u32(&mut reader, path)?;
    read_exact_or(&mut reader, &mut magic, path)?;
    if &magic != b"WAVE" {
        return Err(format_err(path, "missing WAVE form type"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<Vec<u8>> = None;
    loop {
        let mut id = [0u8; 4];
        match reader.read_exact(&mut id) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(Error::io(path, e)),
        }
        let size = read_u32(&mut reader, path)? as usize;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(format_err(path, format!("fmt chunk too short ({size} bytes)")));
                }
                let audio_format = read_u16(&mut reader, path)?;
                let channels = read_u16(&mut reader, path)?;
                let sample_rate = read_u32(&mut reader, path)?;
                let _byte_rate = read_u32(&mut reader, path)?;
                let _block_align = read_u16(&mut reader, path)?;
                let bits_per_sample = read_u16(&mut reader, path)?;
                skip(&mut reader, size - 16, path)?;
                fmt = Some(FmtChunk { audio_format, channels, sample_rate, bits_per_sample });
            }
            b"data" => {
                let mut bytes = vec![0u8; size];
                read_exact_or(&mut reader, &mut bytes, path)?;
                data = Some(bytes);
            }
            _ => skip(&mut reader, size, path)?,
        }
        if fmt.is_some() && data.is_some() {
            break;
        }
        if size % 2 == 1 {
            // RIFF chunks are word-aligned; odd sizes carry a pad byte
            let mut pad = [0u8; 1];
            match reader.read_exact(&mut pad) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(Error::io(path, e)),
            }
        }
    }

    let fmt = fmt.ok_or_else(|| format_err(path, "no fmt chunk"))?;
    let data = data.ok_or_else(|| format_err(path, "no data chunk"))?;
    if fmt.channels != 1 {
        return Err(format_err(path, format!("{} channels; only mono is supported", fmt.channels)));
    }

    let samples: Vec<f64> = match (fmt.audio_format, fmt.bits_per_sample) {
        (TAG_PCM, 16) => {
            if data.len() % 2 != 0 {
                return Err(format_err(path, "data chunk is not a whole number of samples"));
            }
            data.chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                .collect()
        }
        (TAG_FLOAT, 32) => {
            if data.len() % 4 != 0 {
                return Err(format_err(path, "data chunk is not a whole number of samples"));
            }
            data.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect()
        }
        (tag, bits) => {
            return Err(format_err(
                path,
                format!("unsupported encoding: format tag {tag}, {bits} bits per sample"),
            ))
        }
    };

    Waveform::new(samples, fmt.sample_rate)
}

fn skip(reader: &mut impl Read, bytes: usize, path: &Path) -> Result<()> {
    let copied = std::io::copy(&mut reader.take(bytes as u64), &mut std::io::sink())
        .map_err(|e| Error::io(path, e))?;
    if copied as usize != bytes {
        return Err(format_err(path, "file truncated mid-chunk"));
    }
    Ok(())
}

/// Write a waveform as a mono WAV file in the requested encoding.
pub fn write_wav(path: impl AsRef<Path>, waveform: &Waveform, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);

    let n = waveform.len();
    let (tag, bytes_per_sample, fmt_size) = match format {
        SampleFormat::Int16 => (TAG_PCM, 2usize, 16u32),
        // float fmt carries a zero-length extension plus a fact chunk
        SampleFormat::Float32 => (TAG_FLOAT, 4usize, 18u32),
    };
    let data_size = (n * bytes_per_sample) as u32;
    let fact_size: u32 = if format == SampleFormat::Float32 { 12 } else { 0 };
    let riff_size = 4 + (8 + fmt_size) + fact_size + (8 + data_size);

    let io = |e| Error::io(path, e);
    w.write_all(b"RIFF").map_err(io)?;
    w.write_all(&riff_size.to_le_bytes()).map_err(io)?;
    w.write_all(b"WAVE").map_err(io)?;

    w.write_all(b"fmt ").map_err(io)?;
    w.write_all(&fmt_size.to_le_bytes()).map_err(io)?;
    w.write_all(&tag.to_le_bytes()).map_err(io)?;
    w.write_all(&1u16.to_le_bytes()).map_err(io)?;
    w.write_all(&waveform.sample_rate().to_le_bytes()).map_err(io)?;
    let byte_rate = waveform.sample_rate() * bytes_per_sample as u32;
    w.write_all(&byte_rate.to_le_bytes()).map_err(io)?;
    w.write_all(&(bytes_per_sample as u16).to_le_bytes()).map_err(io)?;
    w.write_all(&((bytes_per_sample * 8) as u16).to_le_bytes()).map_err(io)?;
    if format == SampleFormat::Float32 {
        w.write_all(&0u16.to_le_bytes()).map_err(io)?; // cbSize
        w.write_all(b"fact").map_err(io)?;
        w.write_all(&4u32.to_le_bytes()).map_err(io)?;
        w.write_all(&(n as u32).to_le_bytes()).map_err(io)?;
    }

    w.write_all(b"data").map_err(io)?;
    w.write_all(&data_size.to_le_bytes()).map_err(io)?;
    match format {
        SampleFormat::Int16 => {
            for &s in waveform.samples() {
                let q = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
                w.write_all(&q.to_le_bytes()).map_err(io)?;
            }
        }
        SampleFormat::Float32 => {
            for &s in waveform.samples() {
                w.write_all(&(s as f32).to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}
