//! PCM-16 RIFF/WAVE input and output.

use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

/// A mono waveform with samples normalized to `[-1.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    /// Word spoken in the clip, when known (training and evaluation fixtures).
    pub label: Option<String>,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Parameter("audio clip has no samples".into()));
        }
        if let Some((i, x)) = samples
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || x.abs() > 1.0)
        {
            return Err(Error::Parameter(format!("sample {i} = {x} is outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`, clamping to `[-1, 1]`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|x| (x * gain).clamp(-1.0, 1.0)).collect(),
            sample_rate: self.sample_rate,
            label: self.label.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            label: None,
        }
    }
}

/// Reads a PCM-16 WAV file. Stereo input is averaged down to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let file = std::fs::File::open(path)?;
    read_wav(std::io::BufReader::new(file))
}

/// Decodes an in-memory WAV file.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    read_wav(Cursor::new(bytes))
}

fn read_wav<R: Read>(reader: R) -> Result<AudioClip> {
    let mut reader = hound::WavReader::new(reader)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "expected 16-bit PCM, found {:?} with {} bits per sample",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = usize::from(spec.channels);
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedFormat(format!(
            "expected mono or stereo, found {channels} channels"
        )));
    }

    let raw = reader.samples::<i16>().collect::<Result<Vec<_>, _>>()?;
    if raw.len() % channels != 0 {
        return Err(Error::Format("truncated sample frame".into()));
    }
    let samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f64 = frame.iter().map(|&s| f64::from(s)).sum();
            sum / channels as f64 / PCM16_SCALE
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Format("WAV file contains no samples".into()));
    }
    Ok(AudioClip::from_parts_unchecked(samples, spec.sample_rate))
}

/// Writes a mono PCM-16 WAV file.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_wav(clip, std::io::BufWriter::new(file))
}

/// Encodes a clip as an in-memory mono PCM-16 WAV file.
pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    write_wav(clip, &mut buf)?;
    Ok(buf.into_inner())
}

fn write_wav<W: Write + Seek>(clip: &AudioClip, writer: W) -> Result<()> {
    if clip.is_empty() {
        return Err(Error::Parameter("cannot write an empty clip".into()));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::new(writer, spec)?;
    for &x in clip.samples() {
        writer.write_sample(quantize(x))?;
    }
    writer.finalize()?;
    Ok(())
}

fn quantize(x: f64) -> i16 {
    (x * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16
}
