//! MFCC front end: pre-emphasis, framing, power spectrum, mel filterbank,
//! log compression, DCT-II and regression deltas.

use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::{Error, Result};

/// Filter energies are clamped here before the logarithm.
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

/// Half-width of the delta regression window, in frames.
pub const DELTA_WINDOW: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hamming,
    Rectangular,
}

impl Window {
    /// Window weights for a frame of `len` samples.
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hamming if len == 1 => vec![1.0],
            Window::Hamming => {
                let denom = (len - 1) as f64;
                (0..len)
                    .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_length_ms: f64,
    pub hop_ms: f64,
    pub preemphasis_alpha: f64,
    pub window: Window,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            frame_length_ms: 25.0,
            hop_ms: 10.0,
            preemphasis_alpha: 0.97,
            window: Window::Hamming,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.frame_length_ms) {
            return Err(Error::Parameter(format!(
                "need 0 < hop_ms <= frame_length_ms, got hop {} and frame {}",
                self.hop_ms, self.frame_length_ms
            )));
        }
        if !(0.0..1.0).contains(&self.preemphasis_alpha) {
            return Err(Error::Parameter(format!(
                "pre-emphasis alpha {} outside [0, 1)",
                self.preemphasis_alpha
            )));
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.frame_length_ms, sample_rate)
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.hop_ms, sample_rate)
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    ((ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub num_mel_filters: usize,
    pub num_cepstra: usize,
    /// Replace c0 with the log frame energy.
    pub include_energy: bool,
    pub include_deltas: bool,
    pub include_delta_deltas: bool,
    pub fft_size: usize,
    pub low_freq_hz: f64,
    pub high_freq_hz: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            num_mel_filters: 26,
            num_cepstra: 13,
            include_energy: false,
            include_deltas: true,
            include_delta_deltas: true,
            fft_size: 512,
            low_freq_hz: 0.0,
            high_freq_hz: 8000.0,
        }
    }
}

impl MfccConfig {
    /// Width of one feature row.
    pub fn feature_dim(&self) -> usize {
        let blocks = 1 + usize::from(self.include_deltas) + usize::from(self.include_delta_deltas);
        self.num_cepstra * blocks
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.num_mel_filters == 0 || self.num_cepstra == 0 {
            return Err(Error::Parameter(
                "filter and cepstrum counts must be positive".into(),
            ));
        }
        if self.num_cepstra > self.num_mel_filters {
            return Err(Error::Parameter(format!(
                "num_cepstra {} exceeds num_mel_filters {}",
                self.num_cepstra, self.num_mel_filters
            )));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::Parameter(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        if self.include_delta_deltas && !self.include_deltas {
            return Err(Error::Parameter(
                "delta-deltas require deltas to be enabled".into(),
            ));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(self.low_freq_hz >= 0.0 && self.low_freq_hz < self.high_freq_hz && self.high_freq_hz <= nyquist)
        {
            return Err(Error::Parameter(format!(
                "need 0 <= low ({}) < high ({}) <= {nyquist} Hz",
                self.low_freq_hz, self.high_freq_hz
            )));
        }
        Ok(())
    }
}

/// `T x D` matrix of cepstral observations, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: Vec<Vec<f64>>,
    /// Extraction parameters, absent for matrices read from text or built by hand.
    pub frame_spec: Option<FrameSpec>,
    pub config: Option<MfccConfig>,
}

impl FeatureMatrix {
    /// Builds a matrix from raw rows. Rows must be non-empty, equally wide and finite.
    pub fn from_rows(frames: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::EmptyObservation);
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Parameter("feature rows must be non-empty".into()));
        }
        for (t, row) in frames.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Parameter(format!(
                    "row {t} has {} columns, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parameter(format!("row {t} has a non-finite entry")));
            }
        }
        Ok(Self {
            frames,
            frame_spec: None,
            config: None,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.frames[t]
    }

    /// `mfcc T D` header followed by one whitespace-separated row per frame.
    pub fn to_text(&self) -> String {
        let mut out = format!("mfcc {} {}\n", self.num_frames(), self.dim());
        for row in &self.frames {
            let mut first = true;
            for x in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{x:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `mfcc T D` header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (t, d) = match fields.as_slice() {
            ["mfcc", t, d] => (
                t.parse::<usize>().map_err(|e| Error::parse(1, e.to_string()))?,
                d.parse::<usize>().map_err(|e| Error::parse(1, e.to_string()))?,
            ),
            _ => return Err(Error::parse(1, "expected `mfcc T D` header")),
        };
        let mut rows = Vec::with_capacity(t);
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if row.len() != d {
                return Err(Error::parse(
                    i + 1,
                    format!("expected {d} values, found {}", row.len()),
                ));
            }
            rows.push(row);
        }
        if rows.len() != t {
            return Err(Error::parse(
                0,
                format!("header declares {t} frames, found {}", rows.len()),
            ));
        }
        Self::from_rows(rows)
    }
}

/// `y[n] = x[n] - alpha * x[n-1]`, with `y[0] = x[0]`.
///
/// The result is a plain signal rather than an [`AudioClip`]: emphasis can
/// push samples outside `[-1, 1]`.
pub fn preemphasize(samples: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "pre-emphasis alpha {alpha} outside [0, 1)"
        )));
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = None;
    for &x in samples {
        out.push(match prev {
            None => x,
            Some(p) => x - alpha * p,
        });
        prev = Some(x);
    }
    Ok(out)
}

/// Number of frames produced for a signal of `len` samples: every full
/// frame, then one zero-padded frame if samples remain past the last full
/// frame's successor start.
pub fn frame_count(len: usize, frame_len: usize, hop: usize) -> usize {
    if len == 0 {
        return 0;
    }
    let full = if len >= frame_len {
        1 + (len - frame_len) / hop
    } else {
        0
    };
    full + usize::from(full * hop < len)
}

/// Splits a signal into windowed frames. The last frame is zero-padded.
pub fn frame_signal(samples: &[f64], sample_rate: u32, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::InputTooShort("signal has no samples".into()));
    }
    let frame_len = spec.frame_len(sample_rate);
    let hop = spec.hop_len(sample_rate);
    let window = spec.window.weights(frame_len);
    let count = frame_count(samples.len(), frame_len, hop);
    Ok((0..count)
        .map(|i| {
            let start = i * hop;
            (0..frame_len)
                .map(|n| samples.get(start + n).copied().unwrap_or(0.0) * window[n])
                .collect()
        })
        .collect())
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters spaced uniformly on the mel scale, evaluated at the
/// centre frequency of each one-sided DFT bin.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Vec<Vec<f64>>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(num_filters: usize, fft_size: usize, sample_rate: u32, low_hz: f64, high_hz: f64) -> Self {
        let low_mel = hz_to_mel(low_hz);
        let step = (hz_to_mel(high_hz) - low_mel) / (num_filters + 1) as f64;
        let edges: Vec<f64> = (0..num_filters + 2)
            .map(|i| mel_to_hz(low_mel + step * i as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / fft_size as f64;
        let num_bins = fft_size / 2 + 1;

        let weights = (1..=num_filters)
            .map(|j| {
                let (left, center, right) = (edges[j - 1], edges[j], edges[j + 1]);
                (0..num_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f > left && f < center {
                            (f - left) / (center - left)
                        } else if f >= center && f < right {
                            (right - f) / (right - center)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            weights,
            centers_hz: edges[1..=num_filters].to_vec(),
        }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Orthonormal DCT-II, keeping the first `keep` coefficients.
pub fn dct_ii(input: &[f64], keep: usize) -> Vec<f64> {
    let m = input.len() as f64;
    (0..keep)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / m).sqrt()
            } else {
                (2.0 / m).sqrt()
            };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(n, v)| {
                    v * (std::f64::consts::PI * k as f64 * (2.0 * n as f64 + 1.0) / (2.0 * m)).cos()
                })
                .sum();
            scale * sum
        })
        .collect()
}

/// Regression deltas over `±DELTA_WINDOW` frames; edge frames are replicated.
pub fn deltas(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t_max = rows.len() as isize - 1;
    let denom: f64 = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    (0..rows.len())
        .map(|t| {
            let dim = rows[t].len();
            (0..dim)
                .map(|d| {
                    let mut acc = 0.0;
                    for n in 1..=DELTA_WINDOW as isize {
                        let ahead = (t as isize + n).min(t_max) as usize;
                        let behind = (t as isize - n).max(0) as usize;
                        acc += n as f64 * (rows[ahead][d] - rows[behind][d]);
                    }
                    acc / denom
                })
                .collect()
        })
        .collect()
}

/// Reusable extractor: plans the FFT and builds the filterbank once per
/// sample rate.
pub struct MfccExtractor {
    spec: FrameSpec,
    config: MfccConfig,
    sample_rate: u32,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("spec", &self.spec)
            .field("config", &self.config)
            .field("sample_rate", &self.sample_rate)
            .finish_non_exhaustive()
    }
}

impl MfccExtractor {
    pub fn new(spec: FrameSpec, config: MfccConfig, sample_rate: u32) -> Result<Self> {
        spec.validate()?;
        config.validate(sample_rate)?;
        let frame_len = spec.frame_len(sample_rate);
        if frame_len > config.fft_size {
            return Err(Error::Parameter(format!(
                "frame of {frame_len} samples does not fit a {}-point DFT",
                config.fft_size
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(config.fft_size);
        let filterbank = MelFilterbank::new(
            config.num_mel_filters,
            config.fft_size,
            sample_rate,
            config.low_freq_hz,
            config.high_freq_hz,
        );
        Ok(Self {
            spec,
            config,
            sample_rate,
            fft,
            filterbank,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Full complex DFT of a zero-padded frame.
    pub fn spectrum(&self, frame: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = (0..self.config.fft_size)
            .map(|n| Complex64::new(frame.get(n).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf
    }

    /// One-sided `|X[k]|^2 / fft_size` for `k = 0..=fft_size/2`.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let n = self.config.fft_size as f64;
        self.spectrum(frame)[..self.config.fft_size / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / n)
            .collect()
    }

    /// Floored natural-log filterbank energies of one windowed frame.
    pub fn log_filterbank(&self, frame: &[f64]) -> Vec<f64> {
        self.filterbank
            .apply(&self.power_spectrum(frame))
            .into_iter()
            .map(|e| e.max(LOG_ENERGY_FLOOR).ln())
            .collect()
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        if clip.sample_rate() != self.sample_rate {
            return Err(Error::Parameter(format!(
                "extractor built for {} Hz, clip is {} Hz",
                self.sample_rate,
                clip.sample_rate()
            )));
        }
        let emphasized = preemphasize(clip.samples(), self.spec.preemphasis_alpha)?;
        let frames = frame_signal(&emphasized, self.sample_rate, &self.spec)?;

        let statics: Vec<Vec<f64>> = frames
            .iter()
            .map(|frame| {
                let mut cepstra = dct_ii(&self.log_filterbank(frame), self.config.num_cepstra);
                if self.config.include_energy {
                    let energy: f64 = frame.iter().map(|x| x * x).sum();
                    cepstra[0] = energy.max(LOG_ENERGY_FLOOR).ln();
                }
                cepstra
            })
            .collect();

        let mut rows = statics.clone();
        if self.config.include_deltas {
            let d1 = deltas(&statics);
            if self.config.include_delta_deltas {
                let d2 = deltas(&d1);
                for (row, (a, b)) in rows.iter_mut().zip(d1.iter().zip(&d2)) {
                    row.extend_from_slice(a);
                    row.extend_from_slice(b);
                }
            } else {
                for (row, a) in rows.iter_mut().zip(&d1) {
                    row.extend_from_slice(a);
                }
            }
        }

        let mut matrix = FeatureMatrix::from_rows(rows)?;
        matrix.frame_spec = Some(self.spec);
        matrix.config = Some(self.config);
        Ok(matrix)
    }
}

/// Convenience wrapper building a one-off [`MfccExtractor`].
pub fn extract_mfcc(clip: &AudioClip, spec: &FrameSpec, config: &MfccConfig) -> Result<FeatureMatrix> {
    if clip.is_empty() {
        return Err(Error::InputTooShort("clip has no samples".into()));
    }
    MfccExtractor::new(*spec, *config, clip.sample_rate())?.extract(clip)
}
