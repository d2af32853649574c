//! Seeded synthetic "tone words" for fixtures and experiments.
//!
//! A tone word is a sequence of sinusoid segments, e.g. `up 400 800 1600`.
//! Each rendered clip jitters segment durations, pitch and loudness and adds
//! a little white noise, so repeated renderings of a word differ the way
//! repeated utterances do.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioClip;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ToneWord {
    pub label: String,
    pub tones_hz: Vec<f64>,
}

/// Rendering parameters shared by every word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub segment_ms: (f64, f64),
    pub silence_ms: (f64, f64),
    pub amplitude: (f64, f64),
    /// Relative pitch jitter, e.g. `0.02` for ±2%.
    pub pitch_jitter: f64,
    pub noise_amplitude: f64,
    pub fade_ms: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            segment_ms: (90.0, 140.0),
            silence_ms: (60.0, 100.0),
            amplitude: (0.3, 0.7),
            pitch_jitter: 0.02,
            noise_amplitude: 0.002,
            fade_ms: 5.0,
        }
    }
}

/// Parses a vocabulary file: one `label freq_hz...` line per word; `#` starts a comment.
pub fn parse_vocabulary(text: &str) -> Result<Vec<ToneWord>> {
    let mut words: Vec<ToneWord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let label = fields.next().unwrap_or_default().to_string();
        let tones_hz = fields
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if tones_hz.is_empty() {
            return Err(Error::parse(i + 1, format!("word {label:?} has no tones")));
        }
        if tones_hz.iter().any(|f| f.is_nan() || *f <= 0.0) {
            return Err(Error::parse(i + 1, "tone frequencies must be positive"));
        }
        if words.iter().any(|w| w.label == label) {
            return Err(Error::parse(i + 1, format!("duplicate word {label:?}")));
        }
        words.push(ToneWord { label, tones_hz });
    }
    if words.is_empty() {
        return Err(Error::parse(0, "vocabulary is empty"));
    }
    Ok(words)
}

/// A pure sinusoid, useful as a fixture.
pub fn tone(freq_hz: f64, duration_ms: f64, amplitude: f64, sample_rate: u32) -> Result<AudioClip> {
    let len = (duration_ms * f64::from(sample_rate) / 1000.0).round() as usize;
    let rate = f64::from(sample_rate);
    let samples = (0..len)
        .map(|n| amplitude * (2.0 * PI * freq_hz * n as f64 / rate).sin())
        .collect();
    AudioClip::new(samples, sample_rate)
}

/// Seeded renderer for tone words.
#[derive(Debug)]
pub struct Synthesizer {
    config: SynthConfig,
    rng: ChaCha8Rng,
}

impl Synthesizer {
    pub fn new(config: SynthConfig, seed: u64) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            self.rng.random_range(lo..hi)
        } else {
            lo
        }
    }

    fn silence(&mut self) -> Vec<f64> {
        let ms = self.uniform(self.config.silence_ms);
        vec![0.0; self.ms_to_len(ms)]
    }

    fn ms_to_len(&self, ms: f64) -> usize {
        (ms * f64::from(self.config.sample_rate) / 1000.0).round() as usize
    }

    /// Renders one utterance of `word`, labeled with the word.
    pub fn render(&mut self, word: &ToneWord) -> Result<AudioClip> {
        let rate = f64::from(self.config.sample_rate);
        let fade = self.ms_to_len(self.config.fade_ms);
        let mut samples = self.silence();
        for &f in &word.tones_hz {
            let jitter = self.config.pitch_jitter;
            let freq = f * (1.0 + self.uniform((-jitter, jitter)));
            let amp = self.uniform(self.config.amplitude);
            let len = {
                let ms = self.uniform(self.config.segment_ms);
                self.ms_to_len(ms)
            };
            let phase = self.uniform((0.0, 2.0 * PI));
            for n in 0..len {
                let edge = n.min(len - 1 - n);
                let envelope = if edge < fade {
                    0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos()
                } else {
                    1.0
                };
                samples.push(amp * envelope * (2.0 * PI * freq * n as f64 / rate + phase).sin());
            }
        }
        samples.extend(self.silence());
        let noise = self.config.noise_amplitude;
        for x in &mut samples {
            *x = (*x + self.uniform((-noise, noise))).clamp(-1.0, 1.0);
        }
        Ok(AudioClip::new(samples, self.config.sample_rate)?.with_label(word.label.clone()))
    }

    /// Renders `count` utterances of every word, grouped by word in vocabulary order.
    pub fn render_set(&mut self, words: &[ToneWord], count: usize) -> Result<Vec<AudioClip>> {
        let mut out = Vec::with_capacity(words.len() * count);
        for w in words {
            for _ in 0..count {
                out.push(self.render(w)?);
            }
        }
        Ok(out)
    }
}

/// Joins clips end to end with `gap_ms` of silence between them.
pub fn concatenate(clips: &[AudioClip], gap_ms: f64) -> Result<AudioClip> {
    let Some(first) = clips.first() else {
        return Err(Error::Parameter("nothing to concatenate".into()));
    };
    let rate = first.sample_rate();
    let gap = (gap_ms * f64::from(rate) / 1000.0).round() as usize;
    let mut samples = Vec::new();
    for (i, c) in clips.iter().enumerate() {
        if c.sample_rate() != rate {
            return Err(Error::Parameter("clips have different sample rates".into()));
        }
        if i > 0 {
            samples.extend(std::iter::repeat_n(0.0, gap));
        }
        samples.extend_from_slice(c.samples());
    }
    AudioClip::new(samples, rate)
}
