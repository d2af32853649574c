//! Closed-vocabulary isolated-word recognition and accuracy evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::hmm::{sequence_logprob, HmmModel};
use crate::mfcc::{FeatureMatrix, FrameSpec, MfccConfig, MfccExtractor};
use crate::{Error, Result};

/// Model files in a vocabulary directory carry this extension.
pub const MODEL_EXTENSION: &str = "hmm";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub frame: FrameSpec,
    pub mfcc: MfccConfig,
}

impl FrontendConfig {
    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        MfccExtractor::new(self.frame, self.mfcc, clip.sample_rate())?.extract(clip)
    }
}

/// Word models keyed by label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    models: BTreeMap<String, HmmModel>,
}

impl Vocabulary {
    pub fn new(models: impl IntoIterator<Item = HmmModel>) -> Result<Self> {
        let mut vocab = Self::default();
        for m in models {
            vocab.insert(m)?;
        }
        Ok(vocab)
    }

    pub fn insert(&mut self, model: HmmModel) -> Result<()> {
        if let Some(existing) = self.models.values().next() {
            if existing.dim() != model.dim() {
                return Err(Error::Config(format!(
                    "model {:?} has dimension {}, vocabulary uses {}",
                    model.label(),
                    model.dim(),
                    existing.dim()
                )));
            }
        }
        if self.models.contains_key(model.label()) {
            return Err(Error::Config(format!("duplicate word model {:?}", model.label())));
        }
        self.models.insert(model.label().to_string(), model);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn models(&self) -> impl Iterator<Item = &HmmModel> {
        self.models.values()
    }

    pub fn get(&self, label: &str) -> Option<&HmmModel> {
        self.models.get(label)
    }

    /// Loads every `*.hmm` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == MODEL_EXTENSION))
            .collect();
        paths.sort();
        Self::new(paths.iter().map(HmmModel::load).collect::<Result<Vec<_>>>()?)
    }

    /// Writes `<label>.hmm` for every model into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (label, model) in &self.models {
            model.save(dir.join(format!("{label}.{MODEL_EXTENSION}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognitionOutcome {
    pub label: String,
    pub log_prob: f64,
    /// Every word with its score, best first; ties by label.
    pub ranked: Vec<(String, f64)>,
}

/// Scores `features` against every model in the vocabulary.
pub fn recognize_features(features: &FeatureMatrix, vocab: &Vocabulary) -> Result<RecognitionOutcome> {
    if vocab.is_empty() {
        return Err(Error::Config("vocabulary is empty".into()));
    }
    let mut ranked = vocab
        .models()
        .map(|m| Ok((m.label().to_string(), sequence_logprob(features, m)?)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let (label, log_prob) = ranked[0].clone();
    Ok(RecognitionOutcome {
        label,
        log_prob,
        ranked,
    })
}

pub fn recognize(
    clip: &AudioClip,
    vocab: &Vocabulary,
    frontend: &FrontendConfig,
) -> Result<RecognitionOutcome> {
    if vocab.is_empty() {
        return Err(Error::Config("vocabulary is empty".into()));
    }
    recognize_features(&frontend.extract(clip)?, vocab)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy_percent: f64,
    /// `confusion[truth][predicted]` counts.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

impl EvalReport {
    /// Builds a report from `(truth, predicted)` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut total = 0;
        let mut correct = 0;
        let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for (truth, predicted) in pairs {
            total += 1;
            if truth == predicted {
                correct += 1;
            }
            *confusion
                .entry(truth.to_string())
                .or_default()
                .entry(predicted.to_string())
                .or_default() += 1;
        }
        let accuracy_percent = if total == 0 {
            0.0
        } else {
            100.0 * correct as f64 / total as f64
        };
        Self {
            total,
            correct,
            accuracy_percent,
            confusion,
        }
    }

    /// Aligned per-word table followed by the overall line.
    pub fn render_table(&self) -> String {
        let predicted: Vec<&String> = {
            let mut all: Vec<&String> = self.confusion.values().flat_map(|m| m.keys()).collect();
            all.sort();
            all.dedup();
            all
        };
        let width = self
            .confusion
            .keys()
            .chain(predicted.iter().copied())
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("truth".len());
        let mut out = format!("{:<width$}", "truth");
        for p in &predicted {
            let _ = write!(out, "  {p:>width$}");
        }
        out.push('\n');
        for (truth, row) in &self.confusion {
            let _ = write!(out, "{truth:<width$}");
            for p in &predicted {
                let _ = write!(out, "  {:>width$}", row.get(*p).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "accuracy: {}/{} = {:.2}%",
            self.correct, self.total, self.accuracy_percent
        );
        out
    }

    /// `key: value` lines for `total`, `correct` and `accuracy_percent`.
    pub fn render_summary(&self) -> String {
        format!(
            "total: {}\ncorrect: {}\naccuracy_percent: {:.2}\n",
            self.total, self.correct, self.accuracy_percent
        )
    }
}

/// Recognizes every labeled clip in `testset` and tallies the results.
pub fn evaluate(testset: &[AudioClip], vocab: &Vocabulary, frontend: &FrontendConfig) -> Result<EvalReport> {
    if testset.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let mut pairs = Vec::with_capacity(testset.len());
    for (i, clip) in testset.iter().enumerate() {
        let truth = clip
            .label
            .clone()
            .ok_or_else(|| Error::Config(format!("test clip {i} has no label")))?;
        pairs.push((truth, recognize(clip, vocab, frontend)?.label));
    }
    Ok(EvalReport::from_pairs(
        pairs.iter().map(|(t, p)| (t.as_str(), p.as_str())),
    ))
}

/// One `label<TAB>wav-path` entry; relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub label: String,
    pub path: PathBuf,
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((label, path)) = line.split_once('\t') else {
            return Err(Error::parse(i + 1, "expected `label<TAB>path`"));
        };
        if label.is_empty() || path.is_empty() {
            return Err(Error::parse(i + 1, "empty label or path"));
        }
        let path = PathBuf::from(path);
        entries.push(ManifestEntry {
            label: label.to_string(),
            path: if path.is_absolute() { path } else { base.join(path) },
        });
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&std::fs::read_to_string(path)?, base)
}

pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{}\t{}\n", e.label, e.path.display()))
        .collect()
}

/// Loads each manifest clip with its label attached.
pub fn load_labeled_clips(entries: &[ManifestEntry]) -> Result<Vec<AudioClip>> {
    entries
        .iter()
        .map(|e| Ok(crate::audio::load_wav(&e.path)?.with_label(e.label.clone())))
        .collect()
}

/// Splitting of multi-word utterances on pauses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Analysis block length.
    pub block_ms: f64,
    /// Blocks with mean-square amplitude below this count as silence.
    pub energy_threshold: f64,
    /// Silence runs at least this long separate words.
    pub min_silence_ms: f64,
    /// Voiced regions shorter than this are discarded as clicks.
    pub min_segment_ms: f64,
    /// Silence kept around each segment.
    pub padding_ms: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            block_ms: 10.0,
            energy_threshold: 1e-4,
            min_silence_ms: 200.0,
            min_segment_ms: 30.0,
            padding_ms: 80.0,
        }
    }
}

/// Cuts `clip` at silence runs of at least `min_silence_ms`.
pub fn segment_on_silence(clip: &AudioClip, config: &SegmentConfig) -> Vec<AudioClip> {
    let rate = f64::from(clip.sample_rate());
    let block = ((config.block_ms * rate / 1000.0).round() as usize).max(1);
    let samples = clip.samples();
    let voiced: Vec<bool> = samples
        .chunks(block)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64 >= config.energy_threshold)
        .collect();
    let min_gap = (config.min_silence_ms / config.block_ms).ceil() as usize;
    let min_len = (config.min_segment_ms / config.block_ms).ceil() as usize;

    // voiced block ranges, merging across gaps shorter than min_gap
    let mut regions: Vec<(usize, usize)> = Vec::new();
    for (i, &v) in voiced.iter().enumerate() {
        if !v {
            continue;
        }
        match regions.last_mut() {
            Some((_, end)) if i - *end <= min_gap => *end = i + 1,
            _ => regions.push((i, i + 1)),
        }
    }

    let pad = (config.padding_ms * rate / 1000.0).round() as usize;
    regions
        .into_iter()
        .filter(|(s, e)| e - s >= min_len)
        .map(|(s, e)| {
            let start = (s * block).saturating_sub(pad);
            let end = (e * block + pad).min(samples.len());
            let mut c = AudioClip::new(samples[start..end].to_vec(), clip.sample_rate())
                .expect("sub-slice of a valid clip");
            c.label = None;
            c
        })
        .collect()
}

/// Recognizes each pause-separated word and joins the labels with spaces.
pub fn transcribe(
    clip: &AudioClip,
    vocab: &Vocabulary,
    frontend: &FrontendConfig,
    segmentation: &SegmentConfig,
) -> Result<String> {
    if vocab.is_empty() {
        return Err(Error::Config("vocabulary is empty".into()));
    }
    let segments = segment_on_silence(clip, segmentation);
    if segments.is_empty() {
        return Err(Error::InputTooShort("no speech found in audio".into()));
    }
    let words = segments
        .iter()
        .map(|s| recognize(s, vocab, frontend).map(|o| o.label))
        .collect::<Result<Vec<_>>>()?;
    Ok(words.join(" "))
}

/// Vocabulary plus front-end settings: everything needed to turn a spoken
/// query into text.
#[derive(Debug, Clone, Default)]
pub struct Transcriber {
    pub vocabulary: Vocabulary,
    pub frontend: FrontendConfig,
    pub segmentation: SegmentConfig,
}

impl Transcriber {
    pub fn new(vocabulary: Vocabulary) -> Self {
        Self {
            vocabulary,
            ..Self::default()
        }
    }

    pub fn transcribe(&self, clip: &AudioClip) -> Result<String> {
        transcribe(clip, &self.vocabulary, &self.frontend, &self.segmentation)
    }
}
