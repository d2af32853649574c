//! Python bindings: audio, MFCC features, word models, recognition,
//! indexing and collaborative sessions.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use vircis_core::audio;
use vircis_core::cis;
use vircis_core::hmm;
use vircis_core::ir;
use vircis_core::mfcc::FeatureMatrix;
use vircis_core::recognizer::{self, FrontendConfig};
use vircis_core::synth;
use vircis_core::train::{self, TrainConfig};

fn py_err(e: vircis_core::Error) -> PyErr {
    match e {
        vircis_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn features(rows: Vec<Vec<f64>>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(rows).map_err(py_err)
}

type Scored = Vec<(String, f64)>;

fn scored(list: &ir::RankedList) -> Scored {
    list.entries.iter().map(|e| (e.doc_id.clone(), e.score)).collect()
}

fn merged_tuples(merged: &cis::MergedResult) -> Vec<(String, f64, usize)> {
    merged
        .entries
        .iter()
        .map(|e| (e.doc_id.clone(), e.score, e.contributors))
        .collect()
}

/// Mono audio with samples in [-1, 1].
#[pyclass(name = "AudioClip", from_py_object)]
#[derive(Clone)]
struct PyAudioClip {
    inner: audio::AudioClip,
}

#[pymethods]
impl PyAudioClip {
    #[new]
    #[pyo3(signature = (samples, sample_rate, label=None))]
    fn new(samples: Vec<f64>, sample_rate: u32, label: Option<String>) -> PyResult<Self> {
        let mut inner = audio::AudioClip::new(samples, sample_rate).map_err(py_err)?;
        inner.label = label;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, label=None))]
    fn load(path: &str, label: Option<String>) -> PyResult<Self> {
        let mut inner = audio::load_wav(path).map_err(py_err)?;
        inner.label = label;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        audio::save_wav(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.inner.sample_rate()
    }

    #[getter]
    fn label(&self) -> Option<String> {
        self.inner.label.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "AudioClip(samples={}, sample_rate={}, label={:?})",
            self.inner.len(),
            self.inner.sample_rate(),
            self.inner.label
        )
    }
}

/// 39-dimensional MFCC rows (13 cepstra, deltas, delta-deltas).
#[pyfunction]
fn extract_mfcc(clip: &PyAudioClip) -> PyResult<Vec<Vec<f64>>> {
    Ok(FrontendConfig::default()
        .extract(&clip.inner)
        .map_err(py_err)?
        .rows()
        .to_vec())
}

/// Word model: diagonal-Gaussian HMM.
#[pyclass(name = "HmmModel", from_py_object)]
#[derive(Clone)]
struct PyHmmModel {
    inner: hmm::HmmModel,
}

#[pymethods]
impl PyHmmModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        hmm::HmmModel::load(path)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        hmm::HmmModel::from_text(text)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Best state path (1-based states) and its joint log probability.
    fn viterbi(&self, observations: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
        let (res, _) = hmm::viterbi(&features(observations)?, &self.inner).map_err(py_err)?;
        Ok((res.state_path, res.log_prob))
    }

    fn sequence_logprob(&self, observations: Vec<Vec<f64>>) -> PyResult<f64> {
        hmm::sequence_logprob(&features(observations)?, &self.inner).map_err(py_err)
    }
}

/// Segmental k-means training of a left-to-right word model.
#[pyfunction]
#[pyo3(signature = (label, sequences, num_states=5, iterations=10, seed=42))]
fn train_model(
    label: &str,
    sequences: Vec<Vec<Vec<f64>>>,
    num_states: usize,
    iterations: usize,
    seed: u64,
) -> PyResult<PyHmmModel> {
    let seqs = sequences
        .into_iter()
        .map(features)
        .collect::<PyResult<Vec<_>>>()?;
    let config = TrainConfig {
        num_states,
        iterations,
        seed,
    };
    train::train_model(label, &seqs, &config)
        .map(|inner| PyHmmModel { inner })
        .map_err(py_err)
}

/// A set of word models keyed by label.
#[pyclass(name = "Vocabulary")]
struct PyVocabulary {
    transcriber: recognizer::Transcriber,
}

#[pymethods]
impl PyVocabulary {
    #[new]
    fn new(models: Vec<PyHmmModel>) -> PyResult<Self> {
        let vocab = recognizer::Vocabulary::new(models.into_iter().map(|m| m.inner)).map_err(py_err)?;
        Ok(Self {
            transcriber: recognizer::Transcriber::new(vocab),
        })
    }

    #[staticmethod]
    fn load_dir(dir: &str) -> PyResult<Self> {
        let vocab = recognizer::Vocabulary::load_dir(dir).map_err(py_err)?;
        Ok(Self {
            transcriber: recognizer::Transcriber::new(vocab),
        })
    }

    fn save_dir(&self, dir: &str) -> PyResult<()> {
        self.transcriber.vocabulary.save_dir(dir).map_err(py_err)
    }

    fn labels(&self) -> Vec<String> {
        self.transcriber.vocabulary.labels().map(str::to_string).collect()
    }

    fn __len__(&self) -> usize {
        self.transcriber.vocabulary.len()
    }

    /// `(label, log_prob, [(label, log_prob), ...])` for a one-word clip.
    fn recognize(&self, clip: &PyAudioClip) -> PyResult<(String, f64, Scored)> {
        let out = recognizer::recognize(
            &clip.inner,
            &self.transcriber.vocabulary,
            &self.transcriber.frontend,
        )
        .map_err(py_err)?;
        Ok((out.label, out.log_prob, out.ranked))
    }

    /// Space-joined labels of the pause-separated words in `clip`.
    fn transcribe(&self, clip: &PyAudioClip) -> PyResult<String> {
        self.transcriber.transcribe(&clip.inner).map_err(py_err)
    }

    /// `(correct, total, accuracy_percent)` over labeled clips.
    fn evaluate(&self, clips: Vec<PyAudioClip>) -> PyResult<(usize, usize, f64)> {
        let clips: Vec<audio::AudioClip> = clips.into_iter().map(|c| c.inner).collect();
        let report = recognizer::evaluate(&clips, &self.transcriber.vocabulary, &self.transcriber.frontend)
            .map_err(py_err)?;
        Ok((report.correct, report.total, report.accuracy_percent))
    }
}

/// Seeded generator of synthetic tone words.
#[pyclass(name = "Synthesizer")]
struct PySynthesizer {
    words: Vec<synth::ToneWord>,
    inner: synth::Synthesizer,
}

#[pymethods]
impl PySynthesizer {
    /// `vocabulary` uses the `label freq_hz...` line format.
    #[new]
    #[pyo3(signature = (vocabulary, seed=42))]
    fn new(vocabulary: &str, seed: u64) -> PyResult<Self> {
        Ok(Self {
            words: synth::parse_vocabulary(vocabulary).map_err(py_err)?,
            inner: synth::Synthesizer::new(synth::SynthConfig::default(), seed),
        })
    }

    fn labels(&self) -> Vec<String> {
        self.words.iter().map(|w| w.label.clone()).collect()
    }

    fn render(&mut self, label: &str) -> PyResult<PyAudioClip> {
        let word = self
            .words
            .iter()
            .find(|w| w.label == label)
            .ok_or_else(|| PyValueError::new_err(format!("unknown word {label:?}")))?;
        self.inner
            .render(word)
            .map(|inner| PyAudioClip { inner })
            .map_err(py_err)
    }

    /// `count` labeled clips of every word.
    fn render_set(&mut self, count: usize) -> PyResult<Vec<PyAudioClip>> {
        Ok(self
            .inner
            .render_set(&self.words, count)
            .map_err(py_err)?
            .into_iter()
            .map(|inner| PyAudioClip { inner })
            .collect())
    }
}

/// TF-IDF inverted index.
#[pyclass(name = "InvertedIndex")]
struct PyInvertedIndex {
    inner: ir::InvertedIndex,
}

#[pymethods]
impl PyInvertedIndex {
    /// Builds from `(doc_id, title, body)` triples with the default stop list.
    #[staticmethod]
    fn from_documents(docs: Vec<(String, String, String)>) -> PyResult<Self> {
        let docs: Vec<ir::Document> = docs
            .into_iter()
            .map(|(id, title, body)| ir::Document::new(id, title, body))
            .collect();
        ir::index_documents(&docs, &ir::default_stopwords())
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// Corpus directory or `doc_id<TAB>title<TAB>body-path` manifest.
    #[staticmethod]
    fn from_corpus(path: &str) -> PyResult<Self> {
        let docs = ir::load_corpus(path).map_err(py_err)?;
        ir::index_documents(&docs, &ir::default_stopwords())
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ir::InvertedIndex::load(path)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn doc_count(&self) -> usize {
        self.inner.doc_count()
    }

    #[pyo3(signature = (query, top_k=10))]
    fn search(&self, query: &str, top_k: usize) -> Scored {
        scored(&self.inner.search(query, top_k))
    }
}

/// Collaborative search session.
#[pyclass(name = "Session")]
struct PySession {
    inner: cis::Session,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (session_id, threshold=0.0, boost=2.0, top_k=cis::DEFAULT_TOP_K))]
    fn new(session_id: &str, threshold: f64, boost: f64, top_k: usize) -> PyResult<Self> {
        let filter = cis::RelevanceFilterConfig { threshold, boost };
        cis::Session::with_config(session_id, filter, top_k)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// True when the collaborator was not yet a member.
    fn join(&mut self, collaborator: &str) -> PyResult<bool> {
        self.inner.join(collaborator).map_err(py_err)
    }

    #[getter]
    fn collaborators(&self) -> Vec<String> {
        self.inner.collaborators().iter().cloned().collect()
    }

    /// Runs the query and returns the collaborator's own ranked list.
    fn submit_query(&mut self, collaborator: &str, query: &str, index: &PyInvertedIndex) -> PyResult<Scored> {
        self.inner
            .submit_query(collaborator, query, &index.inner)
            .map(|l| scored(&l))
            .map_err(py_err)
    }

    fn judge(
        &mut self,
        collaborator: &str,
        doc_id: &str,
        relevant: bool,
    ) -> PyResult<Vec<(String, f64, usize)>> {
        self.inner
            .judge(collaborator, doc_id, relevant)
            .map(merged_tuples)
            .map_err(py_err)
    }

    /// `[(doc_id, score, contributors), ...]` best first.
    fn merged(&self) -> Vec<(String, f64, usize)> {
        merged_tuples(self.inner.merged())
    }

    fn split(&self) -> PyResult<BTreeMap<String, Vec<String>>> {
        self.inner.split().map(|s| s.assignment).map_err(py_err)
    }

    fn suggest_queries(&self, collaborator: &str) -> PyResult<Vec<String>> {
        self.inner.suggest_queries(collaborator).map_err(py_err)
    }
}

/// CombMNZ over `{collaborator: [(doc_id, score), ...]}` with no judgments.
#[pyfunction]
#[pyo3(signature = (lists, threshold=0.0))]
fn merge_results(lists: BTreeMap<String, Scored>, threshold: f64) -> PyResult<Vec<(String, f64, usize)>> {
    let lists: Vec<(String, ir::RankedList)> = lists
        .into_iter()
        .map(|(c, entries)| {
            let mut entries: Vec<ir::ScoredDoc> = entries
                .into_iter()
                .map(|(doc_id, score)| ir::ScoredDoc { doc_id, score })
                .collect();
            entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id)));
            (
                c,
                ir::RankedList {
                    entries,
                    query_terms: Vec::new(),
                },
            )
        })
        .collect();
    let filter = cis::RelevanceFilterConfig {
        threshold,
        ..Default::default()
    };
    cis::merge_results(&lists, &cis::Judgments::new(), &filter)
        .map(|m| merged_tuples(&m))
        .map_err(py_err)
}

#[pymodule]
fn vircis(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAudioClip>()?;
    m.add_class::<PyHmmModel>()?;
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PySynthesizer>()?;
    m.add_class::<PyInvertedIndex>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(extract_mfcc, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(merge_results, m)?)?;
    Ok(())
}
