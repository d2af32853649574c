//! Segmental k-means (Viterbi) training of left-to-right word models.

use crate::hmm::{viterbi, DiagonalGaussian, HmmModel, VARIANCE_FLOOR};
use crate::mfcc::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainConfig {
    pub num_states: usize,
    pub iterations: usize,
    /// Recorded for reproducibility. Uniform initialization and Viterbi
    /// re-estimation are deterministic, so training draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_states: 5,
            iterations: 10,
            seed: 42,
        }
    }
}

/// A trained model together with the total Viterbi log-likelihood of the
/// training set before refinement and after each iteration.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: HmmModel,
    pub log_likelihoods: Vec<f64>,
}

/// Trains one word model from labeled feature sequences.
pub fn train_model(label: &str, sequences: &[FeatureMatrix], config: &TrainConfig) -> Result<HmmModel> {
    Ok(train_with_trace(label, sequences, config)?.model)
}

pub fn train_with_trace(
    label: &str,
    sequences: &[FeatureMatrix],
    config: &TrainConfig,
) -> Result<TrainingRun> {
    let n = config.num_states;
    if n == 0 {
        return Err(Error::TrainingData("num_states must be positive".into()));
    }
    let Some(first) = sequences.first() else {
        return Err(Error::TrainingData(format!(
            "no training sequences for {label:?}"
        )));
    };
    let dim = first.dim();
    for (i, seq) in sequences.iter().enumerate() {
        if seq.dim() != dim {
            return Err(Error::TrainingData(format!(
                "sequence {i} has dimension {}, expected {dim}",
                seq.dim()
            )));
        }
        if seq.num_frames() < n {
            return Err(Error::TrainingData(format!(
                "sequence {i} has {} frames, fewer than {n} states",
                seq.num_frames()
            )));
        }
    }

    let mut alignments: Vec<Vec<usize>> = sequences
        .iter()
        .map(|s| uniform_segmentation(s.num_frames(), n))
        .collect();
    let mut model = estimate(label, sequences, &alignments, n)?;
    let mut log_likelihoods = Vec::with_capacity(config.iterations + 1);

    for _ in 0..config.iterations {
        let mut total = 0.0;
        for (seq, alignment) in sequences.iter().zip(alignments.iter_mut()) {
            let (result, _) = viterbi(seq, &model)?;
            total += result.log_prob;
            *alignment = result.state_path.iter().map(|s| s - 1).collect();
        }
        log_likelihoods.push(total);
        model = estimate(label, sequences, &alignments, n)?;
    }
    log_likelihoods.push(total_log_likelihood(&model, sequences)?);

    Ok(TrainingRun {
        model,
        log_likelihoods,
    })
}

/// Sum of Viterbi log-likelihoods of `sequences` under `model`.
pub fn total_log_likelihood(model: &HmmModel, sequences: &[FeatureMatrix]) -> Result<f64> {
    sequences
        .iter()
        .map(|s| crate::hmm::sequence_logprob(s, model))
        .sum()
}

/// Frame `t` of `len` goes to state `floor(t * n / len)` (0-based).
pub fn uniform_segmentation(len: usize, n: usize) -> Vec<usize> {
    (0..len).map(|t| t * n / len).collect()
}

fn estimate(
    label: &str,
    sequences: &[FeatureMatrix],
    alignments: &[Vec<usize>],
    n: usize,
) -> Result<HmmModel> {
    let dim = sequences[0].dim();
    let mut counts = vec![0usize; n];
    let mut sums = vec![vec![0.0; dim]; n];
    // self-loop and advance (or exit, for the last state) counts
    let mut stay = vec![0usize; n];
    let mut leave = vec![0usize; n];

    for (seq, alignment) in sequences.iter().zip(alignments) {
        for (t, &s) in alignment.iter().enumerate() {
            counts[s] += 1;
            for (acc, x) in sums[s].iter_mut().zip(seq.row(t)) {
                *acc += x;
            }
            match alignment.get(t + 1) {
                Some(&next) if next == s => stay[s] += 1,
                Some(_) | None => leave[s] += 1,
            }
        }
    }

    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(sum, &c)| sum.iter().map(|x| x / c as f64).collect())
        .collect();
    let mut sq = vec![vec![0.0; dim]; n];
    for (seq, alignment) in sequences.iter().zip(alignments) {
        for (t, &s) in alignment.iter().enumerate() {
            for ((acc, x), m) in sq[s].iter_mut().zip(seq.row(t)).zip(&means[s]) {
                let d = x - m;
                *acc += d * d;
            }
        }
    }

    let mut emissions = Vec::with_capacity(n);
    for s in 0..n {
        if counts[s] == 0 {
            return Err(Error::TrainingData(format!("state {} received no frames", s + 1)));
        }
        let variance = sq[s]
            .iter()
            .map(|v| (v / counts[s] as f64).max(VARIANCE_FLOOR))
            .collect();
        emissions.push(DiagonalGaussian::new(means[s].clone(), variance)?);
    }

    let ninf = f64::NEG_INFINITY;
    let mut entry = vec![ninf; n];
    entry[0] = 0.0;
    let mut trans = vec![vec![ninf; n]; n];
    let mut exit = vec![ninf; n];
    for s in 0..n {
        let total = (stay[s] + leave[s] + 2) as f64;
        let p_stay = (stay[s] + 1) as f64 / total;
        let p_leave = (leave[s] + 1) as f64 / total;
        trans[s][s] = p_stay.ln();
        if s + 1 < n {
            trans[s][s + 1] = p_leave.ln();
        } else {
            exit[s] = p_leave.ln();
        }
    }

    HmmModel::new(label, entry, trans, exit, emissions)
}
