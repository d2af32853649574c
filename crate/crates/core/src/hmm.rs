//! Per-word hidden Markov models with diagonal-Gaussian emissions, and
//! Viterbi decoding over them.
//!
//! Emitting states are numbered `1..=N` in every public result. State `0` is
//! the virtual start state and `N + 1` the virtual final state `q_F`; neither
//! emits. All arithmetic is in natural-log space.

use std::fmt::Write as _;
use std::path::Path;

use crate::mfcc::FeatureMatrix;
use crate::{Error, Result};

/// Smallest variance any emission density may carry.
pub const VARIANCE_FLOOR: f64 = 1e-3;

/// Tolerance for the row-stochastic checks on transition probabilities.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Diagonal-covariance Gaussian density.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    mean: Vec<f64>,
    variance: Vec<f64>,
    log_norm: f64,
}

impl DiagonalGaussian {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variance.len() {
            return Err(Error::Model(format!(
                "mean has {} dimensions, variance {}",
                mean.len(),
                variance.len()
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Model("non-finite mean".into()));
        }
        if let Some(v) = variance
            .iter()
            .find(|v| v.is_nan() || **v < VARIANCE_FLOOR || !v.is_finite())
        {
            return Err(Error::Model(format!("variance {v} below floor {VARIANCE_FLOOR}")));
        }
        let log_norm = -0.5 * variance.iter().map(|v| LN_2PI + v.ln()).sum::<f64>();
        Ok(Self {
            mean,
            variance,
            log_norm,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `-1/2 * sum_d [ln(2 pi var_d) + (o_d - mu_d)^2 / var_d]`; `o` must match `dim()`.
    pub fn log_density(&self, o: &[f64]) -> f64 {
        let quad: f64 = o
            .iter()
            .zip(&self.mean)
            .zip(&self.variance)
            .map(|((x, m), v)| {
                let d = x - m;
                d * d / v
            })
            .sum();
        self.log_norm - 0.5 * quad
    }
}

/// One word's acoustic model.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    label: String,
    entry_logprob: Vec<f64>,
    trans_logprob: Vec<Vec<f64>>,
    exit_logprob: Vec<f64>,
    emissions: Vec<DiagonalGaussian>,
}

fn logsumexp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl HmmModel {
    pub fn new(
        label: impl Into<String>,
        entry_logprob: Vec<f64>,
        trans_logprob: Vec<Vec<f64>>,
        exit_logprob: Vec<f64>,
        emissions: Vec<DiagonalGaussian>,
    ) -> Result<Self> {
        let label = label.into();
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(Error::Model(format!(
                "label {label:?} must be non-empty without whitespace"
            )));
        }
        let n = emissions.len();
        if n == 0 {
            return Err(Error::Model("model needs at least one state".into()));
        }
        if entry_logprob.len() != n
            || exit_logprob.len() != n
            || trans_logprob.len() != n
            || trans_logprob.iter().any(|row| row.len() != n)
        {
            return Err(Error::Model(format!("transition shapes do not match {n} states")));
        }
        let dim = emissions[0].dim();
        if emissions.iter().any(|e| e.dim() != dim) {
            return Err(Error::Model("emission dimensions differ".into()));
        }
        let all_logs = entry_logprob
            .iter()
            .chain(&exit_logprob)
            .chain(trans_logprob.iter().flatten());
        for &lp in all_logs {
            if lp.is_nan() || lp > STOCHASTIC_TOLERANCE {
                return Err(Error::Model(format!("invalid log probability {lp}")));
            }
        }
        let entry_mass = logsumexp(entry_logprob.iter().copied()).exp();
        if (entry_mass - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::Model(format!("entry probabilities sum to {entry_mass}")));
        }
        for (s, row) in trans_logprob.iter().enumerate() {
            let mass = logsumexp(row.iter().copied().chain([exit_logprob[s]])).exp();
            if (mass - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::Model(format!(
                    "outgoing probabilities of state {} sum to {mass}",
                    s + 1
                )));
            }
        }
        Ok(Self {
            label,
            entry_logprob,
            trans_logprob,
            exit_logprob,
            emissions,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn num_states(&self) -> usize {
        self.emissions.len()
    }

    pub fn dim(&self) -> usize {
        self.emissions[0].dim()
    }

    /// `ln a_{0,s}`, indexed from 0 for state 1.
    pub fn entry_logprob(&self) -> &[f64] {
        &self.entry_logprob
    }

    /// `ln a_{s',s}`, row-major, 0-based.
    pub fn trans_logprob(&self) -> &[Vec<f64>] {
        &self.trans_logprob
    }

    /// `ln a_{s,q_F}`, 0-based.
    pub fn exit_logprob(&self) -> &[f64] {
        &self.exit_logprob
    }

    pub fn emissions(&self) -> &[DiagonalGaussian] {
        &self.emissions
    }

    /// Emission log-likelihoods `ln b_s(o_t)` as a `T x N` matrix.
    pub fn emission_matrix(&self, observations: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_dim(observations.dim())?;
        Ok(observations
            .rows()
            .iter()
            .map(|o| self.emissions.iter().map(|e| e.log_density(o)).collect())
            .collect())
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::Model(format!(
                "observation dimension {dim} does not match model dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Text serialization with 17 significant digits per value.
    pub fn to_text(&self) -> String {
        fn row(out: &mut String, values: &[f64]) {
            let mut first = true;
            for v in values {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
        let mut out = format!("hmm {} {} {}\n", self.label, self.num_states(), self.dim());
        row(&mut out, &self.entry_logprob);
        for r in &self.trans_logprob {
            row(&mut out, r);
        }
        row(&mut out, &self.exit_logprob);
        for e in &self.emissions {
            row(&mut out, &e.mean);
            row(&mut out, &e.variance);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty model file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let ["hmm", label, n, d] = fields.as_slice() else {
            return Err(Error::parse(1, "expected `hmm <label> N D` header"));
        };
        let n: usize = n.parse().map_err(|_| Error::parse(1, "bad state count"))?;
        let d: usize = d.parse().map_err(|_| Error::parse(1, "bad dimension"))?;

        let mut next_row = |width: usize| -> Result<Vec<f64>> {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "unexpected end of model file"))?;
            let values = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(lineno, e.to_string()))?;
            if values.len() != width {
                return Err(Error::parse(
                    lineno,
                    format!("expected {width} values, found {}", values.len()),
                ));
            }
            Ok(values)
        };

        let entry = next_row(n)?;
        let trans = (0..n).map(|_| next_row(n)).collect::<Result<Vec<_>>>()?;
        let exit = next_row(n)?;
        let mut emissions = Vec::with_capacity(n);
        for _ in 0..n {
            let mean = next_row(d)?;
            let var = next_row(d)?;
            emissions.push(DiagonalGaussian::new(mean, var)?);
        }
        Self::new(*label, entry, trans, exit, emissions)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `ln b_s(o)` for the 1-based emitting state `state`.
pub fn emission_logprob(model: &HmmModel, state: usize, observation: &[f64]) -> Result<f64> {
    if state == 0 || state > model.num_states() {
        return Err(Error::Model(format!(
            "state {state} outside 1..={}",
            model.num_states()
        )));
    }
    model.check_dim(observation.len())?;
    Ok(model.emissions[state - 1].log_density(observation))
}

/// The Viterbi path-probability and backpointer matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    /// `(N + 2) x T` log scores. Row 0 is the start state and row `N + 1`
    /// the final state; both are `-inf` except `scores[N + 1][T - 1]`, which
    /// holds the termination score.
    pub scores: Vec<Vec<f64>>,
    /// `N x T` best predecessors; `backpointers[s - 1][t]` is a state in
    /// `0..=N`, and `0` throughout column 0.
    pub backpointers: Vec<Vec<usize>>,
    /// Predecessor of `q_F` at the last column.
    pub final_backpointer: usize,
    pub final_score: f64,
    pub num_frames: usize,
}

impl Trellis {
    pub fn score(&self, state: usize, t: usize) -> f64 {
        self.scores[state][t]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiResult {
    /// One 1-based emitting state per frame.
    pub state_path: Vec<usize>,
    /// Joint log probability of the path and observations, entry and exit included.
    pub log_prob: f64,
}

/// Index (0-based) and value of the maximum; ties go to the lowest index.
#[inline]
fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn check_emissions(model: &HmmModel, emissions: &[Vec<f64>]) -> Result<()> {
    if emissions.is_empty() {
        return Err(Error::EmptyObservation);
    }
    if let Some(row) = emissions.iter().find(|r| r.len() != model.num_states()) {
        return Err(Error::Model(format!(
            "emission row has {} entries for {} states",
            row.len(),
            model.num_states()
        )));
    }
    Ok(())
}

/// Decodes from a precomputed `T x N` emission log-likelihood matrix.
pub fn viterbi_with_emissions(model: &HmmModel, emissions: &[Vec<f64>]) -> Result<(ViterbiResult, Trellis)> {
    check_emissions(model, emissions)?;
    let n = model.num_states();
    let t_len = emissions.len();

    let mut scores = vec![vec![f64::NEG_INFINITY; t_len]; n + 2];
    let mut backpointers = vec![vec![0usize; t_len]; n];

    // initialization
    for s in 0..n {
        scores[s + 1][0] = model.entry_logprob[s] + emissions[0][s];
    }
    // recursion
    for t in 1..t_len {
        for s in 0..n {
            let (best_prev, best) = argmax((0..n).map(|p| scores[p + 1][t - 1] + model.trans_logprob[p][s]));
            scores[s + 1][t] = best + emissions[t][s];
            backpointers[s][t] = best_prev + 1;
        }
    }
    // termination
    let (last, final_score) = argmax((0..n).map(|s| scores[s + 1][t_len - 1] + model.exit_logprob[s]));
    scores[n + 1][t_len - 1] = final_score;

    let mut state_path = vec![0usize; t_len];
    state_path[t_len - 1] = last + 1;
    for t in (1..t_len).rev() {
        state_path[t - 1] = backpointers[state_path[t] - 1][t];
    }

    Ok((
        ViterbiResult {
            state_path,
            log_prob: final_score,
        },
        Trellis {
            scores,
            backpointers,
            final_backpointer: last + 1,
            final_score,
            num_frames: t_len,
        },
    ))
}

/// Most likely state path through `model` for `observations`.
pub fn viterbi(observations: &FeatureMatrix, model: &HmmModel) -> Result<(ViterbiResult, Trellis)> {
    viterbi_with_emissions(model, &model.emission_matrix(observations)?)
}

/// Viterbi score from a precomputed emission matrix, without backpointers.
pub fn best_path_logprob(model: &HmmModel, emissions: &[Vec<f64>]) -> Result<f64> {
    check_emissions(model, emissions)?;
    let n = model.num_states();
    let mut prev: Vec<f64> = (0..n).map(|s| model.entry_logprob[s] + emissions[0][s]).collect();
    let mut cur = vec![f64::NEG_INFINITY; n];
    for row in &emissions[1..] {
        for s in 0..n {
            let (_, best) = argmax((0..n).map(|p| prev[p] + model.trans_logprob[p][s]));
            cur[s] = best + row[s];
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(argmax((0..n).map(|s| prev[s] + model.exit_logprob[s])).1)
}

/// Viterbi log-likelihood of `observations`, equal to `viterbi(..).log_prob`.
pub fn sequence_logprob(observations: &FeatureMatrix, model: &HmmModel) -> Result<f64> {
    best_path_logprob(model, &model.emission_matrix(observations)?)
}
