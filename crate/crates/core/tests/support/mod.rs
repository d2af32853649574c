//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls the code path it checks: the Viterbi oracle enumerates
//! every state path, the DFT is the O(n^2) definition, the TF-IDF scorer
//! rescans raw text, and the fusion oracle materializes every
//! (doc, list, score) triple.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vircis_core::cis::{Judgments, MergedEntry, RelevanceFilterConfig};
use vircis_core::hmm::{DiagonalGaussian, HmmModel};
use vircis_core::ir::{Document, RankedList, ScoredDoc, StopWords};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_distribution(rng: &mut ChaCha8Rng, len: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(zero_prob) {
                    0.0
                } else {
                    rng.random_range(0.05..1.0)
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.iter().map(|x| x / total).collect();
        }
    }
}

/// Random fully-general HMM: arbitrary entry, transition and exit mass,
/// some transitions forbidden, sharp or broad Gaussians.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> HmmModel {
    let entry = random_distribution(rng, n, 0.2);
    let mut trans = Vec::with_capacity(n);
    let mut exit = Vec::with_capacity(n);
    for _ in 0..n {
        let row = random_distribution(rng, n + 1, 0.25);
        exit.push(row[n].ln());
        trans.push(row[..n].iter().map(|p| p.ln()).collect());
    }
    let emissions = (0..n)
        .map(|_| {
            let mean = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let var = (0..dim)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        rng.random_range(0.001..0.05)
                    } else {
                        rng.random_range(0.2..3.0)
                    }
                })
                .collect();
            DiagonalGaussian::new(mean, var).unwrap()
        })
        .collect();
    HmmModel::new(
        "rand",
        entry.iter().map(|p| p.ln()).collect(),
        trans,
        exit,
        emissions,
    )
    .unwrap()
}

pub fn random_observations(rng: &mut ChaCha8Rng, t: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.5..2.5)).collect())
        .collect()
}

/// Exhaustive search over all `N^T` state paths (1-based states).
/// Returns the best joint log probability and every path attaining it.
pub fn brute_force_viterbi(model: &HmmModel, emissions: &[Vec<f64>]) -> (f64, Vec<Vec<usize>>) {
    let n = model.num_states();
    let t = emissions.len();
    let mut best = f64::NEG_INFINITY;
    let mut argbest: Vec<Vec<usize>> = Vec::new();
    let total = n.pow(t as u32);
    for code in 0..total {
        let mut path = Vec::with_capacity(t);
        let mut c = code;
        for _ in 0..t {
            path.push(c % n);
            c /= n;
        }
        path.reverse();
        let score = path_score(model, emissions, &path);
        let one_based: Vec<usize> = path.iter().map(|s| s + 1).collect();
        if score > best {
            best = score;
            argbest = vec![one_based];
        } else if score == best {
            argbest.push(one_based);
        }
    }
    (best, argbest)
}

/// Joint log probability of a 0-based path, entry and exit included.
pub fn path_score(model: &HmmModel, emissions: &[Vec<f64>], path: &[usize]) -> f64 {
    let mut score = model.entry_logprob()[path[0]] + emissions[0][path[0]];
    for w in 1..path.len() {
        score += model.trans_logprob()[path[w - 1]][path[w]] + emissions[w][path[w]];
    }
    score + model.exit_logprob()[*path.last().unwrap()]
}

/// Textbook O(n^2) DFT.
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, v) in x.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += v * angle.cos();
                im += v * angle.sin();
            }
            (re, im)
        })
        .collect()
}

fn naive_tokens(text: &str, stopwords: &StopWords) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            if !stopwords.contains(&cur) {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    out
}

/// Full-scan TF-IDF with no index: re-tokenizes every document per query term.
pub fn naive_search(docs: &[Document], stopwords: &StopWords, query: &str, top_k: usize) -> Vec<ScoredDoc> {
    let tokenized: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|d| {
            (
                d.doc_id.clone(),
                naive_tokens(&format!("{} {}", d.title, d.body), stopwords),
            )
        })
        .collect();
    let mut terms: Vec<String> = Vec::new();
    for t in naive_tokens(query, stopwords) {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    let n = docs.len() as f64;
    let mut out = Vec::new();
    for (id, tokens) in &tokenized {
        let mut score = 0.0;
        for term in &terms {
            let tf = tokens.iter().filter(|t| *t == term).count();
            if tf == 0 {
                continue;
            }
            let df = tokenized.iter().filter(|(_, ts)| ts.contains(term)).count();
            score += tf as f64 * (1.0 + n / df as f64).ln();
        }
        if score > 0.0 {
            out.push(ScoredDoc {
                doc_id: id.clone(),
                score,
            });
        }
    }
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.doc_id.cmp(&b.doc_id))
    });
    out.truncate(top_k);
    out
}

const WORDS: [&str; 30] = [
    "speech",
    "search",
    "viterbi",
    "data",
    "store",
    "query",
    "merge",
    "split",
    "rank",
    "mel",
    "cepstral",
    "hidden",
    "markov",
    "model",
    "judgment",
    "filter",
    "voice",
    "index",
    "term",
    "score",
    "collaborate",
    "session",
    "audio",
    "frame",
    "window",
    "state",
    "path",
    "trellis",
    "token",
    "the",
];

/// Random corpus of at most `max_docs` documents over the first `vocab` words.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, vocab: usize) -> Vec<Document> {
    let count = rng.random_range(1..=max_docs);
    (0..count)
        .map(|i| {
            let len = rng.random_range(1..12);
            let body: Vec<&str> = (0..len).map(|_| WORDS[rng.random_range(0..vocab)]).collect();
            let title = if rng.random_bool(0.3) {
                WORDS[rng.random_range(0..vocab)]
            } else {
                ""
            };
            Document::new(format!("doc{:02}", (i * 7) % 97), title, body.join(" "))
        })
        .collect()
}

pub fn random_query(rng: &mut ChaCha8Rng, vocab: usize) -> String {
    let len = rng.random_range(1..4);
    (0..len)
        .map(|_| WORDS[rng.random_range(0..vocab)].to_uppercase())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Random per-collaborator lists over a shared doc pool.
pub fn random_lists(rng: &mut ChaCha8Rng, max_lists: usize, max_docs: usize) -> Vec<(String, RankedList)> {
    let lists = rng.random_range(1..=max_lists);
    (0..lists)
        .map(|c| {
            let len = rng.random_range(0..=max_docs);
            let mut pool: Vec<usize> = (0..max_docs + 5).collect();
            let mut entries = Vec::new();
            for _ in 0..len {
                let pick = pool.remove(rng.random_range(0..pool.len()));
                // coarse scores so ties and constant lists occur
                let score = if rng.random_bool(0.3) {
                    rng.random_range(1..4) as f64
                } else {
                    rng.random_range(0.01..10.0)
                };
                entries.push(ScoredDoc {
                    doc_id: format!("d{pick:02}"),
                    score,
                });
            }
            entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id)));
            (
                format!("c{c}"),
                RankedList {
                    entries,
                    query_terms: vec![],
                },
            )
        })
        .collect()
}

pub fn random_judgments(rng: &mut ChaCha8Rng, lists: &[(String, RankedList)]) -> Judgments {
    let mut j = Judgments::new();
    for (c, l) in lists {
        for e in &l.entries {
            if rng.random_bool(0.15) {
                j.insert((c.clone(), e.doc_id.clone()), rng.random_bool(0.5));
            }
        }
    }
    j
}

/// CombMNZ by brute force: list every (doc, collaborator, normalized score)
/// triple, filter, then group.
pub fn brute_force_combmnz(
    lists: &[(String, RankedList)],
    judgments: &Judgments,
    filter: &RelevanceFilterConfig,
) -> Vec<MergedEntry> {
    let mut triples: Vec<(String, String, f64)> = Vec::new();
    for (c, l) in lists {
        let scores: Vec<f64> = l.entries.iter().map(|e| e.score).collect();
        let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for e in &l.entries {
            let norm = if hi == lo { 1.0 } else { (e.score - lo) / (hi - lo) };
            triples.push((e.doc_id.clone(), c.clone(), norm));
        }
    }
    triples.retain(|(d, c, _)| judgments.get(&(c.clone(), d.clone())) != Some(&false));
    let docs: BTreeSet<String> = triples.iter().map(|t| t.0.clone()).collect();
    let mut out = Vec::new();
    for d in docs {
        let mine: Vec<&(String, String, f64)> = triples.iter().filter(|t| t.0 == d).collect();
        let best = mine.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
        if best < filter.threshold {
            continue;
        }
        let count = mine.iter().map(|t| &t.1).collect::<BTreeSet<_>>().len();
        let mut sum = 0.0;
        for t in &mine {
            sum += t.2;
        }
        out.push(MergedEntry {
            doc_id: d,
            score: count as f64 * sum,
            contributors: count,
        });
    }
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.doc_id.cmp(&b.doc_id))
    });
    out
}

/// Doc -> number of lists containing it, counted directly.
pub fn recount_contributors(lists: &[(String, RankedList)]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for (_, l) in lists {
        for e in &l.entries {
            *m.entry(e.doc_id.clone()).or_insert(0) += 1;
        }
    }
    m
}
