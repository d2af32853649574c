//! Collaborative search sessions: per-collaborator histories, relevance
//! judgments, and the fused "combination of judgment" across collaborators.
//!
//! Fusion is CombMNZ over min-max normalized scores. Before fusing, the
//! relevance filter drops every (doc, collaborator) pair that collaborator
//! judged irrelevant and every doc whose best normalized score falls below
//! the threshold. Re-ranking then boosts docs judged relevant by anyone and
//! removes docs judged irrelevant by someone and relevant by no one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ir::{InvertedIndex, RankedList};
use crate::{Error, Result};

pub type CollaboratorId = String;

/// `(collaborator, doc_id) -> relevant?`
pub type Judgments = BTreeMap<(CollaboratorId, String), bool>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceFilterConfig {
    /// Docs whose best normalized score is strictly below this are dropped.
    pub threshold: f64,
    /// Multiplier for docs judged relevant.
    pub boost: f64,
}

impl Default for RelevanceFilterConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            boost: 2.0,
        }
    }
}

impl RelevanceFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "relevance threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if !(self.boost.is_finite() && self.boost > 0.0) {
            return Err(Error::Config(format!("boost {} must be positive", self.boost)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedEntry {
    pub doc_id: String,
    pub score: f64,
    pub contributors: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MergedResult {
    pub entries: Vec<MergedEntry>,
    pub provenance: BTreeMap<String, BTreeSet<CollaboratorId>>,
}

impl MergedResult {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn top(&self) -> Option<&MergedEntry> {
        self.entries.first()
    }

    fn sort(&mut self) {
        self.entries
            .sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    }
}

/// Min-max normalization to `[0, 1]`; a constant or single-entry list maps to 1.0.
pub fn normalize_scores(list: &RankedList) -> Vec<f64> {
    let (min, max) = list
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.score), hi.max(e.score))
        });
    list.entries
        .iter()
        .map(|e| {
            if max > min {
                (e.score - min) / (max - min)
            } else {
                1.0
            }
        })
        .collect()
}

/// Fuses per-collaborator lists into one ranking.
pub fn merge_results(
    lists: &[(CollaboratorId, RankedList)],
    judgments: &Judgments,
    filter: &RelevanceFilterConfig,
) -> Result<MergedResult> {
    filter.validate()?;
    let mut seen = BTreeSet::new();
    for (c, _) in lists {
        if !seen.insert(c.as_str()) {
            return Err(Error::Config(format!("collaborator {c:?} supplied two lists")));
        }
    }

    // doc -> contributions in list order
    let mut contributions: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (collaborator, list) in lists {
        for (entry, norm) in list.entries.iter().zip(normalize_scores(list)) {
            let key = (collaborator.clone(), entry.doc_id.clone());
            if judgments.get(&key) == Some(&false) {
                continue;
            }
            contributions
                .entry(entry.doc_id.as_str())
                .or_default()
                .push((collaborator.as_str(), norm));
        }
    }

    let mut merged = MergedResult::default();
    for (doc_id, parts) in contributions {
        let best = parts.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
        if best < filter.threshold {
            continue;
        }
        let providers: BTreeSet<CollaboratorId> = parts.iter().map(|(c, _)| c.to_string()).collect();
        let sum: f64 = parts.iter().map(|(_, s)| s).sum();
        merged.entries.push(MergedEntry {
            doc_id: doc_id.to_string(),
            score: providers.len() as f64 * sum,
            contributors: providers.len(),
        });
        merged.provenance.insert(doc_id.to_string(), providers);
    }
    merged.sort();
    Ok(merged)
}

/// Applies human judgments to a fused ranking.
pub fn rerank_with_judgments(
    merged: &MergedResult,
    judgments: &Judgments,
    filter: &RelevanceFilterConfig,
) -> MergedResult {
    let mut relevant = BTreeSet::new();
    let mut irrelevant = BTreeSet::new();
    for ((_, doc), &rel) in judgments {
        if rel {
            relevant.insert(doc.as_str());
        } else {
            irrelevant.insert(doc.as_str());
        }
    }
    let mut out = MergedResult::default();
    for e in &merged.entries {
        let doc = e.doc_id.as_str();
        if relevant.contains(doc) {
            out.entries.push(MergedEntry {
                score: e.score * filter.boost,
                ..e.clone()
            });
        } else if irrelevant.contains(doc) {
            continue;
        } else {
            out.entries.push(e.clone());
        }
        if let Some(p) = merged.provenance.get(doc) {
            out.provenance.insert(doc.to_string(), p.clone());
        }
    }
    out.sort();
    out
}

/// Division of the merged ranking among collaborators.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<CollaboratorId, Vec<String>>,
}

/// Deals merged docs round-robin, in rank order, to collaborators sorted by id.
pub fn split_results(merged: &MergedResult, collaborators: &[CollaboratorId]) -> Result<SplitAssignment> {
    let sorted: Vec<&CollaboratorId> = collaborators
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if sorted.is_empty() {
        return Err(Error::Config(
            "cannot split results among zero collaborators".into(),
        ));
    }
    let mut assignment: BTreeMap<CollaboratorId, Vec<String>> =
        sorted.iter().map(|c| ((*c).clone(), Vec::new())).collect();
    for (rank, entry) in merged.entries.iter().enumerate() {
        let who = sorted[rank % sorted.len()];
        assignment
            .get_mut(who)
            .expect("every collaborator has a slot")
            .push(entry.doc_id.clone());
    }
    Ok(SplitAssignment { assignment })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub query: String,
    pub results: RankedList,
    /// Session-wide event sequence number, used for recency.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    session_id: String,
    collaborators: BTreeSet<CollaboratorId>,
    history: BTreeMap<CollaboratorId, Vec<HistoryEntry>>,
    judgments: Judgments,
    merged: MergedResult,
    filter: RelevanceFilterConfig,
    top_k: usize,
    next_seq: u64,
}

/// Result list length used by [`Session::submit_query`] unless overridden.
pub const DEFAULT_TOP_K: usize = 20;

impl Session {
    pub fn new(session_id: impl Into<String>) -> Result<Self> {
        Self::with_config(session_id, RelevanceFilterConfig::default(), DEFAULT_TOP_K)
    }

    pub fn with_config(
        session_id: impl Into<String>,
        filter: RelevanceFilterConfig,
        top_k: usize,
    ) -> Result<Self> {
        let session_id = session_id.into();
        if session_id.trim().is_empty() {
            return Err(Error::Config("session id must be non-empty".into()));
        }
        filter.validate()?;
        Ok(Self {
            session_id,
            collaborators: BTreeSet::new(),
            history: BTreeMap::new(),
            judgments: Judgments::new(),
            merged: MergedResult::default(),
            filter,
            top_k,
            next_seq: 0,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn collaborators(&self) -> &BTreeSet<CollaboratorId> {
        &self.collaborators
    }

    pub fn history(&self) -> &BTreeMap<CollaboratorId, Vec<HistoryEntry>> {
        &self.history
    }

    pub fn judgments(&self) -> &Judgments {
        &self.judgments
    }

    pub fn merged(&self) -> &MergedResult {
        &self.merged
    }

    pub fn filter(&self) -> &RelevanceFilterConfig {
        &self.filter
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }

    /// Adds a collaborator; returns `false` if already a member.
    pub fn join(&mut self, collaborator: impl Into<CollaboratorId>) -> Result<bool> {
        let collaborator = collaborator.into();
        if collaborator.trim().is_empty() || collaborator.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!(
                "collaborator id {collaborator:?} must be non-empty without whitespace"
            )));
        }
        Ok(self.collaborators.insert(collaborator))
    }

    pub fn is_member(&self, collaborator: &str) -> bool {
        self.collaborators.contains(collaborator)
    }

    fn require_member(&self, collaborator: &str) -> Result<()> {
        if self.is_member(collaborator) {
            Ok(())
        } else {
            Err(Error::Membership {
                session: self.session_id.clone(),
                collaborator: collaborator.to_string(),
            })
        }
    }

    /// Searches `index`, records the result in the collaborator's history and
    /// refreshes the merged ranking. Returns the collaborator's own list.
    pub fn submit_query(
        &mut self,
        collaborator: &str,
        query: &str,
        index: &InvertedIndex,
    ) -> Result<RankedList> {
        self.require_member(collaborator)?;
        let results = index.search(query, self.top_k);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.history
            .entry(collaborator.to_string())
            .or_default()
            .push(HistoryEntry {
                query: query.to_string(),
                results: results.clone(),
                seq,
            });
        self.recompute()?;
        Ok(results)
    }

    /// Records a relevance judgment on a doc some collaborator has retrieved.
    pub fn judge(&mut self, collaborator: &str, doc_id: &str, relevant: bool) -> Result<&MergedResult> {
        self.require_member(collaborator)?;
        let retrieved = self
            .history
            .values()
            .flatten()
            .any(|h| h.results.contains(doc_id));
        if !retrieved {
            return Err(Error::Judgment(format!(
                "doc {doc_id:?} was never retrieved in session {:?}",
                self.session_id
            )));
        }
        self.judgments
            .insert((collaborator.to_string(), doc_id.to_string()), relevant);
        self.recompute()?;
        Ok(&self.merged)
    }

    /// Each collaborator's most recent result list.
    pub fn current_lists(&self) -> Vec<(CollaboratorId, RankedList)> {
        self.history
            .iter()
            .filter_map(|(c, h)| h.last().map(|e| (c.clone(), e.results.clone())))
            .collect()
    }

    fn recompute(&mut self) -> Result<()> {
        let fused = merge_results(&self.current_lists(), &self.judgments, &self.filter)?;
        self.merged = rerank_with_judgments(&fused, &self.judgments, &self.filter);
        Ok(())
    }

    pub fn split(&self) -> Result<SplitAssignment> {
        let members: Vec<CollaboratorId> = self.collaborators.iter().cloned().collect();
        split_results(&self.merged, &members)
    }

    /// Teammates' past queries, most recent first, deduplicated, minus any
    /// query the requester already issued verbatim.
    pub fn suggest_queries(&self, collaborator: &str) -> Result<Vec<String>> {
        self.require_member(collaborator)?;
        let own: BTreeSet<&str> = self
            .history
            .get(collaborator)
            .into_iter()
            .flatten()
            .map(|h| h.query.as_str())
            .collect();
        let mut others: Vec<&HistoryEntry> = self
            .history
            .iter()
            .filter(|(c, _)| c.as_str() != collaborator)
            .flat_map(|(_, h)| h)
            .collect();
        others.sort_by_key(|h| std::cmp::Reverse(h.seq));
        let mut seen = BTreeSet::new();
        Ok(others
            .into_iter()
            .map(|h| h.query.as_str())
            .filter(|q| !own.contains(q) && seen.insert(*q))
            .map(str::to_string)
            .collect())
    }
}
