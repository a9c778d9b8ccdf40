//! Weight optimizers over n-best lists.

mod envelope;
mod mert;
mod pro;
mod tuning;
#[cfg(test)]
mod testutil;

pub use envelope::{upper_envelope, EnvelopeInterval};
pub use mert::{
    corpus_bleu_at, mert_envelope, mert_iterate, mert_line_search, LineSearchResult, MertConfig,
    MertOutcome,
};
pub use pro::{pro_sample_pairs, train_pairwise_classifier, ProConfig};
pub use tuning::{
    evaluate, run_tuning, CandidatePool, Decoder, Evaluation, IterationRecord, Optimizer,
    RerunResult, TuningConfig, TuningRun,
};

use crate::corpus::{NBestList, Segment};
use crate::error::{Error, Result};
use crate::metrics::{BleuStats, ReferenceCounts, TieRule};

/// An n-best list together with the BLEU statistics of each hypothesis.
#[derive(Clone, Debug)]
pub struct ScoredList {
    nbest: NBestList,
    stats: Vec<BleuStats>,
}

impl ScoredList {
    pub fn new(nbest: NBestList, stats: Vec<BleuStats>) -> Result<Self> {
        if stats.len() != nbest.len() {
            return Err(Error::Misaligned {
                expected: nbest.len(),
                found: stats.len(),
            });
        }
        Ok(ScoredList { nbest, stats })
    }

    /// Scores every hypothesis against the segment's references.
    pub fn score(nbest: NBestList, segment: &Segment, tie: TieRule) -> Result<Self> {
        if nbest.segment_id() != segment.id {
            return Err(Error::config(format!(
                "n-best list for segment {} paired with segment {}",
                nbest.segment_id(),
                segment.id
            )));
        }
        let refs = ReferenceCounts::new(&segment.references);
        let stats = nbest.hypotheses().iter().map(|h| refs.stats(&h.tokens, tie)).collect();
        Ok(ScoredList { nbest, stats })
    }

    pub fn nbest(&self) -> &NBestList {
        &self.nbest
    }

    pub fn stats(&self) -> &[BleuStats] {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Keeps only the hypotheses at `indices`, in that order.
    pub(crate) fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut distinct = indices.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != indices.len() || distinct.last().is_some_and(|&i| i >= self.len()) {
            return Err(Error::config("selection indices must be distinct and in range"));
        }
        let hyps = indices.iter().map(|&i| self.nbest.hypotheses()[i].clone()).collect();
        Ok(ScoredList {
            nbest: NBestList::from_unique(self.nbest.segment_id(), hyps),
            stats: indices.iter().map(|&i| self.stats[i]).collect(),
        })
    }

    /// Appends the new hypotheses of `other`; returns how many were added.
    pub fn merge(&mut self, other: &ScoredList) -> Result<usize> {
        if other.nbest.segment_id() != self.nbest.segment_id() {
            return Err(Error::config("merging n-best lists of different segments"));
        }
        self.nbest.feature_space().ensure_same(other.nbest.feature_space())?;
        let novel = self.nbest.novel_indices(&other.nbest);
        let added = novel.len();
        self.nbest
            .extend_unique(novel.iter().map(|&i| other.nbest.hypotheses()[i].clone()));
        self.stats.extend(novel.iter().map(|&i| other.stats[i]));
        Ok(added)
    }
}
