//! Segments, references, n-best lists and the log-linear reranker.

mod features;
pub mod io;

use std::collections::HashSet;

pub use features::{FeatureSpace, FeatureVector, WeightVector};
pub(crate) use features::dot_values;
pub use io::{
    parse_nbest, parse_references, parse_weights, read_dataset, write_dataset, write_nbest,
    write_weights, Dataset,
};

use crate::error::{Error, Result};

/// A source sentence with one or more reference translations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub id: usize,
    pub source: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl Segment {
    pub fn new(id: usize, source: Vec<String>, references: Vec<Vec<String>>) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::EmptyInput("source sentence"));
        }
        if references.is_empty() {
            return Err(Error::EmptyInput("reference set"));
        }
        if references.iter().any(Vec::is_empty) {
            return Err(Error::EmptyInput("reference sentence"));
        }
        Ok(Segment {
            id,
            source,
            references,
        })
    }

    pub fn source_len(&self) -> usize {
        self.source.len()
    }

    pub fn reference_lengths(&self) -> Vec<usize> {
        self.references.iter().map(Vec::len).collect()
    }
}

/// Checks that every segment carries the same number of references.
pub fn check_reference_counts(segments: &[Segment]) -> Result<usize> {
    let first = segments
        .first()
        .ok_or(Error::EmptyInput("segment list"))?
        .references
        .len();
    for s in segments {
        if s.references.len() != first {
            return Err(Error::config(format!(
                "segment {} has {} references, expected {first}",
                s.id,
                s.references.len()
            )));
        }
    }
    Ok(first)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub segment_id: usize,
    pub tokens: Vec<String>,
    pub features: FeatureVector,
}

impl Hypothesis {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Identity used for de-duplication: tokens plus the exact bit patterns of the features.
    pub(crate) fn dedup_key(&self) -> (&[String], Vec<u64>) {
        (
            &self.tokens,
            self.features.values().iter().map(|v| v.to_bits()).collect(),
        )
    }
}

/// Candidate translations of one segment, in extraction order.
#[derive(Clone, Debug, PartialEq)]
pub struct NBestList {
    segment_id: usize,
    hypotheses: Vec<Hypothesis>,
}

impl NBestList {
    /// Validates the list and drops duplicate hypotheses, keeping first occurrences.
    pub fn new(segment_id: usize, hypotheses: Vec<Hypothesis>) -> Result<Self> {
        let first = hypotheses
            .first()
            .ok_or(Error::EmptyInput("n-best list"))?;
        let space = first.features.space().clone();
        for h in &hypotheses {
            if h.segment_id != segment_id {
                return Err(Error::config(format!(
                    "hypothesis for segment {} in list for segment {segment_id}",
                    h.segment_id
                )));
            }
            space.ensure_same(h.features.space())?;
        }
        let mut list = NBestList {
            segment_id,
            hypotheses: Vec::with_capacity(hypotheses.len()),
        };
        let keep: Vec<bool> = {
            let mut seen = HashSet::new();
            hypotheses.iter().map(|h| seen.insert(h.dedup_key())).collect()
        };
        list.hypotheses
            .extend(hypotheses.into_iter().zip(keep).filter_map(|(h, k)| k.then_some(h)));
        Ok(list)
    }

    /// Builds a list from hypotheses already known to be valid and distinct.
    pub(crate) fn from_unique(segment_id: usize, hypotheses: Vec<Hypothesis>) -> Self {
        NBestList { segment_id, hypotheses }
    }

    pub(crate) fn extend_unique(&mut self, hypotheses: impl IntoIterator<Item = Hypothesis>) {
        self.hypotheses.extend(hypotheses);
    }

    /// Indices of the hypotheses of `other` that are not in this list (first occurrences).
    pub(crate) fn novel_indices(&self, other: &NBestList) -> Vec<usize> {
        let mut seen: HashSet<_> = self.hypotheses.iter().map(Hypothesis::dedup_key).collect();
        other
            .hypotheses
            .iter()
            .enumerate()
            .filter(|(_, h)| seen.insert(h.dedup_key()))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn segment_id(&self) -> usize {
        self.segment_id
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        self.hypotheses[0].features.space()
    }

    /// Appends the hypotheses of `other` that are not already present.
    /// Returns the number of hypotheses added.
    pub fn merge(&mut self, other: &NBestList) -> Result<usize> {
        if other.segment_id != self.segment_id {
            return Err(Error::config(format!(
                "cannot merge list for segment {} into segment {}",
                other.segment_id, self.segment_id
            )));
        }
        self.feature_space().ensure_same(other.feature_space())?;
        let novel = self.novel_indices(other);
        self.extend_unique(novel.iter().map(|&i| other.hypotheses[i].clone()));
        Ok(novel.len())
    }

    /// Model scores `w · f` for every hypothesis.
    pub fn scores(&self, weights: &WeightVector) -> Result<Vec<f64>> {
        self.feature_space().ensure_same(weights.space())?;
        Ok(self
            .hypotheses
            .iter()
            .map(|h| dot_values(weights.values(), h.features.values()))
            .collect())
    }

    /// Indices of the `k` best hypotheses under `weights`, best first; ties keep input order.
    pub fn top_k(&self, weights: &WeightVector, k: usize) -> Result<Vec<usize>> {
        let scores = self.scores(weights)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        order.truncate(k);
        Ok(order)
    }
}

/// Index of the highest-scoring hypothesis; ties go to the lowest index.
pub fn rerank_index(nbest: &NBestList, weights: &WeightVector) -> Result<usize> {
    let scores = nbest.scores(weights)?;
    Ok(argmax_first(&scores))
}

/// The highest-scoring hypothesis under the log-linear model.
pub fn rerank<'a>(nbest: &'a NBestList, weights: &WeightVector) -> Result<&'a Hypothesis> {
    rerank_index(nbest, weights).map(|i| &nbest.hypotheses[i])
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}
