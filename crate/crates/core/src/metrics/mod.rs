//! BLEU at corpus level (NIST v13a semantics: clipped 1–4-gram precisions,
//! closest-reference effective length, case-sensitive token comparison) and
//! the sentence-level add-one variants used as PRO objectives.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use crate::error::Error;

pub const MAX_ORDER: usize = 4;

/// Additive sufficient statistics for every BLEU variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct BleuStats {
    /// Clipped n-gram matches, index 0 = unigrams.
    pub matches: [u64; MAX_ORDER],
    /// Hypothesis n-gram counts.
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    /// Effective reference length.
    pub ref_len: u64,
}

impl BleuStats {
    /// `self - other`; panics if any component would go negative.
    pub fn minus(&self, other: &BleuStats) -> BleuStats {
        let mut out = *self;
        for n in 0..MAX_ORDER {
            out.matches[n] -= other.matches[n];
            out.totals[n] -= other.totals[n];
        }
        out.hyp_len -= other.hyp_len;
        out.ref_len -= other.ref_len;
        out
    }

    /// Replaces the contribution `old` by `new`, adding first so unsigned fields never underflow.
    pub fn replace(&mut self, old: &BleuStats, new: &BleuStats) {
        *self += *new;
        *self = self.minus(old);
    }

    pub fn length_ratio(&self) -> f64 {
        if self.ref_len == 0 {
            0.0
        } else {
            self.hyp_len as f64 / self.ref_len as f64
        }
    }
}

impl Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, rhs: BleuStats) -> BleuStats {
        self += rhs;
        self
    }
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += rhs.matches[n];
            self.totals[n] += rhs.totals[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

impl Sum for BleuStats {
    fn sum<I: Iterator<Item = BleuStats>>(iter: I) -> BleuStats {
        iter.fold(BleuStats::default(), Add::add)
    }
}

impl<'a> Sum<&'a BleuStats> for BleuStats {
    fn sum<I: Iterator<Item = &'a BleuStats>>(iter: I) -> BleuStats {
        iter.copied().sum()
    }
}

/// How to pick between two references equally close to the hypothesis length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieRule {
    #[default]
    Shorter,
    Longer,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "shorter" => Ok(TieRule::Shorter),
            "longer" => Ok(TieRule::Longer),
            other => Err(Error::config(format!("unknown tie rule `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SmoothingScheme {
    /// Unsmoothed; the corpus-level metric.
    None,
    /// BLEU+1: add-one on 2..4-gram precisions.
    #[default]
    PlusOne,
    /// BLEU+1 with the brevity penalty softened by one reference token.
    PlusOneBp,
    /// As `PlusOneBp`, with add-one on the unigram precision too.
    PlusOneBpGrounded,
}

impl SmoothingScheme {
    pub fn name(self) -> &'static str {
        match self {
            SmoothingScheme::None => "none",
            SmoothingScheme::PlusOne => "plus1",
            SmoothingScheme::PlusOneBp => "plus1-bp",
            SmoothingScheme::PlusOneBpGrounded => "plus1-bp-grounded",
        }
    }
}

impl fmt::Display for SmoothingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmoothingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "none" => Ok(SmoothingScheme::None),
            "plus1" => Ok(SmoothingScheme::PlusOne),
            "plus1-bp" => Ok(SmoothingScheme::PlusOneBp),
            "plus1-bp-grounded" => Ok(SmoothingScheme::PlusOneBpGrounded),
            other => Err(Error::config(format!("unknown smoothing scheme `{other}`"))),
        }
    }
}

pub fn ngram_counts<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sum over distinct hypothesis n-grams of `min(hyp count, max reference count)`.
pub fn clipped_matches<T: Hash + Eq, R: AsRef<[T]>>(hyp: &[T], references: &[R], n: usize) -> u64 {
    let ref_counts: Vec<_> = references.iter().map(|r| ngram_counts(r.as_ref(), n)).collect();
    ngram_counts(hyp, n)
        .into_iter()
        .map(|(gram, count)| {
            let max_ref = ref_counts
                .iter()
                .map(|rc| rc.get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            count.min(max_ref)
        })
        .sum()
}

/// Reference length closest to `hyp_len`.
///
/// Panics if `ref_lengths` is empty.
pub fn effective_ref_length(hyp_len: usize, ref_lengths: &[usize], tie: TieRule) -> usize {
    assert!(!ref_lengths.is_empty(), "effective_ref_length needs at least one reference");
    let mut best = ref_lengths[0];
    for &r in &ref_lengths[1..] {
        let d = r.abs_diff(hyp_len);
        let best_d = best.abs_diff(hyp_len);
        let better = d < best_d
            || (d == best_d
                && match tie {
                    TieRule::Shorter => r < best,
                    TieRule::Longer => r > best,
                });
        if better {
            best = r;
        }
    }
    best
}

/// `1` if `c >= r`, else `exp(1 - r/c)`; an empty hypothesis gets 0.
pub fn brevity_penalty(c: u64, r: u64) -> f64 {
    if c == 0 {
        0.0
    } else if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

/// Per-segment reference n-gram maxima, reusable across many hypotheses.
pub struct ReferenceCounts<'a, T> {
    max_counts: [HashMap<&'a [T], u64>; MAX_ORDER],
    lengths: Vec<usize>,
}

impl<'a, T: Hash + Eq> ReferenceCounts<'a, T> {
    pub fn new<R: AsRef<[T]>>(references: &'a [R]) -> Self {
        let max_counts = std::array::from_fn(|i| {
            let mut merged: HashMap<&'a [T], u64> = HashMap::new();
            for r in references {
                for (gram, c) in ngram_counts(r.as_ref(), i + 1) {
                    let e = merged.entry(gram).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            merged
        });
        ReferenceCounts {
            max_counts,
            lengths: references.iter().map(|r| r.as_ref().len()).collect(),
        }
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn stats(&self, hyp: &[T], tie: TieRule) -> BleuStats {
        let mut stats = BleuStats {
            hyp_len: hyp.len() as u64,
            ref_len: effective_ref_length(hyp.len(), &self.lengths, tie) as u64,
            ..BleuStats::default()
        };
        for n in 1..=MAX_ORDER {
            stats.totals[n - 1] = (hyp.len() + 1).saturating_sub(n) as u64;
            stats.matches[n - 1] = ngram_counts(hyp, n)
                .into_iter()
                .map(|(gram, c)| c.min(self.max_counts[n - 1].get(gram).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }
}

pub fn segment_stats<T: Hash + Eq, R: AsRef<[T]>>(hyp: &[T], references: &[R], tie: TieRule) -> BleuStats {
    ReferenceCounts::new(references).stats(hyp, tie)
}

/// Corpus BLEU in [0, 1]; zero if any n-gram order has no matches.
pub fn corpus_bleu(stats: &BleuStats) -> f64 {
    BleuReport::from_stats(stats).bleu
}

/// Everything the `score` command prints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BleuReport {
    pub bleu: f64,
    pub brevity_penalty: f64,
    pub length_ratio: f64,
    pub precisions: [f64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuReport {
    pub fn from_stats(stats: &BleuStats) -> Self {
        let precisions = std::array::from_fn(|n| {
            if stats.totals[n] == 0 {
                0.0
            } else {
                stats.matches[n] as f64 / stats.totals[n] as f64
            }
        });
        let bp = brevity_penalty(stats.hyp_len, stats.ref_len);
        let degenerate = (0..MAX_ORDER).any(|n| stats.matches[n] == 0 || stats.totals[n] == 0);
        let bleu = if degenerate {
            0.0
        } else {
            let log_sum: f64 = (0..MAX_ORDER)
                .map(|n| (stats.matches[n] as f64).ln() - (stats.totals[n] as f64).ln())
                .sum();
            bp * (log_sum / MAX_ORDER as f64).exp()
        };
        BleuReport {
            bleu,
            brevity_penalty: bp,
            length_ratio: stats.length_ratio(),
            precisions,
            hyp_len: stats.hyp_len,
            ref_len: stats.ref_len,
        }
    }
}

/// Sentence-level BLEU in [0, 1] under `scheme`.
///
/// `SmoothingScheme::None` yields the unsmoothed score of the single segment.
pub fn sentence_bleu(stats: &BleuStats, scheme: SmoothingScheme) -> f64 {
    if stats.hyp_len == 0 {
        return 0.0;
    }
    if scheme == SmoothingScheme::None {
        return corpus_bleu(stats);
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_ORDER {
        let add = if n > 0 || scheme == SmoothingScheme::PlusOneBpGrounded {
            1.0
        } else {
            0.0
        };
        let num = stats.matches[n] as f64 + add;
        let den = stats.totals[n] as f64 + add;
        if num == 0.0 || den == 0.0 {
            return 0.0;
        }
        log_sum += num.ln() - den.ln();
    }
    let (c, mut r) = (stats.hyp_len, stats.ref_len);
    if matches!(scheme, SmoothingScheme::PlusOneBp | SmoothingScheme::PlusOneBpGrounded) && c < r {
        r = (r - 1).max(c);
    }
    brevity_penalty(c, r) * (log_sum / MAX_ORDER as f64).exp()
}

/// Convenience wrapper over token sequences.
pub fn sentence_bleu_tokens<T: Hash + Eq, R: AsRef<[T]>>(
    hyp: &[T],
    references: &[R],
    scheme: SmoothingScheme,
) -> f64 {
    sentence_bleu(&segment_stats(hyp, references, TieRule::Shorter), scheme)
}
