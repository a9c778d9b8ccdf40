//! The outer tuning loop: decode with the current weights, accumulate the
//! n-best lists, re-optimize, and repeat; several seeded reruns per task.

use rayon::prelude::*;

use super::mert::{mert_iterate, MertConfig};
use super::pro::{pro_sample_pairs, train_pairwise_classifier, ProConfig};
use super::ScoredList;
use crate::corpus::{FeatureSpace, NBestList, Segment, WeightVector};
use crate::error::{Error, Result};
use crate::metrics::{sentence_bleu, BleuReport, BleuStats, SmoothingScheme, TieRule};
use crate::rng;

/// Produces scored n-best lists for a fixed set of segments.
pub trait Decoder: Sync {
    fn segments(&self) -> &[Segment];

    fn feature_space(&self) -> &FeatureSpace;

    /// One list per segment, aligned with [`Decoder::segments`], best first.
    fn decode(&self, weights: &WeightVector, nbest_size: usize) -> Result<Vec<ScoredList>>;

    /// Corpus statistics of the 1-best output.
    fn top1_stats(&self, weights: &WeightVector) -> Result<Vec<BleuStats>> {
        Ok(self
            .decode(weights, 1)?
            .iter()
            .map(|l| l.stats()[0])
            .collect())
    }
}

/// A decoder over fixed candidate pools: "decoding" re-scores each pool with
/// the current weights and emits the top entries.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    segments: Vec<Segment>,
    pools: Vec<ScoredList>,
    space: FeatureSpace,
}

impl CandidatePool {
    /// `pools[i]` must hold the candidates of `segments[i]`.
    pub fn new(segments: Vec<Segment>, pools: Vec<NBestList>, tie: TieRule) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyInput("segment list"));
        }
        if pools.len() != segments.len() {
            return Err(Error::Misaligned {
                expected: segments.len(),
                found: pools.len(),
            });
        }
        let space = pools[0].feature_space().clone();
        let pools = pools
            .into_iter()
            .zip(&segments)
            .map(|(p, s)| {
                space.ensure_same(p.feature_space())?;
                ScoredList::score(p, s, tie)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidatePool {
            segments,
            pools,
            space,
        })
    }

    /// Pools for segments without their own list are rejected; lists are matched by segment id.
    pub fn from_lists(segments: Vec<Segment>, lists: Vec<NBestList>, tie: TieRule) -> Result<Self> {
        let mut by_id: Vec<Option<NBestList>> = vec![None; segments.len()];
        for l in lists {
            let pos = segments
                .iter()
                .position(|s| s.id == l.segment_id())
                .ok_or_else(|| Error::config(format!("n-best list for unknown segment {}", l.segment_id())))?;
            by_id[pos] = Some(l);
        }
        let pools = by_id
            .into_iter()
            .zip(&segments)
            .map(|(l, s)| l.ok_or_else(|| Error::config(format!("no n-best list for segment {}", s.id))))
            .collect::<Result<Vec<_>>>()?;
        CandidatePool::new(segments, pools, tie)
    }

    pub fn pools(&self) -> &[ScoredList] {
        &self.pools
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Restriction to the segments at `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<CandidatePool> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("subset"));
        }
        Ok(CandidatePool {
            segments: indices.iter().map(|&i| self.segments[i].clone()).collect(),
            pools: indices.iter().map(|&i| self.pools[i].clone()).collect(),
            space: self.space.clone(),
        })
    }

    /// Per-segment 1-best statistics, the shared input of every test-side evaluation.
    pub fn top1_per_segment(&self, weights: &WeightVector) -> Result<Vec<BleuStats>> {
        self.space.ensure_same(weights.space())?;
        self.pools
            .iter()
            .map(|p| {
                let i = p.nbest().top_k(weights, 1)?[0];
                Ok(p.stats()[i])
            })
            .collect()
    }
}

impl Decoder for CandidatePool {
    fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn feature_space(&self) -> &FeatureSpace {
        &self.space
    }

    fn decode(&self, weights: &WeightVector, nbest_size: usize) -> Result<Vec<ScoredList>> {
        self.space.ensure_same(weights.space())?;
        self.pools
            .iter()
            .map(|p| p.select(&p.nbest().top_k(weights, nbest_size.max(1))?))
            .collect()
    }

    fn top1_stats(&self, weights: &WeightVector) -> Result<Vec<BleuStats>> {
        self.top1_per_segment(weights)
    }
}

/// Corpus-level quality and length diagnostics of a system's 1-best output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub bleu: f64,
    pub brevity_penalty: f64,
    /// Hypothesis words per effective reference word.
    pub length_ratio: f64,
    /// Hypothesis words per source word.
    pub hypothesis_verbosity: f64,
    pub stats: BleuStats,
    pub source_tokens: u64,
}

impl Evaluation {
    pub fn from_stats(stats: BleuStats, source_tokens: u64) -> Self {
        let report = BleuReport::from_stats(&stats);
        Evaluation {
            bleu: report.bleu,
            brevity_penalty: report.brevity_penalty,
            length_ratio: report.length_ratio,
            hypothesis_verbosity: stats.hyp_len as f64 / source_tokens.max(1) as f64,
            stats,
            source_tokens,
        }
    }
}

pub fn evaluate(decoder: &dyn Decoder, weights: &WeightVector) -> Result<Evaluation> {
    let stats: BleuStats = decoder.top1_stats(weights)?.iter().sum();
    let src: u64 = decoder.segments().iter().map(|s| s.source.len() as u64).sum();
    Ok(Evaluation::from_stats(stats, src))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Mert(MertConfig),
    Pro(ProConfig),
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Mert(_) => "mert",
            Optimizer::Pro(_) => "pro",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuningConfig {
    pub max_iterations: usize,
    pub nbest_size: usize,
    pub reruns: usize,
    pub seed: u64,
    /// Stop once the weights move less than this in max-norm.
    pub tolerance: f64,
    /// Sentence-level metric for PRO's pair scores.
    pub sentence_scheme: SmoothingScheme,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            max_iterations: 25,
            nbest_size: 1000,
            reruns: 3,
            seed: 0,
            tolerance: 1e-6,
            sentence_scheme: SmoothingScheme::PlusOne,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub weights: WeightVector,
    pub tuning: Evaluation,
    pub accumulated_hypotheses: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RerunResult {
    pub rerun: usize,
    pub weights: WeightVector,
    pub trace: Vec<IterationRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuningRun {
    pub optimizer: &'static str,
    pub reruns: Vec<RerunResult>,
}

impl TuningRun {
    /// Evaluates every rerun's final weights on `test`.
    pub fn evaluate_on(&self, test: &dyn Decoder) -> Result<Vec<Evaluation>> {
        self.reruns.iter().map(|r| evaluate(test, &r.weights)).collect()
    }

    pub fn final_tuning(&self) -> Vec<Evaluation> {
        self.reruns
            .iter()
            .filter_map(|r| r.trace.last().map(|t| t.tuning))
            .collect()
    }
}

fn pro_step(
    lists: &[ScoredList],
    weights: &WeightVector,
    config: &ProConfig,
    scheme: SmoothingScheme,
) -> Result<WeightVector> {
    let mut rng = rng::stream(config.seed, &[]);
    let mut differences = Vec::new();
    for list in lists {
        let scores: Vec<f64> = list
            .stats()
            .iter()
            .map(|s| 100.0 * sentence_bleu(s, scheme))
            .collect();
        let hyps = list.nbest().hypotheses();
        for (better, worse) in pro_sample_pairs(&scores, config, &mut rng) {
            differences.push(
                hyps[better]
                    .features
                    .values()
                    .iter()
                    .zip(hyps[worse].features.values())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<f64>>(),
            );
        }
    }
    match train_pairwise_classifier(weights.space(), &differences, config)? {
        None => Ok(weights.clone()),
        Some(fitted) => {
            let fitted = fitted.l1_normalized();
            let psi = config.interpolation;
            weights.scaled(1.0 - psi).add_scaled(&fitted, psi)
        }
    }
}

fn tune_once(
    decoder: &dyn Decoder,
    initial: &WeightVector,
    optimizer: &Optimizer,
    config: &TuningConfig,
    rerun: usize,
) -> Result<RerunResult> {
    let source_tokens: u64 = decoder.segments().iter().map(|s| s.source.len() as u64).sum();
    let mut weights = initial.l1_normalized();
    let mut accumulated: Option<Vec<ScoredList>> = None;
    let mut trace = Vec::new();
    for iteration in 0..config.max_iterations {
        let decoded = decoder.decode(&weights, config.nbest_size)?;
        let lists = match accumulated.as_mut() {
            None => accumulated.insert(decoded),
            Some(acc) => {
                for (a, d) in acc.iter_mut().zip(&decoded) {
                    a.merge(d)?;
                }
                acc
            }
        };
        let seed = rng::derive_seed(config.seed, &[rerun as u64, iteration as u64]);
        let next = match optimizer {
            Optimizer::Mert(c) => {
                let c = MertConfig { seed, ..c.clone() };
                mert_iterate(lists, &weights, &c)?.weights
            }
            Optimizer::Pro(c) => {
                let c = ProConfig { seed, ..c.clone() };
                pro_step(lists, &weights, &c, config.sentence_scheme)?
            }
        };
        let moved = next.max_abs_diff(&weights)?;
        weights = next;
        let stats: BleuStats = decoder.top1_stats(&weights)?.iter().sum();
        trace.push(IterationRecord {
            iteration,
            weights: weights.clone(),
            tuning: Evaluation::from_stats(stats, source_tokens),
            accumulated_hypotheses: lists.iter().map(ScoredList::len).sum(),
        });
        if moved < config.tolerance {
            break;
        }
    }
    Ok(RerunResult {
        rerun,
        weights,
        trace,
    })
}

/// Runs `config.reruns` independent tunings. Rerun `k` draws all randomness
/// from `(config.seed, k)`, so results are identical however reruns are scheduled.
pub fn run_tuning(
    decoder: &dyn Decoder,
    initial: &WeightVector,
    optimizer: &Optimizer,
    config: &TuningConfig,
) -> Result<TuningRun> {
    decoder.feature_space().ensure_same(initial.space())?;
    match optimizer {
        Optimizer::Mert(c) => c.validate()?,
        Optimizer::Pro(c) => c.validate()?,
    }
    if config.reruns == 0 || config.max_iterations == 0 {
        return Err(Error::config("reruns and max_iterations must be positive"));
    }
    let reruns = (0..config.reruns)
        .into_par_iter()
        .map(|k| tune_once(decoder, initial, optimizer, config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(TuningRun {
        optimizer: optimizer.name(),
        reruns,
    })
}
