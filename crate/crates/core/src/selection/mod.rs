//! Length-based tuning-set selection and dataset/output diagnostics.

pub mod stats;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;

pub use stats::{
    kendall_tau, kl_divergence, least_squares, mean, pearson, spearman, std_dev, Distribution, Regression,
};

use crate::corpus::Segment;
use crate::error::{Error, Result};
use crate::metrics::{brevity_penalty, effective_ref_length, TieRule};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LengthCondition {
    Shortest,
    /// The centered contiguous block of the ascending length order.
    Middle,
    Longest,
    /// Keep the longest fraction; the cutoff sweep walks this from 1.0 down to 0.5.
    CutoffLongest,
    /// Uniform sample without replacement.
    Random { seed: u64 },
}

impl LengthCondition {
    pub fn name(&self) -> &'static str {
        match self {
            LengthCondition::Shortest => "shortest",
            LengthCondition::Middle => "middle",
            LengthCondition::Longest => "longest",
            LengthCondition::CutoffLongest => "cutoff",
            LengthCondition::Random { .. } => "random",
        }
    }
}

impl fmt::Display for LengthCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LengthCondition {
    type Err = Error;

    /// `random` parses with seed 0; set the seed afterwards.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shortest" | "short" | "low" => Ok(LengthCondition::Shortest),
            "middle" | "mid" => Ok(LengthCondition::Middle),
            "longest" | "long" | "top" => Ok(LengthCondition::Longest),
            "cutoff" => Ok(LengthCondition::CutoffLongest),
            "random" | "rand" => Ok(LengthCondition::Random { seed: 0 }),
            other => Err(Error::config(format!("unknown selection condition `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionSpec {
    pub condition: LengthCondition,
    pub fraction: f64,
}

impl SelectionSpec {
    pub fn new(condition: LengthCondition, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!("fraction {fraction} outside (0, 1]")));
        }
        Ok(SelectionSpec { condition, fraction })
    }

    /// `round(n · fraction)`, at least 1.
    pub fn subset_size(&self, n: usize) -> usize {
        ((n as f64 * self.fraction).round() as usize).clamp(1, n.max(1))
    }
}

/// Indices (ascending, i.e. in document order) of the segments selected by `spec`,
/// keyed on source token count with ties broken by original position.
pub fn select_by_length(segments: &[Segment], spec: &SelectionSpec) -> Result<Vec<usize>> {
    let lengths: Vec<usize> = segments.iter().map(Segment::source_len).collect();
    select_by_lengths(&lengths, spec)
}

/// As [`select_by_length`], over bare source lengths.
pub fn select_by_lengths(lengths: &[usize], spec: &SelectionSpec) -> Result<Vec<usize>> {
    let n = lengths.len();
    if n == 0 {
        return Err(Error::EmptyInput("segment list"));
    }
    SelectionSpec::new(spec.condition, spec.fraction)?;
    let k = spec.subset_size(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (lengths[i], i));
    let mut chosen: Vec<usize> = match spec.condition {
        LengthCondition::Shortest => order[..k].to_vec(),
        LengthCondition::Longest | LengthCondition::CutoffLongest => order[n - k..].to_vec(),
        LengthCondition::Middle => {
            let start = (n - k) / 2;
            order[start..start + k].to_vec()
        }
        LengthCondition::Random { seed } => {
            let mut rng = rng::stream(seed, &[n as u64, k as u64]);
            index::sample(&mut rng, n, k).into_vec()
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// How dataset verbosity treats multiple references.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VerbosityConvention {
    /// Mean reference length per segment.
    #[default]
    MeanReference,
    FirstReference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub n_segments: usize,
    pub n_references: usize,
    pub n_source_tokens: usize,
    pub mean_source_length: f64,
    /// Reference words per source word.
    pub verbosity: f64,
    pub source_lengths: Vec<usize>,
}

pub fn dataset_stats(segments: &[Segment]) -> Result<DatasetStats> {
    dataset_stats_with(segments, VerbosityConvention::MeanReference)
}

pub fn dataset_stats_with(segments: &[Segment], convention: VerbosityConvention) -> Result<DatasetStats> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("segment list"));
    }
    let source_lengths: Vec<usize> = segments.iter().map(Segment::source_len).collect();
    let n_source_tokens: usize = source_lengths.iter().sum();
    let ref_words: f64 = segments
        .iter()
        .map(|s| match convention {
            VerbosityConvention::MeanReference => {
                s.references.iter().map(|r| r.len() as f64).sum::<f64>() / s.references.len() as f64
            }
            VerbosityConvention::FirstReference => s.references[0].len() as f64,
        })
        .sum();
    Ok(DatasetStats {
        n_segments: segments.len(),
        n_references: segments[0].references.len(),
        n_source_tokens,
        mean_source_length: n_source_tokens as f64 / segments.len() as f64,
        verbosity: ref_words / n_source_tokens as f64,
        source_lengths,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisDiagnostics {
    /// Hypothesis words per source word.
    pub hypothesis_verbosity: f64,
    /// Hypothesis words per effective reference word.
    pub length_ratio: f64,
    pub brevity_penalty: f64,
}

/// Length diagnostics of one 1-best hypothesis per segment.
pub fn hypothesis_diagnostics<S: AsRef<[String]>>(
    segments: &[Segment],
    hypotheses: &[S],
    tie: TieRule,
) -> Result<HypothesisDiagnostics> {
    if hypotheses.len() != segments.len() {
        return Err(Error::Misaligned {
            expected: segments.len(),
            found: hypotheses.len(),
        });
    }
    if segments.is_empty() {
        return Err(Error::EmptyInput("segment list"));
    }
    let (mut hyp, mut src, mut reff) = (0u64, 0u64, 0u64);
    for (s, h) in segments.iter().zip(hypotheses) {
        let c = h.as_ref().len();
        hyp += c as u64;
        src += s.source_len() as u64;
        reff += effective_ref_length(c, &s.reference_lengths(), tie) as u64;
    }
    Ok(HypothesisDiagnostics {
        hypothesis_verbosity: hyp as f64 / src as f64,
        length_ratio: hyp as f64 / reff as f64,
        brevity_penalty: brevity_penalty(hyp, reff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn seg(id: usize, src_len: usize, ref_lens: &[usize]) -> Segment {
        let words = |n: usize| (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>();
        Segment::new(id, words(src_len), ref_lens.iter().map(|&n| words(n)).collect()).unwrap()
    }

    fn pick(lengths: &[usize], condition: LengthCondition, fraction: f64) -> Vec<usize> {
        select_by_lengths(lengths, &SelectionSpec::new(condition, fraction).unwrap()).unwrap()
    }

    #[test]
    fn longest_and_middle() {
        let lengths = [2, 5, 9, 14];
        assert_eq!(pick(&lengths, LengthCondition::Longest, 0.5), vec![2, 3]);
        assert_eq!(pick(&lengths, LengthCondition::Middle, 0.5), vec![1, 2]);
        assert_eq!(pick(&lengths, LengthCondition::Shortest, 0.5), vec![0, 1]);
    }

    #[test]
    fn stable_ties_and_document_order() {
        assert_eq!(pick(&[3, 3, 3, 3], LengthCondition::Shortest, 0.5), vec![0, 1]);
        assert_eq!(pick(&[14, 2, 9, 5], LengthCondition::Longest, 0.5), vec![0, 2]);
    }

    #[test]
    fn subset_sizes() {
        assert_eq!(pick(&[1, 2, 3], LengthCondition::Longest, 0.01).len(), 1);
        assert_eq!(pick(&[1, 2, 3, 4, 5], LengthCondition::Longest, 0.5).len(), 3);
        assert_eq!(pick(&[1, 2, 3, 4, 5], LengthCondition::Random { seed: 3 }, 0.4).len(), 2);
        assert!(SelectionSpec::new(LengthCondition::Longest, 0.0).is_err());
        assert!(SelectionSpec::new(LengthCondition::Longest, 1.5).is_err());
        assert!(select_by_lengths(&[], &SelectionSpec::new(LengthCondition::Longest, 0.5).unwrap()).is_err());
    }

    #[test]
    fn random_is_seeded() {
        let lengths: Vec<usize> = (0..50).collect();
        let a = pick(&lengths, LengthCondition::Random { seed: 1 }, 0.5);
        let b = pick(&lengths, LengthCondition::Random { seed: 1 }, 0.5);
        let c = pick(&lengths, LengthCondition::Random { seed: 2 }, 0.5);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn verbosity_examples() {
        assert!((dataset_stats(&[seg(0, 10, &[12])]).unwrap().verbosity - 1.2).abs() < 1e-12);
        let two = dataset_stats(&[seg(0, 10, &[9]), seg(1, 10, &[11])]).unwrap();
        assert_eq!(two.verbosity, 1.0);
        assert_eq!(two.n_source_tokens, 20);
        assert_eq!(dataset_stats(&[seg(0, 10, &[8, 12])]).unwrap().verbosity, 1.0);
        let first = dataset_stats_with(&[seg(0, 10, &[8, 12])], VerbosityConvention::FirstReference).unwrap();
        assert_eq!(first.verbosity, 0.8);
    }

    #[test]
    fn diagnostics_examples() {
        let segs = vec![seg(0, 4, &[5]), seg(1, 6, &[7])];
        let hyps = vec![tokenize("a b c d e"), tokenize("a b c d e f g")];
        let d = hypothesis_diagnostics(&segs, &hyps, TieRule::Shorter).unwrap();
        assert_eq!((d.length_ratio, d.brevity_penalty), (1.0, 1.0));
        assert_eq!(d.hypothesis_verbosity, 1.2);

        let segs = vec![seg(0, 10, &[100])];
        let hyps = vec![(0..90).map(|i| i.to_string()).collect::<Vec<_>>()];
        let d = hypothesis_diagnostics(&segs, &hyps, TieRule::Shorter).unwrap();
        assert_eq!(d.length_ratio, 0.9);
        assert!((d.brevity_penalty - (1.0f64 - 100.0 / 90.0).exp()).abs() < 1e-15);

        let segs = vec![seg(0, 10, &[12])];
        let hyps = vec![(0..15).map(|i| i.to_string()).collect::<Vec<_>>()];
        assert_eq!(hypothesis_diagnostics(&segs, &hyps, TieRule::Shorter).unwrap().hypothesis_verbosity, 1.5);

        assert!(matches!(
            hypothesis_diagnostics(&segs, &[] as &[Vec<String>], TieRule::Shorter),
            Err(Error::Misaligned { .. })
        ));
    }

    fn tokens(lengths: &[usize], picked: &[usize]) -> usize {
        picked.iter().map(|&i| lengths[i]).sum()
    }

    proptest::proptest! {
        #[test]
        fn subsets_are_sized_sorted_and_ordered(
            lengths in proptest::collection::vec(1usize..60, 2..80),
            fraction in 0.05f64..=1.0,
            seed in 0u64..100,
        ) {
            let n = lengths.len();
            let spec = |c| SelectionSpec::new(c, fraction).unwrap();
            let k = spec(LengthCondition::Longest).subset_size(n);
            proptest::prop_assert_eq!(k, ((n as f64 * fraction).round() as usize).clamp(1, n));
            for c in [
                LengthCondition::Shortest,
                LengthCondition::Middle,
                LengthCondition::Longest,
                LengthCondition::CutoffLongest,
                LengthCondition::Random { seed },
            ] {
                let picked = select_by_lengths(&lengths, &spec(c)).unwrap();
                proptest::prop_assert_eq!(picked.len(), k);
                proptest::prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
                proptest::prop_assert!(picked.iter().all(|&i| i < n));
            }
            let short = select_by_lengths(&lengths, &spec(LengthCondition::Shortest)).unwrap();
            let mid = select_by_lengths(&lengths, &spec(LengthCondition::Middle)).unwrap();
            let long = select_by_lengths(&lengths, &spec(LengthCondition::Longest)).unwrap();
            proptest::prop_assert!(tokens(&lengths, &long) >= tokens(&lengths, &mid));
            proptest::prop_assert!(tokens(&lengths, &mid) >= tokens(&lengths, &short));
            if short.iter().all(|i| !long.contains(i)) {
                let max_short = short.iter().map(|&i| lengths[i]).max().unwrap();
                let min_long = long.iter().map(|&i| lengths[i]).min().unwrap();
                proptest::prop_assert!(max_short <= min_long);
            }
        }

        #[test]
        fn halves_of_even_sets_are_disjoint(lengths in proptest::collection::vec(1usize..60, 1..40)) {
            let mut lengths = lengths;
            if lengths.len() % 2 == 1 {
                lengths.push(7);
            }
            let short = pick(&lengths, LengthCondition::Shortest, 0.5);
            let long = pick(&lengths, LengthCondition::Longest, 0.5);
            proptest::prop_assert!(short.iter().all(|i| !long.contains(i)));
            proptest::prop_assert_eq!(short.len() + long.len(), lengths.len());
        }
    }
}
