//! Minimum error rate training: exact line search over the upper envelopes of
//! all n-best lists, driven by Powell-style passes over a direction set.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::envelope::{upper_envelope, EnvelopeInterval};
use super::ScoredList;
use crate::corpus::{argmax_first, dot_values, FeatureVector, NBestList, WeightVector};
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, BleuStats};
use crate::rng;

/// Minimum corpus-BLEU gain for a line-search step to be accepted.
const MIN_IMPROVEMENT: f64 = 1e-6;
const MAX_PASSES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct MertConfig {
    pub random_restarts: usize,
    /// Random unit directions added to the coordinate axes on every pass.
    pub random_directions: usize,
    /// Offset from the last breakpoint used when the best interval is unbounded.
    pub gamma_window: f64,
    pub seed: u64,
}

impl Default for MertConfig {
    fn default() -> Self {
        MertConfig {
            random_restarts: 0,
            random_directions: 8,
            gamma_window: 10.0,
            seed: 0,
        }
    }
}

impl MertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_window > 0.0 && self.gamma_window.is_finite()) {
            return Err(Error::config("gamma_window must be positive"));
        }
        Ok(())
    }
}

/// Upper envelope of one list's hypotheses along `weights + γ·direction`.
pub fn mert_envelope(
    nbest: &NBestList,
    weights: &WeightVector,
    direction: &WeightVector,
) -> Result<Vec<EnvelopeInterval>> {
    let intercepts = nbest.scores(weights)?;
    let slopes = nbest.scores(direction)?;
    Ok(upper_envelope(&intercepts, &slopes))
}

/// Corpus statistics of the 1-best hypotheses under `weights`.
pub fn corpus_bleu_at(lists: &[ScoredList], weights: &WeightVector) -> Result<(f64, BleuStats)> {
    let mut stats = BleuStats::default();
    for list in lists {
        let scores = list.nbest().scores(weights)?;
        stats += list.stats()[argmax_first(&scores)];
    }
    Ok((corpus_bleu(&stats), stats))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchResult {
    pub step: f64,
    pub bleu: f64,
    pub stats: BleuStats,
}

/// Exact corpus-BLEU line search along `direction`.
///
/// Returns the midpoint of the best interval of the merged envelopes (unbounded
/// intervals are clamped `gamma_window` past their finite end). If no interval
/// beats the current weights, returns step 0 with the current BLEU, so a step
/// never lowers the objective.
pub fn mert_line_search(
    lists: &[ScoredList],
    weights: &WeightVector,
    direction: &WeightVector,
    gamma_window: f64,
) -> Result<LineSearchResult> {
    if lists.is_empty() {
        return Err(Error::EmptyInput("n-best lists"));
    }
    let space = lists[0].nbest().feature_space();
    space.ensure_same(weights.space())?;
    space.ensure_same(direction.space())?;

    struct Event {
        gamma: f64,
        segment: usize,
        old: usize,
        new: usize,
    }

    let mut current = BleuStats::default();
    let mut at_zero = BleuStats::default();
    let mut events = Vec::new();
    for (s, list) in lists.iter().enumerate() {
        let hyps = list.nbest().hypotheses();
        let intercepts: Vec<f64> = hyps
            .iter()
            .map(|h| dot_values(weights.values(), h.features.values()))
            .collect();
        let slopes: Vec<f64> = hyps
            .iter()
            .map(|h| dot_values(direction.values(), h.features.values()))
            .collect();
        let env = upper_envelope(&intercepts, &slopes);
        current += list.stats()[env[0].hypothesis];
        at_zero += list.stats()[argmax_first(&intercepts)];
        for pair in env.windows(2) {
            events.push(Event {
                gamma: pair[1].start,
                segment: s,
                old: pair[0].hypothesis,
                new: pair[1].hypothesis,
            });
        }
    }
    events.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.segment.cmp(&b.segment)));

    let bleu_at_zero = corpus_bleu(&at_zero);
    let pick = |start: f64, end: f64| -> f64 {
        match (start.is_finite(), end.is_finite()) {
            (false, false) => 0.0,
            (false, true) => end - gamma_window,
            (true, false) => start + gamma_window,
            (true, true) => 0.5 * (start + end),
        }
    };

    let mut best: Option<LineSearchResult> = None;
    let mut consider = |start: f64, end: f64, stats: BleuStats| {
        let step = pick(start, end);
        let bleu = corpus_bleu(&stats);
        let better = match &best {
            None => true,
            Some(b) => bleu > b.bleu || (bleu == b.bleu && step.abs() < b.step.abs()),
        };
        if better {
            best = Some(LineSearchResult { step, bleu, stats });
        }
    };

    let mut start = f64::NEG_INFINITY;
    let mut i = 0;
    while i < events.len() {
        let gamma = events[i].gamma;
        consider(start, gamma, current);
        while i < events.len() && events[i].gamma == gamma {
            let e = &events[i];
            let stats = lists[e.segment].stats();
            current.replace(&stats[e.old], &stats[e.new]);
            i += 1;
        }
        start = gamma;
    }
    consider(start, f64::INFINITY, current);

    let best = best.expect("at least one interval");
    if best.bleu > bleu_at_zero {
        Ok(best)
    } else {
        Ok(LineSearchResult {
            step: 0.0,
            bleu: bleu_at_zero,
            stats: at_zero,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MertOutcome {
    pub weights: WeightVector,
    pub bleu: f64,
}

fn random_direction(space: &crate::corpus::FeatureSpace, rng: &mut rng::Rng) -> Result<FeatureVector> {
    loop {
        let v: Vec<f64> = (0..space.len()).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return FeatureVector::new(space.clone(), v.into_iter().map(|x| x / norm).collect());
        }
    }
}

fn coordinate_ascent(
    lists: &[ScoredList],
    start: WeightVector,
    config: &MertConfig,
    rng: &mut rng::Rng,
) -> Result<(WeightVector, f64, bool)> {
    let space = start.space().clone();
    let axes: Vec<FeatureVector> = space
        .names()
        .iter()
        .map(|n| FeatureVector::axis(&space, n).expect("name from space"))
        .collect();
    let mut weights = start;
    let (mut bleu, _) = corpus_bleu_at(lists, &weights)?;
    let mut moved = false;
    for _ in 0..MAX_PASSES {
        let mut directions = axes.clone();
        for _ in 0..config.random_directions {
            directions.push(random_direction(&space, rng)?);
        }
        let mut improved = false;
        for d in &directions {
            let r = mert_line_search(lists, &weights, d, config.gamma_window)?;
            if r.bleu > bleu + MIN_IMPROVEMENT {
                weights = weights.add_scaled(d, r.step)?.l1_normalized();
                bleu = r.bleu;
                improved = true;
                moved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok((weights, bleu, moved))
}

/// Repeated line searches from `initial` and from `random_restarts` random
/// points in `[-1, 1]^d`; returns the best weights found.
///
/// Start `k` draws from its own RNG stream, so adding restarts never changes
/// what earlier starts find. If nothing beats `initial`, it is returned unchanged.
pub fn mert_iterate(lists: &[ScoredList], initial: &WeightVector, config: &MertConfig) -> Result<MertOutcome> {
    config.validate()?;
    if lists.is_empty() {
        return Err(Error::EmptyInput("n-best lists"));
    }
    lists[0].nbest().feature_space().ensure_same(initial.space())?;

    let mut rng0 = rng::stream(config.seed, &[0]);
    let (w, bleu, moved) = coordinate_ascent(lists, initial.clone(), config, &mut rng0)?;
    let mut best = MertOutcome {
        weights: if moved { w } else { initial.clone() },
        bleu,
    };
    for k in 1..=config.random_restarts {
        let mut rng = rng::stream(config.seed, &[k as u64]);
        let start: Vec<f64> = (0..initial.space().len())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let start = FeatureVector::new(initial.space().clone(), start)?;
        let (w, bleu, _) = coordinate_ascent(lists, start, config, &mut rng)?;
        if bleu > best.bleu {
            best = MertOutcome {
                weights: w.l1_normalized(),
                bleu,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, FeatureSpace, Hypothesis, Segment};
    use crate::metrics::TieRule;
    use crate::optimizers::testutil::{random_lists, random_vector, rng};

    fn list(space: &FeatureSpace, reference: &str, hyps: &[(&str, f64)]) -> ScoredList {
        let segment = Segment::new(0, tokenize("s"), vec![tokenize(reference)]).unwrap();
        let hyps = hyps
            .iter()
            .map(|&(t, f)| Hypothesis {
                segment_id: 0,
                tokens: tokenize(t),
                features: FeatureVector::new(space.clone(), vec![f]).unwrap(),
            })
            .collect();
        ScoredList::score(NBestList::new(0, hyps).unwrap(), &segment, TieRule::Shorter).unwrap()
    }

    #[test]
    fn line_search_finds_the_better_side() {
        // scores along γ: h0 = 1 - γ, h1 = γ; h1 is the reference and wins for γ > 0.5
        let space = FeatureSpace::new(["f"]).unwrap();
        let l = list(&space, "a b c d", &[("x y z w", -1.0), ("a b c d", 1.0)]);
        let w = FeatureVector::new(space.clone(), vec![-1.0]).unwrap();
        let d = FeatureVector::new(space, vec![2.0]).unwrap();
        let r = mert_line_search(&[l], &w, &d, 10.0).unwrap();
        assert_eq!(r.step, 0.5 + 10.0);
        assert_eq!(r.bleu, 1.0);
    }

    #[test]
    fn no_improvement_keeps_step_zero() {
        let space = FeatureSpace::new(["f"]).unwrap();
        let l = list(&space, "a b c d", &[("a b c d", 1.0), ("x y z w", -1.0)]);
        let w = FeatureVector::new(space.clone(), vec![1.0]).unwrap();
        let d = FeatureVector::new(space, vec![1.0]).unwrap();
        let r = mert_line_search(&[l], &w, &d, 10.0).unwrap();
        assert_eq!((r.step, r.bleu), (0.0, 1.0));
    }

    #[test]
    fn rejects_bad_config_and_empty_input() {
        assert!(MertConfig { gamma_window: 0.0, ..MertConfig::default() }.validate().is_err());
        let space = FeatureSpace::new(["f"]).unwrap();
        let w = FeatureVector::zeros(&space);
        assert!(mert_line_search(&[], &w, &w, 1.0).is_err());
        assert!(mert_iterate(&[], &w, &MertConfig::default()).is_err());
    }

    #[test]
    fn envelope_of_one_list() {
        let space = FeatureSpace::new(["f"]).unwrap();
        let l = list(&space, "a", &[("a", 0.0), ("b", 2.0)]);
        let w = FeatureVector::zeros(&space);
        let d = FeatureVector::axis(&space, "f").unwrap();
        let env = mert_envelope(l.nbest(), &w, &d).unwrap();
        assert_eq!(env.iter().map(|e| e.hypothesis).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(env[1].start, 0.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn line_search_never_degrades(seed in 0u64..u64::MAX) {
            let (lists, space) = random_lists(seed, 5, 5, 3);
            let mut r = rng(seed ^ 1);
            let w = random_vector(&mut r, &space, 1.0);
            let d = random_vector(&mut r, &space, 1.0);
            let found = mert_line_search(&lists, &w, &d, 10.0).unwrap();
            let (at_zero, _) = corpus_bleu_at(&lists, &w).unwrap();
            proptest::prop_assert!(found.bleu >= at_zero);
            let moved = w.add_scaled(&d, found.step).unwrap();
            let (actual, stats) = corpus_bleu_at(&lists, &moved).unwrap();
            proptest::prop_assert_eq!(actual, found.bleu);
            proptest::prop_assert_eq!(stats, found.stats);
        }

        #[test]
        fn iterate_improves_and_restarts_only_help(seed in 0u64..u64::MAX) {
            let (lists, space) = random_lists(seed, 4, 4, 2);
            let w = random_vector(&mut rng(seed ^ 2), &space, 1.0);
            let (start, _) = corpus_bleu_at(&lists, &w).unwrap();
            let base = MertConfig { random_directions: 2, seed, ..MertConfig::default() };
            let mut last = start;
            for restarts in [0, 2, 4] {
                let out = mert_iterate(&lists, &w, &MertConfig { random_restarts: restarts, ..base.clone() }).unwrap();
                let (check, _) = corpus_bleu_at(&lists, &out.weights).unwrap();
                proptest::prop_assert_eq!(check, out.bleu);
                proptest::prop_assert!(out.bleu >= last);
                last = out.bleu;
            }
        }
    }
}
