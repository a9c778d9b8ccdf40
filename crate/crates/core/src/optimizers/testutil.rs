//! Random small n-best instances for optimizer tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ScoredList;
use crate::corpus::{FeatureSpace, FeatureVector, Hypothesis, NBestList, Segment, WeightVector};
use crate::metrics::TieRule;

fn tokens(rng: &mut ChaCha8Rng, min: usize, max: usize, vocab: usize) -> Vec<String> {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| format!("t{}", rng.random_range(0..vocab))).collect()
}

pub(crate) fn random_vector(rng: &mut ChaCha8Rng, space: &FeatureSpace, scale: f64) -> WeightVector {
    FeatureVector::new(space.clone(), (0..space.len()).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Up to `max_segments` lists of up to `max_hyps` hypotheses over `dim` features.
pub(crate) fn random_lists(seed: u64, max_segments: usize, max_hyps: usize, dim: usize) -> (Vec<ScoredList>, FeatureSpace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = FeatureSpace::new((0..dim).map(|i| format!("f{i}"))).unwrap();
    let n_seg = rng.random_range(1..=max_segments);
    let lists = (0..n_seg)
        .map(|s| {
            let segment = Segment::new(s, vec!["src".into()], vec![tokens(&mut rng, 3, 8, 5)]).unwrap();
            let n_hyp = rng.random_range(1..=max_hyps);
            let hyps = (0..n_hyp)
                .map(|_| Hypothesis {
                    segment_id: s,
                    tokens: tokens(&mut rng, 1, 8, 5),
                    features: random_vector(&mut rng, &space, 2.0),
                })
                .collect();
            ScoredList::score(NBestList::new(s, hyps).unwrap(), &segment, TieRule::Shorter).unwrap()
        })
        .collect();
    (lists, space)
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
