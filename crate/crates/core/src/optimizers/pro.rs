//! Pairwise ranking optimization: sample candidate pairs whose sentence-level
//! scores differ enough, then fit a logistic classifier on feature differences.

use std::collections::HashSet;

use rand::Rng as _;

use crate::corpus::{FeatureSpace, FeatureVector, WeightVector};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ProConfig {
    pub pairs_sampled_per_segment: usize,
    pub pairs_kept_per_segment: usize,
    /// Pairs must differ by more than this many BLEU+1 points.
    pub min_score_gap: f64,
    /// Pairs differing by more than this many points are discarded. `None` disables the cap.
    pub max_score_gap: Option<f64>,
    /// Weight given to the newly fitted direction when interpolating with the previous weights.
    pub interpolation: f64,
    pub classifier_steps: usize,
    pub classifier_learning_rate: f64,
    pub seed: u64,
}

impl Default for ProConfig {
    fn default() -> Self {
        ProConfig {
            pairs_sampled_per_segment: 5000,
            pairs_kept_per_segment: 50,
            min_score_gap: 0.05,
            max_score_gap: Some(10.0),
            interpolation: 0.1,
            classifier_steps: 100,
            classifier_learning_rate: 1.0,
            seed: 0,
        }
    }
}

impl ProConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_score_gap > 0.0) {
            return Err(Error::config("min_score_gap must be positive"));
        }
        if let Some(max) = self.max_score_gap {
            if max < self.min_score_gap {
                return Err(Error::config("max_score_gap must be at least min_score_gap"));
            }
        }
        if self.pairs_kept_per_segment > self.pairs_sampled_per_segment {
            return Err(Error::config("cannot keep more pairs than are sampled"));
        }
        if !(0.0..=1.0).contains(&self.interpolation) {
            return Err(Error::config("interpolation must lie in [0, 1]"));
        }
        if !(self.classifier_learning_rate > 0.0) {
            return Err(Error::config("classifier learning rate must be positive"));
        }
        Ok(())
    }
}

/// Dense bitmap for small lists, hash set for large accumulated pools.
enum PairSet {
    Dense(Vec<bool>),
    Sparse(HashSet<usize>),
}

impl PairSet {
    fn new(n: usize) -> Self {
        if n <= 2048 {
            PairSet::Dense(vec![false; n * n])
        } else {
            PairSet::Sparse(HashSet::new())
        }
    }

    fn insert(&mut self, key: usize) -> bool {
        match self {
            PairSet::Dense(bits) => !std::mem::replace(&mut bits[key], true),
            PairSet::Sparse(set) => set.insert(key),
        }
    }
}

/// Samples `(better, worse)` index pairs from one n-best list.
///
/// `scores` are sentence-level metric values in points (0–100). Each distinct
/// pair is kept at most once; the survivors of the gap filter are ordered by
/// decreasing gap (then by first draw) and truncated to `pairs_kept_per_segment`.
pub fn pro_sample_pairs(scores: &[f64], config: &ProConfig, rng: &mut rng::Rng) -> Vec<(usize, usize)> {
    let n = scores.len();
    if n < 2 {
        return Vec::new();
    }
    let mut seen = PairSet::new(n);
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for _ in 0..config.pairs_sampled_per_segment {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let gap = (scores[a] - scores[b]).abs();
        if gap <= config.min_score_gap {
            continue;
        }
        if config.max_score_gap.is_some_and(|max| gap > max) {
            continue;
        }
        if !seen.insert(a.min(b) * n + a.max(b)) {
            continue;
        }
        let (better, worse) = if scores[a] > scores[b] { (a, b) } else { (b, a) };
        kept.push((better, worse, gap));
    }
    kept.sort_by(|x, y| y.2.total_cmp(&x.2));
    kept.truncate(config.pairs_kept_per_segment);
    kept.into_iter().map(|(b, w, _)| (b, w)).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression on pairwise feature differences.
///
/// Every difference `f_better - f_worse` contributes a positive example and its
/// negation a negative one. Full-batch gradient descent starts from zero and runs
/// for a fixed number of steps; each feature is scaled by the RMS of its
/// differences during the fit and the weights mapped back afterwards.
/// Returns `None` when there is nothing to learn from.
pub fn train_pairwise_classifier(
    space: &FeatureSpace,
    differences: &[Vec<f64>],
    config: &ProConfig,
) -> Result<Option<WeightVector>> {
    config.validate()?;
    if differences.is_empty() {
        return Ok(None);
    }
    let dim = space.len();
    if let Some(d) = differences.iter().find(|d| d.len() != dim) {
        return Err(Error::Misaligned {
            expected: dim,
            found: d.len(),
        });
    }

    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let ms = differences.iter().map(|d| d[j] * d[j]).sum::<f64>() / differences.len() as f64;
            if ms > 0.0 {
                ms.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    // A mirrored example (-x, -1) has the same margin and gradient as (x, +1),
    // so the fit over both signs equals the fit over the positive half.
    let x: Vec<f64> = differences
        .iter()
        .flat_map(|d| d.iter().zip(&scale).map(|(v, s)| v / s))
        .collect();

    let mut w = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let n = differences.len() as f64;
    for _ in 0..config.classifier_steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for row in x.chunks_exact(dim) {
            let margin: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let coef = -sigmoid(-margin);
            for (g, v) in grad.iter_mut().zip(row) {
                *g += coef * v;
            }
        }
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= config.classifier_learning_rate * g / n;
        }
    }
    let w: Vec<f64> = w.iter().zip(&scale).map(|(v, s)| v / s).collect();
    FeatureVector::new(space.clone(), w).map(Some)
}
