//! Synthetic tuning tasks: segments with a controllable verbosity-vs-length
//! relationship and fixed candidate pools that stand in for a decoder.
//!
//! Every candidate is derived from the first reference by deleting words or
//! inserting junk (to reach a target length) and corrupting words (quality).
//! Features:
//!
//! - `wp`: word penalty, exactly `-|hyp|`;
//! - `lm0`: a length prior `-κ (|hyp| - v0·L)² / L` anchored to the source length `L`,
//!   so that `wp` and `lm0` together can express any fixed hypothesis verbosity;
//! - `tm.ef_lex`: share of uncorrupted content words, plus Gaussian noise;
//! - a configurable number of pure-noise features.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution as _, Normal};

use crate::corpus::{write_dataset, Dataset, FeatureSpace, FeatureVector, Hypothesis, NBestList, Segment, WeightVector};
use crate::corpus::write_weights;
use crate::error::{Error, Result};
use crate::metrics::TieRule;
use crate::optimizers::CandidatePool;
use crate::rng;

const CONTENT_VOCAB: usize = 20_000;
const SOURCE_VOCAB: usize = 20_000;
const FILLER_VOCAB: usize = 30;
const JUNK_VOCAB: usize = 5_000;
/// Relative jitter of the extra references' lengths.
const REFERENCE_JITTER: f64 = 0.1;
/// Probability that an extra reference paraphrases a word of the first one.
const SYNONYM_RATE: f64 = 0.25;
/// Probability that a candidate error uses the paraphrase word rather than junk.
const SYNONYM_ERROR_RATE: f64 = 0.5;

pub const WORD_PENALTY: &str = "wp";
pub const LENGTH_PRIOR: &str = "lm0";
pub const QUALITY: &str = "tm.ef_lex";
const NOISE_NAMES: [&str; 6] = ["tm.fe_lex", "ldm.f_mono", "ldm.f_swap", "ldm.f_disc", "tm.ef", "tm.fe"];

fn noise_name(k: usize) -> String {
    NOISE_NAMES.get(k).map_or_else(|| format!("noise{k}"), |s| s.to_string())
}

/// Reference words per source word as a linear function of source length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerbosityModel {
    pub intercept: f64,
    pub slope: f64,
}

impl VerbosityModel {
    pub fn at(&self, source_len: usize) -> f64 {
        self.intercept + self.slope * source_len as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_tuning: usize,
    pub n_test: usize,
    /// Inclusive range of source lengths, drawn uniformly.
    pub source_length_range: (usize, usize),
    pub verbosity: VerbosityModel,
    /// 1 or 4.
    pub n_references: usize,
    /// Extra reference `k` of 3 follows the verbosity slope scaled by
    /// `1 - spread·k/3`, pivoting at the middle source length.
    pub translator_spread: f64,
    pub candidates_per_segment: usize,
    /// Candidates sit at `1 ± spread` and `1 ± spread/2` times the reference length.
    pub length_spread: f64,
    pub n_noise_features: usize,
    /// Standard deviation of the noise on the quality feature.
    pub noise_scale: f64,
    /// `v0` in the length prior.
    pub prior_verbosity: f64,
    /// `κ` in the length prior.
    pub prior_sharpness: f64,
    /// Corruption rate of the best variant at each length.
    pub corruption_base: f64,
    /// Per-variant increase of the corruption rate.
    pub corruption_step: f64,
    /// Single length, nested errors and a noiseless quality feature, so that
    /// the oracle ranking is recoverable exactly.
    pub separable: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_tuning: 500,
            n_test: 500,
            source_length_range: (4, 50),
            verbosity: VerbosityModel {
                intercept: 0.95,
                slope: 0.006,
            },
            n_references: 1,
            translator_spread: 1.0,
            candidates_per_segment: 20,
            length_spread: 0.3,
            n_noise_features: 2,
            noise_scale: 0.1,
            prior_verbosity: 1.1,
            prior_sharpness: 1.0,
            corruption_base: 0.4,
            corruption_step: 0.1,
            separable: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// The configuration used for rank-recovery checks.
    pub fn separable(seed: u64) -> Self {
        SynthConfig {
            source_length_range: (20, 40),
            verbosity: VerbosityModel {
                intercept: 1.0,
                slope: 0.0,
            },
            separable: true,
            seed,
            ..SynthConfig::default()
        }
    }

    fn ratios(&self) -> Vec<f64> {
        if self.separable {
            vec![1.0]
        } else {
            let s = self.length_spread;
            vec![1.0 - s, 1.0 - s / 2.0, 1.0, 1.0 + s / 2.0, 1.0 + s]
        }
    }

    /// Verbosity of extra reference `k` (1..=3) at source length `l`.
    pub fn translator_verbosity(&self, k: usize, l: usize) -> f64 {
        let (lo, hi) = self.source_length_range;
        let pivot = (lo + hi) as f64 / 2.0;
        let factor = 1.0 - self.translator_spread * k as f64 / 3.0;
        self.verbosity.at(l) - self.verbosity.slope * (1.0 - factor) * (l as f64 - pivot)
    }

    fn variants(&self) -> usize {
        self.candidates_per_segment / self.ratios().len()
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.source_length_range;
        if lo == 0 || lo > hi {
            return Err(Error::config("source_length_range must satisfy 1 <= min <= max"));
        }
        if self.n_tuning < 2 || self.n_test < 2 {
            return Err(Error::config("need at least two tuning and two test segments"));
        }
        if self.n_references != 1 && self.n_references != 4 {
            return Err(Error::config("n_references must be 1 or 4"));
        }
        if !(0.0..=2.0).contains(&self.translator_spread) {
            return Err(Error::config("translator_spread must lie in [0, 2]"));
        }
        if !(self.length_spread > 0.0 && self.length_spread < 1.0) {
            return Err(Error::config("length_spread must lie in (0, 1)"));
        }
        let n_ratios = self.ratios().len();
        if self.candidates_per_segment < n_ratios || self.candidates_per_segment % n_ratios != 0 {
            return Err(Error::config(format!(
                "candidates_per_segment must be a positive multiple of {n_ratios}"
            )));
        }
        for l in [lo, hi] {
            let r = self.verbosity.at(l) * l as f64;
            if r.round() < 2.0 {
                return Err(Error::config(format!(
                    "verbosity model gives reference length {r:.2} at source length {l}; need at least 2"
                )));
            }
            if self.separable && (r.round() as usize) + 1 < self.variants() {
                return Err(Error::config("separable tasks need references at least as long as the pool"));
            }
        }
        let finite = [
            self.noise_scale,
            self.prior_verbosity,
            self.prior_sharpness,
            self.corruption_base,
            self.corruption_step,
            self.verbosity.intercept,
            self.verbosity.slope,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.noise_scale < 0.0 || self.prior_sharpness <= 0.0 {
            return Err(Error::config("noise_scale, prior and verbosity parameters must be finite, sharpness positive"));
        }
        let worst = self.corruption_base + self.corruption_step * (self.variants() as f64 - 1.0);
        if !self.separable && !(self.corruption_base >= 0.0 && self.corruption_step >= 0.0 && worst <= 1.0) {
            return Err(Error::config("corruption_step too large for the number of variants"));
        }
        Ok(())
    }

    /// `key=value` pairs, in the order [`SynthConfig::set`] understands.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_tuning", self.n_tuning.to_string()),
            ("n_test", self.n_test.to_string()),
            ("min_source_length", self.source_length_range.0.to_string()),
            ("max_source_length", self.source_length_range.1.to_string()),
            ("verbosity_intercept", self.verbosity.intercept.to_string()),
            ("verbosity_slope", self.verbosity.slope.to_string()),
            ("n_references", self.n_references.to_string()),
            ("translator_spread", self.translator_spread.to_string()),
            ("candidates_per_segment", self.candidates_per_segment.to_string()),
            ("length_spread", self.length_spread.to_string()),
            ("n_noise_features", self.n_noise_features.to_string()),
            ("noise_scale", self.noise_scale.to_string()),
            ("prior_verbosity", self.prior_verbosity.to_string()),
            ("prior_sharpness", self.prior_sharpness.to_string()),
            ("corruption_base", self.corruption_base.to_string()),
            ("corruption_step", self.corruption_step.to_string()),
            ("separable", self.separable.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "n_tuning" => self.n_tuning = parse(key, value)?,
            "n_test" => self.n_test = parse(key, value)?,
            "min_source_length" => self.source_length_range.0 = parse(key, value)?,
            "max_source_length" => self.source_length_range.1 = parse(key, value)?,
            "verbosity_intercept" => self.verbosity.intercept = parse(key, value)?,
            "verbosity_slope" => self.verbosity.slope = parse(key, value)?,
            "n_references" => self.n_references = parse(key, value)?,
            "translator_spread" => self.translator_spread = parse(key, value)?,
            "candidates_per_segment" => self.candidates_per_segment = parse(key, value)?,
            "length_spread" => self.length_spread = parse(key, value)?,
            "n_noise_features" => self.n_noise_features = parse(key, value)?,
            "noise_scale" => self.noise_scale = parse(key, value)?,
            "prior_verbosity" => self.prior_verbosity = parse(key, value)?,
            "prior_sharpness" => self.prior_sharpness = parse(key, value)?,
            "corruption_base" => self.corruption_base = parse(key, value)?,
            "corruption_step" => self.corruption_step = parse(key, value)?,
            "separable" => self.separable = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::config(format!("unknown synth key `{key}`"))),
        }
        Ok(())
    }

    pub fn feature_space(&self) -> FeatureSpace {
        let mut names = vec![WORD_PENALTY.to_string(), LENGTH_PRIOR.to_string(), QUALITY.to_string()];
        names.extend((0..self.n_noise_features).map(noise_name));
        FeatureSpace::new(names).expect("distinct feature names")
    }
}

/// Segments, their candidate pools and genre tags.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSplit {
    pub segments: Vec<Segment>,
    pub nbest: Vec<NBestList>,
    pub genres: Vec<String>,
}

impl SynthSplit {
    pub fn pool(&self, tie: TieRule) -> Result<CandidatePool> {
        CandidatePool::new(self.segments.clone(), self.nbest.clone(), tie)
    }

    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            segments: self.segments.clone(),
            nbest: Some(self.nbest.clone()),
            genres: Some(self.genres.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTask {
    pub config: SynthConfig,
    pub tuning: SynthSplit,
    pub test: SynthSplit,
    /// Ranks candidates by their true quality.
    pub oracle_weights: WeightVector,
    /// Starting point for tuning.
    pub initial_weights: WeightVector,
}

impl SynthTask {
    /// Writes `tune.*`, `test.*`, `oracle.weights`, `init.weights` and `manifest.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_dataset(&dir.join("tune"), &self.tuning.to_dataset())?;
        write_dataset(&dir.join("test"), &self.test.to_dataset())?;
        let put = |name: &str, body: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::file(path, e))
        };
        put("oracle.weights", write_weights(&self.oracle_weights))?;
        put("init.weights", write_weights(&self.initial_weights))?;
        put("manifest.txt", self.manifest())
    }

    pub fn manifest(&self) -> String {
        let mut out = String::from("# synthetic task\n");
        for (k, v) in self.config.to_pairs() {
            let _ = writeln!(out, "{k}={v}");
        }
        for (name, w) in [("oracle", &self.oracle_weights), ("initial", &self.initial_weights)] {
            for (f, v) in w.iter() {
                let _ = writeln!(out, "{name}.{f}={v}");
            }
        }
        out
    }
}

struct Generator<'a> {
    config: &'a SynthConfig,
    space: FeatureSpace,
    rng: rng::Rng,
    quality_noise: Normal<f64>,
}

fn word(prefix: char, k: usize) -> String {
    format!("{prefix}{k}")
}

impl Generator<'_> {
    fn split(&mut self, n: usize) -> Result<SynthSplit> {
        let mut segments = Vec::with_capacity(n);
        let mut nbest = Vec::with_capacity(n);
        let mut genres = Vec::with_capacity(n);
        for id in 0..n {
            let (segment, list, genre) = self.segment(id)?;
            segments.push(segment);
            nbest.push(list);
            genres.push(genre);
        }
        Ok(SynthSplit { segments, nbest, genres })
    }

    fn segment(&mut self, id: usize) -> Result<(Segment, NBestList, String)> {
        let c = self.config;
        let (lo, hi) = c.source_length_range;
        let l = self.rng.random_range(lo..=hi);
        let source: Vec<String> = (0..l).map(|_| word('s', self.rng.random_range(0..SOURCE_VOCAB))).collect();
        let r = ((c.verbosity.at(l) * l as f64).round() as usize).max(1);
        let ref0: Vec<String> = (0..r).map(|_| word('w', self.rng.random_range(0..CONTENT_VOCAB))).collect();
        let synonyms: Vec<String> = (0..r).map(|_| word('w', self.rng.random_range(0..CONTENT_VOCAB))).collect();

        // Extra references are always drawn so that the 1- and 4-reference
        // tasks share everything else.
        let mut references = vec![ref0.clone()];
        for k in 1..4 {
            let scale = c.translator_verbosity(k, l) / c.verbosity.at(l);
            references.push(self.paraphrase(&ref0, &synonyms, scale));
        }
        // Candidates centre on the mean translator rather than on the first reference.
        let anchor = ((references.iter().map(Vec::len).sum::<usize>() as f64 / references.len() as f64).round() as usize)
            .max(2);
        references.truncate(c.n_references);

        let span = (hi - lo).max(1) as f64;
        let genre = if self.rng.random_bool(((l - lo) as f64 / span).clamp(0.0, 1.0)) {
            "news"
        } else {
            "web"
        };

        let variants = c.variants();
        let mut hypotheses = Vec::with_capacity(c.candidates_per_segment);
        for rho in c.ratios() {
            // The extremes always bracket the first reference as well as the anchor.
            let target = if rho < 1.0 {
                ((rho * anchor as f64).round() as usize).clamp(1, anchor.min(r) - 1)
            } else if rho > 1.0 {
                ((rho * anchor as f64).round() as usize).max(anchor.max(r) + 1)
            } else {
                anchor
            };
            // Words copied from the reference keep their reference position.
            let mut base: Vec<(String, Option<usize>)> =
                ref0.iter().enumerate().map(|(i, w)| (w.clone(), Some(i))).collect();
            while base.len() > target {
                let i = self.rng.random_range(0..base.len());
                base.remove(i);
            }
            while base.len() < target {
                let i = self.rng.random_range(0..=base.len());
                base.insert(i, (word('x', self.rng.random_range(0..JUNK_VOCAB)), None));
            }
            let content: Vec<usize> = (0..base.len()).filter(|&i| base[i].1.is_some()).collect();
            let mut order = content.clone();
            order.shuffle(&mut self.rng);
            for v in 0..variants {
                let mut tokens: Vec<String> = base.iter().map(|(w, _)| w.clone()).collect();
                let errors = if c.separable {
                    v
                } else {
                    let rate = c.corruption_base + c.corruption_step * v as f64;
                    content.iter().filter(|_| self.rng.random_bool(rate)).count()
                };
                for &i in order.iter().take(errors) {
                    tokens[i] = match base[i].1 {
                        Some(j) if !c.separable && self.rng.random_bool(SYNONYM_ERROR_RATE) => synonyms[j].clone(),
                        _ => word('x', self.rng.random_range(0..JUNK_VOCAB)),
                    };
                }
                let accuracy = 1.0 - errors as f64 / content.len().max(1) as f64;
                let quality = if c.separable {
                    accuracy
                } else {
                    accuracy + self.quality_noise.sample(&mut self.rng)
                };
                let t = tokens.len() as f64;
                let offset = t - c.prior_verbosity * l as f64;
                let mut values = vec![0.0; self.space.len()];
                let idx = |name: &str| self.space.index_of(name).expect("known feature");
                values[idx(WORD_PENALTY)] = -t;
                values[idx(LENGTH_PRIOR)] = -c.prior_sharpness * offset * offset / l as f64;
                values[idx(QUALITY)] = quality;
                for k in 0..c.n_noise_features {
                    values[idx(&noise_name(k))] = self.rng.sample::<f64, _>(rand_distr::StandardNormal);
                }
                hypotheses.push(Hypothesis {
                    segment_id: id,
                    tokens,
                    features: FeatureVector::new(self.space.clone(), values)?,
                });
            }
        }
        Ok((
            Segment::new(id, source, references)?,
            NBestList::new(id, hypotheses)?,
            genre.to_string(),
        ))
    }

    fn paraphrase(&mut self, reference: &[String], synonyms: &[String], scale: f64) -> Vec<String> {
        let r = reference.len() as f64 * scale;
        let jitter = self.rng.random_range(-REFERENCE_JITTER..=REFERENCE_JITTER);
        let target = ((r * (1.0 + jitter)).round() as usize).max(1);
        let mut out: Vec<String> = reference
            .iter()
            .zip(synonyms)
            .map(|(w, syn)| {
                if self.rng.random_bool(SYNONYM_RATE) {
                    syn.clone()
                } else {
                    w.clone()
                }
            })
            .collect();
        while out.len() > target {
            let i = self.rng.random_range(0..out.len());
            out.remove(i);
        }
        while out.len() < target {
            let i = self.rng.random_range(0..=out.len());
            out.insert(i, word('f', self.rng.random_range(0..FILLER_VOCAB)));
        }
        out
    }
}

/// Generates a task; all randomness comes from `config.seed`.
pub fn generate_task(config: &SynthConfig) -> Result<SynthTask> {
    config.validate()?;
    let space = config.feature_space();
    let mut g = Generator {
        config,
        space: space.clone(),
        rng: rng::stream(config.seed, &[]),
        quality_noise: Normal::new(0.0, config.noise_scale).map_err(|e| Error::config(e.to_string()))?,
    };
    let tuning = g.split(config.n_tuning)?;
    let test = g.split(config.n_test)?;
    let mut oracle_weights = FeatureVector::zeros(&space);
    oracle_weights.set(QUALITY, 1.0)?;
    let mut initial_weights = FeatureVector::zeros(&space);
    initial_weights.set(LENGTH_PRIOR, 0.3)?;
    initial_weights.set(QUALITY, 0.3)?;
    for k in 0..config.n_noise_features {
        initial_weights.set(&noise_name(k), 0.1)?;
    }
    Ok(SynthTask {
        config: config.clone(),
        tuning,
        test,
        oracle_weights,
        initial_weights,
    })
}

/// Corpus hypothesis verbosity of the 1-best output as the word-penalty weight
/// sweeps `[-range, range]` in `steps` values, other weights held at `weights`.
pub fn word_penalty_sweep(pool: &CandidatePool, weights: &WeightVector, range: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    let src: usize = pool.pools().iter().zip(crate::optimizers::Decoder::segments(pool)).map(|(_, s)| s.source_len()).sum();
    (0..steps)
        .map(|i| {
            let w_wp = -range + 2.0 * range * i as f64 / (steps.max(2) - 1) as f64;
            let mut w = weights.clone();
            w.set(WORD_PENALTY, w_wp)?;
            let hyp: usize = pool
                .pools()
                .iter()
                .map(|p| Ok(p.nbest().hypotheses()[p.nbest().top_k(&w, 1)?[0]].len()))
                .sum::<Result<usize>>()?;
            Ok((w_wp, hyp as f64 / src as f64))
        })
        .collect()
}

/// Whether the word-penalty weight alone moves the tuning output's verbosity
/// monotonically over at least `[0.8·vb, 1.2·vb]`.
pub fn expressiveness_check(task: &SynthTask) -> Result<bool> {
    let pool = task.tuning.pool(TieRule::default())?;
    let vb = crate::selection::dataset_stats(&task.tuning.segments)?.verbosity;
    let sweep = word_penalty_sweep(&pool, &task.initial_weights, 2.0, 50)?;
    let hvb: Vec<f64> = sweep.iter().map(|p| p.1).collect();
    let monotone = hvb.windows(2).all(|w| w[1] <= w[0]);
    let (lo, hi) = (hvb[hvb.len() - 1], hvb[0]);
    Ok(monotone && lo <= 0.8 * vb && hi >= 1.2 * vb)
}
