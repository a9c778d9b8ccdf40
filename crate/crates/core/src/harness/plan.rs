//! Experiment plans: a flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! task = synth                 # or `files`
//! synth.seed = 3               # any SynthConfig key, prefixed with `synth.`
//! tune = data/tune             # dataset prefixes when task = files
//! test = data/test
//! init = data/init.weights     # optional
//! optimizers = mert,pro
//! metric = plus1               # none | plus1 | plus1-bp | plus1-bp-grounded
//! conditions = shortest,middle,longest
//! fraction = 0.5
//! include_full = false
//! cutoff = true
//! cutoff_fractions = 1.0,0.9,0.8,0.7,0.6,0.5
//! reruns = 3
//! seed = 0
//! iterations = 25
//! nbest_size = 1000
//! pro.max_gap = 10             # or `off`
//! ```
//!
//! The environment variables `TUNESEL_SEED` and `TUNESEL_THREADS` override
//! `seed` and `threads`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{SmoothingScheme, TieRule};
use crate::optimizers::{MertConfig, Optimizer, ProConfig};
use crate::selection::LengthCondition;
use crate::synth::SynthConfig;

pub const SEED_ENV: &str = "TUNESEL_SEED";
pub const THREADS_ENV: &str = "TUNESEL_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub enum TaskSource {
    Synth(SynthConfig),
    Files {
        tune: PathBuf,
        test: PathBuf,
        init: Option<PathBuf>,
    },
}

/// A tuning-set condition of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TuneCondition {
    Subset(LengthCondition),
    Full,
}

impl TuneCondition {
    pub fn name(&self) -> &'static str {
        match self {
            TuneCondition::Subset(c) => c.name(),
            TuneCondition::Full => "full",
        }
    }
}

impl FromStr for TuneCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            Ok(TuneCondition::Full)
        } else {
            s.parse().map(TuneCondition::Subset)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub task: TaskSource,
    pub optimizers: Vec<Optimizer>,
    pub scheme: SmoothingScheme,
    pub tie: TieRule,
    pub conditions: Vec<TuneCondition>,
    pub fraction: f64,
    /// Adds a full-set tuning condition to the grid.
    pub include_full: bool,
    pub cutoff: bool,
    pub cutoff_fractions: Vec<f64>,
    pub reruns: usize,
    pub seed: u64,
    pub iterations: usize,
    pub nbest_size: usize,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            task: TaskSource::Synth(SynthConfig::default()),
            optimizers: vec![Optimizer::Mert(MertConfig::default()), Optimizer::Pro(ProConfig::default())],
            scheme: SmoothingScheme::PlusOne,
            tie: TieRule::Shorter,
            conditions: vec![
                TuneCondition::Subset(LengthCondition::Shortest),
                TuneCondition::Subset(LengthCondition::Middle),
                TuneCondition::Subset(LengthCondition::Longest),
            ],
            fraction: 0.5,
            include_full: false,
            cutoff: false,
            cutoff_fractions: vec![1.0, 0.9, 0.8, 0.7, 0.6, 0.5],
            reruns: 3,
            seed: 0,
            iterations: 25,
            nbest_size: 1000,
            threads: None,
            out_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl ExperimentPlan {
    /// Parses a plan; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut plan = ExperimentPlan::default();
        let mut synth = SynthConfig::default();
        let mut task_kind = "synth".to_string();
        let (mut tune, mut test, mut init) = (None, None, None);
        let mut optimizer_names = vec!["mert".to_string(), "pro".to_string()];
        let mut mert = MertConfig::default();
        let mut pro = ProConfig::default();

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let at = |e: Error| Error::parse(i + 1, e.to_string());
            let path = |v: &str| base.join(v);
            match key {
                "task" => task_kind = value.to_string(),
                "tune" => tune = Some(path(value)),
                "test" => test = Some(path(value)),
                "init" => init = Some(path(value)),
                "optimizers" => optimizer_names = list(value).map(str::to_string).collect(),
                "metric" => plan.scheme = value.parse().map_err(at)?,
                "tie" => plan.tie = value.parse().map_err(at)?,
                "conditions" => {
                    plan.conditions = list(value).map(str::parse).collect::<Result<_>>().map_err(at)?
                }
                "fraction" => plan.fraction = parse(key, value).map_err(at)?,
                "include_full" => plan.include_full = parse(key, value).map_err(at)?,
                "cutoff" => plan.cutoff = parse(key, value).map_err(at)?,
                "cutoff_fractions" => {
                    plan.cutoff_fractions = list(value).map(|v| parse(key, v)).collect::<Result<_>>().map_err(at)?
                }
                "reruns" => plan.reruns = parse(key, value).map_err(at)?,
                "seed" => plan.seed = parse(key, value).map_err(at)?,
                "iterations" => plan.iterations = parse(key, value).map_err(at)?,
                "nbest_size" => plan.nbest_size = parse(key, value).map_err(at)?,
                "threads" => plan.threads = Some(parse(key, value).map_err(at)?),
                "out" => plan.out_dir = Some(path(value)),
                "mert.random_restarts" => mert.random_restarts = parse(key, value).map_err(at)?,
                "mert.random_directions" => mert.random_directions = parse(key, value).map_err(at)?,
                "mert.gamma_window" => mert.gamma_window = parse(key, value).map_err(at)?,
                "pro.max_gap" => {
                    pro.max_score_gap = match value {
                        "off" | "none" => None,
                        v => Some(parse(key, v).map_err(at)?),
                    }
                }
                "pro.min_gap" => pro.min_score_gap = parse(key, value).map_err(at)?,
                "pro.samples" => pro.pairs_sampled_per_segment = parse(key, value).map_err(at)?,
                "pro.kept" => pro.pairs_kept_per_segment = parse(key, value).map_err(at)?,
                "pro.interpolation" => pro.interpolation = parse(key, value).map_err(at)?,
                "pro.steps" => pro.classifier_steps = parse(key, value).map_err(at)?,
                "pro.learning_rate" => pro.classifier_learning_rate = parse(key, value).map_err(at)?,
                k => match k.strip_prefix("synth.") {
                    Some(sk) => synth.set(sk, value).map_err(at)?,
                    None => return Err(Error::parse(i + 1, format!("unknown key `{k}`"))),
                },
            }
        }

        plan.task = match task_kind.as_str() {
            "synth" => TaskSource::Synth(synth),
            "files" => TaskSource::Files {
                tune: tune.ok_or_else(|| Error::config("task = files needs `tune`"))?,
                test: test.ok_or_else(|| Error::config("task = files needs `test`"))?,
                init,
            },
            other => return Err(Error::config(format!("unknown task `{other}`"))),
        };
        plan.optimizers = optimizer_names
            .iter()
            .map(|n| match n.as_str() {
                "mert" => Ok(Optimizer::Mert(mert.clone())),
                "pro" => Ok(Optimizer::Pro(pro.clone())),
                other => Err(Error::config(format!("unknown optimizer `{other}`"))),
            })
            .collect::<Result<_>>()?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        ExperimentPlan::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Applies `TUNESEL_SEED` and `TUNESEL_THREADS` if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse(SEED_ENV, v.trim())?;
        }
        if let Ok(v) = std::env::var(THREADS_ENV) {
            self.threads = Some(parse(THREADS_ENV, v.trim())?);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.optimizers.is_empty() {
            return Err(Error::config("plan lists no optimizers"));
        }
        if self.conditions.is_empty() && !self.include_full {
            return Err(Error::config("plan lists no tuning conditions"));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::config("fraction must lie in (0, 1]"));
        }
        if self.cutoff_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::config("cutoff fractions must lie in (0, 1]"));
        }
        if self.reruns == 0 || self.iterations == 0 || self.nbest_size == 0 {
            return Err(Error::config("reruns, iterations and nbest_size must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be positive"));
        }
        for o in &self.optimizers {
            match o {
                Optimizer::Mert(c) => c.validate()?,
                Optimizer::Pro(c) => c.validate()?,
            }
        }
        if let TaskSource::Synth(c) = &self.task {
            c.validate()?;
        }
        Ok(())
    }

    /// Tuning conditions in grid order, with `full` last when enabled.
    pub fn tune_conditions(&self) -> Vec<TuneCondition> {
        let mut out: Vec<TuneCondition> = self
            .conditions
            .iter()
            .copied()
            .filter(|c| *c != TuneCondition::Full)
            .collect();
        if self.include_full || self.conditions.contains(&TuneCondition::Full) {
            out.push(TuneCondition::Full);
        }
        out
    }
}
