//! Tuning grids and cutoff sweeps over a loaded task.

use rayon::prelude::*;

use super::plan::{ExperimentPlan, TaskSource, TuneCondition};
use crate::corpus::{parse_weights, read_dataset, FeatureVector, WeightVector};
use crate::error::{Error, Result};
use crate::metrics::BleuStats;
use crate::optimizers::{run_tuning, CandidatePool, Evaluation, Optimizer, ProConfig, TuningConfig, TuningRun};
use crate::selection::{
    dataset_stats, kl_divergence, mean, select_by_length, std_dev, Distribution, LengthCondition, SelectionSpec,
};
use crate::synth::generate_task;

/// Tuning and test pools plus the starting weights.
#[derive(Clone, Debug)]
pub struct LoadedTask {
    pub tuning: CandidatePool,
    pub test: CandidatePool,
    pub initial: WeightVector,
    pub tuning_genres: Option<Vec<String>>,
    pub test_genres: Option<Vec<String>>,
}

impl LoadedTask {
    pub fn load(plan: &ExperimentPlan) -> Result<Self> {
        match &plan.task {
            TaskSource::Synth(config) => {
                let task = generate_task(config)?;
                Ok(LoadedTask {
                    tuning: task.tuning.pool(plan.tie)?,
                    test: task.test.pool(plan.tie)?,
                    initial: task.initial_weights,
                    tuning_genres: Some(task.tuning.genres),
                    test_genres: Some(task.test.genres),
                })
            }
            TaskSource::Files { tune, test, init } => {
                let load = |prefix: &std::path::Path| -> Result<(CandidatePool, Option<Vec<String>>)> {
                    let d = read_dataset(prefix)?;
                    let lists = d
                        .nbest
                        .ok_or_else(|| Error::config(format!("{} has no .nbest file", prefix.display())))?;
                    Ok((CandidatePool::from_lists(d.segments, lists, plan.tie)?, d.genres))
                };
                let (tuning, tuning_genres) = load(tune)?;
                let (test, test_genres) = load(test)?;
                let space = tuning.pools()[0].nbest().feature_space().clone();
                let initial = match init {
                    Some(p) => {
                        let text = std::fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
                        let w = parse_weights(&text)?;
                        FeatureVector::from_pairs_in(&space, w.iter().map(|(n, v)| (n.to_string(), v)))?
                    }
                    None => FeatureVector::new(space.clone(), vec![1.0; space.len()])?,
                };
                Ok(LoadedTask {
                    tuning,
                    test,
                    initial,
                    tuning_genres,
                    test_genres,
                })
            }
        }
    }
}

/// Test conditions evaluated for every tuned weight vector.
pub const TEST_CONDITIONS: [&str; 4] = ["short", "mid", "long", "full"];

/// The test pool with its condition subsets; one 1-best pass per weight vector
/// serves every condition.
#[derive(Clone, Debug)]
pub struct TestBench {
    pool: CandidatePool,
    subsets: Vec<Vec<usize>>,
    source_lengths: Vec<u64>,
}

impl TestBench {
    pub fn new(pool: CandidatePool, fraction: f64) -> Result<Self> {
        let segments = crate::optimizers::Decoder::segments(&pool);
        let pick = |c| select_by_length(segments, &SelectionSpec::new(c, fraction)?);
        let subsets = vec![
            pick(LengthCondition::Shortest)?,
            pick(LengthCondition::Middle)?,
            pick(LengthCondition::Longest)?,
            (0..segments.len()).collect(),
        ];
        let source_lengths = segments.iter().map(|s| s.source_len() as u64).collect();
        Ok(TestBench {
            pool,
            subsets,
            source_lengths,
        })
    }

    /// One evaluation per entry of [`TEST_CONDITIONS`].
    pub fn evaluate(&self, weights: &WeightVector) -> Result<Vec<Evaluation>> {
        let top1 = self.pool.top1_per_segment(weights)?;
        Ok(self
            .subsets
            .iter()
            .map(|idx| {
                let stats: BleuStats = idx.iter().map(|&i| top1[i]).sum();
                let src: u64 = idx.iter().map(|&i| self.source_lengths[i]).sum();
                Evaluation::from_stats(stats, src)
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        MeanSd {
            mean: mean(values),
            sd: std_dev(values),
        }
    }

    fn failed() -> Self {
        MeanSd {
            mean: f64::NAN,
            sd: f64::NAN,
        }
    }
}

/// Length profile of a tuning subset.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetProfile {
    pub condition: String,
    pub n_segments: usize,
    pub n_source_tokens: usize,
    pub mean_source_length: f64,
    pub verbosity: f64,
    /// Genre divergence of the subset from the test set, when genres are known.
    pub genre_kl: Option<f64>,
}

/// One grid cell: an optimizer tuned on one condition, evaluated on every test condition.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub optimizer: &'static str,
    pub profile: SubsetProfile,
    /// `evaluations[rerun][test condition]`, or the error that aborted the cell.
    pub outcome: std::result::Result<CellRuns, String>,
}

#[derive(Clone, Debug)]
pub struct CellRuns {
    pub run: TuningRun,
    pub evaluations: Vec<Vec<Evaluation>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub optimizer: String,
    pub tune_condition: String,
    pub test_condition: String,
    pub reruns: usize,
    pub bleu: MeanSd,
    pub brevity_penalty: MeanSd,
    pub hypothesis_verbosity: MeanSd,
    pub length_ratio: MeanSd,
    pub tune_verbosity: f64,
    pub tune_mean_source_length: f64,
    pub status: String,
}

impl CellResult {
    pub fn rows(&self) -> Vec<ReportRow> {
        TEST_CONDITIONS
            .iter()
            .enumerate()
            .map(|(t, name)| {
                let base = ReportRow {
                    optimizer: self.optimizer.to_string(),
                    tune_condition: self.profile.condition.clone(),
                    test_condition: name.to_string(),
                    reruns: 0,
                    bleu: MeanSd::failed(),
                    brevity_penalty: MeanSd::failed(),
                    hypothesis_verbosity: MeanSd::failed(),
                    length_ratio: MeanSd::failed(),
                    tune_verbosity: self.profile.verbosity,
                    tune_mean_source_length: self.profile.mean_source_length,
                    status: String::new(),
                };
                match &self.outcome {
                    Err(e) => ReportRow {
                        status: format!("failed: {e}"),
                        ..base
                    },
                    Ok(runs) => {
                        let col = |f: fn(&Evaluation) -> f64| -> MeanSd {
                            MeanSd::of(&runs.evaluations.iter().map(|e| f(&e[t])).collect::<Vec<_>>())
                        };
                        ReportRow {
                            reruns: runs.evaluations.len(),
                            bleu: col(|e| e.bleu),
                            brevity_penalty: col(|e| e.brevity_penalty),
                            hypothesis_verbosity: col(|e| e.hypothesis_verbosity),
                            length_ratio: col(|e| e.length_ratio),
                            status: "ok".to_string(),
                            ..base
                        }
                    }
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
}

impl GridResult {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.cells.iter().flat_map(CellResult::rows).collect()
    }

    pub fn cell(&self, optimizer: &str, condition: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.optimizer == optimizer && c.profile.condition == condition)
    }
}

fn tuning_config(plan: &ExperimentPlan) -> TuningConfig {
    TuningConfig {
        max_iterations: plan.iterations,
        nbest_size: plan.nbest_size,
        reruns: plan.reruns,
        seed: plan.seed,
        sentence_scheme: plan.scheme,
        ..TuningConfig::default()
    }
}

fn subset_indices(task: &LoadedTask, condition: TuneCondition, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    let segments = crate::optimizers::Decoder::segments(&task.tuning);
    match condition {
        TuneCondition::Full => Ok((0..segments.len()).collect()),
        TuneCondition::Subset(LengthCondition::Random { .. }) => {
            select_by_length(segments, &SelectionSpec::new(LengthCondition::Random { seed }, fraction)?)
        }
        TuneCondition::Subset(c) => select_by_length(segments, &SelectionSpec::new(c, fraction)?),
    }
}

fn profile(task: &LoadedTask, name: String, indices: &[usize]) -> Result<SubsetProfile> {
    let segments: Vec<_> = indices
        .iter()
        .map(|&i| crate::optimizers::Decoder::segments(&task.tuning)[i].clone())
        .collect();
    let stats = dataset_stats(&segments)?;
    let genre_kl = match (&task.tuning_genres, &task.test_genres) {
        (Some(tune), Some(test)) => {
            let mut categories: Vec<&str> = tune.iter().chain(test).map(String::as_str).collect();
            categories.sort_unstable();
            categories.dedup();
            let picked: Vec<&String> = indices.iter().map(|&i| &tune[i]).collect();
            let p = Distribution::from_labels(&categories, &picked.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let q = Distribution::from_labels(&categories, test);
            Some(kl_divergence(&p, &q, 1e-6)?)
        }
        _ => None,
    };
    Ok(SubsetProfile {
        condition: name,
        n_segments: stats.n_segments,
        n_source_tokens: stats.n_source_tokens,
        mean_source_length: stats.mean_source_length,
        verbosity: stats.verbosity,
        genre_kl,
    })
}

fn tune_and_test(
    task: &LoadedTask,
    bench: &TestBench,
    indices: &[usize],
    optimizer: &Optimizer,
    config: &TuningConfig,
) -> Result<CellRuns> {
    let pool = task.tuning.subset(indices)?;
    let run = run_tuning(&pool, &task.initial, optimizer, config)?;
    let evaluations = run
        .reruns
        .iter()
        .map(|r| bench.evaluate(&r.weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(CellRuns { run, evaluations })
}

/// Tunes every optimizer on every tuning condition and evaluates on every test condition.
///
/// Cells run concurrently; results come back in plan order (optimizers outer,
/// conditions inner). A failing cell is reported, not propagated.
pub fn run_grid(plan: &ExperimentPlan, task: &LoadedTask) -> Result<GridResult> {
    plan.validate()?;
    let bench = TestBench::new(task.test.clone(), plan.fraction)?;
    let config = tuning_config(plan);
    let mut jobs = Vec::new();
    for optimizer in &plan.optimizers {
        for condition in plan.tune_conditions() {
            let indices = subset_indices(task, condition, plan.fraction, plan.seed)?;
            let prof = profile(task, condition.name().to_string(), &indices)?;
            jobs.push((optimizer, indices, prof));
        }
    }
    let cells = jobs
        .into_par_iter()
        .map(|(optimizer, indices, profile)| CellResult {
            optimizer: optimizer.name(),
            profile,
            outcome: tune_and_test(task, &bench, &indices, optimizer, &config).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(GridResult { cells })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffRow {
    pub fraction: f64,
    pub rerun: usize,
    /// Full test set.
    pub evaluation: Evaluation,
    pub weights: WeightVector,
}

#[derive(Clone, Debug)]
pub struct CutoffResult {
    pub rows: Vec<CutoffRow>,
    /// Fractions whose tuning failed, with the error.
    pub failures: Vec<(f64, String)>,
}

impl CutoffResult {
    /// Mean test BP and BLEU per fraction, in sweep order.
    pub fn means(&self) -> Vec<(f64, f64, f64)> {
        let mut fractions: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !fractions.contains(&r.fraction) {
                fractions.push(r.fraction);
            }
        }
        fractions
            .into_iter()
            .map(|f| {
                let rows: Vec<&CutoffRow> = self.rows.iter().filter(|r| r.fraction == f).collect();
                let bp: Vec<f64> = rows.iter().map(|r| r.evaluation.brevity_penalty).collect();
                let bleu: Vec<f64> = rows.iter().map(|r| r.evaluation.bleu).collect();
                (f, mean(&bp), mean(&bleu))
            })
            .collect()
    }
}

/// PRO tuned on the longest `f` of the tuning set for each cutoff fraction.
pub fn run_cutoff_sweep(plan: &ExperimentPlan, task: &LoadedTask) -> Result<CutoffResult> {
    plan.validate()?;
    let optimizer = plan
        .optimizers
        .iter()
        .find(|o| matches!(o, Optimizer::Pro(_)))
        .cloned()
        .unwrap_or_else(|| Optimizer::Pro(ProConfig::default()));
    let bench = TestBench::new(task.test.clone(), plan.fraction)?;
    let config = tuning_config(plan);
    let full = TEST_CONDITIONS.len() - 1;
    let outcomes: Vec<(f64, Result<CellRuns>)> = plan
        .cutoff_fractions
        .par_iter()
        .map(|&f| {
            let indices = subset_indices(task, TuneCondition::Subset(LengthCondition::CutoffLongest), f, plan.seed);
            (f, indices.and_then(|idx| tune_and_test(task, &bench, &idx, &optimizer, &config)))
        })
        .collect();
    let mut result = CutoffResult {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (fraction, outcome) in outcomes {
        match outcome {
            Ok(runs) => {
                for (rerun, (r, e)) in runs.run.reruns.iter().zip(&runs.evaluations).enumerate() {
                    result.rows.push(CutoffRow {
                        fraction,
                        rerun,
                        evaluation: e[full],
                        weights: r.weights.clone(),
                    });
                }
            }
            Err(e) => result.failures.push((fraction, e.to_string())),
        }
    }
    Ok(result)
}

/// Runs `f` inside a thread pool sized by `plan.threads`, or the global pool.
pub fn with_threads<T: Send>(plan: &ExperimentPlan, f: impl FnOnce() -> T + Send) -> Result<T> {
    match plan.threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
