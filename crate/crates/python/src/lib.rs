//! Python bindings: BLEU scoring, length selection, correlation helpers,
//! synthetic task generation and experiment runs.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tunesel::corpus::tokenize;
use tunesel::harness::{run_experiment as run_plan, ExperimentPlan, ReportRow};
use tunesel::metrics::{segment_stats, sentence_bleu as sentence_score, BleuReport, BleuStats, SmoothingScheme, TieRule};
use tunesel::selection::{select_by_lengths, LengthCondition, SelectionSpec};
use tunesel::synth::{expressiveness_check, generate_task, SynthConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(value: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(value_error)
}

fn report_dict<'py>(py: Python<'py>, report: &BleuReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("bleu", report.bleu)?;
    d.set_item("bp", report.brevity_penalty)?;
    d.set_item("ratio", report.length_ratio)?;
    d.set_item("hyp_len", report.hyp_len)?;
    d.set_item("ref_len", report.ref_len)?;
    d.set_item("precisions", report.precisions.to_vec())?;
    Ok(d)
}

/// Corpus BLEU of whitespace-tokenized hypotheses; `references[i]` holds the references of segment `i`.
#[pyfunction]
#[pyo3(signature = (hypotheses, references, tie = "shorter"))]
fn corpus_bleu<'py>(
    py: Python<'py>,
    hypotheses: Vec<String>,
    references: Vec<Vec<String>>,
    tie: &str,
) -> PyResult<Bound<'py, PyDict>> {
    if hypotheses.len() != references.len() {
        return Err(value_error(format!(
            "{} hypotheses but {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    let tie: TieRule = parse(tie)?;
    let mut total = BleuStats::default();
    for (h, refs) in hypotheses.iter().zip(&references) {
        if refs.is_empty() {
            return Err(value_error("every segment needs at least one reference"));
        }
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        total += segment_stats(&tokenize(h), &refs, tie);
    }
    report_dict(py, &BleuReport::from_stats(&total))
}

/// Sentence-level score under `scheme` (`none`, `plus1`, `plus1-bp`, `plus1-bp-grounded`).
#[pyfunction]
#[pyo3(signature = (hypothesis, references, scheme = "plus1", tie = "shorter"))]
fn sentence_bleu(hypothesis: &str, references: Vec<String>, scheme: &str, tie: &str) -> PyResult<f64> {
    if references.is_empty() {
        return Err(value_error("at least one reference is required"));
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let stats = segment_stats(&tokenize(hypothesis), &refs, parse(tie)?);
    Ok(sentence_score(&stats, parse::<SmoothingScheme>(scheme)?))
}

/// Indices (in input order) of the subset chosen by `condition` over source lengths.
#[pyfunction]
#[pyo3(signature = (lengths, condition, fraction = 0.5, seed = 0))]
fn select_by_length(lengths: Vec<usize>, condition: &str, fraction: f64, seed: u64) -> PyResult<Vec<usize>> {
    let condition = match parse::<LengthCondition>(condition)? {
        LengthCondition::Random { .. } => LengthCondition::Random { seed },
        c => c,
    };
    let spec = SelectionSpec::new(condition, fraction).map_err(value_error)?;
    select_by_lengths(&lengths, &spec).map_err(value_error)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    tunesel::selection::pearson(&x, &y).map_err(value_error)
}

#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    tunesel::selection::kendall_tau(&x, &y).map_err(value_error)
}

/// Writes a synthetic task to `out_dir`; `config` overrides generator keys.
/// Returns the effective configuration and whether the word penalty can move
/// the output length across ±20% of the tuning verbosity.
#[pyfunction]
#[pyo3(signature = (out_dir, config = None))]
fn synth<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    config: Option<Vec<(String, String)>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut c = SynthConfig::default();
    for (k, v) in config.unwrap_or_default() {
        c.set(&k, &v).map_err(value_error)?;
    }
    let (pairs, expressive) = py
        .detach(|| -> tunesel::Result<_> {
            let task = generate_task(&c)?;
            task.write(&out_dir)?;
            Ok((c.to_pairs(), expressiveness_check(&task)?))
        })
        .map_err(value_error)?;
    let d = PyDict::new(py);
    for (k, v) in pairs {
        d.set_item(k, v)?;
    }
    d.set_item("expressive", expressive)?;
    Ok(d)
}

fn row_dict<'py>(py: Python<'py>, r: &ReportRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("optimizer", &r.optimizer)?;
    d.set_item("tune_condition", &r.tune_condition)?;
    d.set_item("test_condition", &r.test_condition)?;
    d.set_item("reruns", r.reruns)?;
    d.set_item("bleu", r.bleu.mean)?;
    d.set_item("bleu_sd", r.bleu.sd)?;
    d.set_item("bp", r.brevity_penalty.mean)?;
    d.set_item("hvb", r.hypothesis_verbosity.mean)?;
    d.set_item("lr", r.length_ratio.mean)?;
    d.set_item("tune_vb", r.tune_verbosity)?;
    d.set_item("tune_mean_source_length", r.tune_mean_source_length)?;
    d.set_item("status", &r.status)?;
    Ok(d)
}

/// Runs the experiment described by plan text (`key = value` lines) and
/// writes its reports to `out_dir`. Relative paths in the plan resolve
/// against `base_dir`. Returns the summary rows.
#[pyfunction]
#[pyo3(signature = (plan, out_dir, base_dir = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    plan: &str,
    out_dir: PathBuf,
    base_dir: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let base = base_dir.unwrap_or_else(|| PathBuf::from("."));
    let plan = ExperimentPlan::parse(plan, &base).map_err(value_error)?;
    let (grid, _) = py.detach(|| run_plan(&plan, &out_dir)).map_err(value_error)?;
    grid.rows().iter().map(|r| row_dict(py, r)).collect()
}

#[pymodule]
fn tunesel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(corpus_bleu, m)?)?;
    m.add_function(wrap_pyfunction!(sentence_bleu, m)?)?;
    m.add_function(wrap_pyfunction!(select_by_length, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
