use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tunesel::corpus::{
    parse_nbest, parse_references, parse_weights, read_dataset, tokenize, write_dataset, write_weights, Dataset,
    FeatureVector, Hypothesis, NBestList, Segment,
};
use tunesel::harness::{fmt_num, run_experiment, ExperimentPlan};
use tunesel::metrics::{segment_stats, sentence_bleu, BleuReport, BleuStats, SmoothingScheme, TieRule};
use tunesel::optimizers::{evaluate, run_tuning, CandidatePool, Evaluation, MertConfig, Optimizer, ProConfig, TuningConfig};
use tunesel::selection::{dataset_stats, select_by_length, LengthCondition, SelectionSpec};
use tunesel::synth::{expressiveness_check, generate_task, SynthConfig};

#[derive(Parser)]
#[command(name = "tunesel", version, about = "Log-linear weight tuning over n-best lists, with length-based tuning-set selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus BLEU of a hypothesis file against references, as CSV.
    Score(ScoreArgs),
    /// Tune weights with MERT or PRO over a fixed candidate pool.
    Tune(TuneArgs),
    /// Write a length-based subset of a dataset.
    Select(SelectArgs),
    /// Dataset length statistics as CSV.
    Stats(StatsArgs),
    /// Generate a synthetic task.
    Synth(SynthArgs),
    /// Run an experiment plan and write its reports.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
#[group(id = "hyps", required = true, multiple = false)]
struct HypSource {
    /// N-best file; the first hypothesis of each segment is scored.
    #[arg(long)]
    nbest_top1: Option<PathBuf>,
    /// One tokenized hypothesis per line.
    #[arg(long)]
    plain: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    hyps: HypSource,
    #[arg(long, num_args = 1.., required = true)]
    refs: Vec<PathBuf>,
    /// Also report the mean sentence-level score under this scheme.
    #[arg(long)]
    sentence_scheme: Option<SmoothingScheme>,
}

#[derive(Args)]
struct TuneArgs {
    /// Tuning dataset prefix (needs PREFIX.src, PREFIX.ref0.., PREFIX.nbest).
    #[arg(long)]
    tune: PathBuf,
    /// Optional test dataset prefix evaluated with the final weights.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Initial weights; defaults to 1 for every feature.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value = "pro", value_parser = ["mert", "pro"])]
    optimizer: String,
    #[arg(long, default_value = "plus1")]
    metric: SmoothingScheme,
    #[arg(long, default_value_t = 25)]
    iterations: usize,
    #[arg(long, default_value_t = 1000)]
    nbest_size: usize,
    #[arg(long, default_value_t = 3)]
    reruns: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest BLEU+1 gap (points) of a PRO pair, or `off`.
    #[arg(long, default_value = "10")]
    pro_max_gap: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, value_parser = ["shortest", "middle", "longest", "random", "cutoff"])]
    condition: String,
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Append one `segment,source_length,reference_length` row per segment.
    #[arg(long)]
    per_segment: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// `key=value` file of generator settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_tuning: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    references: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    verbosity_intercept: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    verbosity_slope: Option<f64>,
    #[arg(long)]
    separable: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Output directory; overrides `out` in the plan.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn score(args: ScoreArgs) -> Result<()> {
    let refs = args.refs.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
    let references = parse_references(&refs)?;
    let hyps: Vec<Vec<String>> = match (&args.hyps.nbest_top1, &args.hyps.plain) {
        (Some(p), _) => {
            let lists = parse_nbest(&read(p)?)?;
            let mut out = vec![None; references.len()];
            for l in lists {
                let slot = out
                    .get_mut(l.segment_id())
                    .with_context(|| format!("n-best segment {} has no reference", l.segment_id()))?;
                *slot = Some(l.hypotheses()[0].tokens.clone());
            }
            out.into_iter()
                .enumerate()
                .map(|(i, h)| h.with_context(|| format!("no hypothesis for segment {i}")))
                .collect::<Result<_>>()?
        }
        (None, Some(p)) => read(p)?.lines().map(tokenize).collect(),
        (None, None) => unreachable!("clap requires one hypothesis source"),
    };
    if hyps.len() != references.len() {
        bail!("{} hypotheses for {} reference lines", hyps.len(), references.len());
    }
    let per_segment: Vec<BleuStats> = hyps
        .iter()
        .zip(&references)
        .map(|(h, r)| segment_stats(h, r, TieRule::Shorter))
        .collect();
    let total: BleuStats = per_segment.iter().sum();
    let r = BleuReport::from_stats(&total);
    let mut header = "bleu,bp,ratio,hyp_len,ref_len,p1,p2,p3,p4".to_string();
    let mut row = format!(
        "{},{},{},{},{},{}",
        fmt_num(r.bleu),
        fmt_num(r.brevity_penalty),
        fmt_num(r.length_ratio),
        r.hyp_len,
        r.ref_len,
        r.precisions.map(fmt_num).join(",")
    );
    if let Some(scheme) = args.sentence_scheme {
        let mean = per_segment.iter().map(|s| sentence_bleu(s, scheme)).sum::<f64>() / per_segment.len() as f64;
        let _ = write!(header, ",sentence_{}", scheme.name());
        let _ = write!(row, ",{}", fmt_num(mean));
    }
    println!("{header}\n{row}");
    Ok(())
}

fn load_pool(prefix: &Path) -> Result<CandidatePool> {
    let d = read_dataset(prefix)?;
    let lists = d
        .nbest
        .with_context(|| format!("{}.nbest is required", prefix.display()))?;
    Ok(CandidatePool::from_lists(d.segments, lists, TieRule::Shorter)?)
}

fn eval_cells(e: &Evaluation) -> String {
    [e.bleu, e.brevity_penalty, e.length_ratio, e.hypothesis_verbosity]
        .map(fmt_num)
        .join(",")
}

fn tune(args: TuneArgs) -> Result<()> {
    let pool = load_pool(&args.tune)?;
    let test = args.test.as_deref().map(load_pool).transpose()?;
    let space = pool.pools()[0].nbest().feature_space().clone();
    let initial = match &args.init {
        Some(p) => {
            let w = parse_weights(&read(p)?)?;
            FeatureVector::from_pairs_in(&space, w.iter().map(|(n, v)| (n.to_string(), v)))?
        }
        None => FeatureVector::new(space.clone(), vec![1.0; space.len()])?,
    };
    let optimizer = match args.optimizer.as_str() {
        "mert" => Optimizer::Mert(MertConfig::default()),
        _ => Optimizer::Pro(ProConfig {
            max_score_gap: match args.pro_max_gap.as_str() {
                "off" | "none" => None,
                v => Some(v.parse().with_context(|| format!("invalid --pro-max-gap `{v}`"))?),
            },
            ..ProConfig::default()
        }),
    };
    let config = TuningConfig {
        max_iterations: args.iterations,
        nbest_size: args.nbest_size,
        reruns: args.reruns,
        seed: args.seed,
        sentence_scheme: args.metric,
        ..TuningConfig::default()
    };
    let run = run_tuning(&pool, &initial, &optimizer, &config)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let names: Vec<String> = space.names().to_vec();
    let mut summary = String::from("# tunesel tune-summary v1\nrerun,iterations,tune_bleu,tune_bp,tune_lr,tune_hvb");
    if test.is_some() {
        summary.push_str(",test_bleu,test_bp,test_lr,test_hvb");
    }
    summary.push('\n');
    for r in &run.reruns {
        fs::write(args.out_dir.join(format!("weights.rerun{}.txt", r.rerun)), write_weights(&r.weights))?;
        let mut trace = format!(
            "# tunesel trace v1\niteration,bleu,bp,lr,hvb,accumulated_hypotheses,{}\n",
            names.join(",")
        );
        for it in &r.trace {
            let _ = writeln!(
                trace,
                "{},{},{},{}",
                it.iteration,
                eval_cells(&it.tuning),
                it.accumulated_hypotheses,
                it.weights.values().iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
            );
        }
        fs::write(args.out_dir.join(format!("trace.rerun{}.csv", r.rerun)), trace)?;
        let last = r.trace.last().map(|t| t.tuning).expect("at least one iteration");
        let _ = write!(summary, "{},{},{}", r.rerun, r.trace.len(), eval_cells(&last));
        if let Some(t) = &test {
            let _ = write!(summary, ",{}", eval_cells(&evaluate(t, &r.weights)?));
        }
        summary.push('\n');
    }
    fs::write(args.out_dir.join("summary.csv"), summary)?;
    eprintln!("wrote {} reruns to {}", run.reruns.len(), args.out_dir.display());
    Ok(())
}

fn select(args: SelectArgs) -> Result<()> {
    let mut condition: LengthCondition = args.condition.parse()?;
    if let LengthCondition::Random { seed } = &mut condition {
        *seed = args.seed;
    }
    let d = read_dataset(&args.input)?;
    let picked = select_by_length(&d.segments, &SelectionSpec::new(condition, args.fraction)?)?;
    let segments = picked
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            let s = &d.segments[old];
            Segment::new(new, s.source.clone(), s.references.clone())
        })
        .collect::<tunesel::Result<Vec<_>>>()?;
    let nbest = d
        .nbest
        .map(|lists| -> Result<Vec<NBestList>> {
            let mut out = Vec::new();
            for (new, &old) in picked.iter().enumerate() {
                if let Some(l) = lists.iter().find(|l| l.segment_id() == old) {
                    let hyps = l
                        .hypotheses()
                        .iter()
                        .map(|h| Hypothesis {
                            segment_id: new,
                            ..h.clone()
                        })
                        .collect();
                    out.push(NBestList::new(new, hyps)?);
                }
            }
            Ok(out)
        })
        .transpose()?;
    let genres = d.genres.map(|g| picked.iter().map(|&i| g[i].clone()).collect());
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_dataset(&args.out, &Dataset { segments, nbest, genres })?;
    eprintln!("selected {} of {} segments", picked.len(), d.segments.len());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let d = read_dataset(&args.input)?;
    let s = dataset_stats(&d.segments)?;
    println!("n_segments,n_references,n_source_tokens,mean_source_length,vb");
    println!(
        "{},{},{},{},{}",
        s.n_segments,
        s.n_references,
        s.n_source_tokens,
        fmt_num(s.mean_source_length),
        fmt_num(s.verbosity)
    );
    if args.per_segment {
        println!("segment,source_length,mean_reference_length");
        for seg in &d.segments {
            let lens = seg.reference_lengths();
            let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
            println!("{},{},{}", seg.id, seg.source_len(), fmt_num(mean));
        }
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut config = SynthConfig::default();
    if let Some(p) = &args.config {
        for (i, line) in read(p)?.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", p.display(), i + 1))?;
            config.set(k.trim(), v.trim())?;
        }
    }
    if args.separable {
        config = SynthConfig {
            n_tuning: config.n_tuning,
            n_test: config.n_test,
            ..SynthConfig::separable(config.seed)
        };
    }
    let overrides: [(&str, Option<String>); 6] = [
        ("n_tuning", args.n_tuning.map(|v| v.to_string())),
        ("n_test", args.n_test.map(|v| v.to_string())),
        ("n_references", args.references.map(|v| v.to_string())),
        ("verbosity_intercept", args.verbosity_intercept.map(|v| v.to_string())),
        ("verbosity_slope", args.verbosity_slope.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            config.set(k, &v)?;
        }
    }
    let task = generate_task(&config)?;
    task.write(&args.out)?;
    eprintln!(
        "wrote {} tuning and {} test segments to {}; expressive: {}",
        task.tuning.segments.len(),
        task.test.segments.len(),
        args.out.display(),
        expressiveness_check(&task)?
    );
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut plan = ExperimentPlan::from_file(&args.plan)?;
    plan.apply_env()?;
    let out = args
        .out
        .or_else(|| plan.out_dir.clone())
        .context("no output directory: pass --out or set `out` in the plan")?;
    let (grid, sweep) = run_experiment(&plan, &out)?;
    let failed = grid.cells.iter().filter(|c| c.outcome.is_err()).count()
        + sweep.as_ref().map_or(0, |s| s.failures.len());
    eprintln!(
        "{} grid cells ({} failed) written to {}",
        grid.cells.len(),
        failed,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(a) => score(a),
        Command::Tune(a) => tune(a),
        Command::Select(a) => select(a),
        Command::Stats(a) => stats(a),
        Command::Synth(a) => synth(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
