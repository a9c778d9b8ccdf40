//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line.
//!
//! Run with `cargo test -p tunesel --test acceptance -- --nocapture --test-threads=1`
//! to see the lines in order.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tunesel::corpus::{tokenize, FeatureSpace, FeatureVector, Hypothesis, NBestList, Segment};
use tunesel::harness::{run_cutoff_sweep, run_grid, CutoffResult, ExperimentPlan, GridResult, LoadedTask, TaskSource, TuneCondition};
use tunesel::metrics::{corpus_bleu, segment_stats, sentence_bleu, BleuStats, SmoothingScheme, TieRule};
use tunesel::optimizers::{mert_line_search, run_tuning, Optimizer, ProConfig, ScoredList, TuningConfig};
use tunesel::selection::{kendall_tau, pearson, spearman, std_dev};
use tunesel::synth::{generate_task, SynthConfig, VerbosityModel};

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("[{}] criterion {id:>2}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// Brute-force BLEU oracle: windows compared element by element, no hashing.

fn count_in(tokens: &[String], gram: &[String]) -> u64 {
    if gram.len() > tokens.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| tokens[i..i + gram.len()] == *gram)
        .count() as u64
}

fn oracle_counts(hyp: &[String], refs: &[Vec<String>], n: usize) -> (u64, u64) {
    if hyp.len() < n {
        return (0, 0);
    }
    let total = (hyp.len() - n + 1) as u64;
    let mut matched = 0;
    for i in 0..=hyp.len() - n {
        let gram = &hyp[i..i + n];
        // count each distinct n-gram once, at its first occurrence
        if (0..i).any(|j| hyp[j..j + n] == *gram) {
            continue;
        }
        let in_hyp = count_in(hyp, gram);
        let in_refs = refs.iter().map(|r| count_in(r, gram)).max().unwrap_or(0);
        matched += in_hyp.min(in_refs);
    }
    (matched, total)
}

fn oracle_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    let mut best = refs[0].len();
    for r in refs {
        let (d, bd) = ((r.len() as i64 - c as i64).abs(), (best as i64 - c as i64).abs());
        if d < bd || (d == bd && r.len() < best) {
            best = r.len();
        }
    }
    best
}

fn oracle_bp(c: f64, r: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if c >= r {
        1.0
    } else {
        (1.0 - r / c).exp()
    }
}

/// `(m, t, c, r)` summed over segments.
fn oracle_totals(cases: &[(Vec<String>, Vec<Vec<String>>)]) -> ([u64; 4], [u64; 4], usize, usize) {
    let (mut m, mut t, mut c, mut r) = ([0; 4], [0; 4], 0, 0);
    for (hyp, refs) in cases {
        for n in 1..=4 {
            let (a, b) = oracle_counts(hyp, refs, n);
            m[n - 1] += a;
            t[n - 1] += b;
        }
        c += hyp.len();
        r += oracle_ref_len(hyp.len(), refs);
    }
    (m, t, c, r)
}

fn oracle_corpus_bleu(cases: &[(Vec<String>, Vec<Vec<String>>)]) -> f64 {
    let (m, t, c, r) = oracle_totals(cases);
    if (0..4).any(|i| m[i] == 0 || t[i] == 0) {
        return 0.0;
    }
    let log_p: f64 = (0..4).map(|i| (m[i] as f64 / t[i] as f64).ln()).sum::<f64>() / 4.0;
    oracle_bp(c as f64, r as f64) * log_p.exp()
}

fn oracle_bleu_plus_one(hyp: &[String], refs: &[Vec<String>]) -> f64 {
    let (m, t, c, r) = oracle_totals(&[(hyp.to_vec(), refs.to_vec())]);
    if c == 0 || m[0] == 0 {
        return 0.0;
    }
    let mut log_p = (m[0] as f64 / t[0] as f64).ln();
    for i in 1..4 {
        log_p += ((m[i] + 1) as f64 / (t[i] + 1) as f64).ln();
    }
    oracle_bp(c as f64, r as f64) * (log_p / 4.0).exp()
}

fn random_tokens(rng: &mut ChaCha8Rng, max_len: usize, min_len: usize, vocab: usize) -> Vec<String> {
    let len = rng.random_range(min_len..=max_len);
    (0..len).map(|_| format!("t{}", rng.random_range(0..vocab))).collect()
}

#[test]
fn c01_bleu_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for _ in 0..200 {
        let vocab = rng.random_range(2..=10);
        let n_refs = rng.random_range(1..=4);
        let hyp = random_tokens(&mut rng, 15, 0, vocab);
        let refs: Vec<Vec<String>> = (0..n_refs).map(|_| random_tokens(&mut rng, 15, 1, vocab)).collect();
        let stats = segment_stats(&hyp, &refs, TieRule::Shorter);
        let pair = vec![(hyp.clone(), refs.clone())];
        worst = worst.max((corpus_bleu(&stats) - oracle_corpus_bleu(&pair)).abs());
        worst = worst.max((sentence_bleu(&stats, SmoothingScheme::PlusOne) - oracle_bleu_plus_one(&hyp, &refs)).abs());
        cases.push((hyp, refs));
    }
    let total: BleuStats = cases.iter().map(|(h, r)| segment_stats(h, r, TieRule::Shorter)).sum();
    worst = worst.max((corpus_bleu(&total) - oracle_corpus_bleu(&cases)).abs());
    let elapsed = start.elapsed();
    report(
        1,
        "BLEU oracle equivalence",
        worst <= 1e-12 && elapsed < Duration::from_secs(5),
        format!("max |diff| = {worst:e} over 200 cases (tol 1e-12), {elapsed:.2?} (< 5 s)"),
    );
}

#[test]
fn c02_worked_values() {
    let (hyp, reference) = (tokenize("the cat sat on the mat"), tokenize("the cat sat on a mat"));
    let stats = segment_stats(&hyp, &[reference], TieRule::Shorter);
    let bleu = corpus_bleu(&stats);
    let plus_one = sentence_bleu(&stats, SmoothingScheme::PlusOne);
    report(
        2,
        "worked values",
        (bleu - 0.537285).abs() <= 1e-6 && (plus_one - 0.638943).abs() <= 1e-6,
        format!("corpus BLEU {bleu:.6} (0.537285), BLEU+1 {plus_one:.6} (0.638943), tol 1e-6"),
    );
}

// ---------------------------------------------------------------------------

fn random_mert_instance(rng: &mut ChaCha8Rng) -> (Vec<ScoredList>, FeatureVector, FeatureVector) {
    let dim = rng.random_range(1..=3);
    let space = FeatureSpace::new((0..dim).map(|i| format!("f{i}"))).unwrap();
    let n_seg = rng.random_range(1..=5);
    let lists = (0..n_seg)
        .map(|s| {
            let reference = random_tokens(rng, 8, 3, 5);
            let segment = Segment::new(s, vec!["src".into()], vec![reference]).unwrap();
            let n_hyp = rng.random_range(1..=5);
            let hyps = (0..n_hyp)
                .map(|_| Hypothesis {
                    segment_id: s,
                    tokens: random_tokens(rng, 8, 1, 5),
                    features: FeatureVector::new(space.clone(), (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                        .unwrap(),
                })
                .collect();
            ScoredList::score(NBestList::new(s, hyps).unwrap(), &segment, TieRule::Shorter).unwrap()
        })
        .collect();
    let w = FeatureVector::new(space.clone(), (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let d = FeatureVector::new(space, (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    (lists, w, d)
}

fn grid_bleu(lists: &[ScoredList], w: &FeatureVector, d: &FeatureVector, gamma: f64) -> f64 {
    let mut stats = BleuStats::default();
    for l in lists {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, h) in l.nbest().hypotheses().iter().enumerate() {
            let s: f64 = h
                .features
                .values()
                .iter()
                .zip(w.values().iter().zip(d.values()))
                .map(|(f, (a, b))| f * (a + gamma * b))
                .sum();
            if s > best.0 {
                best = (s, i);
            }
        }
        stats += l.stats()[best.1];
    }
    corpus_bleu(&stats)
}

#[test]
fn c03_mert_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut ok = true;
    for _ in 0..50 {
        let (lists, w, d) = random_mert_instance(&mut rng);
        let found = mert_line_search(&lists, &w, &d, 10.0).unwrap();
        let grid_best = (0..=10_000)
            .map(|k| grid_bleu(&lists, &w, &d, -5.0 + k as f64 * 1e-3))
            .fold(f64::NEG_INFINITY, f64::max);
        let actual = grid_bleu(&lists, &w, &d, found.step);
        worst_gap = worst_gap.max(grid_best - found.bleu);
        ok &= found.bleu >= grid_best - 1e-6 && (actual - found.bleu).abs() < 1e-12;
    }
    let elapsed = start.elapsed();
    report(
        3,
        "MERT exactness",
        ok && elapsed < Duration::from_secs(10),
        format!("max(grid - line search) = {worst_gap:e} (tol 1e-6) over 50 instances, {elapsed:.2?} (< 10 s)"),
    );
}

#[test]
fn c04_pro_rank_recovery() {
    let start = Instant::now();
    let task = generate_task(&SynthConfig::separable(5)).unwrap();
    let tuning = task.tuning.pool(TieRule::Shorter).unwrap();
    let run = run_tuning(
        &tuning,
        &task.initial_weights,
        &Optimizer::Pro(ProConfig::default()),
        &TuningConfig { seed: 5, ..TuningConfig::default() },
    )
    .unwrap();
    let mut taus = Vec::new();
    for r in &run.reruns {
        let per_segment: Vec<f64> = task
            .test
            .nbest
            .iter()
            .map(|l| {
                let got = l.scores(&r.weights).unwrap();
                let oracle = l.scores(&task.oracle_weights).unwrap();
                kendall_tau(&got, &oracle).unwrap()
            })
            .collect();
        taus.push(per_segment.iter().sum::<f64>() / per_segment.len() as f64);
    }
    let elapsed = start.elapsed();
    report(
        4,
        "PRO rank recovery",
        taus.len() == 3 && taus.iter().all(|t| *t >= 0.9) && elapsed < Duration::from_secs(60),
        format!("mean per-segment Kendall tau per rerun {taus:.4?} (>= 0.9), {elapsed:.2?} (< 60 s)"),
    );
}

// ---------------------------------------------------------------------------
// Synthetic grids shared by criteria 5–9.

fn arabic_like(n_references: usize) -> SynthConfig {
    SynthConfig {
        n_references,
        seed: 11,
        ..SynthConfig::default()
    }
}

fn spanish_like() -> SynthConfig {
    SynthConfig {
        verbosity: VerbosityModel {
            intercept: 1.2,
            slope: -0.002,
        },
        seed: 12,
        ..SynthConfig::default()
    }
}

fn plan(config: SynthConfig, conditions: &[&str]) -> ExperimentPlan {
    ExperimentPlan {
        task: TaskSource::Synth(config),
        conditions: conditions.iter().map(|c| c.parse::<TuneCondition>().unwrap()).collect(),
        seed: 3,
        ..ExperimentPlan::default()
    }
}

struct Experiments {
    single: GridResult,
    multi: GridResult,
    reverse: GridResult,
    cutoff: CutoffResult,
}

fn experiments() -> &'static Experiments {
    static CELL: OnceLock<Experiments> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = |p: &ExperimentPlan| run_grid(p, &LoadedTask::load(p).unwrap()).unwrap();
        let single_plan = plan(arabic_like(1), &["shortest", "middle", "longest", "random", "full"]);
        let single = grid(&single_plan);
        let multi = grid(&plan(arabic_like(4), &["shortest", "middle", "longest"]));
        let reverse = grid(&plan(spanish_like(), &["shortest", "middle", "longest"]));
        let cutoff = run_cutoff_sweep(&single_plan, &LoadedTask::load(&single_plan).unwrap()).unwrap();
        Experiments {
            single,
            multi,
            reverse,
            cutoff,
        }
    })
}

/// Mean over reruns of a full-test-set statistic.
fn full(grid: &GridResult, optimizer: &str, condition: &str) -> tunesel::harness::ReportRow {
    grid.rows()
        .into_iter()
        .find(|r| r.optimizer == optimizer && r.tune_condition == condition && r.test_condition == "full")
        .unwrap_or_else(|| panic!("no row for {optimizer}/{condition}"))
}

#[test]
fn c05_selection_direction() {
    let g = &experiments().single;
    let row = |c| full(g, "pro", c);
    let (low, mid, top, rand, all) = (row("shortest"), row("middle"), row("longest"), row("random"), row("full"));
    let bp = |r: &tunesel::harness::ReportRow| r.brevity_penalty.mean;
    let bleu = |r: &tunesel::harness::ReportRow| r.bleu.mean;
    let pass = bp(&low) < bp(&top)
        && bleu(&low) < bleu(&top)
        && bp(&low) < bp(&rand)
        && bleu(&low) < bleu(&rand)
        && bp(&mid) <= bp(&top)
        && bleu(&mid) <= bleu(&top)
        && bp(&top) > bp(&all);
    report(
        5,
        "selection direction",
        pass,
        format!(
            "BP low {:.4} rand {:.4} mid {:.4} top {:.4} full {:.4}; BLEU low {:.4} rand {:.4} mid {:.4} top {:.4} full {:.4}",
            bp(&low),
            bp(&rand),
            bp(&mid),
            bp(&top),
            bp(&all),
            bleu(&low),
            bleu(&rand),
            bleu(&mid),
            bleu(&top),
            bleu(&all)
        ),
    );
}

#[test]
fn c06_cutoff_sweep() {
    let means = experiments().cutoff.means();
    let removed: Vec<f64> = means.iter().map(|m| 1.0 - m.0).collect();
    let bp: Vec<f64> = means.iter().map(|m| m.1).collect();
    let rho = spearman(&removed, &bp).unwrap_or(f64::NAN);
    let at = |f: f64| means.iter().find(|m| (m.0 - f).abs() < 1e-9).map(|m| m.1).unwrap();
    report(
        6,
        "cutoff sweep",
        means.len() == 6 && rho >= 0.8 && at(0.5) > at(1.0),
        format!(
            "spearman(removed share, mean BP) = {rho:.3} (>= 0.8); BP@0.5 {:.4} vs BP@1.0 {:.4}; BP by fraction {:?}",
            at(0.5),
            at(1.0),
            means.iter().map(|m| format!("{}:{:.4}", m.0, m.1)).collect::<Vec<_>>()
        ),
    );
}

fn grid_points(optimizer: &str, x: fn(&tunesel::harness::ReportRow) -> f64, y: fn(&tunesel::harness::ReportRow) -> f64) -> (Vec<f64>, Vec<f64>) {
    let e = experiments();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for g in [&e.single, &e.reverse] {
        for c in ["shortest", "middle", "longest"] {
            let r = full(g, optimizer, c);
            xs.push(x(&r));
            ys.push(y(&r));
        }
    }
    (xs, ys)
}

#[test]
fn c07_optimizer_signatures() {
    let vb_hvb = |o| {
        let (x, y) = grid_points(o, |r| r.tune_verbosity, |r| r.hypothesis_verbosity.mean);
        pearson(&x, &y).unwrap_or(f64::NAN)
    };
    let (mert, pro) = (vb_hvb("mert"), vb_hvb("pro"));
    let (x, y) = grid_points("pro", |r| r.tune_mean_source_length, |r| r.length_ratio.mean);
    let pro_lr = pearson(&x, &y).unwrap_or(f64::NAN);
    report(
        7,
        "optimizer signatures",
        mert >= 0.9 && mert > pro && pro_lr > 0.0,
        format!("r(vb, hvb) MERT {mert:.3} (>= 0.9) vs PRO {pro:.3}; PRO r(source length, lr) {pro_lr:.3} (> 0)"),
    );
}

#[test]
fn c08_multi_reference_dampening() {
    let e = experiments();
    let spread = |g: &GridResult, o: &str| {
        let hvb: Vec<f64> = ["shortest", "middle", "longest"]
            .iter()
            .map(|c| full(g, o, c).hypothesis_verbosity.mean)
            .collect();
        std_dev(&hvb)
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for o in ["mert", "pro"] {
        let (one, four) = (spread(&e.single, o), spread(&e.multi, o));
        pass &= four <= one;
        detail.push(format!("{o}: sd(hvb) 4 refs {four:.4} <= 1 ref {one:.4}"));
    }
    report(8, "multi-reference dampening", pass, detail.join("; "));
}

#[test]
fn c09_single_reference_severity() {
    let e = experiments();
    let gap = |g: &GridResult| full(g, "pro", "longest").brevity_penalty.mean - full(g, "pro", "shortest").brevity_penalty.mean;
    let (one, four) = (gap(&e.single), gap(&e.multi));
    report(
        9,
        "single-reference severity",
        one > four,
        format!("PRO BP(top50) - BP(low50): 1 ref {one:.4} > 4 refs {four:.4}"),
    );
}

// ---------------------------------------------------------------------------

fn cli(args: &[&str], env: &[(&str, &str)]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_tunesel"))
        .args(args)
        .envs(env.iter().copied())
        .output()
        .expect("run tunesel");
    assert!(
        out.status.success(),
        "tunesel {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn c10_determinism() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let plan = r.join("plan.txt");
    std::fs::write(
        &plan,
        "synth.n_tuning = 60\nsynth.n_test = 40\nsynth.seed = 2\noptimizers = mert,pro\nreruns = 2\niterations = 3\ncutoff = true\n",
    )
    .unwrap();
    let mut checked = Vec::new();
    let mut same = true;
    for run in ["a", "b"] {
        let d = r.join(run);
        let d = d.to_str().unwrap();
        cli(&["synth", "--n-tuning", "60", "--n-test", "40", "--seed", "4", "--out", &format!("{d}/task")], &[]);
        cli(
            &["experiment", "--plan", plan.to_str().unwrap(), "--out", &format!("{d}/exp")],
            &[("TUNESEL_THREADS", if run == "a" { "1" } else { "4" })],
        );
        cli(
            &[
                "tune", "--tune", &format!("{d}/task/tune"), "--test", &format!("{d}/task/test"), "--init",
                &format!("{d}/task/init.weights"), "--optimizer", "pro", "--iterations", "3", "--reruns", "2",
                "--seed", "9", "--out-dir", &format!("{d}/tune"),
            ],
            &[],
        );
        cli(
            &[
                "select", "--condition", "random", "--fraction", "0.5", "--seed", "3", "--in", &format!("{d}/task/tune"),
                "--out", &format!("{d}/sel"),
            ],
            &[],
        );
        let stats = cli(&["stats", "--in", &format!("{d}/task/tune")], &[]).stdout;
        std::fs::write(format!("{d}/stats.csv"), stats).unwrap();
        let score = cli(
            &["score", "--nbest-top1", &format!("{d}/task/tune.nbest"), "--refs", &format!("{d}/task/tune.ref0")],
            &[],
        )
        .stdout;
        std::fs::write(format!("{d}/score.csv"), score).unwrap();
    }
    for sub in ["exp", "tune", "."] {
        let (a, b) = (csv_files(&r.join("a").join(sub)), csv_files(&r.join("b").join(sub)));
        same &= !a.is_empty() && a == b;
        checked.extend(a.into_iter().map(|(n, _)| format!("{sub}/{n}")));
    }
    for f in ["task/tune.nbest", "sel.src", "sel.nbest"] {
        same &= std::fs::read(r.join("a").join(f)).unwrap() == std::fs::read(r.join("b").join(f)).unwrap();
        checked.push(f.to_string());
    }
    report(
        10,
        "determinism",
        same,
        format!("{} outputs byte-identical across repeated invocations ({})", checked.len(), checked.join(" ")),
    );
}
