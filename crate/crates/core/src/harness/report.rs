//! CSV tables and SVG scatter plots for grid and cutoff results.
//!
//! Every number is written with [`fmt_num`], the shortest decimal that
//! round-trips, so SVG annotations and CSV cells agree exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::grid::{CutoffResult, GridResult, ReportRow, TEST_CONDITIONS};
use crate::error::{Error, Result};
use crate::selection::{least_squares, pearson, spearman, Regression};
use crate::synth::WORD_PENALTY;

pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_HEADER: &str = "optimizer,tune_condition,test_condition,reruns,bleu_mean,bleu_sd,bp_mean,bp_sd,hvb_mean,hvb_sd,lr_mean,lr_sd,tune_vb,tune_mean_source_length,status";

pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn csv(name: &str, header: &str, body: &str) -> String {
    format!("# tunesel {name} v{SCHEMA_VERSION}\n{header}\n{body}")
}

pub fn summary_csv(rows: &[ReportRow]) -> String {
    let mut body = String::new();
    for r in rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.optimizer,
            r.tune_condition,
            r.test_condition,
            r.reruns,
            fmt_num(r.bleu.mean),
            fmt_num(r.bleu.sd),
            fmt_num(r.brevity_penalty.mean),
            fmt_num(r.brevity_penalty.sd),
            fmt_num(r.hypothesis_verbosity.mean),
            fmt_num(r.hypothesis_verbosity.sd),
            fmt_num(r.length_ratio.mean),
            fmt_num(r.length_ratio.sd),
            fmt_num(r.tune_verbosity),
            fmt_num(r.tune_mean_source_length),
            r.status.replace(',', ";"),
        );
    }
    csv("summary", SUMMARY_HEADER, &body)
}

/// One point per (optimizer, tuning condition, rerun), test side on the full test set.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub optimizer: String,
    pub tune_condition: String,
    pub rerun: usize,
    pub tune_vb: f64,
    pub tune_mean_source_length: f64,
    pub test_hvb: f64,
    pub test_lr: f64,
    pub test_bp: f64,
    pub test_bleu: f64,
}

pub fn points(grid: &GridResult) -> Vec<Point> {
    let full = TEST_CONDITIONS.len() - 1;
    let mut out = Vec::new();
    for cell in &grid.cells {
        if let Ok(runs) = &cell.outcome {
            for (rerun, e) in runs.evaluations.iter().enumerate() {
                out.push(Point {
                    optimizer: cell.optimizer.to_string(),
                    tune_condition: cell.profile.condition.clone(),
                    rerun,
                    tune_vb: cell.profile.verbosity,
                    tune_mean_source_length: cell.profile.mean_source_length,
                    test_hvb: e[full].hypothesis_verbosity,
                    test_lr: e[full].length_ratio,
                    test_bp: e[full].brevity_penalty,
                    test_bleu: e[full].bleu,
                });
            }
        }
    }
    out
}

pub fn points_csv(points: &[Point]) -> String {
    let mut body = String::new();
    for p in points {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{},{}",
            p.optimizer,
            p.tune_condition,
            p.rerun,
            fmt_num(p.tune_vb),
            fmt_num(p.tune_mean_source_length),
            fmt_num(p.test_hvb),
            fmt_num(p.test_lr),
            fmt_num(p.test_bp),
            fmt_num(p.test_bleu),
        );
    }
    csv(
        "points",
        "optimizer,tune_condition,rerun,tune_vb,tune_mean_source_length,test_hvb,test_lr,test_bp,test_bleu",
        &body,
    )
}

pub fn datasets_csv(grid: &GridResult) -> String {
    let mut body = String::new();
    let mut seen = Vec::new();
    for cell in &grid.cells {
        let p = &cell.profile;
        if seen.contains(&p.condition) {
            continue;
        }
        seen.push(p.condition.clone());
        let _ = writeln!(
            body,
            "{},{},{},{},{},{}",
            p.condition,
            p.n_segments,
            p.n_source_tokens,
            fmt_num(p.mean_source_length),
            fmt_num(p.verbosity),
            p.genre_kl.map_or_else(String::new, fmt_num),
        );
    }
    csv(
        "datasets",
        "tune_condition,n_segments,n_source_tokens,mean_source_length,vb,genre_kl",
        &body,
    )
}

pub fn cutoff_csv(sweep: &CutoffResult) -> String {
    let mut body = String::new();
    for r in &sweep.rows {
        let e = &r.evaluation;
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},ok",
            fmt_num(r.fraction),
            r.rerun,
            fmt_num(e.brevity_penalty),
            fmt_num(e.bleu),
            fmt_num(e.hypothesis_verbosity),
            fmt_num(e.length_ratio),
        );
    }
    for (f, err) in &sweep.failures {
        let _ = writeln!(body, "{},,,,,,failed: {}", fmt_num(*f), err.replace(',', ";"));
    }
    csv("cutoff", "fraction,rerun,bp,bleu,hvb,lr,status", &body)
}

/// Final weights per feature, rerun and cutoff; the word penalty is flagged.
pub fn weights_csv(sweep: &CutoffResult) -> String {
    let mut body = String::new();
    for r in &sweep.rows {
        for (name, w) in r.weights.iter() {
            let _ = writeln!(
                body,
                "{},{},{},{},{}",
                fmt_num(r.fraction),
                r.rerun,
                name,
                fmt_num(w),
                u8::from(name == WORD_PENALTY)
            );
        }
    }
    csv("weights", "fraction,rerun,feature,weight,highlight", &body)
}

/// A named set of (x, y) points with its least-squares line.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub regression: Option<Regression>,
    pub pearson: Option<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        Series {
            name: name.into(),
            regression: least_squares(&x, &y).ok(),
            pearson: pearson(&x, &y).ok(),
            points,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub file: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

impl Figure {
    pub fn svg(&self) -> String {
        let (w, h, m) = (520.0, 380.0, 60.0);
        let all: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).collect();
        let bounds = |f: fn(&(f64, f64)) -> f64| {
            let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = bounds(|p| p.0);
        let (y0, y1) = bounds(|p| p.1);
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, "<metadata>");
        let _ = writeln!(s, "series,x,y");
        for series in &self.series {
            for (x, y) in &series.points {
                let _ = writeln!(s, "{},{},{}", series.name, fmt_num(*x), fmt_num(*y));
            }
        }
        let _ = writeln!(s, "series,slope,intercept,pearson");
        for series in &self.series {
            if let Some(r) = series.regression {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    series.name,
                    fmt_num(r.slope),
                    fmt_num(r.intercept),
                    series.pearson.map_or_else(String::new, fmt_num)
                );
            }
        }
        let _ = writeln!(s, "</metadata>");
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            w / 2.0,
            self.title
        );
        let _ = writeln!(
            s,
            r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            h - m,
            w - m,
            h - m
        );
        let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
        for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{v:.3}</text>"#, h - m + 15.0);
        }
        for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
            let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">{v:.3}</text>"#, m - 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            w / 2.0,
            h - 15.0,
            self.x_label
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            self.y_label
        );
        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            for (x, y) in &series.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}" fill-opacity="0.7"/>"#,
                    sx(*x),
                    sy(*y)
                );
            }
            if let Some(r) = series.regression {
                let (ya, yb) = (r.slope * x0 + r.intercept, r.slope * x1 + r.intercept);
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5" data-slope="{}" data-intercept="{}"/>"#,
                    sx(x0),
                    sy(ya),
                    sx(x1),
                    sy(yb),
                    fmt_num(r.slope),
                    fmt_num(r.intercept)
                );
            }
            let label = match (series.regression, series.pearson) {
                (Some(r), Some(p)) => format!(
                    "{}: slope={} intercept={} r={}",
                    series.name,
                    fmt_num(r.slope),
                    fmt_num(r.intercept),
                    fmt_num(p)
                ),
                (Some(r), None) => format!(
                    "{}: slope={} intercept={}",
                    series.name,
                    fmt_num(r.slope),
                    fmt_num(r.intercept)
                ),
                _ => series.name.clone(),
            };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#,
                m + 6.0,
                m + 14.0 * i as f64 + 4.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn by_optimizer(points: &[Point], f: impl Fn(&Point) -> (f64, f64)) -> Vec<Series> {
    let mut names: Vec<&str> = Vec::new();
    for p in points {
        if !names.contains(&p.optimizer.as_str()) {
            names.push(&p.optimizer);
        }
    }
    names
        .into_iter()
        .map(|n| Series::new(n, points.iter().filter(|p| p.optimizer == n).map(&f).collect()))
        .collect()
}

pub fn grid_figures(points: &[Point]) -> Vec<Figure> {
    vec![
        Figure {
            file: "vb_vs_hvb.svg".into(),
            title: "Tuning verbosity vs. test hypothesis verbosity".into(),
            x_label: "tuning vb".into(),
            y_label: "test hvb".into(),
            series: by_optimizer(points, |p| (p.tune_vb, p.test_hvb)),
        },
        Figure {
            file: "length_vs_lr.svg".into(),
            title: "Tuning source length vs. test length ratio".into(),
            x_label: "tuning mean source length".into(),
            y_label: "test hyp/ref length ratio".into(),
            series: by_optimizer(points, |p| (p.tune_mean_source_length, p.test_lr)),
        },
    ]
}

pub fn cutoff_figure(sweep: &CutoffResult) -> Figure {
    Figure {
        file: "cutoff_vs_bp.svg".into(),
        title: "Cutoff vs. test brevity penalty".into(),
        x_label: "fraction of shortest segments removed".into(),
        y_label: "test BP".into(),
        series: vec![Series::new(
            "pro",
            sweep
                .rows
                .iter()
                .map(|r| (1.0 - r.fraction, r.evaluation.brevity_penalty))
                .collect(),
        )],
    }
}

/// Correlations that summarize each optimizer's length behavior.
pub fn correlations_csv(points: &[Point], sweep: Option<&CutoffResult>) -> String {
    let mut body = String::new();
    let mut row = |group: &str, x: &str, y: &str, xs: &[f64], ys: &[f64]| {
        let cell = |r: Result<f64>| r.map_or_else(|_| String::new(), fmt_num);
        let _ = writeln!(
            body,
            "{group},{x},{y},{},{},{}",
            xs.len(),
            cell(pearson(xs, ys)),
            cell(spearman(xs, ys))
        );
    };
    for series in by_optimizer(points, |p| (p.tune_vb, p.test_hvb)) {
        let (x, y): (Vec<f64>, Vec<f64>) = series.points.into_iter().unzip();
        row(&series.name, "tune_vb", "test_hvb", &x, &y);
    }
    for series in by_optimizer(points, |p| (p.tune_mean_source_length, p.test_lr)) {
        let (x, y): (Vec<f64>, Vec<f64>) = series.points.into_iter().unzip();
        row(&series.name, "tune_mean_source_length", "test_lr", &x, &y);
    }
    if let Some(sweep) = sweep {
        let means = sweep.means();
        let cut: Vec<f64> = means.iter().map(|m| 1.0 - m.0).collect();
        let bp: Vec<f64> = means.iter().map(|m| m.1).collect();
        let bleu: Vec<f64> = means.iter().map(|m| m.2).collect();
        row("cutoff", "fraction_removed", "mean_bp", &cut, &bp);
        row("cutoff", "fraction_removed", "mean_bleu", &cut, &bleu);
    }
    csv("correlations", "group,x,y,n,pearson,spearman", &body)
}

pub fn regression_csv(figures: &[Figure]) -> String {
    let mut body = String::new();
    for f in figures {
        for s in &f.series {
            if let Some(r) = s.regression {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{}",
                    f.file,
                    s.name,
                    s.points.len(),
                    fmt_num(r.slope),
                    fmt_num(r.intercept),
                    s.pearson.map_or_else(String::new, fmt_num)
                );
            }
        }
    }
    csv("regression", "figure,series,n,slope,intercept,pearson", &body)
}

/// Writes every report file into `dir` and returns their paths.
pub fn emit_reports(dir: &Path, grid: Option<&GridResult>, sweep: Option<&CutoffResult>) -> Result<Vec<PathBuf>> {
    let rows = grid.map(GridResult::rows).unwrap_or_default();
    if rows.is_empty() && sweep.is_none_or(|s| s.rows.is_empty() && s.failures.is_empty()) {
        return Err(Error::EmptyInput("report rows"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::file(&path, e))?;
        written.push(path);
        Ok(())
    };
    let mut figures = Vec::new();
    let pts = grid.map(points).unwrap_or_default();
    if let Some(grid) = grid {
        put("summary.csv", summary_csv(&rows))?;
        put("points.csv", points_csv(&pts))?;
        put("datasets.csv", datasets_csv(grid))?;
        figures.extend(grid_figures(&pts));
    }
    if let Some(sweep) = sweep {
        put("cutoff.csv", cutoff_csv(sweep))?;
        put("weights.csv", weights_csv(sweep))?;
        figures.push(cutoff_figure(sweep));
    }
    put("correlations.csv", correlations_csv(&pts, sweep))?;
    put("regression.csv", regression_csv(&figures))?;
    for f in &figures {
        put(&f.file, f.svg())?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure(points: Vec<(f64, f64)>) -> Figure {
        Figure {
            file: "t.svg".into(),
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series::new("s", points)],
        }
    }

    #[test]
    fn regression_in_metadata() {
        let f = figure(vec![(0.0, 0.0), (1.0, 1.0)]);
        let r = f.series[0].regression.unwrap();
        assert_eq!((r.slope, r.intercept), (1.0, 0.0));
        assert!(f.svg().contains("s,1,0,1\n"));
        let flat = figure(vec![(0.0, 2.0), (1.0, 2.0), (3.0, 2.0)]);
        assert_eq!(flat.series[0].regression.unwrap().slope, 0.0);
        assert!(flat.svg().contains(r#"data-slope="0""#));
    }

    #[test]
    fn svg_numbers_match_csv() {
        let f = figure(vec![(0.1, 0.3), (0.7, 0.2), (1.3, 0.9)]);
        let csv = regression_csv(std::slice::from_ref(&f));
        let line = csv.lines().nth(2).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        let svg = f.svg();
        assert!(svg.contains(&format!("s,{},{},{}", fields[3], fields[4], fields[5])));
        assert!(svg.contains(&format!("slope={} intercept={}", fields[3], fields[4])));
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-9, 123456.789] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(-0.0), "0");
    }

    #[test]
    fn empty_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_reports(dir.path(), None, None).is_err());
    }
}
