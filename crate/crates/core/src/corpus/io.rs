//! Text formats.
//!
//! * n-best: `SEGID ||| tok tok … ||| name=value name=value … [||| total]`, one
//!   hypothesis per line. Segments need not be contiguous; the trailing total is ignored.
//! * references: one plain-text file per reference, one segment per line.
//! * weights: `name value` per line, `#` starts a comment.
//! * datasets: files sharing a prefix: `PREFIX.src`, `PREFIX.ref0` … `PREFIX.refN`,
//!   and optionally `PREFIX.nbest` and `PREFIX.genre`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{tokenize, FeatureSpace, FeatureVector, Hypothesis, NBestList, Segment, WeightVector};
use crate::error::{Error, Result};

const FIELD_SEP: &str = "|||";

pub fn parse_nbest(text: &str) -> Result<Vec<NBestList>> {
    let mut space: Option<FeatureSpace> = None;
    let mut grouped: BTreeMap<usize, Vec<Hypothesis>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(FIELD_SEP).collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::parse(
                lineno,
                format!("expected 3 or 4 `|||`-separated fields, found {}", fields.len()),
            ));
        }
        let segment_id: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad segment id `{}`", fields[0].trim())))?;
        let tokens = tokenize(fields[1]);
        let mut pairs = Vec::new();
        for item in fields[2].split_whitespace() {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("feature `{item}` is not name=value")))?;
            if name.is_empty() {
                return Err(Error::parse(lineno, "empty feature name"));
            }
            let value: f64 = value
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad value in `{item}`")))?;
            pairs.push((name.to_owned(), value));
        }
        if pairs.is_empty() {
            return Err(Error::parse(lineno, "no features"));
        }
        let features = FeatureVector::from_pairs(pairs).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let features = match &space {
            None => {
                space = Some(features.space().clone());
                features
            }
            Some(s) => {
                s.ensure_same(features.space())
                    .map_err(|e| Error::parse(lineno, e.to_string()))?;
                // share one allocation for the name set
                FeatureVector::new(s.clone(), features.values().to_vec())?
            }
        };
        grouped.entry(segment_id).or_default().push(Hypothesis {
            segment_id,
            tokens,
            features,
        });
    }
    grouped
        .into_iter()
        .map(|(id, hyps)| NBestList::new(id, hyps))
        .collect()
}

pub fn write_nbest(lists: &[NBestList]) -> String {
    let mut out = String::new();
    for list in lists {
        for h in list.hypotheses() {
            let feats: Vec<String> = h.features.iter().map(|(n, v)| format!("{n}={v}")).collect();
            let _ = writeln!(
                out,
                "{} ||| {} ||| {}",
                h.segment_id,
                h.tokens.join(" "),
                feats.join(" ")
            );
        }
    }
    out
}

/// Line `i` of stream `j` is reference `j` of segment `i`.
pub fn parse_references<S: AsRef<str>>(streams: &[S]) -> Result<Vec<Vec<Vec<String>>>> {
    if streams.is_empty() {
        return Err(Error::EmptyInput("reference streams"));
    }
    let per_stream: Vec<Vec<&str>> = streams.iter().map(|s| s.as_ref().lines().collect()).collect();
    let counts: Vec<usize> = per_stream.iter().map(Vec::len).collect();
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(Error::RaggedReferences { counts });
    }
    let mut segments = vec![Vec::with_capacity(streams.len()); counts[0]];
    for (j, lines) in per_stream.iter().enumerate() {
        for (i, line) in lines.iter().enumerate() {
            let toks = tokenize(line);
            if toks.is_empty() {
                return Err(Error::EmptyReference {
                    stream: j,
                    line: i + 1,
                });
            }
            segments[i].push(toks);
        }
    }
    Ok(segments)
}

pub fn parse_weights(text: &str) -> Result<WeightVector> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(i + 1, "expected `name value`"));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad weight `{value}`")))?;
        pairs.push((name.to_owned(), value));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("weight file"));
    }
    FeatureVector::from_pairs(pairs)
}

pub fn write_weights(weights: &WeightVector) -> String {
    weights.iter().map(|(n, v)| format!("{n} {v}\n")).collect()
}

/// Segments plus optional n-best pool and genre tags, stored under a common prefix.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub segments: Vec<Segment>,
    pub nbest: Option<Vec<NBestList>>,
    pub genres: Option<Vec<String>>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

pub fn read_dataset(prefix: &Path) -> Result<Dataset> {
    let src = read(&with_suffix(prefix, ".src"))?;
    let mut refs = Vec::new();
    loop {
        let path = with_suffix(prefix, &format!(".ref{}", refs.len()));
        if !path.exists() {
            break;
        }
        refs.push(read(&path)?);
    }
    let references = parse_references(&refs)?;
    let sources: Vec<&str> = src.lines().collect();
    if sources.len() != references.len() {
        return Err(Error::Misaligned {
            expected: references.len(),
            found: sources.len(),
        });
    }
    let segments = sources
        .iter()
        .zip(references)
        .enumerate()
        .map(|(id, (line, refs))| Segment::new(id, tokenize(line), refs))
        .collect::<Result<Vec<_>>>()?;

    let nbest_path = with_suffix(prefix, ".nbest");
    let nbest = if nbest_path.exists() {
        let lists = parse_nbest(&read(&nbest_path)?)?;
        if let Some(l) = lists.iter().find(|l| l.segment_id() >= segments.len()) {
            return Err(Error::config(format!(
                "n-best segment id {} out of range ({} segments)",
                l.segment_id(),
                segments.len()
            )));
        }
        Some(lists)
    } else {
        None
    };

    let genre_path = with_suffix(prefix, ".genre");
    let genres = if genre_path.exists() {
        let g: Vec<String> = read(&genre_path)?.lines().map(|l| l.trim().to_owned()).collect();
        if g.len() != segments.len() {
            return Err(Error::Misaligned {
                expected: segments.len(),
                found: g.len(),
            });
        }
        Some(g)
    } else {
        None
    };

    Ok(Dataset {
        segments,
        nbest,
        genres,
    })
}

pub fn write_dataset(prefix: &Path, dataset: &Dataset) -> Result<()> {
    let write = |suffix: &str, body: String| -> Result<()> {
        let path = with_suffix(prefix, suffix);
        fs::write(&path, body).map_err(|e| Error::file(path, e))
    };
    let lines = |it: &mut dyn Iterator<Item = String>| -> String {
        it.map(|mut l| {
            l.push('\n');
            l
        })
        .collect()
    };
    write(
        ".src",
        lines(&mut dataset.segments.iter().map(|s| s.source.join(" "))),
    )?;
    let n_refs = dataset.segments.first().map_or(0, |s| s.references.len());
    for j in 0..n_refs {
        write(
            &format!(".ref{j}"),
            lines(&mut dataset.segments.iter().map(|s| s.references[j].join(" "))),
        )?;
    }
    if let Some(nbest) = &dataset.nbest {
        write(".nbest", write_nbest(nbest))?;
    }
    if let Some(genres) = &dataset.genres {
        write(".genre", lines(&mut genres.iter().cloned()))?;
    }
    Ok(())
}
