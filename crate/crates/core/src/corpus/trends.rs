//! Class-occurrence trend series over externally supplied per-look class
//! predictions: for each year, the number of looks whose top-K predicted
//! classes contain a label, normalized by the number of distinct designers
//! that showed that year.

use super::{Corpus, CorpusError, Season};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// One (look, rank) entry of a class prediction table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassPredictionRow {
    pub look_id: String,
    pub year: i32,
    pub season: Season,
    pub designer: String,
    pub rank: usize,
    pub label: String,
}

/// Top-K class predictions per look, plus the label vocabulary. The
/// vocabulary always contains every label that occurs in a row and may be
/// extended with labels that occur nowhere (a classifier's full class set).
#[derive(Clone, Debug)]
pub struct ClassPredictionTable {
    top_k: usize,
    rows: Vec<ClassPredictionRow>,
    vocabulary: BTreeSet<String>,
}

impl ClassPredictionTable {
    /// Validates that every look carries the same number of ranks, dense
    /// from 1 to K.
    pub fn new(rows: Vec<ClassPredictionRow>) -> Result<ClassPredictionTable, CorpusError> {
        if rows.is_empty() {
            return Err(CorpusError::Validation(
                "class prediction table has no rows".into(),
            ));
        }
        let mut per_look: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for row in &rows {
            per_look.entry(&row.look_id).or_default().push(row.rank);
        }
        let mut top_k = None;
        for (look, ranks) in &mut per_look {
            ranks.sort_unstable();
            let k = ranks.len();
            if ranks.iter().enumerate().any(|(i, &r)| r != i + 1) {
                return Err(CorpusError::Validation(format!(
                    "look {look:?} has ranks {ranks:?}, expected 1..={k}"
                )));
            }
            match top_k {
                None => top_k = Some(k),
                Some(expected) if expected != k => {
                    return Err(CorpusError::Validation(format!(
                        "look {look:?} has {k} ranks but the table uses K={expected}"
                    )));
                }
                _ => {}
            }
        }
        let vocabulary = rows.iter().map(|r| r.label.clone()).collect();
        Ok(ClassPredictionTable {
            top_k: top_k.unwrap_or(0),
            rows,
            vocabulary,
        })
    }

    /// Extends the vocabulary with labels that may have zero occurrences.
    pub fn with_vocabulary<I: IntoIterator<Item = String>>(mut self, labels: I) -> Self {
        self.vocabulary.extend(labels);
        self
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }

    pub fn rows(&self) -> &[ClassPredictionRow] {
        &self.rows
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    /// Reads the tab-separated format: header line
    /// `look_id\tslot\tdesigner\trank\tlabel`, then one row per line with
    /// slot written as `<year>-<season>`.
    pub fn from_file(path: &Path) -> Result<ClassPredictionTable, CorpusError> {
        let io = |e| CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let file = File::open(path).map_err(io)?;
        let reader = BufReader::new(file);
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| CorpusError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg,
            };
            if !saw_header {
                if line.trim() != "look_id\tslot\tdesigner\trank\tlabel" {
                    return Err(parse_err(format!("unexpected header {line:?}")));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(parse_err(format!(
                    "expected 5 fields, found {}",
                    fields.len()
                )));
            }
            let (year_str, season_str) = fields[1]
                .split_once('-')
                .ok_or_else(|| parse_err(format!("bad slot {:?}", fields[1])))?;
            rows.push(ClassPredictionRow {
                look_id: fields[0].to_string(),
                year: year_str
                    .parse()
                    .map_err(|_| parse_err(format!("bad year {year_str:?}")))?,
                season: Season::parse(season_str)
                    .ok_or_else(|| parse_err(format!("bad season {season_str:?}")))?,
                designer: fields[2].to_string(),
                rank: fields[3]
                    .parse()
                    .map_err(|_| parse_err(format!("bad rank {:?}", fields[3])))?,
                label: fields[4].to_string(),
            });
        }
        ClassPredictionTable::new(rows)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |e| CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let file = File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        w.write_all(b"look_id\tslot\tdesigner\trank\tlabel\n")
            .map_err(io)?;
        for r in &self.rows {
            let line = format!(
                "{}\t{}-{}\t{}\t{}\t{}\n",
                r.look_id,
                r.year,
                r.season.as_str(),
                r.designer,
                r.rank,
                r.label
            );
            w.write_all(line.as_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Per-year normalized occurrence series for one label: the number of looks
/// whose top-K contains the label, divided by the number of distinct
/// designers that showed in that year. Years without shows map to 0.
pub fn class_trend_series(
    table: &ClassPredictionTable,
    label: &str,
    corpus: &Corpus,
) -> Result<Vec<(i32, f64)>, CorpusError> {
    if !table.vocabulary.contains(label) {
        return Err(CorpusError::UnknownLabel {
            label: label.to_string(),
            vocabulary: table.vocabulary.iter().cloned().collect(),
        });
    }
    // Distinct looks per year that mention the label anywhere in their top K.
    let mut hits: BTreeMap<i32, BTreeSet<&str>> = BTreeMap::new();
    for row in &table.rows {
        if row.label == label {
            hits.entry(row.year).or_default().insert(&row.look_id);
        }
    }
    let series = corpus
        .years()
        .into_iter()
        .map(|year| {
            let designers = corpus.designers_showing_in_year(year);
            let count = hits.get(&year).map(|s| s.len()).unwrap_or(0);
            let value = if designers == 0 {
                0.0
            } else {
                count as f64 / designers as f64
            };
            (year, value)
        })
        .collect();
    Ok(series)
}

/// Writes a `(year, value)` series as tab-separated text.
pub fn write_trend_series(series: &[(i32, f64)], path: &Path) -> Result<(), CorpusError> {
    let io = |e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(b"year\toccurrence\n").map_err(io)?;
    for (year, value) in series {
        w.write_all(format!("{year}\t{value}\n").as_bytes())
            .map_err(io)?;
    }
    w.flush().map_err(io)
}
