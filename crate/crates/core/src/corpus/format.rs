//! On-disk corpus formats.
//!
//! Feature file (binary, little-endian): magic "RWFT", u32 version = 1,
//! u32 feature_dim, u64 row_count, then row_count rows of feature_dim f32
//! values. Values are widened to f64 on load.
//!
//! Manifest (text, one record per line, `#` comments allowed):
//! ```text
//! runway-corpus v1
//! feature_dim 512
//! year0 2000
//! timeline 0 15
//! designers 2
//! designer 0 atelier_00
//! designer 1 atelier_01
//! collections 1
//! collection 0 2000 spring train features/designer_000.rwft 0 4
//! ```
//! Collection fields: designer_id, year, season, split, feature file path
//! (relative to the manifest), first row, row count. Designer names must
//! not contain whitespace.

use super::{Collection, Corpus, CorpusError, LookBlock, Season, SeasonSlot, Split};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

pub const FEATURE_MAGIC: &[u8; 4] = b"RWFT";
pub const FEATURE_VERSION: u32 = 1;
pub const MANIFEST_HEADER: &str = "runway-corpus v1";

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one feature file; values are narrowed to f32 as defined by the
/// format.
pub fn write_feature_file(
    path: &Path,
    feature_dim: usize,
    rows: &[&[f64]],
) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    write(FEATURE_MAGIC)?;
    write(&FEATURE_VERSION.to_le_bytes())?;
    write(&(feature_dim as u32).to_le_bytes())?;
    write(&(rows.len() as u64).to_le_bytes())?;
    for row in rows {
        debug_assert_eq!(row.len(), feature_dim);
        for &v in *row {
            write(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

struct FeatureHeader {
    feature_dim: usize,
    rows: u64,
}

fn read_feature_header(path: &Path, r: &mut impl Read) -> Result<FeatureHeader, CorpusError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != FEATURE_MAGIC {
        return Err(CorpusError::Format {
            path: path.to_path_buf(),
            msg: format!("bad magic {:?}, expected {:?}", magic, FEATURE_MAGIC),
        });
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
    let version = u32::from_le_bytes(u32buf);
    if version != FEATURE_VERSION {
        return Err(CorpusError::Format {
            path: path.to_path_buf(),
            msg: format!("unsupported version {version}"),
        });
    }
    r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
    let feature_dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(|e| io_err(path, e))?;
    Ok(FeatureHeader {
        feature_dim,
        rows: u64::from_le_bytes(u64buf),
    })
}

const HEADER_BYTES: u64 = 4 + 4 + 4 + 8;

/// Reads a row range from a feature file, widening to f64.
pub fn read_feature_rows(
    path: &Path,
    row_start: u64,
    count: usize,
    expected_dim: usize,
) -> Result<Vec<Vec<f64>>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_feature_header(path, &mut r)?;
    if header.feature_dim != expected_dim {
        return Err(CorpusError::Dimension {
            path: path.to_path_buf(),
            msg: format!(
                "feature file declares dimension {} but corpus expects {}",
                header.feature_dim, expected_dim
            ),
        });
    }
    if row_start + count as u64 > header.rows {
        return Err(CorpusError::Dimension {
            path: path.to_path_buf(),
            msg: format!(
                "rows {}..{} out of bounds (file has {} rows)",
                row_start,
                row_start + count as u64,
                header.rows
            ),
        });
    }
    r.seek(SeekFrom::Start(
        HEADER_BYTES + row_start * expected_dim as u64 * 4,
    ))
    .map_err(|e| io_err(path, e))?;
    let mut buf = vec![0u8; expected_dim * 4];
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
        rows.push(
            buf.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
        );
    }
    Ok(rows)
}

/// Streams an entire feature file, checking dimension and finiteness.
/// Returns the row count.
fn validate_feature_file(path: &Path, expected_dim: usize) -> Result<u64, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_feature_header(path, &mut r)?;
    if header.feature_dim != expected_dim {
        return Err(CorpusError::Dimension {
            path: path.to_path_buf(),
            msg: format!(
                "feature file declares dimension {} but corpus expects {}",
                header.feature_dim, expected_dim
            ),
        });
    }
    let mut buf = vec![0u8; expected_dim * 4];
    for row in 0..header.rows {
        r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
        for (j, c) in buf.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !v.is_finite() {
                return Err(CorpusError::Format {
                    path: path.to_path_buf(),
                    msg: format!("non-finite value at row {row}, column {j}"),
                });
            }
        }
    }
    // Trailing bytes would mean a corrupt row count.
    let mut one = [0u8; 1];
    if r.read(&mut one).map_err(|e| io_err(path, e))? != 0 {
        return Err(CorpusError::Format {
            path: path.to_path_buf(),
            msg: "trailing bytes after declared rows".into(),
        });
    }
    Ok(header.rows)
}

/// Writes the corpus as a manifest plus one feature file per designer under
/// `features/` next to the manifest. Collections keep their canonical
/// (t, designer) order.
pub fn write_corpus(corpus: &Corpus, manifest_path: &Path) -> Result<(), CorpusError> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let feature_dir = dir.join("features");
    fs::create_dir_all(&feature_dir).map_err(|e| io_err(&feature_dir, e))?;

    // One feature file per designer, rows in corpus order; only one
    // designer's looks are materialized at a time.
    let mut ranges: Vec<(u64, usize)> = vec![(0, 0); corpus.collections().len()];
    let mut rel_paths: BTreeMap<usize, String> = BTreeMap::new();
    for d in 0..corpus.designers().len() {
        let indices = corpus.collections_of(d);
        if indices.is_empty() {
            continue;
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for &idx in &indices {
            let looks = corpus.looks(idx)?;
            ranges[idx] = (rows.len() as u64, looks.len());
            rows.extend(looks.iter().cloned());
        }
        let rel = format!("features/designer_{d:03}.rwft");
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        write_feature_file(&dir.join(&rel), corpus.feature_dim(), &refs)?;
        rel_paths.insert(d, rel);
    }

    let file = File::create(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |line: String| {
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| io_err(manifest_path, e))
    };
    emit(MANIFEST_HEADER.to_string())?;
    emit(format!("feature_dim {}", corpus.feature_dim()))?;
    emit(format!("year0 {}", corpus.year0()))?;
    let t_min = corpus.timeline().first().map(|s| s.t).unwrap_or(0);
    let t_max = corpus.timeline().last().map(|s| s.t).unwrap_or(0);
    emit(format!("timeline {t_min} {t_max}"))?;
    emit(format!("designers {}", corpus.designers().len()))?;
    for (i, name) in corpus.designers().iter().enumerate() {
        emit(format!("designer {i} {name}"))?;
    }
    emit(format!("collections {}", corpus.collections().len()))?;
    for (idx, c) in corpus.collections().iter().enumerate() {
        let (row_start, count) = ranges[idx];
        emit(format!(
            "collection {} {} {} {} {} {} {}",
            c.designer_id,
            c.slot.year,
            c.slot.season.as_str(),
            c.split.as_str(),
            rel_paths[&c.designer_id],
            row_start,
            count
        ))?;
    }
    w.flush().map_err(|e| io_err(manifest_path, e))
}

/// Loads and fully validates a corpus from a manifest. Feature files are
/// stream-validated (magic, dimension, row bounds, finiteness) but look
/// rows stay on disk and are materialized per collection on demand.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus, CorpusError> {
    let file = File::open(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, msg: String| CorpusError::Parse {
        path: manifest_path.to_path_buf(),
        line,
        msg,
    };

    let mut feature_dim: Option<usize> = None;
    let mut year0: Option<i32> = None;
    let mut timeline_decl: Option<(usize, usize)> = None;
    let mut declared_designers: Option<usize> = None;
    let mut declared_collections: Option<usize> = None;
    let mut designers: Vec<(usize, String)> = Vec::new();
    struct RawCollection {
        designer_id: usize,
        year: i32,
        season: Season,
        split: Split,
        path: String,
        row_start: u64,
        count: usize,
        line: usize,
    }
    let mut raw: Vec<RawCollection> = Vec::new();
    let mut saw_header = false;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| io_err(manifest_path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != MANIFEST_HEADER {
                return Err(parse_err(
                    lineno,
                    format!("expected header {MANIFEST_HEADER:?}, found {line:?}"),
                ));
            }
            saw_header = true;
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let key = tokens[0];
        let args = &tokens[1..];
        let want = |n: usize| -> Result<(), CorpusError> {
            if args.len() != n {
                Err(parse_err(
                    lineno,
                    format!("{key} takes {n} fields, found {}", args.len()),
                ))
            } else {
                Ok(())
            }
        };
        match key {
            "feature_dim" => {
                want(1)?;
                feature_dim =
                    Some(args[0].parse().map_err(|_| {
                        parse_err(lineno, format!("bad feature_dim {:?}", args[0]))
                    })?);
            }
            "year0" => {
                want(1)?;
                year0 = Some(
                    args[0]
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad year0 {:?}", args[0])))?,
                );
            }
            "timeline" => {
                want(2)?;
                let lo = args[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad timeline start {:?}", args[0])))?;
                let hi = args[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad timeline end {:?}", args[1])))?;
                timeline_decl = Some((lo, hi));
            }
            "designers" => {
                want(1)?;
                declared_designers =
                    Some(args[0].parse().map_err(|_| {
                        parse_err(lineno, format!("bad designer count {:?}", args[0]))
                    })?);
            }
            "designer" => {
                want(2)?;
                let id = args[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad designer id {:?}", args[0])))?;
                designers.push((id, args[1].to_string()));
            }
            "collections" => {
                want(1)?;
                declared_collections = Some(args[0].parse().map_err(|_| {
                    parse_err(lineno, format!("bad collection count {:?}", args[0]))
                })?);
            }
            "collection" => {
                want(7)?;
                raw.push(RawCollection {
                    designer_id: args[0]
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad designer id {:?}", args[0])))?,
                    year: args[1]
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad year {:?}", args[1])))?,
                    season: Season::parse(args[2])
                        .ok_or_else(|| parse_err(lineno, format!("bad season {:?}", args[2])))?,
                    split: Split::parse(args[3])
                        .ok_or_else(|| parse_err(lineno, format!("bad split {:?}", args[3])))?,
                    path: args[4].to_string(),
                    row_start: args[5]
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad row start {:?}", args[5])))?,
                    count: args[6]
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad row count {:?}", args[6])))?,
                    line: lineno,
                });
            }
            other => {
                return Err(parse_err(lineno, format!("unknown record {other:?}")));
            }
        }
    }
    if !saw_header {
        return Err(CorpusError::Format {
            path: manifest_path.to_path_buf(),
            msg: "empty manifest".into(),
        });
    }

    let feature_dim = feature_dim.ok_or_else(|| CorpusError::Format {
        path: manifest_path.to_path_buf(),
        msg: "missing feature_dim".into(),
    })?;
    let year0 = year0.ok_or_else(|| CorpusError::Format {
        path: manifest_path.to_path_buf(),
        msg: "missing year0".into(),
    })?;

    // Designer registry: ids must be dense and in order.
    if let Some(n) = declared_designers {
        if n != designers.len() {
            return Err(CorpusError::Format {
                path: manifest_path.to_path_buf(),
                msg: format!("declared {} designers, found {}", n, designers.len()),
            });
        }
    }
    let mut names = Vec::with_capacity(designers.len());
    for (expected, (id, name)) in designers.into_iter().enumerate() {
        if id != expected {
            return Err(CorpusError::Format {
                path: manifest_path.to_path_buf(),
                msg: format!("designer ids must be dense: expected {expected}, found {id}"),
            });
        }
        names.push(name);
    }
    if let Some(n) = declared_collections {
        if n != raw.len() {
            return Err(CorpusError::Format {
                path: manifest_path.to_path_buf(),
                msg: format!("declared {} collections, found {}", n, raw.len()),
            });
        }
    }

    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut file_rows: BTreeMap<PathBuf, u64> = BTreeMap::new();
    let mut collections = Vec::with_capacity(raw.len());
    for rc in raw {
        let path = dir.join(&rc.path);
        let rows = match file_rows.get(&path) {
            Some(&rows) => rows,
            None => {
                let rows = validate_feature_file(&path, feature_dim)?;
                file_rows.insert(path.clone(), rows);
                rows
            }
        };
        if rc.row_start + rc.count as u64 > rows {
            return Err(CorpusError::Dimension {
                path: path.clone(),
                msg: format!(
                    "manifest line {}: rows {}..{} out of bounds (file has {} rows)",
                    rc.line,
                    rc.row_start,
                    rc.row_start + rc.count as u64,
                    rows
                ),
            });
        }
        let slot = SeasonSlot::new(rc.year, rc.season, year0)?;
        collections.push(Collection {
            designer_id: rc.designer_id,
            slot,
            split: rc.split,
            looks: LookBlock::File {
                path,
                row_start: rc.row_start,
                count: rc.count,
            },
        });
    }

    let corpus = Corpus::new(names, feature_dim, year0, collections)?;
    if let Some((lo, hi)) = timeline_decl {
        let actual_lo = corpus.timeline().first().map(|s| s.t).unwrap_or(0);
        let actual_hi = corpus.timeline().last().map(|s| s.t).unwrap_or(0);
        if (lo, hi) != (actual_lo, actual_hi) {
            return Err(CorpusError::Format {
                path: manifest_path.to_path_buf(),
                msg: format!(
                    "declared timeline {lo}..{hi} but collections span {actual_lo}..{actual_hi}"
                ),
            });
        }
    }
    Ok(corpus)
}
