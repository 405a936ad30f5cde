//! Corpus data model: designers, season slots, collections of per-look
//! feature vectors, train/val/test splitting, feature-file ingestion,
//! synthetic corpus generation and class-occurrence trend series.

pub mod format;
pub mod synth;
pub mod trends;

pub use format::{load_corpus, write_corpus};

use crate::tensor::Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: {msg}")]
    Dimension { path: PathBuf, msg: String },
    #[error("duplicate collection for designer {designer} at slot t={t}")]
    Duplicate { designer: usize, t: usize },
    #[error("invalid corpus: {0}")]
    Validation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown label {label:?}; available: {}", vocabulary.join(", "))]
    UnknownLabel {
        label: String,
        vocabulary: Vec<String>,
    },
}

/// The two ready-to-wear season classes on the timeline, ordered
/// Spring < Fall within a year.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Season {
    Spring,
    Fall,
}

pub const SEASON_COUNT: usize = 2;

impl Season {
    pub fn index(self) -> usize {
        match self {
            Season::Spring => 0,
            Season::Fall => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Spring => "spring",
            Season::Fall => "fall",
        }
    }

    pub fn parse(s: &str) -> Option<Season> {
        match s {
            "spring" => Some(Season::Spring),
            "fall" => Some(Season::Fall),
            _ => None,
        }
    }
}

/// One (year, season) point on the global timeline. `t` is the dense
/// timeline index 2·(year − year0) + season.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeasonSlot {
    pub year: i32,
    pub season: Season,
    pub t: usize,
}

impl SeasonSlot {
    pub fn new(year: i32, season: Season, year0: i32) -> Result<SeasonSlot, CorpusError> {
        if year < year0 {
            return Err(CorpusError::Validation(format!(
                "year {year} precedes timeline base year {year0}"
            )));
        }
        let t = 2 * (year - year0) as usize + season.index();
        Ok(SeasonSlot { year, season, t })
    }

    pub fn from_t(t: usize, year0: i32) -> SeasonSlot {
        let season = if t.is_multiple_of(2) {
            Season::Spring
        } else {
            Season::Fall
        };
        SeasonSlot {
            year: year0 + (t / 2) as i32,
            season,
            t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Where a collection's look features live. Generated corpora keep them in
/// memory; loaded corpora reference feature-file row ranges and materialize
/// them on demand, so training streams look features batch by batch.
#[derive(Clone, Debug)]
pub enum LookBlock {
    Memory(Vec<Vec<f64>>),
    File {
        path: PathBuf,
        row_start: u64,
        count: usize,
    },
}

impl LookBlock {
    pub fn count(&self) -> usize {
        match self {
            LookBlock::Memory(rows) => rows.len(),
            LookBlock::File { count, .. } => *count,
        }
    }
}

/// A designer's set of looks for one season slot.
#[derive(Clone, Debug)]
pub struct Collection {
    pub designer_id: usize,
    pub slot: SeasonSlot,
    pub split: Split,
    pub looks: LookBlock,
}

/// Borrowed or materialized look rows for one collection.
pub enum Looks<'a> {
    Borrowed(&'a [Vec<f64>]),
    Owned(Vec<Vec<f64>>),
}

impl std::ops::Deref for Looks<'_> {
    type Target = [Vec<f64>];

    fn deref(&self) -> &[Vec<f64>] {
        match self {
            Looks::Borrowed(rows) => rows,
            Looks::Owned(rows) => rows,
        }
    }
}

/// Validated corpus: designer registry, dense timeline, collections sorted
/// by (t, designer). Immutable after construction apart from split labels.
#[derive(Clone, Debug)]
pub struct Corpus {
    designers: Vec<String>,
    feature_dim: usize,
    year0: i32,
    timeline: Vec<SeasonSlot>,
    collections: Vec<Collection>,
    index: BTreeMap<(usize, usize), usize>,
}

impl Corpus {
    /// Validates and canonicalizes: collections are sorted by (t, designer),
    /// the timeline is the dense range of slots between the earliest and
    /// latest collection, and (designer, t) pairs must be unique.
    pub fn new(
        designers: Vec<String>,
        feature_dim: usize,
        year0: i32,
        mut collections: Vec<Collection>,
    ) -> Result<Corpus, CorpusError> {
        if designers.is_empty() {
            return Err(CorpusError::Validation("corpus has no designers".into()));
        }
        if feature_dim == 0 {
            return Err(CorpusError::Validation(
                "feature_dim must be positive".into(),
            ));
        }
        if collections.is_empty() {
            return Err(CorpusError::Validation("corpus has no collections".into()));
        }
        for c in &collections {
            if c.designer_id >= designers.len() {
                return Err(CorpusError::Validation(format!(
                    "collection references designer {} but only {} are declared",
                    c.designer_id,
                    designers.len()
                )));
            }
            if c.looks.count() == 0 {
                return Err(CorpusError::Validation(format!(
                    "collection of designer {} at t={} has no looks",
                    c.designer_id, c.slot.t
                )));
            }
            if let LookBlock::Memory(rows) = &c.looks {
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != feature_dim {
                        return Err(CorpusError::Validation(format!(
                            "designer {} t={} look {} has dimension {} but corpus declares {}",
                            c.designer_id,
                            c.slot.t,
                            i,
                            row.len(),
                            feature_dim
                        )));
                    }
                    if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                        return Err(CorpusError::Validation(format!(
                            "designer {} t={} look {} value {} is not finite",
                            c.designer_id, c.slot.t, i, j
                        )));
                    }
                }
            }
        }
        collections.sort_by_key(|c| (c.slot.t, c.designer_id));
        let mut index = BTreeMap::new();
        for (i, c) in collections.iter().enumerate() {
            if index.insert((c.designer_id, c.slot.t), i).is_some() {
                return Err(CorpusError::Duplicate {
                    designer: c.designer_id,
                    t: c.slot.t,
                });
            }
        }
        let t_min = collections.first().map(|c| c.slot.t).unwrap_or(0);
        let t_max = collections.last().map(|c| c.slot.t).unwrap_or(0);
        let timeline = (t_min..=t_max)
            .map(|t| SeasonSlot::from_t(t, year0))
            .collect();
        Ok(Corpus {
            designers,
            feature_dim,
            year0,
            timeline,
            collections,
            index,
        })
    }

    pub fn designers(&self) -> &[String] {
        &self.designers
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn year0(&self) -> i32 {
        self.year0
    }

    pub fn timeline(&self) -> &[SeasonSlot] {
        &self.timeline
    }

    pub fn collections(&self) -> &[Collection] {
        &self.collections
    }

    pub fn collection(&self, idx: usize) -> &Collection {
        &self.collections[idx]
    }

    /// Materializes one collection's looks, reading from the feature file
    /// when the corpus is disk-backed.
    pub fn looks(&self, idx: usize) -> Result<Looks<'_>, CorpusError> {
        match &self.collections[idx].looks {
            LookBlock::Memory(rows) => Ok(Looks::Borrowed(rows)),
            LookBlock::File {
                path,
                row_start,
                count,
            } => {
                let rows = format::read_feature_rows(path, *row_start, *count, self.feature_dim)?;
                Ok(Looks::Owned(rows))
            }
        }
    }

    pub fn collection_index(&self, designer: usize, t: usize) -> Option<usize> {
        self.index.get(&(designer, t)).copied()
    }

    /// A designer's collections in chronological order.
    pub fn collections_of(&self, designer: usize) -> Vec<usize> {
        self.index
            .range((designer, 0)..(designer, usize::MAX))
            .map(|(_, &i)| i)
            .collect()
    }

    pub fn collections_at(&self, t: usize) -> Vec<usize> {
        self.collections
            .iter()
            .enumerate()
            .filter(|(_, c)| c.slot.t == t)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn collections_in_split(&self, split: Split) -> Vec<usize> {
        self.collections
            .iter()
            .enumerate()
            .filter(|(_, c)| c.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn set_split(&mut self, idx: usize, split: Split) {
        self.collections[idx].split = split;
    }

    /// Distinct designers with at least one collection in the given year.
    pub fn designers_showing_in_year(&self, year: i32) -> usize {
        self.collections
            .iter()
            .filter(|c| c.slot.year == year)
            .map(|c| c.designer_id)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Calendar years covered by the timeline.
    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.timeline.iter().map(|s| s.year).collect();
        years.dedup();
        years
    }

    pub fn total_looks(&self) -> usize {
        self.collections.iter().map(|c| c.looks.count()).sum()
    }

    /// FNV-1a hash of the designer registry; embedded in checkpoints so a
    /// model cannot silently be evaluated against a different corpus.
    pub fn designer_set_hash(&self) -> u64 {
        designer_set_hash(&self.designers)
    }

    /// Logical equality including feature values (materializes looks).
    pub fn content_eq(&self, other: &Corpus) -> Result<bool, CorpusError> {
        if self.designers != other.designers
            || self.feature_dim != other.feature_dim
            || self.year0 != other.year0
            || self.timeline != other.timeline
            || self.collections.len() != other.collections.len()
        {
            return Ok(false);
        }
        for (i, (a, b)) in self.collections.iter().zip(&other.collections).enumerate() {
            if a.designer_id != b.designer_id || a.slot != b.slot || a.split != b.split {
                return Ok(false);
            }
            let la = self.looks(i)?;
            let lb = other.looks(i)?;
            if *la != *lb {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn designer_set_hash(designers: &[String]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for name in designers {
        for &b in name.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Assigns split labels by a shuffled proportional split, deterministic per
/// seed. After the proportional assignment, designers left without a
/// training collection are repaired by swapping labels with a designer that
/// holds more than one training collection, when such a donor exists.
pub fn split_corpus(
    corpus: &mut Corpus,
    fractions: (f64, f64, f64),
    rng: &mut Rng,
) -> Result<(), CorpusError> {
    let (ft, fv, fs) = fractions;
    if !(ft.is_finite() && fv.is_finite() && fs.is_finite())
        || ft < 0.0
        || fv < 0.0
        || fs < 0.0
        || (ft + fv + fs - 1.0).abs() > 1e-9
    {
        return Err(CorpusError::Config(format!(
            "split fractions ({ft}, {fv}, {fs}) must be nonnegative and sum to 1"
        )));
    }
    let n = corpus.collections.len();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let n_train = ((ft * n as f64).round() as usize).min(n);
    let n_val = ((fv * n as f64).round() as usize).min(n - n_train);
    for (pos, &idx) in order.iter().enumerate() {
        let split = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        corpus.collections[idx].split = split;
    }

    // Repair pass: every designer keeps at least one training collection
    // when some donor designer has two or more.
    let designer_count = corpus.designers.len();
    for d in 0..designer_count {
        let mine = corpus.collections_of(d);
        if mine.is_empty()
            || mine
                .iter()
                .any(|&i| corpus.collections[i].split == Split::Train)
        {
            continue;
        }
        let donor = (0..n).find(|&i| {
            let c = &corpus.collections[i];
            c.split == Split::Train
                && c.designer_id != d
                && corpus
                    .collections_of(c.designer_id)
                    .iter()
                    .filter(|&&j| corpus.collections[j].split == Split::Train)
                    .count()
                    > 1
        });
        if let Some(donor_idx) = donor {
            let promoted = mine[0];
            let demoted_split = corpus.collections[promoted].split;
            corpus.collections[promoted].split = Split::Train;
            corpus.collections[donor_idx].split = demoted_split;
        }
    }
    Ok(())
}
