//! Next-season prediction evaluation: each designer's held-out final
//! collection is ranked against randomly sampled negative collections from
//! other designers by cosine similarity against the predicted embedding.
//! Per-designer AUC is the fraction of correctly ordered pairs (ties count
//! one half); the headline number is the unweighted mean over designers.

use crate::corpus::{Corpus, CorpusError};
use crate::embedding::{embed_all, EmbeddingError, EmbeddingParams, EmbeddingTable};
use crate::sequence::{
    build_trend_table, designer_history, predict_next, SequenceError, SequenceParams, TrendScope,
};
use crate::tensor::{cosine_similarity, Rng, TensorError};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("evaluation needs at least two designers with collections")]
    SingleDesigner,
    #[error("no evaluation samples could be built")]
    NoSamples,
    #[error("model/corpus mismatch: {0}")]
    Mismatch(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One ranking instance: designer `d`'s true collection at their final slot
/// `t` versus a random collection by some other designer at any slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationSample {
    pub designer_id: usize,
    pub t: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Builds one positive per eligible designer (their final-slot collection)
/// paired with `negatives_per_positive` independently drawn negatives from
/// other designers' collections at any slot. Deterministic per seed.
pub fn build_samples(
    corpus: &Corpus,
    eligible: &BTreeSet<usize>,
    rng: &mut Rng,
    negatives_per_positive: usize,
) -> Result<Vec<EvaluationSample>, EvalError> {
    let designers_with_collections: BTreeSet<usize> =
        corpus.collections().iter().map(|c| c.designer_id).collect();
    if designers_with_collections.len() < 2 {
        return Err(EvalError::SingleDesigner);
    }
    let mut samples = Vec::new();
    for &d in eligible {
        let mine = corpus.collections_of(d);
        if mine.len() < 2 {
            continue;
        }
        let positive = *mine.last().unwrap();
        let t = corpus.collection(positive).slot.t;
        let pool: Vec<usize> = (0..corpus.collections().len())
            .filter(|&i| corpus.collection(i).designer_id != d)
            .collect();
        for _ in 0..negatives_per_positive {
            let negative = pool[rng.below(pool.len())];
            samples.push(EvaluationSample {
                designer_id: d,
                t,
                positive,
                negative,
            });
        }
    }
    Ok(samples)
}

/// Ranking score: cosine similarity between the predicted embedding and the
/// candidate collection's embedding (computed through the embedding model).
/// Degenerate zero-norm embeddings score 0.
pub fn score(
    embedding: &EmbeddingParams,
    predicted: &[f64],
    candidate_looks: &[Vec<f64>],
) -> Result<f64, EvalError> {
    let candidate = crate::embedding::collection_embed(embedding, candidate_looks)?;
    Ok(cosine_similarity(predicted, &candidate.values)?)
}

/// A sample with both of its scores.
#[derive(Clone, Debug)]
pub struct ScoredSample {
    pub designer_id: usize,
    pub z_positive: f64,
    pub z_negative: f64,
}

#[derive(Clone, Debug)]
pub struct DesignerAuc {
    pub designer_id: usize,
    pub auc: f64,
    pub samples: usize,
}

/// AUC results in the shape of the summary table: per-designer values plus
/// min / mean / max over designers, and the pooled per-sample fraction.
#[derive(Clone, Debug)]
pub struct AucReport {
    pub scorer: String,
    pub per_designer: Vec<DesignerAuc>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction over all samples pooled together (not the headline number).
    pub pooled: f64,
    pub total_samples: usize,
    /// Designers requested but without samples or without a model.
    pub excluded: Vec<usize>,
    pub seed: u64,
}

/// Aggregates scored samples into per-designer AUCs (ties count 0.5) and
/// their unweighted mean, plus the pooled fraction.
pub fn auc(scorer: &str, scored: &[ScoredSample], seed: u64) -> Result<AucReport, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let mut grouped: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut pooled_sum = 0.0;
    for s in scored {
        let contribution = if s.z_positive > s.z_negative {
            1.0
        } else if s.z_positive == s.z_negative {
            0.5
        } else {
            0.0
        };
        let entry = grouped.entry(s.designer_id).or_insert((0.0, 0));
        entry.0 += contribution;
        entry.1 += 1;
        pooled_sum += contribution;
    }
    let per_designer: Vec<DesignerAuc> = grouped
        .into_iter()
        .map(|(designer_id, (sum, count))| DesignerAuc {
            designer_id,
            auc: sum / count as f64,
            samples: count,
        })
        .collect();
    let mean = per_designer.iter().map(|d| d.auc).sum::<f64>() / per_designer.len() as f64;
    let min = per_designer
        .iter()
        .map(|d| d.auc)
        .fold(f64::INFINITY, f64::min);
    let max = per_designer
        .iter()
        .map(|d| d.auc)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AucReport {
        scorer: scorer.to_string(),
        per_designer,
        mean,
        min,
        max,
        pooled: pooled_sum / scored.len() as f64,
        total_samples: scored.len(),
        excluded: Vec::new(),
        seed,
    })
}

/// Default evaluation cohort size: the designers with the most collections
/// are kept, mirroring a cold-start filter; clamped to the corpus size.
pub const DEFAULT_COHORT: usize = 202;

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub negatives_per_positive: usize,
    /// Evaluate only the `cohort` designers with the most collections
    /// (ties broken by designer id). `None` evaluates everyone.
    pub cohort: Option<usize>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> EvalConfig {
        EvalConfig {
            negatives_per_positive: 1,
            cohort: Some(DEFAULT_COHORT),
            seed: 42,
        }
    }
}

/// The `cohort` designers with the most collections, ties broken by id.
pub fn cohort_designers(corpus: &Corpus, cohort: Option<usize>) -> BTreeSet<usize> {
    let mut counts: Vec<(usize, usize)> = (0..corpus.designers().len())
        .map(|d| (corpus.collections_of(d).len(), d))
        .collect();
    counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let keep = cohort.unwrap_or(counts.len()).min(counts.len());
    counts[..keep].iter().map(|&(_, d)| d).collect()
}

/// Evaluates trained per-designer sequence models end to end: builds
/// histories (final slot held out) with the all-collections trend table,
/// predicts, scores positives and negatives through the embedding model and
/// aggregates AUC. Designers without a model are excluded and reported.
pub fn evaluate(
    corpus: &Corpus,
    embedding: &EmbeddingParams,
    models: &BTreeMap<usize, SequenceParams>,
    cfg: &EvalConfig,
) -> Result<AucReport, EvalError> {
    if embedding.feature_dim() != corpus.feature_dim() {
        return Err(EvalError::Mismatch(format!(
            "embedding model expects feature dimension {}, corpus has {}",
            embedding.feature_dim(),
            corpus.feature_dim()
        )));
    }
    if embedding.designer_count() != corpus.designers().len() {
        return Err(EvalError::Mismatch(format!(
            "embedding model has {} designers, corpus has {}",
            embedding.designer_count(),
            corpus.designers().len()
        )));
    }
    let table = embed_all(embedding, corpus)?;
    let trend = build_trend_table(corpus, &table, TrendScope::All);

    let cohort = cohort_designers(corpus, cfg.cohort);
    let eligible: BTreeSet<usize> = cohort
        .iter()
        .copied()
        .filter(|d| models.contains_key(d) && corpus.collections_of(*d).len() >= 2)
        .collect();
    let excluded: Vec<usize> = cohort.difference(&eligible).copied().collect();

    let mut rng = Rng::new(cfg.seed);
    let samples = build_samples(corpus, &eligible, &mut rng, cfg.negatives_per_positive)?;
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }

    // One prediction per designer; candidates are scored via the embedding
    // table (identical to embedding the looks directly).
    let mut predictions: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &d in &eligible {
        let history = designer_history(corpus, &table, &trend, d).without_last();
        let params = &models[&d];
        predictions.insert(d, predict_next(params, &history)?);
    }
    let scored: Vec<ScoredSample> = samples
        .iter()
        .map(|s| {
            let predicted = &predictions[&s.designer_id];
            Ok(ScoredSample {
                designer_id: s.designer_id,
                z_positive: cosine_similarity(predicted, table.get(s.positive))?,
                z_negative: cosine_similarity(predicted, table.get(s.negative))?,
            })
        })
        .collect::<Result<_, TensorError>>()?;

    let mut report = auc(models_label(models), &scored, cfg.seed)?;
    report.excluded = excluded;
    Ok(report)
}

fn models_label(models: &BTreeMap<usize, SequenceParams>) -> &'static str {
    match models.values().next().map(|p| p.kind()) {
        Some(crate::sequence::CellKind::Rnn) => "rnn",
        Some(crate::sequence::CellKind::Lstm) => "lstm",
        None => "none",
    }
}

/// Random baseline: every score is an independent uniform draw. Needs no
/// trained models; validates the AUC machinery itself.
pub fn evaluate_random_baseline(corpus: &Corpus, cfg: &EvalConfig) -> Result<AucReport, EvalError> {
    let cohort = cohort_designers(corpus, cfg.cohort);
    let eligible: BTreeSet<usize> = cohort
        .iter()
        .copied()
        .filter(|d| corpus.collections_of(*d).len() >= 2)
        .collect();
    let excluded: Vec<usize> = cohort.difference(&eligible).copied().collect();
    let mut rng = Rng::new(cfg.seed);
    let samples = build_samples(corpus, &eligible, &mut rng, cfg.negatives_per_positive)?;
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let scored: Vec<ScoredSample> = samples
        .iter()
        .map(|s| ScoredSample {
            designer_id: s.designer_id,
            z_positive: rng.uniform(),
            z_negative: rng.uniform(),
        })
        .collect();
    let mut report = auc("random", &scored, cfg.seed)?;
    report.excluded = excluded;
    Ok(report)
}

/// Writes reports in the summary-table shape: one `auc` row per scorer with
/// min / avg / max over designers, plus the resolved configuration.
pub fn write_auc_reports(
    path: &Path,
    reports: &[&AucReport],
    config_lines: &[(String, String)],
) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(b"# next-season prediction evaluation\n")
        .map_err(io)?;
    for (key, value) in config_lines {
        w.write_all(format!("config {key} {value}\n").as_bytes())
            .map_err(io)?;
    }
    for r in reports {
        let line = format!(
            "auc {} min {:.6} avg {:.6} max {:.6} pooled {:.6} designers {} samples {}\n",
            r.scorer,
            r.min,
            r.mean,
            r.max,
            r.pooled,
            r.per_designer.len(),
            r.total_samples
        );
        w.write_all(line.as_bytes()).map_err(io)?;
        if !r.excluded.is_empty() {
            let ids: Vec<String> = r.excluded.iter().map(|d| d.to_string()).collect();
            w.write_all(format!("excluded {} {}\n", r.scorer, ids.join(",")).as_bytes())
                .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Per-designer breakdown rows (`scorer designer_id name auc samples`),
/// the data behind per-designer performance plots.
pub fn write_per_designer(
    path: &Path,
    corpus: &Corpus,
    reports: &[&AucReport],
) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(b"# scorer\tdesigner_id\tdesigner\tauc\tsamples\n")
        .map_err(io)?;
    for r in reports {
        for d in &r.per_designer {
            let line = format!(
                "{}\t{}\t{}\t{:.6}\t{}\n",
                r.scorer,
                d.designer_id,
                corpus.designers()[d.designer_id],
                d.auc,
                d.samples
            );
            w.write_all(line.as_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Final-slot holdout training inputs: every designer's history without its
/// last collection, built over the train-only trend table.
pub fn training_histories(
    corpus: &Corpus,
    table: &EmbeddingTable,
) -> Vec<crate::sequence::DesignerHistory> {
    let trend = build_trend_table(corpus, table, TrendScope::TrainOnly);
    (0..corpus.designers().len())
        .map(|d| designer_history(corpus, table, &trend, d).without_last())
        .collect()
}
