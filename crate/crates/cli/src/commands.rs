//! Subcommand implementations. Data goes to files, summaries to stdout,
//! diagnostics to stderr via error propagation.

use crate::config::{resolve, resolve_seed, FileConfig};
use anyhow::{bail, Context, Result};
use runwayseq_core::corpus::synth::{generate_synthetic, write_ground_truth, SynthConfig};
use runwayseq_core::corpus::trends::{
    class_trend_series, write_trend_series, ClassPredictionTable,
};
use runwayseq_core::corpus::{load_corpus, write_corpus, Corpus, Split};
use runwayseq_core::embedding::{
    embed_all, read_embedding_checkpoint, split_metrics, train_embedding,
    write_embedding_checkpoint, EmbedHyper, EmbeddingParams,
};
use runwayseq_core::eval::{
    evaluate, evaluate_random_baseline, write_auc_reports, write_per_designer, AucReport,
    EvalConfig,
};
use runwayseq_core::sequence::{
    build_trend_table, designer_history, read_sequence_checkpoint, train_all_sequences,
    write_sequence_checkpoint, write_trend_table, CellKind, SeqHyper, SequenceParams, TrendScope,
};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{EvaluateArgs, GenSynthArgs, TrainEmbeddingArgs, TrainSeqArgs, TrendReportArgs};

pub fn gen_synth(args: &GenSynthArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let defaults = SynthConfig::default();
    let synth = SynthConfig {
        designers: resolve(args.designers, &cfg, "designers", defaults.designers)?,
        seasons: resolve(args.seasons, &cfg, "seasons", defaults.seasons)?,
        looks_min: resolve(args.looks_min, &cfg, "looks_min", defaults.looks_min)?,
        looks_max: resolve(args.looks_max, &cfg, "looks_max", defaults.looks_max)?,
        feature_dim: resolve(args.feature_dim, &cfg, "feature_dim", defaults.feature_dim)?,
        style_dim: resolve(args.style_dim, &cfg, "style_dim", defaults.style_dim)?,
        drift: resolve(args.drift, &cfg, "drift", defaults.drift)?,
        trend_strength: resolve(
            args.trend_strength,
            &cfg,
            "trend_strength",
            defaults.trend_strength,
        )?,
        noise: resolve(args.noise, &cfg, "noise", defaults.noise)?,
        skip_prob: resolve(args.skip_prob, &cfg, "skip_prob", defaults.skip_prob)?,
        split: cfg.split()?.unwrap_or(defaults.split),
        year0: resolve(args.year0, &cfg, "year0", defaults.year0)?,
        seed: resolve_seed(args.seed, &cfg)?,
    };
    let (corpus, ground_truth) = generate_synthetic(&synth)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    write_corpus(&corpus, &args.out.join("corpus.manifest"))?;
    write_ground_truth(&ground_truth, &args.out.join("latents.tsv"))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "designers {}", corpus.designers().len())?;
    writeln!(
        out,
        "timeline {} slots ({}-{} .. {}-{})",
        corpus.timeline().len(),
        corpus.timeline().first().unwrap().year,
        corpus.timeline().first().unwrap().season.as_str(),
        corpus.timeline().last().unwrap().year,
        corpus.timeline().last().unwrap().season.as_str(),
    )?;
    writeln!(out, "collections {}", corpus.collections().len())?;
    writeln!(out, "looks {}", corpus.total_looks())?;
    writeln!(
        out,
        "split {}/{}/{}",
        corpus.collections_in_split(Split::Train).len(),
        corpus.collections_in_split(Split::Val).len(),
        corpus.collections_in_split(Split::Test).len(),
    )?;
    Ok(())
}

pub fn train_embedding_cmd(args: &TrainEmbeddingArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus = load_corpus(&args.corpus)?;
    let defaults = EmbedHyper::default();
    let hyper = EmbedHyper {
        embed_dim: resolve(args.embed_dim, &cfg, "embed_dim", defaults.embed_dim)?,
        batch_size: resolve(args.batch_size, &cfg, "batch_size", defaults.batch_size)?,
        max_epoch: resolve(
            args.max_epoch,
            &cfg,
            "max_epoch_embedding",
            defaults.max_epoch,
        )?,
        patience: resolve(args.patience, &cfg, "patience_embedding", defaults.patience)?,
        seed: resolve_seed(args.seed, &cfg)?,
        ..defaults
    };
    let (params, log) = train_embedding(&corpus, &hyper)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create output directory {}", parent.display()))?;
    }
    write_embedding_checkpoint(&args.out, &params, corpus.designer_set_hash())?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_extension("log"));
    log.write(&log_path)?;

    let (indices, split_name) = report_split(&corpus);
    let metrics = split_metrics(&params, &corpus, &indices)?;
    let designer_baseline = 1.0 / corpus.designers().len() as f64;
    println!(
        "designer accuracy {:.4} on {split_name} split [baseline: {:.4}]",
        metrics.designer_acc, designer_baseline
    );
    println!(
        "season accuracy {:.4} on {split_name} split [baseline: 0.5000]",
        metrics.season_acc
    );
    println!(
        "epochs {} (converged: {})",
        log.epochs.len(),
        if log.converged { "yes" } else { "no" }
    );
    Ok(())
}

fn report_split(corpus: &Corpus) -> (Vec<usize>, &'static str) {
    for (split, name) in [
        (Split::Test, "test"),
        (Split::Val, "val"),
        (Split::Train, "train"),
    ] {
        let indices = corpus.collections_in_split(split);
        if !indices.is_empty() {
            return (indices, name);
        }
    }
    (Vec::new(), "empty")
}

fn load_checked_embedding(path: &Path, corpus: &Corpus) -> Result<EmbeddingParams> {
    let checkpoint = read_embedding_checkpoint(path)?;
    if checkpoint.designer_set_hash != corpus.designer_set_hash() {
        bail!(
            "embedding checkpoint {} was trained on a different designer set than the corpus",
            path.display()
        );
    }
    if checkpoint.params.feature_dim() != corpus.feature_dim() {
        bail!(
            "embedding checkpoint {} expects feature dimension {}, corpus has {}",
            path.display(),
            checkpoint.params.feature_dim(),
            corpus.feature_dim()
        );
    }
    Ok(checkpoint.params)
}

pub fn train_seq(args: &TrainSeqArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus = load_corpus(&args.corpus)?;
    let embedding = load_checked_embedding(&args.embedding, &corpus)?;
    let cell_kind = CellKind::parse(&args.cell).ok_or_else(|| {
        anyhow::anyhow!("unknown cell kind {:?}, expected rnn or lstm", args.cell)
    })?;
    let defaults = SeqHyper::default();
    let hyper = SeqHyper {
        cell_kind,
        hidden_dim: resolve(args.hidden_dim, &cfg, "hidden_dim", defaults.hidden_dim)?,
        batch_size: resolve(args.batch_size, &cfg, "batch_size", defaults.batch_size)?,
        learning_rate: resolve(args.lr, &cfg, "lr", defaults.learning_rate)?,
        max_epoch: resolve(args.max_epoch, &cfg, "max_epoch_seq", defaults.max_epoch)?,
        seed: resolve_seed(args.seed, &cfg)?,
        ..defaults
    };
    let jobs = resolve(args.jobs, &cfg, "jobs", 1usize)?;

    let table = embed_all(&embedding, &corpus)?;
    let trend = build_trend_table(&corpus, &table, TrendScope::TrainOnly);
    let histories: Vec<_> = (0..corpus.designers().len())
        .map(|d| designer_history(&corpus, &table, &trend, d).without_last())
        .collect();
    let outcome = train_all_sequences(&histories, embedding.embed_dim(), &hyper, jobs)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    for (designer, params, _) in &outcome.models {
        let path = args.out.join(format!(
            "designer_{designer:03}.{}.rwsq",
            cell_kind.as_str()
        ));
        write_sequence_checkpoint(&path, *designer, params, corpus.designer_set_hash())?;
    }
    let skip_path = args.out.join(format!("skipped.{}.tsv", cell_kind.as_str()));
    let mut skip_file = fs::File::create(&skip_path)
        .with_context(|| format!("cannot write skip report {}", skip_path.display()))?;
    writeln!(skip_file, "# designer_id\tdesigner\treason")?;
    for (designer, reason) in &outcome.skipped {
        writeln!(
            skip_file,
            "{designer}\t{}\t{reason}",
            corpus.designers()[*designer]
        )?;
    }
    write_trend_table(&trend, &args.out.join("trend_train.tsv"))?;

    println!(
        "trained {} {} model(s), skipped {}",
        outcome.models.len(),
        cell_kind.as_str(),
        outcome.skipped.len()
    );
    for (designer, reason) in &outcome.skipped {
        println!(
            "skipped {designer} ({}): {reason}",
            corpus.designers()[*designer]
        );
    }
    Ok(())
}

fn load_sequence_models(
    dirs: &[PathBuf],
    corpus: &Corpus,
    embedding: &EmbeddingParams,
) -> Result<BTreeMap<&'static str, BTreeMap<usize, SequenceParams>>> {
    let mut files = Vec::new();
    for dir in dirs {
        let entries = fs::read_dir(dir)
            .with_context(|| format!("cannot read sequence model directory {}", dir.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("rwsq") {
                files.push(path);
            }
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no .rwsq sequence checkpoints found under the given directories");
    }
    let mut grouped: BTreeMap<&'static str, BTreeMap<usize, SequenceParams>> = BTreeMap::new();
    for path in files {
        let checkpoint = read_sequence_checkpoint(&path)?;
        if checkpoint.designer_set_hash != corpus.designer_set_hash() {
            bail!(
                "sequence checkpoint {} was trained on a different designer set than the corpus",
                path.display()
            );
        }
        if checkpoint.params.embed_dim != embedding.embed_dim() {
            bail!(
                "sequence checkpoint {} expects embedding dimension {}, model has {}",
                path.display(),
                checkpoint.params.embed_dim,
                embedding.embed_dim()
            );
        }
        grouped
            .entry(checkpoint.params.kind().as_str())
            .or_default()
            .insert(checkpoint.designer_id, checkpoint.params);
    }
    Ok(grouped)
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus = load_corpus(&args.corpus)?;
    let embedding = load_checked_embedding(&args.embedding, &corpus)?;
    let grouped = load_sequence_models(&args.seq, &corpus, &embedding)?;
    let eval_cfg = EvalConfig {
        negatives_per_positive: resolve(args.negatives, &cfg, "negatives", 1usize)?,
        cohort: match resolve(
            args.cohort,
            &cfg,
            "cohort",
            runwayseq_core::eval::DEFAULT_COHORT,
        )? {
            0 => None,
            n => Some(n),
        },
        seed: resolve_seed(args.seed, &cfg)?,
    };

    let mut reports: Vec<AucReport> = Vec::new();
    for models in grouped.values() {
        reports.push(evaluate(&corpus, &embedding, models, &eval_cfg)?);
    }
    reports.push(evaluate_random_baseline(&corpus, &eval_cfg)?);

    let config_lines = vec![
        ("seed".to_string(), eval_cfg.seed.to_string()),
        (
            "negatives_per_positive".to_string(),
            eval_cfg.negatives_per_positive.to_string(),
        ),
        (
            "cohort".to_string(),
            eval_cfg
                .cohort
                .map(|n| n.to_string())
                .unwrap_or_else(|| "all".to_string()),
        ),
    ];
    let report_refs: Vec<&AucReport> = reports.iter().collect();
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create output directory {}", parent.display()))?;
    }
    write_auc_reports(&args.out, &report_refs, &config_lines)?;
    let per_designer_path = args
        .per_designer
        .clone()
        .unwrap_or_else(|| args.out.with_extension("designers.tsv"));
    write_per_designer(&per_designer_path, &corpus, &report_refs)?;

    for r in &reports {
        println!(
            "auc {} min {:.4} avg {:.4} max {:.4} ({} designers, {} samples)",
            r.scorer,
            r.min,
            r.mean,
            r.max,
            r.per_designer.len(),
            r.total_samples
        );
    }
    Ok(())
}

pub fn trend_report(args: &TrendReportArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let table = ClassPredictionTable::from_file(&args.classes)?;
    let series = class_trend_series(&table, &args.label, &corpus)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create output directory {}", parent.display()))?;
    }
    write_trend_series(&series, &args.out)?;
    println!(
        "wrote {} year(s) of normalized occurrences for {:?} to {}",
        series.len(),
        args.label,
        args.out.display()
    );
    Ok(())
}
