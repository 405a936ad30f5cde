//! Acceptance suite. Each test covers one criterion and prints a single
//! pass line (assertion failures mark the criterion failed). Run with
//! `cargo test -p runwayseq-core --test acceptance -- --nocapture` to see
//! the lines.

use runwayseq_core::corpus::synth::{generate_synthetic, SynthConfig};
use runwayseq_core::corpus::{load_corpus, write_corpus, Split};
use runwayseq_core::embedding::{
    batch_loss, embed_all, read_embedding_checkpoint, split_metrics, train_embedding,
    write_embedding_checkpoint, EmbedHyper, EmbeddingParams, LabeledCollection, Task, TrainingLog,
};
use runwayseq_core::eval::{
    auc, build_samples, cohort_designers, evaluate, evaluate_random_baseline, training_histories,
    AucReport, EvalConfig, ScoredSample,
};
use runwayseq_core::sequence::{
    all_transitions, build_trend_table, designer_history, predict_next, read_sequence_checkpoint,
    sequence_loss, train_all_sequences, write_sequence_checkpoint, CellKind, DesignerHistory,
    HistoryStep, SeqHyper, SequenceParams, TrendScope,
};
use runwayseq_core::tensor::{
    cosine_distance, cosine_similarity, finite_difference_check, maxpool_columns, softmax, Rng,
};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const DESK_EMBED_DIM: usize = 64;
const DESK_HIDDEN_DIM: usize = 32;

/// Desk-scale pipeline on the default planted corpus (12 designers, 16
/// slots, feature dimension 512, seed 42), trained single-threaded and
/// shared by the criteria that need it.
struct Pipeline {
    corpus: runwayseq_core::Corpus,
    embedding: EmbeddingParams,
    embedding_log: TrainingLog,
    lstm_models: BTreeMap<usize, SequenceParams>,
    rnn_models: BTreeMap<usize, SequenceParams>,
    lstm_report: AucReport,
    rnn_report: AucReport,
    random_report: AucReport,
    build_time: Duration,
}

fn desk_pipeline() -> &'static Pipeline {
    static PIPELINE: OnceLock<Pipeline> = OnceLock::new();
    PIPELINE.get_or_init(|| {
        let started = Instant::now();
        let (corpus, _) = generate_synthetic(&SynthConfig::default()).unwrap();
        let embed_hyper = EmbedHyper {
            embed_dim: DESK_EMBED_DIM,
            seed: 42,
            ..EmbedHyper::default()
        };
        let (embedding, embedding_log) = train_embedding(&corpus, &embed_hyper).unwrap();
        let table = embed_all(&embedding, &corpus).unwrap();
        let histories = training_histories(&corpus, &table);

        let mut models = Vec::new();
        for cell_kind in [CellKind::Lstm, CellKind::Rnn] {
            let hyper = SeqHyper {
                cell_kind,
                hidden_dim: DESK_HIDDEN_DIM,
                seed: 42,
                ..SeqHyper::default()
            };
            let outcome = train_all_sequences(&histories, DESK_EMBED_DIM, &hyper, 1).unwrap();
            assert!(
                outcome.skipped.is_empty(),
                "no designer should be skipped at desk scale"
            );
            models.push(
                outcome
                    .models
                    .into_iter()
                    .map(|(d, p, _)| (d, p))
                    .collect::<BTreeMap<_, _>>(),
            );
        }
        let rnn_models = models.pop().unwrap();
        let lstm_models = models.pop().unwrap();

        let eval_cfg = EvalConfig {
            negatives_per_positive: 50,
            cohort: None,
            seed: 42,
        };
        let lstm_report = evaluate(&corpus, &embedding, &lstm_models, &eval_cfg).unwrap();
        let rnn_report = evaluate(&corpus, &embedding, &rnn_models, &eval_cfg).unwrap();
        let random_report = evaluate_random_baseline(&corpus, &eval_cfg).unwrap();
        Pipeline {
            corpus,
            embedding,
            embedding_log,
            lstm_models,
            rnn_models,
            lstm_report,
            rnn_report,
            random_report,
            build_time: started.elapsed(),
        }
    })
}

fn random_history(rng: &mut Rng, steps: usize, embed_dim: usize) -> DesignerHistory {
    DesignerHistory {
        designer_id: 0,
        steps: (0..steps)
            .map(|t| HistoryStep {
                t,
                h_collection: (0..embed_dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
                h_trend_prev: (0..embed_dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
            })
            .collect(),
    }
}

#[test]
fn criterion_1_gradient_correctness() {
    let started = Instant::now();

    // (a) Embedding-model loss, both heads, F=8 / E=4 / 3 designers.
    let mut rng = Rng::new(1001);
    let params = EmbeddingParams::init(8, 4, 3, &mut rng);
    let looks_a: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..8).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
        .collect();
    let looks_b: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..8).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
        .collect();
    for task in [Task::Designer, Task::Season] {
        let batch = [
            LabeledCollection {
                looks: &looks_a,
                designer: 1,
                season: 0,
            },
            LabeledCollection {
                looks: &looks_b,
                designer: 2,
                season: 1,
            },
        ];
        let (_, grads) = batch_loss(&params, &batch, task).unwrap();
        let mut scratch = params.clone();
        let rel = finite_difference_check(
            |p| {
                scratch.assign_flat(p);
                let batch = [
                    LabeledCollection {
                        looks: &looks_a,
                        designer: 1,
                        season: 0,
                    },
                    LabeledCollection {
                        looks: &looks_b,
                        designer: 2,
                        season: 1,
                    },
                ];
                batch_loss(&scratch, &batch, task).unwrap().0
            },
            &params.flatten(),
            &grads.flatten(),
            1e-6,
        )
        .unwrap();
        assert!(
            rel < 1e-4,
            "embedding {} head max rel error {rel}",
            task.as_str()
        );
    }

    // (b) RNN and (c) LSTM: unroll length 5 through projection and cosine
    // loss, E=6, hidden 4.
    for (kind, label) in [(CellKind::Rnn, "rnn"), (CellKind::Lstm, "lstm")] {
        let params = SequenceParams::init(kind, 6, 4, &mut rng);
        let history = random_history(&mut rng, 5, 6);
        let targets = all_transitions(&history);
        assert_eq!(targets.len(), 4);
        let (_, grads) = sequence_loss(&params, &history, &targets).unwrap();
        let mut scratch = params.clone();
        let rel = finite_difference_check(
            |p| {
                scratch.assign_flat(p);
                sequence_loss(&scratch, &history, &targets).unwrap().0
            },
            &params.flatten(),
            &grads.flatten(),
            1e-6,
        )
        .unwrap();
        assert!(rel < 1e-4, "{label} unroll max rel error {rel}");
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(30),
        "gradient checks took {elapsed:?}"
    );
    println!("acceptance criterion 1 (gradient correctness, rel err < 1e-4, {elapsed:?}): PASS");
}

#[test]
fn criterion_2_random_baseline() {
    let (corpus, _) = generate_synthetic(&SynthConfig::default()).unwrap();
    let cfg = EvalConfig {
        negatives_per_positive: 1000, // 12 designers → 12000 samples
        cohort: None,
        seed: 2024,
    };
    let report = evaluate_random_baseline(&corpus, &cfg).unwrap();
    assert!(
        report.total_samples >= 10_000,
        "samples {}",
        report.total_samples
    );
    assert!(
        (report.mean - 0.5).abs() <= 0.02,
        "random scorer mean AUC {} outside 0.50 ± 0.02",
        report.mean
    );
    println!(
        "acceptance criterion 2 (random baseline {:.4} over {} samples): PASS",
        report.mean, report.total_samples
    );
}

#[test]
fn criterion_3_end_to_end_auc() {
    let pipeline = desk_pipeline();
    let lstm = pipeline.lstm_report.mean;
    let rnn = pipeline.rnn_report.mean;
    let random = pipeline.random_report.mean;
    assert!(lstm >= 0.70, "LSTM mean AUC {lstm} below 0.70");
    assert!(
        lstm - random >= 0.15,
        "LSTM mean AUC {lstm} does not exceed random {random} by 0.15"
    );
    assert!(
        rnn - random >= 0.10,
        "RNN mean AUC {rnn} does not exceed random {random} by 0.10"
    );
    assert!(
        pipeline.build_time < Duration::from_secs(600),
        "pipeline took {:?}",
        pipeline.build_time
    );
    println!(
        "acceptance criterion 3 (LSTM {:.4}, RNN {:.4}, random {:.4}, {:?}): PASS",
        lstm, rnn, random, pipeline.build_time
    );
}

#[test]
fn criterion_4_designer_classification() {
    let pipeline = desk_pipeline();
    let test_idx = pipeline.corpus.collections_in_split(Split::Test);
    let metrics = split_metrics(&pipeline.embedding, &pipeline.corpus, &test_idx).unwrap();
    let baseline = 1.0 / pipeline.corpus.designers().len() as f64;
    assert!(
        metrics.designer_acc >= 3.0 * baseline,
        "designer accuracy {} below 3x baseline {}",
        metrics.designer_acc,
        baseline
    );
    println!(
        "acceptance criterion 4 (designer accuracy {:.4} vs baseline {:.4}): PASS",
        metrics.designer_acc, baseline
    );
}

#[test]
fn criterion_5_structural_invariants() {
    let mut rng = Rng::new(5005);

    // Max pooling: permutation and duplication invariance.
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..4).map(|_| rng.uniform_in(-2.0, 2.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let (pooled, _) = maxpool_columns(&refs).unwrap();
    let mut shuffled = refs.clone();
    shuffled.reverse();
    let (pooled_rev, _) = maxpool_columns(&shuffled).unwrap();
    assert_eq!(pooled, pooled_rev);
    let mut doubled = refs.clone();
    doubled.push(refs[2]);
    let (pooled_dup, _) = maxpool_columns(&doubled).unwrap();
    assert_eq!(pooled, pooled_dup);

    // Softmax simplex property.
    for _ in 0..50 {
        let v: Vec<f64> = (0..7).map(|_| rng.uniform_in(-900.0, 900.0)).collect();
        let p = softmax(&v).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    // Cosine distance range and exact self-identity.
    for _ in 0..50 {
        let a: Vec<f64> = (0..6).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let d = cosine_distance(&a, &b).unwrap();
        assert!((-1e-12..=2.0 + 1e-12).contains(&d.value));
        assert_eq!(cosine_distance(&a, &a).unwrap().value, 0.0);
    }

    // AUC is a rank statistic: invariant under monotone score transforms.
    let scored: Vec<ScoredSample> = (0..60)
        .map(|i| ScoredSample {
            designer_id: i % 4,
            z_positive: rng.uniform(),
            z_negative: rng.uniform(),
        })
        .collect();
    let base = auc("base", &scored, 0).unwrap();
    let transformed: Vec<ScoredSample> = scored
        .iter()
        .map(|s| ScoredSample {
            designer_id: s.designer_id,
            z_positive: s.z_positive * 8.0,
            z_negative: s.z_negative * 8.0,
        })
        .collect();
    let after = auc("scaled", &transformed, 0).unwrap();
    assert_eq!(base.mean, after.mean);

    // Alternating schedule visible in the desk pipeline's training log.
    let log = &desk_pipeline().embedding_log;
    assert!(!log.epochs.is_empty());
    for rec in &log.epochs {
        let expected = if rec.epoch % 2 == 0 {
            Task::Season
        } else {
            Task::Designer
        };
        assert_eq!(
            rec.task, expected,
            "epoch {} optimized {:?}",
            rec.epoch, rec.task
        );
    }
    println!("acceptance criterion 5 (structural invariants): PASS");
}

#[test]
fn criterion_6_determinism() {
    // Small-scale rerun of every stage; artifacts must be byte-identical.
    let cfg = SynthConfig {
        designers: 4,
        seasons: 6,
        feature_dim: 32,
        style_dim: 4,
        looks_min: 2,
        looks_max: 4,
        seed: 7,
        ..SynthConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut stage_bytes: Vec<Vec<u8>> = Vec::new();
    for run in 0..2 {
        let (corpus, _) = generate_synthetic(&cfg).unwrap();
        let manifest = dir.path().join(format!("run{run}.manifest"));
        write_corpus(&corpus, &manifest).unwrap();

        let embed_hyper = EmbedHyper {
            embed_dim: 8,
            max_epoch: 8,
            seed: 7,
            ..EmbedHyper::default()
        };
        let (embedding, log) = train_embedding(&corpus, &embed_hyper).unwrap();
        let ckpt = dir.path().join(format!("run{run}.rwem"));
        write_embedding_checkpoint(&ckpt, &embedding, corpus.designer_set_hash()).unwrap();
        log.write(&dir.path().join(format!("run{run}.log"))).unwrap();

        let table = embed_all(&embedding, &corpus).unwrap();
        let histories = training_histories(&corpus, &table);
        let hyper = SeqHyper {
            cell_kind: CellKind::Lstm,
            hidden_dim: 4,
            max_epoch: 10,
            seed: 7,
            ..SeqHyper::default()
        };
        let outcome = train_all_sequences(&histories, 8, &hyper, 1).unwrap();
        let seq_ckpt = dir.path().join(format!("run{run}.rwsq"));
        let (d, params, _) = &outcome.models[0];
        write_sequence_checkpoint(&seq_ckpt, *d, params, corpus.designer_set_hash()).unwrap();

        let models: BTreeMap<usize, SequenceParams> =
            outcome.models.into_iter().map(|(d, p, _)| (d, p)).collect();
        let eval_cfg = EvalConfig {
            negatives_per_positive: 20,
            cohort: None,
            seed: 7,
        };
        let report = evaluate(&corpus, &embedding, &models, &eval_cfg).unwrap();
        let report_path = dir.path().join(format!("run{run}.report"));
        runwayseq_core::eval::write_auc_reports(&report_path, &[&report], &[]).unwrap();

        let mut bytes = Vec::new();
        for name in [
            format!("run{run}.manifest"),
            format!("run{run}.rwem"),
            format!("run{run}.log"),
            format!("run{run}.rwsq"),
            format!("run{run}.report"),
        ] {
            bytes.push(std::fs::read(dir.path().join(name)).unwrap());
        }
        // Feature files live under a shared features/ directory keyed by
        // designer; identical runs rewrite identical bytes.
        for d in 0..4 {
            bytes.push(
                std::fs::read(dir.path().join(format!("features/designer_{d:03}.rwft"))).unwrap(),
            );
        }
        stage_bytes.push(bytes.concat());
    }
    assert_eq!(
        stage_bytes[0], stage_bytes[1],
        "stage artifacts diverged between reruns"
    );
    println!("acceptance criterion 6 (byte-identical reruns): PASS");
}

#[test]
fn criterion_7_auc_oracle_equivalence() {
    // Score a small corpus with the trained desk LSTM models, keep ≤ 100
    // samples, and compare the evaluator's per-designer AUC with a direct
    // count of the order indicator.
    let pipeline = desk_pipeline();
    let corpus = &pipeline.corpus;
    let table = embed_all(&pipeline.embedding, corpus).unwrap();
    let trend = build_trend_table(corpus, &table, TrendScope::All);
    let eligible: BTreeSet<usize> = cohort_designers(corpus, None)
        .into_iter()
        .filter(|d| pipeline.lstm_models.contains_key(d))
        .collect();
    let mut rng = Rng::new(777);
    let samples = build_samples(corpus, &eligible, &mut rng, 8).unwrap();
    assert!(
        samples.len() <= 100,
        "want ≤ 100 samples, got {}",
        samples.len()
    );

    let mut scored = Vec::new();
    for s in &samples {
        let history = designer_history(corpus, &table, &trend, s.designer_id).without_last();
        let predicted = predict_next(&pipeline.lstm_models[&s.designer_id], &history).unwrap();
        scored.push(ScoredSample {
            designer_id: s.designer_id,
            z_positive: cosine_similarity(&predicted, table.get(s.positive)).unwrap(),
            z_negative: cosine_similarity(&predicted, table.get(s.negative)).unwrap(),
        });
    }
    // Force tie handling through the oracle too.
    scored.push(ScoredSample {
        designer_id: 0,
        z_positive: 0.5,
        z_negative: 0.5,
    });
    let report = auc("lstm", &scored, 777).unwrap();

    let mut oracle: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for s in &scored {
        let entry = oracle.entry(s.designer_id).or_insert((0.0, 0));
        if s.z_positive > s.z_negative {
            entry.0 += 1.0;
        } else if s.z_positive == s.z_negative {
            entry.0 += 0.5;
        }
        entry.1 += 1;
    }
    assert_eq!(report.per_designer.len(), oracle.len());
    for d in &report.per_designer {
        let (hits, count) = oracle[&d.designer_id];
        assert_eq!(d.auc, hits / count as f64, "designer {}", d.designer_id);
        assert_eq!(d.samples, count);
    }
    println!(
        "acceptance criterion 7 (oracle equality on {} samples): PASS",
        scored.len()
    );
}

#[test]
fn criterion_8_format_roundtrips() {
    // Corpus.
    let cfg = SynthConfig {
        designers: 3,
        seasons: 4,
        feature_dim: 16,
        style_dim: 4,
        seed: 88,
        ..SynthConfig::default()
    };
    let (corpus, _) = generate_synthetic(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("corpus.manifest");
    write_corpus(&corpus, &manifest).unwrap();
    let reloaded = load_corpus(&manifest).unwrap();
    assert!(corpus.content_eq(&reloaded).unwrap());

    // Embedding checkpoint, bit-exact.
    let pipeline = desk_pipeline();
    let rwem = dir.path().join("model.rwem");
    write_embedding_checkpoint(
        &rwem,
        &pipeline.embedding,
        pipeline.corpus.designer_set_hash(),
    )
    .unwrap();
    let loaded = read_embedding_checkpoint(&rwem).unwrap();
    assert_eq!(
        loaded.designer_set_hash,
        pipeline.corpus.designer_set_hash()
    );
    for (a, b) in pipeline
        .embedding
        .flatten()
        .iter()
        .zip(loaded.params.flatten().iter())
    {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // Sequence checkpoints for both cell kinds, bit-exact.
    for (models, name) in [
        (&pipeline.lstm_models, "lstm"),
        (&pipeline.rnn_models, "rnn"),
    ] {
        let (&designer, params) = models.iter().next().unwrap();
        let rwsq = dir.path().join(format!("model.{name}.rwsq"));
        write_sequence_checkpoint(&rwsq, designer, params, pipeline.corpus.designer_set_hash())
            .unwrap();
        let loaded = read_sequence_checkpoint(&rwsq).unwrap();
        assert_eq!(loaded.designer_id, designer);
        for (a, b) in params.flatten().iter().zip(loaded.params.flatten().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
    println!("acceptance criterion 8 (format round-trips): PASS");
}
