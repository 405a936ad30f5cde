use super::*;
use crate::corpus::synth::{generate_synthetic, SynthConfig};
use crate::corpus::Split;
use crate::tensor::finite_difference_check;
use crate::tensor::rng::Rng;

fn toy_params(
    feature_dim: usize,
    embed_dim: usize,
    designers: usize,
    seed: u64,
) -> EmbeddingParams {
    EmbeddingParams::init(feature_dim, embed_dim, designers, &mut Rng::new(seed))
}

fn random_looks(rng: &mut Rng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
        .collect()
}

#[test]
fn single_look_embedding_equals_look_layer_output() {
    let params = toy_params(4, 3, 2, 1);
    let look = vec![0.3, -0.7, 1.1, 0.2];
    let embedded = collection_embed(&params, std::slice::from_ref(&look)).unwrap();
    let direct =
        crate::tensor::linear_forward(&params.look_weight, &look, &params.look_bias).unwrap();
    assert_eq!(embedded.values, direct);
    assert!(embedded.argmax.iter().all(|&i| i == 0));
}

#[test]
fn collection_embedding_is_permutation_invariant() {
    let params = toy_params(5, 4, 2, 2);
    let mut rng = Rng::new(3);
    let looks = random_looks(&mut rng, 6, 5);
    let base = collection_embed(&params, &looks).unwrap();
    let mut reversed = looks.clone();
    reversed.reverse();
    let permuted = collection_embed(&params, &reversed).unwrap();
    assert_eq!(base.values, permuted.values);
}

#[test]
fn collection_embedding_is_duplication_invariant() {
    let params = toy_params(5, 4, 2, 4);
    let mut rng = Rng::new(5);
    let looks = random_looks(&mut rng, 3, 5);
    let base = collection_embed(&params, &looks).unwrap();
    let mut duplicated = looks.clone();
    duplicated.push(looks[1].clone());
    duplicated.push(looks[0].clone());
    let doubled = collection_embed(&params, &duplicated).unwrap();
    assert_eq!(base.values, doubled.values);
}

#[test]
fn collection_embed_rejects_empty_and_mismatched() {
    let params = toy_params(4, 3, 2, 6);
    assert!(collection_embed(&params, &[]).is_err());
    assert!(collection_embed(&params, &[vec![1.0, 2.0]]).is_err());
}

#[test]
fn zero_params_predict_uniform() {
    let params = EmbeddingParams::zeros(4, 3, 7);
    let probs = predict_designer(&params, &[0.5, -0.5, 1.0]).unwrap();
    assert_eq!(probs, vec![1.0 / 7.0; 7]);
    let probs = predict_season(&params, &[0.5, -0.5, 1.0]).unwrap();
    assert_eq!(probs, vec![0.5, 0.5]);
}

#[test]
fn head_outputs_are_distributions() {
    let params = toy_params(4, 3, 5, 7);
    let mut rng = Rng::new(8);
    for _ in 0..20 {
        let h: Vec<f64> = (0..3).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let p = predict_designer(&params, &h).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = predict_season(&params, &h).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn constant_bias_shift_leaves_prediction_unchanged() {
    let mut params = toy_params(4, 3, 5, 9);
    let h = vec![0.4, -1.2, 0.9];
    let before = predict_designer(&params, &h).unwrap();
    for b in params.designer_bias.iter_mut() {
        *b += 3.5;
    }
    let after = predict_designer(&params, &h).unwrap();
    for (x, y) in before.iter().zip(&after) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn batch_loss_zero_params_is_log_class_count() {
    let params = EmbeddingParams::zeros(4, 3, 202);
    let looks = vec![vec![0.1, 0.2, 0.3, 0.4]];
    let batch = [LabeledCollection {
        looks: &looks,
        designer: 77,
        season: 1,
    }];
    let (loss, _) = batch_loss(&params, &batch, Task::Designer).unwrap();
    assert!((loss - 202.0f64.ln()).abs() < 1e-12);
    assert!((loss - 5.3083).abs() < 1e-4);
    let (loss, _) = batch_loss(&params, &batch, Task::Season).unwrap();
    assert!((loss - 2.0f64.ln()).abs() < 1e-12);
}

#[test]
fn batch_loss_near_zero_for_confident_correct_prediction() {
    // A huge bias on the true class drives the softmax to ~1.
    let mut params = EmbeddingParams::zeros(2, 2, 3);
    params.designer_bias[1] = 50.0;
    let looks = vec![vec![0.0, 0.0]];
    let batch = [LabeledCollection {
        looks: &looks,
        designer: 1,
        season: 0,
    }];
    let (loss, _) = batch_loss(&params, &batch, Task::Designer).unwrap();
    assert!(loss < 1e-12, "loss {loss}");
}

#[test]
fn batch_loss_label_out_of_range() {
    let params = EmbeddingParams::zeros(2, 2, 3);
    let looks = vec![vec![0.0, 0.0]];
    let batch = [LabeledCollection {
        looks: &looks,
        designer: 3,
        season: 0,
    }];
    assert!(matches!(
        batch_loss(&params, &batch, Task::Designer),
        Err(EmbeddingError::LabelOutOfRange { .. })
    ));
}

#[test]
fn batch_loss_gradients_match_finite_differences() {
    // Toy scale: F=8, E=4, three designers, two collections.
    let params = toy_params(8, 4, 3, 11);
    let mut rng = Rng::new(12);
    let looks_a = random_looks(&mut rng, 3, 8);
    let looks_b = random_looks(&mut rng, 2, 8);
    for task in [Task::Designer, Task::Season] {
        let batch = [
            LabeledCollection {
                looks: &looks_a,
                designer: 2,
                season: 0,
            },
            LabeledCollection {
                looks: &looks_b,
                designer: 0,
                season: 1,
            },
        ];
        let (_, grads) = batch_loss(&params, &batch, task).unwrap();
        let flat = params.flatten();
        let mut scratch = params.clone();
        let rel = finite_difference_check(
            |p| {
                scratch.assign_flat(p);
                let batch = [
                    LabeledCollection {
                        looks: &looks_a,
                        designer: 2,
                        season: 0,
                    },
                    LabeledCollection {
                        looks: &looks_b,
                        designer: 0,
                        season: 1,
                    },
                ];
                batch_loss(&scratch, &batch, task).unwrap().0
            },
            &flat,
            &grads.flatten(),
            1e-6,
        )
        .unwrap();
        assert!(rel < 1e-4, "task {:?} rel {rel}", task);
    }
}

fn quick_synth(designers: usize, seasons: usize) -> crate::corpus::Corpus {
    let cfg = SynthConfig {
        designers,
        seasons,
        feature_dim: 48,
        style_dim: 4,
        looks_min: 2,
        looks_max: 5,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg).unwrap().0
}

#[test]
fn train_zero_epochs_returns_initialized_params() {
    let corpus = quick_synth(3, 4);
    let hyper = EmbedHyper {
        embed_dim: 8,
        max_epoch: 0,
        seed: 5,
        ..EmbedHyper::default()
    };
    let (params, log) = train_embedding(&corpus, &hyper).unwrap();
    assert!(log.epochs.is_empty());
    let expected = EmbeddingParams::init(48, 8, 3, &mut Rng::new(5));
    assert_eq!(params, expected);
}

#[test]
fn season_epoch_leaves_designer_head_untouched() {
    // Epoch 0 optimizes the season head; the designer head receives zero
    // gradients and must stay bit-identical to its initialization. The
    // shared look layer moves for both tasks.
    let corpus = quick_synth(3, 4);
    let hyper = EmbedHyper {
        embed_dim: 8,
        max_epoch: 1,
        seed: 17,
        ..EmbedHyper::default()
    };
    let initial = EmbeddingParams::init(48, 8, 3, &mut Rng::new(17));
    let (after, log) = train_embedding(&corpus, &hyper).unwrap();
    assert_eq!(log.epochs[0].task, Task::Season);
    assert_eq!(after.designer_weight, initial.designer_weight);
    assert_eq!(after.designer_bias, initial.designer_bias);
    assert_ne!(after.season_weight, initial.season_weight);
    assert_ne!(after.look_weight, initial.look_weight);
}

#[test]
fn train_without_val_split_monitors_train_loss() {
    // All-train corpus: the convergence monitor falls back to the training
    // split instead of failing.
    let names = vec!["a".to_string(), "b".to_string()];
    let mut collections = Vec::new();
    for d in 0..2usize {
        for t in 0..3usize {
            let look: Vec<f64> = (0..6).map(|j| (d * 13 + t * 5 + j) as f64 * 0.1).collect();
            collections.push(crate::corpus::Collection {
                designer_id: d,
                slot: crate::corpus::SeasonSlot::from_t(t, 2000),
                split: Split::Train,
                looks: crate::corpus::LookBlock::Memory(vec![look]),
            });
        }
    }
    let corpus = crate::corpus::Corpus::new(names, 6, 2000, collections).unwrap();
    let hyper = EmbedHyper {
        embed_dim: 4,
        max_epoch: 6,
        seed: 3,
        ..EmbedHyper::default()
    };
    let (params, log) = train_embedding(&corpus, &hyper).unwrap();
    assert!(params.is_finite());
    assert_eq!(log.epochs.len(), 6);
}

#[test]
fn train_is_deterministic_per_seed() {
    let corpus = quick_synth(3, 4);
    let hyper = EmbedHyper {
        embed_dim: 8,
        max_epoch: 6,
        seed: 123,
        ..EmbedHyper::default()
    };
    let (a, _) = train_embedding(&corpus, &hyper).unwrap();
    let (b, _) = train_embedding(&corpus, &hyper).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_log_alternates_season_then_designer() {
    let corpus = quick_synth(3, 4);
    let hyper = EmbedHyper {
        embed_dim: 8,
        max_epoch: 7,
        seed: 1,
        ..EmbedHyper::default()
    };
    let (_, log) = train_embedding(&corpus, &hyper).unwrap();
    assert_eq!(log.epochs.len(), 7);
    for rec in &log.epochs {
        let expected = if rec.epoch % 2 == 0 {
            Task::Season
        } else {
            Task::Designer
        };
        assert_eq!(rec.task, expected, "epoch {}", rec.epoch);
    }
}

#[test]
fn training_learns_designers_above_baseline() {
    let corpus = quick_synth(5, 8);
    let hyper = EmbedHyper {
        embed_dim: 16,
        max_epoch: 80,
        seed: 7,
        ..EmbedHyper::default()
    };
    let (params, log) = train_embedding(&corpus, &hyper).unwrap();
    let val = corpus.collections_in_split(Split::Val);
    let metrics = split_metrics(&params, &corpus, &val).unwrap();
    let baseline = 1.0 / 5.0;
    assert!(
        metrics.designer_acc > 3.0 * baseline,
        "designer val accuracy {} vs baseline {baseline}",
        metrics.designer_acc
    );
    assert!(!log.epochs.is_empty());
    // Distribution outputs stay valid after training.
    let looks = corpus.looks(0).unwrap();
    let h = collection_embed(&params, &looks).unwrap();
    let p = predict_designer(&params, &h.values).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn random_params_score_near_half_on_balanced_seasons() {
    let corpus = quick_synth(4, 10);
    let params = toy_params(48, 8, 4, 99);
    let all: Vec<usize> = (0..corpus.collections().len()).collect();
    let metrics = split_metrics(&params, &corpus, &all).unwrap();
    assert!(
        (metrics.season_acc - 0.5).abs() <= 0.15,
        "season accuracy {} should be near chance",
        metrics.season_acc
    );
}

#[test]
fn embed_all_covers_every_collection_and_repeats() {
    let corpus = quick_synth(3, 4);
    let params = toy_params(48, 8, 3, 21);
    let table = embed_all(&params, &corpus).unwrap();
    assert_eq!(table.by_collection.len(), corpus.collections().len());
    let again = embed_all(&params, &corpus).unwrap();
    assert_eq!(table, again);
}

#[test]
fn embed_all_constant_designer_gives_identical_embeddings() {
    let cfg = SynthConfig {
        designers: 3,
        seasons: 5,
        feature_dim: 24,
        style_dim: 4,
        drift: 0.0,
        trend_strength: 0.0,
        noise: 0.0,
        ..SynthConfig::default()
    };
    let (corpus, _) = generate_synthetic(&cfg).unwrap();
    let params = toy_params(24, 6, 3, 31);
    let table = embed_all(&params, &corpus).unwrap();
    for d in 0..3 {
        let ids = corpus.collections_of(d);
        for &idx in &ids[1..] {
            assert_eq!(table.get(idx), table.get(ids[0]));
        }
    }
}

#[test]
fn checkpoint_roundtrip_bit_exact() {
    let params = toy_params(12, 6, 4, 41);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.rwem");
    write_embedding_checkpoint(&path, &params, 0xDEAD_BEEF).unwrap();
    let loaded = read_embedding_checkpoint(&path).unwrap();
    assert_eq!(loaded.designer_set_hash, 0xDEAD_BEEF);
    assert_eq!(loaded.params, params);
    for (a, b) in params.flatten().iter().zip(loaded.params.flatten().iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn checkpoint_rejects_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.rwem");
    std::fs::write(&path, b"XXXX").unwrap();
    assert!(read_embedding_checkpoint(&path).is_err());
}

#[test]
fn training_log_file_has_alternating_tasks() {
    let corpus = quick_synth(3, 4);
    let hyper = EmbedHyper {
        embed_dim: 8,
        max_epoch: 5,
        seed: 2,
        ..EmbedHyper::default()
    };
    let (_, log) = train_embedding(&corpus, &hyper).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.log");
    log.write(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let tasks: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').nth(1).unwrap())
        .collect();
    assert_eq!(
        tasks,
        vec!["season", "designer", "season", "designer", "season"]
    );
}
