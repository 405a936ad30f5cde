//! Alternating multi-task trainer: even epochs optimize the season head,
//! odd epochs the designer head, both through the shared look layer, with
//! AdaDelta steps per batch of whole collections.

use super::{
    batch_loss, collection_embed, EmbeddingError, EmbeddingParams, LabeledCollection, Task,
};
use crate::corpus::{Corpus, Split};
use crate::tensor::{cross_entropy, linear_forward, softmax, AdaDeltaState, Rng};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Clone, Debug)]
pub struct EmbedHyper {
    pub embed_dim: usize,
    pub batch_size: usize,
    pub max_epoch: usize,
    /// Consecutive no-improvement epochs per task before that task's
    /// monitor counts as converged.
    pub patience: usize,
    /// Relative validation-loss improvement below which an epoch counts as
    /// no improvement.
    pub min_rel_improvement: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for EmbedHyper {
    fn default() -> EmbedHyper {
        EmbedHyper {
            embed_dim: 256,
            batch_size: 16,
            max_epoch: 200,
            patience: 10,
            min_rel_improvement: 1e-4,
            rho: crate::tensor::ADADELTA_RHO,
            epsilon: crate::tensor::ADADELTA_EPS,
            seed: 42,
        }
    }
}

/// Loss and accuracy of one head on the train and validation splits.
#[derive(Clone, Copy, Debug, Default)]
pub struct TaskMetrics {
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Per-epoch record; `task` is the head optimized that epoch, metrics are
/// kept for both heads.
#[derive(Clone, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task: Task,
    pub designer: TaskMetrics,
    pub season: TaskMetrics,
}

impl EpochRecord {
    pub fn optimized(&self) -> &TaskMetrics {
        match self.task {
            Task::Designer => &self.designer,
            Task::Season => &self.season,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub converged: bool,
}

impl TrainingLog {
    /// Writes one row per epoch for the task optimized that epoch:
    /// `epoch task train_loss val_loss train_acc val_acc`.
    pub fn write(&self, path: &Path) -> Result<(), EmbeddingError> {
        let io = |source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        w.write_all(b"# epoch\ttask\ttrain_loss\tval_loss\ttrain_acc\tval_acc\n")
            .map_err(io)?;
        for rec in &self.epochs {
            let m = rec.optimized();
            let line = format!(
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                rec.epoch,
                rec.task.as_str(),
                m.train_loss,
                m.val_loss,
                m.train_acc,
                m.val_acc
            );
            w.write_all(line.as_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Mean loss and accuracy of both heads over a set of collections.
/// Collection embeddings are computed once and shared by the two heads.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeadMetrics {
    pub designer_loss: f64,
    pub designer_acc: f64,
    pub season_loss: f64,
    pub season_acc: f64,
}

pub fn split_metrics(
    params: &EmbeddingParams,
    corpus: &Corpus,
    indices: &[usize],
) -> Result<HeadMetrics, EmbeddingError> {
    let mut m = HeadMetrics::default();
    if indices.is_empty() {
        return Ok(m);
    }
    let mut designer_hits = 0usize;
    let mut season_hits = 0usize;
    for &idx in indices {
        let c = corpus.collection(idx);
        let looks = corpus.looks(idx)?;
        let embedded = collection_embed(params, &looks)?;
        let logits = linear_forward(
            &params.designer_weight,
            &embedded.values,
            &params.designer_bias,
        )?;
        let probs = softmax(&logits)?;
        let (loss, _) = cross_entropy(&probs, c.designer_id)?;
        m.designer_loss += loss;
        designer_hits += usize::from(argmax(&probs) == c.designer_id);

        let logits = linear_forward(&params.season_weight, &embedded.values, &params.season_bias)?;
        let probs = softmax(&logits)?;
        let season_label = c.slot.season.index();
        let (loss, _) = cross_entropy(&probs, season_label)?;
        m.season_loss += loss;
        season_hits += usize::from(argmax(&probs) == season_label);
    }
    let n = indices.len() as f64;
    m.designer_loss /= n;
    m.designer_acc = designer_hits as f64 / n;
    m.season_loss /= n;
    m.season_acc = season_hits as f64 / n;
    Ok(m)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains the embedding model per the alternating schedule and returns the
/// parameters with the best summed validation loss plus the training log.
/// Deterministic per seed.
pub fn train_embedding(
    corpus: &Corpus,
    hyper: &EmbedHyper,
) -> Result<(EmbeddingParams, TrainingLog), EmbeddingError> {
    let train_idx = corpus.collections_in_split(Split::Train);
    if train_idx.is_empty() {
        return Err(EmbeddingError::EmptyTrainSplit);
    }
    let val_idx = corpus.collections_in_split(Split::Val);
    // Corpora without a validation split are monitored on the training split.
    let monitor_idx: &[usize] = if val_idx.is_empty() {
        &train_idx
    } else {
        &val_idx
    };

    let mut rng = Rng::new(hyper.seed);
    let mut params = EmbeddingParams::init(
        corpus.feature_dim(),
        hyper.embed_dim,
        corpus.designers().len(),
        &mut rng,
    );
    let mut log = TrainingLog::default();
    if hyper.max_epoch == 0 {
        return Ok((params, log));
    }

    let shapes = params.tensor_shapes();
    let mut optimizer = AdaDeltaState::new(hyper.rho, hyper.epsilon, &shapes);
    let mut order = train_idx.clone();

    let mut best_params = params.clone();
    let mut best_combined = f64::INFINITY;
    let mut best_task_loss = [f64::INFINITY; 2]; // [designer, season]
    let mut streak = [0usize; 2];

    for epoch in 0..hyper.max_epoch {
        let task = if epoch % 2 == 0 {
            Task::Season
        } else {
            Task::Designer
        };
        rng.shuffle(&mut order);
        for chunk in order.chunks(hyper.batch_size.max(1)) {
            // Materialize only this batch's looks.
            let looks: Vec<_> = chunk
                .iter()
                .map(|&idx| corpus.looks(idx))
                .collect::<Result<_, _>>()?;
            let batch: Vec<LabeledCollection<'_>> = chunk
                .iter()
                .zip(&looks)
                .map(|(&idx, looks)| {
                    let c = corpus.collection(idx);
                    LabeledCollection {
                        looks,
                        designer: c.designer_id,
                        season: c.slot.season.index(),
                    }
                })
                .collect();
            let (loss, grads) = batch_loss(&params, &batch, task)?;
            if !loss.is_finite() {
                return Err(EmbeddingError::NonFinite {
                    what: "loss",
                    epoch,
                });
            }
            let grad_tensors = grads.tensors();
            let mut param_tensors = params.tensors_mut();
            optimizer.step(&mut param_tensors, &grad_tensors)?;
        }
        if !params.is_finite() {
            return Err(EmbeddingError::NonFinite {
                what: "parameter",
                epoch,
            });
        }

        let on_train = split_metrics(&params, corpus, &train_idx)?;
        let on_val = split_metrics(&params, corpus, monitor_idx)?;
        let designer_metrics = TaskMetrics {
            train_loss: on_train.designer_loss,
            train_acc: on_train.designer_acc,
            val_loss: on_val.designer_loss,
            val_acc: on_val.designer_acc,
        };
        let season_metrics = TaskMetrics {
            train_loss: on_train.season_loss,
            train_acc: on_train.season_acc,
            val_loss: on_val.season_loss,
            val_acc: on_val.season_acc,
        };
        log.epochs.push(EpochRecord {
            epoch,
            task,
            designer: designer_metrics,
            season: season_metrics,
        });

        let combined = designer_metrics.val_loss + season_metrics.val_loss;
        if combined < best_combined {
            best_combined = combined;
            best_params = params.clone();
            log.best_epoch = Some(epoch);
        }

        // Convergence: the optimized task's validation loss must improve by
        // at least min_rel_improvement relative to its best; `patience`
        // consecutive misses trip that task's monitor, and training stops
        // once both monitors have tripped.
        let slot = match task {
            Task::Designer => 0,
            Task::Season => 1,
        };
        let monitored = match task {
            Task::Designer => designer_metrics.val_loss,
            Task::Season => season_metrics.val_loss,
        };
        let improvement = if best_task_loss[slot].is_finite() {
            (best_task_loss[slot] - monitored) / best_task_loss[slot].abs().max(1e-12)
        } else {
            f64::INFINITY
        };
        if improvement < hyper.min_rel_improvement {
            streak[slot] += 1;
        } else {
            streak[slot] = 0;
        }
        if monitored < best_task_loss[slot] {
            best_task_loss[slot] = monitored;
        }
        if streak[0] >= hyper.patience && streak[1] >= hyper.patience {
            log.converged = true;
            break;
        }
    }
    Ok((best_params, log))
}
