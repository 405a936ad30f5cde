//! Per-designer sequence training: Adam over batches of next-step
//! transitions sampled without replacement each epoch. Each designer owns
//! an independent model and a deterministically derived seed, so training
//! all designers is embarrassingly parallel.

use super::{
    all_transitions, sequence_loss, CellKind, DesignerHistory, SequenceError, SequenceParams,
};
use crate::tensor::{AdamState, Rng};

#[derive(Clone, Debug)]
pub struct SeqHyper {
    pub cell_kind: CellKind,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epoch: usize,
    pub patience: usize,
    /// Relative epoch-to-epoch loss change below which an epoch counts
    /// toward convergence.
    pub min_rel_change: f64,
    pub seed: u64,
}

impl Default for SeqHyper {
    fn default() -> SeqHyper {
        SeqHyper {
            cell_kind: CellKind::Lstm,
            hidden_dim: 128,
            batch_size: 16,
            learning_rate: 1e-4,
            max_epoch: 500,
            patience: 10,
            min_rel_change: 1e-5,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SeqTrainLog {
    /// Full training loss (all transitions) after each epoch.
    pub losses: Vec<f64>,
    pub converged_epoch: Option<usize>,
}

/// Trains one designer's model on their history. The history must contain
/// at least two steps (one transition). Deterministic per seed.
pub fn train_designer_sequence(
    history: &DesignerHistory,
    embed_dim: usize,
    hyper: &SeqHyper,
) -> Result<(SequenceParams, SeqTrainLog), SequenceError> {
    if history.len() < 2 {
        return Err(SequenceError::InsufficientHistory {
            designer: history.designer_id,
            have: history.len(),
            need: 2,
        });
    }
    let mut rng = Rng::new(hyper.seed);
    let mut params = SequenceParams::init(hyper.cell_kind, embed_dim, hyper.hidden_dim, &mut rng);
    let transitions = all_transitions(history);
    let shapes = params.tensor_shapes();
    let mut optimizer = AdamState::new(hyper.learning_rate, &shapes);
    let mut log = SeqTrainLog::default();
    let mut order: Vec<usize> = (0..transitions.len()).collect();
    let mut prev_loss = f64::INFINITY;
    let mut streak = 0usize;

    for epoch in 0..hyper.max_epoch {
        rng.shuffle(&mut order);
        for chunk in order.chunks(hyper.batch_size.max(1)) {
            let batch: Vec<_> = chunk.iter().map(|&i| transitions[i].clone()).collect();
            let (loss, grads) = sequence_loss(&params, history, &batch)?;
            if !loss.is_finite() {
                return Err(SequenceError::NonFinite {
                    designer: history.designer_id,
                    epoch,
                });
            }
            let grad_tensors = grads.tensors();
            let mut param_tensors = params.tensors_mut();
            optimizer.step(&mut param_tensors, &grad_tensors)?;
        }
        let (epoch_loss, _) = sequence_loss(&params, history, &transitions)?;
        if !epoch_loss.is_finite() {
            return Err(SequenceError::NonFinite {
                designer: history.designer_id,
                epoch,
            });
        }
        log.losses.push(epoch_loss);
        let rel_change = (prev_loss - epoch_loss).abs() / prev_loss.abs().max(1e-12);
        if prev_loss.is_finite() && rel_change < hyper.min_rel_change {
            streak += 1;
        } else {
            streak = 0;
        }
        prev_loss = epoch_loss;
        if streak >= hyper.patience {
            log.converged_epoch = Some(epoch);
            break;
        }
    }
    Ok((params, log))
}

/// Outcome of training every eligible designer. Designers lacking the
/// two-step training history are reported in `skipped`, not failed.
#[derive(Clone, Debug, Default)]
pub struct SequenceTrainOutcome {
    pub models: Vec<(usize, SequenceParams, SeqTrainLog)>,
    pub skipped: Vec<(usize, String)>,
}

/// Trains a model for every designer whose training history (all their
/// collections minus the held-out final one) has at least two steps.
/// Histories must already exclude the final collection. Per-designer seeds
/// derive from the global seed, so results do not depend on `jobs`.
pub fn train_all_sequences(
    histories: &[DesignerHistory],
    embed_dim: usize,
    hyper: &SeqHyper,
    jobs: usize,
) -> Result<SequenceTrainOutcome, SequenceError> {
    let mut outcome = SequenceTrainOutcome::default();
    let mut eligible: Vec<&DesignerHistory> = Vec::new();
    for history in histories {
        if history.len() < 2 {
            outcome.skipped.push((
                history.designer_id,
                format!(
                    "{} collection(s) in training range, needs at least 2",
                    history.len()
                ),
            ));
        } else {
            eligible.push(history);
        }
    }

    let train_one =
        |history: &DesignerHistory| -> Result<(usize, SequenceParams, SeqTrainLog), SequenceError> {
            let per_designer = SeqHyper {
                seed: Rng::derive_seed(hyper.seed, history.designer_id as u64),
                ..hyper.clone()
            };
            let (params, log) = train_designer_sequence(history, embed_dim, &per_designer)?;
            Ok((history.designer_id, params, log))
        };

    let jobs = jobs.max(1);
    if jobs == 1 || eligible.len() <= 1 {
        for history in &eligible {
            outcome.models.push(train_one(history)?);
        }
    } else {
        let buckets: Vec<Vec<&DesignerHistory>> = (0..jobs)
            .map(|w| eligible.iter().skip(w).step_by(jobs).copied().collect())
            .collect();
        let results: Vec<Result<Vec<_>, SequenceError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = buckets
                .iter()
                .map(|bucket| {
                    scope.spawn(|| {
                        bucket
                            .iter()
                            .map(|history| train_one(history))
                            .collect::<Result<Vec<_>, _>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sequence training worker panicked"))
                .collect()
        });
        for worker in results {
            outcome.models.extend(worker?);
        }
        outcome.models.sort_by_key(|(designer, _, _)| *designer);
    }
    Ok(outcome)
}
