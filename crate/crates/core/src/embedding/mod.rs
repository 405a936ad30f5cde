//! Multi-task collection embedding model. Each look's feature vector passes
//! through a shared affine layer; a collection embedding is the column-wise
//! max over its look embeddings; two softmax heads classify the designer
//! and the season class. The two objectives are optimized on alternating
//! epochs by the trainer.

pub mod checkpoint;
pub mod train;

pub use checkpoint::{read_embedding_checkpoint, write_embedding_checkpoint, EmbeddingCheckpoint};
pub use train::{
    split_metrics, train_embedding, EmbedHyper, EpochRecord, HeadMetrics, TaskMetrics, TrainingLog,
};

use crate::corpus::{Corpus, CorpusError, SEASON_COUNT};
use crate::tensor::{
    cross_entropy, linear_forward, maxpool_backward, softmax, xavier_init, Matrix, MaxPoolAccum,
    Rng, TensorError,
};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("label {label} out of range for {what} ({len} classes)")]
    LabelOutOfRange {
        what: &'static str,
        label: usize,
        len: usize,
    },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("training produced a non-finite {what} at epoch {epoch}")]
    NonFinite { what: &'static str, epoch: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

/// Weights of the embedding network: shared look layer plus designer and
/// season classification heads. Weights are Xavier-initialized, biases zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingParams {
    pub look_weight: Matrix,
    pub look_bias: Vec<f64>,
    pub designer_weight: Matrix,
    pub designer_bias: Vec<f64>,
    pub season_weight: Matrix,
    pub season_bias: Vec<f64>,
}

impl EmbeddingParams {
    pub fn init(
        feature_dim: usize,
        embed_dim: usize,
        designer_count: usize,
        rng: &mut Rng,
    ) -> EmbeddingParams {
        EmbeddingParams {
            look_weight: xavier_init(embed_dim, feature_dim, rng),
            look_bias: vec![0.0; embed_dim],
            designer_weight: xavier_init(designer_count, embed_dim, rng),
            designer_bias: vec![0.0; designer_count],
            season_weight: xavier_init(SEASON_COUNT, embed_dim, rng),
            season_bias: vec![0.0; SEASON_COUNT],
        }
    }

    pub fn zeros(feature_dim: usize, embed_dim: usize, designer_count: usize) -> EmbeddingParams {
        EmbeddingParams {
            look_weight: Matrix::zeros(embed_dim, feature_dim),
            look_bias: vec![0.0; embed_dim],
            designer_weight: Matrix::zeros(designer_count, embed_dim),
            designer_bias: vec![0.0; designer_count],
            season_weight: Matrix::zeros(SEASON_COUNT, embed_dim),
            season_bias: vec![0.0; SEASON_COUNT],
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.look_weight.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.look_weight.rows()
    }

    pub fn designer_count(&self) -> usize {
        self.designer_weight.rows()
    }

    pub fn season_count(&self) -> usize {
        self.season_weight.rows()
    }

    /// Tensor bundle in checkpoint/optimizer order.
    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.look_weight.data(),
            &self.look_bias,
            self.designer_weight.data(),
            &self.designer_bias,
            self.season_weight.data(),
            &self.season_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.look_weight.data_mut(),
            &mut self.look_bias,
            self.designer_weight.data_mut(),
            &mut self.designer_bias,
            self.season_weight.data_mut(),
            &mut self.season_bias,
        ]
    }

    pub fn tensor_shapes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for tensor in self.tensors_mut() {
            tensor.copy_from_slice(&flat[offset..offset + tensor.len()]);
            offset += tensor.len();
        }
        debug_assert_eq!(offset, flat.len());
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// A collection embedding plus the argmax look index per coordinate, kept
/// for routing gradients back through the max pooling.
#[derive(Clone, Debug)]
pub struct CollectionEmbedding {
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
}

/// Embeds a collection: affine look layer per look, column-wise max across
/// looks. Invariant to look order and duplication.
pub fn collection_embed(
    params: &EmbeddingParams,
    looks: &[Vec<f64>],
) -> Result<CollectionEmbedding, EmbeddingError> {
    if looks.is_empty() {
        return Err(TensorError::Empty {
            op: "collection_embed",
        }
        .into());
    }
    let mut pool = MaxPoolAccum::new(params.embed_dim());
    for look in looks {
        let h_look = linear_forward(&params.look_weight, look, &params.look_bias)?;
        pool.push(&h_look)?;
    }
    let (values, argmax) = pool.finish()?;
    Ok(CollectionEmbedding { values, argmax })
}

/// Probability distribution over designers for a collection embedding.
pub fn predict_designer(
    params: &EmbeddingParams,
    embedding: &[f64],
) -> Result<Vec<f64>, EmbeddingError> {
    let logits = linear_forward(&params.designer_weight, embedding, &params.designer_bias)?;
    Ok(softmax(&logits)?)
}

/// Probability distribution over season classes for a collection embedding.
pub fn predict_season(
    params: &EmbeddingParams,
    embedding: &[f64],
) -> Result<Vec<f64>, EmbeddingError> {
    let logits = linear_forward(&params.season_weight, embedding, &params.season_bias)?;
    Ok(softmax(&logits)?)
}

/// Which classification head a training epoch optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Designer,
    Season,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Designer => "designer",
            Task::Season => "season",
        }
    }
}

/// One training instance: a collection's looks with its labels.
pub struct LabeledCollection<'a> {
    pub looks: &'a [Vec<f64>],
    pub designer: usize,
    pub season: usize,
}

/// Gradients mirroring `EmbeddingParams` (same tensor order).
pub type EmbeddingGrads = EmbeddingParams;

/// Mean cross entropy of the selected head over the batch, with gradients
/// through the head, the max pooling and the look layer. The inactive
/// head's gradients stay zero.
pub fn batch_loss(
    params: &EmbeddingParams,
    batch: &[LabeledCollection<'_>],
    task: Task,
) -> Result<(f64, EmbeddingGrads), EmbeddingError> {
    if batch.is_empty() {
        return Err(EmbeddingError::EmptyBatch);
    }
    let mut grads = EmbeddingParams::zeros(
        params.feature_dim(),
        params.embed_dim(),
        params.designer_count(),
    );
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for item in batch {
        let (head_weight, head_bias, label, len) = match task {
            Task::Designer => (
                &params.designer_weight,
                &params.designer_bias,
                item.designer,
                params.designer_count(),
            ),
            Task::Season => (
                &params.season_weight,
                &params.season_bias,
                item.season,
                params.season_count(),
            ),
        };
        if label >= len {
            return Err(EmbeddingError::LabelOutOfRange {
                what: task.as_str(),
                label,
                len,
            });
        }
        let embedded = collection_embed(params, item.looks)?;
        let logits = linear_forward(head_weight, &embedded.values, head_bias)?;
        let probs = softmax(&logits)?;
        let (loss, logit_grad) = cross_entropy(&probs, label)?;
        total += loss * scale;

        // Head gradients and the gradient on the collection embedding.
        let (grad_weight, grad_bias) = match task {
            Task::Designer => (&mut grads.designer_weight, &mut grads.designer_bias),
            Task::Season => (&mut grads.season_weight, &mut grads.season_bias),
        };
        grad_weight.add_scaled_outer(&logit_grad, &embedded.values, scale)?;
        for (g, lg) in grad_bias.iter_mut().zip(&logit_grad) {
            *g += lg * scale;
        }
        let mut grad_embedding = head_weight.matvec_transpose(&logit_grad)?;
        for g in grad_embedding.iter_mut() {
            *g *= scale;
        }

        // Route through the max pooling to the argmax looks, then through
        // the shared look layer.
        let look_grads = maxpool_backward(&embedded.argmax, &grad_embedding, item.looks.len());
        for (look, grad_row) in item.looks.iter().zip(&look_grads) {
            if grad_row.iter().all(|&g| g == 0.0) {
                continue;
            }
            grads.look_weight.add_scaled_outer(grad_row, look, 1.0)?;
            for (g, gr) in grads.look_bias.iter_mut().zip(grad_row) {
                *g += gr;
            }
        }
    }
    Ok((total, grads))
}

/// Collection embeddings for the whole corpus, indexed like
/// `corpus.collections()`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub embed_dim: usize,
    pub by_collection: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn get(&self, collection_idx: usize) -> &[f64] {
        &self.by_collection[collection_idx]
    }
}

/// Embeds every collection in the corpus, streaming looks one collection at
/// a time.
pub fn embed_all(
    params: &EmbeddingParams,
    corpus: &Corpus,
) -> Result<EmbeddingTable, EmbeddingError> {
    let mut by_collection = Vec::with_capacity(corpus.collections().len());
    for idx in 0..corpus.collections().len() {
        let looks = corpus.looks(idx)?;
        by_collection.push(collection_embed(params, &looks)?.values);
    }
    Ok(EmbeddingTable {
        embed_dim: params.embed_dim(),
        by_collection,
    })
}

#[cfg(test)]
mod tests;
