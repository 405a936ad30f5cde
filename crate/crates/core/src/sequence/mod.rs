//! Per-designer style evolution models. At each step the recurrent cell
//! consumes the designer's collection embedding concatenated with the
//! previous slot's industry trend embedding; an affine projection maps the
//! final hidden state to a predicted next-season collection embedding.
//! Training minimizes the cosine distance between predictions and the true
//! next collection embeddings (teacher forcing), with full backpropagation
//! through time derived by hand.

pub mod checkpoint;
pub mod train;

pub use checkpoint::{
    read_sequence_checkpoint, write_sequence_checkpoint, write_trend_table, SequenceCheckpoint,
};
pub use train::{train_all_sequences, train_designer_sequence, SeqHyper, SeqTrainLog};

use crate::corpus::Corpus;
use crate::embedding::EmbeddingTable;
use crate::tensor::{
    cosine_distance, linear_forward, maxpool_columns, sigmoid, sigmoid_deriv_from_output,
    tanh_deriv_from_output, xavier_init, Matrix, Rng, TensorError,
};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("no collections at slot t={t}")]
    EmptySlot { t: usize },
    #[error("history is empty")]
    EmptyHistory,
    #[error("designer {designer} has {have} collections in training range, needs at least {need}")]
    InsufficientHistory {
        designer: usize,
        have: usize,
        need: usize,
    },
    #[error("operation expects a {expected} cell")]
    CellMismatch { expected: &'static str },
    #[error("no targets given for sequence loss")]
    NoTargets,
    #[error("target step {step} out of range for history of length {len}")]
    TargetOutOfRange { step: usize, len: usize },
    #[error("training produced a non-finite loss for designer {designer} at epoch {epoch}")]
    NonFinite { designer: usize, epoch: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Rnn,
    Lstm,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Option<CellKind> {
        match s {
            "rnn" => Some(CellKind::Rnn),
            "lstm" => Some(CellKind::Lstm),
            _ => None,
        }
    }
}

/// One gate: input transform (hidden × 2·embed), recurrent transform
/// (hidden × hidden) and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub input_weight: Matrix,
    pub recur_weight: Matrix,
    pub bias: Vec<f64>,
}

impl GateParams {
    fn init(embed_dim: usize, hidden_dim: usize, rng: &mut Rng) -> GateParams {
        GateParams {
            input_weight: xavier_init(hidden_dim, 2 * embed_dim, rng),
            recur_weight: xavier_init(hidden_dim, hidden_dim, rng),
            bias: vec![0.0; hidden_dim],
        }
    }

    fn zeros(embed_dim: usize, hidden_dim: usize) -> GateParams {
        GateParams {
            input_weight: Matrix::zeros(hidden_dim, 2 * embed_dim),
            recur_weight: Matrix::zeros(hidden_dim, hidden_dim),
            bias: vec![0.0; hidden_dim],
        }
    }

    /// Pre-activation W·input + U·hidden_prev + b.
    fn preactivation(&self, input: &[f64], hidden_prev: &[f64]) -> Result<Vec<f64>, TensorError> {
        let mut z = linear_forward(&self.input_weight, input, &self.bias)?;
        let recur = self.recur_weight.matvec(hidden_prev)?;
        for (zi, ri) in z.iter_mut().zip(&recur) {
            *zi += ri;
        }
        Ok(z)
    }
}

/// LSTM gates in fixed order: forget, input, output, cell candidate.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)] // model parameters, not a hot value type
pub enum CellParams {
    Rnn(GateParams),
    Lstm {
        forget: GateParams,
        input: GateParams,
        output: GateParams,
        cell: GateParams,
    },
}

/// One designer's sequence model: recurrent cell plus the output projection
/// mapping the hidden state back to embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceParams {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub cell: CellParams,
    pub proj_weight: Matrix,
    pub proj_bias: Vec<f64>,
}

impl SequenceParams {
    pub fn init(
        kind: CellKind,
        embed_dim: usize,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> SequenceParams {
        let cell = match kind {
            CellKind::Rnn => CellParams::Rnn(GateParams::init(embed_dim, hidden_dim, rng)),
            CellKind::Lstm => CellParams::Lstm {
                forget: GateParams::init(embed_dim, hidden_dim, rng),
                input: GateParams::init(embed_dim, hidden_dim, rng),
                output: GateParams::init(embed_dim, hidden_dim, rng),
                cell: GateParams::init(embed_dim, hidden_dim, rng),
            },
        };
        SequenceParams {
            embed_dim,
            hidden_dim,
            cell,
            proj_weight: xavier_init(embed_dim, hidden_dim, rng),
            proj_bias: vec![0.0; embed_dim],
        }
    }

    pub fn zeros(kind: CellKind, embed_dim: usize, hidden_dim: usize) -> SequenceParams {
        let cell = match kind {
            CellKind::Rnn => CellParams::Rnn(GateParams::zeros(embed_dim, hidden_dim)),
            CellKind::Lstm => CellParams::Lstm {
                forget: GateParams::zeros(embed_dim, hidden_dim),
                input: GateParams::zeros(embed_dim, hidden_dim),
                output: GateParams::zeros(embed_dim, hidden_dim),
                cell: GateParams::zeros(embed_dim, hidden_dim),
            },
        };
        SequenceParams {
            embed_dim,
            hidden_dim,
            cell,
            proj_weight: Matrix::zeros(embed_dim, hidden_dim),
            proj_bias: vec![0.0; embed_dim],
        }
    }

    pub fn kind(&self) -> CellKind {
        match self.cell {
            CellParams::Rnn(_) => CellKind::Rnn,
            CellParams::Lstm { .. } => CellKind::Lstm,
        }
    }

    fn gates(&self) -> Vec<&GateParams> {
        match &self.cell {
            CellParams::Rnn(g) => vec![g],
            CellParams::Lstm {
                forget,
                input,
                output,
                cell,
            } => vec![forget, input, output, cell],
        }
    }

    /// Tensor bundle in checkpoint/optimizer order: per gate (input weight,
    /// recurrent weight, bias), then projection weight and bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in self.gates() {
            out.push(g.input_weight.data());
            out.push(g.recur_weight.data());
            out.push(g.bias.as_slice());
        }
        out.push(self.proj_weight.data());
        out.push(self.proj_bias.as_slice());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let SequenceParams {
            cell,
            proj_weight,
            proj_bias,
            ..
        } = self;
        let gates: Vec<&mut GateParams> = match cell {
            CellParams::Rnn(g) => vec![g],
            CellParams::Lstm {
                forget,
                input,
                output,
                cell,
            } => vec![forget, input, output, cell],
        };
        let mut out = Vec::new();
        for g in gates {
            out.push(g.input_weight.data_mut());
            out.push(g.recur_weight.data_mut());
            out.push(g.bias.as_mut_slice());
        }
        out.push(proj_weight.data_mut());
        out.push(proj_bias.as_mut_slice());
        out
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

/// Gradients use the same layout as the parameters.
pub type SequenceGrads = SequenceParams;

/// Industry-wide trend embedding per slot: the column-wise max over all
/// (filtered) designers' collection embeddings at that slot. Slots without
/// any contributing collection hold `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrendTable {
    pub embed_dim: usize,
    pub by_slot: Vec<Option<Vec<f64>>>,
}

impl TrendTable {
    pub fn at(&self, t: usize) -> Option<&[f64]> {
        self.by_slot.get(t).and_then(|v| v.as_deref())
    }
}

/// Which collections contribute to a trend table. `TrainOnly` keeps held-out
/// collections out of training inputs; evaluation uses every collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrendScope {
    TrainOnly,
    All,
}

/// Trend embedding for one slot: max over the contributing designers'
/// collection embeddings. Designers absent at the slot are simply excluded.
pub fn trend_embedding(
    corpus: &Corpus,
    table: &EmbeddingTable,
    t: usize,
    scope: TrendScope,
) -> Result<Vec<f64>, SequenceError> {
    let rows: Vec<&[f64]> = corpus
        .collections_at(t)
        .into_iter()
        .filter(|&idx| match scope {
            TrendScope::All => true,
            TrendScope::TrainOnly => corpus.collection(idx).split == crate::corpus::Split::Train,
        })
        .map(|idx| table.get(idx))
        .collect();
    if rows.is_empty() {
        return Err(SequenceError::EmptySlot { t });
    }
    let (pooled, _) = maxpool_columns(&rows)?;
    Ok(pooled)
}

/// Trend embeddings for every timeline slot.
pub fn build_trend_table(corpus: &Corpus, table: &EmbeddingTable, scope: TrendScope) -> TrendTable {
    let t_max = corpus.timeline().last().map(|s| s.t).unwrap_or(0);
    let by_slot = (0..=t_max)
        .map(|t| trend_embedding(corpus, table, t, scope).ok())
        .collect();
    TrendTable {
        embed_dim: table.embed_dim,
        by_slot,
    }
}

/// One step of a designer's history: the collection embedding at slot `t`
/// and the trend embedding of slot `t − 1` (zeros when no previous trend
/// exists).
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryStep {
    pub t: usize,
    pub h_collection: Vec<f64>,
    pub h_trend_prev: Vec<f64>,
}

/// A designer's chronological sequence inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignerHistory {
    pub designer_id: usize,
    pub steps: Vec<HistoryStep>,
}

impl DesignerHistory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The history without its final step (the final collection is the
    /// held-out evaluation positive).
    pub fn without_last(&self) -> DesignerHistory {
        DesignerHistory {
            designer_id: self.designer_id,
            steps: self.steps[..self.steps.len().saturating_sub(1)].to_vec(),
        }
    }
}

/// Builds the full history of one designer over their present slots.
pub fn designer_history(
    corpus: &Corpus,
    table: &EmbeddingTable,
    trend: &TrendTable,
    designer: usize,
) -> DesignerHistory {
    let steps = corpus
        .collections_of(designer)
        .into_iter()
        .map(|idx| {
            let t = corpus.collection(idx).slot.t;
            let h_trend_prev = if t == 0 {
                vec![0.0; table.embed_dim]
            } else {
                trend
                    .at(t - 1)
                    .map(|v| v.to_vec())
                    .unwrap_or_else(|| vec![0.0; table.embed_dim])
            };
            HistoryStep {
                t,
                h_collection: table.get(idx).to_vec(),
                h_trend_prev,
            }
        })
        .collect();
    DesignerHistory {
        designer_id: designer,
        steps,
    }
}

fn concat_input(
    params: &SequenceParams,
    h_collection: &[f64],
    h_trend_prev: &[f64],
) -> Result<Vec<f64>, SequenceError> {
    if h_collection.len() != params.embed_dim || h_trend_prev.len() != params.embed_dim {
        return Err(TensorError::Shape {
            op: "sequence_input",
            detail: format!(
                "expected embeddings of dimension {}, got {} and {}",
                params.embed_dim,
                h_collection.len(),
                h_trend_prev.len()
            ),
        }
        .into());
    }
    let mut input = Vec::with_capacity(2 * params.embed_dim);
    input.extend_from_slice(h_collection);
    input.extend_from_slice(h_trend_prev);
    Ok(input)
}

/// RNN step: tanh(W·[h_c ‖ h_tr_prev] + U·h_prev + b). Outputs lie in
/// (−1, 1).
pub fn rnn_step(
    params: &SequenceParams,
    h_collection: &[f64],
    h_trend_prev: &[f64],
    hidden_prev: &[f64],
) -> Result<Vec<f64>, SequenceError> {
    let CellParams::Rnn(gate) = &params.cell else {
        return Err(SequenceError::CellMismatch { expected: "rnn" });
    };
    let input = concat_input(params, h_collection, h_trend_prev)?;
    let z = gate.preactivation(&input, hidden_prev)?;
    Ok(z.into_iter().map(f64::tanh).collect())
}

/// LSTM hidden and cell state.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> LstmState {
        LstmState {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }
}

/// LSTM step: sigmoid gates over input and recurrent transforms,
/// c = f ⊙ c_prev + i ⊙ tanh(candidate), h = o ⊙ tanh(c).
pub fn lstm_step(
    params: &SequenceParams,
    h_collection: &[f64],
    h_trend_prev: &[f64],
    state: &LstmState,
) -> Result<LstmState, SequenceError> {
    let CellParams::Lstm {
        forget,
        input: input_gate,
        output,
        cell,
    } = &params.cell
    else {
        return Err(SequenceError::CellMismatch { expected: "lstm" });
    };
    let input = concat_input(params, h_collection, h_trend_prev)?;
    let step = lstm_forward_step(
        forget,
        input_gate,
        output,
        cell,
        input,
        &state.hidden,
        &state.cell,
    )?;
    Ok(LstmState {
        hidden: step.hidden,
        cell: step.cell,
    })
}

fn lstm_forward_step(
    forget: &GateParams,
    input_gate: &GateParams,
    output: &GateParams,
    cell: &GateParams,
    input: Vec<f64>,
    hidden_prev: &[f64],
    cell_prev: &[f64],
) -> Result<LstmStepCache, TensorError> {
    let f: Vec<f64> = forget
        .preactivation(&input, hidden_prev)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let i: Vec<f64> = input_gate
        .preactivation(&input, hidden_prev)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let o: Vec<f64> = output
        .preactivation(&input, hidden_prev)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let candidate: Vec<f64> = cell
        .preactivation(&input, hidden_prev)?
        .into_iter()
        .map(f64::tanh)
        .collect();
    let new_cell: Vec<f64> = f
        .iter()
        .zip(cell_prev)
        .zip(i.iter().zip(&candidate))
        .map(|((f, c_prev), (i, cand))| f * c_prev + i * cand)
        .collect();
    let cell_tanh: Vec<f64> = new_cell.iter().map(|c| c.tanh()).collect();
    let hidden: Vec<f64> = o.iter().zip(&cell_tanh).map(|(o, tc)| o * tc).collect();
    Ok(LstmStepCache {
        input,
        forget: f,
        input_gate: i,
        output: o,
        candidate,
        cell: new_cell,
        cell_tanh,
        hidden,
    })
}

struct RnnStepCache {
    input: Vec<f64>,
    hidden: Vec<f64>,
}

struct LstmStepCache {
    input: Vec<f64>,
    forget: Vec<f64>,
    input_gate: Vec<f64>,
    output: Vec<f64>,
    candidate: Vec<f64>,
    cell: Vec<f64>,
    cell_tanh: Vec<f64>,
    hidden: Vec<f64>,
}

enum UnrollCache {
    Rnn(Vec<RnnStepCache>),
    Lstm(Vec<LstmStepCache>),
}

impl UnrollCache {
    fn hidden(&self, step: usize) -> &[f64] {
        match self {
            UnrollCache::Rnn(steps) => &steps[step].hidden,
            UnrollCache::Lstm(steps) => &steps[step].hidden,
        }
    }

    fn len(&self) -> usize {
        match self {
            UnrollCache::Rnn(steps) => steps.len(),
            UnrollCache::Lstm(steps) => steps.len(),
        }
    }
}

fn unroll(
    params: &SequenceParams,
    history: &DesignerHistory,
) -> Result<UnrollCache, SequenceError> {
    if history.is_empty() {
        return Err(SequenceError::EmptyHistory);
    }
    match &params.cell {
        CellParams::Rnn(gate) => {
            let mut steps: Vec<RnnStepCache> = Vec::with_capacity(history.len());
            let zero_hidden = vec![0.0; params.hidden_dim];
            for step in &history.steps {
                let input = concat_input(params, &step.h_collection, &step.h_trend_prev)?;
                let hidden_prev = steps
                    .last()
                    .map(|s| s.hidden.as_slice())
                    .unwrap_or(&zero_hidden);
                let z = gate.preactivation(&input, hidden_prev)?;
                steps.push(RnnStepCache {
                    input,
                    hidden: z.into_iter().map(f64::tanh).collect(),
                });
            }
            Ok(UnrollCache::Rnn(steps))
        }
        CellParams::Lstm {
            forget,
            input: input_gate,
            output,
            cell,
        } => {
            let mut steps: Vec<LstmStepCache> = Vec::with_capacity(history.len());
            let zero = vec![0.0; params.hidden_dim];
            for step in &history.steps {
                let input = concat_input(params, &step.h_collection, &step.h_trend_prev)?;
                let (hidden_prev, cell_prev) = steps
                    .last()
                    .map(|s: &LstmStepCache| (s.hidden.as_slice(), s.cell.as_slice()))
                    .unwrap_or((&zero, &zero));
                steps.push(lstm_forward_step(
                    forget,
                    input_gate,
                    output,
                    cell,
                    input,
                    hidden_prev,
                    cell_prev,
                )?);
            }
            Ok(UnrollCache::Lstm(steps))
        }
    }
}

/// Unrolls the cell over the history and projects the final hidden state to
/// a predicted next-season collection embedding.
pub fn predict_next(
    params: &SequenceParams,
    history: &DesignerHistory,
) -> Result<Vec<f64>, SequenceError> {
    let cache = unroll(params, history)?;
    let hidden = cache.hidden(cache.len() - 1);
    Ok(linear_forward(
        &params.proj_weight,
        hidden,
        &params.proj_bias,
    )?)
}

/// A training transition: the prediction made after `step` is compared with
/// `target` (the collection embedding of the designer's next present slot).
#[derive(Clone, Debug)]
pub struct SequenceTarget {
    pub step: usize,
    pub target: Vec<f64>,
}

/// All next-step transitions of a history under teacher forcing.
pub fn all_transitions(history: &DesignerHistory) -> Vec<SequenceTarget> {
    history
        .steps
        .windows(2)
        .enumerate()
        .map(|(i, pair)| SequenceTarget {
            step: i,
            target: pair[1].h_collection.clone(),
        })
        .collect()
}

/// Mean cosine distance between projected hidden states and targets, with
/// gradients for every parameter tensor (full BPTT). Degenerate zero-norm
/// targets contribute distance 1 with zero gradient.
pub fn sequence_loss(
    params: &SequenceParams,
    history: &DesignerHistory,
    targets: &[SequenceTarget],
) -> Result<(f64, SequenceGrads), SequenceError> {
    if targets.is_empty() {
        return Err(SequenceError::NoTargets);
    }
    let cache = unroll(params, history)?;
    let steps = cache.len();
    for target in targets {
        if target.step >= steps {
            return Err(SequenceError::TargetOutOfRange {
                step: target.step,
                len: steps,
            });
        }
    }
    let mut grads = SequenceParams::zeros(params.kind(), params.embed_dim, params.hidden_dim);
    let scale = 1.0 / targets.len() as f64;
    let mut total = 0.0;
    // Gradient of the loss on each step's hidden state.
    let mut hidden_grad = vec![vec![0.0; params.hidden_dim]; steps];
    for target in targets {
        let hidden = cache.hidden(target.step);
        let prediction = linear_forward(&params.proj_weight, hidden, &params.proj_bias)?;
        let cos = cosine_distance(&target.target, &prediction)?;
        total += cos.value * scale;
        let dpred: Vec<f64> = cos.grad_b.iter().map(|g| g * scale).collect();
        grads.proj_weight.add_scaled_outer(&dpred, hidden, 1.0)?;
        for (g, d) in grads.proj_bias.iter_mut().zip(&dpred) {
            *g += d;
        }
        let dh = params.proj_weight.matvec_transpose(&dpred)?;
        for (acc, d) in hidden_grad[target.step].iter_mut().zip(&dh) {
            *acc += d;
        }
    }

    match (&params.cell, &cache) {
        (CellParams::Rnn(gate), UnrollCache::Rnn(steps_cache)) => {
            let CellParams::Rnn(grad_gate) = &mut grads.cell else {
                unreachable!()
            };
            let zero_hidden = vec![0.0; params.hidden_dim];
            for s in (0..steps).rev() {
                let hidden = &steps_cache[s].hidden;
                let da: Vec<f64> = hidden_grad[s]
                    .iter()
                    .zip(hidden)
                    .map(|(g, h)| g * tanh_deriv_from_output(*h))
                    .collect();
                let hidden_prev = if s > 0 {
                    &steps_cache[s - 1].hidden
                } else {
                    &zero_hidden
                };
                grad_gate
                    .input_weight
                    .add_scaled_outer(&da, &steps_cache[s].input, 1.0)?;
                grad_gate
                    .recur_weight
                    .add_scaled_outer(&da, hidden_prev, 1.0)?;
                for (g, d) in grad_gate.bias.iter_mut().zip(&da) {
                    *g += d;
                }
                if s > 0 {
                    let dh_prev = gate.recur_weight.matvec_transpose(&da)?;
                    for (acc, d) in hidden_grad[s - 1].iter_mut().zip(&dh_prev) {
                        *acc += d;
                    }
                }
            }
        }
        (
            CellParams::Lstm {
                forget,
                input: input_gate,
                output,
                cell,
            },
            UnrollCache::Lstm(steps_cache),
        ) => {
            let CellParams::Lstm {
                forget: grad_forget,
                input: grad_input,
                output: grad_output,
                cell: grad_cell,
            } = &mut grads.cell
            else {
                unreachable!()
            };
            let zero = vec![0.0; params.hidden_dim];
            let mut dcell = vec![0.0; params.hidden_dim];
            for s in (0..steps).rev() {
                let sc = &steps_cache[s];
                let (hidden_prev, cell_prev) = if s > 0 {
                    (&steps_cache[s - 1].hidden, &steps_cache[s - 1].cell)
                } else {
                    (&zero, &zero)
                };
                let dh = &hidden_grad[s];
                // h = o ⊙ tanh(c)
                let dz_output: Vec<f64> = dh
                    .iter()
                    .zip(&sc.cell_tanh)
                    .zip(&sc.output)
                    .map(|((dh, tc), o)| dh * tc * sigmoid_deriv_from_output(*o))
                    .collect();
                for ((dc, dh), (o, tc)) in dcell
                    .iter_mut()
                    .zip(dh)
                    .zip(sc.output.iter().zip(&sc.cell_tanh))
                {
                    *dc += dh * o * tanh_deriv_from_output(*tc);
                }
                // c = f ⊙ c_prev + i ⊙ candidate
                let dz_forget: Vec<f64> = dcell
                    .iter()
                    .zip(cell_prev)
                    .zip(&sc.forget)
                    .map(|((dc, cp), f)| dc * cp * sigmoid_deriv_from_output(*f))
                    .collect();
                let dz_input: Vec<f64> = dcell
                    .iter()
                    .zip(&sc.candidate)
                    .zip(&sc.input_gate)
                    .map(|((dc, cand), i)| dc * cand * sigmoid_deriv_from_output(*i))
                    .collect();
                let dz_candidate: Vec<f64> = dcell
                    .iter()
                    .zip(&sc.input_gate)
                    .zip(&sc.candidate)
                    .map(|((dc, i), cand)| dc * i * tanh_deriv_from_output(*cand))
                    .collect();

                let mut dh_prev = vec![0.0; params.hidden_dim];
                for (gate_params, grad_gate, dz) in [
                    (forget, &mut *grad_forget, &dz_forget),
                    (input_gate, &mut *grad_input, &dz_input),
                    (output, &mut *grad_output, &dz_output),
                    (cell, &mut *grad_cell, &dz_candidate),
                ] {
                    grad_gate
                        .input_weight
                        .add_scaled_outer(dz, &sc.input, 1.0)?;
                    grad_gate
                        .recur_weight
                        .add_scaled_outer(dz, hidden_prev, 1.0)?;
                    for (g, d) in grad_gate.bias.iter_mut().zip(dz) {
                        *g += d;
                    }
                    let contribution = gate_params.recur_weight.matvec_transpose(dz)?;
                    for (acc, d) in dh_prev.iter_mut().zip(&contribution) {
                        *acc += d;
                    }
                }
                if s > 0 {
                    for (acc, d) in hidden_grad[s - 1].iter_mut().zip(&dh_prev) {
                        *acc += d;
                    }
                }
                // Carry cell gradient to the previous step.
                for (dc, f) in dcell.iter_mut().zip(&sc.forget) {
                    *dc *= f;
                }
            }
        }
        _ => unreachable!("cache kind always matches cell kind"),
    }
    Ok((total, grads))
}
