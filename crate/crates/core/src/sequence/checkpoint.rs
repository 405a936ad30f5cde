//! Sequence checkpoint format (binary, little-endian): magic "RWSQ",
//! u32 version = 1, u8 cell kind (0 = rnn, 1 = lstm), u32 designer_id,
//! u32 embed_dim, u32 hidden_dim, u64 designer_set_hash, then the parameter
//! tensors as raw f64 in declared order. Round-trips bit-exactly.

use super::{CellKind, SequenceError, SequenceParams, TrendTable};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const SEQUENCE_MAGIC: &[u8; 4] = b"RWSQ";
pub const SEQUENCE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceCheckpoint {
    pub designer_id: usize,
    pub params: SequenceParams,
    pub designer_set_hash: u64,
}

pub fn write_sequence_checkpoint(
    path: &Path,
    designer_id: usize,
    params: &SequenceParams,
    designer_set_hash: u64,
) -> Result<(), SequenceError> {
    let io = |source| SequenceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(SEQUENCE_MAGIC).map_err(io)?;
    w.write_all(&SEQUENCE_VERSION.to_le_bytes()).map_err(io)?;
    let kind_code: u8 = match params.kind() {
        CellKind::Rnn => 0,
        CellKind::Lstm => 1,
    };
    w.write_all(&[kind_code]).map_err(io)?;
    w.write_all(&(designer_id as u32).to_le_bytes())
        .map_err(io)?;
    w.write_all(&(params.embed_dim as u32).to_le_bytes())
        .map_err(io)?;
    w.write_all(&(params.hidden_dim as u32).to_le_bytes())
        .map_err(io)?;
    w.write_all(&designer_set_hash.to_le_bytes()).map_err(io)?;
    for tensor in params.tensors() {
        for &v in tensor {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_sequence_checkpoint(path: &Path) -> Result<SequenceCheckpoint, SequenceError> {
    let io = |source| SequenceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let format = |msg: String| SequenceError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let file = File::open(path).map_err(io)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != SEQUENCE_MAGIC {
        return Err(format(format!(
            "bad magic {magic:?}, expected {SEQUENCE_MAGIC:?}"
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io)?;
    let version = u32::from_le_bytes(u32buf);
    if version != SEQUENCE_VERSION {
        return Err(format(format!("unsupported version {version}")));
    }
    let mut kind_code = [0u8; 1];
    r.read_exact(&mut kind_code).map_err(io)?;
    let kind = match kind_code[0] {
        0 => CellKind::Rnn,
        1 => CellKind::Lstm,
        other => return Err(format(format!("unknown cell kind code {other}"))),
    };
    r.read_exact(&mut u32buf).map_err(io)?;
    let designer_id = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(io)?;
    let embed_dim = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(io)?;
    let hidden_dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(io)?;
    let designer_set_hash = u64::from_le_bytes(u64buf);

    let mut params = SequenceParams::zeros(kind, embed_dim, hidden_dim);
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            r.read_exact(&mut u64buf).map_err(io)?;
            *v = f64::from_le_bytes(u64buf);
        }
    }
    let mut one = [0u8; 1];
    if r.read(&mut one).map_err(io)? != 0 {
        return Err(format("trailing bytes after parameter tensors".into()));
    }
    Ok(SequenceCheckpoint {
        designer_id,
        params,
        designer_set_hash,
    })
}

/// Exports a trend table as tab-separated text: slot index then the
/// embedding values; slots without collections are omitted.
pub fn write_trend_table(table: &TrendTable, path: &Path) -> Result<(), SequenceError> {
    let io = |source| SequenceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(b"# t\ttrend_embedding\n").map_err(io)?;
    for (t, row) in table.by_slot.iter().enumerate() {
        if let Some(values) = row {
            let cells: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
            w.write_all(format!("{t}\t{}\n", cells.join("\t")).as_bytes())
                .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
