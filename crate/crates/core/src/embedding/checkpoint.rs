//! Embedding checkpoint format (binary, little-endian): magic "RWEM",
//! u32 version = 1, u32 feature_dim, u32 embed_dim, u32 designer_count,
//! u32 season_count, u64 designer_set_hash, then the parameter tensors as
//! raw f64 in declared order (look weight, look bias, designer weight,
//! designer bias, season weight, season bias). Round-trips bit-exactly.

use super::{EmbeddingError, EmbeddingParams};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"RWEM";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingCheckpoint {
    pub params: EmbeddingParams,
    pub designer_set_hash: u64,
}

pub fn write_embedding_checkpoint(
    path: &Path,
    params: &EmbeddingParams,
    designer_set_hash: u64,
) -> Result<(), EmbeddingError> {
    let io = |source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(EMBEDDING_MAGIC).map_err(io)?;
    w.write_all(&EMBEDDING_VERSION.to_le_bytes()).map_err(io)?;
    for dim in [
        params.feature_dim(),
        params.embed_dim(),
        params.designer_count(),
        params.season_count(),
    ] {
        w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    }
    w.write_all(&designer_set_hash.to_le_bytes()).map_err(io)?;
    for tensor in params.tensors() {
        for &v in tensor {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_embedding_checkpoint(path: &Path) -> Result<EmbeddingCheckpoint, EmbeddingError> {
    let io = |source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let format = |msg: String| EmbeddingError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let file = File::open(path).map_err(io)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != EMBEDDING_MAGIC {
        return Err(format(format!(
            "bad magic {magic:?}, expected {EMBEDDING_MAGIC:?}"
        )));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32, EmbeddingError> {
        r.read_exact(&mut u32buf).map_err(io)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut r)?;
    if version != EMBEDDING_VERSION {
        return Err(format(format!("unsupported version {version}")));
    }
    let feature_dim = read_u32(&mut r)? as usize;
    let embed_dim = read_u32(&mut r)? as usize;
    let designer_count = read_u32(&mut r)? as usize;
    let season_count = read_u32(&mut r)? as usize;
    if season_count != crate::corpus::SEASON_COUNT {
        return Err(format(format!(
            "checkpoint has {season_count} season classes, expected {}",
            crate::corpus::SEASON_COUNT
        )));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(io)?;
    let designer_set_hash = u64::from_le_bytes(u64buf);

    let mut params = EmbeddingParams::zeros(feature_dim, embed_dim, designer_count);
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
    Ok(EmbeddingCheckpoint {
        params,
        designer_set_hash,
    })
}
