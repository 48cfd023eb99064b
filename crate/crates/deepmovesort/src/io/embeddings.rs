//! Per-detection appearance embedding files.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic   8 bytes  "DMSEMBIN"
//! version u32      1
//! dim     u32      vector length
//! count   u64      number of records
//! record  (count times)
//!   frame   u32    1-based, as in MOT files
//!   ordinal u32    0-based detection index within the frame
//!   values  dim × f32
//! ```
//!
//! Files not starting with the magic are parsed as CSV
//! `frame,ordinal,v0,v1,...` instead. Vectors are L2-normalized at load.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::association::Embedding;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DMSEMBIN";
const VERSION: u32 = 1;

/// Embeddings keyed by (0-based frame, in-frame detection ordinal).
pub type EmbeddingMap = HashMap<(i64, usize), Embedding>;

/// One record destined for a file: 0-based frame, ordinal, raw vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub frame: i64,
    pub ordinal: usize,
    pub values: Vec<f32>,
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() >= 8 && &bytes[..8] == MAGIC {
        read_binary(path, &bytes)
    } else {
        read_csv(path, &bytes)
    }
}

fn normalize(path: &Path, what: String, raw: Vec<f64>) -> Result<Embedding> {
    Embedding(raw)
        .normalized()
        .map_err(|_| Error::Model(format!("{}: zero-norm embedding for {what}", path.display())))
}

fn read_binary(path: &Path, bytes: &[u8]) -> Result<EmbeddingMap> {
    let bad = |msg: String| Error::Model(format!("{}: {msg}", path.display()));
    let mut off = 8usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = off.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated file".into()))?;
        let s = &bytes[off..end];
        off = end;
        Ok(s)
    };
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
    let version = u32_at(take(4)?);
    if version != VERSION {
        return Err(bad(format!("unsupported embedding file version {version} (expected {VERSION})")));
    }
    let dim = u32_at(take(4)?) as usize;
    if dim == 0 {
        return Err(bad("embedding dimension is zero".into()));
    }
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let mut map = EmbeddingMap::with_capacity(count);
    for i in 0..count {
        let frame = u32_at(take(4)?) as i64;
        if frame < 1 {
            return Err(bad(format!("record {i}: frame {frame} is not 1-based")));
        }
        let ordinal = u32_at(take(4)?) as usize;
        let raw = take(dim * 4)?;
        let mut values = Vec::with_capacity(dim);
        for chunk in raw.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
            if !v.is_finite() {
                return Err(bad(format!("record {i}: non-finite value")));
            }
            values.push(v);
        }
        let key = (frame - 1, ordinal);
        if map.contains_key(&key) {
            return Err(bad(format!("record {i}: duplicate (frame {frame}, ordinal {ordinal})")));
        }
        map.insert(key, normalize(path, format!("frame {frame} ordinal {ordinal}"), values)?);
    }
    if off != bytes.len() {
        return Err(bad(format!("{} trailing bytes after {count} records", bytes.len() - off)));
    }
    Ok(map)
}

fn read_csv(path: &Path, bytes: &[u8]) -> Result<EmbeddingMap> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Model(format!("{}: neither a binary embedding file nor UTF-8 text", path.display())))?;
    let mut map = EmbeddingMap::new();
    let mut dim: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::parse(path, i + 1, "expected frame,ordinal,values...".to_string()));
        }
        let frame: i64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad frame {:?}", fields[0])))?;
        if frame < 1 {
            return Err(Error::parse(path, i + 1, format!("frame {frame} is not 1-based")));
        }
        let ordinal: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad ordinal {:?}", fields[1])))?;
        let values: Vec<f64> = fields[2..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(path, i + 1, format!("bad number {v:?}"))))
            .collect::<Result<_>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, i + 1, "non-finite value".to_string()));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("dimension {} does not match the file's dimension {d}", values.len()),
                ));
            }
            Some(_) => {}
        }
        let key = (frame - 1, ordinal);
        if map.contains_key(&key) {
            return Err(Error::parse(path, i + 1, format!("duplicate (frame {frame}, ordinal {ordinal})")));
        }
        map.insert(key, normalize(path, format!("frame {frame} ordinal {ordinal}"), values)?);
    }
    Ok(map)
}

/// Write the binary format, records sorted by (frame, ordinal).
pub fn write_embeddings(path: &Path, dim: usize, records: &[EmbeddingRecord]) -> Result<()> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut sorted: Vec<&EmbeddingRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.ordinal));
    let mut bytes = Vec::with_capacity(24 + records.len() * (8 + dim * 4));
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    bytes.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in sorted {
        if r.values.len() != dim {
            return Err(Error::Config(format!(
                "embedding for frame {} ordinal {} has dimension {} (file dimension {dim})",
                r.frame,
                r.ordinal,
                r.values.len()
            )));
        }
        if r.frame < 0 || r.frame + 1 > u32::MAX as i64 {
            return Err(Error::Config(format!("frame {} out of file range", r.frame)));
        }
        bytes.extend_from_slice(&((r.frame + 1) as u32).to_le_bytes());
        bytes.extend_from_slice(&(r.ordinal as u32).to_le_bytes());
        for v in &r.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write the CSV fallback format (mostly for hand-built fixtures).
pub fn write_embeddings_csv(path: &Path, records: &[EmbeddingRecord]) -> Result<()> {
    let mut sorted: Vec<&EmbeddingRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.ordinal));
    let mut text = String::new();
    for r in sorted {
        write!(text, "{},{}", r.frame + 1, r.ordinal).expect("string write");
        for v in &r.values {
            write!(text, ",{v}").expect("string write");
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn rec(frame: i64, ordinal: usize, values: &[f32]) -> EmbeddingRecord {
        EmbeddingRecord { frame, ordinal, values: values.to_vec() }
    }

    #[test]
    fn binary_round_trip_normalizes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        write_embeddings(&path, 2, &[rec(0, 0, &[2.0, 0.0]), rec(0, 1, &[0.0, 1.0]), rec(3, 0, &[1.0, 1.0])])
            .unwrap();
        let map = read_embeddings(&path).unwrap();
        assert_eq!(map.len(), 3);
        // Norm-2 input comes back unit length.
        assert_eq!(map[&(0, 0)].0, vec![1.0, 0.0]);
        let d = &map[&(3, 0)];
        assert!((d.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_and_dim_check() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        write_embeddings_csv(&path, &[rec(0, 0, &[1.0, 0.0]), rec(1, 0, &[0.0, 3.0])]).unwrap();
        let map = read_embeddings(&path).unwrap();
        assert_eq!(map[&(1, 0)].0, vec![0.0, 1.0]);

        fs::write(&path, "1,0,1.0,0.0\n2,0,1.0,0.0,0.0\n").unwrap();
        let err = read_embeddings(&path).unwrap_err().to_string();
        assert!(err.contains('3') && err.contains('2'), "names both dims: {err}");
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        write_embeddings(&path, 4, &[rec(0, 0, &[1.0, 0.0, 0.0, 0.0])]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, &bytes).unwrap();
        let err = read_embeddings(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn zero_vector_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        write_embeddings(&path, 2, &[rec(0, 0, &[0.0, 0.0])]).unwrap();
        let err = read_embeddings(&path).unwrap_err().to_string();
        assert!(err.contains("zero-norm"), "{err}");
    }

    #[test]
    fn wrong_dimension_rejected_at_write() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        assert!(write_embeddings(&path, 3, &[rec(0, 0, &[1.0, 0.0])]).is_err());
    }
}
