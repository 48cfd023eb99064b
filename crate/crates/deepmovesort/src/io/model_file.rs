//! Motion-model container file.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "DMSMODEL"
//! version  u32      1
//! hlen     u32      header length in bytes
//! header   hlen bytes of JSON: {"arch": ..., "feature_layout": ..., "stats": ...}
//! tcount   u32      number of tensors
//! tensor   (tcount times)
//!   nlen   u32      name length
//!   name   nlen bytes UTF-8
//!   rows   u32
//!   cols   u32
//!   data   rows*cols f32, row-major
//! ```
//!
//! Weights are stored as f32 and widened to f64 on load, so a load/save
//! cycle after the first save is byte-stable. The `feature_layout` tag pins
//! the input feature schema the weights were trained against; a mismatch is
//! a load error rather than silent garbage.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureStats;
use crate::filter::{TransFilterHyper, TransFilterModel};
use crate::nn::Mat;

const MAGIC: &[u8; 8] = b"DMSMODEL";
const VERSION: u32 = 1;

/// Schema tag for the current input layout: 4 absolute coords, 4
/// standardized one-step differences, 4 standardized offsets relative to the
/// newest box, 1 time channel.
pub const FEATURE_LAYOUT: &str = "abs4+sdiff4+srel4+t1:v1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arch: TransFilterHyper,
    feature_layout: String,
    stats: FeatureStats,
}

/// Shape listing for `inspect-model`; no weights are materialized.
#[derive(Debug)]
pub struct ModelFileInfo {
    pub hyper: TransFilterHyper,
    pub feature_layout: String,
    pub stats: FeatureStats,
    /// (name, rows, cols) in file order.
    pub tensors: Vec<(String, usize, usize)>,
}

impl ModelFileInfo {
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|(_, r, c)| r * c).sum()
    }
}

pub fn save_model(path: &Path, model: &TransFilterModel) -> Result<()> {
    let header = Header {
        arch: model.hyper,
        feature_layout: FEATURE_LAYOUT.to_string(),
        stats: model.stats.clone(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::Model(format!("header serialization: {e}")))?;
    let mut tensors: Vec<(String, &Mat)> = Vec::new();
    model.params.for_each(&mut |name, mat| tensors.push((name, mat)));

    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    bytes.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, mat) in tensors {
        bytes.extend_from_slice(&(name.len() as u32).to_le_bytes());
        bytes.extend_from_slice(name.as_bytes());
        bytes.extend_from_slice(&(mat.rows() as u32).to_le_bytes());
        bytes.extend_from_slice(&(mat.cols() as u32).to_le_bytes());
        for &v in mat.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    off: usize,
}

impl<'a> Reader<'a> {
    fn bad(&self, msg: impl Into<String>) -> Error {
        Error::Model(format!("{}: {}", self.path.display(), msg.into()))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .off
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.bad("truncated file"))?;
        let s = &self.bytes[self.off..end];
        self.off = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn read_file(path: &Path) -> Result<(Header, Vec<(String, Mat)>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { path, bytes: &bytes, off: 0 };
    if r.take(8)? != MAGIC {
        return Err(r.bad("not a model file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.bad(format!("unsupported model version {version} (expected {VERSION})")));
    }
    let hlen = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| Error::Model(format!("{}: malformed header: {e}", path.display())))?;
    let tcount = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(tcount);
    for _ in 0..tcount {
        let nlen = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| r.bad("tensor name is not UTF-8"))?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n > 0 && n < (1 << 28))
            .ok_or_else(|| r.bad(format!("tensor {name} has implausible shape {rows}x{cols}")))?;
        let raw = r.take(n * 4)?;
        let mut data = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
            if !v.is_finite() {
                return Err(Error::Model(format!("{}: tensor {name} has a non-finite value", path.display())));
            }
            data.push(v);
        }
        tensors.push((name, Mat::from_vec(rows, cols, data)));
    }
    if r.off != bytes.len() {
        return Err(r.bad(format!("{} trailing bytes", bytes.len() - r.off)));
    }
    Ok((header, tensors))
}

pub fn load_model(path: &Path) -> Result<TransFilterModel> {
    let (header, tensors) = read_file(path)?;
    if header.feature_layout != FEATURE_LAYOUT {
        return Err(Error::Model(format!(
            "{}: feature layout {:?} is not the supported {FEATURE_LAYOUT:?}",
            path.display(),
            header.feature_layout
        )));
    }
    // Shape the parameter tree from the header, then overwrite every tensor.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = TransFilterModel::new(header.arch, header.stats, &mut rng)?;
    let mut by_name: BTreeMap<String, Mat> = BTreeMap::new();
    for (name, mat) in tensors {
        if by_name.insert(name.clone(), mat).is_some() {
            return Err(Error::Model(format!("{}: duplicate tensor {name}", path.display())));
        }
    }
    let mut missing = Vec::new();
    model.params.for_each_mut(&mut |name, mat| match by_name.remove(&name) {
        Some(loaded) => {
            if loaded.rows() == mat.rows() && loaded.cols() == mat.cols() {
                *mat = loaded;
            } else {
                missing.push(format!(
                    "{name}: expected {}x{}, file has {}x{}",
                    mat.rows(),
                    mat.cols(),
                    loaded.rows(),
                    loaded.cols()
                ));
            }
        }
        None => missing.push(format!("{name}: missing")),
    });
    for extra in by_name.keys() {
        missing.push(format!("{extra}: not part of this architecture"));
    }
    if !missing.is_empty() {
        return Err(Error::Model(format!("{}: {}", path.display(), missing.join("; "))));
    }
    Ok(model)
}

/// Header and tensor shapes without constructing the model.
pub fn inspect_model(path: &Path) -> Result<ModelFileInfo> {
    let (header, tensors) = read_file(path)?;
    Ok(ModelFileInfo {
        hyper: header.arch,
        feature_layout: header.feature_layout,
        stats: header.stats,
        tensors: tensors.into_iter().map(|(n, m)| (n, m.rows(), m.cols())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_model(seed: u64) -> TransFilterModel {
        let hyper = TransFilterHyper { d_model: 8, n_heads: 2, n_layers: 2, history_len: 5, m_max: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TransFilterModel::new(hyper, FeatureStats::identity(), &mut rng).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_stable() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.dms");
        let b = dir.path().join("b.dms");
        let model = sample_model(11);
        save_model(&a, &model).unwrap();
        let loaded = load_model(&a).unwrap();
        save_model(&b, &loaded).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(loaded.hyper, model.hyper);
    }

    #[test]
    fn loaded_weights_match_saved_to_f32_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dms");
        let model = sample_model(3);
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        let mut originals: Vec<(String, Vec<f64>)> = Vec::new();
        model.params.for_each(&mut |name, mat| originals.push((name, mat.data().to_vec())));
        let mut idx = 0usize;
        loaded.params.for_each(&mut |name, mat| {
            let (ref oname, ref odata) = originals[idx];
            assert_eq!(&name, oname, "tensor order must be canonical");
            for (a, b) in mat.data().iter().zip(odata) {
                assert_eq!(*a, *b as f32 as f64);
            }
            idx += 1;
        });
    }

    #[test]
    fn inspect_reports_shapes_and_count() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dms");
        let model = sample_model(5);
        save_model(&path, &model).unwrap();
        let info = inspect_model(&path).unwrap();
        assert_eq!(info.param_count(), model.params.param_count());
        assert_eq!(info.feature_layout, FEATURE_LAYOUT);
        assert!(info.tensors.iter().any(|(n, _, _)| n == "token_embed.fc1.weight"));
        assert!(info.tensors.iter().any(|(n, _, _)| n == "decoder.out.bias"));
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dms");
        let model = sample_model(7);
        save_model(&path, &model).unwrap();

        // Truncation.
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load_model(&path).is_err());

        // Bad magic.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Model(_))));

        // Foreign layout tag.
        let tag = FEATURE_LAYOUT.as_bytes();
        let pos = bytes.windows(tag.len()).position(|w| w == tag).unwrap();
        let mut other = bytes.clone();
        other[pos..pos + tag.len()].copy_from_slice("abs4+sdiff4+srel4+t1:v9".as_bytes());
        fs::write(&path, &other).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("feature layout"), "{err}");
    }

    #[test]
    fn missing_tensor_is_named() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dms");
        let model = sample_model(9);
        save_model(&path, &model).unwrap();
        let bytes = fs::read(&path).unwrap();
        // Rename one tensor in place: same length, different name.
        let name = b"head.fc2.bias";
        let pos = bytes.windows(name.len()).position(|w| w == name).unwrap();
        let mut patched = bytes.clone();
        patched[pos..pos + name.len()].copy_from_slice(b"head.fc9.bias");
        fs::write(&path, &patched).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("head.fc2.bias") && err.contains("head.fc9.bias"), "{err}");
    }
}
