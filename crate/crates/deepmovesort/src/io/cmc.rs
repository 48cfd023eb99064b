//! Camera-motion files: one affine transform per frame.
//!
//! Text rows `frame,a,b,tx,c,d,ty` where the transform maps the previous
//! frame's pixel coordinates into the current frame's. Frames are 1-based in
//! the file. Frames without a row are treated as identity (no camera move).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::AffineTransform;

/// Read a camera-motion file into a frame-indexed map (0-based frames).
pub fn read_cmc(path: &Path) -> Result<HashMap<i64, AffineTransform>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::parse(path, i + 1, format!("expected 7 fields, got {}", fields.len())));
        }
        let frame: i64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad frame number {:?}", fields[0])))?;
        if frame < 1 {
            return Err(Error::parse(path, i + 1, format!("frame {frame} is not 1-based")));
        }
        let mut c = [0.0f64; 6];
        for (slot, raw) in c.iter_mut().zip(&fields[1..]) {
            *slot = raw
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad number {raw:?}")))?;
            if !slot.is_finite() {
                return Err(Error::parse(path, i + 1, format!("non-finite coefficient {raw:?}")));
            }
        }
        let t = AffineTransform::new(c[0], c[1], c[2], c[3], c[4], c[5])
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if map.insert(frame - 1, t).is_some() {
            return Err(Error::parse(path, i + 1, format!("duplicate row for frame {frame}")));
        }
    }
    Ok(map)
}

/// Transform for a frame; identity when the file had no row for it.
pub fn transform_at(map: &HashMap<i64, AffineTransform>, frame: i64) -> AffineTransform {
    map.get(&frame).copied().unwrap_or(AffineTransform::IDENTITY)
}

/// Write transforms sorted by frame. Identity rows may be omitted by the
/// caller; the reader defaults them anyway.
pub fn write_cmc(path: &Path, rows: &[(i64, AffineTransform)]) -> Result<()> {
    let mut sorted: Vec<&(i64, AffineTransform)> = rows.iter().collect();
    sorted.sort_by_key(|(f, _)| *f);
    let mut text = String::new();
    for (frame, t) in sorted {
        writeln!(
            text,
            "{},{},{},{},{},{},{}",
            frame + 1,
            t.m[0][0],
            t.m[0][1],
            t.t[0],
            t.m[1][0],
            t.m[1][1],
            t.t[1]
        )
        .expect("string write");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
