//! MOTChallenge text rows: detections, ground truth, and tracker results.
//!
//! One line per box: `frame,id,x,y,w,h,conf,-1,-1,-1`. Frames are 1-based in
//! files and 0-based everywhere else in this crate; readers and writers do
//! the shift. The id column is -1 for raw detections. Trailing columns
//! beyond the seventh are ignored on read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::TimedBox;
use crate::geometry::BoundingBox;

/// One parsed row. `frame` is 0-based here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: i64,
    pub id: i64,
    pub bbox: BoundingBox,
}

fn parse_row(path: &Path, lineno: usize, line: &str) -> Result<MotRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(Error::parse(path, lineno, format!("expected at least 7 fields, got {}", fields.len())));
    }
    let frame: i64 = fields[0]
        .parse()
        .map_err(|_| Error::parse(path, lineno, format!("bad frame number {:?}", fields[0])))?;
    if frame < 1 {
        return Err(Error::parse(path, lineno, format!("frame {frame} is not 1-based")));
    }
    let id: i64 = fields[1]
        .parse()
        .map_err(|_| Error::parse(path, lineno, format!("bad id {:?}", fields[1])))?;
    let mut nums = [0.0f64; 5];
    for (slot, raw) in nums.iter_mut().zip(&fields[2..7]) {
        *slot = raw
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad number {raw:?}")))?;
    }
    let bbox = BoundingBox::new(nums[0], nums[1], nums[2], nums[3], nums[4])
        .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    Ok(MotRecord { frame: frame - 1, id, bbox })
}

/// Read every row of a MOT file, keeping file order. Empty lines are skipped.
pub fn read_mot_file(path: &Path) -> Result<Vec<MotRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_row(path, i + 1, line)?);
    }
    Ok(out)
}

fn format_rows(records: &[MotRecord]) -> String {
    let mut sorted: Vec<&MotRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (a.frame, a.id).cmp(&(b.frame, b.id)));
    let mut text = String::with_capacity(records.len() * 40);
    for r in sorted {
        let b = &r.bbox;
        writeln!(
            text,
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.4},-1,-1,-1",
            r.frame + 1,
            r.id,
            b.x,
            b.y,
            b.w,
            b.h,
            b.confidence
        )
        .expect("string write");
    }
    text
}

/// Write rows sorted by frame then id, 2-decimal coordinates.
pub fn write_mot_file(path: &Path, records: &[MotRecord]) -> Result<()> {
    fs::write(path, format_rows(records)).map_err(|e| Error::io(path, e))
}

/// Result-file writer: same format, but track ids must be positive.
pub fn write_results(path: &Path, records: &[MotRecord]) -> Result<()> {
    if let Some(r) = records.iter().find(|r| r.id < 1) {
        return Err(Error::Config(format!("result row at frame {} has non-positive id {}", r.frame, r.id)));
    }
    write_mot_file(path, records)
}

/// Group rows by frame, preserving in-file order within each frame.
pub fn group_by_frame(records: &[MotRecord]) -> BTreeMap<i64, Vec<BoundingBox>> {
    let mut map: BTreeMap<i64, Vec<BoundingBox>> = BTreeMap::new();
    for r in records {
        map.entry(r.frame).or_default().push(r.bbox);
    }
    map
}

/// Detection file reader: rows grouped by frame, ids ignored.
pub fn read_detections(path: &Path) -> Result<BTreeMap<i64, Vec<BoundingBox>>> {
    Ok(group_by_frame(&read_mot_file(path)?))
}

/// Per-identity histories sorted by frame. Two boxes on the same frame for
/// one id is a data error.
pub fn tracks_by_id(records: &[MotRecord]) -> Result<BTreeMap<i64, Vec<TimedBox>>> {
    let mut map: BTreeMap<i64, Vec<TimedBox>> = BTreeMap::new();
    for r in records {
        map.entry(r.id).or_default().push(TimedBox::new(r.frame, r.bbox));
    }
    for (id, track) in &mut map {
        track.sort_by_key(|t| t.frame);
        for pair in track.windows(2) {
            if pair[0].frame == pair[1].frame {
                return Err(Error::Config(format!("track {id} has two boxes at frame {}", pair[0].frame)));
            }
        }
    }
    Ok(map)
}
