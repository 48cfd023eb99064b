//! `seqinfo.ini` sequence metadata (image size and length).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeqInfo {
    pub name: String,
    pub image_width: u32,
    pub image_height: u32,
    pub seq_length: u32,
}

/// Parse the `[Sequence]` section. Only `name`, `imWidth`, `imHeight` and
/// `seqLength` are consumed; other keys pass through unchecked.
pub fn read_seqinfo(path: &Path) -> Result<SeqInfo> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut name = String::new();
    let mut width: Option<u32> = None;
    let mut height: Option<u32> = None;
    let mut length: Option<u32> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('[') || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(path, i + 1, format!("expected key=value, got {line:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        let parse_u32 = |v: &str| -> Result<u32> {
            let n: u32 = v
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad integer {v:?} for {key}")))?;
            if n == 0 {
                return Err(Error::parse(path, i + 1, format!("{key} must be positive")));
            }
            Ok(n)
        };
        match key {
            "name" => name = value.to_string(),
            "imWidth" => width = Some(parse_u32(value)?),
            "imHeight" => height = Some(parse_u32(value)?),
            "seqLength" => length = Some(parse_u32(value)?),
            _ => {}
        }
    }
    let missing = |what: &str| Error::Config(format!("{} is missing {what}", path.display()));
    Ok(SeqInfo {
        name,
        image_width: width.ok_or_else(|| missing("imWidth"))?,
        image_height: height.ok_or_else(|| missing("imHeight"))?,
        seq_length: length.ok_or_else(|| missing("seqLength"))?,
    })
}

pub fn write_seqinfo(path: &Path, info: &SeqInfo) -> Result<()> {
    let text = format!(
        "[Sequence]\nname={}\nimDir=img1\nframeRate=30\nseqLength={}\nimWidth={}\nimHeight={}\nimExt=.jpg\n",
        info.name, info.seq_length, info.image_width, info.image_height
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("seqinfo.ini");
        let info = SeqInfo { name: "synth-01".into(), image_width: 1920, image_height: 1080, seq_length: 120 };
        write_seqinfo(&path, &info).unwrap();
        assert_eq!(read_seqinfo(&path).unwrap(), info);
    }

    #[test]
    fn missing_dimension_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("seqinfo.ini");
        fs::write(&path, "[Sequence]\nname=x\nimWidth=100\nseqLength=10\n").unwrap();
        let err = read_seqinfo(&path).unwrap_err().to_string();
        assert!(err.contains("imHeight"), "{err}");
    }

    #[test]
    fn zero_length_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("seqinfo.ini");
        fs::write(&path, "[Sequence]\nimWidth=100\nimHeight=50\nseqLength=0\n").unwrap();
        assert!(read_seqinfo(&path).is_err());
    }
}
