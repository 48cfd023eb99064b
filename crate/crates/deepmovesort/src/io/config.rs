//! Flat `key = value` configuration files for the tracker and the trainer.
//!
//! One assignment per line, `#` starts a comment, booleans are `yes`/`no`
//! (`true`/`false` also accepted). Every key has a default, so a file only
//! states what it changes; unknown keys are errors rather than silently
//! ignored typos.

use std::path::Path;

use crate::buffer::BufferPolicy;
use crate::error::{Error, Result};
use crate::filter::TransFilterHyper;
use crate::tracker::TrackerConfig;
use crate::training::TrainConfig;

/// Trainer settings plus the architecture they train.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainFileConfig {
    pub train: TrainConfig,
    pub arch: TransFilterHyper,
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "yes" | "true" | "1" => Ok(true),
        "no" | "false" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected yes/no, got {value:?}"))),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got {value:?}")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {value:?}")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {value:?}")))
}

fn parse_i64(key: &str, value: &str) -> Result<i64> {
    value
        .parse::<i64>()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got {value:?}")))
}

/// Split a config text into (key, value) pairs, stripping comments and
/// blank lines. Errors carry 1-based line numbers under `origin`.
fn pairs(origin: &str, text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(origin, lineno + 1, format!("expected key = value, got {line:?}"))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::parse(origin, lineno + 1, "empty key or value".to_string()));
        }
        out.push((lineno + 1, key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn apply_tracker_key(cfg: &mut TrackerConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "detection_confidence_threshold" => {
            cfg.detection_confidence_threshold = parse_f64(key, value)?
        }
        "track_max_time_lost" => cfg.track_max_time_lost = parse_usize(key, value)?,
        "track_init_time" => cfg.track_init_time = parse_usize(key, value)?,
        "track_init_confidence" => cfg.track_init_confidence = parse_f64(key, value)?,
        "duplicate_iou_threshold" => cfg.duplicate_iou_threshold = parse_f64(key, value)?,
        "apply_noise_filtering" => cfg.apply_noise_filtering = parse_bool(key, value)?,
        "use_cmc" => cfg.use_cmc = parse_bool(key, value)?,

        "ha.dtiou.threshold_upper" => cfg.ha.gate.threshold_upper = parse_f64(key, value)?,
        "ha.dtiou.threshold_lower" => cfg.ha.gate.threshold_lower = parse_f64(key, value)?,
        "ha.dtiou.decay" => cfg.ha.gate.decay = parse_f64(key, value)?,
        "ha.dtiou.expansion_rate" => cfg.ha.gate.expansion_rate = parse_f64(key, value)?,
        "ha.dtiou.fuse_score" => cfg.ha.gate.fuse_score = parse_bool(key, value)?,
        "ha.dtiou.weight" => cfg.ha.overlap_weight = parse_f64(key, value)?,
        "ha.reid.weight" => cfg.ha.appearance_weight = parse_f64(key, value)?,
        "ha.atcm.weight" => cfg.ha.atcm_weight = parse_f64(key, value)?,
        "ha.hpc.weight" => cfg.ha.hpc_weight = parse_f64(key, value)?,
        "ha.hpc.height_weight" => cfg.ha.hpc_height_weight = parse_f64(key, value)?,
        "ha.hpc.vertical_weight" => cfg.ha.hpc_vertical_weight = parse_f64(key, value)?,

        "la.iou.threshold" => {
            let t = parse_f64(key, value)?;
            cfg.la.gate.threshold_upper = t;
            cfg.la.gate.threshold_lower = t;
        }
        "la.iou.expansion_rate" => cfg.la.gate.expansion_rate = parse_f64(key, value)?,
        "la.iou.fuse_score" => cfg.la.gate.fuse_score = parse_bool(key, value)?,
        "la.iou.weight" => cfg.la.overlap_weight = parse_f64(key, value)?,
        "la.atcm.weight" => cfg.la.atcm_weight = parse_f64(key, value)?,
        "la.hpc.weight" => cfg.la.hpc_weight = parse_f64(key, value)?,
        "la.hpc.height_weight" => cfg.la.hpc_height_weight = parse_f64(key, value)?,
        "la.hpc.vertical_weight" => cfg.la.hpc_vertical_weight = parse_f64(key, value)?,

        "na.iou.threshold" => {
            let t = parse_f64(key, value)?;
            cfg.na.gate.threshold_upper = t;
            cfg.na.gate.threshold_lower = t;
        }
        "na.iou.expansion_rate" => cfg.na.gate.expansion_rate = parse_f64(key, value)?,
        "na.iou.fuse_score" => cfg.na.gate.fuse_score = parse_bool(key, value)?,
        "na.iou.weight" => cfg.na.overlap_weight = parse_f64(key, value)?,
        "na.hpc.weight" => cfg.na.hpc_weight = parse_f64(key, value)?,
        "na.hpc.height_weight" => cfg.na.hpc_height_weight = parse_f64(key, value)?,
        "na.hpc.vertical_weight" => cfg.na.hpc_vertical_weight = parse_f64(key, value)?,

        "buffer.policy" => {
            cfg.buffer.policy = match value {
                "movesort" => BufferPolicy::MoveSort,
                "deepmovesort" => BufferPolicy::DeepMoveSort,
                _ => {
                    return Err(Error::Config(format!(
                        "{key}: expected movesort or deepmovesort, got {value:?}"
                    )))
                }
            }
        }
        "buffer.t_max" => cfg.buffer.t_max = parse_i64(key, value)?,
        "buffer.l_min" => cfg.buffer.l_min = parse_usize(key, value)?,
        "buffer.lazy_alignment" => cfg.buffer.lazy_alignment = parse_bool(key, value)?,

        "atcm.sigma" => cfg.confidence_sigma = parse_f64(key, value)?,
        "appearance.ema_alpha" => cfg.appearance_alpha = parse_f64(key, value)?,

        _ => return Err(Error::Config(format!("unknown tracker setting {key:?}"))),
    }
    Ok(())
}

/// Parse tracker settings over the defaults and validate the result.
/// `origin` names the source in errors (a path, or e.g. `"<inline>"`).
pub fn parse_tracker_config(origin: &str, text: &str) -> Result<TrackerConfig> {
    let mut cfg = TrackerConfig::default();
    for (lineno, key, value) in pairs(origin, text)? {
        apply_tracker_key(&mut cfg, &key, &value)
            .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_tracker_config(path: &Path) -> Result<TrackerConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tracker_config(&path.display().to_string(), &text)
}

fn apply_train_key(cfg: &mut TrainFileConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "epochs" => cfg.train.epochs = parse_usize(key, value)?,
        "batch_size" => cfg.train.batch_size = parse_usize(key, value)?,
        "lr" => cfg.train.lr = parse_f64(key, value)?,
        "weight_decay" => cfg.train.weight_decay = parse_f64(key, value)?,
        "warmup_epochs" => cfg.train.warmup_epochs = parse_usize(key, value)?,
        "lr_decay_every" => cfg.train.lr_decay_every = parse_usize(key, value)?,
        "noise_scale" => cfg.train.noise_scale = parse_f64(key, value)?,
        "mask_prob" => cfg.train.mask_prob = parse_f64(key, value)?,
        "huber_delta" => cfg.train.huber_delta = parse_f64(key, value)?,
        "stride" => cfg.train.stride = parse_usize(key, value)?,
        "seed" => cfg.train.seed = parse_u64(key, value)?,
        "arch.d_model" => cfg.arch.d_model = parse_usize(key, value)?,
        "arch.n_heads" => cfg.arch.n_heads = parse_usize(key, value)?,
        "arch.n_layers" => cfg.arch.n_layers = parse_usize(key, value)?,
        "arch.history_len" => cfg.arch.history_len = parse_usize(key, value)?,
        "arch.m_max" => cfg.arch.m_max = parse_usize(key, value)?,
        _ => return Err(Error::Config(format!("unknown training setting {key:?}"))),
    }
    Ok(())
}

/// Parse trainer settings over the defaults and validate the architecture.
pub fn parse_train_config(origin: &str, text: &str) -> Result<TrainFileConfig> {
    let mut cfg = TrainFileConfig::default();
    for (lineno, key, value) in pairs(origin, text)? {
        apply_train_key(&mut cfg, &key, &value)
            .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
    }
    cfg.arch.validate()?;
    Ok(cfg)
}

pub fn read_train_config(path: &Path) -> Result<TrainFileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_train_config(&path.display().to_string(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_default_config() {
        let cfg = parse_tracker_config("<inline>", "").unwrap();
        assert_eq!(cfg, TrackerConfig::default());
        let t = parse_train_config("<inline>", "# only a comment\n").unwrap();
        assert_eq!(t, TrainFileConfig::default());
    }

    #[test]
    fn overrides_apply_on_top_of_defaults() {
        let text = "\
# pedestrian preset
detection_confidence_threshold = 0.5
track_max_time_lost = 60
apply_noise_filtering = yes
use_cmc = yes
ha.dtiou.threshold_upper = 0.4   # trailing comment
ha.dtiou.threshold_lower = 0.2
ha.dtiou.decay = 0.1
ha.dtiou.fuse_score = yes
ha.reid.weight = 0.8
la.iou.threshold = 0.45
na.iou.weight = 0.2
buffer.policy = movesort
buffer.t_max = 12
atcm.sigma = 0.3
appearance.ema_alpha = 0.85
";
        let cfg = parse_tracker_config("<inline>", text).unwrap();
        assert_eq!(cfg.detection_confidence_threshold, 0.5);
        assert_eq!(cfg.track_max_time_lost, 60);
        assert!(cfg.apply_noise_filtering && cfg.use_cmc);
        assert_eq!(cfg.ha.gate.threshold_upper, 0.4);
        assert_eq!(cfg.ha.gate.threshold_lower, 0.2);
        assert_eq!(cfg.ha.gate.decay, 0.1);
        assert!(cfg.ha.gate.fuse_score);
        assert_eq!(cfg.ha.appearance_weight, 0.8);
        assert_eq!(cfg.la.gate.threshold_upper, 0.45);
        assert_eq!(cfg.la.gate.threshold_lower, 0.45);
        assert_eq!(cfg.na.overlap_weight, 0.2);
        assert_eq!(cfg.buffer.policy, BufferPolicy::MoveSort);
        assert_eq!(cfg.buffer.t_max, 12);
        assert_eq!(cfg.confidence_sigma, 0.3);
        assert_eq!(cfg.appearance_alpha, 0.85);
        // Untouched keys keep their defaults.
        assert_eq!(cfg.track_init_time, 3);
        assert_eq!(cfg.na.gate.threshold_upper, 0.25);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_line_numbered_errors() {
        let err = parse_tracker_config("<inline>", "\nha.dtiou.dekay = 0.1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("<inline>:2") && err.contains("ha.dtiou.dekay"), "{err}");

        let err = parse_tracker_config("<inline>", "use_cmc = maybe\n").unwrap_err().to_string();
        assert!(err.contains("<inline>:1") && err.contains("maybe"), "{err}");

        let err = parse_tracker_config("<inline>", "just words\n").unwrap_err().to_string();
        assert!(err.contains("key = value"), "{err}");
    }

    #[test]
    fn semantic_validation_runs_after_parsing() {
        // Lower above upper is caught even though both lines parse.
        let text = "ha.dtiou.threshold_lower = 0.9\n";
        assert!(parse_tracker_config("<inline>", text).is_err());
    }

    #[test]
    fn train_config_round_trip() {
        let text = "\
epochs = 3
batch_size = 16
lr = 1e-4
noise_scale = 0.02
arch.d_model = 16
arch.n_heads = 2
arch.history_len = 8
arch.m_max = 6
";
        let cfg = parse_train_config("<inline>", text).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, 16);
        assert_eq!(cfg.train.lr, 1e-4);
        assert_eq!(cfg.train.noise_scale, 0.02);
        assert_eq!(cfg.arch.d_model, 16);
        assert_eq!(cfg.arch.history_len, 8);
        // Defaults persist for the rest.
        assert_eq!(cfg.train.huber_delta, 0.5);
        assert_eq!(cfg.arch.n_layers, 2);

        // An architecture the model cannot instantiate is rejected here.
        assert!(parse_train_config("<inline>", "arch.d_model = 7\n").is_err());
        assert!(parse_train_config("<inline>", "epochs = -2\n").is_err());
    }
}
