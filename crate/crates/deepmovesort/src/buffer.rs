//! Per-track measurement buffers.
//!
//! A buffer holds the recent observed boxes of one track in pixel space and
//! is the sole input history of the motion filter. Two retention policies
//! exist: the MoveSORT rule evicts at most one stale entry per update (and
//! never shrinks below a floor), the DeepMoveSORT rule purges every stale
//! entry whenever a real measurement arrives and does nothing on misses, so
//! a reappearing track keeps its pre-occlusion context until fresh data
//! replaces it.

use std::collections::VecDeque;

use crate::features::TimedBox;
use crate::geometry::AffineTransform;

/// Which eviction rule `update` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferPolicy {
    /// Push if present, then evict a single entry once the oldest is stale,
    /// unless that would drop the length to `l_min` or below.
    MoveSort,
    /// Push if present, then evict every stale entry; misses are no-ops.
    DeepMoveSort,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferConfig {
    pub policy: BufferPolicy,
    /// Maximal measurement age in frames; an entry with `t - frame >= t_max`
    /// counts as stale.
    pub t_max: i64,
    /// Eviction floor for [`BufferPolicy::MoveSort`]; unused otherwise.
    pub l_min: usize,
    /// Defer camera alignment until the contents are read.
    pub lazy_alignment: bool,
}

impl Default for BufferConfig {
    fn default() -> Self {
        BufferConfig { policy: BufferPolicy::DeepMoveSort, t_max: 30, l_min: 3, lazy_alignment: false }
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementBuffer {
    entries: VecDeque<TimedBox>,
    config: BufferConfig,
    pending: AffineTransform,
    dirty: bool,
}

impl MeasurementBuffer {
    pub fn new(config: BufferConfig) -> Self {
        assert!(config.t_max >= 1, "t_max must be at least one frame");
        MeasurementBuffer {
            entries: VecDeque::new(),
            config,
            pending: AffineTransform::IDENTITY,
            dirty: true,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True if contents changed since the last [`Self::mark_clean`].
    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    /// Called by the filter after it has consumed the current contents.
    pub fn mark_clean(&mut self) {
        self.dirty = false;
    }

    /// Apply one update step at frame `t`. `measurement` is `None` on a miss.
    /// Frames must be presented in increasing order.
    pub fn update(&mut self, t: i64, measurement: Option<TimedBox>) {
        if let Some(m) = &measurement {
            debug_assert_eq!(m.frame, t, "measurement frame must match update time");
            debug_assert!(
                self.entries.back().is_none_or(|last| last.frame < t),
                "updates must advance in time"
            );
        }
        match self.config.policy {
            BufferPolicy::MoveSort => {
                if let Some(m) = measurement {
                    self.entries.push_back(m);
                    self.dirty = true;
                }
                if let Some(first) = self.entries.front() {
                    if t - first.frame >= self.config.t_max && self.entries.len() > self.config.l_min {
                        self.entries.pop_front();
                        self.dirty = true;
                    }
                }
            }
            BufferPolicy::DeepMoveSort => {
                let Some(m) = measurement else { return };
                self.entries.push_back(m);
                self.dirty = true;
                while let Some(first) = self.entries.front() {
                    if t - first.frame >= self.config.t_max {
                        self.entries.pop_front();
                    } else {
                        break;
                    }
                }
            }
        }
    }

    /// Realign stored boxes into the current camera frame. In lazy mode the
    /// transform is composed into a pending one and applied on next read.
    pub fn align_to_camera(&mut self, transform: &AffineTransform) {
        if transform.is_identity() {
            return;
        }
        if self.config.lazy_alignment {
            self.pending = AffineTransform::compose(transform, &self.pending);
        } else {
            for e in &mut self.entries {
                e.bbox = transform.apply_box(&e.bbox);
            }
        }
        self.dirty = true;
    }

    fn materialize(&mut self) {
        if self.pending.is_identity() {
            return;
        }
        let t = self.pending;
        for e in &mut self.entries {
            e.bbox = t.apply_box(&e.bbox);
        }
        self.pending = AffineTransform::IDENTITY;
    }

    /// Chronological contents, with any pending alignment applied.
    pub fn history(&mut self) -> &[TimedBox] {
        self.materialize();
        self.entries.make_contiguous();
        self.entries.as_slices().0
    }

    /// Newest entry, with any pending alignment applied.
    pub fn last(&mut self) -> Option<TimedBox> {
        self.materialize();
        self.entries.back().copied()
    }

    pub fn first_frame(&self) -> Option<i64> {
        self.entries.front().map(|e| e.frame)
    }

    /// Count of entries stale relative to time `t`.
    pub fn stale_count(&self, t: i64) -> usize {
        self.entries.iter().filter(|e| t - e.frame >= self.config.t_max).count()
    }
}
