use super::{Clip, Frame, CLIP_LEN};
use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Sliding window over the frames rendered every `interval` steps.
#[derive(Clone, Debug)]
pub struct ClipBuffer {
    interval: u64,
    frames: VecDeque<Frame>,
}

impl ClipBuffer {
    pub fn new(interval: u64) -> Result<ClipBuffer> {
        if interval == 0 {
            return Err(Error::Invalid("render interval must be at least 1".into()));
        }
        Ok(ClipBuffer {
            interval,
            frames: VecDeque::with_capacity(CLIP_LEN),
        })
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }

    pub fn is_render_step(&self, step: u64) -> bool {
        step % self.interval == 0
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Adds the frame rendered at `step`; returns the newest 8 frames once
    /// the window is full.
    pub fn push_and_assemble(&mut self, frame: Frame, step: u64) -> Result<Option<Clip>> {
        if !self.is_render_step(step) {
            return Err(Error::NotRenderStep {
                step,
                interval: self.interval,
            });
        }
        if self.frames.len() == CLIP_LEN {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        if self.frames.len() < CLIP_LEN {
            return Ok(None);
        }
        Clip::new(self.frames.iter().cloned().collect()).map(Some)
    }
}
