//! Sink-pinned rolling context window over generated latent frames.
//!
//! A window of size `w` leaves `w - f` slots of history for a chunk of `f`
//! frames. The first `sink_n` generated frames are pinned in that history
//! permanently; the rest of the budget holds the most recent other frames,
//! oldest evicted first. Entries keep their global frame index, which is
//! what the rotary encoding consumes.

use std::collections::VecDeque;

use crate::error::{FlexError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub global_index: usize,
    pub payload: Vec<f32>,
}

impl FrameEntry {
    pub fn new(global_index: usize, payload: Vec<f32>) -> Self {
        Self {
            global_index,
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvWindow {
    window_w: usize,
    chunk_f: usize,
    sink_n: usize,
    sink: Vec<FrameEntry>,
    rolling: VecDeque<FrameEntry>,
    next_index: usize,
}

impl KvWindow {
    pub fn new(window_w: usize, chunk_f: usize, sink_n: usize) -> Result<Self> {
        if chunk_f < 1 {
            return Err(FlexError::Config("chunk size must be >= 1".into()));
        }
        if window_w < chunk_f + sink_n {
            return Err(FlexError::Config(format!(
                "window {window_w} cannot hold a chunk of {chunk_f} plus {sink_n} sink frames"
            )));
        }
        Ok(Self {
            window_w,
            chunk_f,
            sink_n,
            sink: Vec::with_capacity(sink_n),
            rolling: VecDeque::with_capacity(window_w - chunk_f),
            next_index: 0,
        })
    }

    pub fn window_w(&self) -> usize {
        self.window_w
    }

    pub fn chunk_f(&self) -> usize {
        self.chunk_f
    }

    pub fn sink_n(&self) -> usize {
        self.sink_n
    }

    /// History slots available to a chunk, `w - f`.
    pub fn context_capacity(&self) -> usize {
        self.window_w - self.chunk_f
    }

    /// Global index the next pushed frame must carry.
    pub fn next_index(&self) -> usize {
        self.next_index
    }

    pub fn sink(&self) -> &[FrameEntry] {
        &self.sink
    }

    pub fn rolling(&self) -> impl Iterator<Item = &FrameEntry> {
        self.rolling.iter()
    }

    fn rolling_capacity(&self) -> usize {
        self.context_capacity() - self.sink.len()
    }

    /// Appends one generated chunk. Indices must continue the sequence.
    pub fn push_chunk(&mut self, frames: Vec<FrameEntry>) -> Result<()> {
        if frames.len() != self.chunk_f {
            return Err(FlexError::Usage(format!(
                "expected a chunk of {} frames, got {}",
                self.chunk_f,
                frames.len()
            )));
        }
        for (offset, frame) in frames.iter().enumerate() {
            let expected = self.next_index + offset;
            if frame.global_index != expected {
                return Err(FlexError::Sequencing {
                    expected,
                    got: frame.global_index,
                });
            }
        }
        self.next_index += frames.len();
        for frame in frames {
            if frame.global_index < self.sink_n {
                // shrinks the rolling budget by one
                self.sink.push(frame);
            } else {
                self.rolling.push_back(frame);
            }
            while self.rolling.len() > self.rolling_capacity() {
                self.rolling.pop_front();
            }
        }
        Ok(())
    }

    /// Sink frames then rolling frames, ascending by global index.
    pub fn context(&self) -> Vec<FrameEntry> {
        self.sink
            .iter()
            .chain(self.rolling.iter())
            .cloned()
            .collect()
    }

    pub fn context_indices(&self) -> Vec<usize> {
        self.sink
            .iter()
            .chain(self.rolling.iter())
            .map(|e| e.global_index)
            .collect()
    }
}

/// One line of the eviction trace: `step,"i0,i1,..."`.
pub fn format_trace_line(step: usize, indices: &[usize]) -> String {
    let joined = indices
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!("{step},\"{joined}\"")
}
