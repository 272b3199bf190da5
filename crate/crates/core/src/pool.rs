//! Fixed-capacity pool of positive node-pair samples, with the grid
//! bucketing produced by redistribution.

use crate::NodeId;

/// One positive training pair drawn from a walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeSample {
    pub source: NodeId,
    pub target: NodeId,
}

impl EdgeSample {
    pub fn new(source: NodeId, target: NodeId) -> Self {
        debug_assert_ne!(source, target);
        EdgeSample { source, target }
    }
}

/// Lifecycle of a pool between producers and the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolState {
    Filling,
    Ready,
    Consumed,
}

/// Sample buffer owned by exactly one side of the pipeline at a time:
/// producers while `Filling`, the trainer from `Ready` until `Consumed`.
/// After redistribution the samples are grouped contiguously into an
/// n x n block grid keyed by (source partition, target partition).
pub struct SamplePool {
    samples: Vec<EdgeSample>,
    state: PoolState,
    // Row-major block boundaries, len n*n + 1, present after redistribution.
    grid: Option<BlockGrid>,
}

pub(crate) struct BlockGrid {
    pub num_parts: usize,
    pub starts: Vec<usize>,
}

impl SamplePool {
    pub fn new() -> Self {
        SamplePool {
            samples: Vec::new(),
            state: PoolState::Filling,
            grid: None,
        }
    }

    pub fn from_samples(samples: Vec<EdgeSample>) -> Self {
        SamplePool {
            samples,
            state: PoolState::Ready,
            grid: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn state(&self) -> PoolState {
        self.state
    }

    pub fn samples(&self) -> &[EdgeSample] {
        &self.samples
    }

    /// Recycles the buffer for another fill. Valid only once the previous
    /// contents were consumed (or never filled).
    pub fn reset(&mut self) {
        assert_ne!(
            self.state,
            PoolState::Ready,
            "resetting a pool the trainer still owns"
        );
        self.samples.clear();
        self.grid = None;
        self.state = PoolState::Filling;
    }

    pub(crate) fn fill_buffer(&mut self, len: usize) -> &mut [EdgeSample] {
        assert_eq!(self.state, PoolState::Filling);
        self.samples.clear();
        self.samples.resize(
            len,
            EdgeSample {
                source: 0,
                target: 1,
            },
        );
        &mut self.samples
    }

    pub(crate) fn mark_ready(&mut self) {
        assert_eq!(self.state, PoolState::Filling);
        self.state = PoolState::Ready;
    }

    pub fn mark_consumed(&mut self) {
        assert_eq!(self.state, PoolState::Ready);
        self.state = PoolState::Consumed;
    }

    pub(crate) fn set_grid(&mut self, num_parts: usize, starts: Vec<usize>) {
        debug_assert_eq!(starts.len(), num_parts * num_parts + 1);
        debug_assert_eq!(*starts.last().unwrap(), self.samples.len());
        self.grid = Some(BlockGrid { num_parts, starts });
    }

    pub(crate) fn replace_samples(&mut self, samples: Vec<EdgeSample>) {
        debug_assert_eq!(samples.len(), self.samples.len());
        self.samples = samples;
    }

    /// Number of partitions the pool is currently bucketed for.
    pub fn grid_parts(&self) -> Option<usize> {
        self.grid.as_ref().map(|g| g.num_parts)
    }

    /// Samples of block (i, j): sources in part i, targets in part j.
    /// Panics if the pool has not been redistributed.
    pub fn block(&self, i: usize, j: usize) -> &[EdgeSample] {
        let grid = self.grid.as_ref().expect("pool not redistributed");
        let n = grid.num_parts;
        assert!(i < n && j < n);
        let r = i * n + j;
        &self.samples[grid.starts[r]..grid.starts[r + 1]]
    }

    pub fn block_len(&self, i: usize, j: usize) -> usize {
        self.block(i, j).len()
    }
}

impl Default for SamplePool {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_machine_transitions() {
        let mut pool = SamplePool::new();
        assert_eq!(pool.state(), PoolState::Filling);
        pool.fill_buffer(4);
        pool.mark_ready();
        assert_eq!(pool.state(), PoolState::Ready);
        pool.mark_consumed();
        pool.reset();
        assert_eq!(pool.state(), PoolState::Filling);
        assert!(pool.is_empty());
    }

    #[test]
    #[should_panic(expected = "resetting a pool")]
    fn reset_of_ready_pool_panics() {
        let mut pool = SamplePool::new();
        pool.fill_buffer(1);
        pool.mark_ready();
        pool.reset();
    }
}
