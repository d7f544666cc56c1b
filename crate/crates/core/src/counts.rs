//! Per-node transition counts over the maximal tree.

use rayon::prelude::*;
use thiserror::Error;

use crate::symbols::Sequence;
use crate::trees::{Context, TreeSpace};

/// Sequences shorter than this are counted on a single thread.
const PARALLEL_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum CountError {
    #[error("sequence of length {n} needs more than L={depth} symbols")]
    SequenceTooShort { n: usize, depth: usize },

    #[error("sequence alphabet has {got} symbols, tree space expects {expected}")]
    AlphabetMismatch { expected: usize, got: usize },

    #[error("context {0} is deeper than the maximal depth")]
    DepthOverflow(String),
}

/// Counts `c_{s,k}` for every node `s` of the maximal tree and symbol `k`.
///
/// The first `L` symbols of the sequence only serve as past; each of the
/// remaining `n - L` positions increments one count at every node on the
/// root-to-leaf path matching its past.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    space: TreeSpace,
    counts: Vec<u64>,
    transitions: usize,
}

impl CountTable {
    pub fn build(z: &Sequence, space: &TreeSpace) -> Result<Self, CountError> {
        let chunks = if z.len() >= PARALLEL_THRESHOLD {
            rayon::current_num_threads().max(1)
        } else {
            1
        };
        Self::build_chunked(z, space, chunks)
    }

    /// Counts `chunks` disjoint ranges of positions independently and merges
    /// them by addition. The result does not depend on `chunks`.
    pub fn build_chunked(
        z: &Sequence,
        space: &TreeSpace,
        chunks: usize,
    ) -> Result<Self, CountError> {
        if z.alphabet().len() != space.m() {
            return Err(CountError::AlphabetMismatch {
                expected: space.m(),
                got: z.alphabet().len(),
            });
        }
        let n = z.len();
        let depth = space.depth();
        if n <= depth {
            return Err(CountError::SequenceTooShort { n, depth });
        }
        let codes = z.codes();
        let positions = n - depth;
        let chunk_len = positions.div_ceil(chunks.max(1));
        let slots = space.node_count() * space.m();

        let partials: Vec<Vec<u64>> = (depth..n)
            .step_by(chunk_len)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let end = (start + chunk_len).min(n);
                let mut counts = vec![0u64; slots];
                count_range(codes, space, start..end, &mut counts);
                counts
            })
            .collect();

        let mut counts = vec![0u64; slots];
        for part in partials {
            for (acc, c) in counts.iter_mut().zip(part) {
                *acc += c;
            }
        }
        Ok(Self {
            space: *space,
            counts,
            transitions: positions,
        })
    }

    pub fn space(&self) -> &TreeSpace {
        &self.space
    }

    /// Number of counted transitions, `n - L`.
    pub fn transitions(&self) -> usize {
        self.transitions
    }

    /// Count vector of the node at trie index `index`.
    pub fn at(&self, index: usize) -> &[u64] {
        let m = self.space.m();
        &self.counts[index * m..(index + 1) * m]
    }

    pub fn node_counts(&self, s: &Context) -> Result<&[u64], CountError> {
        self.space
            .index_of(s)
            .map(|i| self.at(i))
            .ok_or_else(|| CountError::DepthOverflow(s.to_string()))
    }
}

fn count_range(codes: &[u8], space: &TreeSpace, range: std::ops::Range<usize>, out: &mut [u64]) {
    let m = space.m();
    let depth = space.depth();
    for t in range {
        let k = codes[t] as usize;
        let mut node = 0usize;
        out[k] += 1;
        for j in 1..=depth {
            node = node * m + 1 + codes[t - j] as usize;
            out[node * m + k] += 1;
        }
    }
}
