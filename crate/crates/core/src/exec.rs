//! Execution policy for the data-parallel loops (sample-wise basis
//! evaluation, regression-matrix assembly, batch prediction).
//!
//! Both policies split work into the same fixed-size chunks and combine
//! partial results in chunk order, so switching policy never changes a
//! result bit.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Rows per work chunk.
pub const CHUNK_ROWS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled and falls
    /// back to [`Execution::Sequential`] otherwise.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Applies `f` to consecutive index ranges of at most `chunk` elements
    /// covering `0..n`; results are returned in range order.
    pub fn map_chunks<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = n.div_ceil(chunk);
        let range = move |c: usize| c * chunk..((c + 1) * chunk).min(n);
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n_chunks).into_par_iter().map(|c| f(range(c))).collect()
            }
            _ => (0..n_chunks).map(|c| f(range(c))).collect(),
        }
    }

    /// Element-wise map over `0..n`, order preserving.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fills `out` in chunks of `row_len * CHUNK_ROWS` values, passing each
    /// closure call the index of its first row.
    pub fn fill_rows<F>(self, out: &mut [f64], row_len: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if row_len == 0 {
            return;
        }
        let block = row_len * CHUNK_ROWS;
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                out.par_chunks_mut(block)
                    .enumerate()
                    .for_each(|(c, rows)| f(c * CHUNK_ROWS, rows));
            }
            _ => out
                .chunks_mut(block)
                .enumerate()
                .for_each(|(c, rows)| f(c * CHUNK_ROWS, rows)),
        }
    }
}
