//! Choice between sequential and data-parallel evaluation. Without the
//! `parallel` feature every mode runs sequentially.

use std::ops::Range;

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use crate::error::Error;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// `workers == 0` uses one thread per core.
    Parallel { workers: usize },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { workers: 0 }
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers }
        }
    }

    pub(crate) fn runner(self) -> Result<Runner> {
        Runner::new(self)
    }
}

pub(crate) struct Runner {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Runner {
    #[cfg(feature = "parallel")]
    fn new(exec: Execution) -> Result<Self> {
        let pool = match exec {
            Execution::Sequential => None,
            Execution::Parallel { workers } => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::InvalidSweep(format!("thread pool: {e}")))?,
            ),
        };
        Ok(Self { pool })
    }

    #[cfg(not(feature = "parallel"))]
    fn new(_exec: Execution) -> Result<Self> {
        Ok(Self {})
    }

    /// `f` applied to each index, collected in index order.
    pub(crate) fn map_range<T, F>(&self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| range.into_par_iter().map(&f).collect());
        }
        range.map(f).collect()
    }
}
