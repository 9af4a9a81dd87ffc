//! Thread-pool executor; the worker count comes from `OQE_WORKERS`.

use oqe_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const WORKERS_ENV: &str = "OQE_WORKERS";

pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Usage("worker count must be >= 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }

    /// Pool sized by `OQE_WORKERS`, or by the available parallelism.
    pub fn from_env() -> Result<Self> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Usage(format!("{WORKERS_ENV}={v:?} is not a positive integer")))?;
                Self::new(n)
            }
            Err(_) => Self::new(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }
}
