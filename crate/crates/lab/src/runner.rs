//! Multi-threaded ensembles.

use rayon::prelude::*;
use zeronoise_core::sde::{simulate_exit, Ensemble, EnsembleRunner, PathOutcome, SdeError};
use zeronoise_core::{Domain, DriftField, Point, SdeConfig};

/// Runs paths on a private pool of `jobs` threads. Each path draws from
/// its own counter-based stream and the outcomes are folded in index
/// order, so the result is identical for every `jobs`.
pub struct ParallelRunner {
    pool: rayon::ThreadPool,
}

impl ParallelRunner {
    pub fn new(jobs: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
        Ok(ParallelRunner { pool })
    }

    pub fn jobs(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl EnsembleRunner for ParallelRunner {
    fn run(&self, field: &DriftField, domain: &Domain, cfg: &SdeConfig, n_paths: usize, x0: &Point) -> Result<Ensemble, SdeError> {
        if n_paths == 0 {
            return Err(SdeError::InvalidConfig("n_paths must be at least 1".into()));
        }
        let outcomes = self.pool.install(|| {
            (0..n_paths as u64)
                .into_par_iter()
                .map(|index| simulate_exit(field, domain, cfg, index, x0).map(|exit| PathOutcome { index, exit }))
                .collect::<Result<Vec<_>, _>>()
        })?;
        Ok(Ensemble::from_outcomes(outcomes, cfg))
    }
}
