//! Replica-parallel driver.
//!
//! Chunks of replicas are run on a rayon pool in waves and merged in chunk
//! order, so the ensemble is bit-identical to the sequential
//! `spde_sim::simulate` for every thread count.

use fracspde_core::spde_sim::Simulator;
use fracspde_core::{FieldEnsemble, SimulationSpec};
use rayon::prelude::*;

use crate::{numerical, RunError};

/// Caps the number of worker threads.
pub const THREADS_ENV: &str = "FRACSPDE_THREADS";

/// Chunks per worker in one wave.
const WAVE_PER_THREAD: usize = 4;

/// Thread cap from [`THREADS_ENV`], if set.
pub fn thread_cap() -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(RunError::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(RunError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

/// Simulate with at most `threads` workers (all cores when `None`).
pub fn par_simulate(spec: &SimulationSpec, threads: Option<usize>) -> Result<FieldEnsemble, RunError> {
    let sim = Simulator::new(spec).map_err(numerical("simulator setup"))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Io(format!("thread pool: {e}")))?;
    let wave = pool.current_num_threads().max(1) * WAVE_PER_THREAD;
    let mut b = sim.builder();
    let n = sim.n_chunks();
    let mut start = 0;
    while start < n {
        let end = (start + wave).min(n);
        let results: Vec<_> = pool.install(|| (start..end).into_par_iter().map(|c| sim.run_chunk(c)).collect());
        for r in results {
            b.push(r.map_err(numerical("simulate"))?).map_err(numerical("simulate"))?;
        }
        start = end;
    }
    b.finish().map_err(numerical("simulate"))
}
