//! Independent runs in parallel.
//!
//! Every run owns its state and its seed is fixed before scheduling, so the
//! results (returned in job order) do not depend on the worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run, ReturnSeries, RunSummary, SimConfig};
use crate::error::{Error, Result};
use crate::ez_baseline::{ez_run, EzConfig};

/// Stream of the master generator reserved for per-run seeds.
const SEED_STREAM: u64 = 7;

/// Seed of run `index` under a master seed. Always below 2^63 so that it
/// fits a TOML integer.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(SEED_STREAM);
    // one u64 is two 32-bit words
    rng.set_word_pos(2 * index as u128);
    rng.next_u64() >> 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    Main(SimConfig),
    Ez(EzConfig),
}

impl Model {
    pub fn seed(&self) -> u64 {
        match self {
            Model::Main(c) => c.seed,
            Model::Ez(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Model::Main(c) => c.seed = seed,
            Model::Ez(c) => c.seed = seed,
        }
    }

    pub fn run(&self) -> Result<(ReturnSeries, RunSummary)> {
        match self {
            Model::Main(c) => run(c),
            Model::Ez(c) => ez_run(c),
        }
    }
}

/// One main-model job per `(x, replica)`, x-major, with derived seeds.
pub fn grid(base: &SimConfig, xs: &[f64], replicas: usize, master_seed: u64) -> Result<Vec<Model>> {
    let mut jobs = Vec::with_capacity(xs.len() * replicas);
    for &x in xs {
        for _ in 0..replicas {
            let mut c = base.clone();
            c.x = x.try_into()?;
            c.seed = derive_seed(master_seed, jobs.len() as u64);
            c.validate()?;
            jobs.push(Model::Main(c));
        }
    }
    Ok(jobs)
}

/// Run all jobs on `workers` threads; results come back in job order and a
/// failing job does not affect the others.
pub fn run_each(jobs: &[Model], workers: usize) -> Result<Vec<Result<(ReturnSeries, RunSummary)>>> {
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(Model::run).collect()))
}

/// As [`run_each`], failing on the first job error.
pub fn run_all(jobs: &[Model], workers: usize) -> Result<Vec<(ReturnSeries, RunSummary)>> {
    run_each(jobs, workers)?.into_iter().collect()
}
