//! Parallel replicate execution with bit-reproducible output.
//!
//! Replicate `i` always draws from RNG stream `i` and results are collected
//! in replicate order, so the thread count changes wall time only, never a
//! byte of output.

use rayon::prelude::*;

use lineage_core::sampling::{sample_leftmost, sample_palm, sample_uniform_marker, Scheme};
use lineage_core::simulator::simulate_tree;
use lineage_core::{Error as CoreError, Record64, RngStream, Tree64};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Largest tolerated fraction of replicates discarded by the node cap before
/// the experiment aborts: silent truncation would bias every estimate.
pub const MAX_OVERFLOW_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    pub n_alive: usize,
    pub overflowed: bool,
    pub records: Vec<Record64>,
}

#[derive(Debug)]
pub struct Batch {
    pub outcomes: Vec<ReplicateOutcome>,
}

impl Batch {
    pub fn replicates(&self) -> u64 {
        self.outcomes.len() as u64
    }

    pub fn survivors(&self) -> u64 {
        self.outcomes.iter().filter(|o| o.n_alive > 0).count() as u64
    }

    pub fn survival_fraction(&self) -> f64 {
        self.survivors() as f64 / self.replicates() as f64
    }

    pub fn overflow_trees(&self) -> u64 {
        self.outcomes.iter().filter(|o| o.overflowed).count() as u64
    }

    pub fn overflow_fraction(&self) -> f64 {
        self.overflow_trees() as f64 / self.replicates() as f64
    }

    /// Empirical estimate of `E[N_T]`.
    pub fn mean_alive(&self) -> f64 {
        self.outcomes.iter().map(|o| o.n_alive as f64).sum::<f64>() / self.replicates() as f64
    }

    pub fn records(&self) -> impl Iterator<Item = &Record64> {
        self.outcomes.iter().flat_map(|o| o.records.iter())
    }

    pub fn n_records(&self) -> u64 {
        self.outcomes.iter().map(|o| o.records.len() as u64).sum()
    }
}

/// Builds a rayon pool of the requested size (0 or absent = one per CPU).
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

/// Runs all replicates of the configured experiment and samples lineages
/// under the configured scheme. Only surviving records are retained.
pub fn simulate_batch(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Batch> {
    let d = cfg.offspring_law()?;
    let law = cfg.lifetime_law()?;
    let scheme = cfg.scheme();
    let pool = thread_pool(threads.or(cfg.threads))?;
    let outcomes: std::result::Result<Vec<ReplicateOutcome>, CoreError> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(cfg.base_seed, i);
                let tree = match simulate_tree(&d, &law, cfg.horizon, &mut rng, cfg.max_nodes) {
                    Ok(tree) => tree,
                    Err(CoreError::PopulationCap { .. }) => {
                        return Ok(ReplicateOutcome {
                            replicate: i,
                            n_alive: 0,
                            overflowed: true,
                            records: Vec::new(),
                        })
                    }
                    Err(e) => return Err(e),
                };
                let records = sample_records(&tree, scheme, &mut rng);
                Ok(ReplicateOutcome {
                    replicate: i,
                    n_alive: tree.n_alive(),
                    overflowed: false,
                    records,
                })
            })
            .collect()
    });
    let batch = Batch {
        outcomes: outcomes?,
    };
    if batch.overflow_fraction() > MAX_OVERFLOW_FRACTION {
        return Err(CliError::Numerics(format!(
            "{} of {} replicates exceeded max_nodes = {}; raise the cap or shrink the horizon",
            batch.overflow_trees(),
            batch.replicates(),
            cfg.max_nodes
        )));
    }
    Ok(batch)
}

fn sample_records(tree: &Tree64, scheme: Scheme, rng: &mut RngStream) -> Vec<Record64> {
    match scheme {
        Scheme::UniformMarker => {
            let rec = sample_uniform_marker(tree, rng);
            if rec.survived {
                vec![rec]
            } else {
                Vec::new()
            }
        }
        Scheme::Palm => sample_palm(tree),
        Scheme::Leftmost => {
            let rec = sample_leftmost(tree);
            if rec.survived {
                vec![rec]
            } else {
                Vec::new()
            }
        }
    }
}
