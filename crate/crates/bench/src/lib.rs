//! Shared fixtures for the benchmarks.

use sle_core::{find_a0, Grid, GridSpec, ScanConfig, SolverConfig, SpinorPair};

pub fn grid(n_nodes: usize) -> Grid {
    GridSpec {
        n_nodes,
        ..GridSpec::standard()
    }
    .build()
    .expect("benchmark grid")
}

/// Converged pair and eigenvalue at the default scan root.
pub fn converged(grid: &Grid) -> (f64, SpinorPair, f64) {
    let r = find_a0(&ScanConfig::default(), &SolverConfig::default(), grid).expect("scan");
    (r.a0, r.solution.pair, r.solution.k)
}
