//! The solvers: a gradient primal-dual scheme (`dgpda`), a filtering
//! scheme with a Chebyshev inner loop (`xfilter`), and a distributed
//! subgradient baseline (`dsg`).
//!
//! Every solver is written as a per-node program (see [`crate::simulator`]);
//! the `*_run` drivers execute that same program round by round and attach
//! an observer that co-simulates edge duals, computes measures, and builds
//! per-outer-iteration records.

mod chebyshev;
mod dgpda;
mod dsg;
mod params;
mod xfilter;

pub use chebyshev::{chebyshev_solve, required_iterations, AlphaSeq};
pub use dgpda::{dgpda_run, DgpdaProgram, DgpdaState};
pub use dsg::{dsg_run, DsgProgram, DsgState, StepRule};
pub use params::{
    dgpda_params, dgpda_params_with, xfilter_params, xfilter_params_with, DgpdaParams,
    ParamChoice, ParamOverrides, XFilterParams,
};
pub use xfilter::{xfilter_run, XFilterProgram, XFilterState};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::GraphError;
use crate::metrics::RunRecord;
use crate::simulator::SimError;

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error("parameter rule failed: {0}")]
    ParamRule(String),
    #[error("node {0} has a zero Lipschitz constant; this solver needs positive ones")]
    ZeroLipschitz(usize),
    #[error("degenerate filter: {0}")]
    DegenerateFilter(String),
    #[error("non-finite iterate at round {round} (diverged)")]
    NonFinite { round: u64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cross-check failed at outer iterate {iter}: {msg}")]
    CrossCheck { iter: usize, msg: String },
}

/// Which running minimum a target threshold applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMeasure {
    HStar,
    EVal,
}

/// Stopping rule: a hard communication-round budget plus an optional
/// threshold on one of the running-minimum measures.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub max_rounds: u64,
    pub target: Option<f64>,
    pub measure: StopMeasure,
}

impl StopRule {
    pub fn rounds(max_rounds: u64) -> Self {
        StopRule { max_rounds, target: None, measure: StopMeasure::HStar }
    }

    pub fn target(max_rounds: u64, target: f64, measure: StopMeasure) -> Self {
        StopRule { max_rounds, target: Some(target), measure }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep full per-outer-iterate snapshots (needed by the inequality
    /// checker).
    pub retain_states: bool,
    /// Verify per iteration that the distributed recursion agrees with the
    /// centralized closed form / optimality identities.
    pub cross_check: bool,
}

/// Per-outer-iterate state kept when `retain_states` is on. Index `-1`
/// holds the zero initialization.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub outer_iter: i64,
    pub x: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    /// Per-node gradient stack at `x` (not divided by `M`).
    pub grads: DMatrix<f64>,
    pub fval: f64,
    /// Filtering residual that produced `x` (filtering solver only).
    pub eps: Option<DMatrix<f64>>,
    /// Previous iterate minus the exact inner solution.
    pub eps_tilde: Option<DMatrix<f64>>,
}

/// A completed (or round-budget-exhausted) run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub algo: &'static str,
    pub records: Vec<RunRecord>,
    pub snapshots: Vec<Snapshot>,
    /// False when a target was requested and the round budget ran out first.
    pub completed: bool,
    pub total_rounds: u64,
    pub final_x: DMatrix<f64>,
    pub h_star: f64,
    pub e_min: f64,
}

impl Trajectory {
    pub fn last_record(&self) -> Option<&RunRecord> {
        self.records.last()
    }
}

/// Running minima plus record storage shared by the drivers.
pub(crate) struct RunAccumulator {
    pub records: Vec<RunRecord>,
    pub h_star: f64,
    pub e_min: f64,
    started: std::time::Instant,
}

impl RunAccumulator {
    pub fn new() -> Self {
        RunAccumulator {
            records: Vec::new(),
            h_star: f64::INFINITY,
            e_min: f64::INFINITY,
            started: std::time::Instant::now(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        outer_iter: usize,
        comm_rounds: u64,
        grad_evals: u64,
        grad_avg_norm_sq: f64,
        consensus_weighted: f64,
        e_val: f64,
        potential: f64,
    ) {
        self.h_star = self.h_star.min(grad_avg_norm_sq + consensus_weighted);
        self.e_min = self.e_min.min(e_val);
        self.records.push(RunRecord {
            outer_iter,
            comm_rounds,
            grad_evals,
            grad_avg_norm_sq,
            consensus_weighted,
            h_star: self.h_star,
            e_val,
            potential,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        });
    }

    pub fn target_met(&self, stop: &StopRule) -> bool {
        match stop.target {
            None => false,
            Some(t) => match stop.measure {
                StopMeasure::HStar => self.h_star <= t,
                StopMeasure::EVal => self.e_min <= t,
            },
        }
    }
}

/// `(F x)_e = x_hi - x_lo` per canonical edge.
pub(crate) fn edge_differences(edges: &[(usize, usize)], x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(edges.len(), x.ncols());
    for (e, &(hi, lo)) in edges.iter().enumerate() {
        for k in 0..x.ncols() {
            out[(e, k)] = x[(hi, k)] - x[(lo, k)];
        }
    }
    out
}

/// `F^T y`: scatter edge rows back to nodes with the canonical signs.
pub(crate) fn edge_transpose_apply(
    edges: &[(usize, usize)],
    node_count: usize,
    y: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(node_count, y.ncols());
    for (e, &(hi, lo)) in edges.iter().enumerate() {
        for k in 0..y.ncols() {
            out[(hi, k)] += y[(e, k)];
            out[(lo, k)] -= y[(e, k)];
        }
    }
    out
}

/// `sum_e w_e ||x_hi - x_lo||^2` (the `F`-side quadratic).
pub(crate) fn edge_minus_quadratic(
    edges: &[(usize, usize)],
    w: &DVector<f64>,
    x: &DMatrix<f64>,
) -> f64 {
    let mut acc = 0.0;
    for (e, &(hi, lo)) in edges.iter().enumerate() {
        acc += w[e] * (x.row(hi) - x.row(lo)).norm_squared();
    }
    acc
}

/// `sum_e w_e ||x_hi + x_lo||^2` (the `|F|`-side quadratic).
pub(crate) fn edge_plus_quadratic(
    edges: &[(usize, usize)],
    w: &DVector<f64>,
    x: &DMatrix<f64>,
) -> f64 {
    let mut acc = 0.0;
    for (e, &(hi, lo)) in edges.iter().enumerate() {
        acc += w[e] * (x.row(hi) + x.row(lo)).norm_squared();
    }
    acc
}
