//! Bulk-synchronous execution of node programs: every round each node
//! broadcasts one vector to its neighbors, a barrier passes, then every
//! node combines what it received with its own history.
//!
//! The driver enforces neighbor-only delivery (reading a non-neighbor
//! message is a hard error), counts communication rounds and gradient
//! evaluations, and can audit whether a program consumes neighbor messages
//! only through their unweighted sum.

use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("node {node} read a message from non-neighbor {from} at round {round}")]
    NonNeighborRead { node: usize, from: usize, round: u64 },
    #[error("non-finite state at node {node}, round {round}")]
    NonFinite { node: usize, round: u64 },
}

/// Network constants a node may learn before the first round (size,
/// diameter, Laplacian spectrum summaries).
#[derive(Debug, Clone)]
pub struct NetworkInfo {
    pub node_count: usize,
    pub diameter: usize,
    pub lap_lambda_max: f64,
    pub lap_lambda_min_nonzero: f64,
    /// Smallest nonzero eigenvalue of `F^T F` (the unnormalized Laplacian).
    pub ftf_lambda_min_nonzero: f64,
}

impl NetworkInfo {
    pub fn from_graph(graph: &Graph) -> Self {
        let lap = graph.normalized_laplacian();
        let s = crate::graph::spectral(&lap, None).expect("connected graph has a spectral gap");
        let ftf = graph.unnormalized_laplacian();
        let sf = crate::graph::spectral(&ftf, None).expect("connected graph has a spectral gap");
        NetworkInfo {
            node_count: graph.node_count(),
            diameter: graph.diameter(),
            lap_lambda_max: s.lambda_max,
            lap_lambda_min_nonzero: s.lambda_min_nonzero,
            ftf_lambda_min_nonzero: sf.lambda_min_nonzero,
        }
    }
}

/// Messages visible to one node during its combine step.
pub struct Inbox<'a> {
    node: usize,
    round: u64,
    neighbors: &'a [usize],
    messages: &'a [Vec<f64>],
}

impl<'a> Inbox<'a> {
    /// The message a neighbor broadcast this round. Reading from a
    /// non-neighbor violates the communication contract.
    pub fn get(&self, from: usize) -> Result<&'a [f64], SimError> {
        if self.neighbors.binary_search(&from).is_err() {
            return Err(SimError::NonNeighborRead {
                node: self.node,
                from,
                round: self.round,
            });
        }
        Ok(&self.messages[from])
    }

    pub fn neighbors(&self) -> &'a [usize] {
        self.neighbors
    }

    /// Unweighted sum of all neighbor messages.
    pub fn sum(&self, dim: usize) -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        for &j in self.neighbors {
            for (a, m) in acc.iter_mut().zip(&self.messages[j]) {
                *a += m;
            }
        }
        acc
    }
}

/// What one combine step did (used for work accounting).
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateInfo {
    pub grad_evals: u32,
}

/// A per-node program: broadcast a vector, then combine received messages
/// with local state and (optionally) a fresh local gradient.
pub trait NodeProgram {
    type State: Clone;

    fn init(&self, node: usize, net: &NetworkInfo) -> Self::State;

    /// The vector broadcast to all neighbors this round.
    fn message(&self, node: usize, state: &Self::State) -> Vec<f64>;

    /// Combine step; must read neighbor data only through `inbox`.
    fn update(
        &self,
        node: usize,
        state: &mut Self::State,
        inbox: &Inbox<'_>,
    ) -> Result<UpdateInfo, SimError>;

    /// The node's current primal iterate (for measurement).
    fn primal<'s>(&self, state: &'s Self::State) -> &'s [f64];

    /// Full numeric content of the state (used by the usage audit).
    fn state_vec(&self, state: &Self::State) -> Vec<f64>;
}

/// One round of a recorded execution.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    pub round: u64,
    pub message_norms: Vec<f64>,
    pub grad_flags: Vec<bool>,
    /// Primal iterate of every node after the round (when recording).
    pub primal: Option<Vec<Vec<f64>>>,
    pub messages: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Counters {
    pub rounds: u64,
    /// Total gradient evaluations summed over nodes (at most `M * rounds`).
    pub gradient_evals: u64,
}

/// First observed deviation from sum-only message usage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditViolation {
    pub round: u64,
    pub node: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    pub record_primal: bool,
    pub record_messages: bool,
    pub audit: bool,
}

/// A running bulk-synchronous execution. `step` performs one
/// communication-then-computation round over all nodes in node order.
pub struct Session<'a, P: NodeProgram> {
    program: &'a P,
    graph: &'a Graph,
    pub states: Vec<P::State>,
    pub counters: Counters,
}

impl<'a, P: NodeProgram> Session<'a, P> {
    pub fn new(program: &'a P, graph: &'a Graph, net: &NetworkInfo) -> Self {
        let states = (0..graph.node_count())
            .map(|i| program.init(i, net))
            .collect();
        Session {
            program,
            graph,
            states,
            counters: Counters::default(),
        }
    }

    /// Run one round; returns the broadcast messages and per-node gradient
    /// flags.
    pub fn step(&mut self) -> Result<(Vec<Vec<f64>>, Vec<bool>), SimError> {
        let m = self.graph.node_count();
        let round = self.counters.rounds + 1;
        // communication phase: everyone broadcasts
        let messages: Vec<Vec<f64>> = (0..m)
            .map(|i| self.program.message(i, &self.states[i]))
            .collect();
        // barrier, then computation phase
        let mut grad_flags = vec![false; m];
        for i in 0..m {
            let inbox = Inbox {
                node: i,
                round,
                neighbors: self.graph.neighbors(i),
                messages: &messages,
            };
            let info = self.program.update(i, &mut self.states[i], &inbox)?;
            grad_flags[i] = info.grad_evals > 0;
            self.counters.gradient_evals += info.grad_evals as u64;
        }
        self.counters.rounds = round;
        Ok((messages, grad_flags))
    }

    /// Audit the round that `step` is about to run: for every node with at
    /// least two neighbors, shift mass between two neighbor messages
    /// (keeping their sum fixed) and re-run the combine on a copy. A state
    /// change means the combine weights neighbors unequally.
    fn audit_next_round(&self, messages: &[Vec<f64>]) -> Result<Option<AuditViolation>, SimError> {
        let round = self.counters.rounds + 1;
        for i in 0..self.graph.node_count() {
            let nbrs = self.graph.neighbors(i);
            if nbrs.len() < 2 {
                continue;
            }
            let base = {
                let mut st = self.states[i].clone();
                let inbox = Inbox { node: i, round, neighbors: nbrs, messages };
                self.program.update(i, &mut st, &inbox)?;
                self.program.state_vec(&st)
            };
            let dim = messages[nbrs[0]].len();
            for pair in nbrs.windows(2) {
                let (ja, jb) = (pair[0], pair[1]);
                for coord in [0, dim.saturating_sub(1)] {
                    let scale = 1.0
                        + messages[ja][coord].abs().max(messages[jb][coord].abs());
                    let mut perturbed = messages.to_vec();
                    perturbed[ja][coord] += scale;
                    perturbed[jb][coord] -= scale;
                    let mut st = self.states[i].clone();
                    let inbox = Inbox { node: i, round, neighbors: nbrs, messages: &perturbed };
                    self.program.update(i, &mut st, &inbox)?;
                    let probe = self.program.state_vec(&st);
                    let deviation = base
                        .iter()
                        .zip(&probe)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    let state_scale = base.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    if deviation > 1e-9 * state_scale * scale {
                        return Ok(Some(AuditViolation { round, node: i, deviation }));
                    }
                }
            }
        }
        Ok(None)
    }
}

/// Outcome of a recorded execution.
pub struct SimRun<P: NodeProgram> {
    pub states: Vec<P::State>,
    pub traces: Vec<RoundTrace>,
    pub counters: Counters,
    /// `Some(None)` = audited clean; `Some(Some(v))` = first violation.
    pub audit: Option<Option<AuditViolation>>,
}

/// Execute `n_rounds` rounds of a node program, recording per-round traces.
pub fn run_rounds<P: NodeProgram>(
    program: &P,
    graph: &Graph,
    net: &NetworkInfo,
    n_rounds: u64,
    opts: &SimOptions,
) -> Result<SimRun<P>, SimError> {
    let mut session = Session::new(program, graph, net);
    let mut traces = Vec::with_capacity(n_rounds as usize);
    let mut first_violation: Option<AuditViolation> = None;
    for _ in 0..n_rounds {
        if opts.audit && first_violation.is_none() {
            let m = graph.node_count();
            let messages: Vec<Vec<f64>> = (0..m)
                .map(|i| program.message(i, &session.states[i]))
                .collect();
            first_violation = session.audit_next_round(&messages)?;
        }
        let (messages, grad_flags) = session.step()?;
        let message_norms = messages
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let primal = opts.record_primal.then(|| {
            session
                .states
                .iter()
                .map(|s| program.primal(s).to_vec())
                .collect()
        });
        traces.push(RoundTrace {
            round: session.counters.rounds,
            message_norms,
            grad_flags,
            primal,
            messages: opts.record_messages.then_some(messages),
        });
        for (i, s) in session.states.iter().enumerate() {
            if program.state_vec(s).iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite { node: i, round: session.counters.rounds });
            }
        }
    }
    Ok(SimRun {
        states: session.states,
        traces,
        counters: session.counters,
        audit: opts.audit.then_some(first_violation),
    })
}

/// Sum-only audit over a fixed number of rounds: `Ok(())` means every
/// combine consumed neighbor messages only through their unweighted sum.
pub fn audit_class_sum_only<P: NodeProgram>(
    program: &P,
    graph: &Graph,
    net: &NetworkInfo,
    n_rounds: u64,
) -> Result<Result<(), AuditViolation>, SimError> {
    let opts = SimOptions { audit: true, ..Default::default() };
    let run = run_rounds(program, graph, net, n_rounds, &opts)?;
    Ok(match run.audit.flatten() {
        None => Ok(()),
        Some(v) => Err(v),
    })
}

/// Largest 1-based coordinate index that is nonzero anywhere in `rows`
/// (0 when all entries are exactly zero).
pub fn max_active_coordinate<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> usize {
    let mut max_idx = 0;
    for row in rows {
        for (k, &v) in row.iter().enumerate() {
            if v != 0.0 {
                max_idx = max_idx.max(k + 1);
            }
        }
    }
    max_idx
}

/// Stack per-node primal vectors into an `M x S` matrix.
pub fn stack_rows(rows: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let m = rows.len();
    let s = rows[0].len();
    nalgebra::DMatrix::from_fn(m, s, |i, k| rows[i][k])
}
