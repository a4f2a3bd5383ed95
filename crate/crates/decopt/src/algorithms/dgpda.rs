//! Gradient primal-dual solver: a linearized augmented-Lagrangian step with
//! a network proximal term, executed through a two-neighbor-round-deep
//! per-node recursion. Edge duals never materialize on the nodes; the
//! driver co-simulates them for measurement.

use nalgebra::DMatrix;

use super::{
    edge_differences, edge_transpose_apply, AlgoError, DgpdaParams, RunAccumulator, RunOptions,
    Snapshot, StopRule, Trajectory,
};
use crate::graph::Graph;
use crate::linalg;
use crate::metrics::{dgpda_potential, MeasureContext};
use crate::problems::ProblemInstance;
use crate::simulator::{Inbox, NetworkInfo, NodeProgram, Session, SimError, UpdateInfo};

/// Per-node view of the solver; one communication round advances the
/// iterate by one step (the first round performs the initialization solve).
pub struct DgpdaProgram<'a> {
    problem: &'a ProblemInstance,
    m_f: f64,
    dim: usize,
    beta2: Vec<f64>,
    /// `2 sum_j sigma2_ij + beta2_i`, the diagonal of the local solve.
    denom: Vec<f64>,
    /// `sum_j sigma2_ij`.
    sigsum: Vec<f64>,
    /// Per-node edge weights aligned with the neighbor lists.
    sig2_adj: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DgpdaState {
    pub x_cur: Vec<f64>,
    pub x_prev: Vec<f64>,
    /// Gradient and value at `x_prev`'s successor evaluation point (the
    /// iterate one round behind `x_cur`).
    pub g_prev: Vec<f64>,
    pub val_prev: f64,
    /// `sum_j sigma2_ij x_j` of the previous round.
    pub wsum_prev: Vec<f64>,
    pub round: u64,
}

impl<'a> DgpdaProgram<'a> {
    pub fn new(problem: &'a ProblemInstance, graph: &'a Graph, params: &DgpdaParams) -> Self {
        let m = graph.node_count();
        let mut sig2_adj = vec![Vec::new(); m];
        let mut sigsum = vec![0.0; m];
        for (e, &(hi, lo)) in graph.edges().iter().enumerate() {
            sigsum[hi] += params.sigma2[e];
            sigsum[lo] += params.sigma2[e];
        }
        for i in 0..m {
            for &j in graph.neighbors(i) {
                let (hi, lo) = (i.max(j), i.min(j));
                let e = graph.edges().binary_search(&(hi, lo)).expect("edge exists");
                sig2_adj[i].push(params.sigma2[e]);
            }
        }
        let beta2: Vec<f64> = params.beta2.iter().copied().collect();
        let denom = (0..m).map(|i| 2.0 * sigsum[i] + beta2[i]).collect();
        DgpdaProgram {
            problem,
            m_f: m as f64,
            dim: problem.dim(),
            beta2,
            denom,
            sigsum,
            sig2_adj,
        }
    }

    /// Value and gradient stack at the iterate one round behind `x_cur`
    /// (what the last round evaluated).
    pub(crate) fn collect_prev_eval(&self, states: &[DgpdaState]) -> (f64, DMatrix<f64>) {
        let m = states.len();
        let mut grads = DMatrix::zeros(m, self.dim);
        let mut val = 0.0;
        for (i, st) in states.iter().enumerate() {
            val += st.val_prev;
            for k in 0..self.dim {
                grads[(i, k)] = st.g_prev[k];
            }
        }
        (val / self.m_f, grads)
    }
}

impl NodeProgram for DgpdaProgram<'_> {
    type State = DgpdaState;

    fn init(&self, _node: usize, _net: &NetworkInfo) -> DgpdaState {
        DgpdaState {
            x_cur: vec![0.0; self.dim],
            x_prev: vec![0.0; self.dim],
            g_prev: vec![0.0; self.dim],
            val_prev: 0.0,
            wsum_prev: vec![0.0; self.dim],
            round: 0,
        }
    }

    fn message(&self, _node: usize, state: &DgpdaState) -> Vec<f64> {
        state.x_cur.clone()
    }

    fn update(
        &self,
        node: usize,
        state: &mut DgpdaState,
        inbox: &Inbox<'_>,
    ) -> Result<UpdateInfo, SimError> {
        let dim = self.dim;
        let mut recv = vec![0.0; dim];
        for (idx, &j) in inbox.neighbors().iter().enumerate() {
            let msg = inbox.get(j)?;
            let w = self.sig2_adj[node][idx];
            for k in 0..dim {
                recv[k] += w * msg[k];
            }
        }
        let mut g_cur = vec![0.0; dim];
        let val_cur = self.problem.oracle(node).value_grad(&state.x_cur, &mut g_cur);

        let mut x_next = vec![0.0; dim];
        if state.round == 0 {
            // initialization solve: (2 Delta + Upsilon^2) x0 = -grad f(0)
            for k in 0..dim {
                x_next[k] = -(g_cur[k] / self.m_f) / self.denom[node];
            }
        } else {
            let b2 = self.beta2[node];
            for k in 0..dim {
                let rhs = (g_cur[k] - state.g_prev[k]) / self.m_f
                    - 2.0 * recv[k]
                    - b2 * state.x_cur[k]
                    + b2 * state.x_prev[k]
                    + state.wsum_prev[k]
                    + self.sigsum[node] * state.x_prev[k];
                x_next[k] = state.x_cur[k] - rhs / self.denom[node];
            }
        }
        state.x_prev = std::mem::replace(&mut state.x_cur, x_next);
        state.g_prev = g_cur;
        state.val_prev = val_cur;
        state.wsum_prev = recv;
        state.round += 1;
        Ok(UpdateInfo { grad_evals: 1 })
    }

    fn primal<'s>(&self, state: &'s DgpdaState) -> &'s [f64] {
        &state.x_cur
    }

    fn state_vec(&self, state: &DgpdaState) -> Vec<f64> {
        let mut v = state.x_cur.clone();
        v.extend_from_slice(&state.x_prev);
        v.extend_from_slice(&state.g_prev);
        v.extend_from_slice(&state.wsum_prev);
        v.push(state.val_prev);
        v
    }
}

fn stack_x(states: &[DgpdaState], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), dim, |i, k| states[i].x_cur[k])
}

/// Run the solver under a stopping rule. One record is produced per
/// iterate; snapshots (for the inequality checker) are kept on request.
pub fn dgpda_run(
    problem: &ProblemInstance,
    graph: &Graph,
    params: &DgpdaParams,
    stop: &StopRule,
    opts: &RunOptions,
) -> Result<Trajectory, AlgoError> {
    let program = DgpdaProgram::new(problem, graph, params);
    let net = NetworkInfo::from_graph(graph);
    let mut session = Session::new(&program, graph, &net);
    let ctx = MeasureContext::new(graph, problem);
    let edges = graph.edges();
    let m = graph.node_count();
    let s = problem.dim();
    let profile_l = problem.profile.as_vector();

    let mut acc = RunAccumulator::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();

    // sliding window of iterates: a = x^{k-1} (recorded), b = x^k (pending
    // its gradient stack, which the next round evaluates)
    let mut x_a = DMatrix::zeros(m, s);
    let mut pend: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None; // (x, lambda, fx)
    let mut lambda = DMatrix::zeros(edges.len(), s);
    let mut completed = false;

    for round in 1..=stop.max_rounds {
        session.step()?;
        let x_new = stack_x(&session.states, s);
        if !x_new.iter().all(|v| v.is_finite()) {
            return Err(AlgoError::NonFinite { round });
        }
        let (val_b, grads_b) = program.collect_prev_eval(&session.states);

        match pend.take() {
            None => {
                // the first round evaluated the origin
                if opts.retain_states {
                    snapshots.push(Snapshot {
                        outer_iter: -1,
                        x: DMatrix::zeros(m, s),
                        lambda: DMatrix::zeros(edges.len(), s),
                        grads: grads_b,
                        fval: val_b,
                        eps: None,
                        eps_tilde: None,
                    });
                }
            }
            Some((x_b, lambda_b, fx_b)) => {
                let k = (round - 2) as usize; // x_b = x^k
                let (gavg, consensus) = ctx.stationarity_parts(&x_b, &grads_b);
                let e_val =
                    gavg + super::edge_minus_quadratic(edges, &params.sigma2, &x_b);
                let potential = dgpda_potential(
                    val_b, &x_b, &x_a, &fx_b, &lambda_b, params, &profile_l, edges,
                );
                acc.push(k, (k + 1) as u64, (k + 1) as u64, gavg, consensus, e_val, potential);

                if opts.cross_check {
                    cross_check(
                        &x_new, &x_b, &grads_b, &lambda_b, params, edges, m, round,
                    )?;
                }
                if opts.retain_states {
                    snapshots.push(Snapshot {
                        outer_iter: k as i64,
                        x: x_b.clone(),
                        lambda: lambda_b.clone(),
                        grads: grads_b,
                        fval: val_b,
                        eps: None,
                        eps_tilde: None,
                    });
                }
                if acc.target_met(stop) {
                    completed = true;
                    x_a = x_b;
                    break;
                }
                x_a = x_b;
            }
        }
        let fx_new = edge_differences(edges, &x_new);
        for e in 0..edges.len() {
            for k in 0..s {
                lambda[(e, k)] += params.sigma2[e] * fx_new[(e, k)];
            }
        }
        pend = Some((x_new, lambda.clone(), fx_new));
    }

    // flush the trailing iterate with a direct evaluation
    if !completed {
        if let Some((x_b, lambda_b, fx_b)) = pend {
            let k = session.counters.rounds as usize - 1;
            let (val_b, grads_b) = problem.objective_and_local_gradients(&x_b);
            let (gavg, consensus) = ctx.stationarity_parts(&x_b, &grads_b);
            let e_val = gavg + super::edge_minus_quadratic(edges, &params.sigma2, &x_b);
            let potential =
                dgpda_potential(val_b, &x_b, &x_a, &fx_b, &lambda_b, params, &profile_l, edges);
            acc.push(k, (k + 1) as u64, (k + 1) as u64, gavg, consensus, e_val, potential);
            if opts.retain_states {
                snapshots.push(Snapshot {
                    outer_iter: k as i64,
                    x: x_b.clone(),
                    lambda: lambda_b,
                    grads: grads_b,
                    fval: val_b,
                    eps: None,
                    eps_tilde: None,
                });
            }
            completed = acc.target_met(stop) || stop.target.is_none();
            x_a = x_b;
        }
    }

    Ok(Trajectory {
        algo: "dgpda",
        records: acc.records,
        snapshots,
        completed,
        total_rounds: session.counters.rounds,
        final_x: x_a,
        h_star: acc.h_star,
        e_min: acc.e_min,
    })
}

/// The new iterate must solve the centralized subproblem: compare against
/// the diagonal closed form and check the optimality identity.
#[allow(clippy::too_many_arguments)]
fn cross_check(
    x_new: &DMatrix<f64>,
    x_b: &DMatrix<f64>,
    grads_b: &DMatrix<f64>,
    lambda_b: &DMatrix<f64>,
    params: &DgpdaParams,
    edges: &[(usize, usize)],
    m: usize,
    round: u64,
) -> Result<(), AlgoError> {
    let m_f = m as f64;
    let ft_lambda = edge_transpose_apply(edges, m, lambda_b);
    let hx = {
        // H x = B^T Sigma^2 B x + Upsilon^2 x, edge-wise
        let mut out = DMatrix::zeros(m, x_b.ncols());
        for (e, &(hi, lo)) in edges.iter().enumerate() {
            for k in 0..x_b.ncols() {
                let s = params.sigma2[e] * (x_b[(hi, k)] + x_b[(lo, k)]);
                out[(hi, k)] += s;
                out[(lo, k)] += s;
            }
        }
        for i in 0..m {
            for k in 0..x_b.ncols() {
                out[(i, k)] += params.beta2[i] * x_b[(i, k)];
            }
        }
        out
    };
    let rhs = &hx - grads_b / m_f - &ft_lambda;
    let mut closed = DMatrix::zeros(m, x_b.ncols());
    for i in 0..m {
        let d = 2.0 * params.delta[i] + params.beta2[i];
        for k in 0..x_b.ncols() {
            closed[(i, k)] = rhs[(i, k)] / d;
        }
    }
    let scale = linalg::scale_rows(
        &nalgebra::DVector::from_fn(m, |i, _| 2.0 * params.delta[i] + params.beta2[i]),
        x_new,
    )
    .abs()
    .max()
    .max(1.0);
    let dev = (&closed - x_new).abs().max();
    if dev > 1e-8 * scale.max(1.0) {
        return Err(AlgoError::CrossCheck {
            iter: round as usize,
            msg: format!("distributed vs centralized deviation {dev:.3e}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::dgpda_params;
    use crate::graph::GraphFamily;
    use crate::problems::{LipschitzProfile, Oracle, ProblemInstance};

    fn zero_gradient_instance(m: usize) -> ProblemInstance {
        let oracles = (0..m)
            .map(|_| {
                Oracle::new(1, |_x, g| {
                    g[0] = 0.0;
                    1.5
                })
            })
            .collect();
        ProblemInstance::new(
            oracles,
            LipschitzProfile::uniform(m, 1.0),
            Some(1.5),
            "flat",
            serde_json::json!({}),
        )
    }

    fn two_node_quadratic() -> (Graph, ProblemInstance) {
        let graph = Graph::generate(&GraphFamily::Path, 2, 0).unwrap();
        let inst = ProblemInstance::new(
            vec![
                Oracle::new(1, |x, g| {
                    g[0] = 2.0 * (x[0] - 1.0);
                    (x[0] - 1.0) * (x[0] - 1.0)
                }),
                Oracle::new(1, |x, g| {
                    g[0] = 2.0 * (x[0] + 1.0);
                    (x[0] + 1.0) * (x[0] + 1.0)
                }),
            ],
            LipschitzProfile::uniform(2, 2.0),
            Some(0.0),
            "quadratic",
            serde_json::json!({}),
        );
        (graph, inst)
    }

    #[test]
    fn zero_gradient_keeps_iterates_at_zero() {
        let graph = Graph::generate(&GraphFamily::Cycle, 6, 0).unwrap();
        let inst = zero_gradient_instance(6);
        let params = dgpda_params(&inst, &graph).unwrap();
        let traj = dgpda_run(&inst, &graph, &params, &StopRule::rounds(20), &RunOptions::default())
            .unwrap();
        assert!(traj.final_x.iter().all(|&v| v == 0.0));
        assert_eq!(traj.total_rounds, 20);
    }

    #[test]
    fn two_node_quadratic_reaches_symmetric_stationary_point() {
        let (graph, inst) = two_node_quadratic();
        let params = dgpda_params(&inst, &graph).unwrap();
        let traj = dgpda_run(
            &inst,
            &graph,
            &params,
            &StopRule::rounds(4000),
            &RunOptions { cross_check: true, ..Default::default() },
        )
        .unwrap();
        // stationary consensus point is x1 = x2 = 0 by symmetry
        let last = traj.last_record().unwrap();
        assert!(last.grad_avg_norm_sq <= 1e-12, "grad avg {}", last.grad_avg_norm_sq);
        let consensus_gap = (traj.final_x[(0, 0)] - traj.final_x[(1, 0)]).abs();
        assert!(consensus_gap <= 1e-6, "consensus gap {}", consensus_gap);
    }

    #[test]
    fn record_counters_track_rounds_and_gradients() {
        let (graph, inst) = two_node_quadratic();
        let params = dgpda_params(&inst, &graph).unwrap();
        let traj =
            dgpda_run(&inst, &graph, &params, &StopRule::rounds(10), &RunOptions::default())
                .unwrap();
        for (k, rec) in traj.records.iter().enumerate() {
            assert_eq!(rec.outer_iter, k);
            assert_eq!(rec.comm_rounds, (k + 1) as u64);
            assert_eq!(rec.grad_evals, (k + 1) as u64);
            assert!(rec.grad_evals <= rec.comm_rounds);
        }
        // h_star is non-increasing
        for w in traj.records.windows(2) {
            assert!(w[1].h_star <= w[0].h_star);
        }
    }
}
