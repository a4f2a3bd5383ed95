//! Filtering solver: each outer iteration runs a fixed number of Chebyshev
//! rounds on the consensus system `R x = d`, injects one fresh local
//! gradient (prediction), then refreshes the tracked target `d` with one
//! more exchange (tracking).
//!
//! The per-node program spends `Q` rounds in the filter phase and one round
//! in the tracking phase; gradient work happens only in tracking.

use nalgebra::DMatrix;

use super::{
    edge_differences, edge_transpose_apply, AlgoError, RunAccumulator, RunOptions, Snapshot,
    StopRule, Trajectory, XFilterParams,
};
use crate::graph::Graph;
use crate::linalg;
use crate::metrics::{xfilter_potential, MeasureContext};
use crate::problems::ProblemInstance;
use crate::simulator::{Inbox, NetworkInfo, NodeProgram, Session, SimError, UpdateInfo};

pub struct XFilterProgram<'a> {
    problem: &'a ProblemInstance,
    m_f: f64,
    dim: usize,
    q: usize,
    tau: f64,
    rho0_sq: f64,
    inv_beta2: Vec<f64>,
    sig2_adj: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct XFilterState {
    /// Committed outer iterate `x^r`.
    pub x_cur: Vec<f64>,
    /// Chebyshev working iterates.
    pub u_prev: Vec<f64>,
    pub u_cur: Vec<f64>,
    /// Tracked filter target `d^r`.
    pub d_cur: Vec<f64>,
    /// Prediction `x^r - grad f_i(x^r) / (M beta2_i)`.
    pub xt_cur: Vec<f64>,
    /// Gradient and value at `x_cur`.
    pub g_cur: Vec<f64>,
    pub val_cur: f64,
    /// 1..=q are filter rounds, q+1 is the tracking round.
    pub phase: usize,
    pub alpha_prev: f64,
}

impl<'a> XFilterProgram<'a> {
    pub fn new(problem: &'a ProblemInstance, graph: &'a Graph, params: &XFilterParams) -> Self {
        let m = graph.node_count();
        let mut sig2_adj = vec![Vec::new(); m];
        for i in 0..m {
            for &j in graph.neighbors(i) {
                let (hi, lo) = (i.max(j), i.min(j));
                let e = graph.edges().binary_search(&(hi, lo)).expect("edge exists");
                sig2_adj[i].push(params.sigma2[e]);
            }
        }
        XFilterProgram {
            problem,
            m_f: m as f64,
            dim: problem.dim(),
            q: params.q,
            tau: params.tau,
            rho0_sq: params.rho0 * params.rho0,
            inv_beta2: params.beta2.iter().map(|&b| if b > 0.0 { 1.0 / b } else { 0.0 }).collect(),
            sig2_adj,
        }
    }

    /// `(R u)_i` from the node's own entry and its neighbors' messages.
    fn apply_r_row(
        &self,
        node: usize,
        own: &[f64],
        inbox: &Inbox<'_>,
        out: &mut [f64],
    ) -> Result<(), SimError> {
        let dim = self.dim;
        let mut acc = vec![0.0; dim];
        for (idx, &j) in inbox.neighbors().iter().enumerate() {
            let msg = inbox.get(j)?;
            let w = self.sig2_adj[node][idx];
            for k in 0..dim {
                acc[k] += w * (own[k] - msg[k]);
            }
        }
        let ib = self.inv_beta2[node];
        for k in 0..dim {
            out[k] = own[k] + ib * acc[k];
        }
        Ok(())
    }

    pub(crate) fn collect_cur_eval(&self, states: &[XFilterState]) -> (f64, DMatrix<f64>) {
        let m = states.len();
        let mut grads = DMatrix::zeros(m, self.dim);
        let mut val = 0.0;
        for (i, st) in states.iter().enumerate() {
            val += st.val_cur;
            for k in 0..self.dim {
                grads[(i, k)] = st.g_cur[k];
            }
        }
        (val / self.m_f, grads)
    }

    pub(crate) fn collect_d(&self, states: &[XFilterState]) -> DMatrix<f64> {
        DMatrix::from_fn(states.len(), self.dim, |i, k| states[i].d_cur[k])
    }
}

impl NodeProgram for XFilterProgram<'_> {
    type State = XFilterState;

    fn init(&self, node: usize, _net: &NetworkInfo) -> XFilterState {
        let dim = self.dim;
        let zero = vec![0.0; dim];
        let mut g = vec![0.0; dim];
        let val = self.problem.oracle(node).value_grad(&zero, &mut g);
        let ib = self.inv_beta2[node];
        let d: Vec<f64> = g.iter().map(|&v| -ib * v / self.m_f).collect();
        XFilterState {
            x_cur: zero.clone(),
            u_prev: zero.clone(),
            u_cur: zero,
            xt_cur: d.clone(),
            d_cur: d,
            g_cur: g,
            val_cur: val,
            phase: 1,
            alpha_prev: 2.0,
        }
    }

    fn message(&self, _node: usize, state: &XFilterState) -> Vec<f64> {
        state.u_cur.clone()
    }

    fn update(
        &self,
        node: usize,
        state: &mut XFilterState,
        inbox: &Inbox<'_>,
    ) -> Result<UpdateInfo, SimError> {
        let dim = self.dim;
        if state.phase <= self.q {
            // filter round: one Chebyshev step on R u = d
            let mut ru = vec![0.0; dim];
            self.apply_r_row(node, &state.u_cur, inbox, &mut ru)?;
            let tau = self.tau;
            let mut u_next = vec![0.0; dim];
            if state.phase == 1 {
                for k in 0..dim {
                    u_next[k] = state.u_cur[k] - tau * ru[k] + tau * state.d_cur[k];
                }
            } else {
                let alpha = 4.0 / (4.0 - self.rho0_sq * state.alpha_prev);
                for k in 0..dim {
                    u_next[k] = alpha * (state.u_cur[k] - tau * ru[k])
                        + (1.0 - alpha) * state.u_prev[k]
                        + tau * alpha * state.d_cur[k];
                }
                state.alpha_prev = alpha;
            }
            state.u_prev = std::mem::replace(&mut state.u_cur, u_next);
            state.phase += 1;
            Ok(UpdateInfo { grad_evals: 0 })
        } else {
            // tracking round: commit x, predict with a fresh gradient,
            // refresh the tracked target
            let x_next = state.u_cur.clone();
            let mut g_next = vec![0.0; dim];
            let val_next = self.problem.oracle(node).value_grad(&x_next, &mut g_next);
            let ib = self.inv_beta2[node];
            let mut xt_next = vec![0.0; dim];
            for k in 0..dim {
                xt_next[k] = x_next[k] - ib * g_next[k] / self.m_f;
            }
            let mut cons = vec![0.0; dim];
            for (idx, &j) in inbox.neighbors().iter().enumerate() {
                let msg = inbox.get(j)?;
                let w = self.sig2_adj[node][idx];
                for k in 0..dim {
                    cons[k] += w * (x_next[k] - msg[k]);
                }
            }
            for k in 0..dim {
                state.d_cur[k] += xt_next[k] - state.xt_cur[k] - ib * cons[k];
            }
            state.x_cur = x_next;
            state.xt_cur = xt_next;
            state.g_cur = g_next;
            state.val_cur = val_next;
            state.u_prev = vec![0.0; dim];
            state.u_cur = state.x_cur.clone();
            state.phase = 1;
            state.alpha_prev = 2.0;
            Ok(UpdateInfo { grad_evals: 1 })
        }
    }

    fn primal<'s>(&self, state: &'s XFilterState) -> &'s [f64] {
        &state.u_cur
    }

    fn state_vec(&self, state: &XFilterState) -> Vec<f64> {
        let mut v = state.x_cur.clone();
        v.extend_from_slice(&state.u_prev);
        v.extend_from_slice(&state.u_cur);
        v.extend_from_slice(&state.d_cur);
        v.extend_from_slice(&state.xt_cur);
        v.extend_from_slice(&state.g_cur);
        v.push(state.val_cur);
        v.push(state.alpha_prev);
        v
    }
}

fn stack_x(states: &[XFilterState], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), dim, |i, k| states[i].x_cur[k])
}

/// Run the filtering solver. Each outer iteration costs `Q + 1`
/// communication rounds (`Q` filter exchanges plus the tracking exchange)
/// and exactly one gradient evaluation per node.
pub fn xfilter_run(
    problem: &ProblemInstance,
    graph: &Graph,
    params: &XFilterParams,
    stop: &StopRule,
    opts: &RunOptions,
) -> Result<Trajectory, AlgoError> {
    let program = XFilterProgram::new(problem, graph, params);
    let net = NetworkInfo::from_graph(graph);
    let mut session = Session::new(&program, graph, &net);
    let ctx = MeasureContext::new(graph, problem);
    let edges = graph.edges();
    let m = graph.node_count();
    let s = problem.dim();
    let profile_l = problem.profile.as_vector();
    let rounds_per_outer = params.rounds_per_outer();

    // exact inner solves for the residual bookkeeping
    let chol = nalgebra::Cholesky::new(params.upsilon2_r.clone()).ok_or_else(|| {
        AlgoError::DegenerateFilter("proximal system is not positive definite".into())
    })?;

    let mut acc = RunAccumulator::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut lambda = DMatrix::zeros(edges.len(), s);
    let mut x_prev = DMatrix::zeros(m, s);
    let mut d_prev = program.collect_d(&session.states);

    if opts.retain_states {
        let (val0, grads0) = program.collect_cur_eval(&session.states);
        snapshots.push(Snapshot {
            outer_iter: -1,
            x: DMatrix::zeros(m, s),
            lambda: DMatrix::zeros(edges.len(), s),
            grads: grads0,
            fval: val0,
            eps: None,
            eps_tilde: None,
        });
    }

    let mut completed = stop.target.is_none();
    let mut outer = 0usize;
    while session.counters.rounds + rounds_per_outer <= stop.max_rounds {
        for _ in 0..rounds_per_outer {
            session.step()?;
        }
        let x_new = stack_x(&session.states, s);
        if !x_new.iter().all(|v| v.is_finite()) {
            return Err(AlgoError::NonFinite { round: session.counters.rounds });
        }
        let (val, grads) = program.collect_cur_eval(&session.states);
        let fx = edge_differences(edges, &x_new);
        for e in 0..edges.len() {
            for k in 0..s {
                lambda[(e, k)] += params.sigma2[e] * fx[(e, k)];
            }
        }

        // residuals against the exact inner solution R x* = d^{r}
        let rhs = linalg::scale_rows(&params.beta2, &d_prev);
        let x_star = chol.solve(&rhs);
        let eps = &x_new - &x_star;
        let eps_tilde = &x_prev - &x_star;

        let (gavg, consensus) = ctx.stationarity_parts(&x_new, &grads);
        let e_val = gavg + super::edge_minus_quadratic(edges, &params.sigma2, &x_new);
        let potential =
            xfilter_potential(val, &x_new, &x_prev, &fx, &lambda, params, &profile_l, edges);
        acc.push(
            outer,
            (outer as u64 + 1) * rounds_per_outer,
            outer as u64 + 2,
            gavg,
            consensus,
            e_val,
            potential,
        );

        if opts.cross_check {
            // tracked-target identity: d = x - U^{-2} grad f(x) - U^{-2} F^T lambda
            let d_now = program.collect_d(&session.states);
            let ft_lambda = edge_transpose_apply(edges, m, &lambda);
            let inv_b2 =
                nalgebra::DVector::from_iterator(m, program.inv_beta2.iter().copied());
            let ident =
                &x_new - linalg::scale_rows(&inv_b2, &(&grads / program.m_f + ft_lambda));
            let dev = (&d_now - ident).abs().max();
            let scale = d_now.abs().max().max(1.0);
            if dev > 1e-8 * scale {
                return Err(AlgoError::CrossCheck {
                    iter: outer,
                    msg: format!("tracking identity deviation {dev:.3e}"),
                });
            }
        }
        if opts.retain_states {
            snapshots.push(Snapshot {
                outer_iter: outer as i64,
                x: x_new.clone(),
                lambda: lambda.clone(),
                grads,
                fval: val,
                eps: Some(eps),
                eps_tilde: Some(eps_tilde),
            });
        }

        d_prev = program.collect_d(&session.states);
        x_prev = x_new;
        outer += 1;
        if acc.target_met(stop) {
            completed = true;
            break;
        }
    }

    Ok(Trajectory {
        algo: "xfilter",
        records: acc.records,
        snapshots,
        completed,
        total_rounds: session.counters.rounds,
        final_x: x_prev,
        h_star: acc.h_star,
        e_min: acc.e_min,
    })
}
