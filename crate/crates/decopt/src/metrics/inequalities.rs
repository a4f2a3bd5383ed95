//! Runtime certification of the descent/boundedness inequalities the rate
//! analysis rests on, evaluated along retained trajectories.

use nalgebra::{DMatrix, DVector};

use crate::algorithms::{
    edge_differences, edge_minus_quadratic, edge_plus_quadratic, edge_transpose_apply,
    DgpdaParams, Snapshot, Trajectory, XFilterParams,
};
use crate::graph::Graph;
use crate::linalg;
use crate::metrics::{augmented_lagrangian, dgpda_potential, xfilter_potential};
use crate::problems::ProblemInstance;

/// One inequality instance: `lhs <= rhs` with `margin = rhs - lhs`.
#[derive(Debug, Clone)]
pub struct IneqCheck {
    pub id: &'static str,
    pub iter: i64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct IneqReport {
    pub checks: Vec<IneqCheck>,
}

impl IneqReport {
    fn push(&mut self, id: &'static str, iter: i64, lhs: f64, rhs: f64, rel_tol: f64) {
        let scale = lhs.abs().max(rhs.abs());
        let pass = lhs - rhs <= rel_tol * scale;
        self.checks.push(IneqCheck { id, iter, lhs, rhs, margin: rhs - lhs, pass });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IneqCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Smallest margin over all instances of one inequality id.
    pub fn worst_margin(&self, id: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.id == id)
            .map(|c| c.margin)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    pub fn merge(&mut self, other: IneqReport) {
        self.checks.extend(other.checks);
    }
}

fn sigma_inv_norm_sq(edges_len: usize, sigma2: &DVector<f64>, y: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for e in 0..edges_len {
        if sigma2[e] > 0.0 {
            acc += y.row(e).norm_squared() / sigma2[e];
        }
    }
    acc
}

/// `(F^T Sigma^2 F + diag(beta2)) v`.
fn upsilon2_r_apply(
    edges: &[(usize, usize)],
    sigma2: &DVector<f64>,
    beta2: &DVector<f64>,
    v: &DMatrix<f64>,
) -> DMatrix<f64> {
    let fv = edge_differences(edges, v);
    let scaled = linalg::scale_rows(sigma2, &fv);
    let mut out = edge_transpose_apply(edges, v.nrows(), &scaled);
    for i in 0..v.nrows() {
        for k in 0..v.ncols() {
            out[(i, k)] += beta2[i] * v[(i, k)];
        }
    }
    out
}

fn profile_upsilon_term(
    delta: &DMatrix<f64>,
    beta2: &DVector<f64>,
    l: &DVector<f64>,
) -> f64 {
    let w = DVector::from_fn(l.len(), |i, _| {
        let b = beta2[i].sqrt();
        if b > 0.0 { l[i] / b } else { 0.0 }
    });
    linalg::scale_rows(&w, delta).norm_squared()
}

/// Certify the gradient primal-dual trajectory: dual-difference bound,
/// merit descent, potential descent, potential boundedness, and the
/// per-step optimality identity. Requires retained snapshots.
pub fn check_dgpda_trajectory(
    traj: &Trajectory,
    params: &DgpdaParams,
    problem: &ProblemInstance,
    graph: &Graph,
    rel_tol: f64,
) -> IneqReport {
    let mut rep = IneqReport::default();
    let snaps = &traj.snapshots;
    assert!(!snaps.is_empty(), "retain_states must be on");
    let edges = graph.edges();
    let m = graph.node_count() as f64;
    let l = problem.profile.as_vector();

    let al = |s: &Snapshot| {
        let fx = edge_differences(edges, &s.x);
        augmented_lagrangian(s.fval, &fx, &s.lambda, &params.sigma2)
    };
    let pot = |next: &Snapshot, prev: &Snapshot| {
        let fx = edge_differences(edges, &next.x);
        dgpda_potential(next.fval, &next.x, &prev.x, &fx, &next.lambda, params, &l, edges)
    };
    let h_norm = |v: &DMatrix<f64>| {
        edge_plus_quadratic(edges, &params.sigma2, v)
            + linalg::diag_weighted_norm_sq(v, &params.beta2)
    };

    // per-step optimality identity (pairs)
    for w in snaps.windows(2) {
        let (b, c) = (&w[0], &w[1]);
        let ft_lambda = edge_transpose_apply(edges, graph.node_count(), &b.lambda);
        let fc = edge_differences(edges, &c.x);
        let ft_s2_fc =
            edge_transpose_apply(edges, graph.node_count(), &linalg::scale_rows(&params.sigma2, &fc));
        let delta = &c.x - &b.x;
        // H delta = B^T S2 B delta + Upsilon^2 delta (plus-sign scatter)
        let mut h_delta = DMatrix::zeros(graph.node_count(), delta.ncols());
        for (e, &(hi, lo)) in edges.iter().enumerate() {
            for k in 0..delta.ncols() {
                let s = params.sigma2[e] * (delta[(hi, k)] + delta[(lo, k)]);
                h_delta[(hi, k)] += s;
                h_delta[(lo, k)] += s;
            }
        }
        for i in 0..graph.node_count() {
            for k in 0..delta.ncols() {
                h_delta[(i, k)] += params.beta2[i] * delta[(i, k)];
            }
        }
        let scale = (&b.grads / m).abs().max().max(h_delta.abs().max()).max(1.0);
        let residual = &b.grads / m + ft_lambda + ft_s2_fc + h_delta;
        rep.push("opt_identity", c.outer_iter, residual.abs().max(), 1e-8 * scale, 0.0);
    }

    // triple-based inequalities
    for w in snaps.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let r = b.outer_iter; // inequality index r >= 0
        let delta_cb = &c.x - &b.x;
        let delta_ba = &b.x - &a.x;
        let wvec = &delta_cb - &delta_ba;

        // dual difference bound
        let lam_diff = &c.lambda - &b.lambda;
        let lhs = sigma_inv_norm_sq(edges.len(), &params.sigma2, &lam_diff);
        let rhs = 2.0
            * params.kappa
            * (profile_upsilon_term(&delta_ba, &params.beta2, &l) / (m * m) + h_norm(&wvec));
        rep.push("dual_diff_bound", r, lhs, rhs, rel_tol);

        // merit descent; Delta + 2 Upsilon^2 - L/M is diagonal
        let lhs = al(c) - al(b);
        let mut quad = 0.0;
        for i in 0..graph.node_count() {
            let wgt = params.delta[i] + 2.0 * params.beta2[i] - l[i] / m;
            quad += wgt * delta_cb.row(i).norm_squared();
        }
        let rhs = -0.5 * quad
            + params.kappa
                * (2.0 / (m * m) * profile_upsilon_term(&delta_ba, &params.beta2, &l)
                    + 2.0 * h_norm(&wvec));
        rep.push("merit_descent", r, lhs, rhs, rel_tol);

        // potential descent
        let drop = pot(b, a) - pot(c, b);
        let mut quarter = 0.0;
        for i in 0..graph.node_count() {
            quarter += (params.delta[i] + params.beta2[i]) * delta_cb.row(i).norm_squared();
        }
        let need = 0.25 * quarter + params.kappa * h_norm(&wvec);
        rep.push("potential_descent", r, need, drop, rel_tol);
    }

    // boundedness
    if let Some(f_lower) = problem.lower_bound {
        for w in snaps.windows(2) {
            let (b, c) = (&w[0], &w[1]);
            rep.push("potential_above_inf", c.outer_iter, f_lower, pot(c, b), rel_tol);
        }
    }
    if snaps.len() >= 2 {
        let p0 = pot(&snaps[1], &snaps[0]);
        let cap = snaps[1].fval + 2.0 / m * problem.d0_inv_profile_norm();
        rep.push("initial_potential_cap", 0, p0, cap, rel_tol);
    }
    rep
}

/// Certify the filtering trajectory: the residual bounds from the inner
/// solver schedule, the dual-difference and merit-descent analogues,
/// potential descent/boundedness.
pub fn check_xfilter_trajectory(
    traj: &Trajectory,
    params: &XFilterParams,
    problem: &ProblemInstance,
    graph: &Graph,
    rel_tol: f64,
) -> IneqReport {
    let mut rep = IneqReport::default();
    let snaps = &traj.snapshots;
    assert!(!snaps.is_empty(), "retain_states must be on");
    let edges = graph.edges();
    let mn = graph.node_count();
    let m = mn as f64;
    let l = problem.profile.as_vector();
    let inv_beta = params.beta2.map(|b| if b > 0.0 { 1.0 / b.sqrt() } else { 0.0 });

    let u2r_norm = |v: &DMatrix<f64>| {
        edge_minus_quadratic(edges, &params.sigma2, v)
            + linalg::diag_weighted_norm_sq(v, &params.beta2)
    };
    let al = |s: &Snapshot| {
        let fx = edge_differences(edges, &s.x);
        augmented_lagrangian(s.fval, &fx, &s.lambda, &params.sigma2)
    };
    let pot = |next: &Snapshot, prev: &Snapshot| {
        let fx = edge_differences(edges, &next.x);
        xfilter_potential(next.fval, &next.x, &prev.x, &fx, &next.lambda, params, &l, edges)
    };

    // residual bounds at every produced iterate (needs x^{r+1}, x^r)
    for w in snaps.windows(2) {
        let (b, c) = (&w[0], &w[1]);
        let eps = c.eps.as_ref().expect("filter snapshots carry residuals");
        let delta = &c.x - &b.x;
        let cap = u2r_norm(&delta);
        let u2r_eps = upsilon2_r_apply(edges, &params.sigma2, &params.beta2, eps);

        rep.push(
            "residual_a",
            c.outer_iter,
            u2r_eps.norm_squared(),
            cap / (16.0 * m),
            rel_tol,
        );
        rep.push("residual_b", c.outer_iter, u2r_norm(eps), cap / (16.0 * m), rel_tol);
        let ur_eps = linalg::scale_rows(&inv_beta, &u2r_eps);
        rep.push("residual_c", c.outer_iter, ur_eps.norm_squared(), cap / (16.0 * m), rel_tol);
        rep.push(
            "residual_d",
            c.outer_iter,
            linalg::frob_inner(&u2r_eps, &delta),
            3.0 / 16.0 * cap,
            rel_tol,
        );
        // residual_e needs the previous step too; see the triple loop
    }

    for w in snaps.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let r = b.outer_iter;
        let delta_cb = &c.x - &b.x;
        let delta_ba = &b.x - &a.x;
        let wvec = &delta_cb - &delta_ba;
        let eps_next = c.eps.as_ref().unwrap();
        let u2r_eps_next = upsilon2_r_apply(edges, &params.sigma2, &params.beta2, eps_next);

        if let Some(eps_cur) = b.eps.as_ref() {
            let u2r_eps_cur = upsilon2_r_apply(edges, &params.sigma2, &params.beta2, eps_cur);
            rep.push(
                "residual_e",
                r,
                linalg::frob_inner(&u2r_eps_cur, &delta_cb),
                0.125 * u2r_norm(&delta_ba) + u2r_norm(&delta_cb) / 16.0,
                rel_tol,
            );

            // dual difference bound (filtering form)
            let lam_diff = &c.lambda - &b.lambda;
            let lhs = sigma_inv_norm_sq(edges.len(), &params.sigma2, &lam_diff);
            let eps_diff = eps_next - eps_cur;
            let ur_eps_diff = linalg::scale_rows(
                &inv_beta,
                &upsilon2_r_apply(edges, &params.sigma2, &params.beta2, &eps_diff),
            );
            let rhs = params.kappa_tilde
                * (3.0 / (m * m) * profile_upsilon_term(&delta_ba, &params.beta2, &l)
                    + 3.0 * linalg::diag_weighted_norm_sq(&wvec, &params.beta2)
                    + 3.0 * ur_eps_diff.norm_squared());
            rep.push("dual_diff_bound", r, lhs, rhs, rel_tol);

            // merit descent (filtering form)
            let lhs = al(c) - al(b);
            let mut quad = edge_minus_quadratic(edges, &params.sigma2, &delta_cb);
            for i in 0..mn {
                quad += (params.beta2[i] - l[i] / m) * delta_cb.row(i).norm_squared();
            }
            let rhs = -0.5 * quad
                + linalg::frob_inner(&u2r_eps_next, &delta_cb)
                + params.kappa_tilde
                    * (3.0 / (m * m) * profile_upsilon_term(&delta_ba, &params.beta2, &l)
                        + 3.0 * linalg::diag_weighted_norm_sq(&wvec, &params.beta2)
                        + 3.0 * ur_eps_diff.norm_squared());
            rep.push("merit_descent", r, lhs, rhs, rel_tol);
        }

        // potential descent
        let drop = pot(b, a) - pot(c, b);
        let need = 0.125 * u2r_norm(&delta_cb)
            + params.kappa_tilde * linalg::diag_weighted_norm_sq(&wvec, &params.beta2);
        rep.push("potential_descent", r, need, drop, rel_tol);
    }

    if let Some(f_lower) = problem.lower_bound {
        for w in snaps.windows(2) {
            let (b, c) = (&w[0], &w[1]);
            rep.push("potential_above_inf", c.outer_iter, f_lower, pot(c, b), rel_tol);
        }
    }
    if snaps.len() >= 2 {
        let p0 = pot(&snaps[1], &snaps[0]);
        let cap = snaps[1].fval + 5.0 / m * problem.d0_inv_profile_norm();
        rep.push("initial_potential_cap", 0, p0, cap, rel_tol);
    }
    rep
}
