//! Solution-quality measures, potential functions, and per-run records.

pub mod bounds;
pub mod inequalities;

use nalgebra::{DMatrix, DVector};

use crate::algorithms::{DgpdaParams, XFilterParams};
use crate::graph::{spectral, Graph};
use crate::linalg;
use crate::problems::ProblemInstance;

/// One measurements row per outer iterate.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub outer_iter: usize,
    pub comm_rounds: u64,
    /// Full-network gradient evaluations so far (one per node each).
    pub grad_evals: u64,
    /// `|| (1/M) sum_i grad f_i(x_i) ||^2`.
    pub grad_avg_norm_sq: f64,
    /// Profile-weighted consensus violation (second term of the local
    /// measure).
    pub consensus_weighted: f64,
    /// Running minimum of `grad_avg_norm_sq + consensus_weighted`.
    pub h_star: f64,
    /// Current `grad_avg_norm_sq + ||Sigma F x||^2` (not the running min).
    pub e_val: f64,
    /// Algorithm-specific potential (NaN for the subgradient baseline).
    pub potential: f64,
    pub wall_ms: f64,
}

/// Cached per-(graph, profile) quantities for the stationarity measures.
#[derive(Debug, Clone)]
pub struct MeasureContext {
    pub node_count: usize,
    /// Smallest nonzero eigenvalue of `F^T F` (equals that of
    /// `P^{1/2} L_norm P^{1/2}`; the two matrices are identical).
    pub ftf_lambda_min: f64,
    /// `sqrt(L_i L_j)` per canonical edge.
    pub lip_edge_weights: DVector<f64>,
    edges: Vec<(usize, usize)>,
}

impl MeasureContext {
    pub fn new(graph: &Graph, problem: &ProblemInstance) -> Self {
        let ftf = graph.unnormalized_laplacian();
        let s = spectral(&ftf, None).expect("connected graph");
        MeasureContext {
            node_count: graph.node_count(),
            ftf_lambda_min: s.lambda_min_nonzero,
            lip_edge_weights: problem.profile.edge_weights(graph),
            edges: graph.edges().to_vec(),
        }
    }

    /// Sum over edges of `w_e * ||x_i - x_j||^2` for arbitrary edge weights.
    pub fn edge_quadratic(&self, x: &DMatrix<f64>, weights: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (e, &(hi, lo)) in self.edges.iter().enumerate() {
            let diff = x.row(hi) - x.row(lo);
            acc += weights[e] * diff.norm_squared();
        }
        acc
    }

    /// The two terms of the local measure given the gradient stack at `x`.
    pub fn stationarity_parts(&self, x: &DMatrix<f64>, grads: &DMatrix<f64>) -> (f64, f64) {
        // mean over nodes of the per-node gradients
        let mean = grads.row_mean();
        let grad_avg = mean.norm_squared();
        let consensus = self.edge_quadratic(x, &self.lip_edge_weights)
            / (self.node_count as f64 * self.ftf_lambda_min);
        (grad_avg, consensus)
    }
}

/// Full stationarity report for one iterate block.
#[derive(Debug, Clone, Copy)]
pub struct Stationarity {
    pub grad_avg_norm_sq: f64,
    pub consensus_weighted: f64,
    /// `grad_avg_norm_sq + consensus_weighted`.
    pub local_measure: f64,
    /// `||grad f_bar(y)||^2` at `y = mean_i x_i`.
    pub global_measure: f64,
}

/// Evaluate both solution-quality measures at `x`.
pub fn stationarity(
    x: &DMatrix<f64>,
    problem: &ProblemInstance,
    ctx: &MeasureContext,
) -> Stationarity {
    let grads = problem.local_gradients(x);
    let (grad_avg_norm_sq, consensus_weighted) = ctx.stationarity_parts(x, &grads);
    let mean: Vec<f64> = x.row_mean().iter().copied().collect();
    let (_, gbar) = problem.mean_value_grad(&mean);
    let global_measure = gbar.iter().map(|v| v * v).sum();
    Stationarity {
        grad_avg_norm_sq,
        consensus_weighted,
        local_measure: grad_avg_norm_sq + consensus_weighted,
        global_measure,
    }
}

/// Augmented Lagrangian `f(x) + <lambda, Fx> + 1/2 ||Sigma F x||^2` given
/// the edge-difference image `fx = F x` and the dual block.
pub fn augmented_lagrangian(
    fval: f64,
    fx: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    sigma2: &DVector<f64>,
) -> f64 {
    fval + linalg::frob_inner(lambda, fx) + 0.5 * linalg::diag_weighted_norm_sq(fx, sigma2)
}

/// `|| Upsilon^{-1} L delta ||^2` with diagonal entries `L_i / beta_i`.
fn profile_over_upsilon_norm_sq(
    delta: &DMatrix<f64>,
    beta2: &DVector<f64>,
    profile_l: &DVector<f64>,
) -> f64 {
    let ul = DVector::from_fn(profile_l.len(), |i, _| {
        let b = beta2[i].sqrt();
        if b > 0.0 { profile_l[i] / b } else { 0.0 }
    });
    linalg::scale_rows(&ul, delta).norm_squared()
}

/// Potential of the gradient primal-dual solver at `(x_next, x_prev,
/// lambda_next)`. `fx_next = F x_next`; `edges` is the canonical edge list.
#[allow(clippy::too_many_arguments)]
pub fn dgpda_potential(
    fval_next: f64,
    x_next: &DMatrix<f64>,
    x_prev: &DMatrix<f64>,
    fx_next: &DMatrix<f64>,
    lambda_next: &DMatrix<f64>,
    params: &DgpdaParams,
    profile_l: &DVector<f64>,
    edges: &[(usize, usize)],
) -> f64 {
    let m_f = x_next.nrows() as f64;
    let al = augmented_lagrangian(fval_next, fx_next, lambda_next, &params.sigma2);
    let delta = x_next - x_prev;
    let ul_term = profile_over_upsilon_norm_sq(&delta, &params.beta2, profile_l);
    let sigma_fx = linalg::diag_weighted_norm_sq(fx_next, &params.sigma2);
    // ||delta||^2_H = sum_e sigma2_e ||d_hi + d_lo||^2 + sum_i beta2_i ||d_i||^2
    let h_term = crate::algorithms::edge_plus_quadratic(edges, &params.sigma2, &delta)
        + linalg::diag_weighted_norm_sq(&delta, &params.beta2);
    let l_term = linalg::diag_weighted_norm_sq(&delta, &(profile_l / m_f));
    al + 2.0 * params.kappa / (m_f * m_f) * ul_term
        + 0.5 * params.c * (sigma_fx + h_term + l_term)
}

/// Potential of the filtering solver at `(x_next, x_prev, lambda_next)`.
#[allow(clippy::too_many_arguments)]
pub fn xfilter_potential(
    fval_next: f64,
    x_next: &DMatrix<f64>,
    x_prev: &DMatrix<f64>,
    fx_next: &DMatrix<f64>,
    lambda_next: &DMatrix<f64>,
    params: &XFilterParams,
    profile_l: &DVector<f64>,
    edges: &[(usize, usize)],
) -> f64 {
    let m_f = x_next.nrows() as f64;
    let al = augmented_lagrangian(fval_next, fx_next, lambda_next, &params.sigma2);
    let delta = x_next - x_prev;
    let ul_term = profile_over_upsilon_norm_sq(&delta, &params.beta2, profile_l);
    // ||delta||^2_{U^2 R} = sum_e sigma2_e ||d_hi - d_lo||^2 + sum_i beta2_i ||d_i||^2
    let u2r_term = crate::algorithms::edge_minus_quadratic(edges, &params.sigma2, &delta)
        + linalg::diag_weighted_norm_sq(&delta, &params.beta2);
    let sigma_fx = linalg::diag_weighted_norm_sq(fx_next, &params.sigma2);
    let mix_term = linalg::diag_weighted_norm_sq(&delta, &params.beta2)
        + 0.25 * u2r_term
        + linalg::diag_weighted_norm_sq(&delta, &(profile_l / m_f));
    al + 3.0 * params.kappa_tilde / (m_f * m_f) * ul_term
        + 3.0 * params.kappa_tilde / 8.0 * u2r_term
        + 0.5 * params.c_tilde * (sigma_fx + mix_term)
}
