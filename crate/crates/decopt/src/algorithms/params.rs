//! Parameter-selection rules for the two primal-dual solvers, with
//! numerical validation of the descent conditions they are supposed to
//! guarantee.

use nalgebra::{DMatrix, DVector};

use super::AlgoError;
use crate::graph::{spectral, Graph};
use crate::linalg;
use crate::problems::ProblemInstance;

/// Optional experiment-time adjustments. Scales multiply the rule-derived
/// matrices; when any is active the descent-condition validation is only
/// recorded, not enforced, since the guarantees are tied to the rule.
#[derive(Debug, Clone, Copy)]
pub struct ParamOverrides {
    pub sigma2_scale: f64,
    pub upsilon2_scale: f64,
    pub q_override: Option<usize>,
}

impl Default for ParamOverrides {
    fn default() -> Self {
        ParamOverrides { sigma2_scale: 1.0, upsilon2_scale: 1.0, q_override: None }
    }
}

impl ParamOverrides {
    fn is_rule(&self) -> bool {
        self.sigma2_scale == 1.0 && self.upsilon2_scale == 1.0 && self.q_override.is_none()
    }
}

/// Parameters of the gradient primal-dual solver: per-edge dual stepsizes
/// `sigma2`, per-node proximal weights `beta2`, and the constants entering
/// its potential function.
#[derive(Debug, Clone)]
pub struct DgpdaParams {
    pub sigma2: DVector<f64>,
    pub beta2: DVector<f64>,
    /// `delta[i] = sum_{j ~ i} sigma2_ij`.
    pub delta: DVector<f64>,
    /// `H = B^T Sigma^2 B + Upsilon^2` (dense, symmetric PD).
    pub h: DMatrix<f64>,
    pub kappa: f64,
    pub c: f64,
    /// Whether the descent conditions validated under these exact values.
    pub validated: bool,
}

impl DgpdaParams {
    /// Rate constant `C2 = 4 sum sigma2 + sum beta2 + 4`.
    pub fn c2(&self) -> f64 {
        4.0 * self.sigma2.sum() + self.beta2.sum() + 4.0
    }
}

/// Parameter rule: `sigma2_ij = beta^2 sqrt(L_i L_j) / sqrt(d_i d_j)`,
/// `Upsilon^2 = beta^2 L`, with the global scale `beta^2` set from the
/// profile-weighted generalized Laplacian so the potential decreases.
pub fn dgpda_params(
    problem: &ProblemInstance,
    graph: &Graph,
) -> Result<DgpdaParams, AlgoError> {
    dgpda_params_with(problem, graph, &ParamOverrides::default())
}

pub fn dgpda_params_with(
    problem: &ProblemInstance,
    graph: &Graph,
    overrides: &ParamOverrides,
) -> Result<DgpdaParams, AlgoError> {
    let m = graph.node_count();
    let l = problem.profile.as_vector();
    if let Some(i) = l.iter().position(|&v| v <= 0.0) {
        return Err(AlgoError::ZeroLipschitz(i));
    }

    // W_ii = (sqrt(L_i)/sqrt(d_i)) sum_{q ~ i} sqrt(L_q)/sqrt(d_q)
    let ratio: Vec<f64> = (0..m)
        .map(|i| (l[i] / graph.degree(i) as f64).sqrt())
        .collect();
    let w_max = (0..m)
        .map(|i| ratio[i] * graph.neighbors(i).iter().map(|&q| ratio[q]).sum::<f64>())
        .fold(f64::MIN, f64::max);

    // the generalized Laplacian of the rule is scale-free in beta^2
    let sigma0 = DVector::from_iterator(
        graph.edge_count(),
        graph
            .edges()
            .iter()
            .map(|&(hi, lo)| {
                (l[hi] * l[lo]).sqrt() / ((graph.degree(hi) * graph.degree(lo)) as f64).sqrt()
            }),
    );
    let upsilon0 = l.map(f64::sqrt);
    let gl = graph
        .generalized_laplacian(&upsilon0, &sigma0)
        .map_err(|e| AlgoError::ParamRule(e.to_string()))?;
    let gl_min = spectral(&gl, None)
        .map_err(|e| AlgoError::ParamRule(e.to_string()))?
        .lambda_min_nonzero;

    let beta2 = 80.0 * w_max.max(1.0) / (gl_min.min(1.0) * m as f64);
    let sigma2 = sigma0 * (beta2 * overrides.sigma2_scale);
    let beta2_vec = &l * (beta2 * overrides.upsilon2_scale);

    let mats = graph
        .matrices(Some(&sigma2))
        .map_err(|e| AlgoError::ParamRule(e.to_string()))?;
    let b = &mats.abs_scaled_incidence;
    let h = b.transpose() * DMatrix::from_diagonal(&sigma2) * b
        + DMatrix::from_diagonal(&beta2_vec);

    // kappa = 1 / min-nonzero-eig(Sigma F H^{-1} F^T Sigma); the nonzero
    // spectrum matches the node-side product H^{-1/2} F^T Sigma^2 F H^{-1/2}
    let f = &mats.scaled_incidence;
    let core = f.transpose() * DMatrix::from_diagonal(&sigma2) * f;
    let h_inv_sqrt = linalg::inv_sqrt_psd(&h, 1e-14 * linalg::max_eigenvalue(&h));
    let kappa_mat = &h_inv_sqrt * &core * &h_inv_sqrt;
    let kappa = 1.0
        / spectral(&kappa_mat, None)
            .map_err(|e| AlgoError::ParamRule(e.to_string()))?
            .lambda_min_nonzero;
    let c = (6.0 * kappa).max(1.0);

    // descent conditions (all participating matrices are diagonal here)
    let m_f = m as f64;
    let mut validated = true;
    let mut worst = f64::MAX;
    for i in 0..m {
        let li = l[i];
        let b2 = beta2_vec[i];
        let lul = li * li / b2; // (L Upsilon^{-2} L)_ii
        if b2 < lul / (m_f * m_f) - 1e-9 {
            validated = false;
        }
        let margin =
            0.5 * (mats.delta[i] + b2) - li / m_f - 4.0 * kappa / (m_f * m_f) * lul
                - 2.0 * c * li / m_f;
        worst = worst.min(margin);
    }
    let scale = beta2_vec.amax().max(1.0);
    if worst < -1e-9 * scale {
        validated = false;
    }
    if !validated && overrides.is_rule() {
        return Err(AlgoError::ParamRule(format!(
            "descent condition failed (worst diagonal margin {worst:.3e})"
        )));
    }

    Ok(DgpdaParams {
        sigma2,
        beta2: beta2_vec,
        delta: mats.delta,
        h,
        kappa,
        c,
        validated,
    })
}

/// Which spectral normalization the filtering solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamChoice {
    /// Degree-aware: needs the degree-uniformity constant `k`; the inner
    /// system conditioning follows the degree/profile-normalized Laplacian.
    I,
    /// Degree-free: conditioning follows the profile-normalized Laplacian.
    II,
}

/// Parameters of the filtering solver: dual stepsizes, proximal weights,
/// the inner linear system `R`, and the Chebyshev schedule for it.
#[derive(Debug, Clone)]
pub struct XFilterParams {
    pub sigma2: DVector<f64>,
    pub beta2: DVector<f64>,
    /// `R = Upsilon^{-2} F^T Sigma^2 F + I` (not symmetric in general).
    pub r: DMatrix<f64>,
    /// `Upsilon^2 R = F^T Sigma^2 F + Upsilon^2` (symmetric PSD).
    pub upsilon2_r: DMatrix<f64>,
    pub q: usize,
    pub tau: f64,
    pub rho0: f64,
    /// Inner contraction target implied by `q`.
    pub eta: f64,
    pub theta: f64,
    pub xi_r: f64,
    pub lambda_min_r: f64,
    pub lambda_max_r: f64,
    pub kappa_tilde: f64,
    pub c_tilde: f64,
    pub choice: ParamChoice,
    pub validated: bool,
}

impl XFilterParams {
    /// Rate constant `C2~ = 128 (sum beta2 + 3 + 1/(32 kappa~))`.
    pub fn c2_tilde(&self) -> f64 {
        128.0 * (self.beta2.sum() + 3.0 + 1.0 / (32.0 * self.kappa_tilde))
    }

    /// Communication rounds per outer iteration (filtering plus the
    /// tracking exchange).
    pub fn rounds_per_outer(&self) -> u64 {
        self.q as u64 + 1
    }
}

pub fn xfilter_params(
    problem: &ProblemInstance,
    graph: &Graph,
    choice: ParamChoice,
) -> Result<XFilterParams, AlgoError> {
    xfilter_params_with(problem, graph, choice, &ParamOverrides::default())
}

pub fn xfilter_params_with(
    problem: &ProblemInstance,
    graph: &Graph,
    choice: ParamChoice,
    overrides: &ParamOverrides,
) -> Result<XFilterParams, AlgoError> {
    let m = graph.node_count();
    let m_f = m as f64;
    let l = problem.profile.as_vector();
    if l.iter().all(|&v| v == 0.0) {
        return Err(AlgoError::ParamRule(
            "every node has a zero Lipschitz constant".into(),
        ));
    }
    let k_edge = problem.profile.edge_weights(graph);
    let degree_sum: f64 = graph.degrees().iter().map(|&d| d as f64).sum();

    let (sigma2, beta2) = match choice {
        ParamChoice::I => {
            let k = graph.degree_uniformity_k();
            // conditioning Laplacian: Upsilon = (P L)^{1/2}, edge weights K
            let upsilon_cond = DVector::from_fn(m, |i, _| (graph.degree(i) as f64 * l[i]).sqrt());
            let lap = graph
                .generalized_laplacian(&upsilon_cond, &nonzero_or_unit(&k_edge))
                .map_err(|e| AlgoError::ParamRule(e.to_string()))?;
            let lam = spectral(&lap, None)
                .map_err(|e| AlgoError::ParamRule(e.to_string()))?
                .lambda_min_nonzero;
            let sigma2 = &k_edge * (48.0 * 96.0 * k / (degree_sum * lam));
            let beta2 = DVector::from_fn(m, |i, _| {
                96.0 * k * l[i] * graph.degree(i) as f64 / degree_sum
            });
            (sigma2, beta2)
        }
        ParamChoice::II => {
            let upsilon_cond = l.map(f64::sqrt);
            let lap = graph
                .generalized_laplacian(&upsilon_cond, &nonzero_or_unit(&k_edge))
                .map_err(|e| AlgoError::ParamRule(e.to_string()))?;
            let lam = spectral(&lap, None)
                .map_err(|e| AlgoError::ParamRule(e.to_string()))?
                .lambda_min_nonzero;
            let sigma2 = &k_edge * (48.0 * 96.0 / (m_f * lam));
            let beta2 = &l * (96.0 / m_f);
            (sigma2, beta2)
        }
    };
    let sigma2 = sigma2 * overrides.sigma2_scale;
    let beta2 = beta2 * overrides.upsilon2_scale;

    build_xfilter(problem, graph, sigma2, beta2, choice, overrides)
}

/// Edge weights for the conditioning Laplacian; zero-weight edges (from
/// zero-profile padding nodes) contribute nothing either way.
fn nonzero_or_unit(k_edge: &DVector<f64>) -> DVector<f64> {
    if k_edge.iter().any(|&v| v > 0.0) {
        k_edge.clone()
    } else {
        DVector::from_element(k_edge.len(), 1.0)
    }
}

fn build_xfilter(
    problem: &ProblemInstance,
    graph: &Graph,
    sigma2: DVector<f64>,
    beta2: DVector<f64>,
    choice: ParamChoice,
    overrides: &ParamOverrides,
) -> Result<XFilterParams, AlgoError> {
    let m = graph.node_count();
    let m_f = m as f64;
    let l = problem.profile.as_vector();

    // drop zero-weight edges for the matrices call, which demands positive
    // weights; a zero weight contributes nothing to any product
    let mats = graph
        .matrices(None)
        .map_err(|e| AlgoError::ParamRule(e.to_string()))?;
    let f = &mats.scaled_incidence;
    let core = f.transpose() * DMatrix::from_diagonal(&sigma2) * f;
    let upsilon2_r = &core + DMatrix::from_diagonal(&beta2);
    let inv_beta2 = linalg::pinv_entries(&beta2);
    let r = DMatrix::from_diagonal(&inv_beta2) * &core + DMatrix::identity(m, m);

    // eigenvalues of R via the symmetric similar matrix
    let inv_beta = inv_beta2.map(f64::sqrt);
    let sym_r = DMatrix::from_diagonal(&inv_beta) * &core * DMatrix::from_diagonal(&inv_beta)
        + DMatrix::identity(m, m);
    let ev_r = linalg::sym_eigenvalues(&sym_r);
    let lambda_min_r = ev_r[0];
    let lambda_max_r = ev_r[ev_r.len() - 1];
    let xi_r = lambda_min_r / lambda_max_r;
    let tau = 2.0 / (lambda_min_r + lambda_max_r);
    let rho0 = (1.0 - xi_r) / (1.0 + xi_r);

    let ev_u2r = linalg::sym_eigenvalues(&upsilon2_r);
    let u2r_min = ev_u2r[0];
    let u2r_max = ev_u2r[ev_u2r.len() - 1];
    let beta_min = beta2.min();
    let beta_max = beta2.max();
    let theta = (u2r_min / u2r_max) * (beta_min / beta_max) * beta_min.min(1.0);
    if theta <= 0.0 {
        return Err(AlgoError::DegenerateFilter(
            "filter constants collapse to zero (zero proximal weight)".into(),
        ));
    }
    let eta = theta * theta / (4.0 + 32.0 * m_f * u2r_max.max(1.0));
    let q_rule = (-0.25 * (eta / 4.0).ln() * (1.0 / xi_r).sqrt()).ceil().max(1.0) as usize;
    let q = overrides.q_override.unwrap_or(q_rule);

    // kappa~ = 1 / min-nonzero-eig of the generalized Laplacian of the
    // final weights (equals 1/48 under both rule choices)
    let upsilon = beta2.map(f64::sqrt);
    let gl = graph
        .generalized_laplacian(&upsilon, &nonzero_or_unit(&sigma2))
        .map_err(|e| AlgoError::ParamRule(e.to_string()))?;
    // scale by actual sigma2 when some entries are zero
    let gl = if sigma2.iter().any(|&v| v == 0.0) {
        let pinv = DMatrix::from_diagonal(&linalg::pinv_entries(&upsilon));
        &pinv * &core * &pinv
    } else {
        gl
    };
    let kappa_tilde = 1.0
        / spectral(&gl, None)
            .map_err(|e| AlgoError::ParamRule(e.to_string()))?
            .lambda_min_nonzero;
    let c_tilde = 8.0 * kappa_tilde;

    // descent condition:
    // (1/4 - 3k~ - c~) U2R - (1 + 2c~) L/M - (6k~/M^2) L U^{-2} L >= 0
    let coeff = 0.25 - 3.0 * kappa_tilde - c_tilde;
    let mut cond = &upsilon2_r * coeff;
    for i in 0..m {
        cond[(i, i)] -= (1.0 + 2.0 * c_tilde) * l[i] / m_f;
        cond[(i, i)] -= 6.0 * kappa_tilde / (m_f * m_f) * l[i] * l[i] * inv_beta2[i];
    }
    let scale = u2r_max.max(1.0);
    let mut validated = linalg::min_eigenvalue(&cond) >= -1e-9 * scale;
    for i in 0..m {
        if beta2[i] + 1e-9 * scale < l[i] * l[i] * inv_beta2[i] / (m_f * m_f) {
            validated = false;
        }
    }
    if (lambda_min_r - 1.0).abs() > 1e-9 {
        validated = false;
    }
    if !validated && overrides.is_rule() {
        return Err(AlgoError::ParamRule(
            "filtering descent condition failed under the rule parameters".into(),
        ));
    }

    Ok(XFilterParams {
        sigma2,
        beta2,
        r,
        upsilon2_r,
        q,
        tau,
        rho0,
        eta,
        theta,
        xi_r,
        lambda_min_r,
        lambda_max_r,
        kappa_tilde,
        c_tilde,
        choice,
        validated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphFamily;
    use crate::problems::{LipschitzProfile, Oracle, ProblemInstance};
    use approx::assert_relative_eq;

    fn uniform_instance(m: usize, u: f64, dim: usize) -> ProblemInstance {
        let oracles = (0..m)
            .map(|_| {
                Oracle::new(dim, move |x, g| {
                    for (gk, xk) in g.iter_mut().zip(x) {
                        *gk = u * xk;
                    }
                    0.5 * u * x.iter().map(|v| v * v).sum::<f64>()
                })
            })
            .collect();
        ProblemInstance::new(
            oracles,
            LipschitzProfile::uniform(m, u),
            Some(0.0),
            "quadratic",
            serde_json::json!({}),
        )
    }

    #[test]
    fn dgpda_rule_on_complete_graph_matches_closed_forms() {
        let m = 6;
        let u = 0.8;
        let graph = Graph::generate(&GraphFamily::Complete, m, 0).unwrap();
        let inst = uniform_instance(m, u, 2);
        let p = dgpda_params(&inst, &graph).unwrap();
        assert!(p.validated);
        // uniform degrees, uniform profile: beta^2 = 80 max{U,1}/M and
        // sigma2_ij = beta^2 U / (M-1) on every edge
        let beta2 = 80.0 / m as f64;
        for s in p.sigma2.iter() {
            assert_relative_eq!(*s, beta2 * u / (m as f64 - 1.0), max_relative = 1e-10);
        }
        for (i, b) in p.beta2.iter().enumerate() {
            assert_relative_eq!(*b, beta2 * u, max_relative = 1e-10, epsilon = 1e-12);
            let _ = i;
        }
        // kappa upper bound from the spectral estimate
        let mats = graph.matrices(Some(&p.sigma2)).unwrap();
        let upsilon = p.beta2.map(f64::sqrt);
        let gl = graph.generalized_laplacian(&upsilon, &p.sigma2).unwrap();
        let gl_min = spectral(&gl, None).unwrap().lambda_min_nonzero;
        let ratio = DVector::from_fn(m, |i, _| 2.0 * mats.delta[i] / p.beta2[i] + 1.0);
        assert!(p.kappa <= ratio.max() / gl_min + 1e-9);
    }

    #[test]
    fn dgpda_rejects_zero_lipschitz_nodes() {
        let graph = Graph::generate(&GraphFamily::Path, 3, 0).unwrap();
        let oracles = (0..3).map(|_| Oracle::new(1, |_, g| { g[0] = 0.0; 0.0 })).collect();
        let inst = ProblemInstance::new(
            oracles,
            LipschitzProfile::new(vec![1.0, 0.0, 1.0]),
            Some(0.0),
            "padded",
            serde_json::json!({}),
        );
        assert!(matches!(
            dgpda_params(&inst, &graph),
            Err(AlgoError::ZeroLipschitz(1))
        ));
    }

    #[test]
    fn xfilter_kappa_is_one_over_48_for_both_choices() {
        let graph = Graph::generate(&GraphFamily::RandomGeometric { radius: 0.6 }, 9, 4).unwrap();
        let inst = uniform_instance(9, 0.5, 2);
        for choice in [ParamChoice::I, ParamChoice::II] {
            let p = xfilter_params(&inst, &graph, choice).unwrap();
            assert_relative_eq!(p.kappa_tilde, 1.0 / 48.0, max_relative = 1e-9);
            assert!(p.validated);
            assert!(p.q >= 1);
        }
    }

    #[test]
    fn xfilter_r_has_unit_minimum_eigenvalue_on_random_graphs() {
        for seed in 0..10 {
            let graph =
                Graph::generate(&GraphFamily::RandomGeometric { radius: 0.55 }, 8, seed).unwrap();
            let inst = uniform_instance(8, 0.7, 1);
            let p = xfilter_params(&inst, &graph, ParamChoice::I).unwrap();
            assert!((p.lambda_min_r - 1.0).abs() < 1e-9, "seed {}", seed);
        }
    }

    #[test]
    fn xfilter_choice_one_on_uniform_path_tracks_laplacian_gap() {
        let m = 12;
        let graph = Graph::generate(&GraphFamily::Path, m, 0).unwrap();
        let inst = uniform_instance(m, 0.5, 1);
        let p = xfilter_params(&inst, &graph, ParamChoice::I).unwrap();
        let lap_xi = spectral(&graph.normalized_laplacian(), None).unwrap().xi;
        assert!(p.xi_r >= lap_xi / 50.0 - 1e-12);
        assert!(p.xi_r >= 1.0 / (50.0 * (m * m) as f64));
    }
}
