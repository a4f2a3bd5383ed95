//! Problem families behind one value-and-gradient oracle interface.
//!
//! An instance bundles `M` per-node oracles `f_i : R^S -> R`, a profile of
//! gradient-Lipschitz constants `{L_i}`, and (when known) a lower bound on
//! the separable objective `f(x) = (1/M) sum_i f_i(x_i)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::Graph;

mod activations;
mod classification;
mod zero_chain;

pub use activations::{activation_suite, Activation};
pub use classification::{classification_instance, ClassificationData};
pub use zero_chain::{
    hard_instance, initial_gap_bound, mean_base_oracle, psi_phi, scaled_mean_oracle, HardLayout,
    NodeGroup, PSI_ONE,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("node count {0} must be a positive multiple of 3")]
    NotMultipleOfThree(usize),
    #[error("chain length must be odd and positive, got {0}")]
    EvenChainLength(usize),
    #[error("gradient-scale parameter must lie in (0, 1), got {0}")]
    BadUniformConstant(f64),
    #[error("target accuracy must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("sample counts must be at least 1 per node")]
    EmptyData,
    #[error("label {0} is not in {{-1, +1}} (line {1})")]
    BadLabel(f64, usize),
    #[error("feature dimension mismatch: expected {expected}, got {got} at line {line}")]
    DimMismatch { expected: usize, got: usize, line: usize },
    #[error("data file has {rows} rows, fewer than {nodes} nodes")]
    TooFewRows { rows: usize, nodes: usize },
    #[error("data parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph/layout mismatch: {0}")]
    Layout(String),
}

/// One node's smooth objective, evaluated as value plus gradient.
pub struct Oracle {
    dim: usize,
    func: Box<dyn Fn(&[f64], &mut [f64]) -> f64 + Send + Sync>,
}

impl Oracle {
    pub fn new(
        dim: usize,
        func: impl Fn(&[f64], &mut [f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Oracle { dim, func: Box::new(func) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value and gradient at `x`; `grad` must have length `dim`.
    pub fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(grad.len(), self.dim);
        (self.func)(x, grad)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim];
        self.value_grad(x, &mut scratch)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.value_grad(x, &mut g);
        g
    }
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle").field("dim", &self.dim).finish()
    }
}

/// Per-node gradient-Lipschitz constants with the derived aggregates.
#[derive(Debug, Clone)]
pub struct LipschitzProfile {
    per_node: Vec<f64>,
}

impl LipschitzProfile {
    pub fn new(per_node: Vec<f64>) -> Self {
        assert!(per_node.iter().all(|&l| l >= 0.0), "Lipschitz constants are nonnegative");
        LipschitzProfile { per_node }
    }

    pub fn uniform(m: usize, u: f64) -> Self {
        Self::new(vec![u; m])
    }

    pub fn per_node(&self) -> &[f64] {
        &self.per_node
    }

    pub fn l_bar(&self) -> f64 {
        self.per_node.iter().sum::<f64>() / self.per_node.len() as f64
    }

    pub fn l_max(&self) -> f64 {
        self.per_node.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn l_min(&self) -> f64 {
        self.per_node.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Smallest strictly positive constant (padded zero-function nodes are
    /// skipped).
    pub fn l_min_positive(&self) -> f64 {
        self.per_node
            .iter()
            .copied()
            .filter(|&l| l > 0.0)
            .fold(f64::MAX, f64::min)
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.per_node.clone())
    }

    /// Per-edge weights `sqrt(L_i L_j)` in the graph's canonical edge order.
    pub fn edge_weights(&self, graph: &Graph) -> DVector<f64> {
        DVector::from_iterator(
            graph.edge_count(),
            graph
                .edges()
                .iter()
                .map(|&(hi, lo)| (self.per_node[hi] * self.per_node[lo]).sqrt()),
        )
    }
}

/// A distributed problem: `M` oracles, a Lipschitz profile, and metadata.
#[derive(Debug)]
pub struct ProblemInstance {
    oracles: Vec<Oracle>,
    pub profile: LipschitzProfile,
    /// Known lower bound on `f`, when the family provides one.
    pub lower_bound: Option<f64>,
    pub family: String,
    pub metadata: serde_json::Value,
}

impl ProblemInstance {
    pub fn new(
        oracles: Vec<Oracle>,
        profile: LipschitzProfile,
        lower_bound: Option<f64>,
        family: impl Into<String>,
        metadata: serde_json::Value,
    ) -> Self {
        assert_eq!(oracles.len(), profile.per_node().len());
        assert!(!oracles.is_empty());
        let dim = oracles[0].dim();
        assert!(oracles.iter().all(|o| o.dim() == dim));
        ProblemInstance {
            oracles,
            profile,
            lower_bound,
            family: family.into(),
            metadata,
        }
    }

    pub fn node_count(&self) -> usize {
        self.oracles.len()
    }

    pub fn dim(&self) -> usize {
        self.oracles[0].dim()
    }

    pub fn oracle(&self, node: usize) -> &Oracle {
        &self.oracles[node]
    }

    /// `f(x) = (1/M) sum_i f_i(x_i)` over an `M x S` iterate block.
    pub fn objective(&self, x: &DMatrix<f64>) -> f64 {
        self.objective_and_local_gradients(x).0
    }

    /// Objective value plus the `M x S` stack of per-node gradients
    /// `grad f_i(x_i)` (not divided by `M`).
    pub fn objective_and_local_gradients(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let m = self.node_count();
        let s = self.dim();
        let mut grads = DMatrix::zeros(m, s);
        let mut total = 0.0;
        let mut xrow = vec![0.0; s];
        let mut grow = vec![0.0; s];
        for i in 0..m {
            for k in 0..s {
                xrow[k] = x[(i, k)];
            }
            total += self.oracles[i].value_grad(&xrow, &mut grow);
            for k in 0..s {
                grads[(i, k)] = grow[k];
            }
        }
        (total / m as f64, grads)
    }

    /// Per-node gradient stack at `x` (rows are `grad f_i(x_i)`).
    pub fn local_gradients(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.objective_and_local_gradients(x).1
    }

    /// Gradient stack at the zero iterate.
    pub fn gradients_at_zero(&self) -> DMatrix<f64> {
        self.local_gradients(&DMatrix::zeros(self.node_count(), self.dim()))
    }

    /// `d0^T L^{-1} d0 = sum_i ||grad f_i(0)||^2 / L_i` with the
    /// Moore-Penrose convention on zero entries.
    pub fn d0_inv_profile_norm(&self) -> f64 {
        let d0 = self.gradients_at_zero();
        let mut acc = 0.0;
        for (i, &l) in self.profile.per_node().iter().enumerate() {
            if l > 0.0 {
                acc += d0.row(i).norm_squared() / l;
            }
        }
        acc
    }

    /// Mean objective `f_bar(y) = (1/M) sum_i f_i(y)` and its gradient.
    pub fn mean_value_grad(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let m = self.node_count() as f64;
        let mut grad = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        let mut val = 0.0;
        for o in &self.oracles {
            val += o.value_grad(y, &mut scratch);
            for (g, s) in grad.iter_mut().zip(&scratch) {
                *g += s;
            }
        }
        for g in grad.iter_mut() {
            *g /= m;
        }
        (val / m, grad)
    }

    /// Replace the profile with the uniform one at `max_i L_i`; the stored
    /// constants stay valid upper bounds.
    pub fn with_uniform_profile(mut self) -> Self {
        let u = self.profile.l_max();
        self.profile = LipschitzProfile::uniform(self.node_count(), u);
        self.metadata["uniform_profile"] = serde_json::json!(u);
        self
    }

    /// Worst relative error between analytic gradients and central finite
    /// differences, over `points_per_node` random points per node.
    pub fn fd_max_rel_error(&self, points_per_node: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = self.dim();
        let mut worst: f64 = 0.0;
        let scales = [1.0, 0.1, 10.0];
        for oracle in &self.oracles {
            for p in 0..points_per_node {
                let scale = scales[p % scales.len()];
                let x: Vec<f64> = (0..s)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let g = oracle.gradient(&x);
                let mut fd = vec![0.0; s];
                let mut xp = x.clone();
                for k in 0..s {
                    let h = 1e-6 * (1.0 + x[k].abs());
                    xp[k] = x[k] + h;
                    let fplus = oracle.value(&xp);
                    xp[k] = x[k] - h;
                    let fminus = oracle.value(&xp);
                    xp[k] = x[k];
                    fd[k] = (fplus - fminus) / (2.0 * h);
                }
                let diff: f64 = g
                    .iter()
                    .zip(&fd)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                worst = worst.max(diff / gnorm.max(1.0));
            }
        }
        worst
    }

    /// Largest sampled ratio `||grad f_i(x) - grad f_i(z)|| / ||x - z||`
    /// relative to the stored `L_i` (so values <= 1 + slack certify the
    /// profile).
    pub fn sampled_lipschitz_excess(&self, pairs_per_node: usize, radius: f64, seed: u64) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, oracle) in self.oracles.iter().enumerate() {
            let li = self.profile.per_node()[i];
            if li == 0.0 {
                continue;
            }
            let est = estimate_gradient_lipschitz(oracle, pairs_per_node, radius, seed + i as u64);
            worst = worst.max(est / li);
        }
        worst
    }
}

/// Sampled lower estimate of the gradient-Lipschitz constant: the maximum of
/// `||grad f(x) - grad f(z)|| / ||x - z||` over random pairs drawn uniformly
/// from the ball of the given radius.
pub fn estimate_gradient_lipschitz(
    oracle: &Oracle,
    n_pairs: usize,
    radius: f64,
    seed: u64,
) -> f64 {
    assert!(n_pairs >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = oracle.dim();
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let dir: Vec<f64> = (0..s).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let r = radius * rng.random::<f64>().powf(1.0 / s as f64);
        dir.into_iter().map(|v| v * r / norm).collect()
    };
    let mut best: f64 = 0.0;
    for pair in 0..n_pairs {
        let x = sample(&mut rng);
        // alternate far pairs with near pairs; the near pairs probe local
        // curvature, which is where the supremum lives
        let mut z = if pair % 2 == 0 {
            sample(&mut rng)
        } else {
            let step = 1e-4 * radius;
            let dir: Vec<f64> =
                (0..s).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            x.iter().zip(&dir).map(|(a, d)| a + step * d / norm).collect()
        };
        // keep the pair separated enough for a stable quotient
        if x.iter().zip(&z).map(|(a, b)| (a - b).abs()).sum::<f64>() < 1e-12 {
            z[0] += 1e-6 * radius.max(1.0);
        }
        let gx = oracle.gradient(&x);
        let gz = oracle.gradient(&z);
        let num: f64 = gx
            .iter()
            .zip(&gz)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = x
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.max(num / den);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lipschitz_estimate_recovers_quadratic_curvature() {
        let quad = Oracle::new(3, |x, g| {
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk = *xk;
            }
            0.5 * x.iter().map(|v| v * v).sum::<f64>()
        });
        let est = estimate_gradient_lipschitz(&quad, 200, 2.0, 1);
        assert_relative_eq!(est, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn profile_aggregates_and_edge_weights() {
        let p = LipschitzProfile::new(vec![1.0, 4.0, 0.0]);
        assert_relative_eq!(p.l_bar(), 5.0 / 3.0);
        assert_relative_eq!(p.l_max(), 4.0);
        assert_relative_eq!(p.l_min(), 0.0);
        assert_relative_eq!(p.l_min_positive(), 1.0);
        let g = Graph::from_edges(3, &[(1, 0), (2, 1)]).unwrap();
        let w = p.edge_weights(&g);
        assert_relative_eq!(w[0], 2.0); // sqrt(1*4)
        assert_relative_eq!(w[1], 0.0); // sqrt(4*0)
    }

    #[test]
    fn mean_oracle_averages_node_values() {
        let inst = ProblemInstance::new(
            vec![
                Oracle::new(1, |x, g| {
                    g[0] = -2.0 * x[0];
                    -x[0] * x[0]
                }),
                Oracle::new(1, |x, g| {
                    g[0] = 2.0 * x[0];
                    x[0] * x[0]
                }),
            ],
            LipschitzProfile::uniform(2, 2.0),
            None,
            "test",
            serde_json::json!({}),
        );
        let (v, g) = inst.mean_value_grad(&[3.0]);
        assert_relative_eq!(v, 0.0, epsilon = 1e-14);
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-14);
        let x = DMatrix::from_row_slice(2, 1, &[-10.0, 10.0]);
        let stack = inst.local_gradients(&x);
        assert_relative_eq!(stack[(0, 0)], 20.0);
        assert_relative_eq!(stack[(1, 0)], 20.0);
    }
}
