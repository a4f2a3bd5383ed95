//! Worst-case instances built from a zero-chain: coordinate `k+1` of any
//! node's gradient activates only after coordinate `k` is nonzero somewhere,
//! and consecutive coordinates are owned by node groups placed at opposite
//! ends of the network, so information must traverse the graph once per
//! coordinate.
//!
//! The two scalar building blocks are a smooth gate
//! `psi(w) = 1 - exp(-w^2)` for `w > 0` (identically zero for `w <= 0`) and
//! a bounded ramp `phi(w) = 4 atan(w) + 2 pi`.

use serde_json::json;

use super::{LipschitzProfile, Oracle, ProblemError, ProblemInstance};
use crate::graph::{Graph, GraphFamily};

/// `psi(1) = 1 - e^{-1}`, the gate value that keeps the first chain link
/// active.
pub const PSI_ONE: f64 = 1.0 - std::f64::consts::E.recip();

fn psi0(w: f64) -> f64 {
    if w > 0.0 {
        -(-w * w).exp_m1()
    } else {
        0.0
    }
}

fn psi1(w: f64) -> f64 {
    if w > 0.0 {
        2.0 * w * (-w * w).exp()
    } else {
        0.0
    }
}

fn psi2(w: f64) -> f64 {
    if w > 0.0 {
        (2.0 - 4.0 * w * w) * (-w * w).exp()
    } else if w == 0.0 {
        // right limit; the left limit is 0
        2.0
    } else {
        0.0
    }
}

fn phi0(w: f64) -> f64 {
    4.0 * w.atan() + 2.0 * std::f64::consts::PI
}

fn phi1(w: f64) -> f64 {
    4.0 / (w * w + 1.0)
}

fn phi2(w: f64) -> f64 {
    let d = w * w + 1.0;
    -8.0 * w / (d * d)
}

/// The gate/ramp pair and its first two derivatives: returns
/// `(psi^(order)(w), phi^(order)(w))`.
pub fn psi_phi(w: f64, order: u8) -> (f64, f64) {
    match order {
        0 => (psi0(w), phi0(w)),
        1 => (psi1(w), phi1(w)),
        2 => (psi2(w), phi2(w)),
        _ => panic!("derivative order must be 0, 1, or 2"),
    }
}

/// Chain-link value: link 1 is `-psi(1) phi(x[1])`, link `j >= 2` couples
/// coordinates `j-1` and `j`.
fn link_value(x: &[f64], j: usize) -> f64 {
    if j == 1 {
        -PSI_ONE * phi0(x[0])
    } else {
        let a = x[j - 2];
        let b = x[j - 1];
        psi0(-a) * phi0(-b) - psi0(a) * phi0(b)
    }
}

fn link_grad(x: &[f64], j: usize, coeff: f64, grad: &mut [f64]) {
    if j == 1 {
        grad[0] += coeff * (-PSI_ONE * phi1(x[0]));
    } else {
        let a = x[j - 2];
        let b = x[j - 1];
        grad[j - 2] += coeff * (-psi1(-a) * phi0(-b) - psi1(a) * phi0(b));
        grad[j - 1] += coeff * (-psi0(-a) * phi1(-b) - psi0(a) * phi1(b));
    }
}

/// Which coordinates a node's local function can activate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeGroup {
    /// Anchor plus the even chain links `2, 4, ...`.
    EvenChain,
    /// Anchor link only.
    Anchor,
    /// Anchor plus the odd chain links `3, 5, ...`.
    OddChain,
    /// Identically zero (padding for the general-graph variant).
    Zero,
}

impl NodeGroup {
    fn tag(self) -> &'static str {
        match self {
            NodeGroup::EvenChain => "even_chain",
            NodeGroup::Anchor => "anchor",
            NodeGroup::OddChain => "odd_chain",
            NodeGroup::Zero => "zero",
        }
    }
}

/// Unscaled component value and gradient for one node group on a chain of
/// length `t`.
fn component_value_grad(group: NodeGroup, t: usize, x: &[f64], grad: &mut [f64]) -> f64 {
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    if group == NodeGroup::Zero {
        return 0.0;
    }
    let mut val = link_value(x, 1);
    link_grad(x, 1, 1.0, grad);
    let links: &mut dyn Iterator<Item = usize> = match group {
        NodeGroup::EvenChain => &mut (1..=t / 2).map(|j| 2 * j),
        NodeGroup::OddChain => &mut (1..=t / 2).map(|j| 2 * j + 1),
        _ => &mut std::iter::empty(),
    };
    for j in links {
        val += 3.0 * link_value(x, j);
        link_grad(x, j, 3.0, grad);
    }
    val
}

/// Mean of the unscaled components over a full three-group split: the
/// anchor link plus every chain link once.
pub fn mean_base_oracle(t: usize) -> Oracle {
    Oracle::new(t, move |x, grad| {
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        let mut val = link_value(x, 1);
        link_grad(x, 1, 1.0, grad);
        for j in 2..=t {
            val += link_value(x, j);
            link_grad(x, j, 1.0, grad);
        }
        val
    })
}

/// The scaled mean objective `f_bar` of a full three-group instance, as a
/// single oracle (used to certify its gradient-Lipschitz constant).
pub fn scaled_mean_oracle(t: usize, u: f64, eps: f64) -> Oracle {
    let outer = 150.0 * std::f64::consts::PI * eps / u;
    let inner = u / (75.0 * std::f64::consts::PI * (2.0 * eps).sqrt());
    let base = mean_base_oracle(t);
    Oracle::new(t, move |x, grad| {
        let y: Vec<f64> = x.iter().map(|v| v * inner).collect();
        let val = base.value_grad(&y, grad);
        for g in grad.iter_mut() {
            *g *= outer * inner;
        }
        outer * val
    })
}

/// Network layout for [`hard_instance`].
#[derive(Debug, Clone)]
pub enum HardLayout {
    /// Path graph on `M` nodes; groups are the first/middle/last thirds.
    Path,
    /// Path-star graph with the given diameter; groups follow path position.
    PathStar { diameter: usize },
    /// Any connected graph: groups are placed along a diametral path, all
    /// other nodes get the zero function (their `L_i` is zero).
    GeneralGraph(Graph),
}

/// Structural lower bound on the unscaled component: the anchor link is at
/// least `-4 pi` and each of the `floor(t/2)` weighted chain links at least
/// `-12 pi`.
fn component_lower_bound(group: NodeGroup, t: usize) -> f64 {
    use std::f64::consts::PI;
    match group {
        NodeGroup::Zero => 0.0,
        NodeGroup::Anchor => -4.0 * PI,
        NodeGroup::EvenChain | NodeGroup::OddChain => -4.0 * PI * (1.0 + 3.0 * (t / 2) as f64),
    }
}

/// Build a zero-chain instance: a graph plus per-node oracles
/// `f_i(x) = (150 pi eps / u) h_i(x u / (75 pi sqrt(2 eps)))` whose
/// gradients are `u`-Lipschitz and which force at least one graph traversal
/// per activated coordinate.
///
/// `t` is the chain length (odd), `u` the uniform gradient-Lipschitz target
/// in `(0, 1)`, `eps` the accuracy the bound is stated at.
pub fn hard_instance(
    m: usize,
    t: usize,
    u: f64,
    eps: f64,
    layout: HardLayout,
) -> Result<(Graph, ProblemInstance), ProblemError> {
    if t % 2 == 0 || t == 0 {
        return Err(ProblemError::EvenChainLength(t));
    }
    if !(0.0 < u && u < 1.0) {
        return Err(ProblemError::BadUniformConstant(u));
    }
    if eps <= 0.0 {
        return Err(ProblemError::BadEpsilon(eps));
    }

    let (graph, groups, scales): (Graph, Vec<NodeGroup>, Vec<f64>) = match layout {
        HardLayout::Path => {
            if m == 0 || m % 3 != 0 {
                return Err(ProblemError::NotMultipleOfThree(m));
            }
            let graph = Graph::generate(&GraphFamily::Path, m, 0)
                .map_err(|e| ProblemError::Layout(e.to_string()))?;
            let third = m / 3;
            let groups = (0..m)
                .map(|i| {
                    if i < third {
                        NodeGroup::EvenChain
                    } else if i < 2 * third {
                        NodeGroup::Anchor
                    } else {
                        NodeGroup::OddChain
                    }
                })
                .collect();
            (graph, groups, vec![1.0; m])
        }
        HardLayout::PathStar { diameter } => {
            if m == 0 || m % 3 != 0 {
                return Err(ProblemError::NotMultipleOfThree(m));
            }
            let graph = Graph::generate(&GraphFamily::PathStar { diameter }, m, 0)
                .map_err(|e| ProblemError::Layout(e.to_string()))?;
            // order nodes by the path position of their hub; hubs are the
            // first `diameter - 1` node ids, in path order, and each leaf's
            // single neighbor is its hub
            let hubs = diameter - 1;
            let position = |node: usize| -> usize {
                if node < hubs {
                    node
                } else {
                    graph.neighbors(node)[0]
                }
            };
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by_key(|&n| (position(n), n));
            let third = m / 3;
            let mut groups = vec![NodeGroup::Anchor; m];
            for (rank, &node) in order.iter().enumerate() {
                groups[node] = if rank < third {
                    NodeGroup::EvenChain
                } else if rank < 2 * third {
                    NodeGroup::Anchor
                } else {
                    NodeGroup::OddChain
                };
            }
            (graph, groups, vec![1.0; m])
        }
        HardLayout::GeneralGraph(graph) => {
            let m = graph.node_count();
            let path = graph.diametral_path();
            let p = path.len();
            let third = p / 3;
            if third == 0 {
                return Err(ProblemError::Layout(format!(
                    "diametral path has only {} nodes; need at least 3",
                    p
                )));
            }
            let mut groups = vec![NodeGroup::Zero; m];
            for (rank, &node) in path.iter().enumerate() {
                groups[node] = if rank < third {
                    NodeGroup::EvenChain
                } else if rank >= p - third {
                    NodeGroup::OddChain
                } else {
                    NodeGroup::Anchor
                };
            }
            let scale = m as f64 / p as f64;
            let scales = groups
                .iter()
                .map(|g| if *g == NodeGroup::Zero { 0.0 } else { scale })
                .collect();
            (graph, groups, scales)
        }
    };

    let m = graph.node_count();
    let outer = 150.0 * std::f64::consts::PI * eps / u;
    let inner = u / (75.0 * std::f64::consts::PI * (2.0 * eps).sqrt());

    let mut oracles = Vec::with_capacity(m);
    let mut profile = Vec::with_capacity(m);
    let mut lower = 0.0;
    for i in 0..m {
        let group = groups[i];
        let scale = scales[i];
        let coeff = outer * scale;
        oracles.push(Oracle::new(t, move |x, grad| {
            let y: Vec<f64> = x.iter().map(|v| v * inner).collect();
            let val = component_value_grad(group, t, &y, grad);
            for g in grad.iter_mut() {
                *g *= coeff * inner;
            }
            coeff * val
        }));
        profile.push(u * scale);
        lower += coeff * component_lower_bound(group, t) / m as f64;
    }

    let min_gap = group_distance(&graph, &groups);
    let metadata = json!({
        "family": "zero_chain",
        "chain_length": t,
        "uniform_l": u,
        "eps": eps,
        "layout": graph.kind(),
        "groups": groups.iter().map(|g| g.tag()).collect::<Vec<_>>(),
        "scales": scales,
        "even_to_odd_distance": min_gap,
    });
    let profile = LipschitzProfile::new(profile);
    let instance = ProblemInstance::new(oracles, profile, Some(lower), "zero_chain", metadata);
    Ok((graph, instance))
}

/// Minimum graph distance between the even-chain and odd-chain groups.
fn group_distance(graph: &Graph, groups: &[NodeGroup]) -> usize {
    let mut best = usize::MAX;
    for (i, g) in groups.iter().enumerate() {
        if *g != NodeGroup::EvenChain {
            continue;
        }
        let dist = graph.bfs_distances(i);
        for (j, h) in groups.iter().enumerate() {
            if *h == NodeGroup::OddChain {
                best = best.min(dist[j]);
            }
        }
    }
    best
}

/// Theorem-side quantity `f(0) - inf f + ||d0||^2 / (M u)` computed from the
/// structural bounds of the construction (used by the bound calculators).
pub fn initial_gap_bound(instance: &ProblemInstance, u: f64) -> f64 {
    let m = instance.node_count();
    let zero = nalgebra::DMatrix::zeros(m, instance.dim());
    let f0 = instance.objective(&zero);
    let d0 = instance.gradients_at_zero();
    let d0n: f64 = d0
        .row_iter()
        .map(|r| r.norm_squared())
        .sum::<f64>();
    let inf = instance.lower_bound.unwrap_or(f0);
    f0 - inf + d0n / (m as f64 * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn gate_and_ramp_values_at_zero_and_one() {
        let (p0, f0) = psi_phi(0.0, 0);
        assert_relative_eq!(p0, 0.0);
        assert_relative_eq!(f0, 2.0 * PI);
        let (p1, f1) = psi_phi(0.0, 1);
        assert_relative_eq!(p1, 0.0);
        assert_relative_eq!(f1, 4.0);
        // psi(1) * phi'(1) = 2 (1 - e^{-1}) > 1
        let key = psi_phi(1.0, 0).0 * psi_phi(1.0, 1).1;
        assert_relative_eq!(key, 2.0 * PSI_ONE, epsilon = 1e-14);
        assert!(key > 1.0);
        assert_relative_eq!(key, 1.264241117657115, epsilon = 1e-12);
        // everything vanishes left of the origin
        for w in [-2.0, -0.5, -1e-9] {
            assert_eq!(psi_phi(w, 0).0, 0.0);
            assert_eq!(psi_phi(w, 1).0, 0.0);
            assert_eq!(psi_phi(w, 2).0, 0.0);
        }
        // second derivative of the gate takes its right limit at 0
        assert_relative_eq!(psi_phi(0.0, 2).0, 2.0);
    }

    #[test]
    fn gate_and_ramp_sampled_bounds() {
        // 1e5 sampled points across scales
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100_000 {
            let w = (rng.random::<f64>() - 0.5) * 20.0;
            let (p0, f0) = psi_phi(w, 0);
            let (p1, f1) = psi_phi(w, 1);
            let (p2, f2) = psi_phi(w, 2);
            // mathematically psi < 1; in doubles it saturates to 1 once
            // exp(-w^2) underflows past the last bit, so allow equality there
            assert!((0.0..=1.0).contains(&p0));
            if w.abs() <= 5.0 {
                assert!(p0 < 1.0);
            }
            assert!((0.0..=(2.0f64 / std::f64::consts::E).sqrt() + 1e-12).contains(&p1));
            assert!(p2 <= 2.0 && p2 >= -4.0 * (-1.5f64).exp());
            assert!(f0 > 0.0 && f0 < 4.0 * PI);
            assert!(f1 > 0.0 && f1 <= 4.0);
            assert!(f2.abs() <= 3.0 * 3.0f64.sqrt() / 2.0 + 1e-12);
        }
        // gate * ramp-slope exceeds 1 on the whole key region
        for wi in 0..=90 {
            let w = 1.0 + 0.1 * wi as f64;
            for vi in 0..=40 {
                let v = -1.0 + 0.05 * vi as f64;
                if v.abs() < 1.0 {
                    assert!(psi_phi(w, 0).0 * psi_phi(v, 1).1 > 1.0, "w={} v={}", w, v);
                }
            }
        }
    }

    #[test]
    fn component_values_at_zero() {
        let t = 5;
        let x = vec![0.0; t];
        let mut grad = vec![0.0; t];
        for group in [NodeGroup::EvenChain, NodeGroup::Anchor, NodeGroup::OddChain] {
            let v = component_value_grad(group, t, &x, &mut grad);
            // only the anchor link survives at the origin
            assert_relative_eq!(v, -2.0 * PI * PSI_ONE, epsilon = 1e-14);
            assert_relative_eq!(grad[0], -4.0 * PSI_ONE, epsilon = 1e-14);
            assert!(grad[1..].iter().all(|&g| g == 0.0));
        }
        // chain links vanish identically at the origin
        for j in 2..=t {
            assert_eq!(link_value(&x, j), 0.0);
        }
    }

    #[test]
    fn component_gradients_match_finite_differences() {
        let t = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for group in [NodeGroup::EvenChain, NodeGroup::Anchor, NodeGroup::OddChain] {
            for _ in 0..30 {
                let x: Vec<f64> = (0..t).map(|_| (rng.random::<f64>() - 0.5) * 4.0).collect();
                let mut grad = vec![0.0; t];
                component_value_grad(group, t, &x, &mut grad);
                for k in 0..t {
                    let h = 1e-6;
                    let mut xp = x.clone();
                    xp[k] += h;
                    let fp = component_value_grad(group, t, &xp, &mut vec![0.0; t]);
                    xp[k] -= 2.0 * h;
                    let fm = component_value_grad(group, t, &xp, &mut vec![0.0; t]);
                    let fd = (fp - fm) / (2.0 * h);
                    assert!(
                        (grad[k] - fd).abs() <= 1e-5 * (1.0 + grad[k].abs()),
                        "group {:?} coord {}: {} vs {}",
                        group,
                        k,
                        grad[k],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn path_instance_d0_norm_closed_form() {
        let (graph, inst) = hard_instance(9, 5, 0.5, 0.1, HardLayout::Path).unwrap();
        assert_eq!(graph.diameter(), 8);
        let d0 = inst.gradients_at_zero();
        let norm_sq: f64 = d0.row_iter().map(|r| r.norm_squared()).sum();
        let expected = 32.0 * 0.1 * PSI_ONE * PSI_ONE;
        assert_relative_eq!(norm_sq / 9.0, expected, max_relative = 1e-10);
        // gradient magnitude of the first coordinate at the origin
        let per_node = (2.0f64 * 0.1).sqrt() * 4.0 * PSI_ONE;
        assert_relative_eq!(d0[(0, 0)].abs(), per_node, max_relative = 1e-12);
    }

    #[test]
    fn sampled_minimum_respects_structural_bound() {
        // Lemma-style consistency: min over 1e6 random points >= h(0) - 10 pi T
        let t = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut grad = vec![0.0; t];
        let zero_val = component_value_grad(NodeGroup::EvenChain, t, &vec![0.0; t], &mut grad);
        let floor = zero_val - 10.0 * PI * t as f64;
        for group in [NodeGroup::EvenChain, NodeGroup::Anchor, NodeGroup::OddChain] {
            let mut min_seen = f64::MAX;
            for _ in 0..1_000_000 {
                let x: Vec<f64> = (0..t).map(|_| (rng.random::<f64>() - 0.5) * 8.0).collect();
                min_seen = min_seen.min(component_value_grad(group, t, &x, &mut grad));
            }
            assert!(min_seen >= floor, "group {:?}: {} < {}", group, min_seen, floor);
            assert!(min_seen >= component_lower_bound(group, t));
        }
    }

    #[test]
    fn instance_rejects_bad_parameters() {
        assert!(matches!(
            hard_instance(8, 5, 0.5, 0.1, HardLayout::Path),
            Err(ProblemError::NotMultipleOfThree(8))
        ));
        assert!(matches!(
            hard_instance(9, 4, 0.5, 0.1, HardLayout::Path),
            Err(ProblemError::EvenChainLength(4))
        ));
        assert!(matches!(
            hard_instance(9, 5, 1.5, 0.1, HardLayout::Path),
            Err(ProblemError::BadUniformConstant(_))
        ));
    }

    #[test]
    fn general_graph_layout_pads_off_path_nodes() {
        let g = Graph::generate(&GraphFamily::Star, 7, 0).unwrap();
        let (graph, inst) = hard_instance(7, 3, 0.5, 0.1, HardLayout::GeneralGraph(g)).unwrap();
        // star diametral path has 3 nodes: leaf-hub-leaf
        let zeros = inst
            .profile
            .per_node()
            .iter()
            .filter(|&&l| l == 0.0)
            .count();
        assert_eq!(zeros, graph.node_count() - 3);
        // zero-profile nodes really have zero oracles
        let idx = inst.profile.per_node().iter().position(|&l| l == 0.0).unwrap();
        let x = vec![1.0, -2.0, 0.5];
        assert_eq!(inst.oracle(idx).value(&x), 0.0);
        assert!(inst.oracle(idx).gradient(&x).iter().all(|&g| g == 0.0));
        // on-path nodes carry the M/p-scaled constant
        let on_path = inst.profile.per_node().iter().find(|&&l| l > 0.0).unwrap();
        assert_relative_eq!(*on_path, 0.5 * 7.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn path_star_groups_are_separated() {
        let (graph, inst) = hard_instance(12, 5, 0.5, 0.1, HardLayout::PathStar { diameter: 7 }).unwrap();
        assert_eq!(graph.diameter(), 7);
        let gap = inst.metadata["even_to_odd_distance"].as_u64().unwrap();
        assert!(gap >= 2, "groups must be separated, got distance {}", gap);
    }

    #[test]
    fn instance_gradients_pass_fd_check() {
        let (_, inst) = hard_instance(6, 3, 0.5, 0.1, HardLayout::Path).unwrap();
        assert!(inst.fd_max_rel_error(20, 5) <= 1e-5);
    }
}
