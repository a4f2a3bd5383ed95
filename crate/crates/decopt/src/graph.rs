//! Undirected unweighted graphs with the degree-scaled incidence machinery
//! every parameter rule and bound in this crate is built on.
//!
//! Edges are stored in canonical orientation `(hi, lo)` with `hi > lo`
//! (0-based node ids), sorted lexicographically, so matrix layouts are
//! deterministic across runs. The incidence matrix carries entries
//! `+1/sqrt(d_hi)` and `-1/sqrt(d_lo)`; the scaled incidence `F = A P^{1/2}`
//! therefore has `+1/-1` entries and `F 1 = 0`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph must have at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node id {0} out of range for {1} nodes")]
    NodeOutOfRange(usize, usize),
    #[error("grid graph needs a square node count, got {0}")]
    NonSquareGrid(usize),
    #[error("path-star diameter {d} invalid for {m} nodes (need 2 <= d <= m-1)")]
    BadPathStarDiameter { d: usize, m: usize },
    #[error("random geometric graph stayed disconnected after {0} placements; increase the radius")]
    GeometricDisconnected(usize),
    #[error("geometric radius must lie in (0, 1), got {0}")]
    BadRadius(f64),
    #[error("edge weights must be positive, got {0} at edge {1}")]
    BadEdgeWeight(f64, usize),
    #[error("degenerate spectrum: all eigenvalues below the zero threshold")]
    DegenerateSpectrum,
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("edge list parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Graph families understood by [`Graph::generate`].
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFamily {
    Path,
    Cycle,
    Star,
    Complete,
    Grid,
    RandomGeometric { radius: f64 },
    PathStar { diameter: usize },
}

impl GraphFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            GraphFamily::Path => "path",
            GraphFamily::Cycle => "cycle",
            GraphFamily::Star => "star",
            GraphFamily::Complete => "complete",
            GraphFamily::Grid => "grid",
            GraphFamily::RandomGeometric { .. } => "random_geometric",
            GraphFamily::PathStar { .. } => "path_star",
        }
    }
}

/// Connected undirected unweighted graph with canonical edge ordering.
#[derive(Debug, Clone)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    diameter: usize,
    neighbors: Vec<Vec<usize>>,
    kind: String,
}

impl Graph {
    /// Build and validate a graph from an edge list. Edges may be given in
    /// either orientation; they are canonicalized to `(hi, lo)` and sorted.
    pub fn from_edges(
        node_count: usize,
        raw_edges: &[(usize, usize)],
    ) -> Result<Graph, GraphError> {
        if node_count < 2 {
            return Err(GraphError::TooSmall(node_count));
        }
        let mut edges = Vec::with_capacity(raw_edges.len());
        for &(a, b) in raw_edges {
            if a >= node_count {
                return Err(GraphError::NodeOutOfRange(a, node_count));
            }
            if b >= node_count {
                return Err(GraphError::NodeOutOfRange(b, node_count));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            edges.push((a.max(b), a.min(b)));
        }
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        let mut neighbors = vec![Vec::new(); node_count];
        for &(hi, lo) in &edges {
            neighbors[hi].push(lo);
            neighbors[lo].push(hi);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        let degrees: Vec<usize> = neighbors.iter().map(|n| n.len()).collect();
        if degrees.iter().any(|&d| d == 0) {
            return Err(GraphError::Disconnected);
        }
        let diameter = diameter_of(node_count, &neighbors)?;
        Ok(Graph {
            node_count,
            edges,
            degrees,
            diameter,
            neighbors,
            kind: "from_edge_list".into(),
        })
    }

    /// Generate a graph of the requested family.
    ///
    /// `seed` only matters for the random geometric family; placements are
    /// retried (same stream) up to 100 times until connected.
    pub fn generate(family: &GraphFamily, m: usize, seed: u64) -> Result<Graph, GraphError> {
        if m < 2 {
            return Err(GraphError::TooSmall(m));
        }
        let (edges, tag): (Vec<(usize, usize)>, &str) = match family {
            GraphFamily::Path => ((1..m).map(|i| (i, i - 1)).collect(), "path"),
            GraphFamily::Cycle => {
                let mut e: Vec<(usize, usize)> = (1..m).map(|i| (i, i - 1)).collect();
                e.push((m - 1, 0));
                (e, "cycle")
            }
            GraphFamily::Star => ((1..m).map(|i| (i, 0)).collect(), "star"),
            GraphFamily::Complete => {
                let mut e = Vec::with_capacity(m * (m - 1) / 2);
                for i in 1..m {
                    for j in 0..i {
                        e.push((i, j));
                    }
                }
                (e, "complete")
            }
            GraphFamily::Grid => {
                let side = (m as f64).sqrt().round() as usize;
                if side * side != m {
                    return Err(GraphError::NonSquareGrid(m));
                }
                let mut e = Vec::new();
                for r in 0..side {
                    for c in 0..side {
                        let v = r * side + c;
                        if c + 1 < side {
                            e.push((v + 1, v));
                        }
                        if r + 1 < side {
                            e.push((v + side, v));
                        }
                    }
                }
                (e, "grid")
            }
            GraphFamily::RandomGeometric { radius } => {
                return random_geometric(m, *radius, seed);
            }
            GraphFamily::PathStar { diameter } => {
                return path_star(m, *diameter);
            }
        };
        let mut g = Graph::from_edges(m, &edges)?;
        g.kind = tag.into();
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list: `(hi, lo)` pairs, `hi > lo`, lexicographic.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node]
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn average_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.node_count as f64
    }

    /// Smallest `k` with `k P >= d_bar I`, i.e. `d_bar / min_i d_i`.
    pub fn degree_uniformity_k(&self) -> f64 {
        let dmin = *self.degrees.iter().min().expect("nonempty") as f64;
        self.average_degree() / dmin
    }

    /// BFS distances from `src` to every node.
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        bfs(self.node_count, &self.neighbors, src)
            .into_iter()
            .map(|d| d.expect("graph is connected"))
            .collect()
    }

    /// A shortest path realizing the diameter (node ids, endpoints included).
    pub fn diametral_path(&self) -> Vec<usize> {
        let mut best = (0, 0, 0usize);
        for s in 0..self.node_count {
            let dist = self.bfs_distances(s);
            for (t, &d) in dist.iter().enumerate() {
                if d > best.2 {
                    best = (s, t, d);
                }
            }
        }
        // walk back from t to s using distance labels
        let (s, t, _) = best;
        let dist = self.bfs_distances(s);
        let mut path = vec![t];
        let mut cur = t;
        while cur != s {
            let prev = *self.neighbors[cur]
                .iter()
                .find(|&&n| dist[n] + 1 == dist[cur])
                .expect("bfs predecessor exists");
            path.push(prev);
            cur = prev;
        }
        path.reverse();
        path
    }

    /// Assemble the incidence machinery, optionally with per-edge weights
    /// `sigma2` (defaults to all ones).
    pub fn matrices(&self, sigma2: Option<&DVector<f64>>) -> Result<GraphMatrices, GraphError> {
        let e = self.edge_count();
        let m = self.node_count;
        let weights = match sigma2 {
            Some(w) => {
                for (idx, &v) in w.iter().enumerate() {
                    if v <= 0.0 {
                        return Err(GraphError::BadEdgeWeight(v, idx));
                    }
                }
                w.clone()
            }
            None => DVector::from_element(e, 1.0),
        };
        let mut incidence = DMatrix::zeros(e, m);
        let mut scaled = DMatrix::zeros(e, m);
        for (row, &(hi, lo)) in self.edges.iter().enumerate() {
            incidence[(row, hi)] = 1.0 / (self.degrees[hi] as f64).sqrt();
            incidence[(row, lo)] = -1.0 / (self.degrees[lo] as f64).sqrt();
            scaled[(row, hi)] = 1.0;
            scaled[(row, lo)] = -1.0;
        }
        let abs_scaled = scaled.map(f64::abs);
        let degree = DVector::from_iterator(m, self.degrees.iter().map(|&d| d as f64));
        let mut delta = DVector::zeros(m);
        for (row, &(hi, lo)) in self.edges.iter().enumerate() {
            delta[hi] += weights[row];
            delta[lo] += weights[row];
        }
        Ok(GraphMatrices {
            incidence,
            scaled_incidence: scaled,
            abs_scaled_incidence: abs_scaled,
            degree,
            delta,
            edge_weights: weights,
        })
    }

    /// The degree-normalized Laplacian `A^T A`.
    pub fn normalized_laplacian(&self) -> DMatrix<f64> {
        let mats = self.matrices(None).expect("unit weights are valid");
        mats.incidence.transpose() * &mats.incidence
    }

    /// The unnormalized Laplacian `F^T F = P^{1/2} (A^T A) P^{1/2}`.
    pub fn unnormalized_laplacian(&self) -> DMatrix<f64> {
        let mats = self.matrices(None).expect("unit weights are valid");
        mats.scaled_incidence.transpose() * &mats.scaled_incidence
    }

    /// Generalized Laplacian `Upsilon^{-1} F^T Sigma^2 F Upsilon^{-1}` with
    /// Moore-Penrose convention on zero diagonal entries of `Upsilon`.
    pub fn generalized_laplacian(
        &self,
        upsilon: &DVector<f64>,
        sigma2: &DVector<f64>,
    ) -> Result<DMatrix<f64>, GraphError> {
        let mats = self.matrices(Some(sigma2))?;
        let f = &mats.scaled_incidence;
        let core = f.transpose() * DMatrix::from_diagonal(sigma2) * f;
        let pinv = DMatrix::from_diagonal(&linalg::pinv_entries(upsilon));
        Ok(&pinv * core * &pinv)
    }

    /// Serialize to the edge-list text format: `M E` header then one
    /// 1-based `i j` pair per line with `i > j`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.node_count, self.edge_count());
        for &(hi, lo) in &self.edges {
            let _ = writeln!(out, "{} {}", hi + 1, lo + 1);
        }
        out
    }

    /// Parse the edge-list text format. Lines starting with `#` are comments.
    pub fn from_edge_list(text: &str) -> Result<Graph, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(GraphError::Parse {
            line: 0,
            msg: "empty edge list".into(),
        })?;
        let mut it = header.split_whitespace();
        let m: usize = parse_field(it.next(), hline, "node count")?;
        let e: usize = parse_field(it.next(), hline, "edge count")?;
        let mut edges = Vec::with_capacity(e);
        for (ln, l) in lines {
            let mut it = l.split_whitespace();
            let i: usize = parse_field(it.next(), ln, "edge endpoint")?;
            let j: usize = parse_field(it.next(), ln, "edge endpoint")?;
            if i <= j {
                return Err(GraphError::Parse {
                    line: ln,
                    msg: format!("edges must satisfy i > j, got {} {}", i, j),
                });
            }
            if i < 1 || j < 1 {
                return Err(GraphError::Parse {
                    line: ln,
                    msg: "node ids are 1-based".into(),
                });
            }
            edges.push((i - 1, j - 1));
        }
        if edges.len() != e {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!("header promised {} edges, found {}", e, edges.len()),
            });
        }
        Graph::from_edges(m, &edges)
    }
}

fn parse_field<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, GraphError> {
    tok.ok_or(GraphError::Parse {
        line,
        msg: format!("missing {}", what),
    })?
    .parse()
    .map_err(|_| GraphError::Parse {
        line,
        msg: format!("bad {}", what),
    })
}

/// Incidence/Laplacian building blocks for one graph.
///
/// `scaled_incidence` is `F = A P^{1/2}` with entries in `{+1, -1, 0}`;
/// `abs_scaled_incidence` is its entrywise absolute value;
/// `delta[i] = sum_{j ~ i} sigma2_ij`.
#[derive(Debug, Clone)]
pub struct GraphMatrices {
    pub incidence: DMatrix<f64>,
    pub scaled_incidence: DMatrix<f64>,
    pub abs_scaled_incidence: DMatrix<f64>,
    pub degree: DVector<f64>,
    pub delta: DVector<f64>,
    pub edge_weights: DVector<f64>,
}

/// Extremal eigenvalue summary of a symmetric PSD matrix.
#[derive(Debug, Clone, Copy)]
pub struct SpectralSummary {
    pub lambda_max: f64,
    pub lambda_min_nonzero: f64,
    /// Ratio `lambda_min_nonzero / lambda_max`, in `(0, 1]`.
    pub xi: f64,
}

/// Extremal-eigenvalue summary with eigenvalues below
/// `zero_tol` (default `1e-9 * lambda_max`) treated as structural zeros.
pub fn spectral(m: &DMatrix<f64>, zero_tol: Option<f64>) -> Result<SpectralSummary, GraphError> {
    let asym = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(1.0);
    if asym > 1e-10 * scale {
        return Err(GraphError::NotSymmetric(asym));
    }
    let ev = linalg::sym_eigenvalues(m);
    let lambda_max = ev[ev.len() - 1];
    let tol = zero_tol.unwrap_or(1e-9 * lambda_max.abs().max(f64::MIN_POSITIVE));
    let lambda_min_nonzero = ev
        .iter()
        .copied()
        .find(|&v| v > tol)
        .ok_or(GraphError::DegenerateSpectrum)?;
    Ok(SpectralSummary {
        lambda_max,
        lambda_min_nonzero,
        xi: lambda_min_nonzero / lambda_max,
    })
}

fn bfs(n: usize, neighbors: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; n];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].unwrap();
        for &w in &neighbors[v] {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

fn diameter_of(n: usize, neighbors: &[Vec<usize>]) -> Result<usize, GraphError> {
    let mut diameter = 0;
    for s in 0..n {
        let dist = bfs(n, neighbors, s);
        for d in &dist {
            match d {
                None => return Err(GraphError::Disconnected),
                Some(d) => diameter = diameter.max(*d),
            }
        }
    }
    Ok(diameter)
}

fn random_geometric(m: usize, radius: f64, seed: u64) -> Result<Graph, GraphError> {
    if !(0.0..1.0).contains(&radius) || radius <= 0.0 {
        return Err(GraphError::BadRadius(radius));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const MAX_PLACEMENTS: usize = 100;
    for _ in 0..MAX_PLACEMENTS {
        let pts: Vec<(f64, f64)> = (0..m)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut edges = Vec::new();
        for i in 1..m {
            for j in 0..i {
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                if (dx * dx + dy * dy).sqrt() < radius {
                    edges.push((i, j));
                }
            }
        }
        match Graph::from_edges(m, &edges) {
            Ok(mut g) => {
                g.kind = "random_geometric".into();
                return Ok(g);
            }
            Err(GraphError::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(GraphError::GeometricDisconnected(MAX_PLACEMENTS))
}

/// Path of `d - 1` hub nodes with the remaining nodes attached as star
/// groups, sized as evenly as possible; the first and last hubs always get
/// at least one leaf so the diameter is exactly `d`.
fn path_star(m: usize, d: usize) -> Result<Graph, GraphError> {
    if d < 2 || d > m - 1 {
        return Err(GraphError::BadPathStarDiameter { d, m });
    }
    let hubs = d - 1;
    let spare = m - hubs;
    debug_assert!(spare >= 2);
    let mut group_sizes = vec![spare / hubs; hubs];
    let mut rem = spare - group_sizes.iter().sum::<usize>();
    // ends first so the extreme hubs always carry a leaf
    let mut order: Vec<usize> = Vec::with_capacity(hubs);
    order.push(0);
    if hubs > 1 {
        order.push(hubs - 1);
    }
    order.extend(1..hubs.saturating_sub(1));
    let mut idx = 0;
    while rem > 0 {
        group_sizes[order[idx % order.len()]] += 1;
        rem -= 1;
        idx += 1;
    }
    if group_sizes[0] == 0 || group_sizes[hubs - 1] == 0 {
        // steal from the largest group for an empty end
        for end in [0, hubs - 1] {
            if group_sizes[end] == 0 {
                let (big, _) = group_sizes
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, &s)| s)
                    .unwrap();
                group_sizes[big] -= 1;
                group_sizes[end] += 1;
            }
        }
    }
    // hubs are nodes 0..hubs in path order; leaves follow
    let mut edges: Vec<(usize, usize)> = (1..hubs).map(|i| (i, i - 1)).collect();
    let mut next = hubs;
    for (hub, &size) in group_sizes.iter().enumerate() {
        for _ in 0..size {
            edges.push((next, hub));
            next += 1;
        }
    }
    debug_assert_eq!(next, m);
    let mut g = Graph::from_edges(m, &edges)?;
    debug_assert_eq!(g.diameter(), d);
    g.kind = "path_star".into();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent BFS oracle used by the generator tests: plain
    /// adjacency-matrix breadth-first search, no shared code with `Graph`.
    fn bfs_diameter_oracle(m: usize, edges: &[(usize, usize)]) -> usize {
        let mut adj = vec![vec![false; m]; m];
        for &(a, b) in edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        let mut diam = 0;
        for s in 0..m {
            let mut dist = vec![usize::MAX; m];
            dist[s] = 0;
            let mut frontier = vec![s];
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for &v in &frontier {
                    for w in 0..m {
                        if adj[v][w] && dist[w] == usize::MAX {
                            dist[w] = dist[v] + 1;
                            next.push(w);
                        }
                    }
                }
                frontier = next;
            }
            diam = diam.max(*dist.iter().max().unwrap());
        }
        diam
    }

    #[test]
    fn complete_graph_m4_has_6_edges_diameter_1() {
        let g = Graph::generate(&GraphFamily::Complete, 4, 0).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g.diameter(), 1);
    }

    #[test]
    fn path_graph_m5_has_4_edges_diameter_4() {
        let g = Graph::generate(&GraphFamily::Path, 5, 0).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.diameter(), 4);
    }

    #[test]
    fn path_star_m10_d4_has_bfs_diameter_4() {
        let g = Graph::generate(&GraphFamily::PathStar { diameter: 4 }, 10, 0).unwrap();
        assert_eq!(bfs_diameter_oracle(10, g.edges()), 4);
        assert_eq!(g.diameter(), 4);
    }

    #[test]
    fn path_star_extreme_diameters() {
        for (m, d) in [(10, 9), (10, 2), (12, 7), (9, 5)] {
            let g = Graph::generate(&GraphFamily::PathStar { diameter: d }, m, 0).unwrap();
            assert_eq!(bfs_diameter_oracle(m, g.edges()), d, "m={} d={}", m, d);
        }
        assert!(Graph::generate(&GraphFamily::PathStar { diameter: 10 }, 10, 0).is_err());
        assert!(Graph::generate(&GraphFamily::Grid, 12, 0).is_err());
    }

    #[test]
    fn two_node_graph_incidence_is_signed_unit() {
        let g = Graph::from_edges(2, &[(1, 0)]).unwrap();
        let mats = g.matrices(None).unwrap();
        assert_relative_eq!(mats.incidence[(0, 1)], 1.0);
        assert_relative_eq!(mats.incidence[(0, 0)], -1.0);
        assert_relative_eq!(mats.scaled_incidence[(0, 1)], 1.0);
        assert_relative_eq!(mats.scaled_incidence[(0, 0)], -1.0);
        let ones = DVector::from_element(2, 1.0);
        assert!((&mats.scaled_incidence * ones).abs().max() == 0.0);
    }

    #[test]
    fn path_m3_half_sum_identity_is_degree_matrix() {
        // oracle: direct matrix arithmetic on the 2x3 incidence blocks
        let g = Graph::generate(&GraphFamily::Path, 3, 0).unwrap();
        let mats = g.matrices(None).unwrap();
        let f = &mats.scaled_incidence;
        let b = &mats.abs_scaled_incidence;
        let half_sum = (f.transpose() * f + b.transpose() * b) * 0.5;
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 1.0]));
        assert!((half_sum - expected).abs().max() < 1e-12);
    }

    #[test]
    fn star_m4_delta_with_unit_weights_is_degree() {
        let g = Graph::generate(&GraphFamily::Star, 4, 0).unwrap();
        let mats = g.matrices(None).unwrap();
        assert_eq!(mats.delta.as_slice(), &[3.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn generalized_laplacian_specializations() {
        let g = Graph::generate(&GraphFamily::Path, 3, 0).unwrap();
        let mats = g.matrices(None).unwrap();
        let ones_m = DVector::from_element(3, 1.0);
        let ones_e = DVector::from_element(2, 1.0);

        // identity weights: unnormalized Laplacian F^T F
        let gl = g.generalized_laplacian(&ones_m, &ones_e).unwrap();
        let ftf = mats.scaled_incidence.transpose() * &mats.scaled_incidence;
        assert!((gl - ftf).abs().max() < 1e-12);

        // Upsilon = P^{1/2}: the degree-normalized Laplacian
        let sqrt_deg = mats.degree.map(f64::sqrt);
        let gl = g.generalized_laplacian(&sqrt_deg, &ones_e).unwrap();
        assert!((gl - g.normalized_laplacian()).abs().max() < 1e-12);

        // uniform Lipschitz profile: the profile-weighted version collapses
        // to the plain normalized Laplacian
        let upsilon = sqrt_deg; // P^{1/2} L^{1/2} with L = I
        let k_weights = ones_e; // sqrt(L_i L_j) = 1
        let gl = g.generalized_laplacian(&upsilon, &k_weights).unwrap();
        assert!((gl - g.normalized_laplacian()).abs().max() < 1e-12);
    }

    #[test]
    fn generalized_laplacian_matches_entrywise_formula() {
        let g = Graph::generate(&GraphFamily::RandomGeometric { radius: 0.6 }, 8, 3).unwrap();
        let e = g.edge_count();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma2 = DVector::from_fn(e, |_, _| 0.2 + rng.random::<f64>());
        let upsilon = DVector::from_fn(8, |_, _| 0.5 + rng.random::<f64>());
        let gl = g.generalized_laplacian(&upsilon, &sigma2).unwrap();
        let mut expected = DMatrix::zeros(8, 8);
        for (row, &(hi, lo)) in g.edges().iter().enumerate() {
            expected[(hi, hi)] += sigma2[row] / (upsilon[hi] * upsilon[hi]);
            expected[(lo, lo)] += sigma2[row] / (upsilon[lo] * upsilon[lo]);
            expected[(hi, lo)] -= sigma2[row] / (upsilon[hi] * upsilon[lo]);
            expected[(lo, hi)] -= sigma2[row] / (upsilon[hi] * upsilon[lo]);
        }
        assert!((gl - expected).abs().max() < 1e-12);
    }

    #[test]
    fn spectral_closed_forms_small() {
        // complete M=4: nonzero eigenvalues all M/(M-1)
        let g = Graph::generate(&GraphFamily::Complete, 4, 0).unwrap();
        let s = spectral(&g.normalized_laplacian(), None).unwrap();
        assert_relative_eq!(s.lambda_min_nonzero, 4.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(s.lambda_max, 4.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(s.xi, 1.0, epsilon = 1e-9);

        // star M=4: {0, 1, 1, 2}
        let g = Graph::generate(&GraphFamily::Star, 4, 0).unwrap();
        let ev = linalg::sym_eigenvalues(&g.normalized_laplacian());
        for (got, want) in ev.iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-9);
        }
        let s = spectral(&g.normalized_laplacian(), None).unwrap();
        assert_relative_eq!(s.xi, 0.5, epsilon = 1e-9);

        // path M=3: {0, 1, 2} from 1 - cos(pi m / (M-1))
        let g = Graph::generate(&GraphFamily::Path, 3, 0).unwrap();
        let ev = linalg::sym_eigenvalues(&g.normalized_laplacian());
        for (got, want) in ev.iter().zip([0.0, 1.0, 2.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn spectral_errors_on_degenerate_input() {
        let z = DMatrix::zeros(3, 3);
        assert!(matches!(
            spectral(&z, None),
            Err(GraphError::DegenerateSpectrum)
        ));
    }

    #[test]
    fn degree_uniformity_examples() {
        let g = Graph::generate(&GraphFamily::Complete, 6, 0).unwrap();
        assert_relative_eq!(g.degree_uniformity_k(), 1.0);
        for m in [4usize, 7, 12] {
            let g = Graph::generate(&GraphFamily::Star, m, 0).unwrap();
            let exact = 2.0 * (m as f64 - 1.0) / m as f64;
            assert_relative_eq!(g.degree_uniformity_k(), exact, epsilon = 1e-12);
            assert!(g.degree_uniformity_k() <= 2.0);
            let g = Graph::generate(&GraphFamily::Path, m, 0).unwrap();
            assert!(g.degree_uniformity_k() <= 2.0);
        }
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = Graph::generate(&GraphFamily::PathStar { diameter: 4 }, 10, 0).unwrap();
        let text = g.to_edge_list();
        let g2 = Graph::from_edge_list(&text).unwrap();
        assert_eq!(g.edges(), g2.edges());
        assert_eq!(g.diameter(), g2.diameter());

        assert!(Graph::from_edge_list("2 1\n1 2\n").is_err()); // i <= j
        assert!(Graph::from_edge_list("# only comments\n").is_err());
        let with_comments = "# generated\n3 2\n2 1\n3 2\n";
        assert!(Graph::from_edge_list(with_comments).is_ok());
    }

    #[test]
    fn random_geometric_is_connected_and_errors_on_tiny_radius() {
        let g = Graph::generate(&GraphFamily::RandomGeometric { radius: 0.5 }, 12, 7).unwrap();
        assert_eq!(g.node_count(), 12);
        assert!(matches!(
            Graph::generate(&GraphFamily::RandomGeometric { radius: 1e-4 }, 30, 7),
            Err(GraphError::GeometricDisconnected(_))
        ));
    }
}
