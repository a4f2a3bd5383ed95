//! Distributed binary classification: logistic loss over each node's local
//! samples plus a smooth non-convex regularizer
//! `sum_s lambda alpha x_s^2 / (1 + alpha x_s^2)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use super::{estimate_gradient_lipschitz, LipschitzProfile, Oracle, ProblemError, ProblemInstance};

/// Where the samples come from.
#[derive(Debug, Clone)]
pub enum ClassificationData {
    /// Standard-normal features, labels uniform on `{-1, +1}`.
    Synthetic { seed: u64 },
    /// CSV text: one row per sample, label (`-1` or `+1`) first, then the
    /// feature vector. Rows are dealt round-robin to the nodes.
    Csv(String),
}

struct NodeData {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

/// `log(1 + exp(z))` without overflow.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))` without overflow.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn parse_csv(
    text: &str,
    dim: usize,
    nodes: usize,
) -> Result<Vec<NodeData>, ProblemError> {
    let mut per_node: Vec<NodeData> = (0..nodes)
        .map(|_| NodeData { features: Vec::new(), labels: Vec::new() })
        .collect();
    let mut row_idx = 0usize;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let label: f64 = fields
            .next()
            .ok_or(ProblemError::Parse { line: ln + 1, msg: "empty row".into() })?
            .parse()
            .map_err(|_| ProblemError::Parse { line: ln + 1, msg: "bad label".into() })?;
        if label != 1.0 && label != -1.0 {
            return Err(ProblemError::BadLabel(label, ln + 1));
        }
        let feats: Result<Vec<f64>, _> = fields.map(|f| f.parse::<f64>()).collect();
        let feats = feats.map_err(|_| ProblemError::Parse {
            line: ln + 1,
            msg: "bad feature value".into(),
        })?;
        if feats.len() != dim {
            return Err(ProblemError::DimMismatch {
                expected: dim,
                got: feats.len(),
                line: ln + 1,
            });
        }
        let node = row_idx % nodes;
        per_node[node].features.push(feats);
        per_node[node].labels.push(label);
        row_idx += 1;
    }
    if row_idx < nodes {
        return Err(ProblemError::TooFewRows { rows: row_idx, nodes });
    }
    Ok(per_node)
}

/// Build a classification instance with `m` nodes, `b` samples per node
/// (synthetic case), feature dimension `k`, regularization weight
/// `lambda_reg`, and regularizer shape `alpha`.
///
/// Per-node Lipschitz constants are estimated by sampling (2000 gradient
/// pairs in a radius-10 ball) and stored with a 1.1 safety factor.
pub fn classification_instance(
    m: usize,
    b: usize,
    k: usize,
    lambda_reg: f64,
    alpha: f64,
    data: ClassificationData,
) -> Result<ProblemInstance, ProblemError> {
    if m == 0 || b == 0 || k == 0 {
        return Err(ProblemError::EmptyData);
    }
    let (node_data, data_tag): (Vec<NodeData>, String) = match &data {
        ClassificationData::Synthetic { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let nodes = (0..m)
                .map(|_| {
                    let features = (0..b)
                        .map(|_| (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                        .collect();
                    let labels = (0..b)
                        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                        .collect();
                    NodeData { features, labels }
                })
                .collect();
            (nodes, format!("synthetic(seed={})", seed))
        }
        ClassificationData::Csv(text) => (parse_csv(text, k, m)?, "csv".into()),
    };

    let mut oracles = Vec::with_capacity(m);
    let mut analytic_caps = Vec::with_capacity(m);
    for nd in node_data {
        let batch = nd.features.len() as f64;
        // curvature cap: logistic Hessian <= (1/(4B)) sum v v^T, regularizer
        // second derivative <= 2 lambda alpha
        let mut gram = DMatrix::zeros(k, k);
        for v in &nd.features {
            for a in 0..k {
                for b in 0..k {
                    gram[(a, b)] += v[a] * v[b];
                }
            }
        }
        let cap = crate::linalg::max_eigenvalue(&gram) / (4.0 * batch)
            + 2.0 * lambda_reg * alpha;
        analytic_caps.push(cap);
        let features = nd.features;
        let labels = nd.labels;
        oracles.push(Oracle::new(k, move |x, grad| {
            for g in grad.iter_mut() {
                *g = 0.0;
            }
            let mut val = 0.0;
            for (v, &y) in features.iter().zip(&labels) {
                let margin: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
                let z = -y * margin;
                val += log1p_exp(z);
                let w = -y * sigmoid(z);
                for (g, &vj) in grad.iter_mut().zip(v) {
                    *g += w * vj;
                }
            }
            val /= batch;
            for g in grad.iter_mut() {
                *g /= batch;
            }
            for (g, &xs) in grad.iter_mut().zip(x.iter()) {
                let d = 1.0 + alpha * xs * xs;
                val += lambda_reg * alpha * xs * xs / d;
                *g += 2.0 * lambda_reg * alpha * xs / (d * d);
            }
            val
        }));
    }

    // sampled estimate, floored by the analytic curvature cap
    // (1/(4B)) lambda_max(sum v v^T) + 2 lambda alpha, so the stored value
    // is always a true upper bound
    let l_estimates: Vec<f64> = oracles
        .iter()
        .zip(&analytic_caps)
        .enumerate()
        .map(|(i, (o, &cap))| {
            let sampled = 1.1 * estimate_gradient_lipschitz(o, 2000, 10.0, 7_000 + i as u64);
            sampled.max(cap)
        })
        .collect();
    let profile = LipschitzProfile::new(l_estimates);

    let metadata = json!({
        "family": "classification",
        "nodes": m,
        "batch": b,
        "dim": k,
        "lambda": lambda_reg,
        "alpha": alpha,
        "data": data_tag,
        "profile": profile.per_node(),
    });
    // logistic loss and the regularizer are both nonnegative
    Ok(ProblemInstance::new(oracles, profile, Some(0.0), "classification", metadata))
}
