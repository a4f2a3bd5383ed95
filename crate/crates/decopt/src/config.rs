//! Experiment configuration: one self-contained TOML file with sections
//! for the graph, the problem, the algorithm, stopping, and output.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("field `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("sweep too large: {0} runs exceed the 1000-run cap")]
    SweepTooLarge(usize),
    #[error("sweep field `{0}` does not exist")]
    SweepFieldMissing(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    pub stopping: StoppingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Field-path -> list of values; present only in sweep templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<BTreeMap<String, Vec<toml::Value>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// path | cycle | star | complete | grid | random_geometric |
    /// path_star | from_edge_list
    pub kind: String,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub diameter: Option<usize>,
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// classification | zero_chain
    pub family: String,
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default)]
    pub uniform_l: bool,
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_b() -> usize { 50 }
fn default_k() -> usize { 10 }
fn default_lambda() -> f64 { 0.001 }
fn default_alpha() -> f64 { 1.0 }
fn default_t() -> usize { 5 }
fn default_u() -> f64 { 0.5 }
fn default_eps() -> f64 { 0.1 }

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// dgpda | xfilter | dsg
    pub name: String,
    #[serde(default = "default_choice")]
    pub choice: String,
    #[serde(default = "default_scale")]
    pub sigma2_scale: f64,
    #[serde(default = "default_scale")]
    pub upsilon2_scale: f64,
    #[serde(default)]
    pub q_override: Option<usize>,
    #[serde(default = "default_dsg_step")]
    pub dsg_stepsize: f64,
    #[serde(default = "default_dsg_rule")]
    pub dsg_rule: String,
}

fn default_choice() -> String { "I".into() }
fn default_scale() -> f64 { 1.0 }
fn default_dsg_step() -> f64 { 0.1 }
fn default_dsg_rule() -> String { "constant".into() }

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingConfig {
    pub max_rounds: u64,
    #[serde(default)]
    pub target_eps: Option<f64>,
    #[serde(default = "default_measure")]
    pub measure: String,
}

fn default_measure() -> String { "h_star".into() }

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
    /// Record real wall-clock times in the CSV. Off by default so reruns
    /// of the same config and seed are byte-identical.
    #[serde(default)]
    pub wall_time: bool,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, wall_time: false, record_every: 1 }
    }
}

fn default_record_every() -> usize { 1 }

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.into(), source: e })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.graph;
        match g.kind.as_str() {
            "path" | "cycle" | "star" | "complete" | "grid" | "random_geometric"
            | "path_star" | "from_edge_list" => {}
            other => {
                return Err(ConfigError::Invalid {
                    field: "graph.kind",
                    msg: format!("unknown graph kind `{other}`"),
                })
            }
        }
        if g.kind != "from_edge_list" && g.m < 2 {
            return Err(ConfigError::Invalid {
                field: "graph.m",
                msg: "need at least 2 nodes".into(),
            });
        }
        if g.kind == "random_geometric" {
            match g.radius {
                Some(r) if r > 0.0 && r < 1.0 => {}
                _ => {
                    return Err(ConfigError::Invalid {
                        field: "graph.radius",
                        msg: "random_geometric needs a radius in (0, 1)".into(),
                    })
                }
            }
        }
        if g.kind == "path_star" && g.diameter.is_none() {
            return Err(ConfigError::Invalid {
                field: "graph.diameter",
                msg: "path_star needs a diameter".into(),
            });
        }
        if g.kind == "from_edge_list" {
            match &g.file {
                Some(f) if std::path::Path::new(f).exists() => {}
                Some(f) => {
                    return Err(ConfigError::Invalid {
                        field: "graph.file",
                        msg: format!("edge-list file `{f}` does not exist"),
                    })
                }
                None => {
                    return Err(ConfigError::Invalid {
                        field: "graph.file",
                        msg: "from_edge_list needs a file".into(),
                    })
                }
            }
        }
        let p = &self.problem;
        match p.family.as_str() {
            "classification" => {
                if p.b == 0 || p.k == 0 {
                    return Err(ConfigError::Invalid {
                        field: "problem.b",
                        msg: "batch and dimension must be at least 1".into(),
                    });
                }
                if let Some(f) = &p.data {
                    if !std::path::Path::new(f).exists() {
                        return Err(ConfigError::Invalid {
                            field: "problem.data",
                            msg: format!("data file `{f}` does not exist"),
                        });
                    }
                }
            }
            "zero_chain" => {
                if p.t == 0 || p.t % 2 == 0 {
                    return Err(ConfigError::Invalid {
                        field: "problem.t",
                        msg: "chain length must be odd and positive".into(),
                    });
                }
                if !(p.u > 0.0 && p.u < 1.0) {
                    return Err(ConfigError::Invalid {
                        field: "problem.u",
                        msg: "uniform constant must lie in (0, 1)".into(),
                    });
                }
                if p.eps <= 0.0 {
                    return Err(ConfigError::Invalid {
                        field: "problem.eps",
                        msg: "accuracy must be positive".into(),
                    });
                }
            }
            other => {
                return Err(ConfigError::Invalid {
                    field: "problem.family",
                    msg: format!("unknown family `{other}`"),
                })
            }
        }
        let a = &self.algorithm;
        match a.name.as_str() {
            "dgpda" | "xfilter" | "dsg" => {}
            other => {
                return Err(ConfigError::Invalid {
                    field: "algorithm.name",
                    msg: format!("unknown algorithm `{other}`"),
                })
            }
        }
        if a.name == "xfilter" && !matches!(a.choice.as_str(), "I" | "II") {
            return Err(ConfigError::Invalid {
                field: "algorithm.choice",
                msg: format!("choice must be I or II, got `{}`", a.choice),
            });
        }
        if a.sigma2_scale <= 0.0 || a.upsilon2_scale <= 0.0 {
            return Err(ConfigError::Invalid {
                field: "algorithm.sigma2_scale",
                msg: "scales must be positive".into(),
            });
        }
        if a.name == "dsg" && a.dsg_stepsize <= 0.0 {
            return Err(ConfigError::Invalid {
                field: "algorithm.dsg_stepsize",
                msg: "stepsize must be positive".into(),
            });
        }
        if !matches!(self.algorithm.dsg_rule.as_str(), "constant" | "inv_sqrt") {
            return Err(ConfigError::Invalid {
                field: "algorithm.dsg_rule",
                msg: "rule must be `constant` or `inv_sqrt`".into(),
            });
        }
        if self.stopping.max_rounds == 0 {
            return Err(ConfigError::Invalid {
                field: "stopping.max_rounds",
                msg: "round budget must be positive".into(),
            });
        }
        if !matches!(self.stopping.measure.as_str(), "h_star" | "e_val") {
            return Err(ConfigError::Invalid {
                field: "stopping.measure",
                msg: "measure must be `h_star` or `e_val`".into(),
            });
        }
        if let Some(t) = self.stopping.target_eps {
            if t <= 0.0 {
                return Err(ConfigError::Invalid {
                    field: "stopping.target_eps",
                    msg: "target must be positive".into(),
                });
            }
        }
        if self.output.record_every == 0 {
            return Err(ConfigError::Invalid {
                field: "output.record_every",
                msg: "record_every must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Expand the sweep section into concrete configs (cartesian product in
    /// declaration order, capped at 1000 runs).
    pub fn expand_sweep(&self) -> Result<Vec<ExperimentConfig>, ConfigError> {
        let Some(sweep) = &self.sweep else {
            let mut single = self.clone();
            single.sweep = None;
            return Ok(vec![single]);
        };
        let fields: Vec<(&String, &Vec<toml::Value>)> = sweep.iter().collect();
        let total: usize = fields.iter().map(|(_, v)| v.len().max(1)).product();
        if total > 1000 {
            return Err(ConfigError::SweepTooLarge(total));
        }
        let mut base = self.clone();
        base.sweep = None;
        let base_value =
            toml::Value::try_from(&base).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut out = Vec::with_capacity(total);
        let mut counters = vec![0usize; fields.len()];
        loop {
            let mut v = base_value.clone();
            for (f, &(path, values)) in fields.iter().enumerate() {
                set_path(&mut v, path, values[counters[f]].clone())?;
            }
            let cfg: ExperimentConfig =
                v.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
            cfg.validate()?;
            out.push(cfg);
            // odometer increment
            let mut i = fields.len();
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                counters[i] += 1;
                if counters[i] < fields[i].1.len() {
                    break;
                }
                counters[i] = 0;
            }
        }
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| ConfigError::SweepFieldMissing(path.to_string()))?;
        if i + 1 == parts.len() {
            if !table.contains_key(*part) {
                // allow setting optional fields that are absent in the base
                table.insert(part.to_string(), value);
                return Ok(());
            }
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table
            .get_mut(*part)
            .ok_or_else(|| ConfigError::SweepFieldMissing(path.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[graph]
kind = "path"
m = 6

[problem]
family = "classification"
b = 10
k = 4
seed = 3

[algorithm]
name = "dgpda"

[stopping]
max_rounds = 100
"#;

    #[test]
    fn parses_and_validates_base_config() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.graph.m, 6);
        assert_eq!(cfg.problem.lambda, 0.001);
        assert_eq!(cfg.algorithm.choice, "I");
        assert!(!cfg.output.wall_time);
    }

    #[test]
    fn rejects_bad_fields_with_diagnostics() {
        let bad = BASE.replace("kind = \"path\"", "kind = \"hexagon\"");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("graph.kind"));

        let bad = BASE.replace("name = \"dgpda\"", "name = \"sgd\"");
        assert!(ExperimentConfig::from_toml(&bad)
            .unwrap_err()
            .to_string()
            .contains("algorithm.name"));

        let bad = format!("{BASE}\n[typo]\nx = 1\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn sweep_expands_cartesian_product_in_order() {
        // fields iterate in sorted key order; the last one varies fastest
        let text = format!(
            "{BASE}\n[sweep]\n\"graph.m\" = [6, 12, 24]\n\"algorithm.name\" = [\"dgpda\", \"xfilter\"]\n"
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let runs = cfg.expand_sweep().unwrap();
        assert_eq!(runs.len(), 6);
        assert_eq!((runs[0].algorithm.name.as_str(), runs[0].graph.m), ("dgpda", 6));
        assert_eq!((runs[1].algorithm.name.as_str(), runs[1].graph.m), ("dgpda", 12));
        assert_eq!((runs[3].algorithm.name.as_str(), runs[3].graph.m), ("xfilter", 6));
        assert_eq!(runs[5].graph.m, 24);
        // empty sweep = single run
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.expand_sweep().unwrap().len(), 1);
    }

    #[test]
    fn sweep_caps_at_a_thousand_runs() {
        let values: Vec<String> = (0..1001).map(|i| i.to_string()).collect();
        let text = format!("{BASE}\n[sweep]\n\"problem.seed\" = [{}]\n", values.join(", "));
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!(matches!(cfg.expand_sweep(), Err(ConfigError::SweepTooLarge(1001))));
    }
}
