//! Configuration-driven experiment runner behind the `decopt` binary:
//! build graph and problem from a config, run the requested solver, and
//! emit CSV rows plus machine-readable bound reports.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::algorithms::{
    dgpda_params_with, dgpda_run, dsg_run, xfilter_params_with, xfilter_run, AlgoError,
    ParamChoice, ParamOverrides, RunOptions, StepRule, StopMeasure, StopRule, Trajectory,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::graph::{Graph, GraphError, GraphFamily};
use crate::metrics::bounds;
use crate::metrics::RunRecord;
use crate::problems::{
    classification_instance, hard_instance, ClassificationData, HardLayout, ProblemError,
    ProblemInstance,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunnerError {
    /// Process exit code: 1 config, 2 verification, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) | RunnerError::Graph(_) | RunnerError::Problem(_)
            | RunnerError::Io { .. } => 1,
            RunnerError::Algo(AlgoError::NonFinite { .. }) => 3,
            RunnerError::Algo(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io { path: path.display().to_string(), source }
}

/// Build the graph named by the config.
pub fn build_graph(cfg: &ExperimentConfig) -> Result<Graph, RunnerError> {
    let g = &cfg.graph;
    let family = match g.kind.as_str() {
        "path" => GraphFamily::Path,
        "cycle" => GraphFamily::Cycle,
        "star" => GraphFamily::Star,
        "complete" => GraphFamily::Complete,
        "grid" => GraphFamily::Grid,
        "random_geometric" => GraphFamily::RandomGeometric {
            radius: g.radius.expect("validated"),
        },
        "path_star" => GraphFamily::PathStar { diameter: g.diameter.expect("validated") },
        "from_edge_list" => {
            let path = g.file.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunnerError::Io { path: path.clone(), source: e })?;
            return Ok(Graph::from_edge_list(&text)?);
        }
        _ => unreachable!("validated"),
    };
    Ok(Graph::generate(&family, g.m, g.seed)?)
}

/// Build the problem; the zero-chain family may replace the graph with its
/// own layout-matched construction (identical for path/path-star kinds).
pub fn build_problem(
    cfg: &ExperimentConfig,
    graph: Graph,
) -> Result<(Graph, ProblemInstance), RunnerError> {
    let p = &cfg.problem;
    match p.family.as_str() {
        "classification" => {
            let data = match &p.data {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| RunnerError::Io { path: path.clone(), source: e })?;
                    ClassificationData::Csv(text)
                }
                None => ClassificationData::Synthetic { seed: p.seed },
            };
            let mut inst = classification_instance(
                graph.node_count(),
                p.b,
                p.k,
                p.lambda,
                p.alpha,
                data,
            )?;
            if p.uniform_l {
                inst = inst.with_uniform_profile();
            }
            Ok((graph, inst))
        }
        "zero_chain" => {
            let layout = match graph.kind() {
                "path" => HardLayout::Path,
                "path_star" => HardLayout::PathStar { diameter: graph.diameter() },
                _ => HardLayout::GeneralGraph(graph.clone()),
            };
            let (g, inst) = hard_instance(graph.node_count(), p.t, p.u, p.eps, layout)?;
            Ok((g, inst))
        }
        _ => unreachable!("validated"),
    }
}

fn stop_rule(cfg: &ExperimentConfig) -> StopRule {
    let measure = match cfg.stopping.measure.as_str() {
        "e_val" => StopMeasure::EVal,
        _ => StopMeasure::HStar,
    };
    StopRule {
        max_rounds: cfg.stopping.max_rounds,
        target: cfg.stopping.target_eps,
        measure,
    }
}

fn overrides(cfg: &ExperimentConfig) -> ParamOverrides {
    ParamOverrides {
        sigma2_scale: cfg.algorithm.sigma2_scale,
        upsilon2_scale: cfg.algorithm.upsilon2_scale,
        q_override: cfg.algorithm.q_override,
    }
}

/// Execute one configured run.
pub fn run_single(cfg: &ExperimentConfig) -> Result<(Graph, Trajectory), RunnerError> {
    let graph = build_graph(cfg)?;
    let (graph, inst) = build_problem(cfg, graph)?;
    let stop = stop_rule(cfg);
    let opts = RunOptions::default();
    let traj = match cfg.algorithm.name.as_str() {
        "dgpda" => {
            let params = dgpda_params_with(&inst, &graph, &overrides(cfg))?;
            dgpda_run(&inst, &graph, &params, &stop, &opts)?
        }
        "xfilter" => {
            let choice = if cfg.algorithm.choice == "II" { ParamChoice::II } else { ParamChoice::I };
            let params = xfilter_params_with(&inst, &graph, choice, &overrides(cfg))?;
            xfilter_run(&inst, &graph, &params, &stop, &opts)?
        }
        "dsg" => {
            let step = match cfg.algorithm.dsg_rule.as_str() {
                "inv_sqrt" => StepRule::InvSqrt(cfg.algorithm.dsg_stepsize),
                _ => StepRule::Constant(cfg.algorithm.dsg_stepsize),
            };
            dsg_run(&inst, &graph, step, &stop, &opts)?
        }
        _ => unreachable!("validated"),
    };
    Ok((graph, traj))
}

/// Fixed CSV schema, floats at 17 significant digits (round-trip exact).
pub const CSV_HEADER: &str = "run_id,algo,graph_kind,M,outer_iter,comm_rounds,grad_evals,\
grad_avg_norm_sq,consensus_weighted,h_star,e_val,potential,wall_ms";

fn fmt_f(x: f64) -> String {
    format!("{:.16e}", x)
}

fn record_row(
    run_id: &str,
    algo: &str,
    graph_kind: &str,
    m: usize,
    rec: &RunRecord,
    wall_time: bool,
) -> String {
    format!(
        "{run_id},{algo},{graph_kind},{m},{},{},{},{},{},{},{},{},{}",
        rec.outer_iter,
        rec.comm_rounds,
        rec.grad_evals,
        fmt_f(rec.grad_avg_norm_sq),
        fmt_f(rec.consensus_weighted),
        fmt_f(rec.h_star),
        fmt_f(rec.e_val),
        fmt_f(rec.potential),
        fmt_f(if wall_time { rec.wall_ms } else { 0.0 })
    )
}

/// Render a trajectory as CSV lines (no header).
pub fn trajectory_csv(
    run_id: &str,
    graph: &Graph,
    traj: &Trajectory,
    wall_time: bool,
    record_every: usize,
) -> String {
    let mut out = String::new();
    let last = traj.records.len().saturating_sub(1);
    for (i, rec) in traj.records.iter().enumerate() {
        if i % record_every == 0 || i == last {
            out.push_str(&record_row(
                run_id,
                traj.algo,
                graph.kind(),
                graph.node_count(),
                rec,
                wall_time,
            ));
            out.push('\n');
        }
    }
    out
}

pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub echo_path: PathBuf,
    pub completed: bool,
}

/// `run` subcommand: one config, one CSV plus a config echo for
/// reproducibility.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts, RunnerError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (graph, traj) = run_single(cfg)?;
    let csv_path = out_dir.join("run.csv");
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    text.push_str(&trajectory_csv(
        "run-0",
        &graph,
        &traj,
        cfg.output.wall_time,
        cfg.output.record_every,
    ));
    std::fs::write(&csv_path, text).map_err(io_err(&csv_path))?;
    let echo_path = out_dir.join("config_echo.json");
    let echo = serde_json::json!({
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "graph": { "kind": graph.kind(), "m": graph.node_count(),
                   "edges": graph.edge_count(), "diameter": graph.diameter() },
        "completed": traj.completed,
        "total_rounds": traj.total_rounds,
        "h_star": traj.h_star,
        "e_min": traj.e_min,
    });
    std::fs::write(&echo_path, serde_json::to_string_pretty(&echo).expect("json"))
        .map_err(io_err(&echo_path))?;
    Ok(RunArtifacts { csv_path, echo_path, completed: traj.completed })
}

pub struct SweepArtifacts {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// `sweep` subcommand: expand the template, run every configuration
/// (in parallel, output ordered by config index), and write a combined CSV
/// plus a rounds-to-target summary.
pub fn cmd_sweep(
    template: &ExperimentConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<SweepArtifacts, RunnerError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let configs = template.expand_sweep()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .expect("thread pool");
    let results: Vec<Result<(Graph, Trajectory), RunnerError>> =
        pool.install(|| configs.par_iter().map(run_single).collect());

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut summary = String::from(
        "run_id,algo,graph_kind,M,completed,rounds_to_target,outer_to_target,grad_evals_to_target,final_h_star,final_e_min\n",
    );
    for (idx, (cfg, res)) in configs.iter().zip(results).enumerate() {
        let (graph, traj) = res?;
        let run_id = format!("run-{idx}");
        csv.push_str(&trajectory_csv(
            &run_id,
            &graph,
            &traj,
            cfg.output.wall_time,
            cfg.output.record_every,
        ));
        let target = cfg.stopping.target_eps;
        let hit = target.and_then(|t| {
            traj.records.iter().find(|r| match cfg.stopping.measure.as_str() {
                "e_val" => r.e_val <= t,
                _ => r.h_star <= t,
            })
        });
        summary.push_str(&format!(
            "{run_id},{},{},{},{},{},{},{},{},{}\n",
            traj.algo,
            graph.kind(),
            graph.node_count(),
            traj.completed,
            hit.map(|r| r.comm_rounds.to_string()).unwrap_or_default(),
            hit.map(|r| r.outer_iter.to_string()).unwrap_or_default(),
            hit.map(|r| r.grad_evals.to_string()).unwrap_or_default(),
            fmt_f(traj.h_star),
            fmt_f(traj.e_min),
        ));
    }
    let csv_path = out_dir.join("sweep.csv");
    std::fs::write(&csv_path, csv).map_err(io_err(&csv_path))?;
    let summary_path = out_dir.join("sweep_summary.csv");
    std::fs::write(&summary_path, summary).map_err(io_err(&summary_path))?;
    Ok(SweepArtifacts { csv_path, summary_path })
}

/// `bounds` subcommand: lower/upper bound formulas for the configured
/// problem and graph, with measured work when a target is set.
pub fn cmd_bounds(cfg: &ExperimentConfig, run: bool) -> Result<serde_json::Value, RunnerError> {
    let graph = build_graph(cfg)?;
    let (graph, inst) = build_problem(cfg, graph)?;
    let m = graph.node_count();
    let lap_xi = crate::graph::spectral(&graph.normalized_laplacian(), None)?.xi;
    let u = inst.profile.l_bar();
    let f_lower = inst.lower_bound.unwrap_or(0.0);
    let eps = cfg.stopping.target_eps.unwrap_or(1e-6);

    // lower bound needs the theorem-side initial gap
    let zero = nalgebra::DMatrix::zeros(m, inst.dim());
    let f0 = inst.objective(&zero);
    let d0_sq: f64 = inst
        .gradients_at_zero()
        .row_iter()
        .map(|r| r.norm_squared())
        .sum();
    let gap = f0 - f_lower + d0_sq / (m as f64 * u.max(1e-300));
    let lower = bounds::lower_bound_iters(gap, u, eps, lap_xi);
    let gap_weighted = f0 - f_lower + inst.d0_inv_profile_norm() / m as f64;
    let xi_hat = {
        let l = inst.profile.as_vector();
        let upsilon = l.map(f64::sqrt);
        let k = inst.profile.edge_weights(&graph);
        let k = if k.iter().any(|&v| v > 0.0) {
            k
        } else {
            nalgebra::DVector::from_element(graph.edge_count(), 1.0)
        };
        crate::graph::spectral(&graph.generalized_laplacian(&upsilon, &k)?, None)?.xi
    };
    let lower_nonuniform =
        bounds::lower_bound_iters_nonuniform(gap_weighted, inst.profile.l_bar(), eps, xi_hat);

    let dg = dgpda_params_with(&inst, &graph, &overrides(cfg)).ok();
    let xf = xfilter_params_with(&inst, &graph, ParamChoice::I, &overrides(cfg)).ok();
    let cond_xi = bounds::conditioning_xi(&inst, &graph);

    let mut report = serde_json::json!({
        "graph": { "kind": graph.kind(), "m": m, "edges": graph.edge_count(),
                   "diameter": graph.diameter(), "xi": lap_xi },
        "problem": { "family": inst.family, "l_bar": u, "f_lower": f_lower },
        "eps": eps,
        "lower_bound": {
            "initial_gap": gap,
            "rounds_uniform": lower,
            "rounds_diameter_form": bounds::lower_bound_iters_diameter(gap, u, eps, graph.diameter()),
            "rounds_nonuniform": lower_nonuniform,
        },
    });
    if let Some(p) = &dg {
        let b = bounds::dgpda_upper_bound(&inst, p, f_lower, eps);
        report["dgpda"] = serde_json::json!({
            "c1": b.c1, "c2": b.c2, "iteration_bound": b.iters,
            "kappa": p.kappa, "c": p.c, "validated": p.validated,
            "c2_specialization": bounds::dgpda_c2_specialization(graph.kind(), u, m),
        });
    }
    if let Some(p) = &xf {
        let b = bounds::xfilter_upper_bound(&inst, p, f_lower, eps);
        report["xfilter"] = serde_json::json!({
            "c1": b.c1, "c2": b.c2, "outer_bound": b.outer,
            "q": p.q, "xi_r": p.xi_r, "kappa_tilde": p.kappa_tilde,
            "validated": p.validated,
            "total_rounds_bound_with_tracking": b.total_rounds,
            "total_rounds_bound_filter_only": b.total_rounds_filter_only,
            "c2_over_sqrt_xi": b.c2 / cond_xi.sqrt(),
            "c2_specialization": bounds::xfilter_c2_specialization(graph.kind(), u, m),
        });
    }
    if run {
        let (_, traj) = run_single(cfg)?;
        let hit = cfg.stopping.target_eps.and_then(|t| {
            traj.records.iter().find(|r| match cfg.stopping.measure.as_str() {
                "e_val" => r.e_val <= t,
                _ => r.h_star <= t,
            })
        });
        report["measured"] = serde_json::json!({
            "algo": traj.algo,
            "completed": traj.completed,
            "total_rounds": traj.total_rounds,
            "rounds_to_target": hit.map(|r| r.comm_rounds),
            "outer_to_target": hit.map(|r| r.outer_iter),
            "h_star": traj.h_star,
            "e_min": traj.e_min,
        });
    }
    Ok(report)
}

/// `gen-graph` subcommand: emit the edge-list text format.
pub fn gen_graph(cfg: &ExperimentConfig) -> Result<String, RunnerError> {
    let graph = build_graph(cfg)?;
    let mut out = format!(
        "# kind={} m={} diameter={}\n",
        graph.kind(),
        graph.node_count(),
        graph.diameter()
    );
    out.push_str(&graph.to_edge_list());
    Ok(out)
}

/// Write a trace dump in JSON-lines form (one object per round).
pub fn write_trace_jsonl(
    traces: &[crate::simulator::RoundTrace],
    path: &Path,
) -> Result<(), RunnerError> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    for t in traces {
        let obj = serde_json::json!({
            "round": t.round,
            "message_norms": t.message_norms,
            "grad_flags": t.grad_flags,
        });
        writeln!(f, "{}", obj).map_err(io_err(path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(algo: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
[graph]
kind = "cycle"
m = 6

[problem]
family = "classification"
b = 8
k = 3
seed = 5

[algorithm]
name = "{algo}"

[stopping]
max_rounds = 4000
"#
        ))
        .unwrap()
    }

    #[test]
    fn run_is_deterministic_byte_for_byte() {
        let cfg = base_config("dgpda");
        let dir1 = std::env::temp_dir().join("decopt_det_1");
        let dir2 = std::env::temp_dir().join("decopt_det_2");
        let a = cmd_run(&cfg, &dir1).unwrap();
        let b = cmd_run(&cfg, &dir2).unwrap();
        let ca = std::fs::read(&a.csv_path).unwrap();
        let cb = std::fs::read(&b.csv_path).unwrap();
        assert_eq!(ca, cb);
        assert!(!ca.is_empty());
    }

    #[test]
    fn csv_schema_matches_the_contract() {
        let cfg = base_config("xfilter");
        let dir = std::env::temp_dir().join("decopt_schema");
        let art = cmd_run(&cfg, &dir).unwrap();
        let text = std::fs::read_to_string(&art.csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(fields[1], "xfilter");
        assert_eq!(fields[2], "cycle");
        // 17 significant digits, round-trip exact
        let v: f64 = fields[7].parse().unwrap();
        assert_eq!(format!("{:.16e}", v), fields[7]);
    }

    #[test]
    fn sweep_produces_ordered_blocks_and_summary() {
        let mut cfg = base_config("dgpda");
        cfg.stopping.target_eps = Some(1e-3);
        let mut sweep = std::collections::BTreeMap::new();
        sweep.insert(
            "algorithm.name".to_string(),
            vec![toml::Value::from("dgpda"), toml::Value::from("dsg"), toml::Value::from("xfilter")],
        );
        cfg.sweep = Some(sweep);
        let dir = std::env::temp_dir().join("decopt_sweep");
        let art = cmd_sweep(&cfg, &dir, Some(2)).unwrap();
        let text = std::fs::read_to_string(&art.csv_path).unwrap();
        let algos: Vec<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        // blocks ordered by config index: all dgpda rows, then dsg, then xfilter
        let first_dsg = algos.iter().position(|a| *a == "dsg").unwrap();
        let first_xf = algos.iter().position(|a| *a == "xfilter").unwrap();
        assert!(algos[..first_dsg].iter().all(|a| *a == "dgpda"));
        assert!(first_dsg < first_xf);
        let summary = std::fs::read_to_string(&art.summary_path).unwrap();
        assert_eq!(summary.lines().count(), 4); // header + 3 runs
    }

    #[test]
    fn bounds_report_contains_the_formula_values() {
        let mut cfg = base_config("dgpda");
        cfg.graph.kind = "complete".into();
        cfg.problem.uniform_l = true;
        cfg.stopping.target_eps = Some(1e-4);
        let report = cmd_bounds(&cfg, false).unwrap();
        let u = report["problem"]["l_bar"].as_f64().unwrap();
        let c2 = report["dgpda"]["c2"].as_f64().unwrap();
        let spec = report["dgpda"]["c2_specialization"].as_f64().unwrap();
        assert!((spec - (400.0 * u + 4.0)).abs() < 1e-9);
        assert!(c2 <= spec);
        assert!(report["xfilter"]["q"].as_u64().unwrap() >= 1);
    }

    #[test]
    fn gen_graph_round_trips_through_the_parser() {
        let mut cfg = base_config("dgpda");
        cfg.graph.kind = "path_star".into();
        cfg.graph.m = 10;
        cfg.graph.diameter = Some(4);
        let text = gen_graph(&cfg).unwrap();
        let g = Graph::from_edge_list(&text).unwrap();
        assert_eq!(g.node_count(), 10);
        assert_eq!(g.diameter(), 4);
    }
}
