//! Audit how node programs consume neighbor messages: uniform dual
//! stepsizes keep both solvers in the sum-only class, heterogeneous ones
//! do not, and Metropolis mixing is sum-only exactly on regular graphs.
//!
//! Run with `cargo run --release --example message_usage_audit`.

use decopt::algorithms::{
    dgpda_params, xfilter_params, DgpdaProgram, DsgProgram, ParamChoice, StepRule,
    XFilterProgram,
};
use decopt::graph::{Graph, GraphFamily};
use decopt::problems::{classification_instance, ClassificationData, LipschitzProfile, Oracle,
    ProblemInstance};
use decopt::simulator::{audit_class_sum_only, NetworkInfo};

fn uniform_instance(m: usize, u: f64) -> ProblemInstance {
    let oracles = (0..m)
        .map(|_| {
            Oracle::new(2, move |x, g| {
                g[0] = u * x[0];
                g[1] = u * x[1];
                0.5 * u * (x[0] * x[0] + x[1] * x[1])
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

fn verdict(r: Result<(), decopt::simulator::AuditViolation>) -> String {
    match r {
        Ok(()) => "sum-only".into(),
        Err(v) => format!("weighted (first at round {}, node {})", v.round, v.node),
    }
}

fn main() {
    // uniform profile on a regular graph: every weight collapses
    let m = 8;
    let graph = Graph::generate(&GraphFamily::Cycle, m, 0).unwrap();
    let net = NetworkInfo::from_graph(&graph);
    let inst = uniform_instance(m, 0.5);

    let xp = xfilter_params(&inst, &graph, ParamChoice::I).unwrap();
    let prog = XFilterProgram::new(&inst, &graph, &xp);
    let r = audit_class_sum_only(&prog, &graph, &net, 2 * (xp.q as u64 + 1)).unwrap();
    println!("filtering solver, uniform profile, cycle:      {}", verdict(r));

    let dp = dgpda_params(&inst, &graph).unwrap();
    let prog = DgpdaProgram::new(&inst, &graph, &dp);
    let r = audit_class_sum_only(&prog, &graph, &net, 6).unwrap();
    println!("primal-dual solver, uniform profile, cycle:    {}", verdict(r));

    let prog = DsgProgram::new(&inst, &graph, StepRule::Constant(0.1));
    let r = audit_class_sum_only(&prog, &graph, &net, 6).unwrap();
    println!("subgradient, Metropolis weights, cycle:        {}", verdict(r));

    // heterogeneous profile: the per-edge dual stepsizes differ and the
    // combines weight neighbors unequally
    let graph = Graph::generate(&GraphFamily::RandomGeometric { radius: 0.6 }, m, 5).unwrap();
    let net = NetworkInfo::from_graph(&graph);
    let inst = classification_instance(m, 10, 3, 0.001, 1.0, ClassificationData::Synthetic {
        seed: 5,
    })
    .unwrap();

    let dp = dgpda_params(&inst, &graph).unwrap();
    let prog = DgpdaProgram::new(&inst, &graph, &dp);
    let r = audit_class_sum_only(&prog, &graph, &net, 6).unwrap();
    println!("primal-dual solver, estimated profile, rgg:    {}", verdict(r));

    let prog = DsgProgram::new(&inst, &graph, StepRule::Constant(0.1));
    let r = audit_class_sum_only(&prog, &graph, &net, 6).unwrap();
    println!("subgradient, Metropolis weights, rgg:          {}", verdict(r));
}
