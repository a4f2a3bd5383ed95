//! Certify the descent machinery along real trajectories: every inequality
//! the rate analysis uses, evaluated at every iterate, with its worst
//! margin.
//!
//! Run with `cargo run --release --example inequality_audit`.

use decopt::algorithms::{
    dgpda_params, dgpda_run, xfilter_params, xfilter_run, ParamChoice, RunOptions, StopRule,
};
use decopt::graph::{Graph, GraphFamily};
use decopt::metrics::inequalities::{check_dgpda_trajectory, check_xfilter_trajectory};
use decopt::problems::{classification_instance, ClassificationData};

fn main() {
    let graph = Graph::generate(&GraphFamily::RandomGeometric { radius: 0.5 }, 8, 9).unwrap();
    let inst = classification_instance(8, 30, 6, 0.001, 1.0, ClassificationData::Synthetic {
        seed: 9,
    })
    .unwrap();
    let opts = RunOptions { retain_states: true, cross_check: true };

    let params = dgpda_params(&inst, &graph).unwrap();
    let traj = dgpda_run(&inst, &graph, &params, &StopRule::rounds(150), &opts).unwrap();
    let rep = check_dgpda_trajectory(&traj, &params, &inst, &graph, 1e-8);
    println!("primal-dual solver, {} iterates:", traj.records.len());
    print_report(&rep);

    let params = xfilter_params(&inst, &graph, ParamChoice::I).unwrap();
    let stop = StopRule::rounds(60 * params.rounds_per_outer());
    let traj = xfilter_run(&inst, &graph, &params, &stop, &opts).unwrap();
    let rep = check_xfilter_trajectory(&traj, &params, &inst, &graph, 1e-8);
    println!("\nfiltering solver, {} outer iterates (Q = {}):", traj.records.len(), params.q);
    print_report(&rep);
}

fn print_report(rep: &decopt::metrics::inequalities::IneqReport) {
    let mut ids: Vec<&str> = rep.checks.iter().map(|c| c.id).collect();
    ids.dedup();
    ids.sort_unstable();
    ids.dedup();
    println!("{:<24} {:>8} {:>16} {:>6}", "inequality", "count", "worst margin", "ok");
    for id in ids {
        let count = rep.checks.iter().filter(|c| c.id == id).count();
        let worst = rep.worst_margin(id).unwrap();
        let pass = rep.checks.iter().filter(|c| c.id == id).all(|c| c.pass);
        println!("{:<24} {:>8} {:>16.3e} {:>6}", id, count, worst, pass);
    }
    println!("all pass: {}", rep.all_pass());
}
