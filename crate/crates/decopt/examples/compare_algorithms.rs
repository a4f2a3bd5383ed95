//! Head-to-head on a distributed binary classification instance: the two
//! primal-dual solvers against the subgradient baseline, at equal
//! communication budgets. Writes the standard CSV to stdout.
//!
//! Run with `cargo run --release --example compare_algorithms`.

use decopt::algorithms::{
    dgpda_params, dgpda_run, dsg_run, xfilter_params, xfilter_run, ParamChoice, RunOptions,
    StepRule, StopRule,
};
use decopt::graph::{Graph, GraphFamily};
use decopt::problems::{classification_instance, ClassificationData};
use decopt::runner::{trajectory_csv, CSV_HEADER};

fn main() {
    let m = 5;
    let graph = Graph::generate(&GraphFamily::RandomGeometric { radius: 0.5 }, m, 1).unwrap();
    let inst = classification_instance(m, 200, 10, 0.001, 1.0, ClassificationData::Synthetic {
        seed: 1,
    })
    .unwrap();
    let rounds = 400;
    let opts = RunOptions::default();

    let dparams = dgpda_params(&inst, &graph).unwrap();
    let dg = dgpda_run(&inst, &graph, &dparams, &StopRule::rounds(rounds), &opts).unwrap();

    let xparams = xfilter_params(&inst, &graph, ParamChoice::I).unwrap();
    let xf = xfilter_run(&inst, &graph, &xparams, &StopRule::rounds(rounds), &opts).unwrap();

    let ds = dsg_run(&inst, &graph, StepRule::Constant(0.5), &StopRule::rounds(rounds), &opts)
        .unwrap();

    println!("{CSV_HEADER}");
    // thin every 20th row to keep the output readable
    for (id, traj) in [("dgpda", &dg), ("xfilter", &xf), ("dsg", &ds)] {
        print!("{}", trajectory_csv(id, &graph, traj, false, 20));
    }

    eprintln!(
        "\nsummary after {rounds} rounds (xfilter inner budget Q = {}):",
        xparams.q
    );
    for traj in [&dg, &xf, &ds] {
        eprintln!(
            "  {:<8} h* = {:.3e}   outer iterates = {:>5}   gradient passes = {}",
            traj.algo,
            traj.h_star,
            traj.records.len(),
            traj.records.last().map(|r| r.grad_evals).unwrap_or(0)
        );
    }
}
