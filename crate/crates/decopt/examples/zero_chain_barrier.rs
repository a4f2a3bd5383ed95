//! The propagation barrier of the worst-case construction: on a path, the
//! coordinates of the chain activate one graph-traversal at a time, so
//! every neighbor-broadcast method is pinned for the first M/3 rounds.
//!
//! Run with `cargo run --release --example zero_chain_barrier`.

use decopt::algorithms::{dgpda_params, DgpdaProgram};
use decopt::metrics::bounds::lower_bound_iters;
use decopt::problems::{hard_instance, HardLayout};
use decopt::simulator::{max_active_coordinate, run_rounds, NetworkInfo, SimOptions};
use nalgebra::DMatrix;

fn main() {
    let (m, t, u, eps) = (9usize, 5usize, 0.5, 0.1);
    let (graph, inst) = hard_instance(m, t, u, eps, HardLayout::Path).unwrap();
    println!("hard instance: path M = {m}, chain length T = {t}, gradient scale U = {u}");
    println!("node groups: {}\n", inst.metadata["groups"]);

    let params = dgpda_params(&inst, &graph).unwrap();
    let program = DgpdaProgram::new(&inst, &graph, &params);
    let net = NetworkInfo::from_graph(&graph);
    let opts = SimOptions { record_primal: true, ..Default::default() };
    let run = run_rounds(&program, &graph, &net, 40, &opts).unwrap();

    println!("{:>6} {:>22}", "round", "max active coordinate");
    let mut last = 0;
    for tr in &run.traces {
        let primal = tr.primal.as_ref().unwrap();
        let idx = max_active_coordinate(primal.iter().map(|p| p.as_slice()));
        if idx != last || tr.round <= 4 {
            println!("{:>6} {:>22}", tr.round, idx);
            last = idx;
        }
    }
    println!("\ncoordinate 3 needs information to cross from the first third");
    println!("of the path to the last third: at least M/3 = {} rounds.", m / 3);

    // the matching iteration lower bound
    let zero = DMatrix::zeros(m, t);
    let f0 = inst.objective(&zero);
    let d0: f64 = inst
        .gradients_at_zero()
        .row_iter()
        .map(|r| r.norm_squared())
        .sum();
    let gap = f0 - inst.lower_bound.unwrap() + d0 / (m as f64 * u);
    let xi = decopt::graph::spectral(&graph.normalized_laplacian(), None).unwrap().xi;
    println!(
        "\nworst-case round bound at accuracy eps = {eps}: {:.1} rounds",
        lower_bound_iters(gap, u, eps, xi)
    );
}
