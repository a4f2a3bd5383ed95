//! Rate-bound constants across graph families, uniform profile: lower
//! bound rounds, the primal-dual solver's C2 (with its closed-form caps),
//! and the filtering solver's C2~/sqrt(xi) (with its caps).
//!
//! Run with `cargo run --release --example bounds_table`.

use decopt::algorithms::{dgpda_params, xfilter_params, ParamChoice};
use decopt::graph::{Graph, GraphFamily};
use decopt::metrics::bounds::{
    conditioning_xi, dgpda_c2_specialization, xfilter_c2_specialization,
};
use decopt::problems::{LipschitzProfile, Oracle, ProblemInstance};

fn uniform_instance(m: usize, u: f64) -> ProblemInstance {
    let oracles = (0..m)
        .map(|_| {
            Oracle::new(1, move |x, g| {
                g[0] = u * x[0];
                0.5 * u * x[0] * x[0]
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

fn main() {
    let m = 16;
    let u = 0.6;
    println!("uniform profile U = {u}, M = {m}\n");
    println!(
        "{:<10} {:>10} {:>12} {:>14} {:>16} {:>16}",
        "family", "xi", "pd C2", "pd C2 cap", "filter C2~/sx", "filter cap"
    );
    for fam in [
        GraphFamily::Complete,
        GraphFamily::Star,
        GraphFamily::Grid,
        GraphFamily::Cycle,
        GraphFamily::Path,
    ] {
        let g = Graph::generate(&fam, m, 0).unwrap();
        let inst = uniform_instance(m, u);
        let xi = decopt::graph::spectral(&g.normalized_laplacian(), None).unwrap().xi;
        let dp = dgpda_params(&inst, &g).unwrap();
        let xp = xfilter_params(&inst, &g, ParamChoice::I).unwrap();
        let cxi = conditioning_xi(&inst, &g);
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<10} {:>10.5} {:>12.1} {:>14} {:>16.1} {:>16}",
            g.kind(),
            xi,
            dp.c2(),
            fmt(dgpda_c2_specialization(g.kind(), u, m)),
            xp.c2_tilde() / cxi.sqrt(),
            fmt(xfilter_c2_specialization(g.kind(), u, m)),
        );
    }
    println!("\nthe pd constant picks up the 1/xi factor on long graphs; the");
    println!("filtering constant only pays sqrt(1/xi) through its inner budget.");
    println!("(the star cap is the paper-style formula; the computed constant");
    println!("carries the extra degree-uniformity factor, see the bounds report)");
}
