//! Spectral summaries of the standard graph families: eigenvalue ranges,
//! spectral ratios, and the closed forms they match.
//!
//! Run with `cargo run --release --example graph_spectra`.

use decopt::graph::{spectral, Graph, GraphFamily};

fn main() {
    println!("{:<18} {:>4} {:>6} {:>5} {:>12} {:>12} {:>10}",
        "family", "M", "edges", "diam", "lambda_min+", "lambda_max", "xi");
    for m in [9usize, 16, 25] {
        let families = [
            GraphFamily::Complete,
            GraphFamily::Star,
            GraphFamily::Path,
            GraphFamily::Cycle,
            GraphFamily::Grid,
            GraphFamily::RandomGeometric { radius: 0.5 },
            GraphFamily::PathStar { diameter: m / 2 },
        ];
        for fam in families {
            let g = Graph::generate(&fam, m, 7).expect("generate");
            let s = spectral(&g.normalized_laplacian(), None).expect("spectrum");
            println!(
                "{:<18} {:>4} {:>6} {:>5} {:>12.6} {:>12.6} {:>10.6}",
                g.kind(), m, g.edge_count(), g.diameter(),
                s.lambda_min_nonzero, s.lambda_max, s.xi
            );
        }
        println!();
    }

    // the closed forms behind the table
    let m = 16f64;
    println!("closed forms at M = 16:");
    println!("  complete: nonzero eigenvalues M/(M-1) = {:.6}", m / (m - 1.0));
    println!("  star:     eigenvalues {{0, 1 (x{}), 2}}, xi = 1/2", 16 - 2);
    println!("  path:     1 - cos(pi k/(M-1)), xi >= 1/M^2 = {:.6}", 1.0 / (m * m));
    println!("  cycle:    1 - cos(2 pi k/M),  xi >= 1/M^2");
    println!("  grid:     xi >= 1/M = {:.6}", 1.0 / m);

    // degree-uniformity constants used by the filtering parameter rule
    println!("\ndegree uniformity k = avg_degree / min_degree:");
    for fam in [GraphFamily::Complete, GraphFamily::Star, GraphFamily::Path, GraphFamily::Grid] {
        let g = Graph::generate(&fam, 16, 0).unwrap();
        println!("  {:<10} k = {:.4}", g.kind(), g.degree_uniformity_k());
    }
}
