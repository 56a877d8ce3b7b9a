//! Rough throughput check for the path oracle (used to size test budgets).

use std::time::Instant;
use suptail::bm::{mc_piecewise_noncrossing, PiecewiseBoundary};
use suptail::McConfig;

fn main() {
    let boundary = PiecewiseBoundary::new(1.0, 0.0, 1.0, 1.0).unwrap();
    let cfg = McConfig::new(100_000, 0);
    let start = Instant::now();
    let est = mc_piecewise_noncrossing(&boundary, &cfg).unwrap();
    let dt = start.elapsed().as_secs_f64();
    // p ~ 0.68, survivors run all 1e4 steps.
    println!("estimate {est:?}");
    println!("elapsed {dt:.2}s -> {:.1} ns/step (upper bound)", dt * 1e9 / (1e5 * 1e4));
}
