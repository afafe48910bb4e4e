//! One-dimensional functional: exact evaluation and the position search.
use cubemax::oned::{best_lambda, c1_exact, optimize_positions, OneDConfig, OptimizerOptions};

fn main() -> cubemax::Result<()> {
    for n in [2, 4, 16, 64] {
        let cfg = OneDConfig::equally_spaced(n)?;
        let (lambda, value) = best_lambda(&cfg, 160)?;
        println!("equally spaced n = {n}: {value:.6} at lambda = {lambda:.6}");
    }
    let opts = OptimizerOptions {
        iterations: 200,
        restarts: 6,
        seed: 1,
        ..Default::default()
    };
    let res = optimize_positions(10, &opts)?;
    println!(
        "search n = 10: {:.6} (ceiling {:.6}), positions {:?}",
        res.value,
        c1_exact(),
        res.config.positions()
    );
    Ok(())
}
