//! Exact measure of the off-center band E^u against its normal approximation.
use cubemax::construction::LevelProfile;
use cubemax::probability::{claim1_bracket, eu_measure, normal_tail};

fn main() -> cubemax::Result<()> {
    let (u, t) = (0.125, 2.0);
    let (lo, hi) = claim1_bracket(t);
    let normal = normal_tail(-t - 1.0 / t, -t);
    println!("u = {u}, t = {t}, bracket ({lo:.4e}, {hi:.4e}), normal {normal:.6e}");
    for d in [100, 1_000, 10_000, 100_000, 1_000_000] {
        let p = LevelProfile::new(u, t, d)?;
        let exact = eu_measure(&p)?;
        println!("d = {d:>8}: band ({:.2}, {:.2}], |E^u| = {exact:.6e}", p.k_lo, p.r0);
    }
    Ok(())
}
