//! The lattice floor ((1 + 2^(1/d))/2)^d and its limit sqrt 2.
use cubemax::construction::ms_bound;

fn main() -> cubemax::Result<()> {
    for d in [1, 2, 5, 10, 100, 10_000] {
        println!("d = {d:>6}: {:.6}", ms_bound(d)?);
    }
    println!("limit: {:.6}", 2f64.sqrt());
    Ok(())
}
