//! Lower-bound certificates: the asymptotic closed form and an exact finite-d one.
use cubemax::construction::{finite_certificate, theorem_certificate, DEFAULT_LEVEL_RANGE};

fn main() -> cubemax::Result<()> {
    for t in [2.0, 10.0, 30.0] {
        let c = theorem_certificate(t)?;
        println!("t = {t}: alpha = {:.4e}, superlevel >= {:.4e}, bound {:.4e}", c.alpha, c.superlevel_lower, c.bound);
    }
    let c = finite_certificate(1_000_000, 2.0, DEFAULT_LEVEL_RANGE, None)?;
    println!("{}", serde_json::to_string_pretty(&c)?);
    Ok(())
}
