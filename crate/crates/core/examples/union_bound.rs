//! Inclusion-exclusion lower bound on the union of the bands over the level grid.
use cubemax::probability::union_lower_bound_default;

fn main() -> cubemax::Result<()> {
    for (d, t) in [(100_000, 3.0), (1_000_000, 3.0), (1_000_000, 4.0)] {
        let u = union_lower_bound_default(d, t)?;
        println!(
            "d = {d}, t = {t}: {} levels, sum {:.4e} - pairs {:.4e} = {:.4e} (floor {:.4e})",
            u.levels.len(),
            u.exact_sum,
            u.pairwise_total,
            u.lower,
            u.closed_form_floor
        );
    }
    Ok(())
}
