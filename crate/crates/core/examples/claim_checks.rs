//! Finite-d checks of the level-set claims with empirical thresholds.
use cubemax::probability::{
    claim1_clt_report, claim1_report, claim2_report, claim3_report, doubling_schedule, empirical_threshold,
    ClaimReport,
};

fn show(name: &str, rows: &[ClaimReport]) {
    let failing: Vec<usize> = rows.iter().filter(|r| !r.holds).map(|r| r.d).collect();
    println!("{name}: threshold {:?}, failing d {:?}", empirical_threshold(rows), failing);
}

fn main() -> cubemax::Result<()> {
    let schedule = doubling_schedule(1_000, 1_000_000);
    for t in [2.0, 3.0] {
        let c1: Vec<_> = schedule.iter().map(|&d| claim1_report(0.125, t, d)).collect::<Result<_, _>>()?;
        let clt: Vec<_> = schedule.iter().map(|&d| claim1_clt_report(0.125, t, d)).collect::<Result<_, _>>()?;
        show(&format!("claim1 t={t}"), &c1);
        show(&format!("claim1_clt t={t}"), &clt);
    }
    let c2: Vec<_> = [50, 100, 1_000, 10_000, 100_000]
        .iter()
        .map(|&d| claim2_report(0.25, 0.125, 2.0, d))
        .collect::<Result<_, _>>()?;
    for r in &c2 {
        println!("claim2 d={}: {:.4e} <= {:.4e} {}", r.d, r.exact_value, r.bracket_hi, r.holds);
    }
    let c3 = claim3_report(3.0, 100_000, (0.125, 0.25))?;
    println!("claim3 d=1e5: {:.4e} >= {:.4e} {}", c3.exact_value, c3.bracket_lo, c3.holds);
    Ok(())
}
