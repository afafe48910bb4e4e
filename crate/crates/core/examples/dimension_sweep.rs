//! Sweep of Monte-Carlo bounds over dimensions, written as CSV to stdout.
use cubemax::estimation::{sweep_dimensions, McConfig, SWEEP_CSV_HEADER};
use cubemax::report::Report;

fn main() -> cubemax::Result<()> {
    let cfg = McConfig::new(10_000, 7);
    let rows = sweep_dimensions(&[1, 2, 4, 8, 16, 32], &cfg, None)?;
    print!("{}", Report::table(&SWEEP_CSV_HEADER, &rows)?.render_csv()?);
    Ok(())
}
