//! Writing a report and its manifest the way the command-line tool does.
use std::collections::BTreeMap;

use cubemax::probability::{claim1_report, CLAIM_CSV_HEADER};
use cubemax::report::{write_report, Format, Report, RunManifest};

fn main() -> cubemax::Result<()> {
    let dir = std::env::temp_dir().join("cubemax-example");
    let rows = [1_000, 10_000, 100_000]
        .iter()
        .map(|&d| claim1_report(0.125, 2.0, d))
        .collect::<cubemax::Result<Vec<_>>>()?;
    let mut manifest = RunManifest::start("claims", BTreeMap::from([("t".into(), "2".into())]), None);
    let report = Report::table(&CLAIM_CSV_HEADER, &rows)?;
    for format in [Format::Csv, Format::Json] {
        let path = dir.join(format!("claims.{}", format.extension()));
        write_report(&report, format, &path)?;
        manifest.record_output(&path);
    }
    manifest.finish(None);
    println!("manifest: {}", manifest.write(&dir)?.display());
    print!("{}", report.render_csv()?);
    Ok(())
}
