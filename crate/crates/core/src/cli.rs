//! Command-line interface. Each subcommand writes its report and a run
//! manifest into `--out-dir` and prints the report (or the scalar result) on
//! stdout.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::construction::{self, DEFAULT_LEVEL_RANGE};
use crate::error::{Error, Result};
use crate::estimation::{self, McConfig, SWEEP_CSV_HEADER};
use crate::maxfun;
use crate::measures::{LatticeWindow, Measure};
use crate::oned::{self, OneDConfig, OptimizerOptions, TRACE_CSV_HEADER};
use crate::probability::{self, ClaimReport, CLAIM_CSV_HEADER};
use crate::report::{self, Format, Report, RunManifest};

pub const OUT_DIR_ENV: &str = "CUBEMAX_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "cubemax", version, about = "Weak-type bounds for the centered cube maximal function")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    /// Directory for reports and manifests
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "cubemax-out")]
    pub out_dir: PathBuf,
    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// File of `key = value` lines supplying flag defaults; explicit flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for Monte-Carlo and search commands
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Root seed for Monte-Carlo and search commands
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate the maximal function of a measure at one point
    #[command(args_override_self = true)]
    EvalPoint(EvalPointArgs),
    /// Check the level-set claims over a dimension schedule
    #[command(args_override_self = true)]
    Claims(ClaimsArgs),
    /// Exact measure of the off-center band E^u
    #[command(args_override_self = true)]
    EuExact(EuExactArgs),
    /// Inclusion-exclusion lower bound on the union of the E^u
    #[command(args_override_self = true)]
    UnionBound(UnionBoundArgs),
    /// Monte-Carlo lower bound for one dimension
    #[command(args_override_self = true)]
    McBound(McBoundArgs),
    /// Monte-Carlo lower bounds over a list of dimensions
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Search one-dimensional delta configurations
    #[command(args_override_self = true)]
    OnedSearch(OnedSearchArgs),
    /// The equally-spaced lattice lower bound ((1 + 2^(1/d))/2)^d
    #[command(args_override_self = true)]
    MsBound(MsBoundArgs),
    /// Assemble a lower-bound certificate from exact quantities
    #[command(args_override_self = true)]
    Certificate(CertificateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EvalPoint(_) => "eval-point",
            Command::Claims(_) => "claims",
            Command::EuExact(_) => "eu-exact",
            Command::UnionBound(_) => "union-bound",
            Command::McBound(_) => "mc-bound",
            Command::Sweep(_) => "sweep",
            Command::OnedSearch(_) => "oned-search",
            Command::MsBound(_) => "ms-bound",
            Command::Certificate(_) => "certificate",
        }
    }
}

pub const SUBCOMMANDS: [&str; 9] = [
    "eval-point",
    "claims",
    "eu-exact",
    "union-bound",
    "mc-bound",
    "sweep",
    "oned-search",
    "ms-bound",
    "certificate",
];

/// Dimensions given as `start:end:xF` (geometric, factor `F`) or `d1,d2,...`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Schedule(pub Vec<usize>);

fn parse_dimension(s: &str) -> std::result::Result<usize, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(x >= 1.0 && x.fract() == 0.0 && x < 1e15) {
        return Err(format!("not a positive integer: {s:?}"));
    }
    Ok(x as usize)
}

pub fn parse_schedule(s: &str) -> std::result::Result<Schedule, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let start = parse_dimension(start)?;
            let end = parse_dimension(end)?;
            let factor = step
                .strip_prefix('x')
                .ok_or_else(|| format!("step must look like x2, got {step:?}"))
                .and_then(parse_dimension)?;
            if factor < 2 {
                return Err("factor must be at least 2".into());
            }
            if end < start {
                return Err("end must not be below start".into());
            }
            let mut out = Vec::new();
            let mut d = start;
            while d <= end {
                out.push(d);
                d = d.checked_mul(factor).ok_or("schedule overflows")?;
            }
            Ok(Schedule(out))
        }
        [list] => list.split(',').map(parse_dimension).collect::<std::result::Result<_, _>>().map(Schedule),
        _ => Err(format!("expected start:end:xF or a comma list, got {s:?}")),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EvalPointArgs {
    /// Dimension
    #[arg(long)]
    pub d: usize,
    /// Point coordinates, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    /// Use the unbounded unit lattice
    #[arg(long, conflicts_with_all = ["measure", "window_lo"])]
    pub lattice: bool,
    /// Lower integer bound of a lattice window (every axis)
    #[arg(long, requires = "window_hi", allow_hyphen_values = true, conflicts_with = "measure")]
    pub window_lo: Option<i64>,
    /// Upper integer bound of a lattice window (every axis)
    #[arg(long, requires = "window_lo")]
    pub window_hi: Option<i64>,
    /// JSON file with a delta or lattice measure
    #[arg(long)]
    pub measure: Option<PathBuf>,
    /// Largest radius searched [default: ceil(sqrt(d)) + 1]
    #[arg(long)]
    pub r_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimKind {
    Claim1,
    Claim1Clt,
    Claim2,
    Claim3,
}

#[derive(Args, Debug, Serialize)]
pub struct ClaimsArgs {
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
    /// Level for claim1 and claim1-clt
    #[arg(long, default_value_t = 0.125)]
    pub u: f64,
    /// Upper level for claim2
    #[arg(long, default_value_t = 0.25)]
    pub claim2_u: f64,
    /// Lower level for claim2 [default: claim2-u - t^(-4/3) when positive, else claim2-u / 2]
    #[arg(long)]
    pub v: Option<f64>,
    /// Dimensions: start:end:xF or a comma list
    #[arg(long, value_parser = parse_schedule, default_value = "1e3:1e6:x2")]
    pub d_schedule: Schedule,
    /// Claims to check
    #[arg(long, value_enum, value_delimiter = ',', default_value = "claim1,claim1-clt,claim2,claim3")]
    pub which: Vec<ClaimKind>,
    /// Lower end of the level range for claim3
    #[arg(long, default_value_t = DEFAULT_LEVEL_RANGE.0)]
    pub range_lo: f64,
    /// Upper end of the level range for claim3
    #[arg(long, default_value_t = DEFAULT_LEVEL_RANGE.1)]
    pub range_hi: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct EuExactArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.125)]
    pub u: f64,
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct UnionBoundArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 3.0)]
    pub t: f64,
    #[arg(long, default_value_t = DEFAULT_LEVEL_RANGE.0)]
    pub range_lo: f64,
    #[arg(long, default_value_t = DEFAULT_LEVEL_RANGE.1)]
    pub range_hi: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct McArgs {
    /// Number of uniform samples in the unit cell
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Profile parameter for the default threshold grid (0.5 to e^(t^2/2), 64 points)
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
    /// Explicit threshold grid, comma separated
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    /// Largest radius searched [default: ceil(sqrt(d)) + 1]
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Also report the certified form for a finite window of this side
    #[arg(long)]
    pub window_side: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct McBoundArgs {
    #[arg(long)]
    pub d: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// Dimensions: start:end:xF or a comma list
    #[arg(long, value_parser = parse_schedule, default_value = "1,2,5,10,20")]
    pub d_list: Schedule,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct OnedSearchArgs {
    /// Number of unit deltas
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 400)]
    pub iterations: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Non-improving iterations before the step halves
    #[arg(long, default_value_t = 50)]
    pub patience: usize,
    /// Bisection steps for the threshold search
    #[arg(long, default_value_t = oned::DEFAULT_REFINEMENT_BUDGET)]
    pub refinement_budget: usize,
    /// Evaluate this configuration file instead of searching
    #[arg(long)]
    pub evaluate: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct MsBoundArgs {
    #[arg(long)]
    pub d: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CertificateArgs {
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
    /// Dimension; without it the asymptotic closed-form certificate is built
    #[arg(long)]
    pub d: Option<usize>,
    /// Finite window side; without it the window factor is 1
    #[arg(long, requires = "d")]
    pub window_side: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_LEVEL_RANGE.0)]
    pub range_lo: f64,
    #[arg(long, default_value_t = DEFAULT_LEVEL_RANGE.1)]
    pub range_hi: f64,
}

/// Exit status of a run.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::CoordinateOutOfRange { .. }
        | Error::EmptyGrid { .. } => 2,
        _ => 1,
    }
}

fn config_path(argv: &[String]) -> Option<String> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

/// Flags read from a `key = value` file. `true`/`false` toggle switches.
pub fn config_flags(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid("config", format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key == "config" {
            return Err(Error::invalid("config", format!("line {}: bad key", lineno + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand token so that later
/// command-line occurrences override them.
fn expand_config(mut argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::invalid("config", format!("cannot read {path}: {e}")))?;
    let flags = config_flags(&text)?;
    let at = argv
        .iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .map(|i| i + 2)
        .unwrap_or(argv.len());
    argv.splice(at..at, flags);
    Ok(argv)
}

fn parameters<T: Serialize>(cli: &Cli, args: &T) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    if let Ok(Value::Object(m)) = serde_json::to_value(args) {
        for (k, v) in m {
            let text = match v {
                Value::Null => continue,
                Value::String(s) => s,
                Value::Number(n) => match n.as_f64() {
                    Some(x) if n.is_f64() => format!("{x}"),
                    _ => n.to_string(),
                },
                other => other.to_string(),
            };
            map.insert(k, text);
        }
    }
    map.insert("format".into(), format!("{:?}", cli.format).to_lowercase());
    map.insert("workers".into(), cli.workers.to_string());
    map.insert("out_dir".into(), cli.out_dir.display().to_string());
    map
}

struct Ctx<'a> {
    cli: &'a Cli,
    manifest: RunManifest,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn path(&self, suffix: &str) -> PathBuf {
        self.cli.out_dir.join(format!("{}{suffix}", self.manifest.command))
    }

    /// Writes the main report and returns its rendered text.
    fn emit(&mut self, report: &Report) -> Result<String> {
        let format = self.cli.format;
        self.emit_as(report, format, &format!(".{}", format.extension()))
    }

    fn emit_as(&mut self, report: &Report, format: Format, suffix: &str) -> Result<String> {
        let path = self.path(suffix);
        let text = report.render(format)?;
        report::write_text(&path, &text)?;
        self.manifest.record_output(&path);
        Ok(text)
    }

    fn print(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.err, "{text}");
    }
}

fn mc_config(cli: &Cli, mc: &McArgs) -> Result<McConfig> {
    let grid = match &mc.alpha_grid {
        Some(g) => g.clone(),
        None => {
            if !(mc.t > 0.0 && mc.t.is_finite()) {
                return Err(Error::invalid("t", "must be positive"));
            }
            estimation::default_alpha_grid(mc.t)
        }
    };
    let mut cfg = McConfig::new(mc.samples, cli.seed)
        .with_workers(cli.workers)
        .with_alpha_grid(grid);
    if let Some(r) = mc.r_max {
        cfg = cfg.with_r_max(r);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bound_columns(window: Option<u64>) -> Vec<&'static str> {
    let mut cols = SWEEP_CSV_HEADER.to_vec();
    if window.is_some() {
        cols.extend(["certified.side", "certified.window_factor", "certified.value"]);
    }
    cols
}

fn run_command(ctx: &mut Ctx) -> Result<()> {
    let cli = ctx.cli;
    match &cli.command {
        Command::EvalPoint(a) => {
            if a.x.len() != a.d {
                return Err(Error::DimensionMismatch {
                    expected: a.d,
                    got: a.x.len(),
                });
            }
            let measure = if a.lattice {
                Measure::Lattice(LatticeWindow::infinite(a.d)?)
            } else if let (Some(lo), Some(hi)) = (a.window_lo, a.window_hi) {
                Measure::Lattice(LatticeWindow::bounded(a.d, lo, hi)?)
            } else if let Some(path) = &a.measure {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)?
            } else {
                return Err(Error::invalid("measure", "give --lattice, --window-lo/--window-hi or --measure"));
            };
            let r_max = a.r_max.unwrap_or_else(|| maxfun::default_r_max(a.d));
            let res = maxfun::eval_max_measure(&measure, &a.x, r_max)?;
            ctx.emit(&Report::object(&res)?)?;
            ctx.print(&format!("{}\n", display(res.value)))
        }
        Command::Claims(a) => {
            let v = a.v.unwrap_or_else(|| {
                let gap = a.claim2_u - a.t.powf(-4.0 / 3.0);
                if gap > 0.0 {
                    gap
                } else {
                    0.5 * a.claim2_u
                }
            });
            let range = (a.range_lo, a.range_hi);
            let mut rows: Vec<ClaimReport> = Vec::new();
            let mut thresholds = Vec::new();
            for kind in &a.which {
                let reports = a
                    .d_schedule
                    .0
                    .iter()
                    .map(|&d| match kind {
                        ClaimKind::Claim1 => probability::claim1_report(a.u, a.t, d),
                        ClaimKind::Claim1Clt => probability::claim1_clt_report(a.u, a.t, d),
                        ClaimKind::Claim2 => probability::claim2_report(a.claim2_u, v, a.t, d),
                        ClaimKind::Claim3 => probability::claim3_report(a.t, d, range),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let th = probability::empirical_threshold(&reports);
                let first = &reports[0];
                thresholds.push(ThresholdRow {
                    claim_id: first.claim_id.as_str(),
                    t: a.t,
                    u: first.u,
                    v: first.v,
                    threshold: th,
                });
                rows.extend(reports);
            }
            let text = ctx.emit(&Report::table(&CLAIM_CSV_HEADER, &rows)?)?;
            let th_report = Report::table(&["claim_id", "t", "u", "v", "threshold"], &thresholds)?;
            let suffix = format!(".thresholds.{}", cli.format.extension());
            ctx.emit_as(&th_report, cli.format, &suffix)?;
            for row in &thresholds {
                let th = row.threshold.map(|d| d.to_string()).unwrap_or_else(|| "none".into());
                ctx.note(&format!("threshold {}: {th}", row.claim_id));
            }
            ctx.print(&text)
        }
        Command::EuExact(a) => {
            let profile = construction::LevelProfile::new(a.u, a.t, a.d)?;
            let exact = probability::eu_measure(&profile)?;
            let (lo, hi) = probability::claim1_bracket(a.t);
            let row = EuRow {
                d: a.d,
                u: a.u,
                t: a.t,
                sigma: profile.sigma,
                k_lo: profile.k_lo,
                r0: profile.r0,
                exact,
                normal_approx: probability::normal_tail(-a.t - 1.0 / a.t, -a.t),
                bracket_lo: lo,
                bracket_hi: hi,
            };
            let text = ctx.emit(&Report::object(&row)?)?;
            ctx.print(&text)
        }
        Command::UnionBound(a) => {
            let u = probability::union_lower_bound(a.d, a.t, (a.range_lo, a.range_hi))?;
            let text = ctx.emit(&Report::object(&u)?)?;
            ctx.print(&text)
        }
        Command::McBound(a) => {
            let cfg = mc_config(cli, &a.mc)?;
            let b = estimation::best_bound(a.d, &cfg, a.mc.window_side)?;
            if b.all_zero {
                ctx.note("warning: every superlevel estimate was zero");
            }
            let mut report = Report::table(&bound_columns(a.mc.window_side), std::slice::from_ref(&b))?;
            report.single = true;
            let text = ctx.emit(&report)?;
            ctx.print(&text)
        }
        Command::Sweep(a) => {
            let cfg = mc_config(cli, &a.mc)?;
            let rows = estimation::sweep_dimensions(&a.d_list.0, &cfg, a.mc.window_side)?;
            let text = ctx.emit(&Report::table(&bound_columns(a.mc.window_side), &rows)?)?;
            ctx.print(&text)
        }
        Command::OnedSearch(a) => {
            let (config, lambda, value, trace) = match &a.evaluate {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let config: OneDConfig = serde_json::from_str(&text)?;
                    let (lambda, value) = oned::best_lambda(&config, a.refinement_budget)?;
                    (config, lambda, value, None)
                }
                None => {
                    let opts = OptimizerOptions {
                        iterations: a.iterations,
                        restarts: a.restarts,
                        seed: cli.seed,
                        workers: cli.workers,
                        patience: a.patience,
                        refinement_budget: a.refinement_budget,
                    };
                    let r = oned::optimize_positions(a.n, &opts)?;
                    (r.config, r.lambda, r.value, Some(r.trace))
                }
            };
            let summary = OnedSummary {
                n: config.len(),
                lambda,
                value,
                ceiling: oned::c1_exact(),
                reference_lower: oned::C1_REFERENCE_LOWER,
                exceeds_three_halves: value > 1.5,
            };
            ctx.emit(&Report::object(&summary)?)?;
            if let Some(trace) = trace {
                ctx.emit_as(&Report::table(&TRACE_CSV_HEADER, &trace)?, Format::Csv, ".trace.csv")?;
            }
            ctx.emit_as(&Report::object(&config)?, Format::Json, ".config.json")?;
            ctx.print(&format!("{}\n", display(value)))
        }
        Command::MsBound(a) => {
            let value = construction::ms_bound(a.d)?;
            ctx.emit(&Report::object(&MsRow { d: a.d, ms_bound: value })?)?;
            ctx.print(&format!("{}\n", display(value)))
        }
        Command::Certificate(a) => {
            let cert = match a.d {
                None => construction::theorem_certificate(a.t)?,
                Some(d) => construction::finite_certificate(d, a.t, (a.range_lo, a.range_hi), a.window_side)?,
            };
            if !cert.bound.is_finite() {
                return Err(Error::invalid("t", "certificate overflows; use a smaller t"));
            }
            let text = ctx.emit(&Report::object(&cert)?)?;
            ctx.print(&text)
        }
    }
}

/// Round-trip display of a scalar result.
fn display(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

#[derive(Serialize)]
struct ThresholdRow {
    claim_id: &'static str,
    t: f64,
    u: Option<f64>,
    v: Option<f64>,
    threshold: Option<usize>,
}

#[derive(Serialize)]
struct EuRow {
    d: usize,
    u: f64,
    t: f64,
    sigma: f64,
    k_lo: f64,
    r0: f64,
    exact: f64,
    normal_approx: f64,
    bracket_lo: f64,
    bracket_hi: f64,
}

#[derive(Serialize)]
struct OnedSummary {
    n: usize,
    lambda: f64,
    value: f64,
    ceiling: f64,
    reference_lower: f64,
    exceeds_three_halves: bool,
}

#[derive(Serialize)]
struct MsRow {
    d: usize,
    ms_bound: f64,
}

fn command_parameters(cli: &Cli) -> BTreeMap<String, String> {
    match &cli.command {
        Command::EvalPoint(a) => parameters(cli, a),
        Command::Claims(a) => parameters(cli, a),
        Command::EuExact(a) => parameters(cli, a),
        Command::UnionBound(a) => parameters(cli, a),
        Command::McBound(a) => parameters(cli, a),
        Command::Sweep(a) => parameters(cli, a),
        Command::OnedSearch(a) => parameters(cli, a),
        Command::MsBound(a) => parameters(cli, a),
        Command::Certificate(a) => parameters(cli, a),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code: 0 on success, 1 on runtime failure, 2 on usage errors.
pub fn run_with(argv: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return if code == 0 { 0 } else { 2 };
        }
    };
    let manifest = RunManifest::start(cli.command.name(), command_parameters(&cli), Some(cli.seed));
    let mut ctx = Ctx {
        cli: &cli,
        manifest,
        out,
        err,
    };
    let result = run_command(&mut ctx);
    ctx.manifest.finish(result.as_ref().err());
    let written = ctx.manifest.write(&cli.out_dir);
    let mut code = 0;
    if let Err(e) = &result {
        let _ = writeln!(ctx.err, "error: {e}");
        code = exit_code(e);
    }
    if let Err(e) = written {
        let _ = writeln!(ctx.err, "error: cannot write manifest: {e}");
        if code == 0 {
            code = 1;
        }
    }
    code
}

/// Entry point for the binary.
pub fn main_with_args(argv: impl IntoIterator<Item = String>) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv.into_iter().collect(), &mut stdout.lock(), &mut stderr.lock())
}

/// Report file written by `command` into `dir` for `format`.
pub fn report_path(dir: &Path, command: &str, format: Format) -> PathBuf {
    dir.join(format!("{command}.{}", format.extension()))
}
