//! Bit-stable CSV/JSON reports and run manifests.
//!
//! Every float is rounded to 12 significant digits and then printed in the
//! shortest form that parses back to the rounded value. JSON objects have
//! sorted keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Report form of a float: rounded, then shortest round-trip text.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let y = round_sig(x);
    let a = y.abs();
    if y == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{y}")
    } else {
        format!("{y:e}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rows of serialized records with a declared CSV column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Value>,
    /// Render as a single JSON object rather than an array.
    pub single: bool,
}

impl Report {
    /// Rows with explicit columns; nested fields are addressed as `outer.inner`.
    pub fn table<T: Serialize>(columns: &[&str], rows: &[T]) -> Result<Self> {
        Ok(Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: rows.iter().map(stable_value).collect::<Result<_>>()?,
            single: false,
        })
    }

    /// One record; CSV columns are its flattened keys in sorted order.
    pub fn object<T: Serialize>(record: &T) -> Result<Self> {
        let value = stable_value(record)?;
        let mut flat = BTreeMap::new();
        flatten("", &value, &mut flat);
        Ok(Self {
            columns: flat.into_keys().collect(),
            rows: vec![value],
            single: true,
        })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            let mut flat = BTreeMap::new();
            flatten("", row, &mut flat);
            w.write_record(self.columns.iter().map(|c| flat.get(c).map(String::as_str).unwrap_or("")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn render_json(&self) -> Result<String> {
        let value = if self.single && self.rows.len() == 1 {
            self.rows[0].clone()
        } else {
            Value::Array(self.rows.clone())
        };
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }
}

/// Serializes `record` with floats rounded to report precision.
pub fn stable_value<T: Serialize>(record: &T) -> Result<Value> {
    Ok(round_value(serde_json::to_value(record)?))
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_value(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (_, Some(i)) => i.to_string(),
            _ => format_number(n.as_f64().expect("numeric")),
        },
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => unreachable!("objects are flattened"),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(m) => {
            for (k, inner) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, inner, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), cell(v));
        }
    }
}

/// Writes `report` to `path`, creating parent directories.
pub fn write_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    write_text(path, &report.render(format)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Success,
    Failure,
}

/// What was run, with which inputs, and which files it produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub artifact_version: String,
    pub started: String,
    pub finished: Option<String>,
    pub outputs: Vec<String>,
    pub status: RunStatus,
    pub error: Option<String>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, parameters: BTreeMap<String, String>, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            parameters,
            seed,
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            started: now(),
            finished: None,
            outputs: Vec::new(),
            status: RunStatus::Running,
            error: None,
        }
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(&mut self, error: Option<&Error>) {
        self.finished = Some(now());
        match error {
            None => self.status = RunStatus::Success,
            Some(e) => {
                self.status = RunStatus::Failure;
                self.error = Some(e.to_string());
            }
        }
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.manifest.json", self.command))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = self.path_in(dir);
        write_text(&path, &(serde_json::to_string_pretty(&stable_value(self)?)? + "\n"))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(1.5), "1.5");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(4.325201610466994e-5), "4.32520161047e-5");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-2.5e20), "-2.5e20");
        for x in [1.2345678901234567, 9.87654321e-9, 123456.789] {
            let back: f64 = format_number(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11);
        }
    }

    #[derive(Serialize)]
    struct Row {
        b: f64,
        a: u32,
        nested: Inner,
        list: Vec<f64>,
        missing: Option<f64>,
    }

    #[derive(Serialize)]
    struct Inner {
        z: bool,
    }

    fn row() -> Row {
        Row {
            b: 2.0 / 3.0,
            a: 7,
            nested: Inner { z: true },
            list: vec![0.125, 0.25],
            missing: None,
        }
    }

    #[test]
    fn csv_and_json_rendering() {
        let r = Report::table(&["a", "b", "nested.z", "list", "missing"], &[row(), row()]).unwrap();
        let csv = r.render_csv().unwrap();
        assert_eq!(csv, "a,b,nested.z,list,missing\n7,0.666666666667,true,0.125;0.25,\n7,0.666666666667,true,0.125;0.25,\n");
        let json = r.render_json().unwrap();
        assert!(json.starts_with('['));
        let o = Report::object(&row()).unwrap();
        assert_eq!(o.columns, vec!["a", "b", "list", "missing", "nested.z"]);
        let json = o.render_json().unwrap();
        let keys: Vec<&str> = json.lines().filter_map(|l| l.trim().strip_prefix('"')?.split('"').next()).collect();
        assert_eq!(keys, vec!["a", "b", "list", "missing", "nested", "z"]);
        assert_eq!(o.render_json().unwrap(), json);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::start("ms-bound", BTreeMap::from([("d".into(), "1".into())]), None);
        m.record_output(&dir.path().join("ms-bound.csv"));
        m.finish(None);
        let path = m.write(dir.path()).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["status"], "success");
        assert_eq!(v["parameters"]["d"], "1");
        assert!(v["finished"].is_string());
    }
}
