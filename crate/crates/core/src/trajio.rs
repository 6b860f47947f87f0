//! Trajectory CSV files and `key=value` run summaries.
//!
//! Numbers are written with 17 significant digits so that reading a file
//! back reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::sim::{Metrics, Sample, TrajectoryRecord};

#[derive(Debug, Error)]
pub enum TrajIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl TrajIoError {
    fn parse(line: u64, message: impl Into<String>) -> Self {
        TrajIoError::Parse { line, message: message.into() }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        TrajIoError::Io { path: path.display().to_string(), source }
    }
}

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn sample_fields(s: &Sample) -> Vec<String> {
    let mut row = vec![format_f64(s.t)];
    for block in [&s.x, &s.z, &s.xhat, &s.xi, &s.xi_hat] {
        row.extend(block.iter().map(|&v| format_f64(v)));
    }
    row.push(format_f64(s.v));
    row.push(flag(s.proj_active).into());
    row.push(flag(s.clamped).into());
    row.push(s.lyapunov.map(format_f64).unwrap_or_default());
    row
}

pub fn write_csv<W: Write>(traj: &TrajectoryRecord, out: W) -> Result<(), TrajIoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(traj.header())?;
    for s in &traj.samples {
        w.write_record(sample_fields(s))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn csv_string(traj: &TrajectoryRecord) -> String {
    let mut buf = Vec::new();
    write_csv(traj, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

pub fn write_csv_file(traj: &TrajectoryRecord, path: &Path) -> Result<(), TrajIoError> {
    let f = File::create(path).map_err(|e| TrajIoError::io(path, e))?;
    write_csv(traj, io::BufWriter::new(f))
}

/// Recovers `(state_dim, chain_len)` from a header and checks it is exactly
/// the one [`TrajectoryRecord::header`] would produce.
fn dims_from_header(header: &[&str]) -> Result<(usize, usize), TrajIoError> {
    let count = |prefix: &str| {
        header.iter().filter(|h| h.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok())).count()
    };
    let (n, m) = (count("x"), count("z"));
    let expected = TrajectoryRecord::new(n, m).header();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(TrajIoError::parse(1, format!("unexpected header, expected `{}`", expected.join(","))));
    }
    Ok((n, m))
}

fn parse_number(field: &str, line: u64, column: &str) -> Result<f64, TrajIoError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| TrajIoError::parse(line, format!("column {column}: `{field}` is not a number")))
}

fn parse_flag(field: &str, line: u64, column: &str) -> Result<bool, TrajIoError> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(TrajIoError::parse(line, format!("column {column}: `{other}` is not a 0/1 flag"))),
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<TrajectoryRecord, TrajIoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_parse_error(e, 1))?,
        None => return Err(TrajIoError::parse(1, "empty file")),
    };
    let names: Vec<&str> = header.iter().collect();
    let (n, m) = dims_from_header(&names)?;
    let names: Vec<String> = names.into_iter().map(String::from).collect();

    let mut traj = TrajectoryRecord::new(n, m);
    for (row_idx, rec) in records.enumerate() {
        let fallback_line = row_idx as u64 + 2;
        let rec = rec.map_err(|e| csv_parse_error(e, fallback_line))?;
        let line = rec.position().map_or(fallback_line, |p| p.line());
        if rec.len() != names.len() {
            return Err(TrajIoError::parse(line, format!("expected {} fields, found {}", names.len(), rec.len())));
        }
        let mut nums = Vec::with_capacity(1 + 4 * n + m + 1);
        for (i, field) in rec.iter().take(names.len() - 3).enumerate() {
            nums.push(parse_number(field, line, &names[i])?);
        }
        let k = names.len() - 3;
        let proj_active = parse_flag(&rec[k], line, &names[k])?;
        let clamped = parse_flag(&rec[k + 1], line, &names[k + 1])?;
        let lyapunov = match rec[k + 2].trim() {
            "" => None,
            f => Some(parse_number(f, line, "V")?),
        };

        let mut it = nums.into_iter();
        let mut take = |len: usize| -> Vec<f64> { it.by_ref().take(len).collect() };
        let t = take(1)[0];
        let x = take(n);
        let z = take(m);
        let xhat = take(n);
        let xi = take(n);
        let xi_hat = take(n);
        let v = take(1)[0];
        traj.samples.push(Sample { t, x, z, xhat, xi, xi_hat, v, proj_active, clamped, lyapunov });
    }
    Ok(traj)
}

fn csv_parse_error(e: csv::Error, fallback_line: u64) -> TrajIoError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    TrajIoError::parse(line, e.to_string())
}

pub fn read_csv_file(path: &Path) -> Result<TrajectoryRecord, TrajIoError> {
    let f = File::open(path).map_err(|e| TrajIoError::io(path, e))?;
    read_csv(io::BufReader::new(f))
}

/// Error record attached to a failed run.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub name: String,
    pub message: String,
}

/// Machine-readable outcome of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub rho: f64,
    pub rows: usize,
    pub metrics: Metrics,
    pub error: Option<ErrorRecord>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else {
            0
        }
    }

    pub fn to_text(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("label", self.label.clone());
        kv("rho", format_f64(self.rho));
        kv("rows", self.rows.to_string());
        kv("peak_xhat", format_f64(m.peak_xhat));
        kv("eps", format_f64(m.eps));
        kv("conv_time_eps", m.conv_time.map_or_else(|| "none".into(), format_f64));
        kv("final_norm", format_f64(m.final_norm));
        kv("max_abs_v", format_f64(m.max_abs_v));
        if let Some(d) = m.recovery_dev {
            kv("recovery_dev", format_f64(d));
        }
        match &self.error {
            None => kv("status", "ok".into()),
            Some(e) => {
                kv("status", "error".into());
                kv("error", e.name.clone());
                kv("error_message", e.message.replace('\n', " "));
            }
        }
        s
    }

    pub fn write_file(&self, path: &Path) -> Result<(), TrajIoError> {
        std::fs::write(path, self.to_text()).map_err(|e| TrajIoError::io(path, e))
    }
}

/// Parses `key=value` lines; blank lines are skipped.
pub fn parse_summary(text: &str) -> Result<BTreeMap<String, String>, TrajIoError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| TrajIoError::parse(i as u64 + 1, format!("`{line}` is not key=value")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> Sample {
        Sample {
            t,
            x: vec![0.1 * t, -1.0 / 3.0],
            z: vec![std::f64::consts::PI],
            xhat: vec![1e-300, -0.0],
            xi: vec![2.0, 1e22],
            xi_hat: vec![f64::MIN_POSITIVE, 5.5],
            v: -t,
            proj_active: t > 0.0,
            clamped: false,
            lyapunov: if t > 0.0 { Some(0.25) } else { None },
        }
    }

    fn record() -> TrajectoryRecord {
        let mut r = TrajectoryRecord::new(2, 1);
        r.samples = vec![sample(0.0), sample(0.001), sample(0.002)];
        r
    }

    #[test]
    fn header_is_exact() {
        let text = csv_string(&record());
        assert_eq!(
            text.lines().next().unwrap(),
            "t,x1,x2,z1,xhat1,xhat2,xi1,xi2,xihat1,xihat2,v,proj_active,clamped,V"
        );
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let r = record();
        let back = read_csv(csv_string(&r).as_bytes()).unwrap();
        assert_eq!(back.state_dim, 2);
        assert_eq!(back.chain_len, 1);
        for (a, b) in r.samples.iter().zip(&back.samples) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            for (u, w) in a.xhat.iter().zip(&b.xhat) {
                assert_eq!(u.to_bits(), w.to_bits());
            }
        }
        assert_eq!(back, r);
    }

    #[test]
    fn empty_v_column() {
        let text = csv_string(&record());
        let first_row = text.lines().nth(1).unwrap();
        assert!(first_row.ends_with(",0,0,"));
    }

    #[test]
    fn malformed_row_names_line() {
        let mut text = csv_string(&record());
        text = text.replacen("0,0,\n", "0,0,\nnot,a,row\n", 1);
        match read_csv(text.as_bytes()) {
            Err(TrajIoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_number_names_line() {
        let text = csv_string(&record());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = lines[3].replacen(",", ",abc", 1);
        let bad = lines.join("\n");
        let err = read_csv(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, TrajIoError::Parse { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("line 4"));
    }

    #[test]
    fn wrong_header_rejected() {
        let err = read_csv("t,x1,foo\n0,0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TrajIoError::Parse { line: 1, .. }));
        assert!(matches!(read_csv("".as_bytes()), Err(TrajIoError::Parse { line: 1, .. })));
    }

    #[test]
    fn summary_round_trip() {
        let s = RunSummary {
            label: "fig2a".into(),
            rho: 0.2,
            rows: 3,
            metrics: Metrics {
                peak_xhat: 1.0,
                eps: 1e-2,
                conv_time: None,
                final_norm: 0.5,
                max_abs_v: 2.0,
                recovery_dev: Some(0.1),
            },
            error: None,
        };
        let kv = parse_summary(&s.to_text()).unwrap();
        assert_eq!(kv["status"], "ok");
        assert_eq!(kv["conv_time_eps"], "none");
        assert_eq!(kv["recovery_dev"].parse::<f64>().unwrap(), 0.1);
        assert!(!kv.contains_key("error"));
        assert_eq!(s.exit_code(), 0);

        let failed =
            RunSummary { error: Some(ErrorRecord { name: "StateEscape".into(), message: "step 3".into() }), ..s };
        let kv = parse_summary(&failed.to_text()).unwrap();
        assert_eq!(kv["error"], "StateEscape");
        assert_eq!(failed.exit_code(), 1);
    }

    #[test]
    fn summary_parse_error_has_line() {
        assert!(matches!(parse_summary("a=1\n\nbroken"), Err(TrajIoError::Parse { line: 3, .. })));
    }
}
