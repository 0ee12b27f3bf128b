//! CSV and JSON report serialization with 17 significant digits.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::Format;
use crate::error::Result;
use crate::experiments::{ConvergenceTable, NonexistenceReport, SweepReport};
use crate::profiles::ProfileKind;
use crate::solver::{SolverConfig, SpectrumResult};
use crate::theory::{Geometry, TheoryReport};
use crate::validation::InvariantCheck;

pub const CSV_HEADER: &str = "lambda,eigenvalue,gap,bracket_lo,bracket_hi,is_bound_state,localization,residual,L_used";

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub lambda: f64,
    pub eigenvalue: f64,
    pub gap: f64,
    pub bracket_lo: Option<f64>,
    pub bracket_hi: Option<f64>,
    pub is_bound_state: bool,
    pub localization: f64,
    pub residual: f64,
    pub l_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileInfo {
    pub kind: ProfileKind,
    pub amplitude: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutput {
    pub result: SpectrumResult,
    pub bracket_lo: Option<f64>,
    pub bracket_hi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Check,
    Solve(SolveOutput),
    Sweep(SweepReport),
    Converge(ConvergenceTable),
    Scan(NonexistenceReport),
    Validate(Vec<InvariantCheck>),
}

/// Everything a command writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub geometry: Option<Geometry>,
    pub profile: Option<ProfileInfo>,
    pub solver: Option<SolverConfig>,
    pub theory: Option<TheoryReport>,
    pub payload: Option<Payload>,
    pub error: Option<String>,
}

impl RunReport {
    /// Rows for the CSV form; `None` for commands without per-λ results.
    pub fn csv_rows(&self) -> Option<Vec<CsvRow>> {
        let bracket = |lambda: f64| {
            let l4 = lambda.powi(4);
            let t = self.theory.as_ref();
            (
                t.and_then(|t| t.c1).map(|c| -c * l4),
                t.and_then(|t| t.c2).map(|c| -c * l4),
            )
        };
        let lambda = self.geometry.map(|g| g.lambda).unwrap_or(f64::NAN);
        match self.payload.as_ref()? {
            Payload::Solve(s) => Some(vec![CsvRow {
                lambda,
                eigenvalue: s.result.eigenvalues[0],
                gap: s.result.gap,
                bracket_lo: s.bracket_lo,
                bracket_hi: s.bracket_hi,
                is_bound_state: s.result.is_bound_state,
                localization: s.result.localization,
                residual: s.result.residual,
                l_used: s.result.l_used,
            }]),
            Payload::Sweep(r) => Some(
                r.rows
                    .iter()
                    .map(|row| CsvRow {
                        lambda: row.lambda,
                        eigenvalue: row.eigenvalue,
                        gap: row.gap,
                        bracket_lo: row.bracket_lo,
                        bracket_hi: row.bracket_hi,
                        is_bound_state: row.is_bound_state,
                        localization: row.localization,
                        residual: row.residual,
                        l_used: row.l_used,
                    })
                    .collect(),
            ),
            Payload::Converge(t) => Some(
                t.rows
                    .iter()
                    .map(|row| {
                        let (lo, hi) = bracket(t.lambda);
                        CsvRow {
                            lambda: t.lambda,
                            eigenvalue: row.eigenvalue,
                            gap: row.gap,
                            bracket_lo: lo,
                            bracket_hi: hi,
                            is_bound_state: row.is_bound_state,
                            localization: row.localization,
                            residual: row.residual,
                            l_used: row.l_used,
                        }
                    })
                    .collect(),
            ),
            Payload::Scan(s) => Some(
                s.rows
                    .iter()
                    .map(|row| {
                        let (lo, hi) = bracket(s.geometry.lambda);
                        CsvRow {
                            lambda: s.geometry.lambda,
                            eigenvalue: row.eigenvalue,
                            gap: row.gap,
                            bracket_lo: lo,
                            bracket_hi: hi,
                            is_bound_state: row.is_bound_state,
                            localization: row.localization,
                            residual: row.residual,
                            l_used: row.l,
                        }
                    })
                    .collect(),
            ),
            Payload::Check | Payload::Validate(_) => None,
        }
    }
}

/// `{:.16e}`, i.e. 17 significant digits; non-finite values print as
/// `NaN`, `inf` or `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[CsvRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            format_float(r.lambda),
            format_float(r.eigenvalue),
            format_float(r.gap),
            opt(r.bracket_lo),
            opt(r.bracket_hi),
            r.is_bound_state,
            format_float(r.localization),
            format_float(r.residual),
            format_float(r.l_used),
        )?;
    }
    Ok(())
}

/// Pretty JSON with every float written as `{:.16e}`.
struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize with 17 significant digits per float. Non-finite floats become
/// `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Render `report` in `format`. CSV is only defined for commands with
/// per-λ rows.
pub fn render(report: &RunReport, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json_string(report),
        Format::Csv => {
            let rows = report.csv_rows().ok_or_else(|| crate::error::Error::Config {
                line: 0,
                reason: format!("csv output is not available for `{}`; use json", report.command),
            })?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            Ok(String::from_utf8(buf).expect("ASCII"))
        }
    }
}

/// Write to `path`, or to stdout when `path` is `None`.
pub fn write_report(report: &RunReport, format: Format, path: Option<&Path>) -> Result<()> {
    let text = render(report, format)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{SweepReport, SweepRow};
    use crate::profiles::make_profile;

    fn row(lambda: f64) -> SweepRow {
        let eigenvalue = std::f64::consts::PI.powi(2) - 7.0 * lambda.powi(4) + 1e-17;
        SweepRow {
            lambda,
            eigenvalue,
            gap: eigenvalue - std::f64::consts::PI.powi(2),
            upper_bound_gap: Some(-lambda.powi(4)),
            bracket_lo: Some(-5.7e6 * lambda.powi(4)),
            bracket_hi: Some(-1096.0 * lambda.powi(4)),
            is_bound_state: true,
            localization: 0.987654321,
            residual: 1.2345e-11,
            l_used: 25.0,
            l_converged: Some(true),
            discretization_error: None,
            error: None,
        }
    }

    fn sweep() -> RunReport {
        let g = Geometry::new(1.0, 2.5, 0.0).unwrap();
        let p = make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap();
        let report = SweepReport {
            geometry: g,
            profile_kind: ProfileKind::Sine,
            amplitude: 1.0,
            config: SolverConfig::defaults_for(&g),
            rows: [0.02, 0.03, 0.05, 0.07, 0.1].map(row).to_vec(),
            fit: None,
            monotone: true,
        };
        RunReport {
            command: "sweep".into(),
            status: "ok".into(),
            exit_code: 0,
            geometry: Some(g),
            profile: Some(ProfileInfo {
                kind: ProfileKind::Sine,
                amplitude: 1.0,
                b: 2.5,
            }),
            solver: Some(report.config),
            theory: Some(TheoryReport::compute(&g.with_lambda(0.1), &p).unwrap()),
            payload: Some(Payload::Sweep(report)),
            error: None,
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_lambda() {
        let text = render(&sweep(), Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 6);
        for line in &lines[1..] {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 9);
            let ev: f64 = cols[1].parse().unwrap();
            let gap: f64 = cols[2].parse().unwrap();
            assert_eq!(gap, ev - std::f64::consts::PI.powi(2));
        }
    }

    #[test]
    fn json_round_trips_field_wise() {
        let report = sweep();
        let text = to_json_string(&report).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.theory, report.theory);
        assert_eq!(back.geometry, report.geometry);
        match (back.payload, report.payload) {
            (Some(Payload::Sweep(a)), Some(Payload::Sweep(b))) => assert_eq!(a, b),
            _ => panic!("payload changed"),
        }
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        let text = to_json_string(&[1.0 / 3.0]).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        let x = 0.1f64 + 0.2;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_is_refused_for_check() {
        let mut r = sweep();
        r.payload = Some(Payload::Check);
        assert!(render(&r, Format::Csv).is_err());
    }
}
