//! Machine-readable run reports.
//!
//! Floats are written with 17 significant digits so every value round-trips
//! to the same double. Apart from `duration_seconds`, a report is a pure
//! function of its configuration.

use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|measured - target| <= tolerance`
    AbsDiff,
    /// `|measured / target - 1| <= tolerance`
    RelDiff,
    /// `measured <= target + tolerance`
    AtMost,
    /// `measured >= target - tolerance`
    AtLeast,
}

impl Comparison {
    pub fn holds(self, measured: f64, target: f64, tolerance: f64) -> bool {
        match self {
            Self::AbsDiff => (measured - target).abs() <= tolerance,
            Self::RelDiff => target != 0.0 && (measured / target - 1.0).abs() <= tolerance,
            Self::AtMost => measured <= target + tolerance,
            Self::AtLeast => measured >= target - tolerance,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AbsDiff => "abs_diff",
            Self::RelDiff => "rel_diff",
            Self::AtMost => "at_most",
            Self::AtLeast => "at_least",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        Self {
            name: name.into(),
            measured,
            target,
            tolerance,
            comparison,
            pass: comparison.holds(measured, target, tolerance),
        }
    }

    /// Name without any `[...]` qualifier, used for tolerance overrides.
    pub fn base_name(&self) -> &str {
        base_name(&self.name)
    }
}

pub fn base_name(name: &str) -> &str {
    let name = name.rsplit('/').next().unwrap_or(name);
    name.split('[').next().unwrap_or(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: C,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub overall_pass: bool,
    pub duration_seconds: f64,
}

impl<C: Serialize> Report<C> {
    pub fn new(config: C) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config,
            tables: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            overall_pass: true,
            duration_seconds: 0.0,
        }
    }

    pub fn finish(&mut self) {
        self.overall_pass = self.checks.iter().all(|c| c.pass);
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn write_json<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        write_json(out, self)?;
        writeln!(out)
    }

    pub fn to_json_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_json(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// One row per check.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "measured", "target", "tolerance", "comparison", "pass"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                fmt_f64(c.measured),
                fmt_f64(c.target),
                fmt_f64(c.tolerance),
                c.comparison.as_str().to_string(),
                c.pass.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Scientific notation with 17 significant digits; non-finite values as text.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

struct RoundTripFloats;

impl serde_json::ser::Formatter for RoundTripFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as compact JSON with round-trip float formatting.
/// Non-finite floats become `null`.
pub fn write_json<W: Write + ?Sized, T: Serialize + ?Sized>(out: &mut W, value: &T) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(out, RoundTripFloats);
    value.serialize(&mut ser).map_err(io::Error::other)
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    write_json(&mut buf, value).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
