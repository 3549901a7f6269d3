//! Result files: JSON with 17 significant digits, CSV with a header row, and
//! the violation list.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

/// Every double as `{:.16e}`, which round-trips.
struct SigFormatter;

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", sci(value))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{}", sci(value as f64))
    }
}

pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json(v: &impl Serialize) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter);
    v.serialize(&mut ser).expect("JSON serialization of plain data");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: String,
    pub expected: f64,
    pub got: f64,
    pub tolerance: f64,
}

/// Collects violations; every check returns whether it passed.
#[derive(Debug, Default)]
pub struct Checks {
    pub violations: Vec<Violation>,
}

impl Checks {
    fn push(&mut self, check: &str, expected: f64, got: f64, tolerance: f64, ok: bool) -> bool {
        if !ok {
            self.violations.push(Violation {
                check: check.to_string(),
                expected,
                got,
                tolerance,
            });
        }
        ok
    }

    /// |got − expected| ≤ tol·|expected|
    pub fn rel(&mut self, check: &str, expected: f64, got: f64, tol: f64) -> bool {
        let ok = (got - expected).abs() <= tol * expected.abs();
        self.push(check, expected, got, tol, ok)
    }

    /// |got − expected| ≤ tol
    pub fn abs(&mut self, check: &str, expected: f64, got: f64, tol: f64) -> bool {
        let ok = (got - expected).abs() <= tol;
        self.push(check, expected, got, tol, ok)
    }

    /// got ≤ limit
    pub fn at_most(&mut self, check: &str, got: f64, limit: f64) -> bool {
        self.push(check, 0.0, got, limit, got <= limit)
    }

    /// got ≥ limit
    pub fn at_least(&mut self, check: &str, got: f64, limit: f64) -> bool {
        self.push(check, limit, got, limit, got >= limit)
    }

    pub fn flag(&mut self, check: &str, ok: bool) -> bool {
        self.push(check, 1.0, if ok { 1.0 } else { 0.0 }, 0.0, ok)
    }

    pub fn extend(&mut self, other: Checks) {
        self.violations.extend(other.violations);
    }
}

/// A CSV table whose numeric cells use 17 significant digits.
pub struct Csv {
    text: String,
}

pub enum Cell<'a> {
    Num(f64),
    Int(usize),
    Text(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = match c {
                Cell::Num(v) => write!(self.text, "{}", sci(*v)),
                Cell::Int(v) => write!(self.text, "{v}"),
                Cell::Text(s) => write!(self.text, "{s}"),
            };
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, &self.text)
    }
}

/// The top-level report object.
#[derive(Serialize)]
pub struct Report<'a, P: Serialize> {
    pub command: &'a str,
    pub params: &'a P,
    pub results: Value,
    pub violations: &'a [Violation],
}
