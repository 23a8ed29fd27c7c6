//! Versioned CSV rows for scans, checks and measurements.

use std::io::Write;
use std::path::Path;

use hardy_lab::experiments::{Check, LemmaReport};
use hardy_lab::norms::{ApproachGrid, DivergenceClass, DivergenceVerdict, NormScan, ScanPoint};
use hardy_lab::quadrature::{IntegralEstimate, Method};
use hardy_lab::LabError;

use crate::error::{CliError, Result};

pub const SCHEMA: &str = "hardy-lab/1";

pub const HEADER: [&str; 13] = [
    "schema", "experiment_id", "lemma_id", "case", "p", "grid_param", "value", "stderr", "verdict", "rate", "r2",
    "pass", "seed",
];

/// Verdict column of rows that record a scalar check.
pub const CHECK: &str = "check";
/// Verdict column of rows that record a measurement.
pub const MEASURE: &str = "measure";

const TRUNCATED: &str = ";truncated";

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment_id: String,
    pub lemma_id: String,
    pub case: String,
    pub p: f64,
    pub grid_param: f64,
    pub value: f64,
    pub stderr: f64,
    pub verdict: String,
    pub rate: f64,
    pub r2: f64,
    pub pass: bool,
    pub seed: u64,
}

/// Seventeen significant digits, or `overflow` for non-finite values.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "overflow".into()
    }
}

pub fn parse_number(s: &str) -> Result<f64> {
    if s == "overflow" {
        return Ok(f64::INFINITY);
    }
    s.parse().map_err(|_| CliError::usage(format!("invalid number '{s}' in CSV")))
}

impl CsvRow {
    pub fn fields(&self) -> [String; 13] {
        [
            SCHEMA.into(),
            self.experiment_id.clone(),
            self.lemma_id.clone(),
            self.case.clone(),
            format_number(self.p),
            format_number(self.grid_param),
            format_number(self.value),
            format_number(self.stderr),
            self.verdict.clone(),
            format_number(self.rate),
            format_number(self.r2),
            self.pass.to_string(),
            self.seed.to_string(),
        ]
    }

    pub fn from_fields(f: &csv::StringRecord) -> Result<Self> {
        if f.len() != HEADER.len() || &f[0] != SCHEMA {
            return Err(CliError::usage(format!("row does not follow schema {SCHEMA}")));
        }
        Ok(Self {
            experiment_id: f[1].into(),
            lemma_id: f[2].into(),
            case: f[3].into(),
            p: parse_number(&f[4])?,
            grid_param: parse_number(&f[5])?,
            value: parse_number(&f[6])?,
            stderr: parse_number(&f[7])?,
            verdict: f[8].into(),
            rate: parse_number(&f[9])?,
            r2: parse_number(&f[10])?,
            pass: f[11].parse().map_err(|_| CliError::usage("invalid pass flag"))?,
            seed: f[12].parse().map_err(|_| CliError::usage("invalid seed"))?,
        })
    }

    pub fn is_scan_point(&self) -> bool {
        DivergenceClass::parse(&self.verdict).is_ok()
    }
}

/// Identifies a row group.
#[derive(Debug, Clone)]
pub struct RowContext<'a> {
    pub experiment_id: &'a str,
    pub lemma_id: &'a str,
    pub seed: u64,
}

impl RowContext<'_> {
    fn row(&self, case: String, p: f64, grid_param: f64, value: f64, stderr: f64, verdict: &str) -> CsvRow {
        CsvRow {
            experiment_id: self.experiment_id.into(),
            lemma_id: self.lemma_id.into(),
            case,
            p,
            grid_param,
            value,
            stderr,
            verdict: verdict.into(),
            rate: 0.0,
            r2: 0.0,
            pass: true,
            seed: self.seed,
        }
    }

    /// One row per scan point. The case label carries the grid in brackets,
    /// followed by `;truncated` when the scan stopped early.
    pub fn scan_rows(&self, case: &str, scan: &NormScan, verdict: &DivergenceVerdict, pass: bool) -> Vec<CsvRow> {
        let marker = if scan.failure.is_some() { TRUNCATED } else { "" };
        let label = format!("{case} [{}{marker}]", scan.grid);
        scan.points
            .iter()
            .map(|pt| {
                let value = if pt.estimate.overflowed { f64::INFINITY } else { pt.estimate.value };
                let mut row = self.row(label.clone(), scan.p, pt.param, value, pt.estimate.stderr, verdict.class.name());
                row.rate = verdict.rate;
                row.r2 = verdict.r2;
                row.pass = pass;
                row
            })
            .collect()
    }

    pub fn check_row(&self, check: &Check) -> CsvRow {
        let mut row = self.row(check.name.clone(), 0.0, check.bound, check.value, 0.0, CHECK);
        row.pass = check.pass;
        row
    }

    /// A named value with no pass/fail; `p` is zero.
    pub fn measurement_row(&self, name: &str, value: f64, stderr: f64) -> CsvRow {
        self.row(name.into(), 0.0, 0.0, value, stderr, MEASURE)
    }

    pub fn report_rows(&self, report: &LemmaReport) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for c in &report.cases {
            rows.extend(self.scan_rows(&c.case, &c.scan, &c.verdict, c.pass));
        }
        rows.extend(report.checks.iter().map(|c| self.check_row(c)));
        rows.extend(report.measurements.iter().map(|(k, v)| self.measurement_row(k, *v, 0.0)));
        rows
    }
}

pub fn write_rows<W: Write>(rows: &[CsvRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()
}

pub fn write_rows_to(rows: &[CsvRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::unwritable(path, e))?;
    write_rows(rows, std::io::BufWriter::new(file)).map_err(|e| CliError::unwritable(path, e))
}

pub fn read_rows(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::usage(format!("unreadable CSV header: {e}")))?;
    if header.iter().ne(HEADER) {
        return Err(CliError::usage("CSV header does not match the schema"));
    }
    r.records()
        .map(|rec| CsvRow::from_fields(&rec.map_err(|e| CliError::usage(format!("unreadable CSV row: {e}")))?))
        .collect()
}

/// Rebuilds the scan behind consecutive rows of one case from their
/// `(grid_param, value, stderr)` columns; `verdict_of` on the result gives
/// back the verdict column.
pub fn scan_from_rows(rows: &[&CsvRow]) -> Result<NormScan> {
    let first = rows.first().ok_or_else(|| CliError::usage("no rows"))?;
    let grid_text = first
        .case
        .rsplit_once('[')
        .and_then(|(_, g)| g.strip_suffix(']'))
        .ok_or_else(|| CliError::usage(format!("case '{}' carries no grid", first.case)))?;
    let (grid_text, truncated) = match grid_text.strip_suffix(TRUNCATED) {
        Some(g) => (g, true),
        None => (grid_text, false),
    };
    let grid = ApproachGrid::parse(grid_text)?;
    let points = grid
        .ks()
        .into_iter()
        .zip(rows)
        .map(|(k, r)| {
            let overflowed = !r.value.is_finite();
            let value = if overflowed { f64::MAX } else { r.value };
            ScanPoint { k, param: r.grid_param, estimate: IntegralEstimate::new(value, r.stderr, 1, Method::Deterministic, overflowed) }
        })
        .collect();
    Ok(NormScan {
        p: first.p,
        grid,
        points,
        function: first.case.clone(),
        surface: String::new(),
        failure: truncated.then(|| LabError::InvalidParameter("scan truncated".into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(f64::INFINITY), "overflow");
        assert_eq!(format_number(f64::NAN), "overflow");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(parse_number(&format_number(x)).unwrap(), x);
        }
    }

    #[test]
    fn rows_round_trip() {
        let ctx = RowContext { experiment_id: "scan", lemma_id: "-", seed: 7 };
        let row = ctx.measurement_row("kappa, \"quoted\"", 0.25, 1e-3);
        let mut buf = Vec::new();
        write_rows(std::slice::from_ref(&row), &mut buf).unwrap();
        let back = read_rows(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, vec![row]);
    }
}
