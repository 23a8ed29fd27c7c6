//! Plain-text plot data: one whitespace-separated block per scan.

use std::io::Write;
use std::path::Path;

use hardy_lab::norms::{DivergenceVerdict, NormScan};

use crate::error::{CliError, Result};
use crate::report::format_number;

/// One labelled scan with its classification.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub case: String,
    pub scan: NormScan,
    pub verdict: DivergenceVerdict,
}

pub const COLUMNS: &str = "grid_param value x ln_value log_model ln_power_model";

fn number(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        _ => "nan".into(),
    }
}

/// Columns: grid parameter, value, `x = k log 2`, `ln value`, the fitted log
/// model `a + b x` and the fitted power model `ln I = a + s x`. Missing fits
/// print as `nan`; blocks are separated by a blank line.
pub fn write_plot_data<W: Write>(series: &[PlotSeries], mut out: W) -> std::io::Result<()> {
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# case {} p={} verdict={}", s.case, format_number(s.scan.p), s.verdict.class)?;
        writeln!(out, "# {COLUMNS}")?;
        for pt in &s.scan.points {
            let x = pt.k as f64 * std::f64::consts::LN_2;
            let value = (!pt.estimate.overflowed).then_some(pt.estimate.value);
            let ln_value = value.filter(|v| *v > 0.0).map(f64::ln);
            let log_model = s.verdict.log_fit.map(|f| f.intercept + f.slope * x);
            let power_model = s.verdict.power_fit.map(|f| f.intercept + f.slope * x);
            writeln!(
                out,
                "{} {} {} {} {} {}",
                format_number(pt.param),
                value.map_or_else(|| "overflow".into(), format_number),
                format_number(x),
                number(ln_value),
                number(log_model),
                number(power_model),
            )?;
        }
    }
    out.flush()
}

pub fn emit_plot_data(series: &[PlotSeries], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::unwritable(path, e))?;
    write_plot_data(series, std::io::BufWriter::new(file)).map_err(|e| CliError::unwritable(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hardy_lab::norms::{classify, ApproachGrid, ScanPoint};
    use hardy_lab::quadrature::{IntegralEstimate, Method};

    fn series(f: impl Fn(f64) -> f64) -> PlotSeries {
        let grid = ApproachGrid::radial(2, 20).unwrap();
        let points = grid
            .ks()
            .into_iter()
            .map(|k| ScanPoint {
                k,
                param: grid.param(k),
                estimate: IntegralEstimate::new(f(k as f64), 0.0, 1, Method::Deterministic, false),
            })
            .collect();
        let scan = NormScan { p: 2.0, grid, points, function: "model".into(), surface: "model".into(), failure: None };
        PlotSeries { case: "model".into(), verdict: classify(&scan), scan }
    }

    fn rows(s: &PlotSeries) -> Vec<Vec<f64>> {
        let mut buf = Vec::new();
        write_plot_data(std::slice::from_ref(s), &mut buf).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect()
    }

    #[test]
    fn bounded_scans_give_flat_curves() {
        let r = rows(&series(|_| 3.0));
        assert!(r.iter().all(|c| c.len() == 6 && c[1] == 3.0));
    }

    #[test]
    fn log_growth_is_linear_in_x() {
        let r = rows(&series(|k| 1.0 + 2.0 * k));
        for c in &r {
            assert!((c[4] - c[1]).abs() <= 1e-9 * c[1], "{c:?}");
        }
    }

    #[test]
    fn power_growth_is_linear_in_log_columns() {
        let r = rows(&series(|k| 2f64.powf(0.5 * k)));
        for c in &r {
            assert!((c[5] - c[3]).abs() <= 1e-9, "{c:?}");
        }
    }
}
