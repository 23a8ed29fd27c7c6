//! Subcommand bodies: each turns a configuration into CSV rows and a summary.

use std::path::PathBuf;

use hardy_lab::acceptance::{run_criterion, ACCEPTANCE_SEEDS, CRITERIA, LEVI_PAIRS};
use hardy_lab::experiments::{
    containment_suite, default_probe_radii, density_lemma, exponent_label, local_bound_lemma,
    totally_unbounded_witness, verify_lemma_2_2, verify_lemma_4_2, verify_lemma_4_3, verify_lemma_5_1,
    verify_log_rate, Check, LemmaReport, DENSITY_METRIC_K_MAX,
};
use hardy_lab::functions::{parse_function, parse_holomorphic, FunctionExpr, HoloFn};
use hardy_lab::geometry::{
    boundary_dense_sequence, check_levi_estimate, levi_form_min_eigenvalue, parse_domain, sample_levi_pairs,
    DefiningFunction, Domain,
};
use hardy_lab::norms::{
    harmonic_scan, intersection_metric, scan, verdict_of, ApproachGrid, DivergenceClass, IntersectionMetricSpec,
    NormConfig, NormScan, SurfaceSpec,
};
use hardy_lab::quadrature::{BallRegion, LevelMethod};
use hardy_lab::vector::{parse_complex_vector, ComplexVector};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_PASS};
use crate::plot::PlotSeries;
use crate::report::{write_rows_to, CsvRow, RowContext};

pub const LEMMA_IDS: [&str; 7] = ["2.2", "2.2-rate", "2.5", "3.1", "4.2", "4.3", "5.1"];

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub rows: Vec<CsvRow>,
    pub plots: Vec<PlotSeries>,
    pub summary: Vec<String>,
    pub pass: bool,
    pub inconclusive: bool,
    /// Whether the rows still need writing; `reproduce` writes its own files.
    pub emit_csv: bool,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, emit_csv: true, ..Self::default() }
    }

    fn add_report(&mut self, ctx: &RowContext<'_>, report: &LemmaReport) {
        self.rows.extend(ctx.report_rows(report));
        for c in &report.cases {
            self.plots.push(PlotSeries { case: c.case.clone(), scan: c.scan.clone(), verdict: c.verdict.clone() });
            self.summary.push(format!(
                "{} {}: {} (expected {}) {}",
                report.lemma_id,
                c.case,
                c.verdict.class,
                c.expected,
                pass_word(c.pass)
            ));
        }
        for c in &report.checks {
            self.summary.push(format!("{} {}: {} {}", report.lemma_id, c.name, c.value, pass_word(c.pass)));
        }
        for (k, v) in &report.measurements {
            self.summary.push(format!("{} {k} = {v}", report.lemma_id));
        }
        self.pass &= report.pass();
        self.inconclusive |= report.has_inconclusive();
    }

    /// Adds a scan with no expected verdict; it passes unless inconclusive.
    fn add_free_scan(&mut self, ctx: &RowContext<'_>, case: &str, scan: NormScan) -> DivergenceClass {
        let mv = verdict_of(scan);
        let pass = mv.verdict.class != DivergenceClass::Inconclusive;
        self.rows.extend(ctx.scan_rows(case, &mv.scan, &mv.verdict, pass));
        let note = if mv.verdict.note.is_empty() { String::new() } else { format!(" ({})", mv.verdict.note) };
        self.summary.push(format!("{case}: {}{note}", mv.verdict.class));
        self.pass &= pass;
        self.inconclusive |= !pass;
        let class = mv.verdict.class;
        self.plots.push(PlotSeries { case: case.into(), scan: mv.scan, verdict: mv.verdict });
        class
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else if self.inconclusive {
            EXIT_INCONCLUSIVE
        } else {
            EXIT_ERROR
        }
    }
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command.as_str() {
        "norm" => norm(cfg),
        "scan" => scan_command(cfg),
        "local" => local(cfg),
        "levi-check" => levi_check(cfg),
        "lemma" => lemma(cfg),
        "witness" => witness(cfg),
        "density-demo" => density(cfg),
        "metric" => metric(cfg),
        "reproduce" => reproduce(cfg),
        other => Err(CliError::usage(format!("unknown command '{other}'"))),
    }
}

fn norm_config(cfg: &ExperimentConfig) -> Result<NormConfig> {
    let mut nc = NormConfig::with_seed(cfg.seed()?);
    if let Some(count) = cfg.parsed::<usize>("count")? {
        nc.count = count;
    }
    Ok(nc)
}

fn context<'a>(cfg: &'a ExperimentConfig, lemma_id: &'a str) -> Result<RowContext<'a>> {
    Ok(RowContext { experiment_id: &cfg.command, lemma_id, seed: cfg.seed()? })
}

fn domain(cfg: &ExperimentConfig, default: &str) -> Result<Domain> {
    match cfg.raw("domain") {
        Some(d) => Ok(parse_domain(d)?),
        None => match cfg.parsed::<usize>("n")? {
            Some(n) if default.starts_with("ball") => Ok(Domain::unit_ball(n)?),
            _ => Ok(parse_domain(default)?),
        },
    }
}

fn is_ball(d: &Domain) -> bool {
    matches!(d.defining(), DefiningFunction::UnitBall { .. })
}

fn vector(cfg: &ExperimentConfig, key: &str, n: usize) -> Result<ComplexVector> {
    let v = match cfg.raw(key) {
        Some(s) => parse_complex_vector(s)?,
        None => ComplexVector::basis(n, 0),
    };
    if v.dim() != n {
        return Err(CliError::usage(format!("--{key} needs {n} coordinates, got {}", v.dim())));
    }
    Ok(v)
}

fn real_vector(cfg: &ExperimentConfig, key: &str, n: usize) -> Result<Vec<f64>> {
    let v = match cfg.raw(key) {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::usage(format!("invalid {key} entry '{x}'"))))
            .collect::<Result<Vec<_>>>()?,
        None => {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        }
    };
    if v.len() != n {
        return Err(CliError::usage(format!("--{key} needs {n} coordinates, got {}", v.len())));
    }
    Ok(v)
}

fn grid(cfg: &ExperimentConfig) -> Result<Option<ApproachGrid>> {
    cfg.raw("grid").map(|g| Ok(ApproachGrid::parse(g)?)).transpose()
}

fn exponents(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let text = cfg.text("p")?;
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::usage(format!("invalid exponent '{v}'"))))
        .collect()
}

/// Surface and grid for scans of a holomorphic function over a domain.
fn surface_for(cfg: &ExperimentConfig, f: &HoloFn, d: &Domain) -> Result<(SurfaceSpec, ApproachGrid)> {
    let n = d.dim();
    f.check_dim(n)?;
    let requested = grid(cfg)?;
    let level_grid = matches!(requested, Some(ApproachGrid::Level { .. }));
    let restriction = match cfg.raw("radius") {
        Some(_) => Some((vector(cfg, "center", n)?, cfg.required::<f64>("radius")?)),
        None => None,
    };
    if is_ball(d) && !level_grid {
        let surface = match restriction {
            Some((center, radius)) => SurfaceSpec::Cap { center, radius, complement: cfg.flag("complement")? },
            None => SurfaceSpec::Sphere { n },
        };
        let default = if f.zonal_axis(n).is_some() {
            ApproachGrid::default_zonal()
        } else {
            ApproachGrid::default_monte_carlo()
        };
        return Ok((surface, requested.unwrap_or(default)));
    }
    if cfg.flag("complement")? {
        return Err(CliError::usage("--complement applies to caps of the ball only"));
    }
    let method = match cfg.raw("method") {
        Some(m) => LevelMethod::parse(m)?,
        None if d.has_parametrized_levels() => LevelMethod::Parametrized,
        None => LevelMethod::ThinShell,
    };
    let restriction = restriction.map(|(c, r)| BallRegion::new(c, r)).transpose()?;
    Ok((SurfaceSpec::Level { domain: d.clone(), method, restriction }, requested.unwrap_or_else(ApproachGrid::default_level)))
}

fn labelled(s: NormScan) -> (String, NormScan) {
    (format!("{} p={}", s.function, exponent_label(s.p)), s)
}

/// Scans of `--f` at each `--p`, with the function's label.
fn function_scans(cfg: &ExperimentConfig) -> Result<Vec<(String, NormScan)>> {
    let nc = norm_config(cfg)?;
    let ps = exponents(cfg)?;
    match parse_function(cfg.text("f")?)? {
        FunctionExpr::Harmonic { y } => {
            let g = grid(cfg)?.unwrap_or_else(ApproachGrid::default_level);
            if !matches!(g, ApproachGrid::Level { .. }) {
                return Err(CliError::usage("the harmonic kernel needs a level grid"));
            }
            let restriction = cfg.parsed::<f64>("radius")?;
            Ok(ps.iter().map(|&p| labelled(harmonic_scan(&y, p, &g, restriction))).collect())
        }
        FunctionExpr::Holomorphic(f) => {
            let d = domain(cfg, "ball:n=2")?;
            let (surface, g) = surface_for(cfg, &f, &d)?;
            Ok(ps.iter().map(|&p| labelled(scan(&f, p, &g, &surface, &nc))).collect())
        }
    }
}

fn norm(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut scans = function_scans(cfg)?;
    if scans.len() != 1 {
        return Err(CliError::usage("norm takes a single --p"));
    }
    let (case, s) = scans.pop().unwrap();
    let ctx = context(cfg, "-")?;
    let mut out = Outcome::new();
    let (root, err) = s.sup_root();
    let class = out.add_free_scan(&ctx, &case, s);
    let value = match class {
        DivergenceClass::Bounded => root,
        DivergenceClass::LogDivergent | DivergenceClass::PowerDivergent => f64::INFINITY,
        DivergenceClass::Inconclusive => f64::NAN,
    };
    out.rows.push(ctx.measurement_row("norm", value, if value.is_finite() { err } else { 0.0 }));
    out.summary.push(format!("norm = {value}"));
    Ok(out)
}

fn scan_command(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ctx = context(cfg, "-")?;
    let mut out = Outcome::new();
    for (case, s) in function_scans(cfg)? {
        out.add_free_scan(&ctx, &case, s);
    }
    Ok(out)
}

fn local(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.or("n", 2usize)?;
    let zeta = vector(cfg, "zeta", n)?;
    let center = match cfg.raw("center") {
        Some(_) => vector(cfg, "center", n)?,
        None => zeta.clone(),
    };
    let radius = cfg.or("radius", 0.5)?;
    let report = local_bound_lemma(n, &zeta, &center, radius, &norm_config(cfg)?)?;
    let mut out = Outcome::new();
    out.add_report(&context(cfg, "2.5")?, &report);
    Ok(out)
}

fn levi_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = cfg.seed()?;
    let d = domain(cfg, "ball:n=2")?;
    let beta = match cfg.parsed::<f64>("beta")? {
        Some(b) => b,
        None => levi_form_min_eigenvalue(&d, 0.05, 200, seed)? / 3.0,
    };
    let eta = cfg.or("eta", 0.5 * d.diameter())?;
    let pairs = sample_levi_pairs(&d, eta, cfg.or("pairs", LEVI_PAIRS)?, seed)?;
    let r = check_levi_estimate(&d, beta, eta, &pairs)?;
    let mut report = LemmaReport::new("4.levi", &norm_config(cfg)?);
    report.checks.push(Check::at_most("violations", r.violations as f64, 0.0));
    report.checks.push(Check::flag("pairs checked", r.pairs_checked as f64, r.pairs_checked > 0));
    report.measurements.push(("beta".into(), beta));
    report.measurements.push(("eta".into(), eta));
    report.measurements.push(("worst margin".into(), r.worst_margin));
    let mut out = Outcome::new();
    out.add_report(&context(cfg, "4.levi")?, &report);
    Ok(out)
}

fn lemma(cfg: &ExperimentConfig) -> Result<Outcome> {
    let id = cfg.text("id")?;
    let nc = norm_config(cfg)?;
    let reports = match id {
        "2.2" | "2.2-rate" => {
            let n = cfg.or("n", 2usize)?;
            let zeta = vector(cfg, "zeta", n)?;
            if id == "2.2" {
                vec![verify_lemma_2_2(n, &zeta, cfg.or("q", 1.5)?, &nc)?]
            } else {
                vec![verify_log_rate(n, &zeta, &nc)?]
            }
        }
        "2.5" => return local(cfg),
        "3.1" => containment_suite(&nc)?,
        "4.2" | "4.3" => {
            let d = domain(cfg, "ellipsoid:a=1,2")?;
            let zeta = vector(cfg, "zeta", d.dim())?;
            if id == "4.2" {
                vec![verify_lemma_4_2(&d, &zeta, &nc)?]
            } else {
                vec![verify_lemma_4_3(&d, &zeta, cfg.or("q", 1.5)?, &nc)?]
            }
        }
        "5.1" => {
            let n = cfg.or("n", 3usize)?;
            vec![verify_lemma_5_1(n, &real_vector(cfg, "y", n)?, &nc)?]
        }
        other => {
            return Err(CliError::usage(format!("unknown lemma id '{other}', expected one of {}", LEMMA_IDS.join(", "))))
        }
    };
    let mut out = Outcome::new();
    for r in &reports {
        out.add_report(&context(cfg, id)?, r);
    }
    Ok(out)
}

fn witness(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = parse_holomorphic(cfg.text("f")?)?;
    let n = match (cfg.parsed::<usize>("n")?, f.dim()) {
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => 2,
    };
    f.check_dim(n)?;
    let targets = match cfg.parsed::<usize>("targets")? {
        Some(count) => boundary_dense_sequence(&Domain::unit_ball(n)?, count, cfg.seed()?)?,
        None => f.singular_centers(),
    };
    if targets.is_empty() {
        return Err(CliError::usage("witness needs --targets when the function has no singular points"));
    }
    let bound = cfg.or("bound", 1e3)?;
    let r = totally_unbounded_witness(&f, &targets, bound, &default_probe_radii())?;
    let mut report = LemmaReport::new("witness", &norm_config(cfg)?);
    for (i, e) in r.entries.iter().enumerate() {
        let (modulus, radius) = e.probe.as_ref().map_or((0.0, f64::NAN), |p| (p.modulus, p.r));
        report.checks.push(Check { name: format!("target {}", i + 1), value: modulus, bound, pass: modulus > bound });
        report.measurements.push((format!("target {} radius", i + 1), radius));
    }
    let mut out = Outcome::new();
    out.add_report(&context(cfg, "witness")?, &report);
    Ok(out)
}

fn density(cfg: &ExperimentConfig) -> Result<Outcome> {
    let g = parse_holomorphic(cfg.text_or("g", "poly:z1^2+3"))?;
    let n = cfg.or("n", 2usize)?;
    let report = density_lemma(
        &g,
        n,
        cfg.or("q", 1.5)?,
        cfg.or("delta", 0.01)?,
        cfg.or("targets", 4usize)?,
        cfg.or("terms", 20usize)?,
        &norm_config(cfg)?,
    )?;
    let mut out = Outcome::new();
    out.add_report(&context(cfg, "density")?, &report);
    Ok(out)
}

fn metric(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = parse_holomorphic(cfg.text("f")?)?;
    let g = parse_holomorphic(cfg.text_or("g", "const:0"))?;
    let n = match (cfg.parsed::<usize>("n")?, f.dim().or(g.dim())) {
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => 2,
    };
    let spec = IntersectionMetricSpec::standard(cfg.parsed::<f64>("q")?, cfg.or("terms", 20usize)?)?;
    let diff = f.sub(&g);
    let default = if diff.zonal_axis(n).is_some() {
        ApproachGrid::default_zonal()
    } else {
        ApproachGrid::radial(2, DENSITY_METRIC_K_MAX)?
    };
    let g_grid = grid(cfg)?.unwrap_or(default);
    let m = intersection_metric(&f, &g, &spec, &g_grid, &SurfaceSpec::Sphere { n }, &norm_config(cfg)?)?;
    let ctx = context(cfg, "metric")?;
    let mut out = Outcome::new();
    for t in &m.terms {
        let label = exponent_label(t.p);
        let mut row = ctx.measurement_row(&format!("seminorm p={label}"), t.seminorm, t.seminorm_stderr);
        row.p = t.p;
        row.verdict = t.class.name().into();
        out.rows.push(row);
    }
    out.rows.push(ctx.measurement_row("metric", m.value, m.uncertainty));
    let unresolved = Check::at_most("unresolved terms", m.unresolved as f64, 0.0);
    out.rows.push(ctx.check_row(&unresolved));
    out.summary.push(format!("metric = {} +- {} over {} terms", m.value, m.uncertainty, m.terms.len()));
    if m.unresolved > 0 {
        out.summary.push(format!("{} terms unresolved on {g_grid}", m.unresolved));
        out.pass = false;
        out.inconclusive = true;
    }
    Ok(out)
}

fn id_list<T: std::str::FromStr>(cfg: &ExperimentConfig, key: &str) -> Result<Option<Vec<T>>> {
    cfg.raw(key)
        .map(|s| {
            s.split(',')
                .map(|v| v.trim().parse::<T>().map_err(|_| CliError::usage(format!("invalid {key} entry '{v}'"))))
                .collect()
        })
        .transpose()
}

/// Runs acceptance criteria and writes `criterion_NN.csv` into the output directory.
fn reproduce(cfg: &ExperimentConfig) -> Result<Outcome> {
    let criteria = id_list::<u8>(cfg, "criteria")?.unwrap_or_else(|| CRITERIA.iter().map(|c| c.id).collect());
    let seeds = id_list::<u64>(cfg, "seeds")?.unwrap_or_else(|| ACCEPTANCE_SEEDS.to_vec());
    let dir = PathBuf::from(cfg.text_or("out", "reproduce"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::unwritable(&dir, e))?;
    let mut out = Outcome { emit_csv: false, ..Outcome::new() };
    for id in criteria {
        let experiment = format!("criterion-{id:02}");
        let mut rows = Vec::new();
        for &seed in &seeds {
            let outcome = run_criterion(id, seed)?;
            for r in &outcome.reports {
                let ctx = RowContext { experiment_id: &experiment, lemma_id: &r.lemma_id, seed };
                rows.extend(ctx.report_rows(r));
            }
            if let Some(e) = &outcome.error {
                let ctx = RowContext { experiment_id: &experiment, lemma_id: "-", seed };
                rows.push(ctx.check_row(&Check::flag(format!("error: {e}"), f64::NAN, false)));
            }
            out.summary.push(outcome.summary());
            out.pass &= outcome.pass();
            out.inconclusive |= outcome.has_inconclusive();
        }
        let path = dir.join(format!("criterion_{id:02}.csv"));
        write_rows_to(&rows, &path)?;
        out.summary.push(format!("wrote {}", path.display()));
    }
    Ok(out)
}
