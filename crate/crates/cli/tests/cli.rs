use std::path::Path;
use std::process::{Command, Output};

use hardy_lab::norms::verdict_of;
use hardy_lab::numerics::sphere_area;
use hardy_lab_cli::report::{read_rows, scan_from_rows, CsvRow, CHECK, MEASURE};

fn hardy_lab(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hardy-lab"));
    cmd.args(args).env_remove("HARDY_LAB_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    hardy_lab(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn rows(out: &Output) -> Vec<CsvRow> {
    read_rows(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
}

#[test]
fn ball_thresholds_lemma_passes() {
    let out = run(&["lemma", "--id", "2.2", "--n", "2", "--q", "1.5", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&out);
    assert!(rows.iter().all(|r| r.pass && r.lemma_id == "2.2" && r.seed == 7));
}

#[test]
fn constant_norm_is_the_root_of_the_sphere_area() {
    let out = run(&["norm", "--f", "const:1", "--p", "2", "--domain", "ball:n=2"]);
    assert_eq!(code(&out), 0);
    let rows = rows(&out);
    let norm = rows.iter().find(|r| r.case == "norm" && r.verdict == MEASURE).unwrap();
    let expected = sphere_area(2).sqrt();
    assert!((norm.value - expected).abs() <= 1e-12 * expected, "{} vs {expected}", norm.value);
}

#[test]
fn malformed_input_is_a_usage_error() {
    for args in [
        &["norm", "--f", "bogus", "--p", "2"][..],
        &["norm", "--f", "const:1", "--p", "two"],
        &["norm", "--f", "const:1"],
        &["norm", "--f", "const:1", "--p", "2", "--grid", "radial:9"],
        &["lemma", "--id", "9.9"],
        &["frobnicate"],
        &["norm", "--colour", "red"],
    ] {
        assert_eq!(code(&run(args)), 64, "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "p 2\n").unwrap();
    assert_eq!(code(&run(&["norm", "--config", cfg.to_str().unwrap()])), 64);
    assert_eq!(code(&run(&["norm", "--config", "/no/such/file.cfg"])), 64);
}

#[test]
fn unwritable_paths_exit_73() {
    let base = ["norm", "--f", "const:1", "--p", "2"];
    let mut args = base.to_vec();
    args.extend(["--out", "/no/such/dir/out.csv"]);
    assert_eq!(code(&run(&args)), 73);
    let mut args = base.to_vec();
    args.extend(["--plot", "/no/such/dir/plot.txt"]);
    assert_eq!(code(&run(&args)), 73);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["lemma", "--help"])), 0);
}

#[test]
fn short_grids_are_inconclusive() {
    let out = run(&["scan", "--f", "cauchy:zeta=1,0", "--p", "2", "--grid", "radial:2..5"]);
    assert_eq!(code(&out), 2);
    assert!(rows(&out).iter().all(|r| r.verdict == "Inconclusive" && !r.pass));
}

#[test]
fn failed_checks_exit_1() {
    let out = run(&["witness", "--f", "power:q=1.5;zeta=1,0", "--bound", "1e300"]);
    assert_eq!(code(&out), 1);
    assert!(rows(&out).iter().any(|r| r.verdict == CHECK && !r.pass));
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["scan", "--f", "poly:z1*z2+1", "--p", "2,3", "--count", "4000", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["scan", "--f", "poly:z1*z2+1", "--p", "2,3", "--count", "4000", "--seed", "13"]);
    assert_ne!(a.stdout, other.stdout);
}

fn assert_rederivable(rows: &[CsvRow]) {
    let points: Vec<&CsvRow> = rows.iter().filter(|r| r.is_scan_point()).collect();
    assert!(!points.is_empty());
    let mut checked = 0;
    for group in points.chunk_by(|a, b| a.case == b.case && a.p == b.p && a.seed == b.seed) {
        let scan = scan_from_rows(group).unwrap();
        let verdict = verdict_of(scan).verdict;
        for r in group {
            assert_eq!(verdict.class.name(), r.verdict, "{}", r.case);
            assert_eq!(verdict.rate, r.rate, "{}", r.case);
            assert_eq!(verdict.r2, r.r2, "{}", r.case);
        }
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn verdicts_are_rederivable_from_rows() {
    let out = run(&["scan", "--f", "cauchy:zeta=1,0", "--p", "1.5,2,2.5"]);
    assert_eq!(code(&out), 0);
    assert_rederivable(&rows(&out));
    let out = run(&["lemma", "--id", "5.1"]);
    assert_eq!(code(&out), 0);
    assert_rederivable(&rows(&out));
    let out = run(&["scan", "--f", "poly:z1*z2+1", "--p", "2,3,4", "--count", "4000"]);
    assert_rederivable(&rows(&out));
}

fn seed_of(out: &Output) -> u64 {
    assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    rows(out)[0].seed
}

#[test]
fn flags_override_config_which_overrides_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("norm.cfg");
    std::fs::write(&cfg, "# constant norm\ncommand = norm\nf = const:1\np = 2\nseed = 11\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(seed_of(&run(&["norm", "--config", cfg])), 11);
    assert_eq!(seed_of(&run(&["norm", "--config", cfg, "--seed", "13"])), 13);
    let with_env = hardy_lab(&["norm", "--config", cfg]).env("HARDY_LAB_SEED", "3").output().unwrap();
    assert_eq!(seed_of(&with_env), 11);
    let env_only = hardy_lab(&["norm", "--f", "const:1", "--p", "2"]).env("HARDY_LAB_SEED", "3").output().unwrap();
    assert_eq!(seed_of(&env_only), 3);
    assert_eq!(seed_of(&run(&["norm", "--f", "const:1", "--p", "2"])), 7);
    let bad_env = hardy_lab(&["norm", "--f", "const:1", "--p", "2"]).env("HARDY_LAB_SEED", "x").output().unwrap();
    assert_eq!(code(&bad_env), 64);
    assert_eq!(code(&run(&["scan", "--config", cfg])), 64);
}

#[test]
fn csv_goes_to_the_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("norm.csv");
    let out = run(&["norm", "--f", "const:1", "--p", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("schema,experiment_id,lemma_id,case,p,grid_param,value,stderr,verdict,rate,r2,pass,seed\n"));
    assert!(read_rows(&text).unwrap().iter().all(|r| r.experiment_id == "norm"));
}

fn plot_blocks(path: &Path) -> Vec<(String, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.split("\n\n")
        .map(|block| {
            let mut lines = block.lines();
            let header = lines.next().unwrap().to_string();
            let data = lines
                .filter(|l| !l.starts_with('#'))
                .map(|l| l.split_whitespace().map(String::from).collect())
                .collect();
            (header, data)
        })
        .collect()
}

#[test]
fn plot_data_has_one_block_per_scan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plot.txt");
    let out = run(&["scan", "--f", "cauchy:zeta=1,0", "--p", "1.5,2,2.5", "--plot", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let blocks = plot_blocks(&path);
    assert_eq!(blocks.len(), 3);
    let verdicts = ["Bounded", "LogDivergent", "PowerDivergent"];
    for ((header, data), verdict) in blocks.iter().zip(verdicts) {
        assert!(header.ends_with(&format!("verdict={verdict}")), "{header}");
        assert_eq!(data.len(), 28);
        assert!(data.iter().all(|c| c.len() == 6));
    }
    let column = |block: &[Vec<String>], j: usize| -> Vec<f64> { block.iter().map(|c| c[j].parse().unwrap()).collect() };
    // log growth is linear in x, power growth linear in (x, ln value)
    assert!(r2(&column(&blocks[1].1, 2), &column(&blocks[1].1, 1)) >= 0.98);
    assert!(r2(&column(&blocks[2].1, 2), &column(&blocks[2].1, 3)) >= 0.98);
    assert!(blocks[0].1.iter().all(|c| c[4] == "nan" || c[4].parse::<f64>().is_ok()));
}

fn r2(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn reproduce_writes_one_csv_per_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    let out = run(&["reproduce", "--criteria", "7,8", "--seeds", "7,11", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for id in ["07", "08"] {
        let text = std::fs::read_to_string(out_dir.join(format!("criterion_{id}.csv"))).unwrap();
        let rows = read_rows(&text).unwrap();
        assert!(rows.iter().all(|r| r.pass && r.experiment_id == format!("criterion-{id}")));
        assert!(rows.iter().any(|r| r.seed == 7) && rows.iter().any(|r| r.seed == 11));
    }
    let summary = String::from_utf8_lossy(&out.stderr);
    assert_eq!(summary.matches(" PASS ").count(), 4, "{summary}");
    assert_eq!(code(&run(&["reproduce", "--criteria", "7", "--out", "/proc/no-such-dir"])), 73);
}
