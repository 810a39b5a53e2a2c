mod common;

use std::path::Path;
use std::process::Command;

use num_complex::Complex64;
use proptest::prelude::*;
use quadspace::cli_io::*;
use quadspace::field_synth::{ComplexField, FieldMeta, GridSpec};
use quadspace::gauge::Weighting;
use quadspace::infotheory::InfoMeasures;
use quadspace::pipeline::*;
use quadspace::quad_hist::Window;
use quadspace::Error;

const SMALL_CONFIG: &str = "\
# coarse reference sweep
grid.nx = 40
grid.ny = 40
cm.eps.count = 9
run.nb = 64
robust.nb = 32, 64
";

fn record(eps: f64, mode: &str, x: f64) -> Record {
    Record {
        eps,
        mode: mode.into(),
        theta: -x,
        lambda: if mode == "2" { None } else { Some(Complex64::new(10.0 + x, -0.01 * x)) },
        measures: InfoMeasures { h_r: x, h_i: x / 3.0, h_ri: 1.1 * x, mi: x / 7.0, ratio: 0.1, degenerate: false },
        nb: 500,
        weighting: Weighting::Unit,
        clamped_pct: 0.3 * x,
        isotropic_fallback: mode == "2",
    }
}

fn result(records: Vec<Record>) -> SweepResult {
    SweepResult {
        records,
        meta: SweepMeta {
            anchor: Anchor {
                eps_star: 0.1,
                eps_anchor: 0.1,
                theta_anchor: 0.25,
                window: Window::with_calibration(-1.0, 1.0, -0.5, 0.5, 0.005, 0.995, 0.05).unwrap(),
            },
            nb: 500,
            weighting: Weighting::Unit,
            gauge: GaugeMode::PerEps,
            config_hash: "0123456789abcdef".into(),
            failures: vec![Failure { eps: 0.3, mode: "1".into(), reason: "empty cloud".into() }],
        },
    }
}

#[test]
fn results_csv_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let res = result(vec![record(0.1, "1", 1.0 / 3.0), record(0.1, "2", std::f64::consts::PI), record(0.2, "1", 1e-300), record(0.2, "2", 7.5)]);
    write_results_csv(&res, &path).unwrap();
    let back = read_results_csv(&path).unwrap();
    assert_eq!(back.rows.len(), 4);
    for (row, rec) in back.rows.iter().zip(&res.records) {
        assert_eq!(*row, ResultsRow::from(rec));
    }
    assert_eq!(back.meta["config_hash"], "0123456789abcdef");
    assert_eq!(back.meta["failures"], "1");
    // rewriting the parsed rows reproduces the file body byte for byte
    let text = std::fs::read_to_string(&path).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    let again: Vec<String> = back.rows.iter().map(format_results_row).collect();
    assert_eq!(body, again);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_results_csv(&result(vec![]), &path).unwrap();
    let back = read_results_csv(&path).unwrap();
    assert!(back.rows.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().last().unwrap(), results_header());
}

#[test]
fn plot_series_have_one_row_per_eps() {
    let dir = tempfile::tempdir().unwrap();
    let res = result(vec![record(0.1, "1", 1.0), record(0.1, "2", 2.0), record(0.2, "1", 3.0), record(0.2, "2", 4.0)]);
    let files = emit_plot_data(&res, dir.path()).unwrap();
    assert_eq!(files.len(), 8);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "eps,mode_1,mode_2");
        assert_eq!(data.len(), 3, "{}", f.display());
    }
    let re = std::fs::read_to_string(dir.path().join("re_lambda.csv")).unwrap();
    // mode 2 has no eigenvalue here: its cells stay empty
    assert!(re.lines().last().unwrap().ends_with(','));
}

#[test]
fn calibration_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.qcal");
    let anchor = result(vec![]).meta.anchor;
    write_calibration(&anchor, 300, &path).unwrap();
    assert_eq!(read_calibration(&path).unwrap(), (anchor, 300));
}

fn tiny_field(values: Vec<Complex64>, nx: usize) -> ComplexField {
    let grid = GridSpec::new(nx, values.len() / nx, -0.5, 0.5, -1.0, 1.0).unwrap();
    ComplexField::new(grid, values, FieldMeta { eps: 0.125, mode: "2".into(), lambda: Some(Complex64::new(1.0, -1e-3)) }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn qfld_round_trip_is_exact(seed in any::<u64>(), nx in 1usize..9, ny in 1usize..9) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let values = (0..nx * ny)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-300..300)), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = tiny_field(values, nx);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.qfld");
        write_field_file(&f, &path).unwrap();
        let g = read_field_file(&path).unwrap();
        prop_assert_eq!(f.values(), g.values());
        prop_assert_eq!(f.grid(), g.grid());
        prop_assert_eq!(&f.meta, &g.meta);
        prop_assert_eq!(f.mask(), g.mask());
    }
}

#[test]
fn qfld_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.qfld");
    let head = "# QFLD 1\n# nx = 2\n# ny = 1\n# x0 = 0\n# x1 = 1\n# y0 = 0\n# y1 = 0\n# eps = 0\n# mode = 1\nx,y,re,im\n";
    std::fs::write(&path, format!("{head}0,0,1,0\n1,0,oops,0\n")).unwrap();
    assert!(matches!(read_field_file(&path), Err(Error::Parse { line: 12, .. })));
    std::fs::write(&path, format!("{head}0,0,1,0\n")).unwrap();
    assert!(matches!(read_field_file(&path), Err(Error::ShapeMismatch { .. })));
    std::fs::write(&path, head.replace("QFLD 1", "QFLD 9")).unwrap();
    assert!(matches!(read_field_file(&path), Err(Error::Version { .. })));
}

#[test]
fn config_parsing_and_hash() {
    let c = parse_config_str(SMALL_CONFIG).unwrap();
    if let FieldSource::Synthetic { model, synth } = &c.source {
        assert_eq!((synth.nx, synth.ny, model.eps_grid().len()), (40, 40, 9));
    } else {
        panic!("expected a synthetic source");
    }
    assert_eq!(c.robust_nb, vec![32, 64]);
    assert_eq!(config_hash(&c).len(), 16);
    assert_ne!(config_hash(&c), config_hash(&RunConfig::reference()));
    assert_eq!(config_hash(&c), config_hash(&parse_config_str(SMALL_CONFIG).unwrap()));
    assert!(matches!(parse_config_str("run.nb = 5\nrun.colour = red\n"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(parse_config_str("run.nb = 5\nrun.nb = 6\n"), Err(Error::Parse { line: 2, .. })));
}

fn quadspace(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_quadspace"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn cli_sweep_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL_CONFIG).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = format!("out{threads}");
        let o = quadspace(&["--config", "small.cfg", "--threads", threads, "--out", &out, "sweep"], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(dir.path().join(&out).join("results.csv")).unwrap());
        assert!(dir.path().join(&out).join("plot/mi.csv").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 18);
}

#[test]
fn cli_synth_anchor_analyze_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL_CONFIG).unwrap();
    let o = quadspace(&["--config", "small.cfg", "--out", "f", "synth"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fields = read_field_dir(&dir.path().join("f")).unwrap();
    assert_eq!(fields.len(), 9);

    let o = quadspace(&["--config", "small.cfg", "--out", "a", "anchor"], dir.path());
    assert!(o.status.success());
    let (anchor, nb) = read_calibration(&dir.path().join("a/calibration.qcal")).unwrap();
    assert_eq!(nb, 64);

    let o = quadspace(
        &["--config", "small.cfg", "analyze", "f/field_004_mode1.qfld", "--calibration", "a/calibration.qcal"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], results_header());
    assert!(lines[1].contains(",64,intensity,"));
    assert_eq!(anchor.eps_anchor, fields[4].eps);

    let o = quadspace(&["--config", "small.cfg", "--out", "r", "report"], dir.path());
    assert!(dir.path().join("r/robustness.csv").exists());
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn cli_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = quadspace(&["--nb", "1", "sweep"], dir.path());
    assert!(!o.status.success());
    let o = quadspace(&["--config", "missing.cfg", "sweep"], dir.path());
    assert!(!o.status.success());
}
