use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use quadspace::cli_io::{
    emit_plot_data, emit_scatter, format_results_row, parse_config, read_calibration,
    read_field_file, results_header, write_calibration, write_field_file, write_results_csv,
    ResultsRow,
};
use quadspace::field_synth::SweepFields;
use quadspace::gauge::{retain_interior, Weighting};
use quadspace::pipeline::{
    analyze_field, calibrate_anchor, load_fields, robustness_suite, run_sweep_on, Frame, GaugeMode,
    Record, RunConfig,
};
use quadspace::quad_hist::global_window;
use quadspace::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "quadspace", version, about = "Quadrature-space entropy and mutual information across avoided crossings")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Flat `key = value` config file (defaults to the reference preset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Bins per axis.
    #[arg(long, global = true)]
    nb: Option<usize>,
    /// `intensity` or `unit`.
    #[arg(long, global = true)]
    weighting: Option<Weighting>,
    /// Anchor parameter for the global window.
    #[arg(long = "eps-star", global = true, allow_negative_numbers = true)]
    eps_star: Option<f64>,
    /// `per-eps` or `anchor`.
    #[arg(long, global = true)]
    gauge: Option<GaugeMode>,
    /// Reserved; every stage is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write QFLD fields for every eps and branch of the synthetic model.
    Synth,
    /// Calibrate the anchor angle and window, write `calibration.qcal`.
    Anchor,
    /// Analyse one QFLD field and print one results row.
    Analyze {
        field: PathBuf,
        /// Calibration file from `anchor`; without it the field is its own
        /// anchor.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Full sweep: `results.csv` and plot series under `plot/`.
    Sweep {
        /// Also write rotated scatter subsamples per eps and mode.
        #[arg(long)]
        scatter: bool,
    },
    /// NB and weighting robustness suite.
    Report,
}

fn load_config(opts: &GlobalOpts) -> Result<RunConfig> {
    let mut config = match &opts.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::reference(),
    };
    if let Some(nb) = opts.nb {
        config.nb = nb;
    }
    if let Some(w) = opts.weighting {
        config.weighting = w;
    }
    if let Some(e) = opts.eps_star {
        config.eps_star = Some(e);
    }
    if let Some(g) = opts.gauge {
        config.gauge = g;
    }
    if let Some(out) = &opts.out {
        config.out_dir = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn write_fields(fields: &[SweepFields], dir: &Path) -> Result<usize> {
    let mut n = 0;
    for (k, s) in fields.iter().enumerate() {
        for f in &s.fields {
            write_field_file(f, &dir.join(format!("field_{k:03}_mode{}.qfld", f.meta.mode)))?;
            n += 1;
        }
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = load_config(&cli.global)?;
    match cli.command {
        Command::Synth => {
            let dir = out_dir(&config)?;
            let fields = load_fields(&config)?;
            let n = write_fields(&fields, &dir)?;
            info!("wrote {n} fields to {}", dir.display());
        }
        Command::Anchor => {
            let dir = out_dir(&config)?;
            let fields = load_fields(&config)?;
            let anchor = calibrate_anchor(&config, &fields, config.weighting)?;
            let path = dir.join("calibration.qcal");
            write_calibration(&anchor, config.nb, &path)?;
            println!(
                "theta_anchor = {} (eps_anchor = {}) window R [{}, {}] I [{}, {}] -> {}",
                anchor.theta_anchor,
                anchor.eps_anchor,
                anchor.window.rmin,
                anchor.window.rmax,
                anchor.window.imin,
                anchor.window.imax,
                path.display()
            );
        }
        Command::Analyze { field, calibration } => {
            let f = read_field_file(&field)?;
            let (theta_anchor, window, nb) = match calibration {
                Some(path) => {
                    let (a, nb) = read_calibration(&path)?;
                    let nb = cli.global.nb.unwrap_or(nb);
                    (a.theta_anchor, a.window, nb)
                }
                None => {
                    let cloud = retain_interior(&f)?.reweighted(config.weighting);
                    let theta = quadspace::gauge::frame_angle(&cloud, Weighting::Intensity)?;
                    let w = global_window(&cloud, theta, config.q_lo, config.q_hi, config.padding)?;
                    (theta, w, config.nb)
                }
            };
            let frame = match config.gauge {
                GaugeMode::PerEps => Frame::PerEps,
                GaugeMode::Anchor => Frame::Fixed(theta_anchor),
            };
            let a = analyze_field(&f, frame, &window, nb, config.weighting)?;
            let record = Record {
                eps: f.meta.eps,
                mode: f.meta.mode.clone(),
                theta: a.theta,
                lambda: f.meta.lambda,
                measures: a.measures,
                nb,
                weighting: config.weighting,
                clamped_pct: a.clamped_pct,
                isotropic_fallback: false,
            };
            println!("{}", results_header());
            println!("{}", format_results_row(&ResultsRow::from(&record)));
        }
        Command::Sweep { scatter } => {
            let dir = out_dir(&config)?;
            let fields = load_fields(&config)?;
            let result = run_sweep_on(&config, &fields, config.nb, config.weighting)?;
            let csv = dir.join("results.csv");
            write_results_csv(&result, &csv)?;
            let plots = emit_plot_data(&result, &dir.join("plot"))?;
            if scatter {
                let sdir = dir.join("plot").join("scatter");
                std::fs::create_dir_all(&sdir).map_err(|e| Error::Io { path: sdir.clone(), source: e })?;
                for (k, s) in fields.iter().enumerate() {
                    for f in &s.fields {
                        if let Some(r) = result.records.iter().find(|r| r.eps == s.eps && r.mode == f.meta.mode) {
                            emit_scatter(f, r.theta, &sdir.join(format!("eps{k:03}_mode{}.csv", f.meta.mode)))?;
                        }
                    }
                }
            }
            info!(
                "{} records, {} failures -> {} ({} plot series)",
                result.records.len(),
                result.meta.failures.len(),
                csv.display(),
                plots.len()
            );
        }
        Command::Report => {
            let dir = out_dir(&config)?;
            let report = robustness_suite(&config)?;
            let mut text = String::from("NB,weighting,mode,argmax_MI,MI_peak,MI_prominence,argmax_HRI,HRI_peak,HRI_prominence\n");
            let opt = |v: Option<f64>| v.map(|e| e.to_string()).unwrap_or_default();
            for r in &report.rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.nb,
                    r.weighting,
                    r.mode,
                    opt(r.mi.argmax_eps),
                    r.mi.peak,
                    r.mi.prominence,
                    opt(r.h_ri.argmax_eps),
                    r.h_ri.peak,
                    r.h_ri.prominence
                ));
            }
            print!("{text}");
            let path = dir.join("robustness.csv");
            std::fs::write(&path, &text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            for (w, mode, stable) in &report.nb_stable {
                println!("MI argmax across NB, weighting {w}, mode {mode}: {}", if *stable { "stable" } else { "UNSTABLE" });
            }
            for (nb, w, reason) in &report.failures {
                error!("variant NB = {nb}, weighting {w} failed: {reason}");
            }
            if !report.all_stable() || !report.failures.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("could not configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
