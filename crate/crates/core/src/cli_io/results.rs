//! Results CSV (`QRES` v1) and calibration files (`QCAL` v1).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::gauge::Weighting;
use crate::pipeline::{Anchor, Record, SweepResult};
use crate::quad_hist::Window;

const RESULTS_TAG: &str = "# QRES 1";
const CALIBRATION_TAG: &str = "# QCAL 1";
const COLUMNS: [&str; 15] = [
    "eps",
    "mode",
    "theta_rad",
    "re_lambda",
    "im_lambda",
    "H_R",
    "H_I",
    "H_RI",
    "MI",
    "MI_over_HRI",
    "NB",
    "weighting",
    "clamped_pct",
    "isotropic_flag",
    "degenerate_flag",
];

/// One line of the results CSV. `im_lambda` keeps the sign of `Im λ`
/// (negative for lossy modes); both λ columns are empty when the field came
/// without an eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsRow {
    pub eps: f64,
    pub mode: String,
    pub theta_rad: f64,
    pub re_lambda: Option<f64>,
    pub im_lambda: Option<f64>,
    pub h_r: f64,
    pub h_i: f64,
    pub h_ri: f64,
    pub mi: f64,
    pub mi_over_hri: f64,
    pub nb: usize,
    pub weighting: Weighting,
    pub clamped_pct: f64,
    pub isotropic_flag: bool,
    pub degenerate_flag: bool,
}

impl From<&Record> for ResultsRow {
    fn from(r: &Record) -> Self {
        Self {
            eps: r.eps,
            mode: r.mode.clone(),
            theta_rad: r.theta,
            re_lambda: r.lambda.map(|l| l.re),
            im_lambda: r.lambda.map(|l| l.im),
            h_r: r.measures.h_r,
            h_i: r.measures.h_i,
            h_ri: r.measures.h_ri,
            mi: r.measures.mi,
            mi_over_hri: r.measures.ratio,
            nb: r.nb,
            weighting: r.weighting,
            clamped_pct: r.clamped_pct,
            isotropic_flag: r.isotropic_fallback,
            degenerate_flag: r.measures.degenerate,
        }
    }
}

pub fn results_header() -> String {
    COLUMNS.join(",")
}

pub fn format_results_row(row: &ResultsRow) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    [
        fmt_f64(row.eps),
        row.mode.clone(),
        fmt_f64(row.theta_rad),
        opt(row.re_lambda),
        opt(row.im_lambda),
        fmt_f64(row.h_r),
        fmt_f64(row.h_i),
        fmt_f64(row.h_ri),
        fmt_f64(row.mi),
        fmt_f64(row.mi_over_hri),
        row.nb.to_string(),
        row.weighting.to_string(),
        fmt_f64(row.clamped_pct),
        u8::from(row.isotropic_flag).to_string(),
        u8::from(row.degenerate_flag).to_string(),
    ]
    .join(",")
}

fn window_lines(w: &Window, nb: usize) -> String {
    let mut s = String::new();
    for (k, v) in [
        ("win.rmin", w.rmin),
        ("win.rmax", w.rmax),
        ("win.imin", w.imin),
        ("win.imax", w.imax),
        ("win.qlo", w.q_lo),
        ("win.qhi", w.q_hi),
        ("win.pad", w.padding),
    ] {
        s.push_str(&format!("# {k} = {}\n", fmt_f64(v)));
    }
    s.push_str(&format!("# win.nb = {nb}\n"));
    s
}

/// Metadata comment block followed by the header and one row per record.
pub fn write_results_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let m = &result.meta;
    let mut text = format!("{RESULTS_TAG}\n");
    text.push_str(&format!("# config_hash = {}\n", m.config_hash));
    text.push_str(&format!("# gauge = {}\n", m.gauge));
    text.push_str(&format!("# weighting = {}\n", m.weighting));
    text.push_str(&format!("# eps_star = {}\n", fmt_f64(m.anchor.eps_star)));
    text.push_str(&format!("# eps_anchor = {}\n", fmt_f64(m.anchor.eps_anchor)));
    text.push_str(&format!("# theta_anchor = {}\n", fmt_f64(m.anchor.theta_anchor)));
    text.push_str(&window_lines(&m.anchor.window, m.nb));
    text.push_str(&format!("# failures = {}\n", m.failures.len()));
    for f in &m.failures {
        text.push_str(&format!("# failure = {},{},{}\n", fmt_f64(f.eps), f.mode, f.reason.replace('\n', " ")));
    }
    text.push_str(&results_header());
    text.push('\n');
    for r in &result.records {
        text.push_str(&format_results_row(&ResultsRow::from(r)));
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(io)?;
    out.flush().map_err(io)
}

/// Parsed results CSV: metadata key/values (repeated keys keep the last
/// value) and rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsFile {
    pub meta: BTreeMap<String, String>,
    pub rows: Vec<ResultsRow>,
}

pub fn read_results_csv(path: &Path) -> Result<ResultsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == RESULTS_TAG => {}
        Some((_, l)) if l.starts_with("# QRES ") => {
            return Err(Error::Version { path: path.to_path_buf(), found: l[7..].to_string() })
        }
        _ => return Err(perr(1, "missing `# QRES` tag".into())),
    }
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !header_seen {
            if line != results_header() {
                return Err(perr(lineno, format!("unexpected header `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != COLUMNS.len() {
            return Err(perr(lineno, format!("expected {} columns, got {}", COLUMNS.len(), c.len())));
        }
        let f = |s: &str| s.parse::<f64>().map_err(|_| perr(lineno, format!("bad number `{s}`")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { f(s).map(Some) };
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(perr(lineno, format!("bad flag `{s}`"))),
        };
        rows.push(ResultsRow {
            eps: f(c[0])?,
            mode: c[1].to_string(),
            theta_rad: f(c[2])?,
            re_lambda: opt(c[3])?,
            im_lambda: opt(c[4])?,
            h_r: f(c[5])?,
            h_i: f(c[6])?,
            h_ri: f(c[7])?,
            mi: f(c[8])?,
            mi_over_hri: f(c[9])?,
            nb: c[10].parse().map_err(|_| perr(lineno, format!("bad NB `{}`", c[10])))?,
            weighting: c[11].parse().map_err(|_| perr(lineno, format!("bad weighting `{}`", c[11])))?,
            clamped_pct: f(c[12])?,
            isotropic_flag: flag(c[13])?,
            degenerate_flag: flag(c[14])?,
        });
    }
    if !header_seen {
        return Err(perr(0, "missing column header".into()));
    }
    Ok(ResultsFile { meta, rows })
}

/// Writes the anchor angle and window.
pub fn write_calibration(anchor: &Anchor, nb: usize, path: &Path) -> Result<()> {
    let mut text = format!("{CALIBRATION_TAG}\n");
    text.push_str(&format!("theta_anchor = {}\n", fmt_f64(anchor.theta_anchor)));
    text.push_str(&format!("eps_star = {}\n", fmt_f64(anchor.eps_star)));
    text.push_str(&format!("eps_anchor = {}\n", fmt_f64(anchor.eps_anchor)));
    for line in window_lines(&anchor.window, nb).lines() {
        text.push_str(line.trim_start_matches("# "));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a calibration file back into an [`Anchor`] and the NB it was
/// written with.
pub fn read_calibration(path: &Path) -> Result<(Anchor, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == CALIBRATION_TAG => {}
        Some((_, l)) if l.starts_with("# QCAL ") => {
            return Err(Error::Version { path: path.to_path_buf(), found: l[7..].to_string() })
        }
        _ => return Err(perr(1, "missing `# QCAL` tag".into())),
    }
    let mut kv: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| perr(idx + 1, format!("bad line `{line}`")))?;
        kv.insert(k.trim(), (idx + 1, v.trim()));
    }
    let num = |k: &str| -> Result<f64> {
        let (l, v) = kv.get(k).ok_or_else(|| perr(0, format!("missing key `{k}`")))?;
        v.parse().map_err(|_| perr(*l, format!("bad `{k}` value `{v}`")))
    };
    let window = Window::with_calibration(
        num("win.rmin")?,
        num("win.rmax")?,
        num("win.imin")?,
        num("win.imax")?,
        num("win.qlo")?,
        num("win.qhi")?,
        num("win.pad")?,
    )?;
    let nb = num("win.nb")? as usize;
    let anchor = Anchor {
        eps_star: num("eps_star")?,
        eps_anchor: num("eps_anchor")?,
        theta_anchor: num("theta_anchor")?,
        window,
    };
    Ok((anchor, nb))
}
