//! Plot-ready series: one CSV per quantity, one column per mode, one row
//! per ε.

use std::path::{Path, PathBuf};

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::field_synth::ComplexField;
use crate::gauge::{align, retain_interior};
use crate::pipeline::{Record, SweepResult};

const PLOT_TAG: &str = "# QPLT 1";
pub const SCATTER_MAX_POINTS: usize = 5000;

type Extractor = fn(&Record) -> Option<f64>;

const SERIES: [(&str, Extractor); 8] = [
    ("re_lambda", |r| r.lambda.map(|l| l.re)),
    ("im_lambda", |r| r.lambda.map(|l| l.im)),
    ("theta_over_pi", |r| Some(crate::gauge::wrap_half_pi(r.theta) / std::f64::consts::PI)),
    ("h_r", |r| Some(r.measures.h_r)),
    ("h_i", |r| Some(r.measures.h_i)),
    ("h_ri", |r| Some(r.measures.h_ri)),
    ("mi", |r| Some(r.measures.mi)),
    ("mi_over_hri", |r| Some(r.measures.ratio)),
];

/// Writes every series into `outdir` and returns the written paths.
pub fn emit_plot_data(result: &SweepResult, outdir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let modes = result.modes();
    let eps = result.eps_values();
    let mut written = Vec::new();
    for (name, extract) in SERIES {
        let mut text = format!("{PLOT_TAG}\neps");
        for m in &modes {
            text.push_str(&format!(",mode_{m}"));
        }
        text.push('\n');
        for &e in &eps {
            text.push_str(&fmt_f64(e));
            for m in &modes {
                let v = result
                    .records
                    .iter()
                    .find(|r| r.eps == e && &r.mode == m)
                    .and_then(extract);
                text.push(',');
                if let Some(v) = v {
                    text.push_str(&fmt_f64(v));
                }
            }
            text.push('\n');
        }
        let path = outdir.join(format!("{name}.csv"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Retained samples of `field` rotated by `e^{-iθ}`, stride-subsampled to at
/// most [`SCATTER_MAX_POINTS`] rows of `r,i,w`.
pub fn emit_scatter(field: &ComplexField, theta: f64, path: &Path) -> Result<usize> {
    let cloud = align(&retain_interior(field)?, theta);
    let stride = cloud.len().div_ceil(SCATTER_MAX_POINTS).max(1);
    let mut text = format!("{PLOT_TAG}\n# eps = {}\n# mode = {}\n# theta = {}\nr,i,w\n",
        fmt_f64(field.meta.eps), field.meta.mode, fmt_f64(theta));
    let mut n = 0;
    for (p, w) in cloud.points.iter().zip(&cloud.weights).step_by(stride) {
        text.push_str(&format!("{},{},{}\n", fmt_f64(p.0), fmt_f64(p.1), fmt_f64(*w)));
        n += 1;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(n)
}
