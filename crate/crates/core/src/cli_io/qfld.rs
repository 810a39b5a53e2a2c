//! QFLD v1 field files.
//!
//! ```text
//! # QFLD 1
//! # nx = 256
//! # ny = 256
//! # x0 = ...        (also x1, y0, y1)
//! # eps = 0.16655
//! # mode = 1
//! # lambda = <re>,<im>    (optional)
//! x,y,re,im
//! <nx * ny rows, row-major: x varies fastest>
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::field_synth::{ComplexField, FieldMeta, GridSpec, SweepFields};

pub const QFLD_VERSION: &str = "1";
const COLUMNS: &str = "x,y,re,im";

pub fn write_field_file(field: &ComplexField, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let g = field.grid();
    let mut text = String::new();
    text.push_str(&format!("# QFLD {QFLD_VERSION}\n"));
    text.push_str(&format!("# nx = {}\n# ny = {}\n", g.nx, g.ny));
    for (k, v) in [("x0", g.x0), ("x1", g.x1), ("y0", g.y0), ("y1", g.y1), ("eps", field.meta.eps)] {
        text.push_str(&format!("# {k} = {}\n", fmt_f64(v)));
    }
    text.push_str(&format!("# mode = {}\n", field.meta.mode));
    if let Some(l) = field.meta.lambda {
        text.push_str(&format!("# lambda = {},{}\n", fmt_f64(l.re), fmt_f64(l.im)));
    }
    text.push_str(COLUMNS);
    text.push('\n');
    out.write_all(text.as_bytes()).map_err(io)?;
    for iy in 0..g.ny {
        let y = fmt_f64(g.y(iy));
        for ix in 0..g.nx {
            let z = field.values()[g.index(ix, iy)];
            writeln!(out, "{},{},{},{}", fmt_f64(g.x(ix)), y, fmt_f64(z.re), fmt_f64(z.im)).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Reads a QFLD file. Weights and the retained-sample mask are recomputed
/// from the values.
pub fn read_field_file(path: &Path) -> Result<ComplexField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, first) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let version = first
        .strip_prefix("# QFLD ")
        .ok_or_else(|| perr(1, format!("missing `# QFLD` tag, got `{first}`")))?
        .trim();
    if version != QFLD_VERSION {
        return Err(Error::Version { path: path.to_path_buf(), found: version.to_string() });
    }

    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut values = Vec::new();
    let mut in_data = false;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !in_data {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| perr(lineno, format!("bad header line `{line}`")))?;
                header.insert(k.trim().to_string(), (lineno, v.trim().to_string()));
            } else if line == COLUMNS {
                in_data = true;
            } else {
                return Err(perr(lineno, format!("expected header or `{COLUMNS}`, got `{line}`")));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(perr(lineno, format!("expected 4 columns, got {}", cols.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| perr(lineno, format!("bad number `{s}`")));
        let (re, im) = (num(cols[2])?, num(cols[3])?);
        num(cols[0])?;
        num(cols[1])?;
        if !re.is_finite() || !im.is_finite() {
            return Err(perr(lineno, "non-finite field value".into()));
        }
        values.push(Complex64::new(re, im));
    }
    if !in_data {
        return Err(perr(0, format!("missing `{COLUMNS}` column line")));
    }

    let get = |key: &str| -> Result<&(usize, String)> {
        header.get(key).ok_or_else(|| perr(0, format!("missing header key `{key}`")))
    };
    let usize_key = |key: &str| -> Result<usize> {
        let (l, v) = get(key)?;
        v.parse().map_err(|_| perr(*l, format!("bad `{key}` value `{v}`")))
    };
    let f64_key = |key: &str| -> Result<f64> {
        let (l, v) = get(key)?;
        v.parse().map_err(|_| perr(*l, format!("bad `{key}` value `{v}`")))
    };
    let (nx, ny) = (usize_key("nx")?, usize_key("ny")?);
    let grid = GridSpec::new(nx, ny, f64_key("x0")?, f64_key("x1")?, f64_key("y0")?, f64_key("y1")?)
        .map_err(|e| perr(0, e.to_string()))?;
    if values.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            path: path.to_path_buf(),
            expected: grid.len(),
            found: values.len(),
        });
    }
    let lambda = match header.get("lambda") {
        None => None,
        Some((l, v)) => {
            let parts: Vec<f64> = v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr(*l, format!("bad lambda `{v}`")))?;
            match parts.as_slice() {
                [re, im] => Some(Complex64::new(*re, *im)),
                _ => return Err(perr(*l, format!("lambda needs two values, got `{v}`"))),
            }
        }
    };
    let meta = FieldMeta { eps: f64_key("eps")?, mode: get("mode")?.1.clone(), lambda };
    ComplexField::new(grid, values, meta)
}

/// Reads every `*.qfld` file in `dir` and groups the fields by ε (ascending),
/// modes sorted by label.
pub fn read_field_dir(dir: &Path) -> Result<Vec<SweepFields>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "qfld"))
        .collect();
    paths.sort();
    let mut fields = paths.iter().map(|p| read_field_file(p)).collect::<Result<Vec<_>>>()?;
    fields.sort_by(|a, b| a.meta.eps.total_cmp(&b.meta.eps).then_with(|| a.meta.mode.cmp(&b.meta.mode)));
    let mut out: Vec<SweepFields> = Vec::new();
    for f in fields {
        match out.last_mut() {
            Some(last) if last.eps == f.meta.eps => last.fields.push(f),
            _ => out.push(SweepFields { eps: f.meta.eps, fields: vec![f] }),
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("no .qfld files in {}", dir.display())));
    }
    Ok(out)
}
