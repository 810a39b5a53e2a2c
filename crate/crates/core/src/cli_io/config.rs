use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::coupled_mode::{linspace, Affine, DetuningModel};
use crate::error::{Error, Result};
use crate::field_synth::{BasisModeSpec, Parity};
use crate::gauge::Weighting;
use crate::pipeline::{FieldSource, GaugeMode, RunConfig};

fn config_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Reads a config file; see [`parse_config_str`].
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text, path)
}

/// Parses `key = value` lines (`#` starts a comment) on top of a preset.
/// `preset` selects the base (`reference`, the default, or `decoupled`);
/// every other key overrides one setting.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    parse_config_text(text, Path::new("<config>"))
}

fn parse_config_text(text: &str, path: &Path) -> Result<RunConfig> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(path, idx + 1, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().to_string();
        if entries.insert(key.clone(), (idx + 1, value.trim().to_string())).is_some() {
            return Err(config_err(path, idx + 1, format!("duplicate key `{key}`")));
        }
    }
    let mut builder = Builder::new(path, entries)?;
    builder.apply()?;
    let config = builder.config;
    config.validate()?;
    Ok(config)
}

struct Builder<'a> {
    path: &'a Path,
    entries: BTreeMap<String, (usize, String)>,
    config: RunConfig,
}

impl<'a> Builder<'a> {
    fn new(path: &'a Path, mut entries: BTreeMap<String, (usize, String)>) -> Result<Self> {
        let config = match entries.remove("preset") {
            None => RunConfig::reference(),
            Some((line, v)) => match v.as_str() {
                "reference" => RunConfig::reference(),
                "decoupled" => RunConfig::decoupled(),
                other => return Err(config_err(path, line, format!("unknown preset `{other}`"))),
            },
        };
        Ok(Self { path, entries, config })
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| config_err(self.path, line, format!("bad value `{v}` for `{key}`"))),
        }
    }

    fn take_list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| config_err(self.path, line, format!("bad list item `{s}` for `{key}`")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn affine(&mut self, name: &str, base: Affine) -> Result<Affine> {
        Ok(Affine {
            slope: self.take(&format!("cm.{name}.slope"))?.unwrap_or(base.slope),
            intercept: self.take(&format!("cm.{name}.intercept"))?.unwrap_or(base.intercept),
        })
    }

    fn basis(&mut self, name: &str, base: BasisModeSpec) -> Result<BasisModeSpec> {
        let kx = self.take(&format!("{name}.kx"))?.unwrap_or(base.kx);
        let ky = self.take(&format!("{name}.ky"))?.unwrap_or(base.ky);
        let parity: Parity = self.take(&format!("{name}.parity"))?.unwrap_or(base.parity);
        BasisModeSpec::new(kx, ky, parity)
    }

    fn apply(&mut self) -> Result<()> {
        let (model, mut synth) = match &self.config.source {
            FieldSource::Synthetic { model, synth } => (model.clone(), *synth),
            FieldSource::External { .. } => unreachable!("presets are synthetic"),
        };
        let grid = model.eps_grid();
        let omega1 = self.affine("omega1", model.omega1)?;
        let omega2 = self.affine("omega2", model.omega2)?;
        let gamma1 = self.affine("gamma1", model.gamma1)?;
        let gamma2 = self.affine("gamma2", model.gamma2)?;
        let g = self.take("cm.g")?.unwrap_or(model.g);
        let start = self.take("cm.eps.start")?.unwrap_or(grid[0]);
        let stop = self.take("cm.eps.stop")?.unwrap_or(grid[grid.len() - 1]);
        let count = self.take("cm.eps.count")?.unwrap_or(grid.len());
        let model = DetuningModel::new(omega1, omega2, gamma1, gamma2, g, linspace(start, stop, count))?;

        synth.nx = self.take("grid.nx")?.unwrap_or(synth.nx);
        synth.ny = self.take("grid.ny")?.unwrap_or(synth.ny);
        synth.basis1 = self.basis("basis1", synth.basis1)?;
        synth.basis2 = self.basis("basis2", synth.basis2)?;

        self.config.source = match self.take::<PathBuf>("fields.dir")? {
            Some(dir) => FieldSource::External { dir },
            None => FieldSource::Synthetic { model, synth },
        };

        if let Some(v) = self.entries.remove("run.eps_star") {
            self.config.eps_star = match v.1.as_str() {
                "auto" => None,
                s => Some(s.parse().map_err(|_| config_err(self.path, v.0, format!("bad eps_star `{s}`")))?),
            };
        }
        if let Some(nb) = self.take("run.nb")? {
            self.config.nb = nb;
        }
        if let Some(w) = self.take::<Weighting>("run.weighting")? {
            self.config.weighting = w;
        }
        if let Some(g) = self.take::<GaugeMode>("run.gauge")? {
            self.config.gauge = g;
        }
        if let Some(out) = self.take::<PathBuf>("run.out")? {
            self.config.out_dir = Some(out);
        }
        if let Some(v) = self.take("win.qlo")? {
            self.config.q_lo = v;
        }
        if let Some(v) = self.take("win.qhi")? {
            self.config.q_hi = v;
        }
        if let Some(v) = self.take("win.pad")? {
            self.config.padding = v;
        }
        if let Some(v) = self.take_list("robust.nb")? {
            self.config.robust_nb = v;
        }
        if let Some(v) = self.take_list("robust.weighting")? {
            self.config.robust_weighting = v;
        }
        if let Some((key, (line, _))) = self.entries.iter().next() {
            return Err(config_err(self.path, *line, format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

/// Canonical key/value listing of every setting that affects results.
pub fn to_key_values(config: &RunConfig) -> Vec<(String, String)> {
    use super::fmt_f64;
    let mut kv: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    match &config.source {
        FieldSource::Synthetic { model, synth } => {
            for (name, f) in [
                ("omega1", model.omega1),
                ("omega2", model.omega2),
                ("gamma1", model.gamma1),
                ("gamma2", model.gamma2),
            ] {
                put(&format!("cm.{name}.slope"), fmt_f64(f.slope));
                put(&format!("cm.{name}.intercept"), fmt_f64(f.intercept));
            }
            put("cm.g", fmt_f64(model.g));
            let grid = model.eps_grid();
            put("cm.eps.start", fmt_f64(grid[0]));
            put("cm.eps.stop", fmt_f64(grid[grid.len() - 1]));
            put("cm.eps.count", grid.len().to_string());
            put("grid.nx", synth.nx.to_string());
            put("grid.ny", synth.ny.to_string());
            for (name, b) in [("basis1", synth.basis1), ("basis2", synth.basis2)] {
                put(&format!("{name}.kx"), fmt_f64(b.kx));
                put(&format!("{name}.ky"), fmt_f64(b.ky));
                put(&format!("{name}.parity"), b.parity.to_string());
            }
        }
        FieldSource::External { dir } => put("fields.dir", dir.display().to_string()),
    }
    put("run.eps_star", config.eps_star.map_or("auto".to_string(), fmt_f64));
    put("run.nb", config.nb.to_string());
    put("run.weighting", config.weighting.to_string());
    put("run.gauge", config.gauge.to_string());
    put("win.qlo", fmt_f64(config.q_lo));
    put("win.qhi", fmt_f64(config.q_hi));
    put("win.pad", fmt_f64(config.padding));
    let join = |v: Vec<String>| v.join(",");
    put("robust.nb", join(config.robust_nb.iter().map(|n| n.to_string()).collect()));
    put("robust.weighting", join(config.robust_weighting.iter().map(|w| w.to_string()).collect()));
    kv
}

/// First 16 hex digits of the SHA-256 of the canonical listing.
pub fn config_hash(config: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in to_key_values(config) {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(&hasher.finalize()[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_reference_preset() {
        assert_eq!(parse_config_str("# nothing\n").unwrap(), RunConfig::reference());
    }

    #[test]
    fn overrides_apply() {
        let c = parse_config_str(
            "preset = decoupled\nrun.nb = 300  # coarser\nrun.weighting = unit\nrun.gauge = anchor\n\
             cm.eps.count = 9\nbasis2.parity = odd-odd\nrobust.nb = 100, 200\nwin.pad = 0.1\n",
        )
        .unwrap();
        assert_eq!(c.nb, 300);
        assert_eq!(c.weighting, Weighting::Unit);
        assert_eq!(c.gauge, GaugeMode::Anchor);
        assert_eq!(c.robust_nb, vec![100, 200]);
        assert_eq!(c.padding, 0.1);
        match c.source {
            FieldSource::Synthetic { model, synth } => {
                assert_eq!(model.g, 0.0);
                assert_eq!(model.eps_grid().len(), 9);
                assert_eq!(synth.basis2.parity, Parity::OddOdd);
            }
            _ => panic!("expected synthetic source"),
        }
    }

    #[test]
    fn bad_lines_report_their_line_number() {
        match parse_config_str("run.nb = 300\nrun.nb 5\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config_str("\nrun.colour = red\n") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("run.colour"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_config_str("run.nb = many\n").is_err());
        assert!(parse_config_str("run.nb = 1\n").is_err());
    }

    #[test]
    fn hash_tracks_settings() {
        let a = RunConfig::reference();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.nb = 700;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 16);
    }
}
