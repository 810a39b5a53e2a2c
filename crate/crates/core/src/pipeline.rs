//! End-to-end sweeps: anchor calibration, per-field gauge fixing, binning
//! and information measures, plus the NB / weighting robustness suite.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::coupled_mode::{locate_ac, sweep_spectrum, DetuningModel, REFERENCE_EPS_STAR};
use crate::error::{Error, Result};
use crate::field_synth::{synth_sweep, ComplexField, SweepFields, SynthSpec};
use crate::gauge::{
    align, frame_angle, retain_interior, wrap_half_pi, SampleCloud,
    Weighting,
};
use crate::infotheory::{mutual_information, InfoMeasures};
use crate::quad_hist::{
    global_window, histogram, Window, DEFAULT_NB, DEFAULT_PADDING, DEFAULT_Q_HI, DEFAULT_Q_LO,
};

/// Largest fraction of failed (ε, mode) points a sweep tolerates.
pub const FAILURE_BUDGET: f64 = 0.10;
pub const ROBUST_NB: [usize; 3] = [300, 500, 700];

/// Which angle rotates each field before binning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GaugeMode {
    /// Each field is aligned with its own principal axis.
    #[default]
    PerEps,
    /// Every field is rotated by the anchor angle.
    Anchor,
}

impl fmt::Display for GaugeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GaugeMode::PerEps => "per-eps",
            GaugeMode::Anchor => "anchor",
        })
    }
}

impl FromStr for GaugeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per-eps" | "per_eps" => Ok(GaugeMode::PerEps),
            "anchor" => Ok(GaugeMode::Anchor),
            other => Err(Error::Config(format!("unknown gauge mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    Synthetic { model: DetuningModel, synth: SynthSpec },
    /// Directory of QFLD files.
    External { dir: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: FieldSource,
    /// Anchor parameter; `None` uses the located avoided crossing of a
    /// synthetic model.
    pub eps_star: Option<f64>,
    pub nb: usize,
    pub weighting: Weighting,
    pub gauge: GaugeMode,
    pub q_lo: f64,
    pub q_hi: f64,
    pub padding: f64,
    pub out_dir: Option<PathBuf>,
    pub robust_nb: Vec<usize>,
    pub robust_weighting: Vec<Weighting>,
}

impl RunConfig {
    pub fn synthetic(model: DetuningModel, synth: SynthSpec) -> Self {
        Self {
            source: FieldSource::Synthetic { model, synth },
            eps_star: None,
            nb: DEFAULT_NB,
            weighting: Weighting::Intensity,
            gauge: GaugeMode::PerEps,
            q_lo: DEFAULT_Q_LO,
            q_hi: DEFAULT_Q_HI,
            padding: DEFAULT_PADDING,
            out_dir: None,
            robust_nb: ROBUST_NB.to_vec(),
            robust_weighting: vec![Weighting::Intensity, Weighting::Unit],
        }
    }

    pub fn external(dir: impl Into<PathBuf>) -> Self {
        Self {
            source: FieldSource::External { dir: dir.into() },
            ..Self::synthetic(DetuningModel::reference(), SynthSpec::reference())
        }
    }

    /// Avoided crossing at ε* = 0.16655 on the default 256 x 256 grid.
    pub fn reference() -> Self {
        Self {
            eps_star: Some(REFERENCE_EPS_STAR),
            ..Self::synthetic(DetuningModel::reference(), SynthSpec::reference())
        }
    }

    /// Reference grid and basis with zero coupling.
    pub fn decoupled() -> Self {
        Self {
            eps_star: Some(REFERENCE_EPS_STAR),
            ..Self::synthetic(DetuningModel::decoupled(), SynthSpec::reference())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nb < 2 {
            return Err(Error::Config(format!("NB must be >= 2, got {}", self.nb)));
        }
        if self.robust_nb.iter().any(|&nb| nb < 2) {
            return Err(Error::Config("robustness NB values must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.q_lo) || !(0.0..=1.0).contains(&self.q_hi) || !(self.q_lo < self.q_hi)
        {
            return Err(Error::Config(format!(
                "window quantiles must satisfy 0 <= qlo < qhi <= 1, got {}, {}",
                self.q_lo, self.q_hi
            )));
        }
        if !(self.padding >= 0.0) {
            return Err(Error::Config(format!("window padding must be >= 0, got {}", self.padding)));
        }
        if let (Some(star), FieldSource::Synthetic { model, .. }) = (self.eps_star, &self.source) {
            let grid = model.eps_grid();
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            if !(star >= lo && star <= hi) {
                return Err(Error::Config(format!(
                    "eps_star = {star} lies outside the eps grid [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Fields for every control value, ascending in ε, modes sorted by label.
pub fn load_fields(config: &RunConfig) -> Result<Vec<SweepFields>> {
    match &config.source {
        FieldSource::Synthetic { model, synth } => synth_sweep(model, synth),
        FieldSource::External { dir } => crate::cli_io::read_field_dir(dir),
    }
}

fn resolve_eps_star(config: &RunConfig, fields: &[SweepFields]) -> Result<f64> {
    if let Some(star) = config.eps_star {
        let (lo, hi) = match (fields.first(), fields.last()) {
            (Some(a), Some(b)) => (a.eps, b.eps),
            _ => return Err(Error::EmptyCloud),
        };
        if !(star >= lo && star <= hi) {
            return Err(Error::Config(format!("eps_star = {star} lies outside the sweep [{lo}, {hi}]")));
        }
        return Ok(star);
    }
    match &config.source {
        FieldSource::Synthetic { model, .. } => Ok(locate_ac(&sweep_spectrum(model))),
        FieldSource::External { .. } => Err(Error::Config(
            "eps_star must be given for external fields".into(),
        )),
    }
}

/// Index of the grid value closest to `target`; ties go to the lower one.
pub fn nearest_index(eps: &[f64], target: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &e) in eps.iter().enumerate() {
        let d = (e - target).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best.map(|(k, _)| k)
}

/// Anchor angle and the common window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    pub eps_star: f64,
    /// Grid value whose fields form the anchor dataset.
    pub eps_anchor: f64,
    pub theta_anchor: f64,
    pub window: Window,
}

/// Union of the retained clouds of every mode at the grid point nearest ε*,
/// weighted as requested.
fn anchor_cloud(fields: &SweepFields, weighting: Weighting) -> Result<SampleCloud> {
    let clouds = fields
        .fields
        .iter()
        .map(|f| retain_interior(f).map(|c| c.reweighted(weighting)))
        .collect::<Result<Vec<_>>>()?;
    SampleCloud::union(&clouds)
}

pub fn calibrate_anchor(config: &RunConfig, fields: &[SweepFields], weighting: Weighting) -> Result<Anchor> {
    let run = || -> Result<Anchor> {
        let eps_star = resolve_eps_star(config, fields)?;
        let eps: Vec<f64> = fields.iter().map(|s| s.eps).collect();
        let k = nearest_index(&eps, eps_star).ok_or(Error::EmptyCloud)?;
        let cloud = anchor_cloud(&fields[k], weighting)?;
        let theta_anchor = frame_angle(&cloud, Weighting::Intensity)?;
        let window = global_window(&cloud, theta_anchor, config.q_lo, config.q_hi, config.padding)?;
        Ok(Anchor { eps_star, eps_anchor: eps[k], theta_anchor, window })
    };
    run().map_err(|e| Error::Anchor(Box::new(e)))
}

/// Loads the configured fields and calibrates the anchor with the
/// configured weighting.
pub fn anchor_calibration(config: &RunConfig) -> Result<Anchor> {
    config.validate()?;
    let fields = load_fields(config)?;
    calibrate_anchor(config, &fields, config.weighting)
}

/// Rotation applied to a field before binning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    PerEps,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldAnalysis {
    pub theta: f64,
    pub measures: InfoMeasures,
    pub clamped_pct: f64,
}

/// Orientation of one field's retained cloud.
fn field_orientation(cloud: &SampleCloud, weighting: Weighting) -> Result<f64> {
    frame_angle(cloud, weighting)
}

fn measure(cloud: &SampleCloud, theta: f64, window: &Window, nb: usize, weighting: Weighting) -> Result<FieldAnalysis> {
    let aligned = align(cloud, theta);
    let hist = histogram(&aligned, window, nb, weighting)?;
    Ok(FieldAnalysis {
        theta,
        measures: mutual_information(&hist),
        clamped_pct: hist.clamped_pct(),
    })
}

/// Retain, orient (unless the frame is fixed), align, bin and measure.
pub fn analyze_field(
    field: &ComplexField,
    frame: Frame,
    window: &Window,
    nb: usize,
    weighting: Weighting,
) -> Result<FieldAnalysis> {
    let cloud = retain_interior(field)?;
    let theta = match frame {
        Frame::PerEps => field_orientation(&cloud, weighting)?,
        Frame::Fixed(theta) => theta,
    };
    measure(&cloud, theta, window, nb, weighting)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub eps: f64,
    pub mode: String,
    pub theta: f64,
    pub lambda: Option<Complex64>,
    pub measures: InfoMeasures,
    pub nb: usize,
    pub weighting: Weighting,
    pub clamped_pct: f64,
    /// The angle was borrowed from the nearest ε of the same mode because
    /// this field's covariance was isotropic.
    pub isotropic_fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub eps: f64,
    pub mode: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepMeta {
    pub anchor: Anchor,
    pub nb: usize,
    pub weighting: Weighting,
    pub gauge: GaugeMode,
    pub config_hash: String,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub records: Vec<Record>,
    pub meta: SweepMeta,
}

impl SweepResult {
    /// Distinct mode labels in ascending order.
    pub fn modes(&self) -> Vec<String> {
        self.records.iter().map(|r| r.mode.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Distinct ε values in ascending order.
    pub fn eps_values(&self) -> Vec<f64> {
        let mut eps: Vec<f64> = self.records.iter().map(|r| r.eps).collect();
        eps.dedup();
        eps
    }

    pub fn mode_records<'a>(&'a self, mode: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.mode == mode)
    }

    /// `(ε, value)` pairs of one mode.
    pub fn series(&self, mode: &str, f: impl Fn(&Record) -> f64) -> Vec<(f64, f64)> {
        self.mode_records(mode).map(|r| (r.eps, f(r))).collect()
    }
}

struct Prepared {
    cloud: Result<SampleCloud>,
    theta: Option<Result<f64>>,
}

/// Runs the sweep over already loaded fields with an explicit NB and
/// weighting.
pub fn run_sweep_on(
    config: &RunConfig,
    fields: &[SweepFields],
    nb: usize,
    weighting: Weighting,
) -> Result<SweepResult> {
    let anchor = calibrate_anchor(config, fields, weighting)?;
    info!(
        "anchor eps = {} theta = {:.6} window R [{:.6e}, {:.6e}] I [{:.6e}, {:.6e}]",
        anchor.eps_anchor,
        anchor.theta_anchor,
        anchor.window.rmin,
        anchor.window.rmax,
        anchor.window.imin,
        anchor.window.imax
    );

    let points: Vec<(usize, usize)> = fields
        .iter()
        .enumerate()
        .flat_map(|(k, s)| (0..s.fields.len()).map(move |m| (k, m)))
        .collect();

    let prepared: Vec<Prepared> = points
        .par_iter()
        .map(|&(k, m)| {
            let cloud = retain_interior(&fields[k].fields[m]);
            let theta = match (&cloud, config.gauge) {
                (Ok(c), GaugeMode::PerEps) => Some(field_orientation(c, weighting)),
                (Ok(_), GaugeMode::Anchor) => Some(Ok(anchor.theta_anchor)),
                (Err(_), _) => None,
            };
            Prepared { cloud, theta }
        })
        .collect();

    // isotropic fallback, resolved sequentially so the choice is fixed
    let mut thetas: Vec<Option<(f64, bool)>> = prepared
        .iter()
        .map(|p| match &p.theta {
            Some(Ok(t)) => Some((*t, false)),
            _ => None,
        })
        .collect();
    for (idx, p) in prepared.iter().enumerate() {
        if let Some(Err(Error::IsotropicCovariance { .. })) = &p.theta {
            let (k, m) = points[idx];
            let mode = &fields[k].fields[m].meta.mode;
            let donor = points
                .iter()
                .enumerate()
                .filter(|&(j, &(kj, mj))| {
                    j != idx
                        && &fields[kj].fields[mj].meta.mode == mode
                        && matches!(prepared[j].theta, Some(Ok(_)))
                })
                .min_by(|a, b| {
                    let da = fields[a.1 .0].eps - fields[k].eps;
                    let db = fields[b.1 .0].eps - fields[k].eps;
                    da.abs().total_cmp(&db.abs()).then(da.total_cmp(&db))
                })
                .map(|(j, _)| j);
            if let Some(j) = donor {
                let t = thetas[j].expect("donor has an angle").0;
                warn!("eps = {} mode = {mode}: isotropic covariance, reusing theta = {t} from eps = {}",
                    fields[k].eps, fields[points[j].0].eps);
                thetas[idx] = Some((t, true));
            }
        }
    }

    let outcomes: Vec<Result<Record>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, &(k, m))| {
            let field = &fields[k].fields[m];
            let cloud = match &prepared[idx].cloud {
                Ok(c) => c,
                Err(e) => return Err(Error::InvalidModel(e.to_string())),
            };
            let (theta, fallback) = match (&thetas[idx], &prepared[idx].theta) {
                (Some(t), _) => *t,
                (None, Some(Err(e))) => return Err(Error::InvalidModel(e.to_string())),
                (None, _) => return Err(Error::EmptyCloud),
            };
            let a = measure(cloud, theta, &anchor.window, nb, weighting)?;
            Ok(Record {
                eps: fields[k].eps,
                mode: field.meta.mode.clone(),
                theta,
                lambda: field.meta.lambda,
                measures: a.measures,
                nb,
                weighting,
                clamped_pct: a.clamped_pct,
                isotropic_fallback: fallback,
            })
        })
        .collect();

    let mut records = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => {
                let (k, m) = points[idx];
                let f = Failure {
                    eps: fields[k].eps,
                    mode: fields[k].fields[m].meta.mode.clone(),
                    reason: e.to_string(),
                };
                warn!("eps = {} mode = {}: {}", f.eps, f.mode, f.reason);
                failures.push(f);
            }
        }
    }
    if failures.len() as f64 > FAILURE_BUDGET * points.len() as f64 {
        return Err(Error::SweepBudget { failed: failures.len(), total: points.len() });
    }
    records.sort_by(|a, b| a.eps.total_cmp(&b.eps).then_with(|| a.mode.cmp(&b.mode)));

    Ok(SweepResult {
        records,
        meta: SweepMeta {
            anchor,
            nb,
            weighting,
            gauge: config.gauge,
            config_hash: crate::cli_io::config_hash(config),
            failures,
        },
    })
}

/// Full sweep with the configured NB and weighting.
pub fn run_sweep(config: &RunConfig) -> Result<SweepResult> {
    config.validate()?;
    let fields = load_fields(config)?;
    run_sweep_on(config, &fields, config.nb, config.weighting)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Peak location and prominence of one series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakSummary {
    /// `None` when the series has fewer than two points.
    pub argmax_eps: Option<f64>,
    pub peak: f64,
    pub median: f64,
    /// `peak - median`.
    pub prominence: f64,
}

pub fn peak_summary(series: &[(f64, f64)]) -> PeakSummary {
    let values: Vec<f64> = series.iter().map(|p| p.1).collect();
    let mut best: Option<(f64, f64)> = None;
    for &(e, v) in series {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((e, v));
        }
    }
    let peak = best.map(|b| b.1).unwrap_or(f64::NAN);
    let med = median(&values);
    PeakSummary {
        argmax_eps: if series.len() >= 2 { best.map(|b| b.0) } else { None },
        peak,
        median: med,
        prominence: peak - med,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantRow {
    pub nb: usize,
    pub weighting: Weighting,
    pub mode: String,
    pub mi: PeakSummary,
    pub h_ri: PeakSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessReport {
    pub rows: Vec<VariantRow>,
    /// Per (weighting, mode): the MI argmax agrees across every NB. Empty
    /// when no variant has a peak (single-ε sweeps).
    pub nb_stable: Vec<(Weighting, String, bool)>,
    pub failures: Vec<(usize, Weighting, String)>,
}

impl RobustnessReport {
    pub fn all_stable(&self) -> bool {
        self.nb_stable.iter().all(|s| s.2)
    }

    pub fn row(&self, nb: usize, weighting: Weighting, mode: &str) -> Option<&VariantRow> {
        self.rows.iter().find(|r| r.nb == nb && r.weighting == weighting && r.mode == mode)
    }
}

/// Reruns the sweep for every NB and weighting in the config and compares
/// peak positions and prominences.
pub fn robustness_suite(config: &RunConfig) -> Result<RobustnessReport> {
    config.validate()?;
    let fields = load_fields(config)?;
    let variants: Vec<(usize, Weighting)> = config
        .robust_weighting
        .iter()
        .flat_map(|&w| config.robust_nb.iter().map(move |&nb| (nb, w)))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &(nb, weighting) in &variants {
        let result = match run_sweep_on(config, &fields, nb, weighting) {
            Ok(r) => r,
            Err(e) => {
                failures.push((nb, weighting, e.to_string()));
                continue;
            }
        };
        for mode in result.modes() {
            rows.push(VariantRow {
                nb,
                weighting,
                mi: peak_summary(&result.series(&mode, |r| r.measures.mi)),
                h_ri: peak_summary(&result.series(&mode, |r| r.measures.h_ri)),
                mode,
            });
        }
    }

    let mut nb_stable = Vec::new();
    for &weighting in &config.robust_weighting {
        let modes: BTreeSet<&str> = rows
            .iter()
            .filter(|r| r.weighting == weighting)
            .map(|r| r.mode.as_str())
            .collect();
        for mode in modes {
            let peaks: Vec<Option<f64>> = rows
                .iter()
                .filter(|r| r.weighting == weighting && r.mode == mode)
                .map(|r| r.mi.argmax_eps)
                .collect();
            // a single-ε sweep has no peak to compare
            if peaks.iter().all(Option::is_none) {
                continue;
            }
            let stable = peaks.iter().all(|p| p.is_some() && *p == peaks[0]);
            nb_stable.push((weighting, mode.to_string(), stable));
        }
    }
    Ok(RobustnessReport { rows, nb_stable, failures })
}

/// Ratio between the largest wrapped `|Δθ|` of adjacent grid points within
/// `half_width` steps of `k_ac` and the median `|Δθ|` elsewhere.
pub fn theta_jump_ratio(result: &SweepResult, mode: &str, k_ac: usize, half_width: usize) -> f64 {
    let thetas: Vec<f64> = result.mode_records(mode).map(|r| r.theta).collect();
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for k in 0..thetas.len().saturating_sub(1) {
        let d = wrap_half_pi(thetas[k + 1] - thetas[k]).abs();
        if k.abs_diff(k_ac) <= half_width && (k + 1).abs_diff(k_ac) <= half_width {
            inside.push(d);
        } else {
            outside.push(d);
        }
    }
    let max_in = inside.iter().copied().fold(0.0, f64::max);
    max_in / median(&outside)
}

/// Fraction of the total aligned sample mass (all ε and modes, rotated by
/// the recorded angles) that lies inside the sweep window.
pub fn window_containment(result: &SweepResult, fields: &[SweepFields]) -> Result<f64> {
    let mut inside = crate::summation::NeumaierSum::new();
    let mut total = crate::summation::NeumaierSum::new();
    let w = &result.meta.anchor.window;
    for rec in &result.records {
        let field = fields
            .iter()
            .filter(|s| s.eps == rec.eps)
            .flat_map(|s| &s.fields)
            .find(|f| f.meta.mode == rec.mode)
            .ok_or(Error::EmptyCloud)?;
        let cloud = align(&retain_interior(field)?, rec.theta);
        for (&(r, i), &wt) in cloud.points.iter().zip(&cloud.weights) {
            let wt = rec.weighting.apply(wt);
            total.add(wt);
            if w.contains(r, i) {
                inside.add(wt);
            }
        }
    }
    Ok(inside.value() / total.value())
}
