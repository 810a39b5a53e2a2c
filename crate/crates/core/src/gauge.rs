//! Second-moment gauge fixing of complex samples.
//!
//! A global phase `ψ -> e^{iχ} ψ` rotates the (R, I) cloud rigidly. The
//! principal axis of the weighted, non-centred second-moment matrix gives an
//! orientation `θ` that rotates along with the cloud, so rotating by `-θ`
//! removes the phase freedom up to a sign.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::field_synth::{ComplexField, GridSpec};
use crate::summation::NeumaierSum;

/// Relative threshold below which the covariance counts as isotropic.
pub const ISOTROPY_TOLERANCE: f64 = 1e-12;
/// Relative third-moment level below which a cloud counts as unskewed.
pub const SKEW_TOLERANCE: f64 = 1e-9;
/// Weighted-mean norm (relative to the RMS radius) above which a warning is
/// logged; the moments are non-centred.
pub const MEAN_WARNING_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weighting {
    #[default]
    Intensity,
    Unit,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Intensity => "intensity",
            Weighting::Unit => "unit",
        })
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "intensity" => Ok(Weighting::Intensity),
            "unit" => Ok(Weighting::Unit),
            other => Err(Error::Config(format!("unknown weighting `{other}`"))),
        }
    }
}

impl Weighting {
    #[inline]
    pub fn apply(self, w: f64) -> f64 {
        match self {
            Weighting::Intensity => w,
            Weighting::Unit => 1.0,
        }
    }
}

/// Weighted (R, I) samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleCloud {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    pub eps: f64,
    pub mode: String,
}

impl SampleCloud {
    pub fn new(points: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidModel("points and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidModel("weights must be non-negative".into()));
        }
        Ok(Self { points, weights, eps: 0.0, mode: String::new() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points with weights replaced according to `weighting`.
    pub fn reweighted(&self, weighting: Weighting) -> Self {
        match weighting {
            Weighting::Intensity => self.clone(),
            Weighting::Unit => Self { weights: vec![1.0; self.len()], ..self.clone() },
        }
    }

    /// Cloud of `e^{iχ} (R + iI)`.
    pub fn rotated(&self, chi: f64) -> Self {
        align(self, -chi)
    }

    /// Concatenation of several clouds; provenance taken from the first.
    pub fn union<'a, I: IntoIterator<Item = &'a SampleCloud>>(clouds: I) -> Result<Self> {
        let mut out = SampleCloud::default();
        let mut first = true;
        for c in clouds {
            if first {
                out.eps = c.eps;
                out.mode = c.mode.clone();
                first = false;
            }
            out.points.extend_from_slice(&c.points);
            out.weights.extend_from_slice(&c.weights);
        }
        if out.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(out)
    }
}

/// Retained-sample rule: a node is kept when its own weight or that of a
/// 4-connected neighbour is positive.
pub fn interior_mask(grid: &GridSpec, weights: &[f64]) -> Vec<bool> {
    let (nx, ny) = (grid.nx, grid.ny);
    let positive = |ix: usize, iy: usize| weights[iy * nx + ix] > 0.0;
    let mut mask = vec![false; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            mask[iy * nx + ix] = positive(ix, iy)
                || (ix > 0 && positive(ix - 1, iy))
                || (ix + 1 < nx && positive(ix + 1, iy))
                || (iy > 0 && positive(ix, iy - 1))
                || (iy + 1 < ny && positive(ix, iy + 1));
        }
    }
    mask
}

/// Retained samples in row-major order.
pub fn retain_interior(field: &ComplexField) -> Result<SampleCloud> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for ((z, &w), &keep) in field.values().iter().zip(field.weights()).zip(field.mask()) {
        if keep {
            points.push((z.re, z.im));
            weights.push(w);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(SampleCloud {
        points,
        weights,
        eps: field.meta.eps,
        mode: field.meta.mode.clone(),
    })
}

/// Non-centred weighted second moments `<R^2>`, `<RI>`, `<I^2>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceMatrix {
    pub srr: f64,
    pub sri: f64,
    pub sii: f64,
    /// Weighted mean `(<R>, <I>)`, kept for diagnostics only.
    pub wmean: (f64, f64),
    pub total_weight: f64,
}

pub fn weighted_covariance(cloud: &SampleCloud, weighting: Weighting) -> Result<CovarianceMatrix> {
    let mut z = NeumaierSum::new();
    let mut mr = NeumaierSum::new();
    let mut mi = NeumaierSum::new();
    let mut rr = NeumaierSum::new();
    let mut ri = NeumaierSum::new();
    let mut ii = NeumaierSum::new();
    for (&(r, i), &w) in cloud.points.iter().zip(&cloud.weights) {
        let w = weighting.apply(w);
        z.add(w);
        mr.add(w * r);
        mi.add(w * i);
        rr.add(w * r * r);
        ri.add(w * r * i);
        ii.add(w * i * i);
    }
    let total = z.value();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let cov = CovarianceMatrix {
        srr: rr.value() / total,
        sri: ri.value() / total,
        sii: ii.value() / total,
        wmean: (mr.value() / total, mi.value() / total),
        total_weight: total,
    };
    let mean_norm = cov.wmean.0.hypot(cov.wmean.1);
    if mean_norm > MEAN_WARNING_FRACTION * (cov.srr + cov.sii).sqrt() {
        warn!(
            "eps = {} mode = {}: weighted mean |<(R,I)>| = {:.3e} is not negligible against RMS radius {:.3e}",
            cloud.eps,
            cloud.mode,
            mean_norm,
            (cov.srr + cov.sii).sqrt()
        );
    }
    Ok(cov)
}

/// Maps an angle onto `(-π/2, π/2]`.
pub fn wrap_half_pi(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(PI);
    if a > FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// `θ = ½ atan2(2<RI>, <R^2> - <I^2>)` in `(-π/2, π/2]`.
pub fn orientation_angle(cov: &CovarianceMatrix) -> Result<f64> {
    let y = 2.0 * cov.sri;
    let x = cov.srr - cov.sii;
    let tol = ISOTROPY_TOLERANCE * (cov.srr + cov.sii);
    if y.abs() <= tol && x.abs() <= tol {
        return Err(Error::IsotropicCovariance { srr: cov.srr, sri: cov.sri, sii: cov.sii });
    }
    let theta = 0.5 * y.atan2(x);
    // atan2 can return -π for a negative-zero numerator
    Ok(if theta <= -FRAC_PI_2 { theta + PI } else { theta })
}

/// Rotation angle that aligns the major axis with `R'` and orients it so
/// the weighted third moment `<R'^3>` is non-negative.
///
/// `orientation_angle` only fixes the axis modulo π; the two candidates
/// give point-reflected clouds, which bin differently in an asymmetric
/// window. Resolving the sign from the cloud itself keeps the aligned cloud
/// (and everything measured on it) invariant under a global phase. Returns
/// an angle in `(-π, π]`; clouds with vanishing skew keep `θ`.
pub fn frame_angle(cloud: &SampleCloud, weighting: Weighting) -> Result<f64> {
    let cov = weighted_covariance(cloud, weighting)?;
    let theta = orientation_angle(&cov)?;
    let (s, c) = theta.sin_cos();
    let mut m3 = NeumaierSum::new();
    for (&(r, i), &w) in cloud.points.iter().zip(&cloud.weights) {
        let x = c * r + s * i;
        m3.add(weighting.apply(w) * x * x * x);
    }
    let m3 = m3.value() / cov.total_weight;
    let tol = SKEW_TOLERANCE * cov.srr.max(0.0).powf(1.5);
    Ok(match m3 < -tol {
        false => theta,
        true if theta > 0.0 => theta - PI,
        true => theta + PI,
    })
}

/// Active rotation `R' + iI' = e^{-iθ} (R + iI)`.
pub fn align(cloud: &SampleCloud, theta: f64) -> SampleCloud {
    let (s, c) = theta.sin_cos();
    let points = cloud
        .points
        .iter()
        .map(|&(r, i)| (c * r + s * i, c * i - s * r))
        .collect();
    SampleCloud {
        points,
        weights: cloud.weights.clone(),
        eps: cloud.eps,
        mode: cloud.mode.clone(),
    }
}
