//! Common quadrature window and NB x NB weighted histograms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauge::{align, SampleCloud, Weighting};
use crate::summation::NeumaierSum;

pub const DEFAULT_Q_LO: f64 = 0.005;
pub const DEFAULT_Q_HI: f64 = 0.995;
pub const DEFAULT_PADDING: f64 = 0.05;
pub const DEFAULT_NB: usize = 500;
/// Upper bound on the anchor subset used for the window quantiles.
pub const WINDOW_SUBSET_MAX: usize = 100_000;

/// Rectangular window `[rmin, rmax] x [imin, imax]` in the aligned frame,
/// with the calibration settings it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub rmin: f64,
    pub rmax: f64,
    pub imin: f64,
    pub imax: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub padding: f64,
}

impl Window {
    pub fn new(rmin: f64, rmax: f64, imin: f64, imax: f64) -> Result<Self> {
        Self::with_calibration(rmin, rmax, imin, imax, f64::NAN, f64::NAN, f64::NAN)
    }

    pub fn with_calibration(
        rmin: f64,
        rmax: f64,
        imin: f64,
        imax: f64,
        q_lo: f64,
        q_hi: f64,
        padding: f64,
    ) -> Result<Self> {
        if ![rmin, rmax, imin, imax].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("window bounds must be finite".into()));
        }
        if !(rmax > rmin) {
            return Err(Error::DegenerateWindow { axis: "R" });
        }
        if !(imax > imin) {
            return Err(Error::DegenerateWindow { axis: "I" });
        }
        Ok(Self { rmin, rmax, imin, imax, q_lo, q_hi, padding })
    }

    pub fn delta_r(&self) -> f64 {
        self.rmax - self.rmin
    }

    pub fn delta_i(&self) -> f64 {
        self.imax - self.imin
    }

    pub fn contains(&self, r: f64, i: f64) -> bool {
        r >= self.rmin && r <= self.rmax && i >= self.imin && i <= self.imax
    }
}

/// Smallest value whose cumulative weight reaches `q` of the total.
/// `pairs` must be sorted by value.
fn weighted_quantile(pairs: &[(f64, f64)], cumulative: &[f64], q: f64) -> f64 {
    let total = *cumulative.last().expect("non-empty");
    let target = q * total;
    let k = cumulative.partition_point(|&c| c < target);
    pairs[k.min(pairs.len() - 1)].0
}

fn axis_quantiles(mut pairs: Vec<(f64, f64)>, q_lo: f64, q_hi: f64) -> Result<(f64, f64)> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut running = 0.0;
    let cumulative: Vec<f64> = pairs
        .iter()
        .map(|&(_, w)| {
            running += w;
            running
        })
        .collect();
    if !(running > 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok((
        weighted_quantile(&pairs, &cumulative, q_lo),
        weighted_quantile(&pairs, &cumulative, q_hi),
    ))
}

/// Window from a stride subset of the anchor cloud rotated by `θ_anchor`:
/// weighted quantiles `[q_lo, q_hi]` per axis, each side padded by
/// `padding * span`.
pub fn global_window(
    anchor: &SampleCloud,
    theta_anchor: f64,
    q_lo: f64,
    q_hi: f64,
    padding: f64,
) -> Result<Window> {
    if anchor.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(0.0..=1.0).contains(&q_lo) || !(0.0..=1.0).contains(&q_hi) || !(q_lo < q_hi) {
        return Err(Error::Config(format!(
            "window quantiles must satisfy 0 <= q_lo < q_hi <= 1, got {q_lo}, {q_hi}"
        )));
    }
    if !(padding >= 0.0) {
        return Err(Error::Config(format!("window padding must be >= 0, got {padding}")));
    }
    let stride = anchor.len().div_ceil(WINDOW_SUBSET_MAX);
    let subset = SampleCloud {
        points: anchor.points.iter().step_by(stride).copied().collect(),
        weights: anchor.weights.iter().step_by(stride).copied().collect(),
        eps: anchor.eps,
        mode: anchor.mode.clone(),
    };
    let rotated = align(&subset, theta_anchor);
    let r_pairs = rotated.points.iter().zip(&rotated.weights).map(|(p, &w)| (p.0, w)).collect();
    let i_pairs = rotated.points.iter().zip(&rotated.weights).map(|(p, &w)| (p.1, w)).collect();
    let (r_lo, r_hi) = axis_quantiles(r_pairs, q_lo, q_hi)?;
    let (i_lo, i_hi) = axis_quantiles(i_pairs, q_lo, q_hi)?;
    let (dr, di) = (r_hi - r_lo, i_hi - i_lo);
    if !(dr > 0.0) {
        return Err(Error::DegenerateWindow { axis: "R" });
    }
    if !(di > 0.0) {
        return Err(Error::DegenerateWindow { axis: "I" });
    }
    Window::with_calibration(
        r_lo - padding * dr,
        r_hi + padding * dr,
        i_lo - padding * di,
        i_hi + padding * di,
        q_lo,
        q_hi,
        padding,
    )
}

/// Floor-and-clamp index along one axis; the flag reports whether clamping
/// moved the sample.
#[inline]
fn axis_index(v: f64, lo: f64, span: f64, nb: usize) -> (usize, bool) {
    let t = (v - lo) / span * nb as f64;
    if !(t >= 0.0) {
        (0, true)
    } else if t >= nb as f64 {
        // the upper endpoint itself belongs to the last bin
        (nb - 1, v > lo + span)
    } else {
        ((t.floor() as usize).min(nb - 1), false)
    }
}

/// Bin `(a, b)` of the sample `(r, i)`; always within `[0, nb-1]`.
pub fn bin_index(r: f64, i: f64, window: &Window, nb: usize) -> (usize, usize) {
    assert!(nb >= 2, "need at least two bins per axis");
    let (a, _) = axis_index(r, window.rmin, window.delta_r(), nb);
    let (b, _) = axis_index(i, window.imin, window.delta_i(), nb);
    (a, b)
}

/// Per-bin compensated accumulator. Private accumulators over disjoint
/// sample partitions can be merged.
#[derive(Clone, Debug)]
pub struct BinAccumulator {
    nb: usize,
    bins: Vec<NeumaierSum>,
    clamped: NeumaierSum,
}

impl BinAccumulator {
    pub fn new(nb: usize) -> Self {
        assert!(nb >= 2, "need at least two bins per axis");
        Self { nb, bins: vec![NeumaierSum::new(); nb * nb], clamped: NeumaierSum::new() }
    }

    pub fn add_sample(&mut self, r: f64, i: f64, w: f64, window: &Window) {
        let (a, ca) = axis_index(r, window.rmin, window.delta_r(), self.nb);
        let (b, cb) = axis_index(i, window.imin, window.delta_i(), self.nb);
        self.bins[a * self.nb + b].add(w);
        if ca || cb {
            self.clamped.add(w);
        }
    }

    pub fn merge(&mut self, other: &BinAccumulator) {
        assert_eq!(self.nb, other.nb);
        for (s, o) in self.bins.iter_mut().zip(&other.bins) {
            s.merge(o);
        }
        self.clamped.merge(&other.clamped);
    }

    pub fn finish(self, window: Window) -> Result<QuadratureHistogram> {
        let counts: Vec<f64> = self.bins.iter().map(NeumaierSum::value).collect();
        let mut hist = QuadratureHistogram::from_counts(counts, self.nb, window)?;
        hist.clamped_weight = self.clamped.value();
        Ok(hist)
    }
}

/// Weighted NB x NB histogram. `counts[a * nb + b]` holds bin `(a, b)`,
/// `a` along R and `b` along I.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureHistogram {
    pub nb: usize,
    pub counts: Vec<f64>,
    pub total: f64,
    pub probs: Vec<f64>,
    pub window: Window,
    /// Weight that fell outside the window and was clamped into edge bins.
    pub clamped_weight: f64,
}

impl QuadratureHistogram {
    pub fn from_counts(counts: Vec<f64>, nb: usize, window: Window) -> Result<Self> {
        if nb < 2 || counts.len() != nb * nb {
            return Err(Error::InvalidModel(format!(
                "expected {nb}x{nb} counts, got {}",
                counts.len()
            )));
        }
        if counts.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidModel("bin counts must be finite and >= 0".into()));
        }
        let total = crate::summation::compensated_sum(counts.iter().copied());
        if !(total > 0.0) {
            return Err(Error::ZeroWeight);
        }
        let probs = counts.iter().map(|c| c / total).collect();
        Ok(Self { nb, counts, total, probs, window, clamped_weight: 0.0 })
    }

    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.nb + b]
    }

    /// Percentage of the total weight clamped into edge bins.
    pub fn clamped_pct(&self) -> f64 {
        100.0 * self.clamped_weight / self.total
    }

    /// Histogram with the bin grid transposed (R and I exchanged).
    pub fn transposed(&self) -> Self {
        let nb = self.nb;
        let mut counts = vec![0.0; nb * nb];
        for a in 0..nb {
            for b in 0..nb {
                counts[b * nb + a] = self.counts[a * nb + b];
            }
        }
        let w = self.window;
        let window = Window { rmin: w.imin, rmax: w.imax, imin: w.rmin, imax: w.rmax, ..w };
        let mut out = Self::from_counts(counts, nb, window).expect("valid source");
        out.clamped_weight = self.clamped_weight;
        out
    }
}

const BIN_CHUNK: usize = 4096;

/// Accumulates each sample's weight into its clamped bin. Bin indices are
/// computed in parallel; accumulation runs in sample order so the result
/// does not depend on the worker count.
pub fn histogram(
    cloud: &SampleCloud,
    window: &Window,
    nb: usize,
    weighting: Weighting,
) -> Result<QuadratureHistogram> {
    if nb < 2 {
        return Err(Error::Config(format!("NB must be >= 2, got {nb}")));
    }
    let (dr, di) = (window.delta_r(), window.delta_i());
    let indexed: Vec<(u32, bool)> = cloud
        .points
        .par_chunks(BIN_CHUNK)
        .flat_map_iter(|chunk| {
            chunk.iter().map(|&(r, i)| {
                let (a, ca) = axis_index(r, window.rmin, dr, nb);
                let (b, cb) = axis_index(i, window.imin, di, nb);
                ((a * nb + b) as u32, ca || cb)
            })
        })
        .collect();
    let mut acc = BinAccumulator::new(nb);
    for ((bin, clamped), &w) in indexed.into_iter().zip(&cloud.weights) {
        let w = weighting.apply(w);
        acc.bins[bin as usize].add(w);
        if clamped {
            acc.clamped.add(w);
        }
    }
    acc.finish(*window)
}

/// Marginal distributions `p_R(a) = Σ_b p(a,b)` and `p_I(b) = Σ_a p(a,b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalPair {
    pub p_r: Vec<f64>,
    pub p_i: Vec<f64>,
}

pub fn marginals(hist: &QuadratureHistogram) -> MarginalPair {
    let nb = hist.nb;
    let mut cols = vec![NeumaierSum::new(); nb];
    let p_r = hist
        .probs
        .chunks_exact(nb)
        .map(|row| {
            for (c, &p) in cols.iter_mut().zip(row) {
                c.add(p);
            }
            crate::summation::compensated_sum(row.iter().copied())
        })
        .collect();
    let p_i = cols.iter().map(NeumaierSum::value).collect();
    MarginalPair { p_r, p_i }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_window() -> Window {
        Window::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    fn grid_cloud(n: usize) -> SampleCloud {
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                pts.push((i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        let w = vec![1.0; pts.len()];
        SampleCloud::new(pts, w).unwrap()
    }

    #[test]
    fn full_quantile_window_of_unit_square() {
        let c = grid_cloud(20);
        let w = global_window(&c, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!((w.rmin, w.rmax, w.imin, w.imax), (0.0, 1.0, 0.0, 1.0));
        let w = global_window(&c, 0.0, 0.0, 1.0, 0.05).unwrap();
        assert_eq!((w.rmin, w.rmax, w.imin, w.imax), (-0.05, 1.05, -0.05, 1.05));
    }

    #[test]
    fn window_errors() {
        let c = grid_cloud(4);
        assert!(global_window(&c, 0.0, 0.6, 0.4, 0.0).is_err());
        let flat = SampleCloud::new(vec![(0.0, 1.0), (1.0, 1.0)], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            global_window(&flat, 0.0, 0.0, 1.0, 0.0),
            Err(Error::DegenerateWindow { axis: "I" })
        ));
        assert!(matches!(
            global_window(&SampleCloud::default(), 0.0, 0.0, 1.0, 0.0),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn bin_index_endpoints_and_clamping() {
        let w = Window::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        assert_eq!(bin_index(-1.0, -2.0, &w, 500), (0, 0));
        assert_eq!(bin_index(1.0, 2.0, &w, 500), (499, 499));
        assert_eq!(bin_index(0.0, 0.0, &w, 500), (250, 250));
        assert_eq!(bin_index(1e300, -1e300, &w, 500), (499, 0));
        assert_eq!(bin_index(-7.0, 9.0, &w, 500), (0, 499));
        assert_eq!(bin_index(f64::MAX, f64::MIN, &w, 2), (1, 0));
    }

    #[test]
    fn single_and_split_samples() {
        let c = SampleCloud::new(vec![(0.3, 0.3)], vec![5.0]).unwrap();
        let h = histogram(&c, &unit_window(), 4, Weighting::Intensity).unwrap();
        assert_eq!(h.total, 5.0);
        assert_eq!(h.counts[4 + 1], 5.0);
        assert_eq!(h.prob(1, 1), 1.0);

        let c = SampleCloud::new(vec![(0.1, 0.1), (0.9, 0.6)], vec![2.0, 2.0]).unwrap();
        let h = histogram(&c, &unit_window(), 4, Weighting::Intensity).unwrap();
        assert_eq!(h.prob(0, 0), 0.5);
        assert_eq!(h.prob(3, 2), 0.5);
    }

    #[test]
    fn out_of_window_mass_is_kept_and_reported() {
        let c = SampleCloud::new(vec![(0.5, 0.5), (2.0, 0.5), (1.0, 1.0)], vec![1.0, 3.0, 1.0]).unwrap();
        let h = histogram(&c, &unit_window(), 10, Weighting::Intensity).unwrap();
        assert_eq!(h.total, 5.0);
        assert_eq!(h.clamped_weight, 3.0);
        assert!((h.clamped_pct() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn unit_weighting_counts_samples() {
        let c = SampleCloud::new(vec![(0.1, 0.1), (0.9, 0.9)], vec![0.0, 7.0]).unwrap();
        assert!(histogram(&c.reweighted(Weighting::Unit), &unit_window(), 2, Weighting::Unit).is_ok());
        let h = histogram(&c, &unit_window(), 2, Weighting::Unit).unwrap();
        assert_eq!(h.prob(0, 0), 0.5);
        let zero = SampleCloud::new(vec![(0.1, 0.1)], vec![0.0]).unwrap();
        assert!(matches!(
            histogram(&zero, &unit_window(), 2, Weighting::Intensity),
            Err(Error::ZeroWeight)
        ));
    }

    #[test]
    fn marginal_examples() {
        let nb = 5;
        let mut counts = vec![0.0; nb * nb];
        counts[2 * nb + 3] = 1.0;
        let h = QuadratureHistogram::from_counts(counts, nb, unit_window()).unwrap();
        let m = marginals(&h);
        assert_eq!(m.p_r, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.p_i, vec![0.0, 0.0, 0.0, 1.0, 0.0]);

        let h = QuadratureHistogram::from_counts(vec![1.0; nb * nb], nb, unit_window()).unwrap();
        let m = marginals(&h);
        assert!(m.p_r.iter().chain(&m.p_i).all(|p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn transpose_swaps_axes() {
        let h = QuadratureHistogram::from_counts(vec![1.0, 2.0, 3.0, 4.0], 2, unit_window()).unwrap();
        let t = h.transposed();
        assert_eq!(t.counts, vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(marginals(&t).p_r, marginals(&h).p_i);
    }
}
