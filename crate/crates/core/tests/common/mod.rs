//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

use nalgebra::Matrix2;
use num_complex::Complex64;
use quadspace::coupled_mode::EffectiveHamiltonian;
use quadspace::gauge::SampleCloud;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Double-double accumulator (Knuth two-sum), used as a high-precision
/// reference for compensated sums.
#[derive(Clone, Copy, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        let lo = self.lo + err;
        let hi = s + lo;
        self.lo = lo - (hi - s);
        self.hi = hi;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

pub fn dd_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = DoubleDouble::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Eigenvalues from nalgebra's complex Schur decomposition, sorted like
/// `coupled_mode::eigenvalues` (real part, then imaginary part).
pub fn reference_eigenvalues(h: &EffectiveHamiltonian) -> (Complex64, Complex64) {
    let m = h.matrix();
    let dense = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
    let ev = dense.schur().eigenvalues().expect("triangular Schur form");
    let (a, b) = (ev[0], ev[1]);
    let greater = a.re > b.re || (a.re == b.re && a.im >= b.im);
    if greater {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn random_hamiltonian(rng: &mut impl Rng) -> EffectiveHamiltonian {
    EffectiveHamiltonian::new(
        rng.gen_range(-10.0..10.0),
        rng.gen_range(0.0..2.0),
        rng.gen_range(-10.0..10.0),
        rng.gen_range(0.0..2.0),
        rng.gen_range(-3.0..3.0),
    )
    .unwrap()
}

/// Anisotropic Gaussian-ish cloud with positive weights and a random tilt.
pub fn random_cloud(rng: &mut impl Rng, n: usize) -> SampleCloud {
    let tilt: f64 = rng.gen_range(-3.2..3.2);
    let (sx, sy) = (rng.gen_range(0.5..3.0), rng.gen_range(0.05..0.45));
    let (s, c) = tilt.sin_cos();
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen_range(-1.0..1.0) * sx;
        let v: f64 = rng.gen_range(-1.0..1.0) * sy;
        points.push((c * u - s * v, s * u + c * v));
        weights.push(rng.gen_range(0.01..1.0));
    }
    SampleCloud::new(points, weights).unwrap()
}

/// Rotates every sample by the global phase `e^{iχ}`.
pub fn phase_rotate(cloud: &SampleCloud, chi: f64) -> SampleCloud {
    let (s, c) = chi.sin_cos();
    let mut out = cloud.clone();
    for p in &mut out.points {
        *p = (c * p.0 - s * p.1, s * p.0 + c * p.1);
    }
    out
}

/// Distance between two angles modulo π.
pub fn angle_dist_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}
