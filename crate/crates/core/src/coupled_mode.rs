//! Two-mode non-Hermitian coupled-mode model.
//!
//! `H = [[Ω1, g], [g, Ω2]]` with `Ωj = ωj - iγj`, real `g` and `γj >= 0`.
//! Eigenvalues carry the `K = Kr - iKi` sign convention, so lossy branches
//! have negative imaginary parts.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative threshold on the discriminant below which eigenvectors are
/// refused.
pub const EP_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveHamiltonian {
    omega1: f64,
    omega2: f64,
    gamma1: f64,
    gamma2: f64,
    g: f64,
}

impl EffectiveHamiltonian {
    pub fn new(omega1: f64, gamma1: f64, omega2: f64, gamma2: f64, g: f64) -> Result<Self> {
        let all = [omega1, gamma1, omega2, gamma2, g];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite Hamiltonian entry".into()));
        }
        if gamma1 < 0.0 || gamma2 < 0.0 {
            return Err(Error::InvalidModel(format!(
                "loss rates must be non-negative (gamma1 = {gamma1}, gamma2 = {gamma2})"
            )));
        }
        Ok(Self { omega1, omega2, gamma1, gamma2, g })
    }

    /// Complex diagonal entries `(Ω1, Ω2)`.
    pub fn diagonal(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.omega1, -self.gamma1),
            Complex64::new(self.omega2, -self.gamma2),
        )
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    /// Rows of the matrix, for residual checks.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let (o1, o2) = self.diagonal();
        let g = Complex64::new(self.g, 0.0);
        [[o1, g], [g, o2]]
    }

    /// `((Ω1 - Ω2)/2)^2 + g^2`.
    pub fn discriminant(&self) -> Complex64 {
        let (o1, o2) = self.diagonal();
        let half = (o1 - o2) * 0.5;
        half * half + self.g * self.g
    }

    /// Largest entry magnitude; the scale used by the exceptional-point test.
    pub fn scale(&self) -> f64 {
        let (o1, o2) = self.diagonal();
        o1.norm().max(o2.norm()).max(self.g.abs())
    }

    pub fn is_exceptional(&self) -> bool {
        let s = self.scale();
        self.discriminant().norm() <= EP_TOLERANCE * s * s
    }
}

/// `(λ+, λ-)`, with `λ+` the root of larger real part (ties: larger
/// imaginary part).
pub fn eigenvalues(h: &EffectiveHamiltonian) -> (Complex64, Complex64) {
    let (o1, o2) = h.diagonal();
    let mean = (o1 + o2) * 0.5;
    let root = h.discriminant().sqrt();
    order_pair(mean + root, mean - root)
}

fn order_pair(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    if a.re > b.re || (a.re == b.re && a.im >= b.im) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Unit eigenvectors for `(λ+, λ-)`, first nonzero entry real-positive.
pub fn eigenvectors(h: &EffectiveHamiltonian) -> Result<([Complex64; 2], [Complex64; 2])> {
    if h.is_exceptional() {
        return Err(Error::ExceptionalPoint {
            eps: f64::NAN,
            discriminant: h.discriminant().norm(),
        });
    }
    let (lp, lm) = eigenvalues(h);
    Ok((eigenvector_for(h, lp), eigenvector_for(h, lm)))
}

/// Eigenvector for a known eigenvalue `lambda` of `h`. Both `(g, λ-Ω1)` and
/// `(λ-Ω2, g)` span the eigenspace away from an exceptional point; the
/// longer one is the better conditioned.
fn eigenvector_for(h: &EffectiveHamiltonian, lambda: Complex64) -> [Complex64; 2] {
    let (o1, o2) = h.diagonal();
    let g = Complex64::new(h.g, 0.0);
    let a = [g, lambda - o1];
    let b = [lambda - o2, g];
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    let v = if na >= nb { a } else { b };
    fix_phase(v)
}

fn fix_phase(v: [Complex64; 2]) -> [Complex64; 2] {
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let lead = if v[0] != Complex64::new(0.0, 0.0) { v[0] } else { v[1] };
    // dividing by lead/|lead| makes the lead entry real-positive
    let phase = lead / lead.norm();
    let scale = phase * norm;
    let mut out = [v[0] / scale, v[1] / scale];
    if out[0] != Complex64::new(0.0, 0.0) {
        out[0].im = 0.0;
    } else {
        out[1].im = 0.0;
    }
    out
}

/// `slope * eps + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub const fn new(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub const fn constant(value: f64) -> Self {
        Self { slope: 0.0, intercept: value }
    }

    pub fn at(&self, eps: f64) -> f64 {
        self.slope * eps + self.intercept
    }
}

/// Affine detuning of both modes over an ordered grid of control values.
#[derive(Clone, Debug, PartialEq)]
pub struct DetuningModel {
    pub omega1: Affine,
    pub omega2: Affine,
    pub gamma1: Affine,
    pub gamma2: Affine,
    pub g: f64,
    eps_grid: Vec<f64>,
}

impl DetuningModel {
    pub fn new(
        omega1: Affine,
        omega2: Affine,
        gamma1: Affine,
        gamma2: Affine,
        g: f64,
        eps_grid: Vec<f64>,
    ) -> Result<Self> {
        if eps_grid.len() < 3 {
            return Err(Error::InvalidModel(format!(
                "eps grid needs at least 3 points, got {}",
                eps_grid.len()
            )));
        }
        if eps_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModel("eps grid must be strictly increasing".into()));
        }
        let model = Self { omega1, omega2, gamma1, gamma2, g, eps_grid };
        for &eps in &model.eps_grid {
            model.hamiltonian(eps)?;
        }
        Ok(model)
    }

    pub fn eps_grid(&self) -> &[f64] {
        &self.eps_grid
    }

    pub fn hamiltonian(&self, eps: f64) -> Result<EffectiveHamiltonian> {
        EffectiveHamiltonian::new(
            self.omega1.at(eps),
            self.gamma1.at(eps),
            self.omega2.at(eps),
            self.gamma2.at(eps),
            self.g,
        )
    }

    /// Same model with the two rows exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            omega1: self.omega2,
            omega2: self.omega1,
            gamma1: self.gamma2,
            gamma2: self.gamma1,
            g: self.g,
            eps_grid: self.eps_grid.clone(),
        }
    }

    /// Symmetric detuning about `eps_star`: `ω1,2 = ω0 ± slope (ε - ε*)`,
    /// constant losses.
    pub fn symmetric(
        omega0: f64,
        slope: f64,
        eps_star: f64,
        gamma1: f64,
        gamma2: f64,
        g: f64,
        eps_grid: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            Affine::new(slope, omega0 - slope * eps_star),
            Affine::new(-slope, omega0 + slope * eps_star),
            Affine::constant(gamma1),
            Affine::constant(gamma2),
            g,
            eps_grid,
        )
    }

    /// Crossing centred at ε* = 0.16655 inside [0.161, 0.172]. The 45-point
    /// grid has spacing 2.4e-4 and puts ε* on node 22. Loss contrast
    /// `|γ1-γ2|/2 = 0.9 g`, so the real parts repel while the imaginary
    /// parts cross.
    pub fn reference() -> Self {
        Self::symmetric(
            REFERENCE_OMEGA0,
            REFERENCE_SLOPE,
            REFERENCE_EPS_STAR,
            REFERENCE_GAMMA1,
            REFERENCE_GAMMA2,
            REFERENCE_G,
            linspace(REFERENCE_EPS_START, REFERENCE_EPS_STOP, REFERENCE_EPS_COUNT),
        )
        .expect("reference preset is valid")
    }

    /// Reference grid and detuning with the coupling switched off.
    pub fn decoupled() -> Self {
        Self { g: 0.0, ..Self::reference() }
    }
}

pub const REFERENCE_EPS_STAR: f64 = 0.16655;
pub const REFERENCE_EPS_START: f64 = 0.16127;
pub const REFERENCE_EPS_STOP: f64 = 0.17183;
pub const REFERENCE_EPS_COUNT: usize = 45;
pub const REFERENCE_OMEGA0: f64 = 10.0;
pub const REFERENCE_SLOPE: f64 = 20.0;
pub const REFERENCE_G: f64 = 0.005;
pub const REFERENCE_GAMMA1: f64 = 0.0145;
pub const REFERENCE_GAMMA2: f64 = 0.0055;

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count)
                .map(|k| if k + 1 == count { stop } else { start + step * k as f64 })
                .collect()
        }
    }
}

/// Eigenvalue branches over the control grid with continuity labels.
#[derive(Clone, Debug)]
pub struct BranchTrace {
    pub eps: Vec<f64>,
    pub lambda_plus: Vec<Complex64>,
    pub lambda_minus: Vec<Complex64>,
    /// `None` where the Hamiltonian sits on an exceptional point.
    pub coeffs_plus: Vec<Option<[Complex64; 2]>>,
    pub coeffs_minus: Vec<Option<[Complex64; 2]>>,
}

impl BranchTrace {
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Eigenvalue of branch `0` (plus) or `1` (minus) at grid index `k`.
    pub fn lambda(&self, branch: usize, k: usize) -> Complex64 {
        if branch == 0 {
            self.lambda_plus[k]
        } else {
            self.lambda_minus[k]
        }
    }

    pub fn coeffs(&self, branch: usize, k: usize) -> Option<[Complex64; 2]> {
        if branch == 0 {
            self.coeffs_plus[k]
        } else {
            self.coeffs_minus[k]
        }
    }
}

/// Evaluates the spectrum on the model grid and labels branches by
/// continuity: between neighbouring grid points the pairing with the smaller
/// summed complex distance wins (ties keep the current pairing).
pub fn sweep_spectrum(model: &DetuningModel) -> BranchTrace {
    let eps = model.eps_grid().to_vec();
    let n = eps.len();
    let mut trace = BranchTrace {
        eps,
        lambda_plus: Vec::with_capacity(n),
        lambda_minus: Vec::with_capacity(n),
        coeffs_plus: Vec::with_capacity(n),
        coeffs_minus: Vec::with_capacity(n),
    };
    for k in 0..n {
        let h = model
            .hamiltonian(trace.eps[k])
            .expect("model validated on its grid");
        let (mut a, mut b) = eigenvalues(&h);
        if k > 0 {
            let (pa, pb) = (trace.lambda_plus[k - 1], trace.lambda_minus[k - 1]);
            let keep = (pa - a).norm() + (pb - b).norm();
            let swap = (pa - b).norm() + (pb - a).norm();
            if swap < keep {
                std::mem::swap(&mut a, &mut b);
            }
        }
        let (ca, cb) = if h.is_exceptional() {
            (None, None)
        } else {
            (Some(eigenvector_for(&h, a)), Some(eigenvector_for(&h, b)))
        };
        trace.lambda_plus.push(a);
        trace.lambda_minus.push(b);
        trace.coeffs_plus.push(ca);
        trace.coeffs_minus.push(cb);
    }
    trace
}

/// Grid value minimising `|Re λ+ - Re λ-|`; the first minimum wins.
pub fn locate_ac(trace: &BranchTrace) -> f64 {
    locate_ac_index(trace).map(|k| trace.eps[k]).unwrap_or(f64::NAN)
}

pub fn locate_ac_index(trace: &BranchTrace) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for k in 0..trace.len() {
        let gap = (trace.lambda_plus[k].re - trace.lambda_minus[k].re).abs();
        match best {
            Some((_, g)) if gap >= g => {}
            _ => best = Some((k, gap)),
        }
    }
    best.map(|(k, _)| k)
}
