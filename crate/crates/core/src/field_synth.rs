//! Synthetic hybridized eigenfields on an elliptical cavity.
//!
//! Each branch field is `c1 φ1 + c2 φ2`, where `φj` are real separable
//! trigonometric patterns clipped to the ellipse `(x/a)^2 + (y/b)^2 <= 1`
//! and `c` is the coupled-mode eigenvector of that branch.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coupled_mode::{sweep_spectrum, DetuningModel};
use crate::error::{Error, Result};
use crate::gauge::interior_mask;

pub const N_IN: f64 = 3.3;
pub const N_OUT: f64 = 1.0;
pub const DEFAULT_GRID: usize = 256;
const GRID_MARGIN: f64 = 0.02;
const MIN_SYNTH_NODES: usize = 16;

/// Ellipse with semi-axes `a = 1 + ε`, `b = 1 / (1 + ε)`; area fixed at π.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityGeometry {
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    pub n_in: f64,
    pub n_out: f64,
}

impl CavityGeometry {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidModel(format!("deformation must be >= 0, got {eps}")));
        }
        let a = 1.0 + eps;
        Ok(Self { eps, a, b: 1.0 / a, n_in: N_IN, n_out: N_OUT })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let u = x / self.a;
        let v = y / self.b;
        u * u + v * v <= 1.0
    }
}

/// Regular grid; node `(ix, iy)` sits at `x0 + ix * dx`, `y0 + iy * dy` and
/// is stored row-major at `iy * nx + ix`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidModel("grid needs at least one node per axis".into()));
        }
        if ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("grid extents must be finite".into()));
        }
        Ok(Self { nx, ny, x0, x1, y0, y1 })
    }

    /// Bounding box of the ellipse plus a 2% margin.
    pub fn covering(geom: &CavityGeometry, nx: usize, ny: usize) -> Result<Self> {
        if nx < MIN_SYNTH_NODES || ny < MIN_SYNTH_NODES {
            return Err(Error::InvalidModel(format!(
                "synthetic grids need at least {MIN_SYNTH_NODES} nodes per axis, got {nx}x{ny}"
            )));
        }
        let xr = geom.a * (1.0 + GRID_MARGIN);
        let yr = geom.b * (1.0 + GRID_MARGIN);
        Self::new(nx, ny, -xr, xr, -yr, yr)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step(lo: f64, hi: f64, n: usize) -> f64 {
        if n > 1 {
            (hi - lo) / (n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + Self::step(self.x0, self.x1, self.nx) * ix as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + Self::step(self.y0, self.y1, self.ny) * iy as f64
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldMeta {
    pub eps: f64,
    pub mode: String,
    pub lambda: Option<Complex64>,
}

/// Complex samples on a grid. Weights and the retained-sample mask are
/// always derived from the values.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
    weights: Vec<f64>,
    mask: Vec<bool>,
    pub meta: FieldMeta,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, meta: FieldMeta) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidModel(format!(
                "grid has {} nodes but {} values were supplied",
                grid.len(),
                values.len()
            )));
        }
        let weights: Vec<f64> = values.iter().map(|z| z.re * z.re + z.im * z.im).collect();
        let mask = interior_mask(&grid, &weights);
        Ok(Self { grid, values, weights, mask, meta })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn total_weight(&self) -> f64 {
        crate::summation::compensated_sum(self.weights.iter().copied())
    }

    /// Field multiplied by `e^{iχ}`.
    pub fn phase_shifted(&self, chi: f64) -> Self {
        let rot = Complex64::from_polar(1.0, chi);
        let values = self.values.iter().map(|z| z * rot).collect();
        Self::new(self.grid, values, self.meta.clone()).expect("same grid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    EvenEven,
    EvenOdd,
    OddEven,
    OddOdd,
}

impl Parity {
    fn factors(self) -> (bool, bool) {
        match self {
            Parity::EvenEven => (true, true),
            Parity::EvenOdd => (true, false),
            Parity::OddEven => (false, true),
            Parity::OddOdd => (false, false),
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::EvenEven => "even-even",
            Parity::EvenOdd => "even-odd",
            Parity::OddEven => "odd-even",
            Parity::OddOdd => "odd-odd",
        })
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "even-even" | "ee" => Ok(Parity::EvenEven),
            "even-odd" | "eo" => Ok(Parity::EvenOdd),
            "odd-even" | "oe" => Ok(Parity::OddEven),
            "odd-odd" | "oo" => Ok(Parity::OddOdd),
            other => Err(Error::Config(format!("unknown parity `{other}`"))),
        }
    }
}

/// Separable pattern `f(kx x) g(ky y)`; even factors are cosines, odd
/// factors sines. The first parity letter refers to x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisModeSpec {
    pub kx: f64,
    pub ky: f64,
    pub parity: Parity,
}

impl BasisModeSpec {
    pub fn new(kx: f64, ky: f64, parity: Parity) -> Result<Self> {
        if !(kx > 0.0) || !(ky > 0.0) || !kx.is_finite() || !ky.is_finite() {
            return Err(Error::InvalidModel(format!(
                "spatial frequencies must be positive, got kx = {kx}, ky = {ky}"
            )));
        }
        Ok(Self { kx, ky, parity })
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let (even_x, even_y) = self.parity.factors();
        let fx = if even_x { (self.kx * x).cos() } else { (self.kx * x).sin() };
        let fy = if even_y { (self.ky * y).cos() } else { (self.ky * y).sin() };
        fx * fy
    }
}

/// Real basis pattern clipped to the ellipse, normalised to unit total
/// weight.
pub fn basis_mode(geom: &CavityGeometry, spec: &BasisModeSpec, grid: &GridSpec) -> Result<ComplexField> {
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut inside = 0usize;
    for iy in 0..grid.ny {
        let y = grid.y(iy);
        for ix in 0..grid.nx {
            let x = grid.x(ix);
            if geom.contains(x, y) {
                inside += 1;
                values[grid.index(ix, iy)] = Complex64::new(spec.eval(x, y), 0.0);
            }
        }
    }
    let degenerate = || Error::DegenerateGrid { a: geom.a, b: geom.b };
    if inside == 0 {
        return Err(degenerate());
    }
    let total = crate::summation::compensated_sum(values.iter().map(|z| z.re * z.re));
    if !(total > 0.0) {
        return Err(degenerate());
    }
    let scale = total.sqrt().recip();
    for z in &mut values {
        z.re *= scale;
    }
    ComplexField::new(*grid, values, FieldMeta { eps: geom.eps, ..FieldMeta::default() })
}

/// `ψ = c1 φ1 + c2 φ2` node-wise. Metadata is taken from `phi1`.
pub fn synthesize(c: [Complex64; 2], phi1: &ComplexField, phi2: &ComplexField) -> Result<ComplexField> {
    if phi1.grid != phi2.grid {
        return Err(Error::GridMismatch);
    }
    let values = phi1
        .values
        .iter()
        .zip(&phi2.values)
        .map(|(a, b)| c[0] * a + c[1] * b)
        .collect();
    ComplexField::new(phi1.grid, values, phi1.meta.clone())
}

/// Basis patterns and grid size for a synthetic sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub basis1: BasisModeSpec,
    pub basis2: BasisModeSpec,
    pub nx: usize,
    pub ny: usize,
}

impl SynthSpec {
    /// Basis used with the reference detuning: an even-even and an
    /// odd-even pattern, orthogonal on any centred ellipse.
    pub fn reference() -> Self {
        Self {
            basis1: BasisModeSpec { kx: 4.0, ky: 5.0, parity: Parity::EvenEven },
            basis2: BasisModeSpec { kx: 6.0, ky: 3.0, parity: Parity::OddEven },
            nx: DEFAULT_GRID,
            ny: DEFAULT_GRID,
        }
    }
}

/// Both branch fields at one control value. `fields[0]` follows the `+`
/// branch (mode "1"), `fields[1]` the `-` branch (mode "2").
#[derive(Clone, Debug)]
pub struct SweepFields {
    pub eps: f64,
    pub fields: Vec<ComplexField>,
}

pub const MODE_LABELS: [&str; 2] = ["1", "2"];

/// Synthesizes both branch fields at every grid value of the model.
pub fn synth_sweep(model: &DetuningModel, spec: &SynthSpec) -> Result<Vec<SweepFields>> {
    let trace = sweep_spectrum(model);
    (0..trace.len())
        .into_par_iter()
        .map(|k| {
            let eps = trace.eps[k];
            let geom = CavityGeometry::new(eps)?;
            let grid = GridSpec::covering(&geom, spec.nx, spec.ny)?;
            let phi1 = basis_mode(&geom, &spec.basis1, &grid)?;
            let phi2 = basis_mode(&geom, &spec.basis2, &grid)?;
            let fields = (0..2)
                .map(|branch| {
                    let c = trace.coeffs(branch, k).ok_or_else(|| Error::ExceptionalPoint {
                        eps,
                        discriminant: model
                            .hamiltonian(eps)
                            .map(|h| h.discriminant().norm())
                            .unwrap_or(0.0),
                    })?;
                    let mut field = synthesize(c, &phi1, &phi2)?;
                    field.meta = FieldMeta {
                        eps,
                        mode: MODE_LABELS[branch].to_string(),
                        lambda: Some(trace.lambda(branch, k)),
                    };
                    Ok(field)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepFields { eps, fields })
        })
        .collect()
}
