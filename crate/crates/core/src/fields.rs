//! Grid-sampled densities, spectral fields, the dilation semigroup and
//! weighted norms.
//!
//! Grids are cell-centred on `[-X, X]^d` with `N` points per axis. The dual
//! frequencies are `xi_k = pi k / X`, `k in [-N/2, N/2)`, stored in natural
//! order, and transforms use the continuum normalization
//! `u_hat(xi) = int e^{-i x.xi} u(x) dx`.

use std::io::{self, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Grid metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Dimension { dim, what: "grid machinery" });
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Grid(format!("half width {half_width} must be positive")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::Grid(format!("{points} points per axis is not a power of two >= 4")));
        }
        Ok(Grid { dim, half_width, points })
    }

    /// `X = 12`, `N = 4096` in one dimension and `512` in two.
    pub fn standard(dim: usize) -> Result<Self> {
        let n = if dim == 1 { 4096 } else { 512 };
        Grid::new(dim, 12.0, n)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Frequency at natural-order index `j`.
    pub fn frequency(&self, j: usize) -> f64 {
        std::f64::consts::PI * (j as f64 - (self.points / 2) as f64) / self.half_width
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.frequency(j)).collect()
    }

    pub fn frequency_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// Multi-index of a flat index; axis 0 is the slowest.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.points, flat % self.points]
        }
    }

    /// Position of a flat index, written into the first `dim` slots.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let [a, b] = self.unflatten(flat);
        [self.coord(a), if self.dim == 2 { self.coord(b) } else { 0.0 }]
    }

    pub fn frequency_point(&self, flat: usize) -> [f64; 2] {
        let [a, b] = self.unflatten(flat);
        [self.frequency(a), if self.dim == 2 { self.frequency(b) } else { 0.0 }]
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Weight functions `phi(x) >= 1` defining weighted `L^1` norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    /// `(1 + |x|^2)^{k/2}`.
    Polynomial(f64),
    /// `exp(a (1 + |x|^2)^{1/2})`.
    Exponential(f64),
    /// `exp(a |x| log(1 + |x|))`.
    Poisson(f64),
}

impl WeightSpec {
    pub fn parse(kind: &str, param: f64) -> Result<Self> {
        if !(param.is_finite() && param >= 0.0) {
            return Err(Error::Parameter { key: "weight.param".into(), reason: format!("{param} must be nonnegative") });
        }
        match kind {
            "polynomial" => Ok(WeightSpec::Polynomial(param)),
            "exponential" => Ok(WeightSpec::Exponential(param)),
            "poisson" => Ok(WeightSpec::Poisson(param)),
            other => Err(Error::Parameter { key: "weight.kind".into(), reason: format!("unknown weight `{other}`") }),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WeightSpec::Polynomial(_) => "polynomial",
            WeightSpec::Exponential(_) => "exponential",
            WeightSpec::Poisson(_) => "poisson",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            WeightSpec::Polynomial(p) | WeightSpec::Exponential(p) | WeightSpec::Poisson(p) => p,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            WeightSpec::Polynomial(k) => (1.0 + r2).powf(0.5 * k),
            WeightSpec::Exponential(a) => (a * (1.0 + r2).sqrt()).exp(),
            WeightSpec::Poisson(a) => {
                let r = r2.sqrt();
                (a * r * r.ln_1p()).exp()
            }
        }
    }

    /// `x . grad(phi)(x)`.
    pub fn radial_derivative(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            WeightSpec::Polynomial(k) => k * r2 * (1.0 + r2).powf(0.5 * k - 1.0),
            WeightSpec::Exponential(a) => {
                let b = (1.0 + r2).sqrt();
                a * r2 / b * (a * b).exp()
            }
            WeightSpec::Poisson(a) => {
                let r = r2.sqrt();
                let phi = (a * r * r.ln_1p()).exp();
                a * r * (r.ln_1p() + r / (1.0 + r)) * phi
            }
        }
    }

    /// Limit of `x . grad(phi) / phi` (polynomial) or the leading rate
    /// coefficient (exponential, Poisson).
    pub fn drift_coefficient(&self) -> f64 {
        self.param()
    }
}

/// Real function sampled at the cell centres of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn zeros(grid: Grid) -> Self {
        GridDensity { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("non-finite sample".into()));
        }
        Ok(GridDensity { grid, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(grid: Grid, f: F) -> Self {
        let d = grid.dim;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.point(i)[..d]))
            .collect();
        GridDensity { grid, values }
    }

    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// Mass of the positive part.
    pub fn clamped_mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.max(0.0)).sum::<f64>()
    }

    /// `L^1` norm of the negative part.
    pub fn negative_part(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| (-v).max(0.0)).sum::<f64>()
    }

    fn weighted_terms(&self, w: &WeightSpec) -> impl Iterator<Item = (usize, f64)> + '_ {
        let d = self.grid.dim;
        let w = *w;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (i, w.eval(&self.grid.point(i)[..d]) * v.abs()))
    }

    /// `h^d sum_j w(x_j) |u_j|`; warns when the outer 5% of cells carry
    /// more than `1e-6` of the total.
    pub fn weighted_norm(&self, w: &WeightSpec) -> f64 {
        let (total, outer) = self.weighted_split(w);
        if total > 0.0 && outer / total > 1e-6 {
            log::warn!("outer cells carry {:.3e} of the weighted norm; grid may be too small", outer / total);
        }
        total
    }

    /// Fraction of the weighted norm carried by the outer 5% of cells.
    pub fn boundary_fraction(&self, w: &WeightSpec) -> f64 {
        let (total, outer) = self.weighted_split(w);
        if total > 0.0 {
            outer / total
        } else {
            0.0
        }
    }

    fn weighted_split(&self, w: &WeightSpec) -> (f64, f64) {
        let n = self.grid.points;
        let band = (n as f64 * 0.05).ceil() as usize;
        let outer_axis = |i: usize| i < band || i >= n - band;
        let mut total = 0.0;
        let mut outer = 0.0;
        for (i, t) in self.weighted_terms(w) {
            let [a, b] = self.grid.unflatten(i);
            total += t;
            if outer_axis(a) || (self.grid.dim == 2 && outer_axis(b)) {
                outer += t;
            }
        }
        let h = self.grid.cell_volume();
        (h * total, h * outer)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &GridDensity) -> Result<GridDensity> {
        self.grid.check_same(&other.grid)?;
        Ok(GridDensity {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &GridDensity) -> Result<GridDensity> {
        self.grid.check_same(&other.grid)?;
        Ok(GridDensity {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> GridDensity {
        GridDensity { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn max_abs_diff(&self, other: &GridDensity) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        Ok(self.sub(other)?.weighted_norm(&WeightSpec::Polynomial(0.0)))
    }

    /// Average blocks of `factor` cells per axis onto a coarser grid.
    pub fn coarsen(&self, factor: usize) -> Result<GridDensity> {
        if factor == 0 || self.grid.points % factor != 0 {
            return Err(Error::Grid(format!("cannot coarsen {} points by {factor}", self.grid.points)));
        }
        let grid = Grid::new(self.grid.dim, self.grid.half_width, self.grid.points / factor)?;
        let n = self.grid.points;
        let m = grid.points;
        let mut out = GridDensity::zeros(grid);
        let scale = 1.0 / (factor.pow(self.grid.dim as u32) as f64);
        for (i, v) in self.values.iter().enumerate() {
            let target = if self.grid.dim == 1 {
                i / factor
            } else {
                (i / n / factor) * m + (i % n) / factor
            };
            out.values[target] += scale * v;
        }
        Ok(out)
    }

    /// Catmull-Rom interpolation at an arbitrary point; zero outside the grid.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let n = g.points as isize;
        let stencil = |xv: f64| -> Option<(isize, [f64; 4])> {
            let p = (xv + g.half_width) / h - 0.5;
            if !(p > -2.0 && p < n as f64 + 1.0) {
                return None;
            }
            let i = p.floor();
            Some((i as isize, catmull_rom(p - i)))
        };
        let at = |i: isize| -> bool { i >= 0 && i < n };
        match g.dim {
            1 => {
                let Some((i, w)) = stencil(x[0]) else { return 0.0 };
                (0..4)
                    .map(|k| {
                        let j = i - 1 + k as isize;
                        if at(j) {
                            w[k] * self.values[j as usize]
                        } else {
                            0.0
                        }
                    })
                    .sum()
            }
            _ => {
                let (Some((i, wi)), Some((j, wj))) = (stencil(x[0]), stencil(x[1])) else { return 0.0 };
                let mut s = 0.0;
                for a in 0..4 {
                    let ia = i - 1 + a as isize;
                    if !at(ia) {
                        continue;
                    }
                    let row = ia as usize * g.points;
                    for b in 0..4 {
                        let jb = j - 1 + b as isize;
                        if at(jb) {
                            s += wi[a] * wj[b] * self.values[row + jb as usize];
                        }
                    }
                }
                s
            }
        }
    }

    /// CSV with coordinate columns and a value column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        if self.grid.dim == 1 {
            writeln!(out, "x,value")?;
        } else {
            writeln!(out, "x,y,value")?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            if self.grid.dim == 1 {
                writeln!(out, "{:.16e},{:.16e}", p[0], v)?;
            } else {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }

    /// Little-endian binary cache: magic, dim, points, half width, values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"NLFPGRD1")?;
        out.write_all(&(self.grid.dim as u64).to_le_bytes())?;
        out.write_all(&(self.grid.points as u64).to_le_bytes())?;
        out.write_all(&self.grid.half_width.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<GridDensity> {
        let io_err = |e: io::Error| Error::Grid(format!("binary cache: {e}"));
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(io_err)?;
        if &magic != b"NLFPGRD1" {
            return Err(Error::Grid("binary cache: bad magic".into()));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word).map_err(io_err)?;
        let dim = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word).map_err(io_err)?;
        let points = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word).map_err(io_err)?;
        let half_width = f64::from_le_bytes(word);
        let grid = Grid::new(dim, half_width, points)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            input.read_exact(&mut word).map_err(io_err)?;
            values.push(f64::from_le_bytes(word));
        }
        GridDensity::from_values(grid, values)
    }
}

fn catmull_rom(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ]
}

/// Complex samples on the dual frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_fn<F: Fn(&[f64]) -> Complex64 + Sync>(grid: Grid, f: F) -> Self {
        let d = grid.dim;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.frequency_point(i)[..d]))
            .collect();
        SpectralField { grid, values }
    }

    /// Value at `xi = 0`.
    pub fn at_zero(&self) -> Complex64 {
        let c = self.grid.points / 2;
        let idx = if self.grid.dim == 1 { c } else { c * self.grid.points + c };
        self.values[idx]
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn mul(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&other.grid)?;
        Ok(SpectralField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&other.grid)?;
        Ok(SpectralField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Natural cubic-free Catmull-Rom interpolation in frequency; zero
    /// outside the sampled band.
    pub fn interpolate(&self, xi: &[f64]) -> Complex64 {
        let g = &self.grid;
        let dk = g.frequency_spacing();
        let n = g.points as isize;
        let half = (g.points / 2) as f64;
        let stencil = |v: f64| -> Option<(isize, [f64; 4])> {
            let p = v / dk + half;
            if !(p > -2.0 && p < n as f64 + 1.0) {
                return None;
            }
            let i = p.floor();
            Some((i as isize, catmull_rom(p - i)))
        };
        let at = |i: isize| i >= 0 && i < n;
        let zero = Complex64::new(0.0, 0.0);
        match g.dim {
            1 => {
                let Some((i, w)) = stencil(xi[0]) else { return zero };
                (0..4)
                    .filter_map(|k| {
                        let j = i - 1 + k as isize;
                        at(j).then(|| w[k] * self.values[j as usize])
                    })
                    .sum()
            }
            _ => {
                let (Some((i, wi)), Some((j, wj))) = (stencil(xi[0]), stencil(xi[1])) else { return zero };
                let mut s = zero;
                for a in 0..4 {
                    let ia = i - 1 + a as isize;
                    if !at(ia) {
                        continue;
                    }
                    for b in 0..4 {
                        let jb = j - 1 + b as isize;
                        if at(jb) {
                            s += wi[a] * wj[b] * self.values[ia as usize * g.points + jb as usize];
                        }
                    }
                }
                s
            }
        }
    }
}

/// Anything that can report a Fourier transform at arbitrary frequencies.
pub trait FourierSource: Sync {
    fn fourier(&self, xi: &[f64]) -> Complex64;

    /// Values `f_hat(c xi_k)` for every frequency of `grid`.
    fn fourier_on_grid(&self, grid: &Grid, c: f64) -> Vec<Complex64> {
        let d = grid.dim;
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let p = grid.frequency_point(i);
                let q = [c * p[0], c * p[1]];
                self.fourier(&q[..d])
            })
            .collect()
    }
}

impl FourierSource for SpectralField {
    fn fourier(&self, xi: &[f64]) -> Complex64 {
        self.interpolate(xi)
    }
}

impl<F: Fn(&[f64]) -> Complex64 + Sync> FourierSource for F {
    fn fourier(&self, xi: &[f64]) -> Complex64 {
        self(xi)
    }
}

/// Tabulated data transforms by direct summation of the same quadrature
/// that the FFT evaluates on the grid.
impl FourierSource for GridDensity {
    fn fourier(&self, xi: &[f64]) -> Complex64 {
        let g = &self.grid;
        let axis = |v: f64| -> Vec<Complex64> {
            (0..g.points).map(|i| Complex64::from_polar(1.0, -v * g.coord(i))).collect()
        };
        let h = g.cell_volume();
        match g.dim {
            1 => {
                let e = axis(xi[0]);
                h * self.values.iter().zip(&e).map(|(v, z)| v * z).sum::<Complex64>()
            }
            _ => {
                let e0 = axis(xi[0]);
                let e1 = axis(xi[1]);
                let mut s = Complex64::new(0.0, 0.0);
                for (a, za) in e0.iter().enumerate() {
                    let row = &self.values[a * g.points..(a + 1) * g.points];
                    let inner: Complex64 = row.iter().zip(&e1).map(|(v, z)| v * z).sum();
                    s += za * inner;
                }
                h * s
            }
        }
    }

    fn fourier_on_grid(&self, grid: &Grid, c: f64) -> Vec<Complex64> {
        let src = &self.grid;
        let freqs: Vec<f64> = grid.frequencies().iter().map(|v| c * v).collect();
        let basis: Vec<Vec<Complex64>> = freqs
            .par_iter()
            .map(|&v| (0..src.points).map(|i| Complex64::from_polar(1.0, -v * src.coord(i))).collect())
            .collect();
        let h = src.spacing();
        if src.dim == 1 {
            return basis
                .par_iter()
                .map(|e| h * self.values.iter().zip(e).map(|(v, z)| v * z).sum::<Complex64>())
                .collect();
        }
        let m = grid.points;
        let n = src.points;
        // transform along axis 1 first: partial[a][k1]
        let partial: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let row = &self.values[a * n..(a + 1) * n];
                basis.iter().map(|e| h * row.iter().zip(e).map(|(v, z)| v * z).sum::<Complex64>()).collect()
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(k0, chunk)| {
            let e = &basis[k0];
            for (k1, slot) in chunk.iter_mut().enumerate() {
                *slot = h * (0..n).map(|a| e[a] * partial[a][k1]).sum::<Complex64>();
            }
        });
        out
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
}

/// Phase `(-1)^k e^{-i xi_k h / 2}` relating the DFT to the continuum transform.
fn shift_phase(grid: &Grid, j: usize) -> Complex64 {
    let k = j as isize - (grid.points / 2) as isize;
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let theta = -0.5 * grid.frequency(j) * grid.spacing();
    sign * Complex64::from_polar(1.0, theta)
}

/// In-place multi-dimensional FFT on the storage layout.
fn fft_nd(data: &mut [Complex64], grid: &Grid, inverse: bool) {
    let n = grid.points;
    let p = plans(n);
    let plan = if inverse { &p.inverse } else { &p.forward };
    if grid.dim == 1 {
        plan.process(data);
        return;
    }
    data.par_chunks_mut(n).for_each(|row| plan.process(row));
    let mut cols = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(data, &mut cols, n);
    cols.par_chunks_mut(n).for_each(|col| plan.process(col));
    transpose(&cols, data, n);
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

/// DFT index of natural-order index `j`.
fn dft_index(n: usize, j: usize) -> usize {
    (j + n / 2) % n
}

fn permute_to_natural(grid: &Grid, dft: &[Complex64]) -> Vec<Complex64> {
    let n = grid.points;
    (0..grid.len())
        .map(|i| {
            let [a, b] = grid.unflatten(i);
            if grid.dim == 1 {
                dft[dft_index(n, a)]
            } else {
                dft[dft_index(n, a) * n + dft_index(n, b)]
            }
        })
        .collect()
}

fn permute_to_dft(grid: &Grid, natural: &[Complex64]) -> Vec<Complex64> {
    let n = grid.points;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, v) in natural.iter().enumerate() {
        let [a, b] = grid.unflatten(i);
        let idx = if grid.dim == 1 { dft_index(n, a) } else { dft_index(n, a) * n + dft_index(n, b) };
        out[idx] = *v;
    }
    out
}

fn phase_table(grid: &Grid) -> Vec<Complex64> {
    (0..grid.points).map(|j| shift_phase(grid, j)).collect()
}

/// Continuum-normalized forward transform.
pub fn forward(u: &GridDensity) -> SpectralField {
    let grid = u.grid;
    let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, &grid, false);
    let mut values = permute_to_natural(&grid, &data);
    let ph = phase_table(&grid);
    let h = grid.cell_volume();
    for (i, v) in values.iter_mut().enumerate() {
        let [a, b] = grid.unflatten(i);
        let p = if grid.dim == 1 { ph[a] } else { ph[a] * ph[b] };
        *v *= h * p;
    }
    SpectralField { grid, values }
}

/// Inverse of [`forward`], keeping the real part.
pub fn inverse(s: &SpectralField) -> GridDensity {
    let grid = s.grid;
    let ph = phase_table(&grid);
    let scaled: Vec<Complex64> = s
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let [a, b] = grid.unflatten(i);
            let p = if grid.dim == 1 { ph[a] } else { ph[a] * ph[b] };
            v * p.conj()
        })
        .collect();
    let mut data = permute_to_dft(&grid, &scaled);
    fft_nd(&mut data, &grid, true);
    let norm = 1.0 / (grid.len() as f64 * grid.cell_volume());
    GridDensity { grid, values: data.iter().map(|z| z.re * norm).collect() }
}

/// `J_eps * u` by multiplication with `J_hat(eps xi)`.
pub fn convolve(kernel: &KernelSpec, eps: f64, u: &GridDensity) -> Result<GridDensity> {
    if kernel.dim != u.grid.dim {
        return Err(Error::Dimension { dim: kernel.dim, what: "convolution on this grid" });
    }
    let r = kernel.effective_radius();
    if eps * r >= u.grid.half_width {
        return Err(Error::DomainTooSmall(format!(
            "eps * R = {} reaches the box half width {}",
            eps * r,
            u.grid.half_width
        )));
    }
    let mut s = forward(u);
    let d = u.grid.dim;
    s.values.par_iter_mut().enumerate().for_each(|(i, v)| {
        let p = u.grid.frequency_point(i);
        let q = [eps * p[0], eps * p[1]];
        *v *= kernel.fourier(&q[..d]);
    });
    Ok(inverse(&s))
}

/// `T_t u(x) = e^{(d - 1/eps^2) t} u(e^t x)` by Catmull-Rom interpolation.
pub fn dilate_semigroup(u: &GridDensity, t: f64, eps: f64) -> GridDensity {
    assert!(t >= 0.0, "dilation time must be nonnegative");
    if t == 0.0 {
        return u.clone();
    }
    let d = u.grid.dim;
    let factor = ((d as f64 - 1.0 / (eps * eps)) * t).exp();
    let stretch = t.exp();
    let grid = u.grid;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            let q = [stretch * p[0], stretch * p[1]];
            factor * u.interpolate(&q[..d])
        })
        .collect();
    GridDensity { grid, values }
}
