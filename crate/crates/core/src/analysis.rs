//! Verdict layer: rate fits, Lyapunov certificates, positivity probes,
//! convergence-rate experiments, consistency residuals, Fourier-decay and
//! tail probes.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{param_err, Error, Result};
use crate::fields::{inverse, Grid, GridDensity, WeightSpec};
use crate::initial::InitialData;
use crate::kernels::KernelSpec;
use crate::spectral::{equilibrium_density, equilibrium_hat, local_fp_density, nlfp_density, phase_integral, Horizon, Initial};

/// Axis transform applied before the least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitScale {
    /// `log y` against `log x`.
    LogLog,
    /// `log y` against `x`.
    SemiLog,
}

/// Least-squares line through transformed points.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub scale: FitScale,
    pub abscissae: Vec<f64>,
    pub ordinates: Vec<f64>,
    /// Indices of the points entering the fit.
    pub used: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    /// Fewer than three points survive the noise floor; slope is NaN.
    pub degenerate: bool,
}

impl RateFit {
    pub fn loglog(x: &[f64], y: &[f64]) -> Result<RateFit> {
        Self::build(FitScale::LogLog, x, y, None)
    }

    pub fn semilog(x: &[f64], y: &[f64]) -> Result<RateFit> {
        Self::build(FitScale::SemiLog, x, y, None)
    }

    /// Log-log fit that drops ordinates at or below `floor`.
    pub fn loglog_with_floor(x: &[f64], y: &[f64], floor: f64) -> Result<RateFit> {
        Self::build(FitScale::LogLog, x, y, Some(floor))
    }

    /// Semi-log fit that drops ordinates at or below `floor`.
    pub fn semilog_with_floor(x: &[f64], y: &[f64], floor: f64) -> Result<RateFit> {
        Self::build(FitScale::SemiLog, x, y, Some(floor))
    }

    fn build(scale: FitScale, x: &[f64], y: &[f64], floor: Option<f64>) -> Result<RateFit> {
        if x.len() != y.len() {
            return Err(Error::Fit(format!("{} abscissae for {} ordinates", x.len(), y.len())));
        }
        if x.len() < 3 {
            return Err(Error::Fit(format!("{} points given, at least 3 are needed", x.len())));
        }
        if scale == FitScale::LogLog && x.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Fit("log-log fit needs positive abscissae".into()));
        }
        let used: Vec<usize> = match floor {
            Some(f) => (0..y.len()).filter(|&i| y[i] > f).collect(),
            None => {
                if let Some(v) = y.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::Fit(format!("ordinate {v} is not positive")));
                }
                (0..y.len()).collect()
            }
        };
        let mut fit = RateFit {
            scale,
            abscissae: x.to_vec(),
            ordinates: y.to_vec(),
            used,
            slope: f64::NAN,
            intercept: f64::NAN,
            max_residual: f64::NAN,
            degenerate: true,
        };
        if fit.used.len() < 3 {
            return Ok(fit);
        }
        let tx = |v: f64| match scale {
            FitScale::LogLog => v.ln(),
            FitScale::SemiLog => v,
        };
        let pts: Vec<(f64, f64)> = fit.used.iter().map(|&i| (tx(x[i]), y[i].ln())).collect();
        let (slope, intercept) = least_squares(&pts)?;
        fit.slope = slope;
        fit.intercept = intercept;
        fit.max_residual = pts.iter().map(|(a, b)| (b - slope * a - intercept).abs()).fold(0.0, f64::max);
        fit.degenerate = false;
        Ok(fit)
    }

    /// Fit from logarithms of ordinates that may not be representable.
    pub fn from_logs(scale: FitScale, x: &[f64], log_y: &[f64]) -> Result<RateFit> {
        let y: Vec<f64> = log_y.iter().map(|v| v.exp()).collect();
        let mut fit = Self::build(scale, x, &y, Some(-1.0))?;
        let tx = |v: f64| match scale {
            FitScale::LogLog => v.ln(),
            FitScale::SemiLog => v,
        };
        let pts: Vec<(f64, f64)> = x.iter().zip(log_y).map(|(&a, &b)| (tx(a), b)).collect();
        let (slope, intercept) = least_squares(&pts)?;
        fit.slope = slope;
        fit.intercept = intercept;
        fit.max_residual = pts.iter().map(|(a, b)| (b - slope * a - intercept).abs()).fold(0.0, f64::max);
        Ok(fit)
    }

    pub fn predict(&self, x: f64) -> f64 {
        match self.scale {
            FitScale::LogLog => (self.intercept + self.slope * x.ln()).exp(),
            FitScale::SemiLog => (self.intercept + self.slope * x).exp(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, x_name: &str, y_name: &str) -> io::Result<()> {
        writeln!(out, "{x_name},{y_name},used")?;
        for (i, (x, y)) in self.abscissae.iter().zip(&self.ordinates).enumerate() {
            writeln!(out, "{x:.16e},{y:.16e},{}", self.used.contains(&i) as u8)?;
        }
        writeln!(out, "# slope,{:.16e}", self.slope)?;
        writeln!(out, "# intercept,{:.16e}", self.intercept)?;
        writeln!(out, "# max_residual,{:.16e}", self.max_residual)?;
        writeln!(out, "# degenerate,{}", self.degenerate)
    }
}

fn least_squares(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `r(x) = (L*_eps phi)(x)` sampled on a grid with a fitted `(C, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub weight: WeightSpec,
    pub eps: f64,
    pub grid: Grid,
    pub r: Vec<f64>,
    pub c: f64,
    pub lambda: f64,
    /// `min (C - lambda phi - r)` over the grid and its cell midpoints.
    pub margin: f64,
}

impl LyapunovCertificate {
    pub fn certifies(&self, tol: f64) -> bool {
        self.margin >= -tol
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let d = self.grid.dim;
        let head: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},phi,r,bound", head.join(","))?;
        for (i, r) in self.r.iter().enumerate() {
            let p = self.grid.point(i);
            let xs: Vec<String> = p[..d].iter().map(|v| format!("{v:.16e}")).collect();
            let phi = self.weight.eval(&p[..d]);
            writeln!(out, "{},{phi:.16e},{r:.16e},{:.16e}", xs.join(","), self.c - self.lambda * phi)?;
        }
        writeln!(out, "# C,{:.16e}", self.c)?;
        writeln!(out, "# lambda,{:.16e}", self.lambda)?;
        writeln!(out, "# margin,{:.16e}", self.margin)
    }
}

/// `(L*_eps phi)(x) = eps^-2 ((J_eps * phi)(x) - phi(x)) - x . grad phi(x)`.
pub fn adjoint_generator(kernel: &KernelSpec, eps: f64, w: &WeightSpec, x: &[f64]) -> f64 {
    let phi = w.eval(x);
    let smoothed = kernel.smooth(x, eps, 1, |y| w.eval(y));
    (smoothed - phi) / (eps * eps) - w.radial_derivative(x)
}

fn check_weight(kernel: &KernelSpec, eps: f64, w: &WeightSpec) -> Result<()> {
    match *w {
        WeightSpec::Exponential(a) => {
            if a * eps >= kernel.exp_rate() {
                return Err(Error::Domain(format!(
                    "exponential weight needs a < exp_rate / eps = {}",
                    kernel.exp_rate() / eps
                )));
            }
        }
        WeightSpec::Poisson(a) => {
            let Some(r) = kernel.support_radius() else {
                return Err(Error::Domain(format!("Poisson weight needs a compactly supported kernel, not {}", kernel.name())));
            };
            let bound = 1.0 / (eps * r);
            if a > bound * (1.0 + 1e-12) {
                return Err(Error::Domain(format!("Poisson weight needs a <= 1/(eps R) = {bound}")));
            }
        }
        WeightSpec::Polynomial(_) => {}
    }
    Ok(())
}

/// Certificate with `lambda` set to half the drift coefficient of the weight.
pub fn lyapunov_fit(kernel: &KernelSpec, eps: f64, w: &WeightSpec, grid: &Grid) -> Result<LyapunovCertificate> {
    lyapunov_fit_with_rate(kernel, eps, w, grid, 0.5 * w.drift_coefficient())
}

/// Smallest `C` with `r(x) <= C - lambda phi(x)` on the grid for a given
/// `lambda > 0`, refined by a local pattern search around the grid maximum.
pub fn lyapunov_fit_with_rate(
    kernel: &KernelSpec,
    eps: f64,
    w: &WeightSpec,
    grid: &Grid,
    lambda: f64,
) -> Result<LyapunovCertificate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(param_err("lambda", format!("{lambda} must be positive")));
    }
    if grid.dim != kernel.dim {
        return Err(Error::GridMismatch);
    }
    check_weight(kernel, eps, w)?;
    let d = grid.dim;
    let r: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| adjoint_generator(kernel, eps, w, &grid.point(i)[..d]))
        .collect();
    let g = |x: &[f64]| adjoint_generator(kernel, eps, w, x) + lambda * w.eval(x);
    let (best, mut c) = r
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v + lambda * w.eval(&grid.point(i)[..d])))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    // local pattern search, clamped to the box
    let mut x = grid.point(best);
    let mut h = grid.spacing();
    let lim = grid.half_width;
    while h > 1e-9 * grid.spacing() {
        let mut moved = false;
        for axis in 0..d {
            for s in [-1.0, 1.0] {
                let mut y = x;
                y[axis] = (y[axis] + s * h).clamp(-lim, lim);
                let v = g(&y[..d]);
                if v > c {
                    c = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    let fine = Grid::new(d, grid.half_width, grid.points * 2)?;
    let margin = (0..fine.len())
        .into_par_iter()
        .map(|i| {
            let p = fine.point(i);
            c - g(&p[..d])
        })
        .reduce(|| f64::INFINITY, f64::min)
        .min(r.iter().enumerate().map(|(i, v)| c - lambda * w.eval(&grid.point(i)[..d]) - v).fold(f64::INFINITY, f64::min));
    Ok(LyapunovCertificate { weight: *w, eps, grid: *grid, r, c, lambda, margin })
}

/// `alpha(eps)` values of a positivity probe.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub epsilons: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `int_{B_R2} u0`.
    pub ball_mass: f64,
}

impl PositivityReport {
    /// `min alpha / max alpha`.
    pub fn ratio(&self) -> f64 {
        let lo = self.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > 0.0 {
            lo / hi
        } else {
            0.0
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "epsilon,alpha")?;
        for (e, a) in self.epsilons.iter().zip(&self.alpha) {
            writeln!(out, "{e:.16e},{a:.16e}")?;
        }
        writeln!(out, "# ratio,{:.16e}", self.ratio())
    }
}

/// Values of an initial datum on a grid.
fn sampled<S: Initial + ?Sized>(u0: &S, grid: &Grid) -> GridDensity {
    match u0.dilation_part(grid, 0.0, 1.0) {
        Some(g) => g,
        None => inverse(&crate::fields::SpectralField { grid: *grid, values: u0.fourier_on_grid(grid, 1.0) }),
    }
}

fn in_ball(x: &[f64], r: f64) -> bool {
    x.iter().map(|v| v * v).sum::<f64>() <= r * r * (1.0 + 1e-12)
}

/// `alpha(eps) = min_{B_R1} u(t) / int_{B_R2} u0` for each `eps`.
pub fn positivity_probe<S: Initial + ?Sized>(
    kernel: &KernelSpec,
    epsilons: &[f64],
    t: f64,
    r1: f64,
    r2: f64,
    u0: &S,
    grid: &Grid,
) -> Result<PositivityReport> {
    if epsilons.is_empty() {
        return Err(param_err("epsilons", "no values given"));
    }
    if !(t >= 0.0) {
        return Err(param_err("t", format!("{t} must be nonnegative")));
    }
    let d = grid.dim;
    let inside: Vec<usize> = (0..grid.len()).filter(|&i| in_ball(&grid.point(i)[..d], r1)).collect();
    if inside.is_empty() {
        return Err(Error::Resolution(format!("no grid point inside the ball of radius {r1}")));
    }
    let start = sampled(u0, grid);
    let ball_mass = grid.cell_volume()
        * start
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| in_ball(&grid.point(*i)[..d], r2))
            .map(|(_, v)| v)
            .sum::<f64>();
    if !(ball_mass > 0.0) {
        return Err(param_err("u0", format!("initial mass {ball_mass} on the ball of radius {r2}")));
    }
    let mut alpha = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let u = nlfp_density(kernel, eps, u0, grid, t);
        let low = inside.iter().map(|&i| u.values[i]).fold(f64::INFINITY, f64::min);
        if low < -1e-6 {
            return Err(Error::Resolution(format!("spectral solution dips to {low:.3e} inside the ball at eps = {eps}")));
        }
        alpha.push(low / ball_mass);
    }
    Ok(PositivityReport { epsilons: epsilons.to_vec(), alpha, ball_mass })
}

/// Noise floor of weighted distances between spectral solutions.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Semi-log fit of `||u(t) - F_eps||_w` against `t`; `gamma = -slope`.
pub fn decay_rate_fit<S: Initial + ?Sized>(
    kernel: &KernelSpec,
    eps: f64,
    u0: &S,
    w: &WeightSpec,
    times: &[f64],
    grid: &Grid,
) -> Result<RateFit> {
    if times.windows(2).any(|p| p[1] <= p[0]) {
        return Err(param_err("times", "values must be strictly increasing"));
    }
    let f = equilibrium_density(kernel, eps, grid);
    let e: Vec<f64> = times
        .par_iter()
        .map(|&t| nlfp_density(kernel, eps, u0, grid, t).sub(&f).map(|g| g.weighted_norm(w)))
        .collect::<Result<_>>()?;
    let fit = RateFit::semilog_with_floor(times, &e, DISTANCE_FLOOR)?;
    if fit.used.len() < e.len() && !fit.degenerate {
        log::warn!("decay fit truncated to {} of {} times at the noise floor", fit.used.len(), e.len());
    }
    Ok(fit)
}

/// Log-log fit of `||u_eps(t) - v(t)||_w` against `eps`, where `v` solves the
/// local Fokker-Planck equation from the same datum.
pub fn local_limit_rate<S: Initial + ?Sized>(
    kernel: &KernelSpec,
    u0: &S,
    epsilons: &[f64],
    t: f64,
    w: &WeightSpec,
    grid: &Grid,
) -> Result<RateFit> {
    check_epsilons(epsilons)?;
    let v = local_fp_density(u0, grid, t);
    let dist: Vec<f64> = epsilons
        .par_iter()
        .map(|&eps| nlfp_density(kernel, eps, u0, grid, t).sub(&v).map(|g| g.weighted_norm(w)))
        .collect::<Result<_>>()?;
    RateFit::loglog_with_floor(epsilons, &dist, DISTANCE_FLOOR)
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.len() < 3 {
        return Err(Error::Fit(format!("{} epsilons given, at least 3 are needed", epsilons.len())));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(param_err("epsilons", format!("{e} outside (0, 1]")));
    }
    if epsilons.windows(2).any(|p| p[1] >= p[0]) {
        return Err(param_err("epsilons", "values must be strictly decreasing"));
    }
    Ok(())
}

/// Log-log fit of `||F_eps - G||_w` against `eps`.
pub fn equilibria_gap(kernel: &KernelSpec, epsilons: &[f64], w: &WeightSpec, grid: &Grid) -> Result<RateFit> {
    check_epsilons(epsilons)?;
    let g = InitialData::standard_gaussian(grid.dim)
        .on_grid(*grid)
        .expect("Gaussian has a density");
    let dist: Vec<f64> = epsilons
        .par_iter()
        .map(|&eps| equilibrium_density(kernel, eps, grid).sub(&g).map(|u| u.weighted_norm(w)))
        .collect::<Result<_>>()?;
    RateFit::loglog_with_floor(epsilons, &dist, DISTANCE_FLOOR)
}

/// `||eps^-2 (J_eps * v - v) - lap v||_w` for a function with known
/// Laplacian, by quadrature against the kernel.
pub fn consistency_residual_fn<V, L>(kernel: &KernelSpec, eps: f64, v: V, lap: L, w: &WeightSpec, grid: &Grid) -> Result<f64>
where
    V: Fn(&[f64]) -> f64 + Sync,
    L: Fn(&[f64]) -> f64 + Sync,
{
    if grid.dim != kernel.dim {
        return Err(Error::GridMismatch);
    }
    let res = GridDensity::from_fn(*grid, |x| {
        let smoothed = kernel.smooth(x, eps, 4, &v);
        (smoothed - v(x)) / (eps * eps) - lap(x)
    });
    Ok(res.weighted_norm(w))
}

/// [`consistency_residual_fn`] for analytic Gaussian data.
pub fn consistency_residual(kernel: &KernelSpec, eps: f64, v: &InitialData, w: &WeightSpec, grid: &Grid) -> Result<f64> {
    if v.laplacian(&vec![0.0; v.dim()]).is_none() {
        return Err(param_err("v", "consistency residuals need Gaussian data with an analytic Laplacian"));
    }
    consistency_residual_fn(
        kernel,
        eps,
        |x| v.density(x).unwrap_or(0.0),
        |x| v.laplacian(x).unwrap_or(0.0),
        w,
        grid,
    )
}

/// Log-log fit of `|F_eps_hat(xi e_1)|` over `samples` log-spaced
/// frequencies in `[xi_lo, xi_hi]`.
pub fn fourier_decay_exponent(kernel: &KernelSpec, eps: f64, xi_lo: f64, xi_hi: f64, samples: usize) -> Result<RateFit> {
    if !(xi_lo > 0.0 && xi_hi > xi_lo) {
        return Err(param_err("xi_range", format!("[{xi_lo}, {xi_hi}] is not a positive interval")));
    }
    let n = samples.max(3);
    let xs: Vec<f64> = (0..n)
        .map(|k| xi_lo * (xi_hi / xi_lo).powf(k as f64 / (n - 1) as f64))
        .collect();
    let logs: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let mut xi = vec![0.0; kernel.dim];
            xi[0] = x;
            phase_integral(kernel, eps, &xi, Horizon::Infinite).re
        })
        .collect();
    let keep: Vec<usize> = (0..n).filter(|&i| logs[i] > -700.0).collect();
    if keep.len() < n {
        log::warn!("|F_hat| underflows on {} of {n} frequencies; range shrunk", n - keep.len());
    }
    let x: Vec<f64> = keep.iter().map(|&i| xs[i]).collect();
    let l: Vec<f64> = keep.iter().map(|&i| logs[i]).collect();
    RateFit::from_logs(FitScale::LogLog, &x, &l)
}

/// Truncated weighted integral of the equilibrium and its shell profile.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    /// Weighted integral over the resolved ball.
    pub integral: f64,
    /// Radius inside which the density stays above the roundoff floor.
    pub resolved_radius: f64,
    /// `(outer radius, contribution)` of equal-width shells covering the resolved ball.
    pub shells: Vec<(f64, f64)>,
    /// Largest ratio of consecutive contributions over the outer shells.
    pub decay_ratio: f64,
    /// Contributions over the outer shells decrease geometrically.
    pub finite: bool,
    pub inconclusive: bool,
}

impl TailReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "radius,contribution")?;
        for (r, c) in &self.shells {
            writeln!(out, "{r:.16e},{c:.16e}")?;
        }
        Ok(())
    }
}

/// Number of outer shells examined by [`tail_probe`].
pub const TAIL_SHELLS: usize = 10;

/// `int F_eps(x) e^{a |x| log(1 + |x|)} dx` over the resolved part of the grid, with the shell test.
///
/// The equilibrium is inverted with an order-8 exponential filter, so the
/// slow `|xi|^{-1/eps^2}` decay of its transform does not leave oscillations
/// in the tail that the weight would amplify.
pub fn tail_probe(kernel: &KernelSpec, eps: f64, a: f64, grid: &Grid) -> Result<TailReport> {
    let mut hat = equilibrium_hat(kernel, eps, grid);
    let nu = grid.nyquist();
    let d = grid.dim;
    for (i, v) in hat.values.iter_mut().enumerate() {
        let p = grid.frequency_point(i);
        let r = p[..d].iter().map(|c| c * c).sum::<f64>().sqrt() / nu;
        *v *= (-36.0 * r.powi(8)).exp();
    }
    tail_probe_density(kernel, eps, a, &inverse(&hat))
}

/// [`tail_probe`] for a given density in place of the equilibrium.
pub fn tail_probe_density(kernel: &KernelSpec, eps: f64, a: f64, f: &GridDensity) -> Result<TailReport> {
    if !(a >= 0.0) {
        return Err(param_err("a", format!("{a} must be nonnegative")));
    }
    check_weight(kernel, eps, &WeightSpec::Poisson(a))?;
    let grid = f.grid;
    let d = grid.dim;
    let w = WeightSpec::Poisson(a);
    let radius = |i: usize| grid.point(i)[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
    let negative = f.values.iter().fold(0.0f64, |m, v| m.max(-v));
    let floor = (16.0 * negative).max(64.0 * f64::EPSILON * f.max_abs());
    let resolved_radius = (0..grid.len())
        .filter(|&i| f.values[i] <= floor)
        .map(radius)
        .fold(grid.half_width, f64::min);
    let count = 2 * TAIL_SHELLS;
    let width = resolved_radius / count as f64;
    if width < 2.0 * grid.spacing() {
        return Err(Error::Resolution(format!(
            "density falls to its roundoff floor at radius {resolved_radius}, too close to the origin for the shell test"
        )));
    }
    let mut contributions = vec![0.0; count];
    for (i, v) in f.values.iter().enumerate() {
        let r = radius(i);
        if r < resolved_radius {
            let k = ((r / width) as usize).min(count - 1);
            contributions[k] += grid.cell_volume() * v * w.eval(&grid.point(i)[..d]);
        }
    }
    let integral = contributions.iter().sum();
    let shells: Vec<(f64, f64)> = contributions.iter().enumerate().map(|(k, v)| ((k + 1) as f64 * width, *v)).collect();
    let outer = &shells[count - TAIL_SHELLS..];
    let decay_ratio = outer.windows(2).map(|p| p[1].1 / p[0].1).fold(f64::NEG_INFINITY, f64::max);
    let finite = outer.iter().all(|s| s.1 > 0.0) && decay_ratio < 1.0;
    Ok(TailReport { integral, resolved_radius, shells, decay_ratio, finite, inconclusive: !finite })
}
