//! Central-limit machinery: rescaled non-identically distributed
//! convolutions, sup-norm Berry-Esseen rates, characteristic-function
//! bounds, the telescoping product identity and Poisson partial sums.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::analysis::RateFit;
use crate::error::{param_err, Error, Result};
use crate::fields::{inverse, Grid, GridDensity, SpectralField};
use crate::kernels::{Family, KernelSpec, Profile};

/// Product density with zero mean and identity covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CLTDensity {
    pub family: Family,
    pub dim: usize,
    /// Unit-variance one-dimensional profile.
    pub profile: Profile,
}

impl CLTDensity {
    /// Rescale a kernel (second moment 2) to unit covariance: `x -> x / sqrt 2`.
    pub fn from_kernel(k: &KernelSpec) -> Self {
        CLTDensity { family: k.family, dim: k.dim, profile: k.profile.scaled(std::f64::consts::FRAC_1_SQRT_2) }
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        CLTDensity { family: Family::Gaussian, dim, profile: Profile::Gaussian { std: 1.0 } }
    }

    /// Uniform law on `[-sqrt 3, sqrt 3]^d`.
    pub fn uniform(dim: usize) -> Self {
        CLTDensity { family: Family::Uniform, dim, profile: Profile::Uniform { half_width: 3f64.sqrt() } }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.profile.density(v)).product()
    }

    pub fn fourier(&self, xi: &[f64]) -> Complex64 {
        xi.iter().map(|&v| self.profile.fourier(v)).product()
    }

    /// `sup_{|xi| >= r} |f_hat(xi)|` bound from the family.
    pub fn fourier_tail_bound(&self, r: f64) -> f64 {
        self.profile.fourier_tail_bound(r / (self.dim as f64).sqrt())
    }

    /// `rho_{2+s}` with `s = 1`, i.e. `E|X|^3`.
    pub fn rho_3(&self) -> f64 {
        if self.dim == 1 {
            self.profile.abs_moment(3.0)
        } else {
            let k = KernelSpec::from_profile(self.family, self.dim, self.profile.scaled(std::f64::consts::SQRT_2))
                .expect("unit-covariance profile rescales to a kernel");
            k.expect(|x| x.iter().map(|v| v * v).sum::<f64>().powf(1.5)) / 8f64.sqrt()
        }
    }
}

/// Standard Gaussian density.
pub fn gaussian_density(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (-0.5 * r2).exp() / (2.0 * std::f64::consts::PI).powf(0.5 * x.len() as f64)
}

/// `f_n(x) = (n sbar^2)^{d/2} (f_{sigma_1} * ... * f_{sigma_n})(sqrt(n) sbar x)`
/// with `f_sigma(x) = sigma^-d f(x / sigma)` and `sbar^2 = mean sigma_i^2`,
/// assembled from `prod_i f_hat(sigma_i xi / (sqrt(n) sbar))`. For `n = 1`
/// the density is sampled directly.
pub fn rescaled_convolution(f: &CLTDensity, sigmas: &[f64], grid: &Grid) -> Result<GridDensity> {
    if sigmas.is_empty() {
        return Err(param_err("sigmas", "at least one scale is required"));
    }
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(param_err("sigmas", format!("{s} is not a positive scale")));
    }
    if grid.dim != f.dim {
        return Err(Error::GridMismatch);
    }
    let n = sigmas.len() as f64;
    let sbar = (sigmas.iter().map(|s| s * s).sum::<f64>() / n).sqrt();
    if sigmas.len() == 1 {
        return Ok(GridDensity::from_fn(*grid, |x| f.density(x)));
    }
    let scales: Vec<f64> = sigmas.iter().map(|s| s / (n.sqrt() * sbar)).collect();
    let hat = SpectralField::from_fn(*grid, |xi| {
        let mut total = Complex64::new(1.0, 0.0);
        for &v in xi {
            for &c in &scales {
                total *= f.profile.fourier(c * v);
            }
        }
        total
    });
    let out = inverse(&hat);
    check_wrap(&out)?;
    Ok(out)
}

/// Refuse results holding more than `1e-9` of net positive mass in the outer 5%
/// of cells along any axis. Aliasing ripples of kinked densities oscillate
/// and cancel there; wrapped mass does not.
fn check_wrap(u: &GridDensity) -> Result<()> {
    let g = u.grid;
    let edge = (g.points / 20).max(1);
    let d = g.dim;
    let strip = g.cell_volume()
        * u.values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let idx = g.unflatten(*i);
                idx[..d].iter().any(|&j| j < edge || j >= g.points - edge)
            })
            .map(|(_, v)| v)
            .sum::<f64>();
    log::debug!("boundary strip mass {strip:.3e}");
    if strip > 1e-9 {
        return Err(Error::DomainTooSmall(format!(
            "rescaled convolution puts mass {strip:.2e} near the boundary of [-{0}, {0}]",
            g.half_width
        )));
    }
    Ok(())
}

/// Deterministic choice of the scales `sigma_1, ..., sigma_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaRule {
    Constant(f64),
    /// `sigma_i = exp((i mod p) / p)`, `i = 1..n`: a spread in `[1, e)`.
    Spread { period: usize },
}

impl Default for SigmaRule {
    fn default() -> Self {
        SigmaRule::Spread { period: 17 }
    }
}

impl SigmaRule {
    pub fn sigmas(&self, n: usize) -> Vec<f64> {
        match *self {
            SigmaRule::Constant(s) => vec![s; n],
            SigmaRule::Spread { period } => {
                (1..=n).map(|i| ((i % period) as f64 / period as f64).exp()).collect()
            }
        }
    }
}

/// Sup distances to the Gaussian along `n` and their log-log fit.
#[derive(Debug, Clone)]
pub struct BerryEsseenReport {
    pub n: Vec<usize>,
    pub sup_distance: Vec<f64>,
    /// `None` when every distance sits at the transform noise floor.
    pub fit: Option<RateFit>,
    /// Steps where the distance grew, as `(n, relative increase)`.
    pub non_monotone: Vec<(usize, f64)>,
}

impl BerryEsseenReport {
    pub fn degenerate(&self) -> bool {
        self.fit.as_ref().is_none_or(|f| f.degenerate)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,sup_distance")?;
        for (n, s) in self.n.iter().zip(&self.sup_distance) {
            writeln!(out, "{n},{s:.16e}")?;
        }
        if let Some(f) = &self.fit {
            writeln!(out, "# slope,{:.16e}", f.slope)?;
            writeln!(out, "# intercept,{:.16e}", f.intercept)?;
        }
        Ok(())
    }
}

/// Noise floor below which sup distances are not fitted.
pub const SUP_FLOOR: f64 = 1e-12;

/// For each `n`, `sup_x |f_n(x) - G(x)|` over the grid, then a log-log fit
/// against `n`.
pub fn be_rate_experiment(f: &CLTDensity, rule: SigmaRule, n_list: &[usize], grid: &Grid) -> Result<BerryEsseenReport> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param_err("n_list", "values must be strictly increasing"));
    }
    if n_list.first() == Some(&0) {
        return Err(param_err("n_list", "n must be at least 1"));
    }
    let d = grid.dim;
    let sup: Vec<f64> = n_list
        .par_iter()
        .map(|&n| -> Result<f64> {
            let u = rescaled_convolution(f, &rule.sigmas(n), grid)?;
            Ok(u.values
                .iter()
                .enumerate()
                .map(|(i, v)| (v - gaussian_density(&grid.point(i)[..d])).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let non_monotone = n_list
        .windows(2)
        .zip(sup.windows(2))
        .filter(|(_, s)| s[1] > s[0] && s[0] > SUP_FLOOR)
        .map(|(n, s)| (n[1], s[1] / s[0] - 1.0))
        .collect::<Vec<_>>();
    for (n, r) in &non_monotone {
        log::warn!("sup distance grew by {:.2}% at n = {n}", 100.0 * r);
    }
    let fit = if n_list.len() >= 3 {
        let x: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
        Some(RateFit::loglog_with_floor(&x, &sup, SUP_FLOOR)?)
    } else {
        None
    };
    Ok(BerryEsseenReport { n: n_list.to_vec(), sup_distance: sup, fit, non_monotone })
}

/// Result of [`charfn_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharBounds {
    /// Largest radius with `|f_hat(xi)| <= e^{-|xi|^2/4}` on the ball;
    /// infinite when no violation is found on the probed range.
    pub delta_star: f64,
    /// `sup_{|xi| >= delta} |f_hat(xi)|`.
    pub kappa: f64,
}

/// Radius up to which characteristic functions are scanned.
pub const XI_MAX: f64 = 200.0;

/// Largest `|f_hat|` on the sphere of radius `r` (quarter circle in two
/// dimensions, using `|f_hat(-xi)| = |f_hat(xi)|`).
fn sphere_max(f: &CLTDensity, r: f64) -> f64 {
    match f.dim {
        1 => f.profile.fourier(r).norm(),
        _ => {
            let steps = 64;
            (0..=steps)
                .map(|k| {
                    let th = std::f64::consts::FRAC_PI_2 * k as f64 / steps as f64;
                    (f.profile.fourier(r * th.cos()) * f.profile.fourier(r * th.sin())).norm()
                })
                .fold(0.0, f64::max)
        }
    }
}

/// Radial scan of the characteristic function.
pub fn charfn_bounds(f: &CLTDensity, delta: f64) -> Result<CharBounds> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(param_err("delta", format!("{delta} must be positive")));
    }
    if f.dim > 2 {
        return Err(Error::Dimension { dim: f.dim, what: "characteristic-function scan" });
    }
    let step = 1e-3 / f.profile.frequency_scale().max(1.0);
    let count = (XI_MAX / step).ceil() as usize;
    let violates = |r: f64| sphere_max(f, r) > (-0.25 * r * r).exp() * (1.0 + 1e-12) + 1e-300;
    let first_bad = (1..=count).into_par_iter().find_first(|&k| violates(k as f64 * step));
    let delta_star = match first_bad {
        None => f64::INFINITY,
        Some(k) => {
            let (mut lo, mut hi) = ((k - 1) as f64 * step, k as f64 * step);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if violates(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        }
    };
    let kappa = if delta >= XI_MAX {
        f.fourier_tail_bound(delta)
    } else {
        let m = ((XI_MAX - delta) / step).ceil() as usize;
        let scanned = (0..=m)
            .into_par_iter()
            .map(|k| sphere_max(f, (delta + k as f64 * step).min(XI_MAX)))
            .reduce(|| 0.0, f64::max);
        scanned.max(f.fourier_tail_bound(XI_MAX))
    };
    Ok(CharBounds { delta_star, kappa })
}

/// `s_m = e^{-m} sum_{n=m}^{2m} m^n / n!`, summed in log space.
pub fn poisson_partial_sum(m: u64) -> Result<f64> {
    if m == 0 {
        return Err(param_err("m", "must be at least 1"));
    }
    let lm = (m as f64).ln();
    let logs: Vec<f64> = (m..=2 * m).map(|n| n as f64 * lm - ln_gamma(n as f64 + 1.0) - m as f64).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(top.exp() * logs.iter().map(|l| (l - top).exp()).sum::<f64>())
}

/// `|prod a_i - prod b_i - sum_i (a_i - b_i) prod_{j<i} b_j prod_{j>i} a_j|`.
pub fn product_factorization_check(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(param_err("b", format!("length {} differs from {}", b.len(), a.len())));
    }
    let n = a.len();
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * a[i];
    }
    let mut prefix = 1.0;
    let mut rhs = 0.0;
    for i in 0..n {
        rhs += (a[i] - b[i]) * prefix * suffix[i + 1];
        prefix *= b[i];
    }
    let lhs = suffix[0] - prefix;
    Ok((lhs - rhs).abs())
}
