//! Closed-form Fourier solutions: the nonlocal evolution, its equilibrium
//! and the local Fokker-Planck reference.
//!
//! `u_hat(t, xi) = u0_hat(e^-t xi) exp(Phi(xi, t))` with
//! `Phi(xi, t) = eps^-2 int_{e^-t}^1 zeta_eps(y xi) / y dy` and
//! `zeta_eps(xi) = J_hat(eps xi) - 1`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fields::{dilate_semigroup, inverse, FourierSource, Grid, GridDensity, SpectralField};
use crate::initial::InitialData;
use crate::kernels::KernelSpec;
use crate::quad::GaussLegendre;

/// Final time of an evolution; the infinite horizon selects the
/// equilibrium formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl From<f64> for Horizon {
    fn from(t: f64) -> Self {
        if t.is_infinite() {
            Horizon::Infinite
        } else {
            Horizon::Finite(t)
        }
    }
}

impl Horizon {
    /// `e^-t`, zero at infinity.
    pub fn contraction(&self) -> f64 {
        match *self {
            Horizon::Finite(t) => (-t).exp(),
            Horizon::Infinite => 0.0,
        }
    }
}

/// `zeta_eps(xi) = J_hat(eps xi) - 1` for one kernel and scale.
#[derive(Debug, Clone, Copy)]
pub struct PhaseIntegrand<'a> {
    pub kernel: &'a KernelSpec,
    pub eps: f64,
}

impl<'a> PhaseIntegrand<'a> {
    pub fn new(kernel: &'a KernelSpec, eps: f64) -> Self {
        PhaseIntegrand { kernel, eps }
    }

    pub fn zeta(&self, xi: &[f64]) -> Complex64 {
        let mut q = [0.0; 3];
        for (o, v) in q.iter_mut().zip(xi) {
            *o = self.eps * v;
        }
        self.kernel.fourier_minus_one(&q[..xi.len()])
    }

    pub fn phase(&self, xi: &[f64], t: Horizon) -> Complex64 {
        phase_integral(self.kernel, self.eps, xi, t)
    }
}

const Y_FLOOR: f64 = 1e-8;

/// `int_lo^1 f(y) / y dy` on geometric panels of ratio 2 down to `1e-8`,
/// each split so that a panel spans at most about three radians of the
/// oscillation rate `omega`. Below the floor `f(y)/y ~ c y` is integrated
/// exactly.
pub(crate) fn geometric_integral<F: Fn(f64) -> Complex64>(lo: f64, omega: f64, tail: Complex64, f: F) -> Complex64 {
    let rule = GaussLegendre::g16();
    let mut total = Complex64::new(0.0, 0.0);
    let mut b = 1.0f64;
    let stop = lo.max(Y_FLOOR);
    while b > stop {
        let a = (0.5 * b).max(stop);
        let panels = ((omega * (b - a) / 3.0).ceil() as usize).max(1);
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let p = a + k as f64 * h;
            for (y, w) in rule.mapped(p, p + h) {
                total += w * f(y) / y;
            }
        }
        b = a;
    }
    if lo < Y_FLOOR {
        total += tail * 0.5 * (Y_FLOOR * Y_FLOOR - lo * lo);
    }
    total
}

/// `eps^-2 int_{e^-t}^1 zeta_eps(y xi) / y dy`.
pub fn phase_integral(kernel: &KernelSpec, eps: f64, xi: &[f64], t: Horizon) -> Complex64 {
    if xi.iter().all(|&v| v == 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    if let Horizon::Finite(t) = t {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
    }
    let pi = PhaseIntegrand::new(kernel, eps);
    let omega = eps * kernel.profile.frequency_scale() * xi.iter().map(|v| v.abs()).sum::<f64>();
    let r2: f64 = xi.iter().map(|v| v * v).sum();
    let d = xi.len();
    let integral = geometric_integral(t.contraction(), omega, Complex64::new(-r2 * eps * eps, 0.0), |y| {
        let mut q = [0.0; 3];
        for i in 0..d {
            q[i] = y * xi[i];
        }
        pi.zeta(&q[..d])
    });
    integral / (eps * eps)
}

/// Exact Fourier transform of the evolved datum.
pub struct Evolved<'a, S: FourierSource + ?Sized> {
    pub kernel: &'a KernelSpec,
    pub eps: f64,
    pub u0: &'a S,
    pub t: f64,
}

impl<S: FourierSource + ?Sized> FourierSource for Evolved<'_, S> {
    fn fourier(&self, xi: &[f64]) -> Complex64 {
        let c = (-self.t).exp();
        let mut q = [0.0; 3];
        for (o, v) in q.iter_mut().zip(xi) {
            *o = c * v;
        }
        self.u0.fourier(&q[..xi.len()]) * phase_integral(self.kernel, self.eps, xi, Horizon::Finite(self.t)).exp()
    }
}

/// Exact Fourier transform of the equilibrium `F_eps`.
pub struct Equilibrium<'a> {
    pub kernel: &'a KernelSpec,
    pub eps: f64,
}

impl FourierSource for Equilibrium<'_> {
    fn fourier(&self, xi: &[f64]) -> Complex64 {
        phase_integral(self.kernel, self.eps, xi, Horizon::Infinite).exp()
    }
}

fn phases_on_grid(kernel: &KernelSpec, eps: f64, grid: &Grid, t: Horizon) -> Vec<Complex64> {
    let d = grid.dim;
    (0..grid.len())
        .into_par_iter()
        .map(|i| phase_integral(kernel, eps, &grid.frequency_point(i)[..d], t))
        .collect()
}

/// `xi -> u0_hat(e^-t xi) exp(Phi(xi, t))` on the frequency grid.
pub fn evolve_hat<S: FourierSource + ?Sized>(u0: &S, grid: &Grid, kernel: &KernelSpec, eps: f64, t: f64) -> SpectralField {
    let base = u0.fourier_on_grid(grid, (-t).exp());
    if t == 0.0 {
        return SpectralField { grid: *grid, values: base };
    }
    let ph = phases_on_grid(kernel, eps, grid, Horizon::Finite(t));
    SpectralField { grid: *grid, values: base.iter().zip(&ph).map(|(b, p)| b * p.exp()).collect() }
}

/// `F_eps_hat` on the frequency grid.
pub fn equilibrium_hat(kernel: &KernelSpec, eps: f64, grid: &Grid) -> SpectralField {
    let ph = phases_on_grid(kernel, eps, grid, Horizon::Infinite);
    SpectralField { grid: *grid, values: ph.iter().map(|p| p.exp()).collect() }
}

/// Local Fokker-Planck solution `u0_hat(e^-t xi) exp(-(1 - e^-2t)|xi|^2 / 2)`.
pub fn local_fp_hat<S: FourierSource + ?Sized>(u0: &S, grid: &Grid, t: f64) -> SpectralField {
    let base = u0.fourier_on_grid(grid, (-t).exp());
    let s = -0.5 * (-(-2.0 * t).exp_m1());
    let d = grid.dim;
    let values = base
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let p = grid.frequency_point(i);
            let r2: f64 = p[..d].iter().map(|v| v * v).sum();
            b * (s * r2).exp()
        })
        .collect();
    SpectralField { grid: *grid, values }
}

/// Initial data that can also report the undissipated part
/// `T_t u0 = e^{(d - 1/eps^2) t} u0(e^t x)` in physical space.
pub trait Initial: FourierSource {
    fn dilation_part(&self, grid: &Grid, t: f64, eps: f64) -> Option<GridDensity>;
}

impl Initial for InitialData {
    fn dilation_part(&self, grid: &Grid, t: f64, eps: f64) -> Option<GridDensity> {
        self.density(&vec![0.0; grid.dim])?;
        let factor = ((grid.dim as f64 - 1.0 / (eps * eps)) * t).exp();
        let s = t.exp();
        Some(GridDensity::from_fn(*grid, |x| {
            let mut q = [0.0; 2];
            for (o, v) in q.iter_mut().zip(x) {
                *o = s * v;
            }
            factor * self.density(&q[..x.len()]).unwrap_or(0.0)
        }))
    }
}

impl Initial for GridDensity {
    fn dilation_part(&self, grid: &Grid, t: f64, eps: f64) -> Option<GridDensity> {
        (self.grid == *grid).then(|| dilate_semigroup(self, t, eps))
    }
}

impl Initial for Equilibrium<'_> {
    fn dilation_part(&self, _grid: &Grid, _t: f64, _eps: f64) -> Option<GridDensity> {
        None
    }
}

/// Density of the nonlocal solution at time `t`.
///
/// The undissipated part `T_t u0`, which carries every discontinuity of
/// `u0`, is evaluated in physical space; only the smoother remainder is
/// inverted spectrally.
pub fn nlfp_density<S: Initial + ?Sized>(kernel: &KernelSpec, eps: f64, u0: &S, grid: &Grid, t: f64) -> GridDensity {
    let mut hat = evolve_hat(u0, grid, kernel, eps, t);
    match u0.dilation_part(grid, t, eps) {
        Some(part) => {
            let mass_factor = (-t / (eps * eps)).exp();
            let base = u0.fourier_on_grid(grid, (-t).exp());
            for (v, b) in hat.values.iter_mut().zip(&base) {
                *v -= mass_factor * b;
            }
            let rest = inverse(&hat);
            part.add(&rest).expect("same grid")
        }
        None => inverse(&hat),
    }
}

pub fn equilibrium_density(kernel: &KernelSpec, eps: f64, grid: &Grid) -> GridDensity {
    inverse(&equilibrium_hat(kernel, eps, grid))
}

pub fn local_fp_density<S: FourierSource + ?Sized>(u0: &S, grid: &Grid, t: f64) -> GridDensity {
    inverse(&local_fp_hat(u0, grid, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel, Family};

    #[test]
    fn zero_frequency_and_zero_time() {
        let k = kernel(Family::Uniform, 1).unwrap();
        assert_eq!(phase_integral(&k, 0.5, &[0.0], Horizon::Infinite), Complex64::new(0.0, 0.0));
        assert_eq!(phase_integral(&k, 0.5, &[3.0], Horizon::Finite(0.0)), Complex64::new(0.0, 0.0));
        assert_eq!(PhaseIntegrand::new(&k, 0.3).zeta(&[0.0]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_phase_against_panel_oracle() {
        // ε=1, ξ=1: integral of (exp(-y^2) - 1)/y over (0, 1] with 500 uniform panels
        // after the substitution y = sqrt(s) that removes the endpoint behaviour
        let k = kernel(Family::Gaussian, 1).unwrap();
        let rule = GaussLegendre::new(20);
        let oracle = 0.5 * rule.composite(0.0, 1.0, 500, |s| (-s).exp_m1() / s);
        let got = phase_integral(&k, 1.0, &[1.0], Horizon::Infinite);
        assert!((got.re - oracle).abs() < 1e-9 && got.im.abs() < 1e-15, "{got} vs {oracle}");
    }

    #[test]
    fn finite_horizon_matches_direct_time_integral() {
        for fam in Family::ALL {
            let k = kernel(fam, 1).unwrap();
            for (eps, xi, t) in [(0.5, 3.0, 1.0), (1.0, 17.0, 0.3), (0.25, -2.0, 2.5)] {
                let rule = GaussLegendre::g16();
                let panels = 400;
                let h = t / panels as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..panels {
                    for (s, w) in rule.mapped(p as f64 * h, (p + 1) as f64 * h) {
                        acc += w * k.fourier_minus_one(&[eps * (-s).exp() * xi]);
                    }
                }
                let direct = acc / (eps * eps);
                let got = phase_integral(&k, eps, &[xi], Horizon::Finite(t));
                assert!((got - direct).norm() < 1e-10, "{fam} {got} vs {direct}");
            }
        }
    }

    #[test]
    fn small_eps_limit_is_gaussian() {
        // Richardson extrapolation of the equilibrium phase in eps^2
        let k = kernel(Family::Uniform, 1).unwrap();
        let xi = 1.3;
        let p = |e: f64| phase_integral(&k, e, &[xi], Horizon::Infinite).re;
        let (a, b, c) = (p(0.2), p(0.1), p(0.05));
        let r1 = (4.0 * b - a) / 3.0;
        let r2 = (4.0 * c - b) / 3.0;
        let r = (16.0 * r2 - r1) / 15.0;
        assert!((r + 0.5 * xi * xi).abs() < 1e-6, "{r}");
    }

    #[test]
    fn equilibrium_bounds() {
        let grid = Grid::new(1, 12.0, 1024).unwrap();
        for fam in Family::ALL {
            let k = kernel(fam, 1).unwrap();
            let f = equilibrium_hat(&k, 0.7, &grid);
            assert!((f.at_zero() - 1.0).norm() == 0.0);
            assert!(f.values.iter().all(|v| v.norm() <= 1.0 + 1e-12));
        }
        let g = kernel(Family::Gaussian, 1).unwrap();
        let f = equilibrium_hat(&g, 0.1, &Grid::standard(1).unwrap());
        let gap = f
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| (v - (-0.5 * f.grid.frequency(j).powi(2)).exp()).norm())
            .fold(0.0, f64::max);
        assert!(gap < 0.01);
    }

    #[test]
    fn evolution_identities() {
        let grid = Grid::new(1, 12.0, 512).unwrap();
        let u0 = InitialData::gaussian(&[2.0], 0.25);
        for fam in [Family::Uniform, Family::SkewStep] {
            let k = kernel(fam, 1).unwrap();
            let eps = 0.5;
            let zero = evolve_hat(&u0, &grid, &k, eps, 0.0);
            let direct = SpectralField::from_fn(grid, |xi| u0.fourier(xi));
            assert!(zero.max_abs_diff(&direct).unwrap() == 0.0);

            let mid = Evolved { kernel: &k, eps, u0: &u0, t: 0.4 };
            let two_step = evolve_hat(&mid, &grid, &k, eps, 0.7);
            let one_step = evolve_hat(&u0, &grid, &k, eps, 1.1);
            assert!(two_step.max_abs_diff(&one_step).unwrap() < 1e-8);

            let late = evolve_hat(&u0, &grid, &k, eps, 20.0);
            assert!(late.max_abs_diff(&equilibrium_hat(&k, eps, &grid)).unwrap() < 1e-8);

            let eq = Equilibrium { kernel: &k, eps };
            let stat = evolve_hat(&eq, &grid, &k, eps, 0.9);
            assert!(stat.max_abs_diff(&equilibrium_hat(&k, eps, &grid)).unwrap() < 1e-9);
        }
    }

    #[test]
    fn local_reference_limits() {
        let grid = Grid::new(1, 12.0, 512).unwrap();
        let u0 = InitialData::gaussian(&[1.0], 0.5);
        let t0 = local_fp_hat(&u0, &grid, 0.0);
        assert!(t0.max_abs_diff(&SpectralField::from_fn(grid, |xi| u0.fourier(xi))).unwrap() < 1e-15);
        let late = local_fp_hat(&u0, &grid, 40.0);
        let g = SpectralField::from_fn(grid, |xi| Complex64::new((-0.5 * xi[0] * xi[0]).exp(), 0.0));
        assert!(late.max_abs_diff(&g).unwrap() < 1e-15);
    }

    #[test]
    fn densities_have_unit_mass_and_small_negative_part() {
        let grid = Grid::standard(1).unwrap();
        let u0 = InitialData::gaussian(&[2.0], 0.25);
        for fam in Family::ALL {
            let k = kernel(fam, 1).unwrap();
            for eps in [1.0, 0.25] {
                let u = nlfp_density(&k, eps, &u0, &grid, 1.0);
                assert!((u.mass() - 1.0).abs() < 1e-8, "{fam} eps={eps} mass {}", u.mass());
                assert!(u.negative_part() < 1e-6, "{fam} eps={eps} neg {}", u.negative_part());
            }
        }
    }
}
