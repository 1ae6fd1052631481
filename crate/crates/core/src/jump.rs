//! Stochastic and iterative solution oracles: the jump-process Monte
//! Carlo simulator, the truncated Wild sum and Duhamel-Picard iteration.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{convolve, dilate_semigroup, inverse, FourierSource, Grid, GridDensity, SpectralField};
use crate::initial::InitialData;
use crate::kernels::{open_unit, KernelSpec};
use crate::quad::GaussLegendre;

/// Source of random starting points.
pub trait PointSampler: Sync {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

impl PointSampler for InitialData {
    fn dim(&self) -> usize {
        InitialData::dim(self)
    }
    fn draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        self.sample_into(rng, out);
    }
}

impl PointSampler for KernelSpec {
    fn dim(&self) -> usize {
        self.dim
    }
    fn draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        self.sample_into(rng, out);
    }
}

/// Master seed and the range of per-particle stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRecord {
    pub master: u64,
    pub first_stream: u64,
    pub streams: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub time: f64,
    /// Row-major `n x dim` positions.
    pub positions: Vec<f64>,
    pub seed: SeedRecord,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.positions.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in self.positions.chunks(self.dim) {
            let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Random stream of particle `i`: a ChaCha8 generator keyed by the master
/// seed, positioned on its own stream id.
pub fn particle_stream(master: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(i);
    rng
}

/// Simulate the jump process: exponential waiting times of rate `eps^-2`,
/// contraction `x -> x e^{-dt}` between jumps and increments `eps Z`,
/// `Z ~ J`, at jumps.
pub fn simulate<S: PointSampler + ?Sized>(
    kernel: &KernelSpec,
    eps: f64,
    u0: &S,
    t: f64,
    n_particles: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Parameter { key: "t".into(), reason: format!("{t} must be a finite nonnegative time") });
    }
    if u0.dim() != kernel.dim {
        return Err(Error::Dimension { dim: u0.dim(), what: "initial sampler of this kernel" });
    }
    let d = kernel.dim;
    let eps2 = eps * eps;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = vec![0.0; n_particles * d];
    positions.par_chunks_mut(d).enumerate().for_each(|(i, x)| {
        let mut rng = base.clone();
        rng.set_stream(i as u64);
        u0.draw(&mut rng, x);
        let mut z = [0.0; 3];
        let mut s = 0.0;
        loop {
            let tau = -eps2 * open_unit(&mut rng).ln();
            if s + tau >= t {
                let f = (s - t).exp();
                x.iter_mut().for_each(|v| *v *= f);
                break;
            }
            let f = (-tau).exp();
            kernel.sample_into(&mut rng, &mut z[..d]);
            for k in 0..d {
                x[k] = x[k] * f + eps * z[k];
            }
            s += tau;
        }
    });
    Ok(ParticleEnsemble {
        dim: d,
        time: t,
        positions,
        seed: SeedRecord { master: seed, first_stream: 0, streams: n_particles as u64 },
    })
}

/// Fraction of particles outside the grid box.
pub fn escaped_fraction(e: &ParticleEnsemble, grid: &Grid) -> f64 {
    if e.is_empty() {
        return 0.0;
    }
    let out = e
        .positions
        .chunks(e.dim)
        .filter(|p| p.iter().any(|v| v.abs() >= grid.half_width))
        .count();
    out as f64 / e.len() as f64
}

/// Normalized histogram on the grid cells; the mass equals the retained
/// fraction of particles.
pub fn empirical_density(e: &ParticleEnsemble, grid: &Grid) -> Result<GridDensity> {
    if e.dim != grid.dim && !e.is_empty() {
        return Err(Error::GridMismatch);
    }
    let mut out = GridDensity::zeros(*grid);
    if e.is_empty() {
        return Ok(out);
    }
    let h = grid.spacing();
    let n = grid.points;
    let cell = |v: f64| -> Option<usize> {
        let c = ((v + grid.half_width) / h).floor();
        (c >= 0.0 && c < n as f64).then_some(c as usize)
    };
    for p in e.positions.chunks(e.dim) {
        let idx = if grid.dim == 1 {
            cell(p[0])
        } else {
            match (cell(p[0]), cell(p[1])) {
                (Some(a), Some(b)) => Some(a * n + b),
                _ => None,
            }
        };
        if let Some(i) = idx {
            out.values[i] += 1.0;
        }
    }
    let escaped = escaped_fraction(e, grid);
    if escaped > 1e-3 {
        log::warn!("{:.3}% of particles fall outside the histogram box", 100.0 * escaped);
    }
    let scale = 1.0 / (e.len() as f64 * grid.cell_volume());
    out.values.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Integral over the simplex `t >= t_1 >= ... >= t_n >= 0` by the tensor
/// Gauss-Legendre rule on `[0, t]^n`, each node tuple sorted into the
/// simplex and the total divided by `n!`.
pub fn simplex_quadrature<F: FnMut(&[f64]) -> Complex64>(n: usize, t: f64, nodes: usize, mut f: F) -> Complex64 {
    if n == 0 {
        return f(&[]);
    }
    let rule = GaussLegendre::new(nodes);
    let pts: Vec<(f64, f64)> = rule.mapped(0.0, t).collect();
    let mut idx = vec![0usize; n];
    let mut tuple = vec![0.0; n];
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        let mut w = 1.0;
        for k in 0..n {
            tuple[k] = pts[idx[k]].0;
            w *= pts[idx[k]].1;
        }
        tuple.sort_by(|a, b| b.total_cmp(a));
        total += w * f(&tuple);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < pts.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                let fact: f64 = (1..=n).map(|v| v as f64).product();
                return total / fact;
            }
        }
    }
}

/// Truncated Wild sum and its missing Poisson mass.
#[derive(Debug, Clone)]
pub struct WildSum {
    pub density: GridDensity,
    pub missing_mass: f64,
}

/// `e^{(d - 1/eps^2) t} [u0(e^t x) + sum_{n=1}^{n_max} eps^{-2n} int_simplex
/// (J_{eps e^{t_1}} * ... * J_{eps e^{t_n}} * u0)(e^t x) dt]`.
///
/// The `n = 0` term is the dilation `T_t u0`; the others are assembled in
/// frequency space. The simplex rule is the tensor rule of
/// [`simplex_quadrature`]; because the integrand is a product of identical
/// one-dimensional factors, the tensor sum is evaluated exactly as the
/// `n`-th power of the one-dimensional sum.
pub fn wild_sum_truncated(
    u0: &GridDensity,
    kernel: &KernelSpec,
    eps: f64,
    t: f64,
    n_max: usize,
    quad_nodes: usize,
) -> Result<WildSum> {
    let lam = t / (eps * eps);
    if lam > 15.0 {
        return Err(Error::Refused(format!(
            "t/eps^2 = {lam} spreads the Poisson mass over too many terms; use the spectral solver"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Parameter { key: "t".into(), reason: format!("{t} must be positive") });
    }
    let mut poisson = 0.0;
    let mut term = (-lam).exp();
    for n in 0..=n_max {
        poisson += term;
        term *= lam / (n + 1) as f64;
    }
    let missing_mass = (1.0 - poisson).max(0.0);
    if missing_mass > 1e-3 {
        log::warn!("Wild sum truncated at n = {n_max} misses Poisson mass {missing_mass:.3e}");
    }
    let dilated = dilate_semigroup(u0, t, eps);
    if n_max == 0 {
        return Ok(WildSum { density: dilated, missing_mass });
    }
    let grid = u0.grid;
    let d = grid.dim;
    let c = (-t).exp();
    let base = u0.fourier_on_grid(&grid, c);
    let rule = GaussLegendre::new(quad_nodes.max(1));
    let pts: Vec<(f64, f64)> = rule.mapped(0.0, t).collect();
    let loss = (-lam).exp();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.frequency_point(i);
            let mut a = Complex64::new(0.0, 0.0);
            for &(s, w) in &pts {
                let f = eps * (s - t).exp();
                let q = [f * p[0], f * p[1]];
                a += w * kernel.fourier(&q[..d]);
            }
            a /= eps * eps;
            let mut sum = Complex64::new(0.0, 0.0);
            let mut power = Complex64::new(1.0, 0.0);
            for n in 1..=n_max {
                power *= a / n as f64;
                sum += power;
            }
            loss * sum * base[i]
        })
        .collect();
    let jumps = inverse(&SpectralField { grid, values });
    Ok(WildSum { density: dilated.add(&jumps)?, missing_mass })
}

/// Picard iterate and the `L^1` size of each successive increment at the
/// final time.
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub density: GridDensity,
    pub increments: Vec<f64>,
}

/// Picard iteration of `u -> T_t u0 + eps^-2 int_0^t T_{t-s}[J_eps * u(s)] ds`
/// on the time grid `k dt`, trapezoid rule in time. `iters = 0` returns
/// `T_t u0`.
pub fn duhamel_picard(
    u0: &GridDensity,
    kernel: &KernelSpec,
    eps: f64,
    t: f64,
    dt: f64,
    iters: usize,
) -> Result<PicardResult> {
    let steps_f = t / dt;
    let steps = steps_f.round() as usize;
    if !(t > 0.0 && dt > 0.0) || (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) || steps == 0 {
        return Err(Error::Parameter { key: "dt".into(), reason: format!("{dt} must divide t = {t}") });
    }
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let free: Vec<GridDensity> = times.par_iter().map(|&s| dilate_semigroup(u0, s, eps)).collect();
    let mut current = free.clone();
    let mut increments = Vec::with_capacity(iters);
    let inv_eps2 = 1.0 / (eps * eps);
    for _ in 0..iters {
        let smoothed: Vec<GridDensity> = current
            .par_iter()
            .map(|u| convolve(kernel, eps, u))
            .collect::<Result<_>>()?;
        let next: Vec<GridDensity> = (0..=steps)
            .into_par_iter()
            .map(|k| {
                let mut acc = free[k].clone();
                for j in 0..=k {
                    if k == 0 {
                        break;
                    }
                    let w = if j == 0 || j == k { 0.5 * dt } else { dt };
                    let moved = dilate_semigroup(&smoothed[j], times[k] - times[j], eps);
                    for (a, m) in acc.values.iter_mut().zip(&moved.values) {
                        *a += w * inv_eps2 * m;
                    }
                }
                acc
            })
            .collect();
        increments.push(next[steps].l1_distance(&current[steps])?);
        current = next;
    }
    Ok(PicardResult { density: current.swap_remove(steps), increments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel, Family};

    #[test]
    fn zero_time_returns_initial_draws() {
        let k = kernel(Family::Uniform, 1).unwrap();
        let u0 = InitialData::gaussian(&[1.0], 2.0);
        let e = simulate(&k, 0.5, &u0, 0.0, 100, 9).unwrap();
        for i in 0..100 {
            let mut rng = particle_stream(9, i as u64);
            let mut x = [0.0];
            u0.sample_into(&mut rng, &mut x);
            assert_eq!(e.particle(i)[0], x[0]);
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let k = kernel(Family::SkewStep, 2).unwrap();
        let u0 = InitialData::gaussian(&[0.5, -0.5], 1.0);
        let a = simulate(&k, 0.7, &u0, 1.3, 2000, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate(&k, 0.7, &u0, 1.3, 2000, 42).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mean_relaxes_like_exp_minus_t() {
        let k = kernel(Family::Triangular, 1).unwrap();
        let x0 = 3.0;
        let t = 0.8;
        let e = simulate(&k, 0.5, &InitialData::point(&[x0]), t, 200_000, 3).unwrap();
        let n = e.len() as f64;
        let mean: f64 = e.positions.iter().sum::<f64>() / n;
        let var: f64 = e.positions.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let want = (-t).exp() * x0;
        assert!((mean - want).abs() < 4.0 * (var / n).sqrt(), "{mean} vs {want}");
    }

    #[test]
    fn empty_and_escaping_ensembles() {
        let grid = Grid::new(1, 4.0, 64).unwrap();
        let empty = ParticleEnsemble {
            dim: 1,
            time: 0.0,
            positions: vec![],
            seed: SeedRecord { master: 0, first_stream: 0, streams: 0 },
        };
        let h = empirical_density(&empty, &grid).unwrap();
        assert_eq!(h.mass(), 0.0);
        let e = ParticleEnsemble { positions: vec![0.1, 3.9, 5.0, -7.0], ..empty };
        let h = empirical_density(&e, &grid).unwrap();
        assert!((h.mass() - 0.5).abs() < 1e-14);
        assert!((escaped_fraction(&e, &grid) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn simplex_rule_volume_and_order() {
        for n in 1..=4usize {
            let v = simplex_quadrature(n, 0.7, 5, |_| Complex64::new(1.0, 0.0));
            let fact: f64 = (1..=n).map(|v| v as f64).product();
            assert!((v.re - 0.7f64.powi(n as i32) / fact).abs() < 1e-14);
        }
        // symmetric integrand t1 + t2 over the triangle gives t^3/2
        let v = simplex_quadrature(2, 1.5, 4, |s| {
            assert!(s[0] >= s[1]);
            Complex64::new(s[0] + s[1], 0.0)
        });
        assert!((v.re - 1.5f64.powi(3) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn factorized_sum_equals_tensor_rule() {
        let k = kernel(Family::SkewStep, 1).unwrap();
        let (eps, t, xi) = (0.8, 0.6, 2.3);
        let nodes = 6;
        let rule = GaussLegendre::new(nodes);
        let one: Complex64 = rule.mapped(0.0, t).map(|(s, w)| w * k.fourier(&[eps * (s - t).exp() * xi])).sum();
        for n in 1..=3usize {
            let tensor = simplex_quadrature(n, t, nodes, |s| s.iter().map(|&ti| k.fourier(&[eps * (ti - t).exp() * xi])).product());
            let fact: f64 = (1..=n).map(|v| v as f64).product();
            assert!((tensor - one.powi(n as i32) / fact).norm() < 1e-13);
        }
    }

    #[test]
    fn wild_sum_mass_and_refusal() {
        let grid = Grid::new(1, 12.0, 1024).unwrap();
        let u0 = InitialData::gaussian(&[1.0], 0.5).on_grid(grid).unwrap();
        let k = kernel(Family::Uniform, 1).unwrap();
        let zero = wild_sum_truncated(&u0, &k, 1.0, 0.4, 0, 8).unwrap();
        assert_eq!(zero.density, dilate_semigroup(&u0, 0.4, 1.0));
        let mut last = 0.0;
        for n in 0..6 {
            let m = wild_sum_truncated(&u0, &k, 1.0, 0.4, n, 16).unwrap().density.mass();
            assert!(m > last && m <= 1.0 + 1e-12);
            last = m;
        }
        assert!(matches!(wild_sum_truncated(&u0, &k, 0.25, 1.0, 8, 8), Err(Error::Refused(_))));
    }

    #[test]
    fn picard_zero_iterations_is_free_flow() {
        let grid = Grid::new(1, 12.0, 256).unwrap();
        let u0 = InitialData::gaussian(&[0.0], 1.0).on_grid(grid).unwrap();
        let k = kernel(Family::Gaussian, 1).unwrap();
        let r = duhamel_picard(&u0, &k, 1.0, 0.5, 0.125, 0).unwrap();
        assert_eq!(r.density, dilate_semigroup(&u0, 0.5, 1.0));
        assert!(duhamel_picard(&u0, &k, 1.0, 0.5, 0.3, 1).is_err());
    }
}
