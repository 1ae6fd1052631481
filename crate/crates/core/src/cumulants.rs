//! Cumulant and moment dynamics: the closed-form cumulant generating
//! function, per-order cumulant evolution, Bell-polynomial moment
//! reconstruction, the steady-state moment recursion and empirical
//! estimators.

use std::collections::BTreeMap;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::error::{param_err, Error, Result};
use crate::fields::GridDensity;
use crate::initial::InitialData;
use crate::jump::ParticleEnsemble;
use crate::kernels::KernelSpec;
use crate::spectral::{geometric_integral, Horizon};

/// Largest order accepted by the Bell recurrences.
pub const MAX_BELL_ORDER: usize = 20;

/// Map from multi-indices `alpha` with `1 <= |alpha| <= max_order` to reals.
/// Holds either cumulants or raw moments depending on context.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantTable {
    pub dim: usize,
    pub max_order: usize,
    pub entries: BTreeMap<Vec<u32>, f64>,
}

impl CumulantTable {
    pub fn new(dim: usize, max_order: usize) -> Self {
        CumulantTable { dim, max_order, entries: BTreeMap::new() }
    }

    /// One-dimensional table from `values[k-1] = entry of order k`.
    pub fn from_sequence(values: &[f64]) -> Self {
        let mut t = Self::new(1, values.len());
        for (k, &v) in values.iter().enumerate() {
            t.entries.insert(vec![k as u32 + 1], v);
        }
        t
    }

    /// Entry at `alpha`; the empty multi-index is `0` (log of unit mass).
    pub fn get(&self, alpha: &[u32]) -> Option<f64> {
        if alpha.iter().all(|&a| a == 0) {
            return Some(0.0);
        }
        self.entries.get(alpha).copied()
    }

    pub fn set(&mut self, alpha: &[u32], value: f64) {
        self.entries.insert(alpha.to_vec(), value);
    }

    /// One-dimensional entries of orders `1..=max_order`, if all present.
    pub fn sequence(&self) -> Option<Vec<f64>> {
        (1..=self.max_order as u32).map(|k| self.get(&[k])).collect()
    }

    /// Rows `alpha,value` with multi-index components joined by `:`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "alpha,value")?;
        for (alpha, v) in &self.entries {
            let a: Vec<String> = alpha.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{:.16e}", a.join(":"), v)?;
        }
        Ok(())
    }
}

/// All multi-indices of length `dim` with `1 <= |alpha| <= max_order`,
/// ordered by total order.
pub fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for n in 1..=max_order as u32 {
        let mut cur = vec![0u32; dim];
        fill(&mut cur, 0, n, &mut out);
    }
    out
}

fn fill(cur: &mut Vec<u32>, k: usize, left: u32, out: &mut Vec<Vec<u32>>) {
    if k + 1 == cur.len() {
        cur[k] = left;
        out.push(cur.clone());
        return;
    }
    for a in (0..=left).rev() {
        cur[k] = a;
        fill(cur, k + 1, left - a, out);
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(t, xi) = C_0(e^-t xi) + eps^-2 int_{e^-t}^1 (M(eps y xi) - 1) / y dy`,
/// the log moment generating function of the solution.
pub fn cgf_eval<F: Fn(&[f64]) -> f64>(
    kernel: &KernelSpec,
    eps: f64,
    u0_cgf: F,
    t: impl Into<Horizon>,
    xi: &[f64],
) -> Result<f64> {
    if xi.len() != kernel.dim {
        return Err(Error::Dimension { dim: xi.len(), what: "frequency point of this kernel" });
    }
    let t = t.into();
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm * eps >= kernel.exp_rate() {
        return Err(Error::Domain(format!("kernel MGF diverges at |eps xi| = {}", norm * eps)));
    }
    let c = t.contraction();
    let shrunk: Vec<f64> = xi.iter().map(|v| c * v).collect();
    let c0 = u0_cgf(&shrunk);
    if norm == 0.0 {
        return Ok(c0);
    }
    let d = xi.len();
    let omega = eps * kernel.profile.frequency_scale() * xi.iter().map(|v| v.abs()).sum::<f64>();
    let integral = match t {
        Horizon::Finite(s) if s <= 0.0 => Complex64::new(0.0, 0.0),
        _ => geometric_integral(c, omega, Complex64::new(norm * norm * eps * eps, 0.0), |y| {
            let mut q = [0.0; 3];
            for i in 0..d {
                q[i] = eps * y * xi[i];
            }
            Complex64::new(kernel.mgf_minus_one(&q[..d]), 0.0)
        }),
    };
    let value = c0 + integral.re / (eps * eps);
    if !value.is_finite() {
        return Err(Error::Domain(format!("cumulant generating function not finite at {xi:?}")));
    }
    Ok(value)
}

/// `kappa_alpha(u(t)) = e^{-n t} kappa_alpha(u0) + (1 - e^{-n t}) m_alpha(J_eps) / (n eps^2)`
/// with `n = |alpha|`; the infinite horizon gives the equilibrium cumulant.
pub fn evolve_cumulant(
    kernel: &KernelSpec,
    eps: f64,
    kappa0: &CumulantTable,
    t: impl Into<Horizon>,
    alpha: &[u32],
) -> Result<f64> {
    if alpha.len() != kernel.dim || kappa0.dim != kernel.dim {
        return Err(Error::Dimension { dim: alpha.len(), what: "multi-index of this kernel" });
    }
    let n: u32 = alpha.iter().sum();
    if n == 0 {
        return Ok(0.0);
    }
    if n as usize > kappa0.max_order {
        return Err(param_err("alpha", format!("order {n} exceeds the table order {}", kappa0.max_order)));
    }
    let decay = match t.into() {
        Horizon::Finite(t) => (-(n as f64) * t).exp(),
        Horizon::Infinite => 0.0,
    };
    let source = kernel.moment(alpha, eps) / (n as f64 * eps * eps);
    if decay == 0.0 {
        return Ok(source);
    }
    let k0 = kappa0
        .get(alpha)
        .ok_or_else(|| param_err("alpha", format!("{alpha:?} missing from the initial table")))?;
    Ok(decay * k0 + (1.0 - decay) * source)
}

/// Evolve every entry of a cumulant table.
pub fn evolve_table(kernel: &KernelSpec, eps: f64, kappa0: &CumulantTable, t: impl Into<Horizon>) -> Result<CumulantTable> {
    let t = t.into();
    let mut out = CumulantTable::new(kappa0.dim, kappa0.max_order);
    for alpha in kappa0.entries.keys() {
        out.set(alpha, evolve_cumulant(kernel, eps, kappa0, t, alpha)?);
    }
    Ok(out)
}

fn bell_guard(n: usize) -> Result<()> {
    if n > MAX_BELL_ORDER {
        return Err(Error::Refused(format!("Bell polynomials of order {n} exceed the limit {MAX_BELL_ORDER}")));
    }
    Ok(())
}

/// Complete Bell polynomials: raw moments `m_1..m_n` from cumulants
/// `kappa_1..kappa_n`.
pub fn bell_moments(kappas: &[f64]) -> Result<Vec<f64>> {
    bell_guard(kappas.len())?;
    let n = kappas.len();
    let mut b = vec![1.0; n + 1];
    for m in 0..n {
        b[m + 1] = (0..=m).map(|k| binomial(m as u32, k as u32) * kappas[k] * b[m - k]).sum();
    }
    Ok(b[1..].to_vec())
}

/// Inverse of [`bell_moments`]: cumulants from raw moments.
pub fn moments_to_cumulants(moments: &[f64]) -> Result<Vec<f64>> {
    bell_guard(moments.len())?;
    let n = moments.len();
    let mut k = vec![0.0; n];
    for m in 1..=n {
        let lower: f64 = (1..m)
            .map(|j| binomial(m as u32 - 1, j as u32 - 1) * k[j - 1] * moments[m - j - 1])
            .sum();
        k[m - 1] = moments[m - 1] - lower;
    }
    Ok(k)
}

/// Partial Bell polynomial `B_{n,k}(x_1, ..., x_{n-k+1})`; `x[i]` holds
/// `x_{i+1}`.
pub fn partial_bell(n: usize, k: usize, x: &[f64]) -> Result<f64> {
    bell_guard(n)?;
    if k > n {
        return Ok(0.0);
    }
    if x.len() < n + 1 - k.max(1) && n > 0 {
        return Err(param_err("x", format!("need {} arguments, got {}", n + 1 - k.max(1), x.len())));
    }
    // table[m][j] = B_{m,j}
    let mut table = vec![vec![0.0; k + 1]; n + 1];
    table[0][0] = 1.0;
    for m in 1..=n {
        for j in m.saturating_sub(n - k).max(1)..=k.min(m) {
            table[m][j] = (1..=m - j + 1)
                .map(|i| binomial(m as u32 - 1, i as u32 - 1) * x[i - 1] * table[m - i][j - 1])
                .sum();
        }
    }
    Ok(table[n][k])
}

/// Moments of order `|alpha|` by the steady-state recursion
/// `m_alpha(t) = gamma_alpha (1 - e^{-n t}) + e^{-n t} m_alpha(u0)`, where
/// `gamma_alpha = (n eps^2)^-1 sum_{0 != beta <= alpha} C(alpha, beta)
/// m_beta(J_eps) m_{alpha-beta}(F_eps)` and the lower-order equilibrium
/// moments are themselves produced by the recursion.
pub fn moment_recursion(
    kernel: &KernelSpec,
    eps: f64,
    m0: &CumulantTable,
    t: impl Into<Horizon>,
    alpha: &[u32],
) -> Result<f64> {
    if alpha.len() != kernel.dim {
        return Err(Error::Dimension { dim: alpha.len(), what: "multi-index of this kernel" });
    }
    let n: u32 = alpha.iter().sum();
    if n == 0 {
        return Ok(1.0);
    }
    let mut memo = BTreeMap::new();
    let gamma = steady_moment(kernel, eps, alpha, &mut memo);
    let decay = match t.into() {
        Horizon::Finite(t) => (-(n as f64) * t).exp(),
        Horizon::Infinite => 0.0,
    };
    if decay == 0.0 {
        return Ok(gamma);
    }
    let start = m0
        .get(alpha)
        .ok_or_else(|| param_err("alpha", format!("{alpha:?} missing from the initial moments")))?;
    Ok(gamma * (1.0 - decay) + decay * start)
}

fn steady_moment(kernel: &KernelSpec, eps: f64, alpha: &[u32], memo: &mut BTreeMap<Vec<u32>, f64>) -> f64 {
    let n: u32 = alpha.iter().sum();
    if n == 0 {
        return 1.0;
    }
    if let Some(&v) = memo.get(alpha) {
        return v;
    }
    let mut total = 0.0;
    let mut beta = vec![0u32; alpha.len()];
    loop {
        let mut k = 0;
        loop {
            if k == alpha.len() {
                let v = total / (n as f64 * eps * eps);
                memo.insert(alpha.to_vec(), v);
                return v;
            }
            beta[k] += 1;
            if beta[k] <= alpha[k] {
                break;
            }
            beta[k] = 0;
            k += 1;
        }
        let coef: f64 = alpha.iter().zip(&beta).map(|(&a, &b)| binomial(a, b)).product();
        let mj = kernel.moment(&beta, eps);
        if mj == 0.0 {
            continue;
        }
        let rest: Vec<u32> = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
        total += coef * mj * steady_moment(kernel, eps, &rest, memo);
    }
}

/// Cumulants of an analytic initial datum up to `max_order`. In `d > 1`
/// only product measures are supported; their mixed cumulants vanish.
pub fn initial_cumulants(u0: &InitialData, max_order: usize) -> Result<CumulantTable> {
    let d = u0.dim();
    let marginal = |i: usize| -> Result<Vec<f64>> {
        let moments: Vec<f64> = (1..=max_order as u32)
            .map(|k| {
                let mut a = vec![0u32; d];
                a[i] = k;
                u0.moment(&a)
            })
            .collect();
        moments_to_cumulants(&moments)
    };
    let mut table = CumulantTable::new(d, max_order);
    if d == 1 {
        for (k, v) in marginal(0)?.into_iter().enumerate() {
            table.set(&[k as u32 + 1], v);
        }
        return Ok(table);
    }
    if let InitialData::Gaussians(b) = u0 {
        if b.len() > 1 {
            return Err(Error::Dimension { dim: d, what: "mixture cumulants (one dimension only)" });
        }
    }
    let margins: Vec<Vec<f64>> = (0..d).map(marginal).collect::<Result<_>>()?;
    for alpha in multi_indices(d, max_order) {
        let nonzero: Vec<usize> = (0..d).filter(|&i| alpha[i] > 0).collect();
        let v = if nonzero.len() == 1 {
            margins[nonzero[0]][alpha[nonzero[0]] as usize - 1]
        } else {
            0.0
        };
        table.set(&alpha, v);
    }
    Ok(table)
}

/// Data accepted by [`empirical_cumulants`].
#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    Ensemble(&'a ParticleEnsemble),
    Grid(&'a GridDensity),
}

impl<'a> From<&'a ParticleEnsemble> for Sample<'a> {
    fn from(e: &'a ParticleEnsemble) -> Self {
        Sample::Ensemble(e)
    }
}

impl<'a> From<&'a GridDensity> for Sample<'a> {
    fn from(g: &'a GridDensity) -> Self {
        Sample::Grid(g)
    }
}

/// `(weight, coordinate)` pairs along one axis with weights summing to one.
fn axis_weights(data: Sample<'_>, axis: usize) -> Vec<(f64, f64)> {
    match data {
        Sample::Ensemble(e) => {
            let w = 1.0 / e.len() as f64;
            e.positions.chunks(e.dim).map(|p| (w, p[axis])).collect()
        }
        Sample::Grid(g) => {
            let d = g.grid.dim;
            let mass = g.mass();
            let cell = g.grid.cell_volume();
            g.values
                .iter()
                .enumerate()
                .map(|(i, v)| (v * cell / mass, g.grid.point(i)[..d][axis]))
                .collect()
        }
    }
}

fn central_cumulants(pairs: &[(f64, f64)], max_order: usize) -> Vec<f64> {
    let mean: f64 = pairs.iter().map(|(w, x)| w * x).sum();
    let mut mu = [0.0; 5];
    for &(w, x) in pairs {
        let c = x - mean;
        let mut p = w;
        for m in mu.iter_mut().skip(1) {
            p *= c;
            *m += p;
        }
    }
    let all = [mean, mu[2], mu[3], mu[4] - 3.0 * mu[2] * mu[2]];
    all[..max_order].to_vec()
}

/// Per-coordinate cumulants of orders `1..=max_order <= 4` from central
/// moments: `kappa_1 = m_1`, `kappa_2 = mu_2`, `kappa_3 = mu_3`,
/// `kappa_4 = mu_4 - 3 mu_2^2`. Grid data are normalized by their mass.
pub fn empirical_cumulants<'a>(data: impl Into<Sample<'a>>, max_order: usize) -> Result<CumulantTable> {
    if max_order > 4 {
        return Err(Error::Refused(format!("empirical cumulants of order {max_order} (at most 4)")));
    }
    let data = data.into();
    let dim = match data {
        Sample::Ensemble(e) => {
            if e.is_empty() {
                return Err(param_err("data", "empty ensemble"));
            }
            e.dim
        }
        Sample::Grid(g) => {
            if !(g.mass() > 0.0) {
                return Err(param_err("data", "grid density without positive mass"));
            }
            g.grid.dim
        }
    };
    let mut table = CumulantTable::new(dim, max_order);
    for axis in 0..dim {
        let ks = central_cumulants(&axis_weights(data, axis), max_order);
        for (k, v) in ks.into_iter().enumerate() {
            let mut alpha = vec![0u32; dim];
            alpha[axis] = k as u32 + 1;
            table.set(&alpha, v);
        }
    }
    Ok(table)
}

/// Estimate and batch-means standard error of the per-coordinate cumulant
/// of `order` along `axis`.
pub fn batch_standard_error(e: &ParticleEnsemble, axis: usize, order: usize, batches: usize) -> Result<(f64, f64)> {
    if !(1..=4).contains(&order) {
        return Err(Error::Refused(format!("cumulant order {order} outside 1..=4")));
    }
    if batches < 2 || e.len() < 2 * batches {
        return Err(param_err("batches", format!("{batches} batches for {} particles", e.len())));
    }
    let all: Vec<(f64, f64)> = e.positions.chunks(e.dim).map(|p| (1.0, p[axis])).collect();
    let normalized = |s: &[(f64, f64)]| -> Vec<(f64, f64)> {
        let w = 1.0 / s.len() as f64;
        s.iter().map(|&(_, x)| (w, x)).collect()
    };
    let estimate = central_cumulants(&normalized(&all), order)[order - 1];
    let size = all.len() / batches;
    let values: Vec<f64> = all
        .chunks_exact(size)
        .take(batches)
        .map(|c| central_cumulants(&normalized(c), order)[order - 1])
        .collect();
    let mean = values.iter().sum::<f64>() / batches as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    Ok((estimate, (var / batches as f64).sqrt()))
}
