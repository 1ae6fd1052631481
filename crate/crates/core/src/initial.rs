//! Analytic initial data: Gaussian bumps, box indicators, two-component
//! Gaussian mixtures and point masses.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{param_err, Error, Result};
use crate::fields::{FourierSource, Grid, GridDensity};
use crate::kernels::open_unit;

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub weight: f64,
    pub center: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Weighted sum of isotropic Gaussians; weights sum to one.
    Gaussians(Vec<Bump>),
    /// Normalized indicator of the cube `center + [-radius, radius]^d`.
    Box { center: Vec<f64>, radius: f64 },
    Point { at: Vec<f64> },
}

impl InitialData {
    pub fn gaussian(center: &[f64], variance: f64) -> Self {
        InitialData::Gaussians(vec![Bump { weight: 1.0, center: center.to_vec(), variance }])
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian(&vec![0.0; dim], 1.0)
    }

    pub fn boxed(center: &[f64], radius: f64) -> Self {
        InitialData::Box { center: center.to_vec(), radius }
    }

    pub fn point(at: &[f64]) -> Self {
        InitialData::Point { at: at.to_vec() }
    }

    /// Catalog constructor used by configuration files.
    ///
    /// `gaussian`: `mean`, `variance`; `box`: `center`, `radius`;
    /// `mixture`: `weight`, `mean1`, `variance1`, `mean2`, `variance2`;
    /// `point`: `at`. Scalar locations shift the first coordinate.
    pub fn from_params(name: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "gaussian" => &["mean", "variance"],
            "box" => &["center", "radius"],
            "mixture" => &["weight", "mean1", "variance1", "mean2", "variance2"],
            "point" => &["at"],
            other => return Err(Error::UnknownInitial(other.to_string())),
        };
        for key in params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(param_err(key, format!("not a parameter of initial datum `{name}`")));
            }
        }
        let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        let loc = |v: f64| {
            let mut c = vec![0.0; dim];
            c[0] = v;
            c
        };
        let positive = |k: &str, v: f64| -> Result<f64> {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(param_err(k, format!("{v} must be positive")))
            }
        };
        let data = match name {
            "gaussian" => Self::gaussian(&loc(get("mean", 0.0)), positive("variance", get("variance", 1.0))?),
            "box" => Self::boxed(&loc(get("center", 0.0)), positive("radius", get("radius", 1.0))?),
            "mixture" => {
                let w = get("weight", 0.7);
                if !(0.0..=1.0).contains(&w) {
                    return Err(param_err("weight", format!("{w} must lie in [0, 1]")));
                }
                InitialData::Gaussians(vec![
                    Bump { weight: w, center: loc(get("mean1", -1.0)), variance: positive("variance1", get("variance1", 0.5))? },
                    Bump {
                        weight: 1.0 - w,
                        center: loc(get("mean2", 2.0)),
                        variance: positive("variance2", get("variance2", 0.3))?,
                    },
                ])
            }
            _ => Self::point(&loc(get("at", 0.0))),
        };
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialData::Gaussians(b) => b[0].center.len(),
            InitialData::Box { center, .. } => center.len(),
            InitialData::Point { at } => at.len(),
        }
    }

    /// Pointwise density; `None` for a point mass.
    pub fn density(&self, x: &[f64]) -> Option<f64> {
        match self {
            InitialData::Gaussians(bumps) => Some(
                bumps
                    .iter()
                    .map(|b| {
                        let r2: f64 = x.iter().zip(&b.center).map(|(a, c)| (a - c).powi(2)).sum();
                        b.weight * (-0.5 * r2 / b.variance).exp()
                            / (2.0 * std::f64::consts::PI * b.variance).powf(0.5 * x.len() as f64)
                    })
                    .sum(),
            ),
            InitialData::Box { center, radius } => {
                let inside = x.iter().zip(center).all(|(a, c)| (a - c).abs() <= *radius);
                Some(if inside { (2.0 * radius).powi(-(x.len() as i32)) } else { 0.0 })
            }
            InitialData::Point { .. } => None,
        }
    }

    /// Laplacian of the density (Gaussian families only).
    pub fn laplacian(&self, x: &[f64]) -> Option<f64> {
        let InitialData::Gaussians(bumps) = self else { return None };
        let d = x.len() as f64;
        Some(
            bumps
                .iter()
                .map(|b| {
                    let r2: f64 = x.iter().zip(&b.center).map(|(a, c)| (a - c).powi(2)).sum();
                    let g = b.weight * (-0.5 * r2 / b.variance).exp()
                        / (2.0 * std::f64::consts::PI * b.variance).powf(0.5 * d);
                    g * (r2 / (b.variance * b.variance) - d / b.variance)
                })
                .sum(),
        )
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            InitialData::Gaussians(bumps) => {
                let u = open_unit(rng);
                let mut acc = 0.0;
                let mut chosen = &bumps[bumps.len() - 1];
                for b in bumps {
                    acc += b.weight;
                    if u < acc {
                        chosen = b;
                        break;
                    }
                }
                let n = Normal::new(0.0, chosen.variance.sqrt()).expect("positive variance");
                for (o, c) in out.iter_mut().zip(&chosen.center) {
                    *o = c + n.inverse_cdf(open_unit(rng));
                }
            }
            InitialData::Box { center, radius } => {
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + radius * (2.0 * open_unit(rng) - 1.0);
                }
            }
            InitialData::Point { at } => out.copy_from_slice(at),
        }
    }

    /// Raw moment `E[x^alpha]`.
    pub fn moment(&self, alpha: &[u32]) -> f64 {
        match self {
            InitialData::Gaussians(bumps) => bumps
                .iter()
                .map(|b| {
                    b.weight
                        * alpha
                            .iter()
                            .zip(&b.center)
                            .map(|(&a, &c)| gaussian_moment(a, c, b.variance))
                            .product::<f64>()
                })
                .sum(),
            InitialData::Box { center, radius } => alpha
                .iter()
                .zip(center)
                .map(|(&a, &c)| {
                    let (lo, hi) = (c - radius, c + radius);
                    let k = a as i32 + 1;
                    (hi.powi(k) - lo.powi(k)) / (k as f64 * (hi - lo))
                })
                .product(),
            InitialData::Point { at } => alpha.iter().zip(at).map(|(&a, &c)| c.powi(a as i32)).product(),
        }
    }

    /// Log moment generating function `log E[e^{x.xi}]`.
    pub fn cgf(&self, xi: &[f64]) -> f64 {
        match self {
            InitialData::Gaussians(bumps) => bumps
                .iter()
                .map(|b| {
                    let lin: f64 = xi.iter().zip(&b.center).map(|(x, c)| x * c).sum();
                    let q: f64 = xi.iter().map(|x| x * x).sum();
                    b.weight * (lin + 0.5 * b.variance * q).exp()
                })
                .sum::<f64>()
                .ln(),
            InitialData::Box { center, radius } => xi
                .iter()
                .zip(center)
                .map(|(&x, &c)| x * c + crate::kernels::sinhc_m1(x * radius).ln_1p())
                .sum(),
            InitialData::Point { at } => xi.iter().zip(at).map(|(x, c)| x * c).sum(),
        }
    }

    pub fn on_grid(&self, grid: Grid) -> Option<GridDensity> {
        self.density(&vec![0.0; grid.dim])?;
        Some(GridDensity::from_fn(grid, |x| self.density(x).unwrap_or(0.0)))
    }
}

fn gaussian_moment(n: u32, mean: f64, var: f64) -> f64 {
    let (mut a, mut b) = (1.0, mean);
    if n == 0 {
        return 1.0;
    }
    for k in 2..=n {
        let c = mean * b + (k as f64 - 1.0) * var * a;
        a = b;
        b = c;
    }
    b
}

impl FourierSource for InitialData {
    fn fourier(&self, xi: &[f64]) -> Complex64 {
        match self {
            InitialData::Gaussians(bumps) => bumps
                .iter()
                .map(|b| {
                    let lin: f64 = xi.iter().zip(&b.center).map(|(x, c)| x * c).sum();
                    let q: f64 = xi.iter().map(|x| x * x).sum();
                    b.weight * (-0.5 * b.variance * q).exp() * Complex64::from_polar(1.0, -lin)
                })
                .sum(),
            InitialData::Box { center, radius } => xi
                .iter()
                .zip(center)
                .map(|(&x, &c)| crate::kernels::sinc(x * radius) * Complex64::from_polar(1.0, -x * c))
                .product(),
            InitialData::Point { at } => Complex64::from_polar(1.0, -xi.iter().zip(at).map(|(x, c)| x * c).sum::<f64>()),
        }
    }
}
