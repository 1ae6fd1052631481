//! Catalog of jump kernels normalized to unit mass, zero mean and
//! covariance `2 I`, with scaled variants `J_eps(x) = eps^-d J(x / eps)`.
//!
//! Every family is a product of identical one-dimensional profiles, so
//! moments, transforms and sampling factor over coordinates.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{param_err, Error, Result};
use crate::quad::piecewise_points;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Uniform,
    Triangular,
    Gaussian,
    SkewStep,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Family::Uniform),
            "triangular" => Ok(Family::Triangular),
            "gaussian" => Ok(Family::Gaussian),
            "skew_step" => Ok(Family::SkewStep),
            other => Err(Error::UnknownKernel(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Triangular => "triangular",
            Family::Gaussian => "gaussian",
            Family::SkewStep => "skew_step",
        }
    }

    pub const ALL: [Family; 4] = [Family::Uniform, Family::Triangular, Family::Gaussian, Family::SkewStep];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constant density on `[lo, hi]` carrying probability `mass`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl Rect {
    fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
    fn half(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
    fn height(&self) -> f64 {
        self.mass / (self.hi - self.lo)
    }
    fn moment(&self, k: u32) -> f64 {
        let k1 = k as i32 + 1;
        self.height() * (self.hi.powi(k1) - self.lo.powi(k1)) / k1 as f64
    }
    fn abs_moment(&self, p: f64) -> f64 {
        // pieces never straddle the origin
        let (a, b) = (self.lo.abs().min(self.hi.abs()), self.lo.abs().max(self.hi.abs()));
        self.height() * (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
    }
}

/// One-dimensional profile of a product kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Uniform { half_width: f64 },
    Triangular { half_width: f64 },
    Gaussian { std: f64 },
    Steps { rects: Vec<Rect> },
}

impl Profile {
    pub fn density(&self, x: f64) -> f64 {
        match self {
            Profile::Uniform { half_width: a } => {
                if x.abs() <= *a {
                    0.5 / a
                } else {
                    0.0
                }
            }
            Profile::Triangular { half_width: b } => ((b - x.abs()) / (b * b)).max(0.0),
            Profile::Gaussian { std } => {
                (-0.5 * (x / std).powi(2)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            Profile::Steps { rects } => rects
                .iter()
                .filter(|r| x >= r.lo && x < r.hi)
                .map(Rect::height)
                .sum(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Profile::Uniform { half_width: a } => ((x + a) / (2.0 * a)).clamp(0.0, 1.0),
            Profile::Triangular { half_width: b } => {
                if x <= -b {
                    0.0
                } else if x >= *b {
                    1.0
                } else if x < 0.0 {
                    0.5 * ((b + x) / b).powi(2)
                } else {
                    1.0 - 0.5 * ((b - x) / b).powi(2)
                }
            }
            Profile::Gaussian { std } => 0.5 * erfc(-x / (std * SQRT2)),
            Profile::Steps { rects } => rects
                .iter()
                .map(|r| r.mass * ((x - r.lo) / (r.hi - r.lo)).clamp(0.0, 1.0))
                .sum(),
        }
    }

    /// Inverse CDF for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Profile::Uniform { half_width: a } => a * (2.0 * u - 1.0),
            Profile::Triangular { half_width: b } => {
                if u < 0.5 {
                    -b + b * (2.0 * u).sqrt()
                } else {
                    b - b * (2.0 * (1.0 - u)).sqrt()
                }
            }
            Profile::Gaussian { std } => {
                let x = Normal::new(0.0, *std).expect("positive std").inverse_cdf(u);
                // one Newton step polishes the library inverse to full precision
                let d = self.density(x);
                if d > 0.0 {
                    x - (self.cdf(x) - u) / d
                } else {
                    x
                }
            }
            Profile::Steps { rects } => {
                let mut acc = 0.0;
                for r in rects {
                    if u <= acc + r.mass {
                        return r.lo + (u - acc) / r.mass * (r.hi - r.lo);
                    }
                    acc += r.mass;
                }
                rects.last().map_or(0.0, |r| r.hi)
            }
        }
    }

    pub fn fourier(&self, xi: f64) -> Complex64 {
        Complex64::new(1.0, 0.0) + self.fourier_minus_one(xi)
    }

    /// `f_hat(xi) - 1`, free of cancellation near the origin.
    pub fn fourier_minus_one(&self, xi: f64) -> Complex64 {
        match self {
            Profile::Uniform { half_width: a } => Complex64::new(sinc_m1(a * xi), 0.0),
            Profile::Triangular { half_width: b } => {
                let s = sinc_m1(0.5 * b * xi);
                Complex64::new(s * (2.0 + s), 0.0)
            }
            Profile::Gaussian { std } => Complex64::new((-0.5 * (std * xi).powi(2)).exp_m1(), 0.0),
            Profile::Steps { rects } => rects
                .iter()
                .map(|r| {
                    let th = xi * r.center();
                    let s = (0.5 * th).sin();
                    let phase_m1 = Complex64::new(-2.0 * s * s, -th.sin());
                    let sc = sinc_m1(xi * r.half());
                    r.mass * (phase_m1 * (1.0 + sc) + sc)
                })
                .sum(),
        }
    }

    pub fn mgf(&self, xi: f64) -> f64 {
        1.0 + self.mgf_minus_one(xi)
    }

    pub fn mgf_minus_one(&self, xi: f64) -> f64 {
        match self {
            Profile::Uniform { half_width: a } => sinhc_m1(a * xi),
            Profile::Triangular { half_width: b } => {
                let s = sinhc_m1(0.5 * b * xi);
                s * (2.0 + s)
            }
            Profile::Gaussian { std } => (0.5 * (std * xi).powi(2)).exp_m1(),
            Profile::Steps { rects } => rects
                .iter()
                .map(|r| {
                    let sc = sinhc_m1(xi * r.half());
                    r.mass * ((xi * r.center()).exp_m1() * (1.0 + sc) + sc)
                })
                .sum(),
        }
    }

    pub fn moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let odd = k % 2 == 1;
        match self {
            Profile::Uniform { half_width: a } => {
                if odd {
                    0.0
                } else {
                    a.powi(k as i32) / (k as f64 + 1.0)
                }
            }
            Profile::Triangular { half_width: b } => {
                if odd {
                    0.0
                } else {
                    2.0 * b.powi(k as i32) / ((k as f64 + 1.0) * (k as f64 + 2.0))
                }
            }
            Profile::Gaussian { std } => {
                if odd {
                    0.0
                } else {
                    let df: f64 = (1..k).step_by(2).map(|j| j as f64).product();
                    std.powi(k as i32) * df
                }
            }
            Profile::Steps { rects } => rects.iter().map(|r| r.moment(k)).sum(),
        }
    }

    /// `E|x|^p`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self {
            Profile::Uniform { half_width: a } => a.powf(p) / (p + 1.0),
            Profile::Triangular { half_width: b } => 2.0 * b.powf(p) / ((p + 1.0) * (p + 2.0)),
            Profile::Gaussian { std } => {
                std.powf(p) * 2f64.powf(0.5 * p) * gamma(0.5 * (p + 1.0)) / std::f64::consts::PI.sqrt()
            }
            Profile::Steps { rects } => rects.iter().map(|r| r.abs_moment(p)).sum(),
        }
    }

    /// Support endpoints, `None` when unbounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Profile::Uniform { half_width: a } => Some((-a, *a)),
            Profile::Triangular { half_width: b } => Some((-b, *b)),
            Profile::Gaussian { .. } => None,
            Profile::Steps { rects } => {
                let lo = rects.iter().map(|r| r.lo).fold(f64::INFINITY, f64::min);
                let hi = rects.iter().map(|r| r.hi).fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
        }
    }

    /// Points where the density or one of its derivatives jumps, plus the
    /// truncation interval used for quadrature of unbounded profiles.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::Uniform { half_width: a } => vec![-a, 0.0, *a],
            Profile::Triangular { half_width: b } => vec![-b, 0.0, *b],
            Profile::Gaussian { std } => {
                let l = 13.0 * std;
                (0..=26).map(|k| -l + k as f64 * l / 13.0).collect()
            }
            Profile::Steps { rects } => {
                let mut v: Vec<f64> = rects.iter().flat_map(|r| [r.lo, r.hi]).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }

    /// Upper bound on `sup_{|xi| >= r} |f_hat(xi)|`.
    pub fn fourier_tail_bound(&self, r: f64) -> f64 {
        let r = r.abs();
        let bound = match self {
            Profile::Uniform { half_width: a } => 1.0 / (a * r),
            Profile::Triangular { half_width: b } => 4.0 / (b * r).powi(2),
            Profile::Gaussian { std } => (-0.5 * (std * r).powi(2)).exp(),
            Profile::Steps { rects } => rects.iter().map(|r0| r0.mass / (r0.half() * r)).sum(),
        };
        bound.min(1.0)
    }

    /// Length scale controlling oscillation of the transform.
    pub fn frequency_scale(&self) -> f64 {
        match self {
            Profile::Uniform { half_width: a } => *a,
            Profile::Triangular { half_width: b } => *b,
            Profile::Gaussian { std } => *std,
            Profile::Steps { rects } => rects.iter().map(|r| r.lo.abs().max(r.hi.abs())).fold(0.0, f64::max),
        }
    }

    /// Same profile with the variable scaled by `c`: law of `c X`.
    pub fn scaled(&self, c: f64) -> Profile {
        match self {
            Profile::Uniform { half_width } => Profile::Uniform { half_width: half_width * c },
            Profile::Triangular { half_width } => Profile::Triangular { half_width: half_width * c },
            Profile::Gaussian { std } => Profile::Gaussian { std: std * c },
            Profile::Steps { rects } => Profile::Steps {
                rects: rects.iter().map(|r| Rect { lo: r.lo * c, hi: r.hi * c, mass: r.mass }).collect(),
            },
        }
    }

    pub fn symmetric(&self) -> bool {
        !matches!(self, Profile::Steps { .. })
    }
}

/// `sin(z)/z - 1`.
pub fn sinc_m1(z: f64) -> f64 {
    let z2 = z * z;
    if z2 < 1e-2 {
        -z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0 * (1.0 - z2 / 110.0))))
    } else {
        z.sin() / z - 1.0
    }
}

pub fn sinc(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.sin() / z
    }
}

/// `sinh(z)/z - 1`.
pub fn sinhc_m1(z: f64) -> f64 {
    let z2 = z * z;
    if z2 < 1e-2 {
        z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0 * (1.0 + z2 / 72.0 * (1.0 + z2 / 110.0))))
    } else {
        z.sinh() / z - 1.0
    }
}

/// Uniform draw in the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Jump kernel on `R^d` with unit mass, zero mean and covariance `2 I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: Family,
    pub dim: usize,
    pub profile: Profile,
    /// Exponent `s` of the declared finite moment `rho_{2+s}`.
    pub s: f64,
    rho: f64,
}

/// Build a catalog kernel.
///
/// Recognized parameters: `half_width` (uniform, triangular), `variance`
/// (gaussian), `ratio` (skew_step, right/left width ratio, default 2).
pub fn make_kernel(name: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<KernelSpec> {
    let family = Family::parse(name)?;
    if !(1..=3).contains(&dim) {
        return Err(Error::Dimension { dim, what: "kernels" });
    }
    let allowed: &[&str] = match family {
        Family::Uniform | Family::Triangular => &["half_width"],
        Family::Gaussian => &["variance"],
        Family::SkewStep => &["ratio"],
    };
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(param_err(key, format!("not a parameter of `{}`", family)));
        }
    }
    let width_check = |key: &str, canonical: f64| -> Result<f64> {
        match params.get(key) {
            None => Ok(canonical),
            Some(&w) if !(w.is_finite() && w > 0.0) => {
                Err(Error::Normalization(format!("`{key}` = {w} gives zero mass width")))
            }
            Some(&w) if ((w - canonical) / canonical).abs() > 1e-12 => Err(Error::Normalization(format!(
                "`{key}` = {w} gives second moment {:.6} instead of 2",
                2.0 * (w / canonical).powi(2)
            ))),
            Some(_) => Ok(canonical),
        }
    };
    let profile = match family {
        Family::Uniform => Profile::Uniform { half_width: width_check("half_width", 6f64.sqrt())? },
        Family::Triangular => Profile::Triangular { half_width: width_check("half_width", 12f64.sqrt())? },
        Family::Gaussian => Profile::Gaussian { std: width_check("variance", 2.0)?.sqrt() },
        Family::SkewStep => skew_step_profile(params.get("ratio").copied().unwrap_or(2.0))?,
    };
    KernelSpec::from_profile(family, dim, profile)
}

/// Shorthand for a catalog kernel with default parameters.
pub fn kernel(family: Family, dim: usize) -> Result<KernelSpec> {
    make_kernel(family.name(), dim, &BTreeMap::new())
}

fn skew_step_profile(ratio: f64) -> Result<Profile> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Normalization(format!("`ratio` = {ratio} gives a zero-width rectangle")));
    }
    if (ratio - 1.0).abs() < 1e-9 {
        return Err(Error::Normalization("`ratio` = 1 makes the third moment vanish".into()));
    }
    // rectangles [-1, 0] and [0, ratio] with masses (p, q):
    // p + q = 1 and -p/2 + q*ratio/2 = 0
    let (l0, r0) = (1.0, ratio);
    let det = 0.5 * r0 + 0.5 * l0;
    let p = 0.5 * r0 / det;
    let q = 0.5 * l0 / det;
    let m2 = p * l0 * l0 / 3.0 + q * r0 * r0 / 3.0;
    let c = (2.0 / m2).sqrt();
    Ok(Profile::Steps {
        rects: vec![Rect { lo: -c * l0, hi: 0.0, mass: p }, Rect { lo: 0.0, hi: c * r0, mass: q }],
    })
}

impl KernelSpec {
    pub fn from_profile(family: Family, dim: usize, profile: Profile) -> Result<Self> {
        let m0 = profile.moment(0);
        let m1 = profile.moment(1);
        let m2 = profile.moment(2);
        if (m0 - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization(format!("total mass {m0} instead of 1")));
        }
        if m1.abs() > 1e-12 {
            return Err(Error::Normalization(format!("mean {m1} instead of 0")));
        }
        if (m2 - 2.0).abs() > 1e-12 {
            return Err(Error::Normalization(format!("second moment {m2} instead of 2")));
        }
        let mut k = KernelSpec { family, dim, profile, s: 1.0, rho: 0.0 };
        k.rho = if dim == 1 {
            k.profile.abs_moment(3.0)
        } else {
            k.expect(|x| x.iter().map(|v| v * v).sum::<f64>().powf(1.5))
        };
        Ok(k)
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.profile.density(v)).product()
    }

    /// Density of `J_eps`.
    pub fn density_eps(&self, x: &[f64], eps: f64) -> f64 {
        x.iter().map(|&v| self.profile.density(v / eps) / eps).product()
    }

    pub fn fourier(&self, xi: &[f64]) -> Complex64 {
        xi.iter().map(|&v| self.profile.fourier(v)).product()
    }

    /// `J_hat(xi) - 1` computed as a telescoping sum of per-coordinate factors.
    pub fn fourier_minus_one(&self, xi: &[f64]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        let mut prefix = Complex64::new(1.0, 0.0);
        for &v in xi {
            let z = self.profile.fourier_minus_one(v);
            total += z * prefix;
            prefix *= 1.0 + z;
        }
        total
    }

    pub fn mgf(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|&v| self.profile.mgf(v)).product()
    }

    pub fn mgf_minus_one(&self, xi: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut prefix = 1.0;
        for &v in xi {
            let z = self.profile.mgf_minus_one(v);
            total += z * prefix;
            prefix *= 1.0 + z;
        }
        total
    }

    /// `m_alpha(J_eps) = eps^|alpha| m_alpha(J)`.
    pub fn moment(&self, alpha: &[u32], eps: f64) -> f64 {
        assert_eq!(alpha.len(), self.dim, "multi-index length must equal the dimension");
        let order: u32 = alpha.iter().sum();
        eps.powi(order as i32) * alpha.iter().map(|&a| self.profile.moment(a)).product::<f64>()
    }

    /// Draw one point of `J` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.profile.quantile(open_unit(rng));
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }

    /// Euclidean support radius, `None` when unbounded.
    pub fn support_radius(&self) -> Option<f64> {
        self.profile
            .support()
            .map(|(lo, hi)| lo.abs().max(hi.abs()) * (self.dim as f64).sqrt())
    }

    /// Support radius, or `8 std sqrt(d)` for the Gaussian (tail mass below
    /// `1e-14`).
    pub fn effective_radius(&self) -> f64 {
        match (&self.profile, self.support_radius()) {
            (_, Some(r)) => r,
            (Profile::Gaussian { std }, None) => 8.0 * std * (self.dim as f64).sqrt(),
            _ => f64::INFINITY,
        }
    }

    pub fn symmetric(&self) -> bool {
        self.profile.symmetric()
    }

    /// `(rho_{2+s}, s)`.
    pub fn rho_2s(&self) -> (f64, f64) {
        (self.rho, self.s)
    }

    /// Largest rate with a finite exponential moment; every catalog family
    /// has all exponential moments.
    pub fn exp_rate(&self) -> f64 {
        f64::INFINITY
    }

    pub fn fourier_tail_bound(&self, r: f64) -> f64 {
        self.profile.fourier_tail_bound(r / (self.dim as f64).sqrt())
    }

    /// Tensor quadrature of `E[g(Z)]`, `Z ~ J`.
    pub fn expect<G: Fn(&[f64]) -> f64>(&self, g: G) -> f64 {
        self.expect_with_panels(4, g)
    }

    pub fn expect_with_panels<G: Fn(&[f64]) -> f64>(&self, panels: usize, g: G) -> f64 {
        let pts: Vec<(f64, f64)> = piecewise_points(&self.profile.breakpoints(), panels)
            .into_iter()
            .map(|(z, w)| (z, w * self.profile.density(z)))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        tensor_sum(&pts, self.dim, &g)
    }

    /// `(J_eps * f)(x) = E[f(x - eps Z)]` by tensor quadrature.
    pub fn smooth<G: Fn(&[f64]) -> f64>(&self, x: &[f64], eps: f64, panels: usize, f: G) -> f64 {
        let d = x.len();
        self.expect_with_panels(panels, |z| {
            let mut y = [0.0; 3];
            for i in 0..d {
                y[i] = x[i] - eps * z[i];
            }
            f(&y[..d])
        })
    }
}

fn tensor_sum<G: Fn(&[f64]) -> f64>(pts: &[(f64, f64)], dim: usize, g: &G) -> f64 {
    let mut z = [0.0; 3];
    nested_sum(pts, dim, 0, &mut z, g)
}

// Axis-by-axis summation keeps the rounding error at the level of a
// one-dimensional rule.
fn nested_sum<G: Fn(&[f64]) -> f64>(pts: &[(f64, f64)], dim: usize, axis: usize, z: &mut [f64; 3], g: &G) -> f64 {
    let mut total = 0.0;
    for &(x, w) in pts {
        z[axis] = x;
        let inner = if axis + 1 == dim { g(&z[..dim]) } else { nested_sum(pts, dim, axis + 1, z, g) };
        total += w * inner;
    }
    total
}
