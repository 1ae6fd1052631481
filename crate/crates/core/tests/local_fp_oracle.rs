use nlfp::fields::Grid;
use nlfp::initial::InitialData;
use nlfp::spectral::local_fp_density;

fn gaussian(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Explicit Euler on the conservative flux form of `u_t = u_xx + (x u)_x`
/// with zero flux at the ends.
fn finite_difference(x: &[f64], mut u: Vec<f64>, t0: f64, t1: f64) -> Vec<f64> {
    let h = x[1] - x[0];
    let steps = ((t1 - t0) / (0.2 * h * h)).ceil() as usize;
    let dt = (t1 - t0) / steps as f64;
    let n = x.len();
    let mut flux = vec![0.0; n + 1];
    for _ in 0..steps {
        for i in 1..n {
            let mid = 0.5 * (x[i - 1] + x[i]);
            flux[i] = (u[i] - u[i - 1]) / h + mid * 0.5 * (u[i] + u[i - 1]);
        }
        for i in 0..n {
            u[i] += dt * (flux[i + 1] - flux[i]) / h;
        }
    }
    u
}

#[test]
fn point_mass_matches_finite_differences() {
    let grid = Grid::new(1, 10.0, 1024).unwrap();
    let x = grid.coords();
    let t0: f64 = 0.05;
    let start: Vec<f64> = x.iter().map(|&v| gaussian(v, 0.0, -(-2.0 * t0).exp_m1())).collect();
    let fd = finite_difference(&x, start, t0, 1.0);
    let spectral = local_fp_density(&InitialData::point(&[0.0]), &grid, 1.0);
    let l1: f64 = fd.iter().zip(&spectral.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.spacing();
    assert!(l1 < 1e-3, "L1 {l1:e}");
    let var = -(-2.0f64).exp_m1();
    let exact = x.iter().zip(&spectral.values).map(|(&v, s)| (s - gaussian(v, 0.0, var)).abs()).fold(0.0, f64::max);
    assert!(exact < 1e-12, "{exact:e}");
}

#[test]
fn shifted_gaussian_relaxes_along_ornstein_uhlenbeck_moments() {
    let grid = Grid::new(1, 12.0, 1024).unwrap();
    let x = grid.coords();
    let u0 = InitialData::gaussian(&[2.0], 0.25);
    for t in [0.3, 1.0, 3.0] {
        let decay = (-t as f64).exp();
        let var = 0.25 * decay * decay + 1.0 - decay * decay;
        let u = local_fp_density(&u0, &grid, t);
        let err = x.iter().zip(&u.values).map(|(&v, s)| (s - gaussian(v, 2.0 * decay, var)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "t={t}: {err:e}");
    }
    let x = grid.coords();
    let start: Vec<f64> = x.iter().map(|&v| gaussian(v, 2.0, 0.25)).collect();
    let fd = finite_difference(&x, start, 0.0, 1.0);
    let u = local_fp_density(&u0, &grid, 1.0);
    let l1: f64 = fd.iter().zip(&u.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.spacing();
    assert!(l1 < 1e-3, "L1 {l1:e}");
}
