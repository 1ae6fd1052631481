use nlfp::analysis::*;
use nlfp::fields::{Grid, WeightSpec};
use nlfp::initial::InitialData;
use nlfp::kernels::{kernel, Family};
use nlfp::spectral::{equilibrium_density, Equilibrium};

#[test]
fn linear_weight_certificates() {
    let grid = Grid::new(1, 10.0, 128).unwrap();
    for fam in Family::ALL {
        let k = kernel(fam, 1).unwrap();
        for eps in [1.0, 0.1] {
            let c = lyapunov_fit(&k, eps, &WeightSpec::Polynomial(1.0), &grid).unwrap();
            assert!(c.lambda >= 0.5, "{fam} eps={eps}");
            assert!(c.certifies(1e-6), "{fam} eps={eps} margin {}", c.margin);
        }
    }
}

#[test]
fn poisson_weight_beyond_bound_is_refused() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let grid = Grid::new(1, 10.0, 64).unwrap();
    let r = 6f64.sqrt();
    assert!(lyapunov_fit(&k, 0.5, &WeightSpec::Poisson(1.01 / (0.5 * r)), &grid).is_err());
    let g = kernel(Family::Gaussian, 1).unwrap();
    assert!(lyapunov_fit(&g, 0.5, &WeightSpec::Poisson(0.1), &grid).is_err());
}

#[test]
fn positivity_from_equilibrium_is_its_minimum() {
    let k = kernel(Family::Triangular, 1).unwrap();
    let grid = Grid::standard(1).unwrap();
    for eps in [1.0, 0.5] {
        let u0 = Equilibrium { kernel: &k, eps };
        let rep = positivity_probe(&k, &[eps], 1.0, 1.0, 1.0, &u0, &grid).unwrap();
        let f = equilibrium_density(&k, eps, &grid);
        let inside: Vec<usize> = (0..grid.len()).filter(|&i| grid.coord(i).abs() <= 1.0).collect();
        let min = inside.iter().map(|&i| f.values[i]).fold(f64::INFINITY, f64::min);
        let mass: f64 = inside.iter().map(|&i| f.values[i]).sum::<f64>() * grid.spacing();
        assert!(rep.alpha[0] > 0.0);
        assert!((rep.alpha[0] - min / mass).abs() < 1e-6, "eps={eps}: {} vs {}", rep.alpha[0], min / mass);
    }
}

#[test]
fn positivity_at_time_zero_off_support_is_zero() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let grid = Grid::standard(1).unwrap();
    let u0 = InitialData::boxed(&[3.0], 1.0);
    let rep = positivity_probe(&k, &[1.0, 0.5, 0.25], 0.0, 1.0, 4.0, &u0, &grid).unwrap();
    assert!(rep.alpha.iter().all(|&a| a == 0.0), "{:?}", rep.alpha);
    assert_eq!(rep.ratio(), 0.0);
    assert!(positivity_probe(&k, &[1.0], 0.0, 1.0, 1.0, &u0, &grid).is_err());
    assert!(positivity_probe(&k, &[], 1.0, 1.0, 1.0, &u0, &grid).is_err());
}

#[test]
fn decay_from_equilibrium_is_degenerate() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let grid = Grid::new(1, 12.0, 1024).unwrap();
    let u0 = Equilibrium { kernel: &k, eps: 1.0 };
    let times = [0.0, 0.5, 1.0, 2.0, 4.0];
    let fit = decay_rate_fit(&k, 1.0, &u0, &WeightSpec::Polynomial(2.0), &times, &grid).unwrap();
    assert!(fit.ordinates.iter().all(|&e| e <= 1e-8), "{:?}", fit.ordinates);
    assert!(fit.degenerate);
}

#[test]
fn decay_rate_survives_grid_doubling() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let u0 = InitialData::gaussian(&[2.0], 0.25);
    let w = WeightSpec::Polynomial(2.0);
    let times: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    let gamma = |n: usize| -decay_rate_fit(&k, 1.0, &u0, &w, &times, &Grid::new(1, 12.0, n).unwrap()).unwrap().slope;
    let (g1, g2) = (gamma(1024), gamma(2048));
    assert!(g1 > 0.0 && (g1 / g2 - 1.0).abs() < 0.1, "{g1} vs {g2}");
}

#[test]
fn local_limit_at_time_zero_is_degenerate() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let grid = Grid::new(1, 12.0, 1024).unwrap();
    let u0 = InitialData::gaussian(&[1.0], 0.5);
    let fit = local_limit_rate(&k, &u0, &[0.4, 0.2, 0.1], 0.0, &WeightSpec::Polynomial(2.0), &grid).unwrap();
    assert!(fit.degenerate, "{:?}", fit.ordinates);
}

#[test]
fn epsilon_lists_are_validated() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let grid = Grid::new(1, 12.0, 256).unwrap();
    let w = WeightSpec::Polynomial(2.0);
    assert!(equilibria_gap(&k, &[0.5], &w, &grid).is_err());
    assert!(equilibria_gap(&k, &[0.1, 0.2, 0.4], &w, &grid).is_err());
    assert!(equilibria_gap(&k, &[2.0, 0.5, 0.25], &w, &grid).is_err());
}

#[test]
fn gaussian_kernel_gap_without_weight() {
    let k = kernel(Family::Gaussian, 1).unwrap();
    let grid = Grid::standard(1).unwrap();
    let fit = equilibria_gap(&k, &[0.4, 0.2, 0.1, 0.05], &WeightSpec::Polynomial(0.0), &grid).unwrap();
    assert!((1.8..=2.3).contains(&fit.slope), "slope {}", fit.slope);
}

#[test]
fn consistency_residual_orders() {
    let grid = Grid::standard(1).unwrap();
    let g = InitialData::standard_gaussian(1);
    let w = WeightSpec::Polynomial(2.0);
    let epsilons = [0.4, 0.2, 0.1, 0.05];
    let res = |fam| -> Vec<f64> {
        let k = kernel(fam, 1).unwrap();
        epsilons.iter().map(|&e| consistency_residual(&k, e, &g, &w, &grid).unwrap()).collect()
    };
    let sym = res(Family::Uniform);
    let r2: Vec<f64> = sym.iter().zip(&epsilons).map(|(r, e)| r / (e * e)).collect();
    let spread = r2.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / r2.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.2, "{r2:?}");
    let skew = res(Family::SkewStep);
    let r1: Vec<f64> = skew.iter().zip(&epsilons).map(|(r, e)| r / e).collect();
    let spread = r1.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / r1.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.2, "{r1:?}");
    let r2: Vec<f64> = skew.iter().zip(&epsilons).map(|(r, e)| r / (e * e)).collect();
    assert!(r2.windows(2).all(|p| p[1] > 1.5 * p[0]), "{r2:?}");
    assert!(consistency_residual(&kernel(Family::Uniform, 1).unwrap(), 0.1, &InitialData::boxed(&[0.0], 1.0), &w, &grid).is_err());
}

#[test]
fn cubics_are_left_invariant() {
    let window = 10.0;
    let v = |x: &[f64]| if x[0].abs() <= window { 1.0 - 2.0 * x[0] + 0.5 * x[0] * x[0] + 0.25 * x[0].powi(3) } else { 0.0 };
    let lap = |x: &[f64]| if x[0].abs() <= window { 1.0 + 1.5 * x[0] } else { 0.0 };
    let interior = Grid::new(1, 5.0, 256).unwrap();
    for fam in [Family::Uniform, Family::Triangular] {
        let k = kernel(fam, 1).unwrap();
        for eps in [1.0, 0.5, 0.1] {
            let r = consistency_residual_fn(&k, eps, v, lap, &WeightSpec::Polynomial(0.0), &interior).unwrap();
            assert!(r < 1e-9, "{fam} eps={eps}: {r:e}");
        }
    }
}

#[test]
fn tail_probe_examples() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let standard = Grid::standard(1).unwrap();
    let mass = tail_probe(&k, 1.0, 0.0, &standard).unwrap();
    assert!((mass.integral - 1.0).abs() < 1e-8, "{}", mass.integral);

    let wide = Grid::new(1, 24.0, 8192).unwrap();
    let rep = tail_probe(&k, 1.0, 1.0 / 6f64.sqrt(), &wide).unwrap();
    assert!(rep.finite && !rep.inconclusive, "ratio {} shells {:?}", rep.decay_ratio, rep.shells);
    assert!(rep.integral.is_finite() && rep.integral > 1.0);
    assert!(rep.resolved_radius > 11.0);

    let g = InitialData::standard_gaussian(1).on_grid(standard).unwrap();
    for a in [0.2, 1.0 / 6f64.sqrt()] {
        let rep = tail_probe_density(&k, 1.0, a, &g).unwrap();
        assert!(rep.finite, "a={a} ratio {}", rep.decay_ratio);
    }
    assert!(tail_probe(&k, 1.0, 1.0, &standard).is_err());
    assert!(tail_probe(&kernel(Family::Gaussian, 1).unwrap(), 1.0, 0.1, &standard).is_err());
}

#[test]
fn gaussian_kernel_decay_is_reported() {
    let k = kernel(Family::Gaussian, 1).unwrap();
    let fit = fourier_decay_exponent(&k, 1.0, 20.0, 200.0, 12).unwrap();
    assert!(fit.slope.is_finite() && fit.slope < 0.0);
}
