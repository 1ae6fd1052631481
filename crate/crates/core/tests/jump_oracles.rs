use nlfp::cumulants::batch_standard_error;
use nlfp::fields::{dilate_semigroup, Grid};
use nlfp::initial::InitialData;
use nlfp::jump::*;
use nlfp::kernels::{kernel, Family};
use nlfp::spectral::nlfp_density;

#[test]
fn wild_sum_mass_is_truncated_poisson() {
    let grid = Grid::new(1, 12.0, 1024).unwrap();
    let u0 = InitialData::gaussian(&[1.0], 0.5).on_grid(grid).unwrap();
    let k = kernel(Family::Triangular, 1).unwrap();
    for (eps, t) in [(1.0, 0.5), (0.5, 1.0)] {
        let lam: f64 = t / (eps * eps);
        let mut term = (-lam).exp();
        let mut partial = 0.0;
        for n in 0..=8 {
            partial += term;
            term *= lam / (n + 1) as f64;
            let w = wild_sum_truncated(&u0, &k, eps, t, n, 32).unwrap();
            assert!((w.density.mass() - partial * u0.mass()).abs() < 1e-10, "eps={eps} n={n}");
            assert!((w.missing_mass - (1.0 - partial)).abs() < 1e-10);
        }
    }
}

#[test]
fn wild_sum_zero_terms_is_dilation() {
    let grid = Grid::new(1, 12.0, 512).unwrap();
    let u0 = InitialData::boxed(&[0.5], 1.0).on_grid(grid).unwrap();
    let k = kernel(Family::SkewStep, 1).unwrap();
    for t in [0.1, 0.7, 2.0] {
        let w = wild_sum_truncated(&u0, &k, 1.0, t, 0, 4).unwrap();
        assert_eq!(w.density, dilate_semigroup(&u0, t, 1.0));
    }
}

#[test]
fn wild_sum_and_picard_match_spectral() {
    let grid = Grid::new(1, 12.0, 1024).unwrap();
    let data = InitialData::gaussian(&[1.0], 0.5);
    let u0 = data.on_grid(grid).unwrap();
    let k = kernel(Family::Uniform, 1).unwrap();
    let reference = nlfp_density(&k, 1.0, &data, &grid, 0.5);

    let wild = wild_sum_truncated(&u0, &k, 1.0, 0.5, 8, 16).unwrap();
    let l1 = wild.density.l1_distance(&reference).unwrap();
    assert!(l1 < 1e-4, "wild sum L1 {l1:e}");

    let picard = duhamel_picard(&u0, &k, 1.0, 0.5, 1.0 / 256.0, 12).unwrap();
    let l1 = picard.density.l1_distance(&reference).unwrap();
    assert!(l1 < 5e-3, "picard L1 {l1:e}");
    let inc = &picard.increments;
    assert_eq!(inc.len(), 12);
    let mut envelope = 1.0;
    for (n, d) in inc.iter().enumerate() {
        envelope *= 0.5 / (n + 1) as f64;
        assert!(*d <= 2.0 * envelope + 1e-12, "increment {n}: {d:e} above {envelope:e}");
    }
    assert!(inc.windows(2).all(|p| p[1] <= p[0] || p[1] < 1e-14));
}

#[test]
fn mean_from_point_mass_relaxes() {
    let k = kernel(Family::SkewStep, 1).unwrap();
    let t = 1.0;
    let e = simulate(&k, 0.5, &InitialData::point(&[3.0]), t, 200_000, 11).unwrap();
    let (mean, se) = batch_standard_error(&e, 0, 1, 100).unwrap();
    assert!((mean - 3.0 * (-t as f64).exp()).abs() < 4.0 * se, "{mean} +- {se}");
}

#[test]
fn variance_reaches_one() {
    for d in [1, 2] {
        let k = kernel(Family::Uniform, d).unwrap();
        let u0 = InitialData::boxed(&vec![1.0; d], 2.0);
        let e = simulate(&k, 0.5, &u0, 10.0, 100_000, 5).unwrap();
        for axis in 0..d {
            let (var, se) = batch_standard_error(&e, axis, 2, 100).unwrap();
            let exact = 1.0 + (4.0 / 3.0 - 1.0) * (-20.0f64).exp();
            assert!((var - exact).abs() < 4.0 * se, "d={d} axis={axis}: {var} +- {se}");
        }
    }
}

#[test]
fn histogram_of_gaussian_draws() {
    let grid = Grid::new(1, 8.0, 128).unwrap();
    let k = kernel(Family::Gaussian, 1).unwrap();
    let g = InitialData::standard_gaussian(1);
    let e = simulate(&k, 1.0, &g, 0.0, 1_000_000, 3).unwrap();
    let hist = empirical_density(&e, &grid).unwrap();
    assert!(hist.mass() <= 1.0 + 1e-12);
    let l1 = hist.l1_distance(&g.on_grid(grid).unwrap()).unwrap();
    assert!(l1 < 0.01, "L1 {l1}");
}

#[test]
fn ensembles_are_reproducible() {
    let k = kernel(Family::Triangular, 2).unwrap();
    let u0 = InitialData::gaussian(&[0.5, -0.5], 1.0);
    let a = simulate(&k, 0.7, &u0, 1.5, 5_000, 99).unwrap();
    let b = simulate(&k, 0.7, &u0, 1.5, 5_000, 99).unwrap();
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(a.seed, SeedRecord { master: 99, first_stream: 0, streams: 5_000 });
    let c = simulate(&k, 0.7, &u0, 1.5, 5_000, 100).unwrap();
    assert_ne!(a.positions, c.positions);
    assert!(a.positions.iter().all(|v| v.is_finite()));
}

#[test]
fn empty_ensemble_has_no_mass() {
    let k = kernel(Family::Uniform, 1).unwrap();
    let e = simulate(&k, 1.0, &InitialData::standard_gaussian(1), 1.0, 0, 1);
    if let Ok(e) = e {
        let h = empirical_density(&e, &Grid::new(1, 4.0, 64).unwrap()).unwrap();
        assert_eq!(h.mass(), 0.0);
    }
}
