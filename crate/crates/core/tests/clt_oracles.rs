use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlfp::clt::*;
use nlfp::fields::Grid;
use nlfp::kernels::{kernel, Family};

/// Density of the sum of four independent U(0, 1) variables.
fn irwin_hall_4(s: f64) -> f64 {
    let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
    let sum: f64 = (0..=4)
        .map(|k| {
            let v = (s - k as f64).max(0.0);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom[k] * v.powi(3)
        })
        .sum();
    sum / 6.0
}

#[test]
fn single_factor_is_identity() {
    let grid = Grid::new(1, 8.0, 1024).unwrap();
    for fam in Family::ALL {
        let f = CLTDensity::from_kernel(&kernel(fam, 1).unwrap());
        let u = rescaled_convolution(&f, &[1.0], &grid).unwrap();
        let err = (0..grid.len()).map(|i| (u.values[i] - f.density(&[grid.coord(i)])).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{fam}: {err:e}");
    }
}

#[test]
fn gaussian_is_stable_under_any_scales() {
    let grid = Grid::new(1, 12.0, 1024).unwrap();
    let f = CLTDensity::standard_gaussian(1);
    for sigmas in [vec![1.0, 1.0], vec![0.5, 2.0, 1.3], SigmaRule::default().sigmas(40)] {
        let u = rescaled_convolution(&f, &sigmas, &grid).unwrap();
        let err = (0..grid.len()).map(|i| (u.values[i] - gaussian_density(&[grid.coord(i)])).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{sigmas:?}: {err:e}");
    }
}

#[test]
fn four_uniforms_match_irwin_hall() {
    let grid = Grid::standard(1).unwrap();
    let u = rescaled_convolution(&CLTDensity::uniform(1), &[1.0; 4], &grid).unwrap();
    let r3 = 3f64.sqrt();
    let err = (0..grid.len())
        .map(|i| (u.values[i] - irwin_hall_4(2.0 + grid.coord(i) / r3) / r3).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn convolutions_keep_unit_moments() {
    let rules = [vec![1.0, 2.0], vec![1.0; 5], SigmaRule::default().sigmas(24)];
    let grid1 = Grid::new(1, 12.0, 2048).unwrap();
    let grid2 = Grid::new(2, 12.0, 256).unwrap();
    for fam in Family::ALL {
        for (d, grid) in [(1, grid1), (2, grid2)] {
            let f = CLTDensity::from_kernel(&kernel(fam, d).unwrap());
            for sigmas in rules.iter().filter(|s| d == 1 || s.len() > 2) {
                let u = rescaled_convolution(&f, sigmas, &grid).unwrap_or_else(|e| panic!("{fam} d={d} n={}: {e}", sigmas.len()));
                let h = grid.cell_volume();
                let mut m = [0.0; 6];
                for (i, v) in u.values.iter().enumerate() {
                    let p = grid.point(i);
                    for (slot, g) in m.iter_mut().zip([1.0, p[0], p[1], p[0] * p[0], p[1] * p[1], p[0] * p[1]]) {
                        *slot += h * v * g;
                    }
                }
                let want: [f64; 6] = if d == 1 { [1.0, 0.0, 0.0, 1.0, 0.0, 0.0] } else { [1.0, 0.0, 0.0, 1.0, 1.0, 0.0] };
                for (got, w) in m.iter().zip(want) {
                    assert!((got - w).abs() < 1e-6, "{fam} d={d} n={}: {m:?}", sigmas.len());
                }
            }
        }
    }
}

#[test]
fn wrap_around_is_refused() {
    let grid = Grid::new(1, 2.0, 256).unwrap();
    assert!(rescaled_convolution(&CLTDensity::standard_gaussian(1), &[1.0, 1.0], &grid).is_err());
}

#[test]
fn berry_esseen_rates_for_both_scale_rules() {
    let grid = Grid::standard(1).unwrap();
    let ns = [8, 16, 32, 64, 128];
    let f = CLTDensity::uniform(1);
    for rule in [SigmaRule::Constant(1.0), SigmaRule::default()] {
        let rep = be_rate_experiment(&f, rule, &ns, &grid).unwrap();
        let fit = rep.fit.as_ref().unwrap();
        assert!(fit.slope <= -0.45, "{rule:?}: slope {}", fit.slope);
        assert!(rep.non_monotone.is_empty(), "{rule:?}: {:?}", rep.non_monotone);
    }
    let rep = be_rate_experiment(&CLTDensity::standard_gaussian(1), SigmaRule::default(), &ns, &grid).unwrap();
    assert!(rep.sup_distance.iter().all(|&s| s < 1e-9));
    assert!(rep.degenerate());
}

#[test]
fn kappa_is_nonincreasing() {
    let cases = [
        CLTDensity::uniform(1),
        CLTDensity::from_kernel(&kernel(Family::Triangular, 1).unwrap()),
        CLTDensity::from_kernel(&kernel(Family::SkewStep, 1).unwrap()),
        CLTDensity::uniform(2),
    ];
    for f in &cases {
        let kappas: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|&d| charfn_bounds(f, d).unwrap().kappa).collect();
        assert!(kappas.windows(2).all(|p| p[1] <= p[0]), "{} d={}: {kappas:?}", f.family, f.dim);
        assert!(kappas.iter().all(|&k| k > 0.0 && k < 1.0));
    }
    let g = charfn_bounds(&CLTDensity::standard_gaussian(1), 1.0).unwrap();
    assert!(g.delta_star.is_infinite() && (g.kappa - (-0.5f64).exp()).abs() < 1e-12);
    let u = charfn_bounds(&CLTDensity::uniform(1), 1.0).unwrap();
    assert!(u.delta_star > 0.0 && u.delta_star.is_finite());
}

#[test]
fn poisson_sums_match_exact_rationals() {
    for m in 1..=20u64 {
        let mm = BigInt::from(m);
        let mut term = BigRational::one();
        for n in 1..=m {
            term = term * BigRational::new(mm.clone(), BigInt::from(n));
        }
        let mut sum = BigRational::zero();
        for n in m..=2 * m {
            sum += term.clone();
            term = term * BigRational::new(mm.clone(), BigInt::from(n + 1));
        }
        let exact = sum.to_f64().unwrap() * (-(m as f64)).exp();
        let got = poisson_partial_sum(m).unwrap();
        assert!((got - exact).abs() < 1e-12, "m={m}: {got} vs {exact}");
    }
    assert!(poisson_partial_sum(0).is_err());
}

#[test]
fn telescoping_identity_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        worst = worst.max(product_factorization_check(&a, &b).unwrap());
    }
    assert!(worst < 1e-12, "{worst:e}");
}
