use nlfp::cumulants::{bell_moments, evolve_cumulant, initial_cumulants, CumulantTable};
use nlfp::fields::Grid;
use nlfp::initial::InitialData;
use nlfp::kernels::{kernel, Family};
use nlfp::spectral::{equilibrium_density, nlfp_density, Horizon};

fn grid_moment(g: &nlfp::fields::GridDensity, k: i32) -> f64 {
    g.values.iter().enumerate().map(|(i, v)| v * g.grid.coord(i).powi(k)).sum::<f64>() * g.grid.spacing()
}

#[test]
fn spectral_second_moment_matches_closed_form() {
    let grid = Grid::standard(1).unwrap();
    let u0 = InitialData::gaussian(&[0.5], 0.5);
    let k0 = initial_cumulants(&u0, 2).unwrap();
    let mut worst: f64 = 0.0;
    for fam in Family::ALL {
        let k = kernel(fam, 1).unwrap();
        for eps in [1.0, 0.5, 0.25] {
            for t in [Horizon::Finite(0.5), Horizon::Finite(2.0), Horizon::Infinite] {
                let g = match t {
                    Horizon::Finite(t) => nlfp_density(&k, eps, &u0, &grid, t),
                    Horizon::Infinite => equilibrium_density(&k, eps, &grid),
                };
                let k1 = evolve_cumulant(&k, eps, &k0, t, &[1]).unwrap();
                let k2 = evolve_cumulant(&k, eps, &k0, t, &[2]).unwrap();
                let expect = k2 + k1 * k1;
                let rel = (grid_moment(&g, 2) - expect).abs() / expect;
                eprintln!("{fam} eps={eps} t={t:?} rel={rel:.3e}");
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:.3e}");
}

#[test]
fn bell_reconstruction_matches_grid_equilibrium() {
    let grid = Grid::standard(1).unwrap();
    for fam in Family::ALL {
        let k = kernel(fam, 1).unwrap();
        for eps in [1.0, 0.5] {
            let zero = CumulantTable::from_sequence(&[0.0; 4]);
            let kap: Vec<f64> =
                (1..=4u32).map(|n| evolve_cumulant(&k, eps, &zero, Horizon::Infinite, &[n]).unwrap()).collect();
            let m = bell_moments(&kap).unwrap();
            let g = equilibrium_density(&k, eps, &grid);
            for n in 1..=4 {
                let q = grid_moment(&g, n as i32);
                let scale = m[n - 1].abs().max(1.0);
                assert!((q - m[n - 1]).abs() / scale < 1e-4, "{fam} eps={eps} n={n}: {q} vs {}", m[n - 1]);
            }
        }
    }
}
