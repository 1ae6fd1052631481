//! One runner per experiment; each writes its tables and plots into the
//! output directory in a fixed order.

use nlfp::analysis::{
    decay_rate_fit, equilibria_gap, fourier_decay_exponent, local_limit_rate, lyapunov_fit, positivity_probe, tail_probe,
    RateFit,
};
use nlfp::clt::{be_rate_experiment, charfn_bounds, poisson_partial_sum, CLTDensity};
use nlfp::cumulants::{batch_standard_error, empirical_cumulants, evolve_table, initial_cumulants, CumulantTable};
use nlfp::fields::{Grid, GridDensity};
use nlfp::jump::{empirical_density, simulate};
use nlfp::spectral::{equilibrium_density, local_fp_density, nlfp_density, Horizon};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{invalid, Result};
use crate::output::{Cell, OutputDir, Table};
use crate::svg::{Plot, Series};

/// Histogram resolution of Monte Carlo comparisons: 256 bins in one
/// dimension, 32 per axis in two.
fn histogram_factor(grid: &Grid) -> usize {
    let bins = if grid.dim == 1 { 256 } else { 32 };
    (grid.points / bins).max(1)
}

fn x_columns(dim: usize) -> Vec<(&'static str, &'static str)> {
    if dim == 1 {
        vec![("x", "length")]
    } else {
        vec![("x1", "length"), ("x2", "length")]
    }
}

fn density_unit(dim: usize) -> &'static str {
    if dim == 1 {
        "1/length"
    } else {
        "1/length^2"
    }
}

fn point_cells(grid: &Grid, i: usize) -> Vec<Cell> {
    grid.point(i)[..grid.dim].iter().map(|&v| Cell::Num(v)).collect()
}

fn second_moment(u: &GridDensity) -> f64 {
    let g = u.grid;
    u.values
        .iter()
        .enumerate()
        .map(|(i, v)| v * g.point(i)[..g.dim].iter().map(|c| c * c).sum::<f64>())
        .sum::<f64>()
        * g.cell_volume()
}

const FIT_COLUMNS: [(&str, &str); 7] = [
    ("quantity", "name"),
    ("parameter", "1"),
    ("slope", "1"),
    ("intercept", "1"),
    ("max_residual", "1"),
    ("points", "count"),
    ("degenerate", "flag"),
];

fn fit_row(quantity: &str, parameter: f64, fit: &RateFit) -> Vec<Cell> {
    vec![
        quantity.into(),
        parameter.into(),
        fit.slope.into(),
        fit.intercept.into(),
        fit.max_residual.into(),
        fit.used.len().into(),
        fit.degenerate.into(),
    ]
}

/// Points of a fit and its fitted line, for plotting.
fn fit_series(label: &str, fit: &RateFit) -> (Series, Series) {
    let data = Series::new(label, fit.abscissae.iter().copied().zip(fit.ordinates.iter().copied()).collect());
    let line = if fit.degenerate {
        Vec::new()
    } else {
        fit.used.iter().map(|&i| (fit.abscissae[i], fit.predict(fit.abscissae[i]))).collect()
    };
    (data, Series::new(format!("{label} fit {:.3}", fit.slope), line).dashed())
}

pub fn run(experiment: Experiment, cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    match experiment {
        Experiment::Solve => solve(cfg, out),
        Experiment::Equilibrium => equilibrium(cfg, out),
        Experiment::Rates => rates(cfg, out),
        Experiment::Clt => clt(cfg, out),
        Experiment::Cumulants => cumulants(cfg, out),
        Experiment::Lyapunov => lyapunov(cfg, out),
        Experiment::Positivity => positivity(cfg, out),
        Experiment::Tails => tails(cfg, out),
        Experiment::All => {
            for e in Experiment::EACH {
                if e == Experiment::Tails && cfg.kernel()?.support_radius().is_none() {
                    out.note(format!("tails skipped: the {} kernel is not compactly supported", cfg.kernel_name));
                    continue;
                }
                log::info!("running {e}");
                run(e, cfg, out)?;
            }
            Ok(())
        }
    }
}

fn solve(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let k = cfg.kernel()?;
    let u0 = cfg.initial()?;
    let grid = cfg.grid;
    let d = grid.dim;
    let unit = density_unit(d);
    let mut cols = vec![("epsilon", "1"), ("time", "1")];
    cols.extend(x_columns(d));
    cols.extend([("density", unit), ("local_fp", unit)]);
    let mut field = Table::new("solve_density", &cols);
    let mut summary = Table::new(
        "solve_summary",
        &[
            ("epsilon", "1"),
            ("time", "1"),
            ("mass", "1"),
            ("negative_part", "1"),
            ("second_moment", "length^2"),
            ("weighted_distance_local", "1"),
            ("mc_l1_distance", "1"),
            ("mc_escaped_fraction", "1"),
        ],
    );
    let mut plot = Plot::new(&format!("{} kernel, eps = {}", cfg.kernel_name, cfg.epsilons[0]), "x", "density");
    for &eps in &cfg.epsilons {
        for &t in &cfg.times {
            let u = nlfp_density(&k, eps, &u0, &grid, t);
            let v = local_fp_density(&u0, &grid, t);
            for i in 0..grid.len() {
                let mut row = vec![Cell::Num(eps), Cell::Num(t)];
                row.extend(point_cells(&grid, i));
                row.extend([Cell::Num(u.values[i]), Cell::Num(v.values[i])]);
                field.push(row);
            }
            let (mc_l1, escaped) = if cfg.particles > 0 {
                let e = simulate(&k, eps, &u0, t, cfg.particles, cfg.seed)?;
                let factor = histogram_factor(&grid);
                let coarse = u.coarsen(factor)?;
                let hist = empirical_density(&e, &coarse.grid)?;
                (hist.l1_distance(&coarse)?, nlfp::jump::escaped_fraction(&e, &grid))
            } else {
                (f64::NAN, f64::NAN)
            };
            summary.push(vec![
                eps.into(),
                t.into(),
                u.mass().into(),
                u.negative_part().into(),
                second_moment(&u).into(),
                u.sub(&v)?.weighted_norm(&cfg.weight).into(),
                mc_l1.into(),
                escaped.into(),
            ]);
            if d == 1 && eps == cfg.epsilons[0] {
                let xs = grid.coords();
                plot.series.push(Series::new(format!("t = {t}"), xs.iter().copied().zip(u.values.iter().copied()).collect()));
                plot.series.push(
                    Series::new(format!("local t = {t}"), xs.iter().copied().zip(v.values.iter().copied()).collect()).dashed(),
                );
            }
        }
    }
    out.write_table(&field)?;
    out.write_table(&summary)?;
    if d == 1 {
        out.write_plot("solve_density", &plot)?;
    }
    Ok(())
}

fn equilibrium(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let k = cfg.kernel()?;
    let grid = cfg.grid;
    let d = grid.dim;
    let unit = density_unit(d);
    let g = nlfp::initial::InitialData::standard_gaussian(d).on_grid(grid).expect("Gaussian has a density");
    let mut cols = vec![("epsilon", "1")];
    cols.extend(x_columns(d));
    cols.extend([("density", unit), ("gaussian", unit)]);
    let mut field = Table::new("equilibrium_density", &cols);
    let mut summary = Table::new(
        "equilibrium_summary",
        &[
            ("epsilon", "1"),
            ("mass", "1"),
            ("second_moment", "length^2"),
            ("excess_kurtosis_x1", "1"),
            ("weighted_distance_gaussian", "1"),
            ("fourier_decay_slope", "1"),
            ("threshold_slope", "1"),
        ],
    );
    let mut fits = Table::new("equilibrium_fits", &FIT_COLUMNS);
    let mut plot = Plot::new(&format!("equilibria, {} kernel", cfg.kernel_name), "x", "density");
    for &eps in &cfg.epsilons {
        let f = equilibrium_density(&k, eps, &grid);
        for i in 0..grid.len() {
            let mut row = vec![Cell::Num(eps)];
            row.extend(point_cells(&grid, i));
            row.extend([Cell::Num(f.values[i]), Cell::Num(g.values[i])]);
            field.push(row);
        }
        let kappa = empirical_cumulants(&f, 4)?;
        let mut a2 = vec![0u32; d];
        a2[0] = 2;
        let mut a4 = vec![0u32; d];
        a4[0] = 4;
        let kurt = kappa.get(&a4).unwrap_or(f64::NAN) / kappa.get(&a2).unwrap_or(f64::NAN).powi(2);
        let lo = cfg.xi_lo.unwrap_or(20.0 / eps);
        let hi = cfg.xi_hi.unwrap_or(10.0 * lo);
        let decay = fourier_decay_exponent(&k, eps, lo, hi, cfg.xi_samples)?;
        fits.push(fit_row("fourier_decay", eps, &decay));
        summary.push(vec![
            eps.into(),
            f.mass().into(),
            second_moment(&f).into(),
            kurt.into(),
            f.sub(&g)?.weighted_norm(&cfg.weight).into(),
            decay.slope.into(),
            (-1.0 / (eps * eps)).into(),
        ]);
        if d == 1 {
            plot.series.push(Series::new(format!("eps = {eps}"), grid.coords().into_iter().zip(f.values.iter().copied()).collect()));
        }
    }
    let mut gap_plot = None;
    if cfg.epsilons.len() >= 3 {
        let fit = equilibria_gap(&k, &cfg.epsilons, &cfg.weight, &grid)?;
        fits.push(fit_row("equilibria_gap", f64::NAN, &fit));
        let (a, b) = fit_series("gap", &fit);
        gap_plot = Some(Plot::new("equilibrium to Gaussian distance", "epsilon", "distance").log_log().with(a).with(b));
    }
    out.write_table(&field)?;
    out.write_table(&summary)?;
    out.write_table(&fits)?;
    if d == 1 {
        plot.series.push(Series::new("Gaussian", grid.coords().into_iter().zip(g.values.iter().copied()).collect()).dashed());
        out.write_plot("equilibrium_density", &plot)?;
    }
    if let Some(p) = gap_plot {
        out.write_plot("equilibrium_gap", &p)?;
    }
    Ok(())
}

fn rates(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let k = cfg.kernel()?;
    let u0 = cfg.initial()?;
    let grid = cfg.grid;
    let mut local = Table::new("rates_local", &[("time", "1"), ("epsilon", "1"), ("distance", "1")]);
    let mut decay = Table::new("rates_decay", &[("epsilon", "1"), ("time", "1"), ("distance", "1")]);
    let mut gap = Table::new("rates_gap", &[("epsilon", "1"), ("distance", "1")]);
    let mut fits = Table::new("rates_fit", &FIT_COLUMNS);
    let mut local_plot = Plot::new("nonlocal to local distance", "epsilon", "distance").log_log();
    for &t in &cfg.times {
        let fit = local_limit_rate(&k, &u0, &cfg.epsilons, t, &cfg.weight, &grid)?;
        for (e, dist) in fit.abscissae.iter().zip(&fit.ordinates) {
            local.push(vec![t.into(), (*e).into(), (*dist).into()]);
        }
        fits.push(fit_row("local_limit", t, &fit));
        let (a, b) = fit_series(&format!("t = {t}"), &fit);
        local_plot.series.extend([a, b]);
    }
    let fit = equilibria_gap(&k, &cfg.epsilons, &cfg.weight, &grid)?;
    for (e, dist) in fit.abscissae.iter().zip(&fit.ordinates) {
        gap.push(vec![(*e).into(), (*dist).into()]);
    }
    fits.push(fit_row("equilibria_gap", f64::NAN, &fit));
    let mut decay_plot = Plot::new("distance to equilibrium", "time", "distance").log_y();
    for &eps in &cfg.epsilons {
        let fit = decay_rate_fit(&k, eps, &u0, &cfg.weight, &cfg.decay_times, &grid)?;
        for (t, dist) in fit.abscissae.iter().zip(&fit.ordinates) {
            decay.push(vec![eps.into(), (*t).into(), (*dist).into()]);
        }
        fits.push(fit_row("decay", eps, &fit));
        decay_plot.series.push(fit_series(&format!("eps = {eps}"), &fit).0);
    }
    out.write_table(&local)?;
    out.write_table(&gap)?;
    out.write_table(&decay)?;
    out.write_table(&fits)?;
    out.write_plot("rates_local", &local_plot)?;
    out.write_plot("rates_decay", &decay_plot)?;
    Ok(())
}

fn clt(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let f = match cfg.clt_density.as_str() {
        "gaussian" => CLTDensity::standard_gaussian(cfg.dim),
        "kernel" => CLTDensity::from_kernel(&cfg.kernel()?),
        _ => CLTDensity::uniform(cfg.dim),
    };
    let rep = be_rate_experiment(&f, cfg.sigma, &cfg.clt_n, &cfg.grid)?;
    let mut be = Table::new("clt_berry_esseen", &[("n", "count"), ("sup_distance", density_unit(cfg.dim))]);
    for (n, s) in rep.n.iter().zip(&rep.sup_distance) {
        be.push(vec![(*n).into(), (*s).into()]);
    }
    for (n, r) in &rep.non_monotone {
        out.note(format!("sup distance grew by {:.3}% at n = {n}", 100.0 * r));
    }
    let mut fits = Table::new("clt_fit", &FIT_COLUMNS);
    let mut plot = Plot::new("sup distance to the Gaussian", "n", "sup distance").log_log();
    match &rep.fit {
        Some(fit) => {
            fits.push(fit_row("berry_esseen", f64::NAN, fit));
            let (a, b) = fit_series("sup distance", fit);
            plot.series.extend([a, b]);
        }
        None => plot.series.push(Series::new(
            "sup distance",
            rep.n.iter().map(|&n| n as f64).zip(rep.sup_distance.iter().copied()).collect(),
        )),
    }
    let mut chf = Table::new("clt_charfn", &[("delta", "1/length"), ("delta_star", "1/length"), ("kappa", "1")]);
    for &delta in &cfg.deltas {
        let b = charfn_bounds(&f, delta)?;
        chf.push(vec![delta.into(), b.delta_star.into(), b.kappa.into()]);
    }
    let mut poisson = Table::new("clt_poisson", &[("m", "count"), ("s_m", "1")]);
    for &m in &cfg.poisson_m {
        poisson.push(vec![m.into(), poisson_partial_sum(m)?.into()]);
    }
    out.write_table(&be)?;
    out.write_table(&fits)?;
    out.write_table(&chf)?;
    out.write_table(&poisson)?;
    out.write_plot("clt_berry_esseen", &plot)?;
    Ok(())
}

fn alpha_label(alpha: &[u32]) -> String {
    alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(":")
}

/// `Some((axis, order))` for a multi-index along a single coordinate.
fn pure_axis(alpha: &[u32]) -> Option<(usize, usize)> {
    let nonzero: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0).collect();
    (nonzero.len() == 1).then(|| (nonzero[0], alpha[nonzero[0]] as usize))
}

fn cumulants(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let k = cfg.kernel()?;
    let u0 = cfg.initial()?;
    let grid = cfg.grid;
    let kappa0 = initial_cumulants(&u0, cfg.cumulant_order)?;
    let mut table = Table::new(
        "cumulants",
        &[
            ("epsilon", "1"),
            ("time", "1"),
            ("alpha", "multi-index"),
            ("closed_form", "length^|alpha|"),
            ("grid", "length^|alpha|"),
            ("monte_carlo", "length^|alpha|"),
            ("monte_carlo_se", "length^|alpha|"),
        ],
    );
    let empirical_order = cfg.cumulant_order.min(4);
    for &eps in &cfg.epsilons {
        let horizons: Vec<Horizon> = cfg.times.iter().map(|&t| Horizon::Finite(t)).chain([Horizon::Infinite]).collect();
        for h in horizons {
            let theory = evolve_table(&k, eps, &kappa0, h)?;
            let (t, density) = match h {
                Horizon::Finite(t) => (t, nlfp_density(&k, eps, &u0, &grid, t)),
                Horizon::Infinite => (f64::INFINITY, equilibrium_density(&k, eps, &grid)),
            };
            let on_grid = empirical_cumulants(&density, empirical_order)?;
            let ensemble = match h {
                Horizon::Finite(t) if cfg.particles > 0 => Some(simulate(&k, eps, &u0, t, cfg.particles, cfg.seed)?),
                _ => None,
            };
            for (alpha, value) in &theory.entries {
                let axis = pure_axis(alpha);
                let g = match axis {
                    Some((_, order)) if order <= empirical_order => on_grid.get(alpha).unwrap_or(f64::NAN),
                    _ => f64::NAN,
                };
                let (mc, se) = match (&ensemble, axis) {
                    (Some(e), Some((ax, order))) if order <= 4 && e.len() >= 200 => batch_standard_error(e, ax, order, 100)?,
                    _ => (f64::NAN, f64::NAN),
                };
                table.push(vec![eps.into(), t.into(), alpha_label(alpha).into(), (*value).into(), g.into(), mc.into(), se.into()]);
            }
        }
    }
    out.write_table(&table)?;
    let mut initial = Table::new("cumulants_initial", &[("alpha", "multi-index"), ("value", "length^|alpha|")]);
    let CumulantTable { entries, .. } = &kappa0;
    for (alpha, v) in entries {
        initial.push(vec![alpha_label(alpha).into(), (*v).into()]);
    }
    out.write_table(&initial)?;
    Ok(())
}

fn lyapunov(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let k = cfg.kernel()?;
    let grid = cfg.lyapunov_grid;
    let mut cols = vec![("epsilon", "1")];
    cols.extend(x_columns(grid.dim));
    cols.extend([("generator", "1"), ("bound", "1")]);
    let mut field = Table::new("lyapunov", &cols);
    let mut summary = Table::new(
        "lyapunov_summary",
        &[
            ("epsilon", "1"),
            ("weight", "name"),
            ("weight_param", "1"),
            ("c", "1"),
            ("lambda", "1"),
            ("margin", "1"),
            ("certified", "flag"),
        ],
    );
    let mut plot = Plot::new(&format!("{} weight, parameter {}", cfg.weight.kind(), cfg.weight.param()), "x", "value");
    for &eps in &cfg.epsilons {
        let c = lyapunov_fit(&k, eps, &cfg.weight, &grid)?;
        let bound: Vec<f64> = (0..grid.len()).map(|i| c.c - c.lambda * cfg.weight.eval(&grid.point(i)[..grid.dim])).collect();
        for i in 0..grid.len() {
            let mut row = vec![Cell::Num(eps)];
            row.extend(point_cells(&grid, i));
            row.extend([Cell::Num(c.r[i]), Cell::Num(bound[i])]);
            field.push(row);
        }
        summary.push(vec![
            eps.into(),
            cfg.weight.kind().into(),
            cfg.weight.param().into(),
            c.c.into(),
            c.lambda.into(),
            c.margin.into(),
            c.certifies(1e-6).into(),
        ]);
        if grid.dim == 1 && eps == cfg.epsilons[0] {
            let xs = grid.coords();
            plot.series.push(Series::new("generator", xs.iter().copied().zip(c.r.iter().copied()).collect()));
            plot.series.push(Series::new("C - lambda phi", xs.into_iter().zip(bound).collect()).dashed());
        }
    }
    out.write_table(&field)?;
    out.write_table(&summary)?;
    if grid.dim == 1 {
        out.write_plot("lyapunov", &plot)?;
    }
    Ok(())
}

fn positivity(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let k = cfg.kernel()?;
    let u0 = cfg.initial()?;
    let rep = positivity_probe(&k, &cfg.epsilons, cfg.positivity_t, cfg.r1, cfg.r2, &u0, &cfg.grid)?;
    let mut table = Table::new("positivity", &[("epsilon", "1"), ("alpha", density_unit(cfg.dim))]);
    for (e, a) in rep.epsilons.iter().zip(&rep.alpha) {
        table.push(vec![(*e).into(), (*a).into()]);
    }
    let mut summary = Table::new(
        "positivity_summary",
        &[("time", "1"), ("r1", "length"), ("r2", "length"), ("ball_mass", "1"), ("min_max_ratio", "1")],
    );
    summary.push(vec![cfg.positivity_t.into(), cfg.r1.into(), cfg.r2.into(), rep.ball_mass.into(), rep.ratio().into()]);
    out.write_table(&table)?;
    out.write_table(&summary)?;
    let plot = Plot::new("positivity constant", "epsilon", "alpha")
        .log_log()
        .with(Series::new("alpha", rep.epsilons.iter().copied().zip(rep.alpha.iter().copied()).collect()));
    out.write_plot("positivity", &plot)?;
    Ok(())
}

fn tails(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let k = cfg.kernel()?;
    let Some(radius) = k.support_radius() else {
        return Err(invalid("kernel.name", format!("tail probes need a compactly supported kernel, not {}", k.family)));
    };
    let mut shells = Table::new("tails_shells", &[("epsilon", "1"), ("a", "1/length"), ("radius", "length"), ("contribution", "1")]);
    let mut summary = Table::new(
        "tails_summary",
        &[
            ("epsilon", "1"),
            ("a", "1/length"),
            ("integral", "1"),
            ("resolved_radius", "length"),
            ("decay_ratio", "1"),
            ("finite", "flag"),
        ],
    );
    let mut plot = Plot::new("weighted shell contributions", "radius", "contribution").log_y();
    for &eps in &cfg.epsilons {
        let a = cfg.tails_a.unwrap_or(1.0 / (eps * radius));
        let rep = tail_probe(&k, eps, a, &cfg.tails_grid)?;
        for (r, c) in &rep.shells {
            shells.push(vec![eps.into(), a.into(), (*r).into(), (*c).into()]);
        }
        summary.push(vec![
            eps.into(),
            a.into(),
            rep.integral.into(),
            rep.resolved_radius.into(),
            rep.decay_ratio.into(),
            rep.finite.into(),
        ]);
        plot.series.push(Series::new(format!("eps = {eps}"), rep.shells.clone()));
    }
    out.write_table(&shells)?;
    out.write_table(&summary)?;
    out.write_plot("tails", &plot)?;
    Ok(())
}
