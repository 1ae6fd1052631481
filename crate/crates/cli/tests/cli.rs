use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const RATES: &str = "\
experiment.name = rates
kernel.name = uniform
model.epsilons = 0.4, 0.2, 0.1, 0.05
grid.half_width = 12
grid.points = 1024
rates.decay_times = 0, 1, 2, 3
";

const SOLVE_MC: &str = "\
kernel.name = skew_step
model.epsilons = 0.5
model.times = 0.5, 1
grid.half_width = 10
grid.points = 512
initial.name = box
mc.particles = 20000
mc.seed = 11
";

fn nlfp(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlfp"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("NLFP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> std::path::PathBuf {
    let p = dir.path().join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn uniform_rates_have_second_order_local_limit() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, RATES);
    let out = tmp.path().join("out");
    let o = nlfp(&["rates"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("rates_fit.csv"));
    let local = rows.iter().find(|r| r[0] == "local_limit").expect("local limit row");
    let slope: f64 = local[2].parse().unwrap();
    assert!((1.8..=2.3).contains(&slope), "slope {slope}");
    let gap = rows.iter().find(|r| r[0] == "equilibria_gap").unwrap();
    let slope: f64 = gap[2].parse().unwrap();
    assert!((1.8..=2.3).contains(&slope), "gap slope {slope}");
}

#[test]
fn empty_epsilons_are_refused() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "kernel.name = uniform\nmodel.epsilons =\n");
    let o = nlfp(&["solve"], &cfg, &tmp.path().join("out"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("epsilons"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn parse_errors_name_line_and_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "kernel.name = uniform\n# comment\ngrid.points = many\n");
    let o = nlfp(&["solve"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("grid.points"), "{e}");
}

#[test]
fn mismatched_experiment_is_refused() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, RATES);
    let o = nlfp(&["clt"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.name"));
}

#[test]
fn tails_need_a_compact_kernel() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "kernel.name = gaussian\nmodel.epsilons = 1\n");
    let o = nlfp(&["tails"], &cfg, &tmp.path().join("out"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("kernel.name"), "{}", stderr(&o));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SOLVE_MC);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(nlfp(&["solve", "--threads", "1"], &cfg, &a).status.success());
    assert!(nlfp(&["solve", "--threads", "3"], &cfg, &b).status.success());
    for name in ["solve_density.csv", "solve_summary.csv", "solve_density.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let rows = csv_rows(&a.join("solve_summary.csv"));
    let mc: f64 = rows[1][6].parse().unwrap();
    assert!(mc.is_finite() && mc < 0.1, "Monte Carlo L1 distance {mc}");
}

#[test]
fn collisions_need_overwrite() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "model.epsilons = 0.5\ngrid.points = 256\n");
    let out = tmp.path().join("out");
    assert!(nlfp(&["solve"], &cfg, &out).status.success());
    let o = nlfp(&["solve"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--overwrite"));
    fs::write(out.join("keep.txt"), "mine").unwrap();
    let o = nlfp(&["solve", "--overwrite", "--no-svg"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("keep.txt").exists());
    assert!(!out.join("solve_density.svg").exists());
}

#[test]
fn manifest_lists_every_file_and_headers_carry_units() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "experiment.name = clt\nclt.n = 4, 8, 16\nclt.m = 1, 10\ngrid.half_width = 10\ngrid.points = 512\nmc.seed = 5\n",
    );
    let out = tmp.path().join("out");
    let o = nlfp(&["clt"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.clt.n = 4, 8, 16"));
    assert!(manifest.contains("config.grid.points = 512"));
    assert!(manifest.contains("seed.master = 5"));
    assert!(manifest.contains("nlfp.version = "));
    let listed: Vec<&str> = manifest.lines().filter_map(|l| l.strip_prefix("file = ")).collect();
    let mut present: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.txt")
        .collect();
    present.sort();
    let mut sorted: Vec<String> = listed.iter().map(|s| s.to_string()).collect();
    sorted.sort();
    assert_eq!(sorted, present);
    for f in listed.iter().filter(|f| f.ends_with(".csv")) {
        let header = &csv_rows(&out.join(f))[0];
        assert!(header.iter().all(|h| h.ends_with(')') && h.contains(" (")), "{f}: {header:?}");
    }
    let be = csv_rows(&out.join("clt_berry_esseen.csv"));
    let v = &be[1][1];
    assert_eq!(v.split('e').next().unwrap().len(), 18, "17 significant digits in {v}");
}

#[test]
fn out_dir_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "model.epsilons = 0.5\ngrid.points = 256\n");
    let target = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_nlfp"))
        .args(["positivity", "--config"])
        .arg(&cfg)
        .env("NLFP_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("positivity.csv").exists());
}
