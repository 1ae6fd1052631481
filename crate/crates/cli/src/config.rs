//! Flat `section.key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Lists are comma separated.
//! Keys of the `kernel` and `initial` sections other than `name` (and
//! `kernel.dim`) are forwarded as numeric parameters of the catalog entry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nlfp::clt::SigmaRule;
use nlfp::error::Error as CoreError;
use nlfp::fields::{Grid, WeightSpec};
use nlfp::initial::InitialData;
use nlfp::kernels::{make_kernel, KernelSpec};

use crate::error::{invalid, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    Solve,
    Equilibrium,
    Rates,
    Clt,
    Cumulants,
    Lyapunov,
    Positivity,
    Tails,
    All,
}

impl Experiment {
    /// Every experiment except `all`, in the order `all` runs them.
    pub const EACH: [Experiment; 8] = [
        Experiment::Solve,
        Experiment::Equilibrium,
        Experiment::Rates,
        Experiment::Clt,
        Experiment::Cumulants,
        Experiment::Lyapunov,
        Experiment::Positivity,
        Experiment::Tails,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Equilibrium => "equilibrium",
            Experiment::Rates => "rates",
            Experiment::Clt => "clt",
            Experiment::Cumulants => "cumulants",
            Experiment::Lyapunov => "lyapunov",
            Experiment::Positivity => "positivity",
            Experiment::Tails => "tails",
            Experiment::All => "all",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::EACH
            .into_iter()
            .chain([Experiment::All])
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("experiment", &["name"]),
    ("kernel", &["name", "dim"]),
    ("model", &["epsilons", "times"]),
    ("grid", &["half_width", "points"]),
    ("weight", &["kind", "param"]),
    ("initial", &["name"]),
    ("mc", &["particles", "seed"]),
    ("output", &["directory", "formats"]),
    ("equilibrium", &["xi_lo", "xi_hi", "xi_samples"]),
    ("rates", &["decay_times"]),
    ("positivity", &["t", "r1", "r2"]),
    ("clt", &["density", "sigma", "period", "n", "deltas", "m"]),
    ("cumulants", &["order"]),
    ("lyapunov", &["half_width", "points"]),
    ("tails", &["a", "half_width", "points"]),
];

/// Sections whose extra keys are catalog parameters.
const OPEN: &[&str] = &["kernel", "initial"];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but unvalidated `key -> value` lines.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(CliError::Config { line, key: body.to_string(), reason: "expected `section.key = value`".into() });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let err = |reason: String| CliError::Config { line, key: key.clone(), reason };
            let Some((section, name)) = key.split_once('.') else {
                return Err(err("keys have the form `section.key`".into()));
            };
            let Some((_, known)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
                return Err(err(format!("unknown section `{section}`")));
            };
            if name.is_empty() || name.contains('.') {
                return Err(err("keys have the form `section.key`".into()));
            }
            if !known.contains(&name) && !OPEN.contains(&section) {
                return Err(err(format!("unknown key; `{section}` accepts {}", known.join(", "))));
            }
            if value.is_empty() {
                return Err(err("missing value".into()));
            }
            if let Some(prev) = entries.get(&key) {
                let prev: &Entry = prev;
                return Err(err(format!("duplicate of line {}", prev.line)));
            }
            entries.insert(key, Entry { value, line });
        }
        Ok(RawConfig { entries })
    }

    fn error(&self, key: &str, reason: impl Into<String>) -> CliError {
        match self.entries.get(key) {
            Some(e) => CliError::Config { line: e.line, key: key.to_string(), reason: reason.into() },
            None => invalid(key, reason),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn value<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.text(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.error(key, format!("cannot parse `{v}`"))),
        }
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.text(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.error(key, format!("cannot parse `{v}`"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.text(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| self.error(key, format!("cannot parse list item `{s}`"))))
                .collect(),
        }
    }

    fn params(&self, section: &str, reserved: &[&str]) -> Result<BTreeMap<String, f64>> {
        let prefix = format!("{section}.");
        let mut out = BTreeMap::new();
        for (key, e) in self.entries.range(prefix.clone()..) {
            let Some(name) = key.strip_prefix(&prefix) else { break };
            if reserved.contains(&name) {
                continue;
            }
            let v: f64 = e.value.parse().map_err(|_| self.error(key, format!("cannot parse `{}`", e.value)))?;
            out.insert(name.to_string(), v);
        }
        Ok(out)
    }
}

/// Validated configuration with every default resolved.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub kernel_name: String,
    pub dim: usize,
    pub kernel_params: BTreeMap<String, f64>,
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    pub grid: Grid,
    pub weight: WeightSpec,
    pub initial_name: String,
    pub initial_params: BTreeMap<String, f64>,
    pub particles: usize,
    pub seed: u64,
    pub directory: Option<PathBuf>,
    pub svg: bool,
    pub xi_lo: Option<f64>,
    pub xi_hi: Option<f64>,
    pub xi_samples: usize,
    pub decay_times: Vec<f64>,
    pub positivity_t: f64,
    pub r1: f64,
    pub r2: f64,
    pub clt_density: String,
    pub sigma: SigmaRule,
    pub clt_n: Vec<usize>,
    pub deltas: Vec<f64>,
    pub poisson_m: Vec<u64>,
    pub cumulant_order: usize,
    pub lyapunov_grid: Grid,
    pub tails_a: Option<f64>,
    pub tails_grid: Grid,
    raw: RawConfig,
}

fn fmt_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let experiment = match raw.text("experiment.name") {
            None => None,
            Some(v) => Some(v.parse::<Experiment>().map_err(|e| raw.error("experiment.name", e))?),
        };
        let dim: usize = raw.value("kernel.dim", 1)?;
        if !(1..=2).contains(&dim) {
            return Err(raw.error("kernel.dim", format!("{dim}: experiments run in dimension 1 or 2")));
        }
        let grid_at = |hw_key: &str, n_key: &str, hw: f64, n: usize| -> Result<Grid> {
            let hw = raw.value(hw_key, hw)?;
            let n = raw.value(n_key, n)?;
            Grid::new(dim, hw, n).map_err(|e| raw.error(n_key, e.to_string()))
        };
        let grid = grid_at("grid.half_width", "grid.points", 12.0, if dim == 1 { 4096 } else { 512 })?;
        let lyapunov_grid = grid_at("lyapunov.half_width", "lyapunov.points", 10.0, if dim == 1 { 256 } else { 32 })?;
        let tails_grid = grid_at("tails.half_width", "tails.points", 24.0, if dim == 1 { 8192 } else { 512 })?;

        let epsilons: Vec<f64> = raw.list("model.epsilons", vec![0.4, 0.2, 0.1, 0.05])?;
        if epsilons.is_empty() {
            return Err(raw.error("model.epsilons", "epsilons list is empty"));
        }
        if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(raw.error("model.epsilons", format!("{e} outside (0, 1]")));
        }
        let nonnegative_times = |key: &str, v: Vec<f64>| -> Result<Vec<f64>> {
            if v.is_empty() {
                return Err(raw.error(key, "times list is empty"));
            }
            if let Some(t) = v.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(raw.error(key, format!("{t} is not a finite nonnegative time")));
            }
            Ok(v)
        };
        let times = nonnegative_times("model.times", raw.list("model.times", vec![1.0])?)?;
        let decay_times =
            nonnegative_times("rates.decay_times", raw.list("rates.decay_times", (0..=12).map(|i| 0.5 * i as f64).collect())?)?;
        if decay_times.windows(2).any(|p| p[1] <= p[0]) {
            return Err(raw.error("rates.decay_times", "values must be strictly increasing"));
        }

        let kind = raw.text("weight.kind").unwrap_or("polynomial").to_string();
        let weight = WeightSpec::parse(&kind, raw.value("weight.param", 2.0)?).map_err(|e| match e {
            CoreError::Parameter { key, reason } => raw.error(&key, reason),
            other => other.into(),
        })?;

        let formats: Vec<String> = raw.list("output.formats", vec!["csv".to_string(), "svg".to_string()])?;
        if let Some(f) = formats.iter().find(|f| !["csv", "svg"].contains(&f.as_str())) {
            return Err(raw.error("output.formats", format!("unknown format `{f}`")));
        }
        if !formats.iter().any(|f| f == "csv") {
            return Err(raw.error("output.formats", "csv output cannot be disabled"));
        }

        let sigma = match raw.text("clt.sigma").unwrap_or("spread") {
            "spread" => {
                let period: usize = raw.value("clt.period", 17)?;
                if period == 0 {
                    return Err(raw.error("clt.period", "must be positive"));
                }
                SigmaRule::Spread { period }
            }
            "constant" => SigmaRule::Constant(1.0),
            other => return Err(raw.error("clt.sigma", format!("`{other}` is neither `spread` nor `constant`"))),
        };
        let clt_density = raw.text("clt.density").unwrap_or("uniform").to_string();
        if !["uniform", "gaussian", "kernel"].contains(&clt_density.as_str()) {
            return Err(raw.error("clt.density", format!("`{clt_density}` is not one of uniform, gaussian, kernel")));
        }
        let clt_n: Vec<usize> = raw.list("clt.n", vec![8, 16, 32, 64, 128])?;
        if clt_n.is_empty() || clt_n[0] == 0 || clt_n.windows(2).any(|p| p[1] <= p[0]) {
            return Err(raw.error("clt.n", "needs strictly increasing positive values"));
        }
        let deltas: Vec<f64> = raw.list("clt.deltas", vec![0.5, 1.0, 2.0, 4.0])?;
        if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(raw.error("clt.deltas", "values must be positive"));
        }
        let poisson_m: Vec<u64> = raw.list("clt.m", vec![1, 10, 100, 1000, 10000])?;
        if poisson_m.contains(&0) {
            return Err(raw.error("clt.m", "values must be at least 1"));
        }
        let cumulant_order: usize = raw.value("cumulants.order", 4)?;
        if !(1..=nlfp::cumulants::MAX_BELL_ORDER).contains(&cumulant_order) {
            return Err(raw.error("cumulants.order", format!("{cumulant_order} outside 1..={}", nlfp::cumulants::MAX_BELL_ORDER)));
        }
        let positive = |key: &str, v: f64| -> Result<f64> {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(raw.error(key, format!("{v} must be positive")))
            }
        };
        let positivity_t: f64 = raw.value("positivity.t", 1.0)?;
        if !(positivity_t.is_finite() && positivity_t >= 0.0) {
            return Err(raw.error("positivity.t", format!("{positivity_t} is not a nonnegative time")));
        }
        let r1 = positive("positivity.r1", raw.value("positivity.r1", 1.0)?)?;
        let r2 = positive("positivity.r2", raw.value("positivity.r2", 1.0)?)?;
        let xi_lo = raw.optional::<f64>("equilibrium.xi_lo")?.map(|v| positive("equilibrium.xi_lo", v)).transpose()?;
        let xi_hi = raw.optional::<f64>("equilibrium.xi_hi")?.map(|v| positive("equilibrium.xi_hi", v)).transpose()?;
        let xi_samples: usize = raw.value("equilibrium.xi_samples", 24)?;
        if xi_samples < 3 {
            return Err(raw.error("equilibrium.xi_samples", "at least 3 samples are needed for a fit"));
        }
        let tails_a = raw.optional::<f64>("tails.a")?;
        if let Some(a) = tails_a {
            if !(a.is_finite() && a >= 0.0) {
                return Err(raw.error("tails.a", format!("{a} must be nonnegative")));
            }
        }

        let config = ExperimentConfig {
            experiment,
            kernel_name: raw.text("kernel.name").unwrap_or("uniform").to_string(),
            dim,
            kernel_params: raw.params("kernel", &["name", "dim"])?,
            epsilons,
            times,
            grid,
            weight,
            initial_name: raw.text("initial.name").unwrap_or("gaussian").to_string(),
            initial_params: raw.params("initial", &["name"])?,
            particles: raw.value("mc.particles", 0)?,
            seed: raw.value("mc.seed", 1)?,
            directory: raw.text("output.directory").map(PathBuf::from),
            svg: formats.iter().any(|f| f == "svg"),
            xi_lo,
            xi_hi,
            xi_samples,
            decay_times,
            positivity_t,
            r1,
            r2,
            clt_density,
            sigma,
            clt_n,
            deltas,
            poisson_m,
            cumulant_order,
            lyapunov_grid,
            tails_a,
            tails_grid,
            raw,
        };
        config.kernel()?;
        config.initial()?;
        Ok(config)
    }

    /// Map a catalog parameter error back to its config line.
    fn forward(&self, section: &str, e: CoreError) -> CliError {
        match e {
            CoreError::Parameter { key, reason } => self.raw.error(&format!("{section}.{key}"), reason),
            CoreError::UnknownKernel(_) => self.raw.error("kernel.name", e.to_string()),
            CoreError::UnknownInitial(_) => self.raw.error("initial.name", e.to_string()),
            CoreError::Normalization(ref msg) => {
                let params = if section == "kernel" { &self.kernel_params } else { &self.initial_params };
                let culprit = params.keys().find(|k| msg.contains(&format!("`{k}`")));
                let key = culprit.map_or(format!("{section}.name"), |k| format!("{section}.{k}"));
                self.raw.error(&key, e.to_string())
            }
            CoreError::Dimension { .. } => self.raw.error(&format!("{section}.name"), e.to_string()),
            other => other.into(),
        }
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        make_kernel(&self.kernel_name, self.dim, &self.kernel_params).map_err(|e| self.forward("kernel", e))
    }

    pub fn initial(&self) -> Result<InitialData> {
        InitialData::from_params(&self.initial_name, self.dim, &self.initial_params).map_err(|e| self.forward("initial", e))
    }

    /// Every setting, defaults included, as sorted `key = value` pairs.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut out: BTreeMap<String, String> = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            out.insert(k.to_string(), v);
        };
        if let Some(e) = self.experiment {
            put("experiment.name", e.to_string());
        }
        put("kernel.name", self.kernel_name.clone());
        put("kernel.dim", self.dim.to_string());
        for (k, v) in &self.kernel_params {
            put(&format!("kernel.{k}"), v.to_string());
        }
        put("model.epsilons", fmt_list(&self.epsilons));
        put("model.times", fmt_list(&self.times));
        put("grid.half_width", self.grid.half_width.to_string());
        put("grid.points", self.grid.points.to_string());
        put("weight.kind", self.weight.kind().to_string());
        put("weight.param", self.weight.param().to_string());
        put("initial.name", self.initial_name.clone());
        for (k, v) in &self.initial_params {
            put(&format!("initial.{k}"), v.to_string());
        }
        put("mc.particles", self.particles.to_string());
        put("mc.seed", self.seed.to_string());
        put("output.formats", if self.svg { "csv, svg" } else { "csv" }.to_string());
        if let Some(v) = self.xi_lo {
            put("equilibrium.xi_lo", v.to_string());
        }
        if let Some(v) = self.xi_hi {
            put("equilibrium.xi_hi", v.to_string());
        }
        put("equilibrium.xi_samples", self.xi_samples.to_string());
        put("rates.decay_times", fmt_list(&self.decay_times));
        put("positivity.t", self.positivity_t.to_string());
        put("positivity.r1", self.r1.to_string());
        put("positivity.r2", self.r2.to_string());
        put("clt.density", self.clt_density.clone());
        match self.sigma {
            SigmaRule::Spread { period } => {
                put("clt.sigma", "spread".into());
                put("clt.period", period.to_string());
            }
            SigmaRule::Constant(_) => put("clt.sigma", "constant".into()),
        }
        put("clt.n", fmt_list(&self.clt_n));
        put("clt.deltas", fmt_list(&self.deltas));
        put("clt.m", fmt_list(&self.poisson_m));
        put("cumulants.order", self.cumulant_order.to_string());
        put("lyapunov.half_width", self.lyapunov_grid.half_width.to_string());
        put("lyapunov.points", self.lyapunov_grid.points.to_string());
        if let Some(a) = self.tails_a {
            put("tails.a", a.to_string());
        }
        put("tails.half_width", self.tails_grid.half_width.to_string());
        put("tails.points", self.tails_grid.points.to_string());
        out.into_iter().collect()
    }
}
