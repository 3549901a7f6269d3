//! Run configuration: built-in defaults, an optional key = value file and
//! command-line flags, in increasing order of precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Constants,
    Duality,
    Flow,
    Fastdiff,
    Gradflow,
    Identities,
    Rigidity,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Duality => "duality",
            Command::Flow => "flow",
            Command::Fastdiff => "fastdiff",
            Command::Gradflow => "gradflow",
            Command::Identities => "identities",
            Command::Rigidity => "rigidity",
            Command::Report => "report",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        <Command as ValueEnum>::from_str(s, true).ok()
    }

    fn default_p(self) -> Vec<f64> {
        match self {
            Command::Constants => vec![2.5, 3.0, 4.0, 5.0, 1.2, 1.5, 1.8],
            Command::Duality | Command::Report => vec![2.5, 4.0, 1.5],
            Command::Identities => vec![4.0, 1.5],
            Command::Gradflow => vec![1.5],
            Command::Flow | Command::Fastdiff | Command::Rigidity => vec![4.0],
        }
    }

    fn default_grid(self) -> usize {
        match self {
            Command::Constants | Command::Report => 8001,
            Command::Duality => 1024,
            Command::Flow => 128,
            Command::Fastdiff => 256,
            Command::Gradflow => 513,
            Command::Identities => 801,
            Command::Rigidity => 64,
        }
    }

    fn default_stride(self) -> f64 {
        match self {
            Command::Flow => 1e-3,
            Command::Gradflow => 1e-2,
            _ => 5e-2,
        }
    }

    fn default_init(self) -> &'static str {
        match self {
            Command::Flow => "legendre2",
            Command::Fastdiff => "offcenter",
            Command::Gradflow => "gaussian",
            _ => "none",
        }
    }

    fn inits(self) -> &'static [&'static str] {
        match self {
            Command::Flow => &["legendre2", "constant", "random", "manifold"],
            Command::Fastdiff => &["offcenter", "barenblatt"],
            Command::Gradflow => &["gaussian"],
            _ => &["none"],
        }
    }
}

/// Default acceptance tolerances, overridable by name.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("constants", 1e-7),
    ("duality_gap", 2e-4),
    ("closed_form", 1e-4),
    ("start_spread", 1e-4),
    ("logsob_slope", 5e-3),
    ("logsob_bracket", 1e-6),
    ("monotone", 1e-7),
    ("final_deficit", 1e-4),
    ("fixed_point", 1e-6),
    ("norm_drift", 1e-5),
    ("dissipation_rel", 1e-3),
    ("dissipation_abs", 5e-6),
    ("stationary", 1e-6),
    ("l1_distance", 1e-3),
    ("f1_slack", 1e-8),
    ("mass_drift", 1e-5),
    ("entropy", 1e-4),
    ("production", 1e-4),
    ("gns_bound", 1e-6),
    ("identity", 1e-5),
    ("refinement_ratio", 4.0),
    ("rigidity_sum", 1e-5),
];

#[derive(Debug, Parser)]
#[command(name = "gnslab", version, about = "Sharp one-dimensional GNS inequalities: constants, duality and flows")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Comma-separated exponents.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    /// Sweep a:b:step, both ends included.
    #[arg(long = "p-sweep", value_name = "A:B:STEP")]
    pub p_sweep: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Time between trace rows.
    #[arg(long)]
    pub stride: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial datum (flow: legendre2, constant, random, manifold; fastdiff:
    /// offcenter, barenblatt).
    #[arg(long)]
    pub init: Option<String>,
    /// Output directory; defaults to $GNSLAB_OUT, then ./gnslab_out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "tol-override", value_name = "NAME=VALUE")]
    pub tol_override: Vec<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub p: Vec<f64>,
    pub grid_size: usize,
    pub t_end: f64,
    pub stride: f64,
    pub seed: u64,
    pub init: String,
    pub tolerances: BTreeMap<String, f64>,
    /// Not echoed, so that runs into different directories compare equal.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

/// Raw settings from one source; `None` leaves the lower layer in place.
#[derive(Debug, Default)]
struct Layer {
    p: Option<Vec<f64>>,
    grid: Option<usize>,
    t_end: Option<f64>,
    stride: Option<f64>,
    seed: Option<u64>,
    init: Option<String>,
    out: Option<PathBuf>,
    tol: Vec<(String, f64)>,
}

impl Layer {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |what: &str| format!("cannot parse {key} = {value:?} as {what}");
        match key {
            "p" => self.p = Some(parse_p_list(value)?),
            "p_sweep" | "p-sweep" => self.p = Some(parse_sweep(value)?),
            "grid" | "grid_size" => self.grid = Some(value.parse().map_err(|_| bad("an integer"))?),
            "t_end" | "t-end" => self.t_end = Some(value.parse().map_err(|_| bad("a number"))?),
            "stride" => self.stride = Some(value.parse().map_err(|_| bad("a number"))?),
            "seed" => self.seed = Some(value.parse().map_err(|_| bad("an integer"))?),
            "init" => self.init = Some(value.to_string()),
            "out" | "output_dir" => self.out = Some(PathBuf::from(value)),
            _ => match key.strip_prefix("tol.") {
                Some(name) => self.tol.push(parse_tol(&format!("{name}={value}"))?),
                None => return Err(format!("unknown configuration key {key:?}")),
            },
        }
        Ok(())
    }

    fn from_args(a: &Args) -> Result<Self, String> {
        if a.p.is_some() && a.p_sweep.is_some() {
            return Err("--p and --p-sweep are mutually exclusive".into());
        }
        Ok(Layer {
            p: match (&a.p, &a.p_sweep) {
                (Some(p), _) => Some(p.clone()),
                (None, Some(s)) => Some(parse_sweep(s)?),
                _ => None,
            },
            grid: a.grid,
            t_end: a.t_end,
            stride: a.stride,
            seed: a.seed,
            init: a.init.clone(),
            out: a.out.clone(),
            tol: a.tol_override.iter().map(|s| parse_tol(s)).collect::<Result<_, _>>()?,
        })
    }
}

fn parse_p_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse exponent {t:?}")))
        .collect()
}

/// a:b:step with both ends included; values are a + k·step rounded to 12
/// decimals so that they print cleanly.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("cannot parse sweep {s:?}"))?;
    let [a, b, step] = nums[..] else {
        return Err(format!("sweep {s:?} must have the form a:b:step"));
    };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(format!("sweep {s:?} needs a ≤ b and step > 0"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(format!("sweep {s:?} has {count} points"));
    }
    Ok((0..count)
        .map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("tolerance override {s:?} must be name=value"))?;
    let name = name.trim();
    if !TOLERANCES.iter().any(|(n, _)| *n == name) {
        let known: Vec<&str> = TOLERANCES.iter().map(|(n, _)| *n).collect();
        return Err(format!("unknown tolerance {name:?}; known: {}", known.join(", ")));
    }
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse tolerance value {value:?}"))?;
    if !(v >= 0.0) {
        return Err(format!("tolerance {name} must be non-negative"));
    }
    Ok((name.to_string(), v))
}

/// Reads the config file: `key = value` lines, `#` comments, and `[command]`
/// sections. Returns the global layer and the layer for `command`.
fn read_file(path: &Path, command: Command) -> Result<(Layer, Layer), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let (mut global, mut own) = (Layer::default(), Layer::default());
    let mut section: Option<Command> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |e: String| format!("{}:{}: {e}", path.display(), i + 1);
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(Command::from_name(name.trim()).ok_or_else(|| at(format!("unknown section [{name}]")))?);
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
        match section {
            None => global.set(k.trim(), v.trim()).map_err(at)?,
            Some(c) if c == command => own.set(k.trim(), v.trim()).map_err(at)?,
            Some(_) => {}
        }
    }
    Ok((global, own))
}

/// Merges defaults, config file and flags, then validates the result.
pub fn resolve(args: &Args, env_out: Option<PathBuf>) -> Result<RunConfig, String> {
    let command = args.command;
    let mut layers = Vec::new();
    if let Some(path) = &args.config {
        let (g, c) = read_file(path, command)?;
        layers.push(g);
        layers.push(c);
    }
    layers.push(Layer::from_args(args)?);

    let mut cfg = RunConfig {
        command,
        p: command.default_p(),
        grid_size: command.default_grid(),
        t_end: 10.0,
        stride: command.default_stride(),
        seed: 0,
        init: command.default_init().to_string(),
        tolerances: TOLERANCES.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        output_dir: env_out.unwrap_or_else(|| PathBuf::from("gnslab_out")),
    };
    for l in layers {
        if let Some(v) = l.p {
            cfg.p = v;
        }
        if let Some(v) = l.grid {
            cfg.grid_size = v;
        }
        if let Some(v) = l.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = l.stride {
            cfg.stride = v;
        }
        if let Some(v) = l.seed {
            cfg.seed = v;
        }
        if let Some(v) = l.init {
            cfg.init = v;
        }
        if let Some(v) = l.out {
            cfg.output_dir = v;
        }
        for (n, v) in l.tol {
            cfg.tolerances.insert(n, v);
        }
    }

    if cfg.grid_size < 64 {
        return Err(format!("grid size {} is below the minimum of 64", cfg.grid_size));
    }
    if cfg.p.is_empty() || cfg.p.iter().any(|p| !p.is_finite()) {
        return Err("need at least one finite exponent".into());
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return Err(format!("t_end = {} must be positive", cfg.t_end));
    }
    if !(cfg.stride > 0.0 && cfg.stride <= cfg.t_end) {
        return Err(format!("stride = {} must lie in (0, t_end]", cfg.stride));
    }
    if !command.inits().contains(&cfg.init.as_str()) {
        return Err(format!(
            "init {:?} is not available for {}; choose one of {}",
            cfg.init,
            command.name(),
            command.inits().join(", ")
        ));
    }
    Ok(cfg)
}
