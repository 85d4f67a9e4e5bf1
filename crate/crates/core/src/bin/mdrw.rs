use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdrw::experiments::{run, ExperimentConfig, ExperimentKind, LawSpec, PhiSpec};

/// Moderate deviations and local limits for coefficients of random matrix
/// products.
#[derive(Parser)]
#[command(name = "mdrw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Direct Monte Carlo estimate of λ₁ against the spectral γ₁.
    Lyapunov(Options),
    /// Spectral sanity checks, fitted cumulants and the perturbation identity.
    Cumulants(Options),
    /// Tilted Monte Carlo tail probabilities against the moderate deviation expansion.
    Mde(Options),
    /// Window probabilities against the local limit approximation.
    Llt(Options),
    /// Tail of log δ under the tilted chain.
    Regularity(Options),
    /// Exact enumeration: change-of-measure identity and oracle-vs-Monte-Carlo.
    Oracle(Options),
    /// Smoothing kernel, Fourier closed forms, sandwich and partition checks.
    Gadgets(Options),
}

#[derive(Args)]
struct Options {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in law: sl2_pair, diag_rot, diagonal, rational_rotation, irrational_rotation.
    #[arg(long, conflicts_with = "law")]
    preset: Option<String>,
    /// JSON file with a law `{"dim": .., "atoms": [{"m": .., "w": ..}]}`.
    #[arg(long)]
    law: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<f64>>,
    /// Number of paths; accepts forms like `1e6`.
    #[arg(long)]
    paths: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long, default_value = "mdrw-out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Target function: `one` or `cos2` (1 + cos 2θ / 2).
    #[arg(long)]
    phi: Option<String>,
    /// LLT window `a1,a2`.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Tilts for the regularity, perturbation and change-of-measure checks.
    #[arg(long = "s", value_delimiter = ',', allow_hyphen_values = true)]
    s_list: Option<Vec<f64>>,
    #[arg(long)]
    x_angle: Option<f64>,
    #[arg(long)]
    y_angle: Option<f64>,
    /// Use the norm cocycle in place of the coefficient.
    #[arg(long)]
    cocycle_only: bool,
}

fn count(value: f64, what: &str) -> Result<u64, String> {
    if value >= 1.0 && value.fract() == 0.0 && value <= 1e15 {
        Ok(value as u64)
    } else {
        Err(format!("{what} must be a positive integer, got {value}"))
    }
}

fn build_config(kind: ExperimentKind, o: Options) -> Result<ExperimentConfig, String> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::from_json_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind;
    if let Some(name) = o.preset {
        cfg.law = LawSpec::Preset(name);
    }
    if let Some(path) = o.law {
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.law = LawSpec::Inline(value);
    }
    if let Some(t) = o.t {
        cfg.t = t;
    }
    if let Some(n) = o.n {
        cfg.n = n.into_iter().map(|v| count(v, "n").map(|c| c as usize)).collect::<Result<_, _>>()?;
    }
    if let Some(paths) = o.paths {
        cfg.paths = count(paths, "paths")?;
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if o.grid.is_some() {
        cfg.grid = o.grid;
    }
    if let Some(s0) = o.s0 {
        cfg.s0 = s0;
    }
    cfg.out = Some(o.out);
    if o.threads.is_some() {
        cfg.threads = o.threads;
    }
    if let Some(phi) = o.phi {
        cfg.phi = Some(match phi.as_str() {
            "one" => PhiSpec::One,
            "cos2" => PhiSpec::Cos2,
            other => return Err(format!("unknown target function '{other}'")),
        });
    }
    if let Some(w) = o.window {
        match w.as_slice() {
            [a1, a2] => cfg.window = Some([*a1, *a2]),
            _ => return Err("window takes exactly two values a1,a2".into()),
        }
    }
    if let Some(eps) = o.eps {
        cfg.eps = eps;
    }
    if let Some(k) = o.k_max {
        cfg.k_max = k;
    }
    if let Some(s) = o.s_list {
        cfg.s_list = s;
    }
    if o.x_angle.is_some() {
        cfg.x_angle = o.x_angle;
    }
    if o.y_angle.is_some() {
        cfg.y_angle = o.y_angle;
    }
    cfg.cocycle_only |= o.cocycle_only;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, options) = match cli.command {
        Command::Lyapunov(o) => (ExperimentKind::Lyapunov, o),
        Command::Cumulants(o) => (ExperimentKind::Cumulants, o),
        Command::Mde(o) => (ExperimentKind::Mde, o),
        Command::Llt(o) => (ExperimentKind::Llt, o),
        Command::Regularity(o) => (ExperimentKind::Regularity, o),
        Command::Oracle(o) => (ExperimentKind::Oracle, o),
        Command::Gadgets(o) => (ExperimentKind::Gadgets, o),
    };
    let cfg = match build_config(kind, options) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("mdrw: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            for check in &outcome.checks {
                println!("{} {}: {}", if check.passed { "ok  " } else { "FAIL" }, check.name, check.detail);
            }
            if let Some(dir) = &cfg.out {
                println!("wrote {}", dir.display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("mdrw: {e}");
            ExitCode::from(2)
        }
    }
}
