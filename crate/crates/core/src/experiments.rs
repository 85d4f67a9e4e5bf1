//! Batch driver behind the `mdrw` binary: one [`ExperimentConfig`] in, a
//! summary, a results table, plot data and a list of pass/fail checks out.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cramer::{
    llt_theoretical, mde_theoretical, series_saddle, solve_saddle, CumulantData, Tail, DEFAULT_DEGREE,
    DEFAULT_STENCIL, MAX_SCALED_T,
};
use crate::error::{Error, Result};
use crate::linalg::{DualPoint, ProjectivePoint};
use crate::measures::{MatrixLaw, Preset};
use crate::montecarlo::{
    lyapunov_estimate, regularity_probe, run_paths, Sampler, TailEstimate, CSV_HEADER,
};
use crate::oracle::{enumerate, exact_expectation, verify_change_of_measure};
use crate::smoothing::{
    fourier_quadrature, make_kernel, partition, phi_plus, phi_plus_hat, psi_minus, psi_minus_hat,
    smoothing_sandwich_check, Shape,
};
use crate::montecarlo::Event;
use crate::stats::Accumulator;
use crate::transfer::{
    decay_profile, fit_decay, perturbed_eigenvalue, CircleGrid, GridFunction, SpectralData, SpectralSolver,
};

/// Angle of the functional whose kernel is the line through `(φ, 1)`.
pub const GOLDEN_KERNEL: f64 = 0.553_574_358_897_045_3 + std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lyapunov,
    #[default]
    Cumulants,
    Mde,
    Llt,
    Regularity,
    Oracle,
    Gadgets,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Cumulants => "cumulants",
            ExperimentKind::Mde => "mde",
            ExperimentKind::Llt => "llt",
            ExperimentKind::Regularity => "regularity",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Gadgets => "gadgets",
        }
    }
}

/// A preset name or an inline law `{"dim": 2, "atoms": [{"m": [[..]], "w": ..}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    Preset(String),
    Inline(Value),
}

impl LawSpec {
    pub fn resolve(&self) -> Result<MatrixLaw> {
        match self {
            LawSpec::Preset(name) => Ok(Preset::from_name(name)?.law()),
            LawSpec::Inline(v) => MatrixLaw::from_json(&v.to_string()),
        }
    }
}

/// Target function `φ` on the projective line, as a function of the angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSpec {
    /// `φ ≡ 1`.
    One,
    /// `φ(θ) = 1 + cos(2θ)/2`.
    Cos2,
}

impl PhiSpec {
    pub fn eval(self, theta: f64) -> f64 {
        match self {
            PhiSpec::One => 1.0,
            PhiSpec::Cos2 => 1.0 + 0.5 * (2.0 * theta).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub law: LawSpec,
    /// Fixed grid size; `None` doubles from 512 until `κ` settles to `1e-6`.
    pub grid: Option<usize>,
    /// Half-width of the cumulant stencil.
    pub s0: f64,
    pub stencil: usize,
    pub degree: usize,
    /// Empty lists fall back to per-experiment defaults.
    pub t: Vec<f64>,
    pub n: Vec<usize>,
    pub paths: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub phi: Option<PhiSpec>,
    /// LLT window `[a₁, a₂]`.
    pub window: Option<[f64; 2]>,
    /// Accepted range for MDE and LLT ratios.
    pub band: [f64; 2],
    /// Accepted range for ratios with a nonconstant `φ`.
    pub phi_band: [f64; 2],
    pub eps: f64,
    pub k_max: usize,
    /// Tilts for the regularity probe, the perturbation check and the
    /// change-of-measure check.
    pub s_list: Vec<f64>,
    pub x_angle: Option<f64>,
    pub y_angle: Option<f64>,
    pub cocycle_only: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::default(),
            law: LawSpec::Preset("sl2_pair".into()),
            grid: None,
            s0: 0.5,
            stencil: DEFAULT_STENCIL,
            degree: DEFAULT_DEGREE,
            t: vec![],
            n: vec![],
            paths: 100_000,
            seed: 1,
            out: None,
            threads: None,
            phi: None,
            window: None,
            band: [0.8, 1.2],
            phi_band: [0.75, 1.25],
            eps: 0.5,
            k_max: 12,
            s_list: vec![],
            x_angle: None,
            y_angle: None,
            cocycle_only: false,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self { experiment, ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn t_list(&self) -> Vec<f64> {
        if !self.t.is_empty() {
            return self.t.clone();
        }
        match self.experiment {
            ExperimentKind::Mde => vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
            ExperimentKind::Llt => vec![0.0, 1.0, 2.0],
            ExperimentKind::Oracle => vec![-0.5, 0.0, 0.5, 1.0],
            _ => vec![0.0],
        }
    }

    pub fn n_list(&self) -> Vec<usize> {
        if !self.n.is_empty() {
            return self.n.clone();
        }
        match self.experiment {
            ExperimentKind::Lyapunov => vec![10_000],
            ExperimentKind::Mde | ExperimentKind::Llt => vec![1000],
            ExperimentKind::Regularity => vec![100],
            ExperimentKind::Oracle => vec![6],
            _ => vec![],
        }
    }

    pub fn tilts(&self) -> Vec<f64> {
        if !self.s_list.is_empty() {
            return self.s_list.clone();
        }
        match self.experiment {
            ExperimentKind::Oracle => vec![-0.3, 0.3],
            _ => vec![-0.1, 0.0, 0.1],
        }
    }

    /// Start line `x`; the diagonal `(1, 1)/√2` unless set.
    pub fn start(&self) -> ProjectivePoint {
        ProjectivePoint::from_angle(self.x_angle.unwrap_or(FRAC_PI_4))
    }

    /// Target functional `y`, `f = (1, 1)/√2` unless set. The regularity
    /// probe defaults to `ker f` along `(φ, 1)`, `φ` the golden ratio: a
    /// quadratic irrational, where the stationary measure of `sl2_pair` has
    /// a finite local dimension. At the rational direction `(1, 1)` the same
    /// measure is flatter than any power and the decay is super-exponential.
    pub fn target(&self) -> DualPoint {
        let default = if self.experiment == ExperimentKind::Regularity { GOLDEN_KERNEL } else { FRAC_PI_4 };
        DualPoint::from_angle(self.y_angle.unwrap_or(default))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.s0 > 0.0 && self.s0 <= 3.0) {
            return fail(format!("s0 must lie in (0, 3], got {}", self.s0));
        }
        if self.paths == 0 {
            return fail("paths must be positive".into());
        }
        if self.band[0] >= self.band[1] || self.phi_band[0] >= self.phi_band[1] {
            return fail("acceptance bands must be increasing".into());
        }
        if let Some([a1, a2]) = self.window {
            if !(a1 < a2) {
                return fail(format!("window [{a1}, {a2}] is empty"));
            }
        }
        if let Some(grid) = self.grid {
            if grid < 16 {
                return fail(format!("grid size {grid} is too small"));
            }
        }
        if self.experiment != ExperimentKind::Gadgets {
            self.law.resolve()?;
        }
        if self.n_list().contains(&0) {
            return fail("n must be positive".into());
        }
        if matches!(self.experiment, ExperimentKind::Mde | ExperimentKind::Llt) {
            for &n in &self.n_list() {
                for &t in &self.t_list() {
                    if self.experiment == ExperimentKind::Mde && t < 0.0 {
                        return fail(format!("mde levels must be nonnegative, got t = {t}"));
                    }
                    let tau = t.abs() / (n as f64).sqrt();
                    if tau > MAX_SCALED_T + 1e-12 {
                        return fail(format!("|t|/√n = {tau:.4} exceeds {MAX_SCALED_T} at t = {t}, n = {n}"));
                    }
                }
            }
        }
        if self.experiment == ExperimentKind::Oracle && self.n_list().iter().any(|&n| n > 6) {
            return fail("oracle runs are limited to n ≤ 6".into());
        }
        Ok(())
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub t: f64,
    pub n: usize,
    pub estimate: TailEstimate,
    pub theory: f64,
}

impl ResultRow {
    pub fn ratio(&self) -> f64 {
        self.estimate.estimate / self.theory
    }

    pub fn csv(&self) -> String {
        crate::montecarlo::csv_row(&self.experiment, self.t, self.n, &self.estimate, self.theory)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub summary: Value,
    pub rows: Vec<ResultRow>,
    /// File stem → `(t, ratio)` points.
    pub plots: BTreeMap<String, Vec<(f64, f64)>>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn new() -> Self {
        Self { summary: json!({}), rows: vec![], plots: BTreeMap::new(), checks: vec![] }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    fn row(&mut self, experiment: &str, t: f64, n: usize, estimate: TailEstimate, theory: f64) {
        self.rows.push(ResultRow { experiment: experiment.into(), t, n, estimate, theory });
    }

    fn plot(&mut self, stem: String, t: f64, ratio: f64) {
        self.plots.entry(stem).or_default().push((t, ratio));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv());
            out.push('\n');
        }
        out
    }

    /// Writes `summary.json`, `results.csv` and `plotdata/*.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let plot_dir = dir.join("plotdata");
        std::fs::create_dir_all(&plot_dir)?;
        let mut summary = self.summary.clone();
        summary["checks"] = serde_json::to_value(&self.checks)?;
        summary["passed"] = json!(self.passed());
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
        std::fs::write(dir.join("results.csv"), self.results_csv())?;
        for (stem, points) in &self.plots {
            let mut text = String::from("t,ratio\n");
            for (t, r) in points {
                let _ = writeln!(text, "{t},{r:.6}");
            }
            std::fs::write(plot_dir.join(format!("{stem}.csv")), text)?;
        }
        Ok(())
    }
}

/// Law, spectral solver and fitted cumulants shared by the experiments.
#[derive(Debug, Clone)]
pub struct Context {
    pub law: MatrixLaw,
    pub solver: SpectralSolver,
    pub cd: CumulantData,
    pub x: ProjectivePoint,
    pub y: DualPoint,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let law = cfg.law.resolve()?;
        let solver = match cfg.grid {
            Some(size) => SpectralSolver::new(&law, CircleGrid::new(size)?)?,
            None => SpectralSolver::converged(&law, &[-cfg.s0, cfg.s0], CircleGrid::DEFAULT_SIZE, 8192, 1e-6)?,
        };
        let cd = CumulantData::from_solver(&solver, cfg.s0, cfg.stencil, cfg.degree)?;
        Ok(Self { law, solver, cd, x: cfg.start(), y: cfg.target() })
    }

    /// Saddle point of `Λ'(s) − Λ'(0) = ±σt/√n`, with the residual of the
    /// equation it solved. Inside the stencil the fit is used; beyond it
    /// the discretized operator is solved directly.
    pub fn saddle(&self, t: f64, n: u64, tail: Tail) -> Result<(f64, f64, &'static str)> {
        if let Ok(s) = solve_saddle(&self.cd, t, n, tail) {
            let target = tail.sign() * self.cd.sigma() * t / (n as f64).sqrt();
            let residual = (self.cd.lambda_prime(s) - self.cd.gamma[0] - target).abs();
            return Ok((s, residual, "fit"));
        }
        let (s, residual) = spectral_saddle(&self.solver, &self.cd, t, n, tail)?;
        Ok((s, residual, "spectral"))
    }

    /// `ν̂(φ)` under the stationary measure of the grid.
    pub fn nu_of(&self, phi: PhiSpec) -> f64 {
        let grid = self.solver.grid();
        GridFunction::from_fn(grid, |th| phi.eval(th)).integrate(self.solver.stationary())
    }

    pub fn summary(&self) -> Value {
        let cd = &self.cd;
        let kappa_table: Vec<Value> = cd.stencil.iter().map(|(s, l)| json!({"s": s, "kappa": l.exp()})).collect();
        let gap = self.solver.at(0.0).map(|d| d.gap).unwrap_or(f64::NAN);
        json!({
            "dim": self.law.dim(),
            "atoms": self.law.len(),
            "grid_size": self.solver.grid().len(),
            "lambda1": cd.gamma[0],
            "sigma2": cd.gamma[1],
            "sigma": cd.sigma(),
            "gamma": cd.gamma,
            "gamma3": cd.gamma[2],
            "gamma4": cd.gamma[3],
            "gamma5": cd.gamma[4],
            "stencil_radius": cd.s0,
            "fit_residual": cd.fit_residual,
            "zeta_coefficients": zeta_coefficients(cd),
            "kappa_table": kappa_table,
            "gap": gap,
        })
    }
}

/// The three coefficients of the truncated Cramér series `ζ(t) = c₀ + c₁t + c₂t²`.
pub fn zeta_coefficients(cd: &CumulantData) -> [f64; 3] {
    let [_, g2, g3, g4, g5] = cd.gamma;
    [
        g3 / (6.0 * g2.powf(1.5)),
        (g4 * g2 - 3.0 * g3 * g3) / (24.0 * g2.powi(3)),
        (g5 * g2 * g2 - 10.0 * g4 * g3 * g2 + 15.0 * g3.powi(3)) / (120.0 * g2.powf(4.5)),
    ]
}

/// Newton iteration on the discretized `Λ'` for saddles outside the fit,
/// bracketed by bisection.
fn spectral_saddle(solver: &SpectralSolver, cd: &CumulantData, t: f64, n: u64, tail: Tail) -> Result<(f64, f64)> {
    let g1 = solver.lambda_prime(0.0)?;
    let target = tail.sign() * cd.sigma() * t / (n as f64).sqrt();
    let f = |s: f64| solver.lambda_prime(s).map(|d| d - g1 - target);
    let (mut lo, mut hi) = match tail {
        Tail::Upper => (0.0, cd.s0),
        Tail::Lower => (-cd.s0, 0.0),
    };
    let mut grow = 0;
    while (tail == Tail::Upper && f(hi)? < 0.0) || (tail == Tail::Lower && f(lo)? > 0.0) {
        grow += 1;
        if grow > 6 {
            return Err(Error::NoConvergence { iterations: grow, residual: f64::NAN });
        }
        match tail {
            Tail::Upper => hi *= 2.0,
            Tail::Lower => lo *= 2.0,
        }
    }
    let mut s = series_saddle(cd, t, n, tail).clamp(lo, hi);
    let mut fs = f(s)?;
    for _ in 0..60 {
        if fs.abs() < 1e-12 {
            break;
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let h = 1e-3;
        let slope = (solver.lambda_prime(s + h)? - solver.lambda_prime(s - h)?) / (2.0 * h);
        let mut next = s - fs / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        s = next;
        fs = f(s)?;
    }
    Ok((s, fs.abs()))
}

/// Runs the configured experiment, on a dedicated pool if `threads` is
/// set, and writes the artifacts when `out` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let outcome = match cfg.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| execute(cfg))?,
        None => execute(cfg)?,
    };
    if let Some(dir) = &cfg.out {
        outcome.write(dir)?;
    }
    Ok(outcome)
}

/// Runs the configured experiment without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut outcome = match cfg.experiment {
        ExperimentKind::Gadgets => gadgets(cfg)?,
        kind => {
            let ctx = Context::new(cfg)?;
            let mut outcome = match kind {
                ExperimentKind::Lyapunov => lyapunov(cfg, &ctx)?,
                ExperimentKind::Cumulants => cumulants(cfg, &ctx)?,
                ExperimentKind::Mde => mde(cfg, &ctx)?,
                ExperimentKind::Llt => llt(cfg, &ctx)?,
                ExperimentKind::Regularity => regularity(cfg, &ctx)?,
                ExperimentKind::Oracle => oracle(cfg, &ctx)?,
                ExperimentKind::Gadgets => unreachable!(),
            };
            let extra = std::mem::take(&mut outcome.summary);
            outcome.summary = ctx.summary();
            outcome.summary["s0"] = json!(cfg.s0);
            merge(&mut outcome.summary, extra);
            outcome
        }
    };
    let mut config = serde_json::to_value(cfg)?;
    if let Some(obj) = config.as_object_mut() {
        obj.remove("out");
        obj.remove("threads");
    }
    outcome.summary["experiment"] = json!(cfg.experiment.name());
    outcome.summary["config"] = config;
    Ok(outcome)
}

fn merge(into: &mut Value, extra: Value) {
    if let (Some(a), Value::Object(b)) = (into.as_object_mut(), extra) {
        a.extend(b);
    }
}

fn lyapunov(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::new();
    let coarse = SpectralSolver::new(&ctx.law, CircleGrid::new(ctx.solver.grid().len() / 2)?)?;
    let coarse_g1 = CumulantData::from_solver(&coarse, cfg.s0, cfg.stencil, cfg.degree)?.gamma[0];
    let grid_error = (coarse_g1 - ctx.cd.gamma[0]).abs();
    let mut runs = vec![];
    for &n in &cfg.n_list() {
        let burn_in = (n / 10).max(1).min(n - 1);
        let est = lyapunov_estimate(&ctx.law, n, burn_in, &ctx.x, cfg.paths, cfg.seed)?;
        let gamma1 = ctx.cd.gamma[0];
        let tol = 4.0 * est.stderr + grid_error + 1e-9;
        let agree = (est.estimate - gamma1).abs() <= tol;
        out.check(format!("lyapunov_n{n}"), agree, format!("estimate {:.8} vs γ₁ {gamma1:.8}, tolerance {tol:.2e}", est.estimate));
        runs.push(json!({"n": n, "burn_in": burn_in, "estimate": est.estimate, "stderr": est.stderr, "agree": agree}));
        out.row("lyapunov", 0.0, n, est, gamma1);
    }
    let agree = out.passed();
    out.summary = json!({
        "lyapunov": {
            "runs": runs,
            "gamma1": ctx.cd.gamma[0],
            "grid_error": grid_error,
            "agree": agree,
        }
    });
    Ok(out)
}

fn cumulants(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::new();
    let cd = &ctx.cd;
    let at0 = ctx.solver.at(0.0)?;
    let r_dev = at0.r.values().iter().fold(0.0_f64, |m, v| m.max((v - 1.0).abs()));
    out.check("kappa0", (at0.kappa - 1.0).abs() < 1e-8, format!("κ(0) − 1 = {:.2e}", at0.kappa - 1.0));
    out.check("r0", r_dev < 1e-6, format!("max |r̂₀ − 1| = {r_dev:.2e}"));
    let mut residual: f64 = 0.0;
    let mut edges = vec![];
    for s in [-cd.s0, cd.s0] {
        let d = ctx.solver.at(s)?;
        residual = residual.max(d.residual);
        edges.push(d.to_json(false));
    }
    residual = residual.max(at0.residual);
    out.check("eigen_residual", residual < 1e-8, format!("worst residual {residual:.2e}"));
    let second = min_second_divided_difference(&cd.stencil);
    let convex = second > -1e-10 && cd.min_curvature() > 0.0;
    out.check("convexity", convex, format!("min second divided difference {second:.3e}, min Λ'' {:.3e}", cd.min_curvature()));
    out.check("fit_residual", cd.fit_residual < 1e-8, format!("{:.2e}", cd.fit_residual));

    let mut perturbation = vec![];
    let mut worst: f64 = 0.0;
    for &s in &cfg.tilts() {
        if s.abs() + 0.1 > cd.s0 {
            continue;
        }
        let spec = ctx.solver.at(s)?;
        let lp = cd.lambda_prime(s);
        for u in [-0.1, -0.05, 0.05, 0.1] {
            let lam = perturbed_eigenvalue(&ctx.law, &spec, u, lp)?;
            let z = Complex64::new(s, u);
            let predicted = (cd.lambda_complex(z) - cd.lambda(s) - Complex64::new(0.0, u * lp)).exp();
            let rel = (lam - predicted).norm() / lam.norm();
            worst = worst.max(rel);
            perturbation.push(json!({"s": s, "u": u, "re": lam.re, "im": lam.im, "relative_error": rel}));
        }
    }
    out.check("perturbation", worst < 1e-4, format!("worst relative error {worst:.2e}"));
    let profile = decay_profile(&ctx.solver, 0.0, 1.0, 40)?;
    let decay = fit_decay(&profile, 5..=40);

    out.plots.insert("lambda".into(), cd.stencil.clone());
    out.summary = json!({
        "kappa0": at0.kappa,
        "r0_deviation": r_dev,
        "eigen_residual": residual,
        "edge_spectra": edges,
        "min_second_difference": second,
        "cumulants": cd.to_json(),
        "perturbation": perturbation,
        "decay_u1": decay,
    });
    Ok(out)
}

fn min_second_divided_difference(stencil: &[(f64, f64)]) -> f64 {
    let mut pts = stencil.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(3)
        .map(|w| {
            let d1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let d2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            2.0 * (d2 - d1) / (w[2].0 - w[0].0)
        })
        .fold(f64::INFINITY, f64::min)
}

/// One observable evaluated on shared paths: the centred coefficient
/// compared against `sign·√nσt`.
#[derive(Debug, Clone, Copy)]
struct Probe {
    event: Event,
    t: f64,
    phi: Option<PhiSpec>,
}

fn simulate(cfg: &ExperimentConfig, ctx: &Context, n: usize, tilt: Option<&SpectralData>, probes: &[Probe]) -> Result<Vec<TailEstimate>> {
    let sampler = match tilt {
        Some(spec) => Sampler::tilted(&ctx.law, spec, n, ctx.x.clone(), ctx.y.clone())?,
        None => Sampler::direct(&ctx.law, n, ctx.x.clone(), ctx.y.clone())?,
    };
    let centre = n as f64 * ctx.cd.lyapunov();
    let scale = (n as f64).sqrt() * ctx.cd.sigma();
    let cocycle_only = cfg.cocycle_only;
    let accs: Vec<Accumulator> = run_paths(&sampler, cfg.paths, cfg.seed, probes.len(), |path, slots| {
        let x = if cocycle_only { path.final_cocycle } else { path.coefficient() } - centre;
        let weight = path.log_weight.exp();
        let angle = path.final_point.angle();
        for (p, slot) in probes.iter().zip(slots.iter_mut()) {
            let shift = scale * p.t;
            let hit = match p.event {
                Event::Upper => x >= shift,
                Event::Lower => x <= -shift,
                Event::Window { a1, a2 } => (a1..=a2).contains(&(x - shift)),
            };
            *slot = if hit { weight * p.phi.map_or(1.0, |f| f.eval(angle)) } else { 0.0 };
        }
    });
    Ok(accs.iter().map(TailEstimate::from_accumulator).collect())
}

struct Tolerance {
    band: [f64; 2],
}

impl Tolerance {
    fn holds(&self, ratio: f64) -> bool {
        ratio >= self.band[0] && ratio <= self.band[1]
    }
}

fn record(out: &mut Outcome, name: &str, t: f64, n: usize, est: TailEstimate, theory: f64, tol: &Tolerance, details: &mut Vec<Value>) {
    let ratio = est.estimate / theory;
    let z = est.z_score(theory);
    out.check(
        format!("{name}_t{t}_n{n}"),
        tol.holds(ratio) && !est.unreliable,
        format!("ratio {ratio:.4} (z = {z:.2}, ess = {:.0}), band [{}, {}]", est.ess, tol.band[0], tol.band[1]),
    );
    details.push(json!({"experiment": name, "t": t, "n": n, "ratio": ratio, "z": z, "ess": est.ess, "unreliable": est.unreliable}));
    out.plot(format!("{name}_n{n}"), t, ratio);
    out.row(name, t, n, est, theory);
}

fn mde(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::new();
    let phi = cfg.phi.filter(|p| *p != PhiSpec::One);
    let nu_phi = phi.map(|p| ctx.nu_of(p));
    let band = Tolerance { band: cfg.band };
    let phi_band = Tolerance { band: cfg.phi_band };
    let mut details = vec![];
    let mut saddles = vec![];
    for &n in &cfg.n_list() {
        for &t in &cfg.t_list() {
            let tails: Vec<Tail> = if t == 0.0 { vec![Tail::Upper] } else { vec![Tail::Upper, Tail::Lower] };
            for tail in tails {
                let spec = if t == 0.0 {
                    None
                } else {
                    let (s, residual, source) = ctx.saddle(t, n as u64, tail)?;
                    let limit = if source == "fit" { 1e-12 } else { 1e-9 };
                    out.check(format!("saddle_{tail:?}_t{t}_n{n}").to_lowercase(), residual < limit, format!("s = {s:.6} ({source}), residual {residual:.2e}"));
                    saddles.push(json!({"t": t, "n": n, "tail": format!("{tail:?}").to_lowercase(), "s": s, "residual": residual, "source": source}));
                    Some(ctx.solver.at(s)?)
                };
                let events: Vec<(Event, &str)> = if t == 0.0 {
                    vec![(Event::Upper, "mde_upper"), (Event::Lower, "mde_lower")]
                } else if tail == Tail::Upper {
                    vec![(Event::Upper, "mde_upper")]
                } else {
                    vec![(Event::Lower, "mde_lower")]
                };
                let mut probes = vec![];
                for (event, _) in &events {
                    probes.push(Probe { event: *event, t, phi: None });
                    if let Some(p) = phi {
                        probes.push(Probe { event: *event, t, phi: Some(p) });
                    }
                }
                let signed = tail.sign() * t;
                if let Some([a1, a2]) = cfg.window {
                    probes.push(Probe { event: Event::Window { a1, a2 }, t: signed, phi: None });
                }
                let estimates = simulate(cfg, ctx, n, spec.as_ref(), &probes)?;
                let mut it = estimates.into_iter();
                for (event, name) in &events {
                    let theory_tail = if *event == Event::Upper { Tail::Upper } else { Tail::Lower };
                    let theory = mde_theoretical(&ctx.cd, t, n as u64, theory_tail)?;
                    record(&mut out, name, t, n, it.next().unwrap(), theory, &band, &mut details);
                    if let (Some(_), Some(nu)) = (phi, nu_phi) {
                        record(&mut out, &format!("{name}_phi"), t, n, it.next().unwrap(), nu * theory, &phi_band, &mut details);
                    }
                }
                if let Some([a1, a2]) = cfg.window {
                    let theory = llt_theoretical(&ctx.cd, signed, n as u64, a1, a2)?;
                    record(&mut out, "llt", signed, n, it.next().unwrap(), theory, &band, &mut details);
                }
            }
        }
    }
    out.summary = json!({"saddles": saddles, "rows": details, "nu_phi": nu_phi});
    Ok(out)
}

fn llt(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::new();
    let [a1, a2] = cfg.window.unwrap_or([-1.0, 1.0]);
    let phi = cfg.phi.filter(|p| *p != PhiSpec::One);
    let nu_phi = phi.map(|p| ctx.nu_of(p));
    let band = Tolerance { band: cfg.band };
    let phi_band = Tolerance { band: cfg.phi_band };
    let mut details = vec![];
    let mut saddles = vec![];
    for &n in &cfg.n_list() {
        for &t in &cfg.t_list() {
            let tail = if t < 0.0 { Tail::Lower } else { Tail::Upper };
            let spec = if t == 0.0 {
                None
            } else {
                let (s, residual, source) = ctx.saddle(t.abs(), n as u64, tail)?;
                saddles.push(json!({"t": t, "n": n, "s": s, "residual": residual, "source": source}));
                Some(ctx.solver.at(s)?)
            };
            let mut probes = vec![Probe { event: Event::Window { a1, a2 }, t, phi: None }];
            if let Some(p) = phi {
                probes.push(Probe { event: Event::Window { a1, a2 }, t, phi: Some(p) });
            }
            let estimates = simulate(cfg, ctx, n, spec.as_ref(), &probes)?;
            let theory = llt_theoretical(&ctx.cd, t, n as u64, a1, a2)?;
            record(&mut out, "llt", t, n, estimates[0], theory, &band, &mut details);
            if let (Some(nu), Some(est)) = (nu_phi, estimates.get(1)) {
                record(&mut out, "llt_phi", t, n, *est, nu * theory, &phi_band, &mut details);
            }
        }
    }
    out.summary = json!({"window": [a1, a2], "saddles": saddles, "rows": details, "nu_phi": nu_phi});
    Ok(out)
}

fn regularity(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::new();
    let n = cfg.n_list()[0];
    let mut probes = vec![];
    for &s in &cfg.tilts() {
        let spec = ctx.solver.at(s)?;
        let probe = regularity_probe(&ctx.law, &spec, n, &ctx.x, &ctx.y, cfg.eps, cfg.k_max, cfg.paths, cfg.seed)?;
        let stem = format!("regularity_s{s:+}");
        for &(k, p) in &probe.points {
            let stderr = (p * (1.0 - p) / cfg.paths as f64).sqrt();
            let est = TailEstimate { estimate: p, stderr, n_samples: cfg.paths, ess: cfg.paths as f64, unreliable: false };
            let fitted = probe.fit.map_or(f64::NAN, |f| (f.intercept + f.slope * k as f64).exp());
            out.rows.push(ResultRow { experiment: stem.clone(), t: k as f64, n, estimate: est, theory: fitted });
            if p > 0.0 {
                out.plot(stem.clone(), k as f64, p.ln());
            }
        }
        let (passed, detail) = match probe.fit {
            Some(f) => (f.slope < -0.05 && f.r_squared > 0.9, format!("slope {:.4}, R² {:.4}", f.slope, f.r_squared)),
            None => (false, "too few positive frequencies to fit".into()),
        };
        out.check(format!("regularity_s{s}"), passed, detail);
        probes.push(serde_json::to_value(&probe)?);
    }
    out.summary = json!({"regularity": probes, "eps": cfg.eps, "k_max": cfg.k_max, "n": n});
    Ok(out)
}

fn oracle(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::new();
    let grid = ctx.solver.grid();
    let mut reports = vec![];
    let mut worst: f64 = 0.0;
    let ns = cfg.n_list();
    for &s in &cfg.tilts() {
        let spectral = ctx.solver.at(s)?.r;
        let candidates = [
            ("spectral", spectral),
            ("constant", GridFunction::constant(grid, 2.0)),
            ("wavy", GridFunction::from_fn(grid, |th| 1.2 + (3.0 * th).sin())),
        ];
        for (label, r) in &candidates {
            for n in 1..=*ns.iter().max().unwrap_or(&6) {
                let report = verify_change_of_measure(&ctx.law, s, r, n, &ctx.x)?;
                worst = worst.max(report.max_discrepancy());
                reports.push(json!({"s": s, "r": label, "n": n, "report": report}));
            }
        }
    }
    out.check("change_of_measure", worst < 1e-12, format!("worst discrepancy {worst:.2e}"));

    let mut mc = vec![];
    for &n in &ns {
        let table = enumerate(&ctx.law, n, &ctx.x, &ctx.y)?;
        let mass = table.total_probability();
        out.check(format!("mass_n{n}"), (mass - 1.0).abs() < 1e-12, format!("total probability {mass}"));
        let sampler = Sampler::direct(&ctx.law, n, ctx.x.clone(), ctx.y.clone())?;
        let (l1, sigma) = (ctx.cd.lyapunov(), ctx.cd.sigma());
        let shift = (n as f64).sqrt() * sigma;
        let ts = cfg.t_list();
        let accs = run_paths(&sampler, cfg.paths, cfg.seed, ts.len(), |path, slots| {
            let x = path.coefficient() - n as f64 * l1;
            for (t, slot) in ts.iter().zip(slots.iter_mut()) {
                *slot = f64::from(u8::from(x >= shift * t));
            }
        });
        for (t, acc) in ts.iter().zip(&accs) {
            let exact = exact_expectation(&table, &|_| 1.0, Event::Upper, l1, sigma, *t);
            let est = TailEstimate::from_accumulator(acc);
            let z = if est.stderr > 0.0 { est.z_score(exact) } else { 0.0 };
            let consistent = if est.stderr > 0.0 { z.abs() <= 4.0 } else { (est.estimate - exact).abs() < 1e-12 };
            out.check(format!("oracle_mc_t{t}_n{n}"), consistent, format!("MC {:.6} vs exact {exact:.6}, z = {z:.2}", est.estimate));
            mc.push(json!({"t": t, "n": n, "exact": exact, "estimate": est.estimate, "stderr": est.stderr, "z": z}));
            out.row("oracle_upper", *t, n, est, exact);
        }
    }
    out.summary = json!({"change_of_measure": {"max_discrepancy": worst, "runs": reports}, "oracle_vs_mc": mc});
    Ok(out)
}

fn gadgets(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new();

    let mut transform_error: f64 = 0.0;
    let (s, eps) = (0.1, 0.05);
    for u in [0.0, 1.0, -3.0, 10.0, 50.0] {
        let q = fourier_quadrature(&|w| psi_minus(s, eps, w).unwrap_or(0.0), &[eps, eps + 40.0 / s], u, 1e-11);
        transform_error = transform_error.max((q - psi_minus_hat(s, eps, u)?).norm());
        let q = fourier_quadrature(&|w| phi_plus(-s, eps, w).unwrap_or(0.0), &[-eps - 40.0 / s, -eps, eps], u, 1e-11);
        transform_error = transform_error.max((q - phi_plus_hat(-s, eps, u)?).norm());
    }
    out.check("fourier_closed_forms", transform_error < 1e-6, format!("worst error {transform_error:.2e}"));

    let grid: Vec<f64> = (0..=40).map(|i| -0.5 + i as f64 * 0.05).collect();
    let shapes = [
        ("zero", Shape::Zero),
        ("indicator", Shape::Indicator { a: 0.0, b: 1.0 }),
        ("one_sided", Shape::OneSided { s: 0.7 }),
    ];
    let mut sandwich = vec![];
    let mut fitted = vec![];
    for eps in [0.2, 0.1, 0.05] {
        for (label, shape) in &shapes {
            let report = smoothing_sandwich_check(shape, eps, &grid)?;
            out.check(
                format!("sandwich_{label}_eps{eps}"),
                report.max_violation <= 1e-9,
                format!("max violation {:.2e}", report.max_violation),
            );
            if matches!(shape, Shape::Indicator { .. }) {
                fitted.push((eps, report.c_rho, report.fitted_c));
                out.plot("c_rho".into(), eps, report.c_rho);
            }
            sandwich.push(json!({"shape": label, "eps": eps, "c_rho": report.c_rho, "fitted_c": report.fitted_c, "max_violation": report.max_violation}));
        }
    }
    let decreasing = fitted.windows(2).all(|w| w[1].1 < w[0].1 && w[1].2 <= w[0].2);
    out.check("c_rho_decreasing", decreasing, format!("{fitted:?}"));

    let kernel = make_kernel(cfg.eps.min(0.9))?;
    let fam = partition(0.3, 0.5, DualPoint::from_angle(0.4))?;
    let mut sum_error: f64 = 0.0;
    let mut window_ok = true;
    for i in 0..10_000 {
        // a low-discrepancy sweep of the projective line
        let theta = ((i as f64 + 0.5) * 0.618_033_988_749_894_9).fract() * PI;
        let x = ProjectivePoint::from_angle(theta);
        let total: f64 = (0..400).map(|k| fam.chi(k, &x)).sum();
        sum_error = sum_error.max((total - 1.0).abs());
        let depth = -crate::linalg::delta(&fam.y, &x).ln();
        for k in 0..40 {
            if fam.chi(k, &x) != 0.0 {
                let (lo, hi) = fam.support_window(k);
                window_ok &= depth >= lo && depth <= hi;
            }
        }
    }
    out.check("partition_sum", sum_error < 1e-12, format!("worst |Σχ_k − 1| = {sum_error:.2e}"));
    out.check("partition_support", window_ok, "support windows on 10⁴ points");
    let envelope = fam.hoelder_envelope(8)?;

    out.summary = json!({
        "fourier_error": transform_error,
        "sandwich": sandwich,
        "kernel": {"eps": kernel.eps, "total_mass": kernel.total_mass(), "lipschitz": kernel.lipschitz()},
        "partition_sum_error": sum_error,
        "hoelder": {"norms": envelope.norms, "fitted_c": envelope.fitted_c},
    });
    Ok(out)
}

/// `ζ(τ)` from the coefficients stored in `summary.json`.
pub fn zeta_from_summary(coefficients: [f64; 3], tau: f64) -> f64 {
    coefficients[0] + coefficients[1] * tau + coefficients[2] * tau * tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cramer::zeta;

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "mde", "law": "diag_rot", "t": [0, 1], "n": [400]}"#).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Mde);
        assert!(cfg.validate().is_ok());
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let bad = ExperimentConfig { t: vec![5.0], n: vec![100], ..cfg.clone() };
        assert!(bad.validate().is_err());
        let unknown = ExperimentConfig { law: LawSpec::Preset("nope".into()), ..cfg };
        assert!(unknown.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn inline_law() {
        let cfg = ExperimentConfig::from_json(
            r#"{"law": {"dim": 2, "atoms": [{"m": [[2, 0], [0, 0.5]], "w": 1.0}]}, "experiment": "gadgets"}"#,
        )
        .unwrap();
        assert_eq!(cfg.law.resolve().unwrap().len(), 1);
    }

    #[test]
    fn phi_mean_under_uniform_like_measure() {
        assert_eq!(PhiSpec::One.eval(0.3), 1.0);
        assert!((PhiSpec::Cos2.eval(0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn summary_reproduces_theory_column() {
        let cfg = ExperimentConfig { law: LawSpec::Preset("diag_rot".into()), grid: Some(256), ..ExperimentConfig::default() };
        let ctx = Context::new(&cfg).unwrap();
        let summary = ctx.summary();
        let coeffs: [f64; 3] = serde_json::from_value(summary["zeta_coefficients"].clone()).unwrap();
        let sigma = summary["sigma"].as_f64().unwrap();
        let (t, n) = (1.5_f64, 400_u64);
        let tau = t / (n as f64).sqrt();
        let from_summary = ((t.powi(3) / (n as f64).sqrt()) * zeta_from_summary(coeffs, tau)).exp()
            * crate::stats::normal_upper_tail(t);
        let direct = mde_theoretical(&ctx.cd, t, n, Tail::Upper).unwrap();
        assert!((from_summary - direct).abs() < 1e-14 * direct);
        assert!((sigma - 1.0).abs() < 1e-4);
        assert!((zeta(&ctx.cd, 0.07).unwrap() - zeta_from_summary(coeffs, 0.07)).abs() < 1e-14);
    }

    #[test]
    fn cumulants_checks_pass_on_presets() {
        for preset in ["diag_rot", "sl2_pair"] {
            let cfg = ExperimentConfig { law: LawSpec::Preset(preset.into()), grid: Some(512), ..ExperimentConfig::default() };
            let outcome = execute(&cfg).unwrap();
            assert!(outcome.passed(), "{preset}: {:?}", outcome.failures());
        }
    }

    #[test]
    fn results_are_seed_deterministic() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Mde,
            law: LawSpec::Preset("diag_rot".into()),
            grid: Some(256),
            t: vec![0.0, 1.0],
            n: vec![100],
            paths: 5000,
            seed: 9,
            ..ExperimentConfig::default()
        };
        let a = execute(&cfg).unwrap().results_csv();
        let b = execute(&ExperimentConfig { threads: Some(1), ..cfg.clone() }).unwrap().results_csv();
        assert_eq!(a, b);
        let c = execute(&ExperimentConfig { seed: 10, ..cfg }).unwrap().results_csv();
        assert_ne!(a, c);
    }
}
