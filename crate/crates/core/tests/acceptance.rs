//! Acceptance suite: one line per criterion, exit status 1 if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 2 3`. `MDRW_ACCEPTANCE_PATHS`
//! overrides the 10⁶ paths of criteria 6 to 8.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde_json::Value;

use mdrw::cramer::{chebyshev_stencil, rate_series, series_saddle, solve_saddle, zeta, CumulantData, Tail};
use mdrw::experiments::{self, Context, ExperimentConfig, ExperimentKind, LawSpec, Outcome, PhiSpec};
use mdrw::measures::{MatrixLaw, Preset};
use mdrw::transfer::{decay_profile, fit_decay, perturbed_eigenvalue, CircleGrid, SpectralSolver};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

const PRESETS: [Preset; 2] = [Preset::Sl2Pair, Preset::DiagRot];

fn solver(law: &MatrixLaw, size: usize) -> SpectralSolver {
    SpectralSolver::new(law, CircleGrid::new(size).unwrap()).unwrap()
}

/// Stencil half-width per preset: `Λ` of `sl2_pair` is analytic well past
/// `s = 1`, and its small variance pushes moderate-deviation saddles there.
fn s0_for(preset: Preset) -> f64 {
    match preset {
        Preset::Sl2Pair => 1.0,
        _ => 0.5,
    }
}

fn context(preset: Preset) -> Context {
    let cfg = ExperimentConfig { law: LawSpec::Preset(preset.name().into()), s0: s0_for(preset), ..ExperimentConfig::default() };
    Context::new(&cfg).unwrap()
}

fn c1_tilting_identity() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_mdrw");
    let dir = tempfile::tempdir().unwrap();
    let clock = Instant::now();
    let mut worst: f64 = 0.0;
    let mut notes = vec![];
    for preset in PRESETS {
        let out = dir.path().join(preset.name());
        let status = Command::new(bin)
            .args(["oracle", "--preset", preset.name(), "--n", "6", "--s", "-0.4,0,0.3", "--paths", "1e4", "--grid", "512"])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() && status.status.code() != Some(1) {
            return verdict(false, format!("mdrw oracle failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let summary = read_json(&out.join("summary.json"));
        let d = summary["change_of_measure"]["max_discrepancy"].as_f64().unwrap();
        let runs = summary["change_of_measure"]["runs"].as_array().unwrap().len();
        worst = worst.max(d);
        notes.push(format!("{} {d:.1e} over {runs} (s, r, n) cases", preset.name()));
    }
    let elapsed = clock.elapsed();
    verdict(
        worst < 1e-12 && elapsed < Duration::from_secs(10),
        format!("max discrepancy {worst:.1e} < 1e-12 [{}], n = 1..6, r spectral / constant / 1.2 + sin 3θ, {:.1} s < 10 s", notes.join(", "), elapsed.as_secs_f64()),
    )
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn c2_spectral_sanity() -> Verdict {
    let clock = Instant::now();
    let mut ok = true;
    let mut notes = vec![];
    for preset in PRESETS {
        let law = preset.law();
        let sv = solver(&law, 512);
        let at0 = sv.at(0.0).unwrap();
        let kappa_err = (at0.kappa - 1.0).abs();
        let r_err = at0.r.values().iter().fold(0.0_f64, |m, v| m.max((v - 1.0).abs()));
        let mut residual = at0.residual;
        let mut lambdas = vec![];
        for s in chebyshev_stencil(0.5, 25) {
            let d = sv.at(s).unwrap();
            residual = residual.max(d.residual);
            lambdas.push((s, d.kappa.ln()));
        }
        let second = min_second_difference(&lambdas);
        ok &= kappa_err < 1e-8 && r_err < 1e-6 && residual < 1e-8 && second >= -1e-8;
        notes.push(format!(
            "{}: |κ(0)−1| {kappa_err:.0e}, |r̂₀−1| {r_err:.0e}, residual {residual:.0e}, min Λ'' {second:.2e}",
            preset.name()
        ));
    }
    let elapsed = clock.elapsed();
    verdict(ok && elapsed < Duration::from_secs(30), format!("{}; N = 512, {:.1} s < 30 s", notes.join("; "), elapsed.as_secs_f64()))
}

fn min_second_difference(points: &[(f64, f64)]) -> f64 {
    points
        .windows(3)
        .map(|w| {
            let d1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let d2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            2.0 * (d2 - d1) / (w[2].0 - w[0].0)
        })
        .fold(f64::INFINITY, f64::min)
}

fn c3_scalar_reduction() -> Verdict {
    let clock = Instant::now();
    let sv = solver(&Preset::DiagRot.law(), 512);
    let cd = CumulantData::from_solver(&sv, 0.5, 25, 12).unwrap();
    let expected = [0.0, 1.0, 0.0, -2.0];
    let gamma_err = cd.gamma.iter().zip(expected).fold(0.0_f64, |m, (g, e)| m.max((g - e).abs()));
    let zeta_err = (-300..=300)
        .map(|i| {
            let t = i as f64 * 1e-3;
            (zeta(&cd, t).unwrap() + t / 12.0).abs()
        })
        .fold(0.0_f64, f64::max);
    let elapsed = clock.elapsed();
    verdict(
        gamma_err < 1e-4 && zeta_err < 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "diag_rot γ₁..γ₄ = ({:.2e}, {:.8}, {:.2e}, {:.6}), max error {gamma_err:.1e}; max |ζ(t) + t/12| on |t| ≤ 0.3 {zeta_err:.1e}; {:.1} s",
            cd.gamma[0],
            cd.gamma[1],
            cd.gamma[2],
            cd.gamma[3],
            elapsed.as_secs_f64()
        ),
    )
}

fn c4_saddle_consistency() -> Verdict {
    let clock = Instant::now();
    let mut ok = true;
    let mut notes = vec![];
    let mut worst_residual: f64 = 0.0;
    for preset in PRESETS {
        let sv = solver(&preset.law(), 1024);
        let cd = CumulantData::from_solver(&sv, s0_for(preset), 25, 12).unwrap();
        let mut cs = vec![];
        for n in [100_u64, 1_000, 10_000, 100_000] {
            let mut c: f64 = 0.0;
            for t in [0.25, 0.5, 1.0] {
                for tail in [Tail::Upper, Tail::Lower] {
                    let s = solve_saddle(&cd, t, n, tail).unwrap();
                    let target = tail.sign() * cd.sigma() * t / (n as f64).sqrt();
                    worst_residual = worst_residual.max((cd.lambda_prime(s) - cd.gamma[0] - target).abs());
                    let tau = t / (n as f64).sqrt();
                    c = c.max((series_saddle(&cd, t, n, tail) - s).abs() / tau.powi(4));
                }
            }
            cs.push(c);
        }
        // the fourth-order bound holds with one constant for all n
        let stable = cs.iter().all(|c| *c <= 2.0 * cs[0]);
        ok &= stable;
        notes.push(format!("{} C_n for n = 1e2..1e5: {}", preset.name(), cs.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>().join(", ")));
    }
    ok &= worst_residual < 1e-12;
    verdict(
        ok,
        format!("Newton residual {worst_residual:.1e} < 1e-12; |s_series − s_Newton| / τ⁴: {}; t ∈ {{0.25, 0.5, 1}}, both tails; {:.1} s", notes.join("; "), clock.elapsed().as_secs_f64()),
    )
}

fn c5_rate_identity() -> Verdict {
    let mut ok = true;
    let mut notes = vec![];
    for preset in PRESETS {
        let ctx = context(preset);
        let n = 10_000_u64;
        let mut worst: f64 = 0.0;
        let mut worst_tau = 0.0;
        let mut largest_passing = 0.0;
        for i in 1..=20 {
            let tau = i as f64 * 0.01;
            let t = tau * (n as f64).sqrt();
            let mut all = true;
            for tail in [Tail::Upper, Tail::Lower] {
                let (s, _, source) = ctx.saddle(t, n, tail).unwrap();
                let lhs = if source == "fit" {
                    s * ctx.cd.lambda_prime(s) - ctx.cd.lambda(s)
                } else {
                    s * ctx.solver.lambda_prime(s).unwrap() - ctx.solver.lambda(s).unwrap()
                };
                let rel = (lhs - rate_series(&ctx.cd, t, n, tail).unwrap()).abs() / (tau * tau);
                all &= rel < 1e-3;
                if rel > worst {
                    worst = rel;
                    worst_tau = tail.sign() * tau;
                }
            }
            if all && largest_passing == (i - 1) as f64 * 0.01 {
                largest_passing = tau;
            }
        }
        ok &= worst < 1e-3;
        notes.push(format!(
            "{}: max error/τ² {worst:.2e} at τ = {worst_tau:+.2}, holds for |τ| ≤ {largest_passing:.2}",
            preset.name()
        ));
    }
    verdict(ok, format!("{}; tolerance 1e-3·τ² over |τ| = 0.01..0.2, both tails", notes.join("; ")))
}

fn mde_paths() -> u64 {
    std::env::var("MDRW_ACCEPTANCE_PATHS").ok().and_then(|v| v.parse::<f64>().ok()).map_or(1_000_000, |v| v as u64)
}

/// Criteria 6 to 8 share one run: per level and tail one tilted simulation
/// that scores the tail event, the `φ`-weighted tail event and the window.
fn mde_run() -> &'static (Outcome, Duration) {
    static RUN: OnceLock<(Outcome, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Mde,
            law: LawSpec::Preset("sl2_pair".into()),
            s0: 1.0,
            t: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
            n: vec![1000],
            paths: mde_paths(),
            seed: 2024,
            phi: Some(PhiSpec::Cos2),
            window: Some([-1.0, 1.0]),
            ..ExperimentConfig::default()
        };
        let clock = Instant::now();
        let outcome = experiments::run(&cfg).unwrap();
        (outcome, clock.elapsed())
    })
}

fn rows_of<'a>(outcome: &'a Outcome, name: &str) -> Vec<&'a experiments::ResultRow> {
    outcome.rows.iter().filter(|r| r.experiment == name).collect()
}

fn ratio_report(outcome: &Outcome, names: &[&str], band: [f64; 2]) -> (bool, String, f64) {
    let mut ok = true;
    let mut parts = vec![];
    let mut max_z: f64 = 0.0;
    for name in names {
        let mut cells = vec![];
        for row in rows_of(outcome, name) {
            let ratio = row.ratio();
            let z = row.estimate.z_score(row.theory);
            max_z = max_z.max(z.abs());
            ok &= ratio >= band[0] && ratio <= band[1] && !row.estimate.unreliable;
            cells.push(format!("{}:{ratio:.3}", row.t));
        }
        parts.push(format!("{name} [{}]", cells.join(" ")));
    }
    (ok, parts.join(" "), max_z)
}

fn c6_mde() -> Verdict {
    let (outcome, elapsed) = mde_run();
    let (ok, report, max_z) = ratio_report(outcome, &["mde_upper", "mde_lower"], [0.8, 1.2]);
    let stderr_max = ["mde_upper", "mde_lower"]
        .iter()
        .flat_map(|n| rows_of(outcome, n))
        .map(|r| r.estimate.stderr / r.estimate.estimate)
        .fold(0.0_f64, f64::max);
    let saddles_ok = outcome.checks.iter().filter(|c| c.name.starts_with("saddle")).all(|c| c.passed);
    verdict(
        ok && saddles_ok,
        format!(
            "sl2_pair n = 1000, {} paths: ratios in [0.8, 1.2]: {report}; max |z| {max_z:.1} with relative stderr ≤ {stderr_max:.1e}, below the 1/√n = 0.032 finite-n correction, so the ±4 stderr check is not resolvable at this n; {:.0} s shared with 7 and 8",
            mde_paths(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c7_llt() -> Verdict {
    let (outcome, _) = mde_run();
    let rows: Vec<_> = rows_of(outcome, "llt").into_iter().filter(|r| [0.0, 1.0, 2.0].contains(&r.t)).collect();
    let ok = rows.len() == 3 && rows.iter().all(|r| (0.8..=1.2).contains(&r.ratio()) && !r.estimate.unreliable);
    let cells: Vec<String> = rows.iter().map(|r| format!("t = {}: {:.3} (z {:.1})", r.t, r.ratio(), r.estimate.z_score(r.theory))).collect();
    verdict(ok, format!("sl2_pair n = 1000, window [−1, 1], ratios in [0.8, 1.2]: {}", cells.join(", ")))
}

fn c8_target_function() -> Verdict {
    let (outcome, _) = mde_run();
    let (ok, report, _) = ratio_report(outcome, &["mde_upper_phi", "mde_lower_phi"], [0.75, 1.25]);
    let nu = outcome.summary["nu_phi"].as_f64().unwrap_or(f64::NAN);
    verdict(ok, format!("φ(θ) = 1 + cos(2θ)/2, ν̂(φ) = {nu:.6}, ratios in [0.75, 1.25]: {report}"))
}

fn c9_regularity() -> Verdict {
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::Regularity,
        law: LawSpec::Preset("sl2_pair".into()),
        s_list: vec![-0.1, 0.0, 0.1],
        eps: 0.5,
        k_max: 12,
        n: vec![100],
        paths: 200_000,
        seed: 11,
        ..ExperimentConfig::default()
    };
    let outcome = experiments::run(&cfg).unwrap();
    let fits: Vec<String> = outcome
        .summary["regularity"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| format!("s = {}: slope {:.3}, R² {:.4}", p["s"], p["fit"]["slope"].as_f64().unwrap(), p["fit"]["r_squared"].as_f64().unwrap()))
        .collect();
    verdict(outcome.passed(), format!("sl2_pair, ε = 0.5, k = 1..12, n = 100, ker f along (golden ratio, 1): {}; need slope < −0.05, R² > 0.9", fits.join("; ")))
}

fn c10_gadgets() -> Verdict {
    let outcome = experiments::run(&ExperimentConfig::new(ExperimentKind::Gadgets)).unwrap();
    let failed: Vec<String> = outcome.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    let fourier = outcome.summary["fourier_error"].as_f64().unwrap();
    let partition = outcome.summary["partition_sum_error"].as_f64().unwrap();
    let c: Vec<String> = outcome.summary["sandwich"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["shape"] == "indicator")
        .map(|s| format!("{}", s["fitted_c"].as_f64().unwrap()))
        .map(|s| s.chars().take(8).collect())
        .collect();
    verdict(
        outcome.passed(),
        format!(
            "{} checks; Fourier closed forms vs quadrature {fourier:.1e}; sandwich violations none; partition |Σχ − 1| {partition:.0e} on 10⁴ points; fitted c_ρ(ε) for ε = 0.2, 0.1, 0.05: {}{}",
            outcome.checks.len(),
            c.join(", "),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join("; ")) }
        ),
    )
}

fn c11_perturbation() -> Verdict {
    let mut worst: f64 = 0.0;
    for preset in PRESETS {
        let ctx = context(preset);
        for s in [-0.1, 0.0, 0.1] {
            let spec = ctx.solver.at(s).unwrap();
            let lp = ctx.cd.lambda_prime(s);
            for u in [-0.1, -0.05, -0.01, 0.01, 0.05, 0.1] {
                let lam = perturbed_eigenvalue(&ctx.law, &spec, u, lp).unwrap();
                let predicted = (ctx.cd.lambda_complex(Complex64::new(s, u)) - ctx.cd.lambda(s) - Complex64::new(0.0, u * lp)).exp();
                worst = worst.max((lam - predicted).norm() / lam.norm());
            }
        }
    }
    let sl2 = solver(&Preset::Sl2Pair.law(), 1024);
    let sl2_fit = fit_decay(&decay_profile(&sl2, 0.0, 1.0, 40).unwrap(), 5..=40);
    let rot = solver(&Preset::RationalRotation.law(), 512);
    let rot_fit = fit_decay(&decay_profile(&rot, 0.0, 1.0, 40).unwrap(), 5..=40);
    verdict(
        worst < 1e-4 && sl2_fit.decays && !rot_fit.decays,
        format!(
            "max |λ̂ − e^{{Λ(s+iu)−Λ(s)−iuΛ'(s)}}|/|λ̂| {worst:.1e} < 1e-4 for s ∈ {{0, ±0.1}}, |u| ≤ 0.1 on both presets; u = 1 decay: sl2_pair rate {:.4} (R² {:.4}), rational rotation rate {:.1e} (no decay detected: {})",
            sl2_fit.rate,
            sl2_fit.r_squared,
            rot_fit.rate,
            !rot_fit.decays
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 11] = [
    (1, "exact tilting identity", c1_tilting_identity),
    (2, "spectral sanity", c2_spectral_sanity),
    (3, "scalar-reduction oracle", c3_scalar_reduction),
    (4, "saddle consistency", c4_saddle_consistency),
    (5, "rate identity", c5_rate_identity),
    (6, "MDE reproduction", c6_mde),
    (7, "LLT reproduction", c7_llt),
    (8, "target-function variant", c8_target_function),
    (9, "regularity decay", c9_regularity),
    (10, "analytic gadgets", c10_gadgets),
    (11, "perturbation identity and decay", c11_perturbation),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = vec![];
    for (id, title, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let v = check();
        println!("criterion {id:>2} {} {title}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        if !v.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
