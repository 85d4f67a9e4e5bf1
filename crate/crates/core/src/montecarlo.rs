//! Path simulation under `μ` and under the tilted chain, with importance
//! weights that are exact for any positive eigenfunction estimate.
//!
//! At a state `x` the tilted chain picks atom `i` with probability
//! `q_i(x) = m_i(x) / Z(x)`, `m_i(x) ≈ w_i e^{sσ(g_i,x)} r(g_i·x)`, and the
//! path carries the likelihood ratio `Π w_i / q_i(x_k)`. With `m_i` equal to
//! the product form the ratio telescopes to
//! `exp(Σ log Ẑ(x_k) − sσ(G_n,x) − log r(x_n) + log r(x_0))`, `Ẑ = Z/r`; it
//! stays exact for any positive `m_i`, so the accuracy of `r̂_s` and of the
//! tabulation of `m_i` costs variance and never bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cramer::{CumulantData, Tail};
use crate::error::{Error, Result};
use crate::linalg::{line_angle, DualPoint, ProjectivePoint};
use crate::measures::MatrixLaw;
use crate::stats::{fit_line, Accumulator, LineFit};
use crate::transfer::{planar_atoms, GridFunction, SpectralData};

/// Paths per RNG stream.
pub const BATCH: u64 = 4096;
/// Below this effective sample size an estimate is flagged.
pub const MIN_ESS: f64 = 50.0;
const R_TABLE: usize = 8192;

/// End state of one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    /// `σ(G_n, x)`.
    pub final_cocycle: f64,
    /// `log δ(y, G_n·x)`, `-∞` when `f` annihilates `G_n v`.
    pub final_logdelta: f64,
    pub final_point: ProjectivePoint,
    /// Log likelihood ratio of the direct law against the sampling law.
    pub log_weight: f64,
}

impl PathSample {
    /// `log|⟨f, G_n v⟩|` for unit `f` and `v`.
    pub fn coefficient(&self) -> f64 {
        self.final_cocycle + self.final_logdelta
    }
}

/// Monte Carlo point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub ess: f64,
    /// Set when `ess < MIN_ESS`.
    pub unreliable: bool,
}

impl TailEstimate {
    pub fn from_accumulator(acc: &Accumulator) -> Self {
        let ess = acc.ess();
        Self { estimate: acc.mean(), stderr: acc.stderr(), n_samples: acc.count, ess, unreliable: ess < MIN_ESS }
    }

    /// `(estimate − target) / stderr`; infinite when the estimate has no spread.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.estimate - target;
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    }
}

/// Running product kept in range by folding into a logarithm.
#[derive(Clone, Copy)]
struct LogProduct {
    log: f64,
    prod: f64,
}

impl LogProduct {
    fn new() -> Self {
        Self { log: 0.0, prod: 1.0 }
    }

    #[inline]
    fn push(&mut self, v: f64) {
        self.prod *= v;
        if !(1e-150..=1e150).contains(&self.prod) {
            self.log += self.prod.ln();
            self.prod = 1.0;
        }
    }

    fn value(&self) -> f64 {
        self.log + self.prod.ln()
    }
}

/// Position of the line through `(u0, u1)` on `[0, 2)`, monotone in its
/// angle: `0` at `e₁`, `1` at `e₂`.
#[inline]
fn pseudo_angle(u0: f64, u1: f64) -> f64 {
    let (u0, u1) = if u1 < 0.0 || (u1 == 0.0 && u0 < 0.0) { (-u0, -u1) } else { (u0, u1) };
    1.0 - u0 / (u0.abs() + u1)
}

fn pseudo_angle_to_angle(p: f64) -> f64 {
    if p <= 1.0 { line_angle(1.0 - p, p) } else { line_angle(1.0 - p, 2.0 - p) }
}

/// Transition kernel of the tilted chain on `P(R²)`.
#[derive(Debug, Clone)]
pub struct TiltedKernel {
    atoms: Vec<([[f64; 2]; 2], f64)>,
    s: f64,
    /// `m_i` at equispaced pseudo-angles of the current state, one row per atom.
    masses: Vec<Vec<f64>>,
}

impl TiltedKernel {
    /// Kernel built from any strictly positive `r`.
    pub fn new(law: &MatrixLaw, s: f64, r: &GridFunction) -> Result<Self> {
        let atoms = planar_atoms(law)?;
        if r.values().iter().any(|v| !(*v > 0.0)) {
            return Err(Error::OutOfRange("tilting function must be strictly positive".into()));
        }
        let masses = atoms
            .iter()
            .map(|(g, w)| {
                (0..R_TABLE)
                    .map(|j| {
                        let theta = pseudo_angle_to_angle(2.0 * j as f64 / R_TABLE as f64);
                        let (sin, cos) = theta.sin_cos();
                        let u0 = g[0][0] * cos + g[0][1] * sin;
                        let u1 = g[1][0] * cos + g[1][1] * sin;
                        let nsq = u0 * u0 + u1 * u1;
                        w * nsq.powf(0.5 * s) * r.eval_angle(line_angle(u0, u1))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { atoms, s, masses })
    }

    /// Kernel of `Q_s` from the spectral data at `s`.
    pub fn from_spectral(law: &MatrixLaw, spec: &SpectralData) -> Result<Self> {
        Self::new(law, spec.s, &spec.r)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Fills `m_i(v)` and returns `Z(v)`.
    #[inline]
    fn masses_at(&self, v: [f64; 2], out: &mut [f64]) -> f64 {
        let p = pseudo_angle(v[0], v[1]) * (R_TABLE as f64 / 2.0);
        let j = p.floor();
        let f = p - j;
        let j = (j as usize).min(R_TABLE - 1);
        let k = if j + 1 == R_TABLE { 0 } else { j + 1 };
        let mut z = 0.0;
        for (row, m) in self.masses.iter().zip(out.iter_mut()) {
            *m = row[j] * (1.0 - f) + row[k] * f;
            z += *m;
        }
        z
    }

    /// Transition probabilities `q_i(x)`.
    pub fn transition(&self, x: &ProjectivePoint) -> Vec<f64> {
        let mut m = vec![0.0; self.atoms.len()];
        let z = self.masses_at([x.rep()[0], x.rep()[1]], &mut m);
        m.into_iter().map(|v| v / z).collect()
    }

    /// Probability of `word` under the chain started at `x` and the log weight
    /// the sampler attaches to it, computed with the sampler's arithmetic.
    pub fn replay(&self, x: &ProjectivePoint, word: &[usize]) -> (f64, f64) {
        let mut m = vec![0.0; self.atoms.len()];
        let mut v = [x.rep()[0], x.rep()[1]];
        let mut prob = 1.0;
        let mut ratio = LogProduct::new();
        for &i in word {
            let z = self.masses_at(v, &mut m);
            prob *= m[i] / z;
            let (g, w) = &self.atoms[i];
            ratio.push(w * z / m[i]);
            let u0 = g[0][0] * v[0] + g[0][1] * v[1];
            let u1 = g[1][0] * v[0] + g[1][1] * v[1];
            let inv = (u0 * u0 + u1 * u1).sqrt().recip();
            v = [u0 * inv, u1 * inv];
        }
        (prob, ratio.value())
    }

    /// Atom weights `w_i`.
    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.1).collect()
    }
}

/// Source of independent paths.
#[derive(Debug, Clone)]
pub enum Sampler {
    /// i.i.d. products under `μ`.
    Direct { law: MatrixLaw, n: usize, x: ProjectivePoint, y: DualPoint },
    /// The tilted chain; weights undo the tilt.
    Tilted { kernel: TiltedKernel, n: usize, x: ProjectivePoint, y: DualPoint },
}

fn check_path_inputs(dim: usize, n: usize, x: &ProjectivePoint, y: &DualPoint) -> Result<()> {
    if n == 0 {
        return Err(Error::OutOfRange("paths need n ≥ 1".into()));
    }
    if x.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.dim() });
    }
    if y.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: y.dim() });
    }
    Ok(())
}

fn log_delta(f: &[f64], v: &[f64]) -> f64 {
    let d: f64 = f.iter().zip(v).map(|(a, b)| a * b).sum();
    d.abs().min(1.0).ln()
}

impl Sampler {
    pub fn direct(law: &MatrixLaw, n: usize, x: ProjectivePoint, y: DualPoint) -> Result<Self> {
        check_path_inputs(law.dim(), n, &x, &y)?;
        Ok(Sampler::Direct { law: law.clone(), n, x, y })
    }

    /// Tilted sampler at `spec.s`; falls back to direct sampling at `s = 0`.
    pub fn tilted(law: &MatrixLaw, spec: &SpectralData, n: usize, x: ProjectivePoint, y: DualPoint) -> Result<Self> {
        if spec.s == 0.0 {
            return Self::direct(law, n, x, y);
        }
        Self::with_kernel(TiltedKernel::from_spectral(law, spec)?, n, x, y)
    }

    pub fn with_kernel(kernel: TiltedKernel, n: usize, x: ProjectivePoint, y: DualPoint) -> Result<Self> {
        check_path_inputs(2, n, &x, &y)?;
        Ok(Sampler::Tilted { kernel, n, x, y })
    }

    pub fn n(&self) -> usize {
        match self {
            Sampler::Direct { n, .. } | Sampler::Tilted { n, .. } => *n,
        }
    }

    pub fn sample_path<R: Rng>(&self, rng: &mut R) -> PathSample {
        match self {
            Sampler::Direct { law, n, x, y } => {
                if law.dim() == 2 {
                    direct_planar(law, *n, x, y, rng)
                } else {
                    direct_general(law, *n, x, y, rng)
                }
            }
            Sampler::Tilted { kernel, n, x, y } => tilted_path(kernel, *n, x, y, rng),
        }
    }
}

fn direct_planar<R: Rng>(law: &MatrixLaw, n: usize, x: &ProjectivePoint, y: &DualPoint, rng: &mut R) -> PathSample {
    let mats: Vec<[[f64; 2]; 2]> = law.atoms().iter().map(|a| a.matrix.as_2x2().unwrap()).collect();
    let mut v = [x.rep()[0], x.rep()[1]];
    let mut norms = LogProduct::new();
    for _ in 0..n {
        let g = &mats[law.sample_index(rng)];
        let u0 = g[0][0] * v[0] + g[0][1] * v[1];
        let u1 = g[1][0] * v[0] + g[1][1] * v[1];
        let nsq = u0 * u0 + u1 * u1;
        norms.push(nsq);
        let inv = nsq.sqrt().recip();
        v = [u0 * inv, u1 * inv];
    }
    PathSample {
        final_cocycle: 0.5 * norms.value(),
        final_logdelta: log_delta(y.rep(), &v),
        final_point: ProjectivePoint::new(v.to_vec()).expect("unit vector"),
        log_weight: 0.0,
    }
}

fn direct_general<R: Rng>(law: &MatrixLaw, n: usize, x: &ProjectivePoint, y: &DualPoint, rng: &mut R) -> PathSample {
    let mut v = x.rep().to_vec();
    let mut norms = LogProduct::new();
    for _ in 0..n {
        let mut u = law.sample(rng).apply(&v);
        let nsq: f64 = u.iter().map(|a| a * a).sum();
        norms.push(nsq);
        let inv = nsq.sqrt().recip();
        u.iter_mut().for_each(|a| *a *= inv);
        v = u;
    }
    PathSample {
        final_cocycle: 0.5 * norms.value(),
        final_logdelta: log_delta(y.rep(), &v),
        final_point: ProjectivePoint::new(v).expect("unit vector"),
        log_weight: 0.0,
    }
}

fn tilted_path<R: Rng>(kernel: &TiltedKernel, n: usize, x: &ProjectivePoint, y: &DualPoint, rng: &mut R) -> PathSample {
    let mut m = vec![0.0; kernel.atoms.len()];
    let mut v = [x.rep()[0], x.rep()[1]];
    let mut norms = LogProduct::new();
    let mut ratio = LogProduct::new();
    for _ in 0..n {
        let z = kernel.masses_at(v, &mut m);
        let mut threshold = rng.random::<f64>() * z;
        let mut pick = m.len() - 1;
        for (i, mi) in m.iter().enumerate() {
            if threshold < *mi {
                pick = i;
                break;
            }
            threshold -= mi;
        }
        let (g, w) = &kernel.atoms[pick];
        ratio.push(w * z / m[pick]);
        let u0 = g[0][0] * v[0] + g[0][1] * v[1];
        let u1 = g[1][0] * v[0] + g[1][1] * v[1];
        let nsq = u0 * u0 + u1 * u1;
        norms.push(nsq);
        let inv = nsq.sqrt().recip();
        v = [u0 * inv, u1 * inv];
    }
    PathSample {
        final_cocycle: 0.5 * norms.value(),
        final_logdelta: log_delta(y.rep(), &v),
        final_point: ProjectivePoint::new(v.to_vec()).expect("unit vector"),
        log_weight: ratio.value(),
    }
}

fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

fn batch_count(paths: u64) -> u64 {
    paths.div_ceil(BATCH)
}

fn batch_len(paths: u64, b: u64) -> u64 {
    BATCH.min(paths - b * BATCH)
}

fn run_batches<V>(paths: u64, seed: u64, slots: usize, visit: V) -> Vec<Accumulator>
where
    V: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let partial: Vec<Vec<Accumulator>> = (0..batch_count(paths))
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let mut accs = vec![Accumulator::default(); slots];
            let mut values = vec![0.0; slots];
            for _ in 0..batch_len(paths, b) {
                visit(&mut rng, &mut values);
                for (acc, v) in accs.iter_mut().zip(&values) {
                    acc.push(*v);
                }
            }
            accs
        })
        .collect();
    let mut total = vec![Accumulator::default(); slots];
    for accs in &partial {
        for (t, a) in total.iter_mut().zip(accs) {
            t.merge(a);
        }
    }
    total
}

/// Runs `paths` paths in fixed batches, one RNG stream per batch, and
/// returns one pooled accumulator per slot. `visit` writes the per-path
/// value of every slot. Output does not depend on the thread count.
pub fn run_paths<V>(sampler: &Sampler, paths: u64, seed: u64, slots: usize, visit: V) -> Vec<Accumulator>
where
    V: Fn(&PathSample, &mut [f64]) + Sync,
{
    run_batches(paths, seed, slots, |rng, values| visit(&sampler.sample_path(rng), values))
}

/// `σ(g_n⋯g_{b+1}, G_b·x) / (n − b)` averaged over direct paths: the
/// first `b = burn_in` steps are discarded so that the start-point bias
/// of order `1/n` drops out.
pub fn lyapunov_estimate(law: &MatrixLaw, n: usize, burn_in: usize, x: &ProjectivePoint, paths: u64, seed: u64) -> Result<TailEstimate> {
    if burn_in >= n {
        return Err(Error::OutOfRange(format!("burn-in {burn_in} must be shorter than n = {n}")));
    }
    let y = DualPoint::basis(law.dim(), 0);
    let run = |len: usize, start: &ProjectivePoint, rng: &mut ChaCha8Rng| {
        if law.dim() == 2 {
            direct_planar(law, len, start, &y, rng)
        } else {
            direct_general(law, len, start, &y, rng)
        }
    };
    let steps = (n - burn_in) as f64;
    let accs = run_batches(paths, seed, 1, |rng, out| {
        let warm = run(burn_in, x, rng);
        out[0] = run(n - burn_in, &warm.final_point, rng).final_cocycle / steps;
    });
    Ok(TailEstimate::from_accumulator(&accs[0]))
}

/// All paths of a sampler, in batch order.
pub fn collect_paths(sampler: &Sampler, paths: u64, seed: u64) -> Vec<PathSample> {
    let batches: Vec<Vec<PathSample>> = (0..batch_count(paths))
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            (0..batch_len(paths, b)).map(|_| sampler.sample_path(&mut rng)).collect()
        })
        .collect();
    batches.into_iter().flatten().collect()
}

pub fn simulate_direct(law: &MatrixLaw, n: usize, x: &ProjectivePoint, y: &DualPoint, paths: u64, seed: u64) -> Result<Vec<PathSample>> {
    Ok(collect_paths(&Sampler::direct(law, n, x.clone(), y.clone())?, paths, seed))
}

pub fn simulate_tilted(
    law: &MatrixLaw,
    spec: &SpectralData,
    n: usize,
    x: &ProjectivePoint,
    y: &DualPoint,
    paths: u64,
    seed: u64,
) -> Result<Vec<PathSample>> {
    Ok(collect_paths(&Sampler::tilted(law, spec, n, x.clone(), y.clone())?, paths, seed))
}

/// Path length, start, target functional and simulation budget.
#[derive(Debug, Clone)]
pub struct PathConfig {
    pub n: usize,
    pub x: ProjectivePoint,
    pub y: DualPoint,
    pub paths: u64,
    pub seed: u64,
    /// Use `σ(G_n, x)` in place of the coefficient.
    pub cocycle_only: bool,
}

impl PathConfig {
    /// `x = Rv`, `y = Rf` with `v = f = (1, 1)/√2`.
    pub fn new(n: usize, paths: u64, seed: u64) -> Self {
        let diag = std::f64::consts::FRAC_PI_4;
        Self { n, x: ProjectivePoint::from_angle(diag), y: DualPoint::from_angle(diag), paths, seed, cocycle_only: false }
    }
}

/// Event on the centred coefficient `X = log|⟨f, G_n v⟩| − nλ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Event {
    /// `X ≥ √nσt`.
    Upper,
    /// `X ≤ −√nσt`.
    Lower,
    /// `X − √nσt ∈ [a₁, a₂]`.
    Window { a1: f64, a2: f64 },
}

/// `E[φ(G_n·x) 1{event}]` for one event and optional target function.
#[derive(Debug, Clone)]
pub struct Observable {
    pub event: Event,
    pub phi: Option<GridFunction>,
}

/// Estimates several observables at level `t` from one set of paths drawn
/// from `sampler`.
pub fn estimate_observables(
    sampler: &Sampler,
    cd: &CumulantData,
    t: f64,
    cfg: &PathConfig,
    observables: &[Observable],
) -> Vec<TailEstimate> {
    let n = sampler.n() as f64;
    let centre = n * cd.lyapunov();
    let shift = n.sqrt() * cd.sigma() * t;
    let cocycle_only = cfg.cocycle_only;
    let accs = run_paths(sampler, cfg.paths, cfg.seed, observables.len(), |path, out| {
        let x = if cocycle_only { path.final_cocycle } else { path.coefficient() } - centre;
        let weight = path.log_weight.exp();
        let angle = if observables.iter().any(|o| o.phi.is_some()) { path.final_point.angle() } else { 0.0 };
        for (o, slot) in observables.iter().zip(out.iter_mut()) {
            let hit = match o.event {
                Event::Upper => x >= shift,
                Event::Lower => x <= -shift,
                Event::Window { a1, a2 } => (a1..=a2).contains(&(x - shift)),
            };
            *slot = if hit { weight * o.phi.as_ref().map_or(1.0, |phi| phi.eval_angle(angle)) } else { 0.0 };
        }
    });
    accs.iter().map(TailEstimate::from_accumulator).collect()
}

fn sampler_for(law: &MatrixLaw, tilt: Option<&SpectralData>, cfg: &PathConfig) -> Result<Sampler> {
    match tilt {
        Some(spec) => Sampler::tilted(law, spec, cfg.n, cfg.x.clone(), cfg.y.clone()),
        None => Sampler::direct(law, cfg.n, cfg.x.clone(), cfg.y.clone()),
    }
}

fn single(law: &MatrixLaw, tilt: Option<&SpectralData>, cd: &CumulantData, t: f64, cfg: &PathConfig, o: Observable) -> Result<TailEstimate> {
    let sampler = sampler_for(law, tilt, cfg)?;
    Ok(estimate_observables(&sampler, cd, t, cfg, &[o])[0])
}

/// `E[φ(G_n·x) 1{log|⟨f, G_n v⟩| − nλ₁ ≥ √nσt}]`, sampled from the chain
/// tilted by `tilt` (direct sampling for `None`).
pub fn estimate_upper_tail(
    law: &MatrixLaw,
    tilt: Option<&SpectralData>,
    cd: &CumulantData,
    phi: Option<&GridFunction>,
    t: f64,
    cfg: &PathConfig,
) -> Result<TailEstimate> {
    single(law, tilt, cd, t, cfg, Observable { event: Event::Upper, phi: phi.cloned() })
}

/// Lower-tail counterpart of [`estimate_upper_tail`].
pub fn estimate_lower_tail(
    law: &MatrixLaw,
    tilt: Option<&SpectralData>,
    cd: &CumulantData,
    phi: Option<&GridFunction>,
    t: f64,
    cfg: &PathConfig,
) -> Result<TailEstimate> {
    single(law, tilt, cd, t, cfg, Observable { event: Event::Lower, phi: phi.cloned() })
}

/// `E[φ(G_n·x) 1{log|⟨f, G_n v⟩| − nλ₁ ∈ [a₁, a₂] + √nσt}]`.
pub fn estimate_llt(
    law: &MatrixLaw,
    tilt: Option<&SpectralData>,
    cd: &CumulantData,
    phi: Option<&GridFunction>,
    t: f64,
    a1: f64,
    a2: f64,
    cfg: &PathConfig,
) -> Result<TailEstimate> {
    if a1 > a2 {
        return Err(Error::OutOfRange(format!("window [{a1}, {a2}] is reversed")));
    }
    if a1 == a2 {
        return Ok(TailEstimate { estimate: 0.0, stderr: 0.0, n_samples: cfg.paths, ess: 0.0, unreliable: true });
    }
    single(law, tilt, cd, t, cfg, Observable { event: Event::Window { a1, a2 }, phi: phi.cloned() })
}

/// Tilt sign used for an event at level `t`.
pub fn tail_for(event: Event, t: f64) -> Tail {
    match event {
        Event::Upper => Tail::Upper,
        Event::Lower => Tail::Lower,
        Event::Window { .. } => {
            if t < 0.0 {
                Tail::Lower
            } else {
                Tail::Upper
            }
        }
    }
}

/// Empirical `Q_s^x(log δ(y, G_n·x) ≤ −εk)` for `k = 0..=k_max`, with a
/// log-linear fit over the positive entries with `k ≥ 1`.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityProbe {
    pub s: f64,
    pub eps: f64,
    pub points: Vec<(usize, f64)>,
    pub fit: Option<LineFit>,
}

pub fn regularity_probe(
    law: &MatrixLaw,
    spec: &SpectralData,
    n: usize,
    x: &ProjectivePoint,
    y: &DualPoint,
    eps: f64,
    k_max: usize,
    paths: u64,
    seed: u64,
) -> Result<RegularityProbe> {
    if n < k_max {
        return Err(Error::OutOfRange(format!("probe needs n ≥ k_max, got n = {n}, k_max = {k_max}")));
    }
    if !(eps > 0.0) {
        return Err(Error::OutOfRange(format!("ε must be positive, got {eps}")));
    }
    let sampler = Sampler::tilted(law, spec, n, x.clone(), y.clone())?;
    let accs = run_paths(&sampler, paths, seed, k_max + 1, |path, out| {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = if path.final_logdelta <= -eps * k as f64 { 1.0 } else { 0.0 };
        }
    });
    let points: Vec<(usize, f64)> = accs.iter().enumerate().map(|(k, a)| (k, a.mean())).collect();
    let (ks, logs): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|(k, p)| *k >= 1 && *p > 0.0).map(|(k, p)| (*k as f64, p.ln())).unzip();
    let fit = (ks.len() >= 2).then(|| fit_line(&ks, &logs));
    Ok(RegularityProbe { s: spec.s, eps, points, fit })
}

/// `E_{Q_s^x}[δ(y, G_n·x)^{−p|s|}]` under the tilted chain, unweighted.
pub fn delta_moment_probe(
    law: &MatrixLaw,
    spec: &SpectralData,
    n: usize,
    x: &ProjectivePoint,
    y: &DualPoint,
    p: f64,
    paths: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if !(p > 0.0) {
        return Err(Error::OutOfRange(format!("moment order must be positive, got {p}")));
    }
    let exponent = -p * spec.s.abs();
    let sampler = Sampler::tilted(law, spec, n, x.clone(), y.clone())?;
    let accs = run_paths(&sampler, paths, seed, 1, |path, out| {
        out[0] = if exponent == 0.0 { 1.0 } else { (exponent * path.final_logdelta).exp() };
    });
    Ok(TailEstimate::from_accumulator(&accs[0]))
}

/// One CSV row `experiment,t,n,estimate,stderr,ess,theory,ratio`.
pub fn csv_row(experiment: &str, t: f64, n: usize, est: &TailEstimate, theory: f64) -> String {
    format!(
        "{experiment},{t},{n},{:e},{:e},{:.1},{:e},{:.6}",
        est.estimate,
        est.stderr,
        est.ess,
        theory,
        est.estimate / theory
    )
}

pub const CSV_HEADER: &str = "experiment,t,n,estimate,stderr,ess,theory,ratio";
