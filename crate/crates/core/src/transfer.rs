//! Discretized transfer operators on the projective line.
//!
//! `P(R²)` is the circle of angles `θ ∈ [0, π)`. Functions are sampled on a
//! uniform grid and operators act through circular piecewise-linear
//! interpolation, so for real `s` the matrix of `P_s` is entrywise
//! nonnegative and Perron-Frobenius theory applies to it directly.
//!
//! The main entry point is [`SpectralSolver`], which caches the stationary
//! measure `ν̂₀` (needed for the normalization `ν̂₀(r̂_s) = 1`) and produces
//! [`SpectralData`] at any real tilt.

use std::f64::consts::PI;
use std::ops::{AddAssign, Mul};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{line_angle, ProjectivePoint};
use crate::measures::MatrixLaw;

/// Uniform grid `θ_j = jπ/N` on the projective line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CircleGrid {
    n: usize,
}

impl CircleGrid {
    pub const DEFAULT_SIZE: usize = 512;

    pub fn new(n: usize) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::OutOfRange(format!("grid size must be a power of two ≥ 64, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    pub fn point(&self, j: usize) -> ProjectivePoint {
        ProjectivePoint::from_angle(self.node(j))
    }

    /// Interpolation stencil for angle `θ` (any real, taken mod π): nodes
    /// `j`, `j+1 mod N` with weights `1-f`, `f`.
    #[inline]
    pub fn stencil(&self, theta: f64) -> (usize, usize, f64) {
        let pos = (theta / self.step()).rem_euclid(self.n as f64);
        let j = (pos.floor() as usize).min(self.n - 1);
        let frac = pos - j as f64;
        (j, (j + 1) % self.n, frac)
    }

    #[inline]
    pub fn interpolate(&self, values: &[f64], theta: f64) -> f64 {
        let (j, k, f) = self.stencil(theta);
        (1.0 - f) * values[j] + f * values[k]
    }
}

/// Values of a real function at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    grid: CircleGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: CircleGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange("grid function values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: CircleGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: CircleGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear value at angle `θ`.
    pub fn eval_angle(&self, theta: f64) -> f64 {
        self.grid.interpolate(&self.values, theta)
    }

    pub fn eval(&self, x: &ProjectivePoint) -> f64 {
        self.eval_angle(x.angle())
    }

    /// Integral against a discrete measure carried by the nodes.
    pub fn integrate(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(a, b)| a * b).sum()
    }
}

/// Scalars the sparse operators act on.
pub trait Scalar: Copy + Default + AddAssign + Mul<Output = Self> + Send + Sync {}
impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Square sparse matrix with a fixed number of entries per row.
#[derive(Debug, Clone)]
pub struct SparseOperator<T> {
    n: usize,
    per_row: usize,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseOperator<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row `j` as `(column, value)` pairs; columns may repeat.
    pub fn row(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = j * self.per_row..(j + 1) * self.per_row;
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `A x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.n];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[T], out: &mut [T]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = T::default();
            for k in j * self.per_row..(j + 1) * self.per_row {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `yᵀ A`.
    pub fn apply_left(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.n];
        for (j, &yj) in y.iter().enumerate() {
            for k in j * self.per_row..(j + 1) * self.per_row {
                out[self.cols[k]] += yj * self.vals[k];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::default(); self.n]; self.n];
        for (j, row) in m.iter_mut().enumerate() {
            for (c, v) in self.row(j) {
                row[c] += v;
            }
        }
        m
    }
}

pub(crate) fn planar_atoms(law: &MatrixLaw) -> Result<Vec<([[f64; 2]; 2], f64)>> {
    if law.dim() != 2 {
        return Err(Error::UnsupportedDimension { dim: law.dim(), what: "transfer operators are discretized on P(R²)" });
    }
    Ok(law.atoms().iter().map(|a| (a.matrix.as_2x2().unwrap(), a.weight)).collect())
}

/// Image of node `θ` under `g`: `(σ(g, x), angle of g·x)`.
#[inline]
fn node_image(g: &[[f64; 2]; 2], theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let u0 = g[0][0] * c + g[0][1] * s;
    let u1 = g[1][0] * c + g[1][1] * s;
    (0.5 * (u0 * u0 + u1 * u1).ln(), line_angle(u0, u1))
}

/// Matrix of `P_s φ(x) = Σ_i w_i e^{sσ(g_i,x)} φ(g_i·x)` on the grid.
pub fn build_ps(law: &MatrixLaw, s: f64, grid: CircleGrid) -> Result<SparseOperator<f64>> {
    let atoms = planar_atoms(law)?;
    let n = grid.len();
    let per_row = 2 * atoms.len();
    let mut cols = Vec::with_capacity(n * per_row);
    let mut vals = Vec::with_capacity(n * per_row);
    for j in 0..n {
        let theta = grid.node(j);
        for (g, w) in &atoms {
            let (sigma, image) = node_image(g, theta);
            let weight = w * (s * sigma).exp();
            let (a, b, f) = grid.stencil(image);
            cols.extend([a, b]);
            vals.extend([weight * (1.0 - f), weight * f]);
        }
    }
    Ok(SparseOperator { n, per_row, cols, vals })
}

/// Dominant eigenvalue with right and left Perron vectors.
#[derive(Debug, Clone)]
pub struct PerronTriple {
    pub kappa: f64,
    /// Right eigenvector, scaled to maximum 1.
    pub right: Vec<f64>,
    /// Left eigenvector, scaled to total mass 1.
    pub left: Vec<f64>,
    pub iterations: usize,
    /// Larger of `|A r − κ r|_∞ / (κ |r|_∞)` and `|ℓA − κℓ|_∞ / (κ |ℓ|_∞)`.
    pub residual: f64,
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

fn power_iterate(n: usize, step: impl Fn(&[f64], &mut [f64]), start: Vec<f64>) -> Result<(f64, Vec<f64>, usize)> {
    let mut x = start;
    let mut next = vec![0.0; n];
    let mut kappa_prev = f64::NAN;
    let mut stable = 0;
    for it in 1..=POWER_MAX_ITER {
        step(&x, &mut next);
        let mass_x: f64 = x.iter().sum();
        let mass: f64 = next.iter().sum();
        let kappa = mass / mass_x;
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::NoConvergence { iterations: it, residual: f64::NAN });
        }
        let scale = 1.0 / next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for v in next.iter_mut() {
            *v *= scale;
        }
        let change = x.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut x, &mut next);
        if (kappa - kappa_prev).abs() < POWER_TOL * kappa && change < 1e-10 {
            stable += 1;
            // a few extra sweeps push the vector error well below the tolerance
            if stable >= 8 {
                return Ok((kappa, x, it));
            }
        } else {
            stable = 0;
        }
        kappa_prev = kappa;
    }
    let residual = {
        step(&x, &mut next);
        let k = next.iter().sum::<f64>() / x.iter().sum::<f64>();
        next.iter().zip(&x).fold(0.0_f64, |m, (a, b)| m.max((a - k * b).abs())) / k
    };
    Err(Error::NoConvergence { iterations: POWER_MAX_ITER, residual })
}

/// Perron data of a nonnegative operator by power iteration on `A` and `Aᵀ`.
pub fn dominant_eigen(op: &SparseOperator<f64>) -> Result<PerronTriple> {
    let n = op.dim();
    let (kappa, right, iterations) = power_iterate(n, |x, out| op.apply_into(x, out), vec![1.0; n])?;
    let (kappa_left, mut left, it_left) = power_iterate(
        n,
        |y, out| {
            out.fill(0.0);
            for (j, &yj) in y.iter().enumerate() {
                for (c, v) in op.row(j) {
                    out[c] += yj * v;
                }
            }
        },
        vec![1.0 / n as f64; n],
    )?;
    let mass: f64 = left.iter().sum();
    left.iter_mut().for_each(|v| *v /= mass);
    let ar = op.apply(&right);
    let right_residual = ar.iter().zip(&right).fold(0.0_f64, |m, (a, b)| m.max((a - kappa * b).abs())) / kappa;
    let la = op.apply_left(&left);
    let left_max = left.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let left_residual = la.iter().zip(&left).fold(0.0_f64, |m, (a, b)| m.max((a - kappa * b).abs())) / (kappa * left_max);
    let residual = right_residual.max(left_residual);
    debug_assert!((kappa - kappa_left).abs() < 1e-9 * kappa, "left/right eigenvalues disagree");
    Ok(PerronTriple { kappa, right, left, iterations: iterations.max(it_left), residual })
}

/// Second-largest eigenvalue modulus relative to `κ`, from power iteration
/// on the deflated operator `A - κ r ⊗ ℓ`.
pub fn gap_estimate(op: &SparseOperator<f64>, triple: &PerronTriple) -> f64 {
    let n = op.dim();
    let lr: f64 = triple.left.iter().zip(&triple.right).map(|(a, b)| a * b).sum();
    // deterministic, generic start vector
    let mut y: Vec<f64> = (0..n).map(|j| (j as f64 * 0.618_033_988_75).fract() - 0.5).collect();
    let deflate = |v: &mut Vec<f64>| {
        let c: f64 = triple.left.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / lr;
        for (vi, ri) in v.iter_mut().zip(&triple.right) {
            *vi -= c * ri;
        }
    };
    deflate(&mut y);
    let burn_in = 200;
    let window = 200;
    let mut log_growth = 0.0;
    for it in 0..burn_in + window {
        let mut next = op.apply(&y);
        deflate(&mut next);
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        let prev = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || prev == 0.0 {
            return 0.0;
        }
        if it >= burn_in {
            log_growth += (norm / prev).ln();
        }
        y = next.into_iter().map(|v| v / norm).collect();
    }
    (log_growth / window as f64).exp() / triple.kappa
}

/// Spectral data of the discretized `P_s` at one real tilt.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    pub s: f64,
    pub kappa: f64,
    /// `r̂_s`, positive, normalized by `ν̂₀(r̂_s) = 1`.
    pub r: GridFunction,
    /// `ν̂_s`, normalized by `ν̂_s(r̂_s) = 1`.
    pub nu: Vec<f64>,
    /// `π̂_s = ν̂_s(· r̂_s)`, a probability vector.
    pub pi: Vec<f64>,
    /// `|λ₂| / κ(s)`.
    pub gap: f64,
    pub grid_size: usize,
    pub residual: f64,
}

impl SpectralData {
    pub fn grid(&self) -> CircleGrid {
        self.r.grid()
    }

    pub fn lambda(&self) -> f64 {
        self.kappa.ln()
    }

    /// JSON export; the vectors are included only on request.
    pub fn to_json(&self, with_vectors: bool) -> serde_json::Value {
        let mut v = serde_json::json!({
            "s": self.s,
            "kappa": self.kappa,
            "gap": self.gap,
            "grid_size": self.grid_size,
            "residual": self.residual,
        });
        if with_vectors {
            v["r"] = serde_json::json!(self.r.values());
            v["nu"] = serde_json::json!(self.nu);
            v["pi"] = serde_json::json!(self.pi);
        }
        v
    }
}

/// Computes [`SpectralData`] for one law on one grid.
#[derive(Debug, Clone)]
pub struct SpectralSolver {
    law: MatrixLaw,
    grid: CircleGrid,
    nu0: Vec<f64>,
}

impl SpectralSolver {
    pub fn new(law: &MatrixLaw, grid: CircleGrid) -> Result<Self> {
        let p0 = build_ps(law, 0.0, grid)?;
        let nu0 = dominant_eigen(&p0)?.left;
        Ok(Self { law: law.clone(), grid, nu0 })
    }

    /// Doubles the grid from `start` until `κ(s)` moves by less than `tol`
    /// at every probe tilt, up to `max_size`.
    pub fn converged(law: &MatrixLaw, probes: &[f64], start: usize, max_size: usize, tol: f64) -> Result<Self> {
        let mut size = start;
        let mut solver = Self::new(law, CircleGrid::new(size)?)?;
        let mut kappas = probes.iter().map(|&s| solver.kappa(s)).collect::<Result<Vec<_>>>()?;
        while size < max_size {
            let finer = Self::new(law, CircleGrid::new(size * 2)?)?;
            let next = probes.iter().map(|&s| finer.kappa(s)).collect::<Result<Vec<_>>>()?;
            let moved = kappas.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            solver = finer;
            kappas = next;
            size *= 2;
            if moved < tol {
                break;
            }
        }
        Ok(solver)
    }

    pub fn law(&self) -> &MatrixLaw {
        &self.law
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    /// The discretized stationary measure `ν̂ = ν̂₀`.
    pub fn stationary(&self) -> &[f64] {
        &self.nu0
    }

    pub fn kappa(&self, s: f64) -> Result<f64> {
        Ok(dominant_eigen(&build_ps(&self.law, s, self.grid)?)?.kappa)
    }

    /// `Λ(s) = log κ(s)` of the discretized operator.
    pub fn lambda(&self, s: f64) -> Result<f64> {
        Ok(self.kappa(s)?.ln())
    }

    /// `Λ'(s)` by a central difference of step `1e-4`.
    pub fn lambda_prime(&self, s: f64) -> Result<f64> {
        let h = 1e-4;
        Ok((self.lambda(s + h)? - self.lambda(s - h)?) / (2.0 * h))
    }

    pub fn at(&self, s: f64) -> Result<SpectralData> {
        let op = build_ps(&self.law, s, self.grid)?;
        let triple = dominant_eigen(&op)?;
        let gap = gap_estimate(&op, &triple);
        let right_mass: f64 = triple.right.iter().zip(&self.nu0).map(|(a, b)| a * b).sum();
        let r: Vec<f64> = triple.right.iter().map(|v| v / right_mass).collect();
        if r.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::OutOfRange(format!("eigenfunction at s = {s} is not strictly positive")));
        }
        let nu_r: f64 = triple.left.iter().zip(&r).map(|(a, b)| a * b).sum();
        let nu: Vec<f64> = triple.left.iter().map(|v| v / nu_r).collect();
        let pi = stationary_tilted_from(&nu, &r);
        Ok(SpectralData {
            s,
            kappa: triple.kappa,
            r: GridFunction { grid: self.grid, values: r },
            nu,
            pi,
            gap,
            grid_size: self.grid.len(),
            residual: triple.residual,
        })
    }
}

fn stationary_tilted_from(nu: &[f64], r: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = nu.iter().zip(r).map(|(a, b)| a * b).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// `π̂_s(φ) = ν̂_s(φ r̂_s) / ν̂_s(r̂_s)` as a probability vector on the nodes.
pub fn stationary_tilted(spec: &SpectralData) -> Vec<f64> {
    stationary_tilted_from(&spec.nu, spec.r.values())
}

/// Matrix of `Q_s φ = P_s(φ r_s) / (κ(s) r_s)`: the tilted Markov kernel.
pub fn build_qs(law: &MatrixLaw, spec: &SpectralData) -> Result<SparseOperator<f64>> {
    let op = build_rsiu(law, spec, 0.0, 0.0)?;
    Ok(SparseOperator { n: op.n, per_row: op.per_row, cols: op.cols, vals: op.vals.iter().map(|v| v.re).collect() })
}

/// Matrix of `R_{s,iu} φ(x) = E_{Q_s^x}[e^{iu(σ(g,x) - Λ'(s))} φ(g·x)]`.
///
/// The tilted step from node `x_j` to interpolation node `x_k` carries
/// weight `w_i e^{sσ(g_i,x_j)} L_k(g_i·x_j) r̂_s(x_k) / (κ(s) r̂_s(x_j))`,
/// where `L_k` are the interpolation weights. Summed over `k` this is
/// `q_i(x_j) = w_i e^{sσ} r̂_s(g_i·x_j) / (κ r̂_s(x_j))` with `r̂_s`
/// interpolated, and the matrix equals `e^{-iuΛ'(s)} D⁻¹ P̂_{s+iu} D / κ(s)`
/// for `D = diag(r̂_s)`. In particular `R̂_{s,0} = Q̂_s` is stochastic up to
/// the eigen-residual and `π̂_s` is exactly invariant for it.
pub fn build_rsiu(law: &MatrixLaw, spec: &SpectralData, u: f64, lambda_prime: f64) -> Result<SparseOperator<Complex64>> {
    let atoms = planar_atoms(law)?;
    let grid = spec.grid();
    let r = spec.r.values();
    let n = grid.len();
    let per_row = 2 * atoms.len();
    let mut cols = Vec::with_capacity(n * per_row);
    let mut vals = Vec::with_capacity(n * per_row);
    for (j, &rj) in r.iter().enumerate() {
        let theta = grid.node(j);
        for (g, w) in &atoms {
            let (sigma, image) = node_image(g, theta);
            let (a, b, f) = grid.stencil(image);
            let q = w * (spec.s * sigma).exp() / (spec.kappa * rj);
            let phase = Complex64::from_polar(q, u * (sigma - lambda_prime));
            cols.extend([a, b]);
            vals.extend([phase * ((1.0 - f) * r[a]), phase * (f * r[b])]);
        }
    }
    Ok(SparseOperator { n, per_row, cols, vals })
}

/// Dominant eigenvalue of a complex operator close to a stochastic one,
/// by power iteration with the Rayleigh-type estimate `ℓ(Ax) / ℓ(x)`.
pub fn dominant_eigenvalue_complex(op: &SparseOperator<Complex64>, probe: &[f64]) -> Result<Complex64> {
    let n = op.dim();
    let mut x = vec![Complex64::new(1.0, 0.0); n];
    let mut next = vec![Complex64::default(); n];
    let pair = |v: &[Complex64]| v.iter().zip(probe).map(|(a, b)| a * b).sum::<Complex64>();
    let mut prev = Complex64::new(f64::NAN, 0.0);
    for it in 1..=POWER_MAX_ITER {
        op.apply_into(&x, &mut next);
        let lambda = pair(&next) / pair(&x);
        let scale = next.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if scale == 0.0 || !lambda.is_finite() {
            return Err(Error::NoConvergence { iterations: it, residual: f64::NAN });
        }
        for v in next.iter_mut() {
            *v /= scale;
        }
        std::mem::swap(&mut x, &mut next);
        if (lambda - prev).norm() < 1e-14 * lambda.norm().max(1e-300) {
            return Ok(lambda);
        }
        prev = lambda;
    }
    Err(Error::NoConvergence { iterations: POWER_MAX_ITER, residual: f64::NAN })
}

/// `λ̂_{s,iu}`, the dominant eigenvalue of the discretized `R_{s,iu}`.
pub fn perturbed_eigenvalue(law: &MatrixLaw, spec: &SpectralData, u: f64, lambda_prime: f64) -> Result<Complex64> {
    let op = build_rsiu(law, spec, u, lambda_prime)?;
    dominant_eigenvalue_complex(&op, &spec.pi)
}

/// `sup_x |R̂^n_{s,iu} 1 (x)|` for `n = 1..=n_max`.
pub fn decay_profile(solver: &SpectralSolver, s: f64, u: f64, n_max: usize) -> Result<Vec<f64>> {
    let spec = solver.at(s)?;
    let lambda_prime = solver.lambda_prime(s)?;
    let op = build_rsiu(solver.law(), &spec, u, lambda_prime)?;
    let mut x = vec![Complex64::new(1.0, 0.0); op.dim()];
    let mut next = x.clone();
    let mut sup = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        op.apply_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        sup.push(x.iter().fold(0.0_f64, |m, v| m.max(v.norm())));
    }
    Ok(sup)
}

/// `sup_x |R̂^n_{s,iu} 1 (x)|`.
pub fn decay_check(solver: &SpectralSolver, s: f64, u: f64, n: usize) -> Result<f64> {
    Ok(*decay_profile(solver, s, u, n)?.last().unwrap_or(&1.0))
}

/// Exponential decay fitted to a [`decay_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// `c₂` in `sup|R^n 1| ≈ c₁ e^{-c₂ n}`.
    pub rate: f64,
    pub r_squared: f64,
    /// `rate > 0` with a good log-linear fit.
    pub decays: bool,
}

/// Fits `log sup|R̂^n 1|` against `n` over `n_range`.
pub fn fit_decay(profile: &[f64], n_range: std::ops::RangeInclusive<usize>) -> DecayFit {
    let xs: Vec<f64> = n_range.clone().map(|n| n as f64).collect();
    let ys: Vec<f64> = n_range.map(|n| profile[n - 1].max(1e-300).ln()).collect();
    let fit = crate::stats::fit_line(&xs, &ys);
    let rate = -fit.slope;
    DecayFit { rate, r_squared: fit.r_squared, decays: rate > 1e-6 && fit.r_squared > 0.95 }
}
