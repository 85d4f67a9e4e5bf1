//! `Λ = log κ`, its derivatives `γ_k = Λ^{(k)}(0)`, the Cramér series, the
//! saddle-point equations and the resulting tail and local formulas.
//!
//! `Λ` is sampled on a symmetric stencil in `[-s₀, s₀]` and replaced by a
//! Chebyshev least-squares fit. Derivatives are read off the fit
//! analytically; differencing `κ` five times would amplify the eigensolver
//! noise far beyond what `γ₅` can tolerate.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{normal_cdf, normal_upper_tail};
use crate::transfer::SpectralSolver;

/// Which tail of the coefficient distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Upper,
    Lower,
}

impl Tail {
    pub fn sign(self) -> f64 {
        match self {
            Tail::Upper => 1.0,
            Tail::Lower => -1.0,
        }
    }
}

pub const DEFAULT_DEGREE: usize = 12;
pub const DEFAULT_STENCIL: usize = 25;
/// Largest `|t/√n|` at which the truncated Cramér series is trusted.
pub const MAX_SCALED_T: f64 = 0.2;
const ZETA_DOMAIN: f64 = 0.5;

/// Chebyshev-Gauss nodes `s₀ cos(π(j + ½)/m)`, sorted increasingly.
///
/// For odd `m` the stencil contains `0`.
pub fn chebyshev_stencil(s0: f64, m: usize) -> Vec<f64> {
    let half: Vec<f64> = (0..m / 2)
        .map(|j| s0 * (std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos())
        .collect();
    let mut nodes: Vec<f64> = half.iter().map(|x| -x).collect();
    if m % 2 == 1 {
        nodes.push(0.0);
    }
    nodes.extend(half.iter().rev());
    nodes
}

fn chebyshev_row(x: f64, degree: usize) -> Vec<f64> {
    let mut row = vec![0.0; degree + 1];
    row[0] = 1.0;
    if degree >= 1 {
        row[1] = x;
    }
    for k in 2..=degree {
        row[k] = 2.0 * x * row[k - 1] - row[k - 2];
    }
    row
}

/// Least squares by Householder QR; `a` is row-major `m × n` with `m ≥ n`.
fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let m = a.len();
    let n = a[0].len();
    let mut r: Vec<Vec<f64>> = a.to_vec();
    let mut y = b.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[i][j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[i][j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * y[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..m {
            y[i] -= f * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = (k + 1..n).map(|j| r[k][j] * x[j]).sum();
        x[k] = (y[k] - tail) / r[k][k];
    }
    x
}

/// Coefficients of `d/dx Σ c_k T_k(x)` in the Chebyshev basis.
fn chebyshev_derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n - 1];
    for k in (1..n).rev() {
        let next = if k + 1 < n - 1 { d[k + 1] } else { 0.0 };
        d[k - 1] = next + 2.0 * k as f64 * c[k];
    }
    d[0] *= 0.5;
    d
}

fn clenshaw<T>(c: &[f64], x: T) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Mul<Output = T> + From<f64>,
{
    let mut b1 = T::from(0.0);
    let mut b2 = T::from(0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = x * b1 * 2.0 - b2 + T::from(ck);
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + T::from(c[0])
}

/// Fitted `Λ` with its derivatives at the origin.
#[derive(Debug, Clone, Serialize)]
pub struct CumulantData {
    pub s0: f64,
    /// `(s, Λ(s))` samples the fit was built from.
    pub stencil: Vec<(f64, f64)>,
    /// `γ₁ … γ₅`.
    pub gamma: [f64; 5],
    /// Chebyshev coefficients of `Λ(s₀ x)` on `x ∈ [-1, 1]`.
    pub cheb_coeffs: Vec<f64>,
    /// Largest absolute misfit on the stencil.
    pub fit_residual: f64,
    #[serde(skip)]
    derivs: Vec<Vec<f64>>,
}

/// Fits `Λ` from `(s, Λ(s))` samples with a Chebyshev series of the given
/// degree on `[-s₀, s₀]`, `s₀ = max |s|`.
pub fn fit_cumulants(samples: &[(f64, f64)], degree: usize) -> Result<CumulantData> {
    if samples.len() < 21 {
        return Err(Error::OutOfRange(format!("need at least 21 stencil points, got {}", samples.len())));
    }
    if !(5..=12).contains(&degree) || degree + 1 > samples.len() {
        return Err(Error::OutOfRange(format!("fit degree must be in 5..=12, got {degree}")));
    }
    let mut sorted: Vec<f64> = samples.iter().map(|p| p.0).collect();
    sorted.sort_by(f64::total_cmp);
    let s0 = sorted.last().unwrap().abs().max(sorted[0].abs());
    let symmetric = sorted.iter().zip(sorted.iter().rev()).all(|(a, b)| (a + b).abs() <= 1e-12 * s0);
    if !symmetric {
        return Err(Error::OutOfRange("stencil must be symmetric about 0".into()));
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|(s, _)| chebyshev_row(s / s0, degree)).collect();
    let values: Vec<f64> = samples.iter().map(|p| p.1).collect();
    let coeffs = least_squares(&rows, &values);
    let fit_residual = rows
        .iter()
        .zip(&values)
        .map(|(row, v)| (row.iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>() - v).abs())
        .fold(0.0, f64::max);
    let mut derivs = vec![coeffs.clone()];
    for _ in 0..5 {
        derivs.push(chebyshev_derivative(derivs.last().unwrap()));
    }
    let mut gamma = [0.0; 5];
    for (k, g) in gamma.iter_mut().enumerate() {
        *g = clenshaw(&derivs[k + 1], 0.0) / s0.powi(k as i32 + 1);
    }
    if !(gamma[1] > 0.0) {
        return Err(Error::DegenerateVariance(gamma[1]));
    }
    Ok(CumulantData { s0, stencil: samples.to_vec(), gamma, cheb_coeffs: coeffs, fit_residual, derivs })
}

impl CumulantData {
    /// Samples `Λ` from the discretized transfer operator on a Chebyshev
    /// stencil of `m` points in `[-s₀, s₀]` and fits it.
    pub fn from_solver(solver: &SpectralSolver, s0: f64, m: usize, degree: usize) -> Result<Self> {
        let samples = chebyshev_stencil(s0, m)
            .into_iter()
            .map(|s| Ok((s, solver.lambda(s)?)))
            .collect::<Result<Vec<_>>>()?;
        fit_cumulants(&samples, degree)
    }

    /// `λ₁ = γ₁`.
    pub fn lyapunov(&self) -> f64 {
        self.gamma[0]
    }

    /// `σ = √γ₂`.
    pub fn sigma(&self) -> f64 {
        self.gamma[1].sqrt()
    }

    /// `Λ^{(k)}(s)` from the fit, `k ≤ 5`.
    pub fn lambda_derivative(&self, s: f64, k: usize) -> f64 {
        clenshaw(&self.derivs[k], s / self.s0) / self.s0.powi(k as i32)
    }

    pub fn lambda(&self, s: f64) -> f64 {
        self.lambda_derivative(s, 0)
    }

    pub fn lambda_prime(&self, s: f64) -> f64 {
        self.lambda_derivative(s, 1)
    }

    /// The fitted `Λ` continued to complex arguments.
    pub fn lambda_complex(&self, z: Complex64) -> Complex64 {
        clenshaw(&self.cheb_coeffs, z / self.s0)
    }

    /// Smallest second derivative of the fit over the stencil.
    pub fn min_curvature(&self) -> f64 {
        self.stencil.iter().map(|(s, _)| self.lambda_derivative(*s, 2)).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("cumulants serialize")
    }
}

/// Cramér series truncated after the `t²` term.
pub fn zeta(cd: &CumulantData, t: f64) -> Result<f64> {
    if t.abs() > ZETA_DOMAIN {
        return Err(Error::OutOfRange(format!("Cramér series argument {t} outside |t| ≤ {ZETA_DOMAIN}")));
    }
    let [_, g2, g3, g4, g5] = cd.gamma;
    let c0 = g3 / (6.0 * g2.powf(1.5));
    let c1 = (g4 * g2 - 3.0 * g3 * g3) / (24.0 * g2.powi(3));
    let c2 = (g5 * g2 * g2 - 10.0 * g4 * g3 * g2 + 15.0 * g3.powi(3)) / (120.0 * g2.powf(4.5));
    Ok(c0 + c1 * t + c2 * t * t)
}

fn scaled_t(t: f64, n: u64) -> f64 {
    t / (n as f64).sqrt()
}

/// Root `s` of `Λ'(s) - Λ'(0) = ±σt/√n` by safeguarded Newton iteration on
/// the fit; the sign of `s` follows `tail`.
pub fn solve_saddle(cd: &CumulantData, t: f64, n: u64, tail: Tail) -> Result<f64> {
    if t < 0.0 || n == 0 {
        return Err(Error::OutOfRange(format!("saddle equation needs t ≥ 0 and n ≥ 1, got t = {t}, n = {n}")));
    }
    let target = tail.sign() * cd.sigma() * scaled_t(t, n);
    if target == 0.0 {
        return Ok(0.0);
    }
    let g1 = cd.lambda_prime(0.0);
    let f = |s: f64| cd.lambda_prime(s) - g1 - target;
    let (mut lo, mut hi) = (-cd.s0, cd.s0);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::OutOfRange(format!("t = {t} too large for s₀ = {} at n = {n}", cd.s0)));
    }
    if tail == Tail::Upper {
        lo = 0.0;
    } else {
        hi = 0.0;
    }
    let mut s = target / cd.gamma[1];
    for _ in 0..200 {
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let fs = f(s);
        if fs.abs() < 1e-15 {
            break;
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let step = fs / cd.lambda_derivative(s, 2);
        s -= step;
        if step.abs() < 1e-16 * s.abs().max(1e-300) {
            break;
        }
    }
    Ok(s)
}

/// Three-term series for the saddle root,
/// `s ≈ τ/γ₂^{1/2} − γ₃τ²/(2γ₂²) − (γ₄γ₂ − 3γ₃²)τ³/(6γ₂^{7/2})` with
/// `τ = ±t/√n`.
pub fn series_saddle(cd: &CumulantData, t: f64, n: u64, tail: Tail) -> f64 {
    let [_, g2, g3, g4, _] = cd.gamma;
    let tau = tail.sign() * scaled_t(t, n);
    tau / g2.sqrt() - g3 / (2.0 * g2 * g2) * tau * tau - (g4 * g2 - 3.0 * g3 * g3) / (6.0 * g2.powf(3.5)) * tau.powi(3)
}

/// `sΛ'(s) − Λ(s)`.
pub fn rate_value(cd: &CumulantData, s: f64) -> f64 {
    s * cd.lambda_prime(s) - cd.lambda(s)
}

/// `τ²/2 − τ³ζ(τ)` with `τ = ±t/√n`: the series side of the rate identity.
pub fn rate_series(cd: &CumulantData, t: f64, n: u64, tail: Tail) -> Result<f64> {
    let tau = tail.sign() * scaled_t(t, n);
    Ok(0.5 * tau * tau - tau.powi(3) * zeta(cd, tau)?)
}

fn check_moderate(t: f64, n: u64) -> Result<()> {
    if n == 0 || scaled_t(t.abs(), n) > MAX_SCALED_T + 1e-12 {
        return Err(Error::OutOfRange(format!("|t|/√n = {} exceeds {MAX_SCALED_T}", scaled_t(t.abs(), n))));
    }
    Ok(())
}

/// Moderate-deviation approximation of the tail probability with
/// `ν(φ) = 1`:
/// upper `e^{(t³/√n)ζ(t/√n)}(1 − Φ(t))`, lower `e^{−(t³/√n)ζ(−t/√n)}Φ(−t)`.
pub fn mde_theoretical(cd: &CumulantData, t: f64, n: u64, tail: Tail) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::OutOfRange(format!("tail level must be nonnegative, got {t}")));
    }
    check_moderate(t, n)?;
    let root_n = (n as f64).sqrt();
    let tau = scaled_t(t, n);
    Ok(match tail {
        Tail::Upper => ((t.powi(3) / root_n) * zeta(cd, tau)?).exp() * normal_upper_tail(t),
        Tail::Lower => (-(t.powi(3) / root_n) * zeta(cd, -tau)?).exp() * normal_cdf(-t),
    })
}

/// Local approximation
/// `(a₂ − a₁)/(σ√(2πn)) · e^{−t²/2 + (t³/√n)ζ(t/√n)}` of
/// `P(log|⟨f, G_n v⟩| − nλ₁ ∈ [a₁, a₂] + √nσt)`.
pub fn llt_theoretical(cd: &CumulantData, t: f64, n: u64, a1: f64, a2: f64) -> Result<f64> {
    if !(a1 < a2) {
        return Err(Error::OutOfRange(format!("empty window [{a1}, {a2}]")));
    }
    check_moderate(t, n)?;
    let root_n = (n as f64).sqrt();
    let exponent = -0.5 * t * t + (t.powi(3) / root_n) * zeta(cd, scaled_t(t, n))?;
    Ok((a2 - a1) / (cd.sigma() * (2.0 * std::f64::consts::PI * n as f64).sqrt()) * exponent.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_cosh_data() -> CumulantData {
        let samples: Vec<(f64, f64)> = chebyshev_stencil(0.5, 25).into_iter().map(|s| (s, s.cosh().ln())).collect();
        fit_cumulants(&samples, 12).unwrap()
    }

    #[test]
    fn stencil_shape() {
        let st = chebyshev_stencil(0.5, 25);
        assert_eq!(st.len(), 25);
        assert_eq!(st[12], 0.0);
        for (a, b) in st.iter().zip(st.iter().rev()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn chebyshev_derivative_of_known_series() {
        // T_3 = 4x³ − 3x, T_3' = 12x² − 3 = 6 T_2 + 3 T_0
        let d = chebyshev_derivative(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(d, vec![3.0, 0.0, 6.0]);
        assert!((clenshaw(&[0.0, 0.0, 0.0, 1.0], 0.3_f64) - (4.0 * 0.027 - 0.9)).abs() < 1e-15);
    }

    #[test]
    fn log_cosh_cumulants() {
        let cd = log_cosh_data();
        let expected = [0.0, 1.0, 0.0, -2.0, 0.0];
        for (g, e) in cd.gamma.iter().zip(expected) {
            assert!((g - e).abs() < 1e-6, "{:?}", cd.gamma);
        }
        assert!(cd.fit_residual < 1e-9);
        assert!(cd.lambda(0.0).abs() < 1e-10);
        let z = Complex64::new(0.1, 0.1);
        assert!((cd.lambda_complex(z) - z.cosh().ln()).norm() < 1e-9);
    }

    #[test]
    fn degenerate_law_rejected() {
        let samples: Vec<(f64, f64)> = chebyshev_stencil(0.5, 25).into_iter().map(|s| (s, 0.0)).collect();
        assert!(matches!(fit_cumulants(&samples, 12), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn fit_input_validation() {
        let few: Vec<(f64, f64)> = chebyshev_stencil(0.5, 11).into_iter().map(|s| (s, s * s)).collect();
        assert!(fit_cumulants(&few, 8).is_err());
        let lopsided: Vec<(f64, f64)> = (0..25).map(|i| (i as f64 * 0.01, 0.0)).collect();
        assert!(fit_cumulants(&lopsided, 8).is_err());
    }

    #[test]
    fn zeta_examples() {
        let cd = log_cosh_data();
        for t in [-0.3, -0.1, 0.0, 0.2, 0.3] {
            assert!((zeta(&cd, t).unwrap() + t / 12.0).abs() < 1e-6);
        }
        assert!(zeta(&cd, 0.6).is_err());
    }

    #[test]
    fn zeta_leading_term() {
        let mut cd = log_cosh_data();
        cd.gamma = [0.3, 2.0, 0.7, 0.1, -0.2];
        let z0 = zeta(&cd, 0.0).unwrap();
        assert!((z0 - 0.7 / (6.0 * 2f64.powf(1.5))).abs() < 1e-15);
        // symmetric: ζ(t) = γ₄ t / (24 γ₂²)
        cd.gamma = [0.0, 2.0, 0.0, 0.5, 0.0];
        assert!((zeta(&cd, 0.4).unwrap() - 0.5 * 0.4 / 96.0).abs() < 1e-15);
    }

    #[test]
    fn saddle_examples() {
        let cd = log_cosh_data();
        assert_eq!(solve_saddle(&cd, 0.0, 100, Tail::Upper).unwrap(), 0.0);
        for (t, n) in [(1.0, 100u64), (2.0, 400), (3.0, 1000)] {
            let tau = t / (n as f64).sqrt();
            let s = solve_saddle(&cd, t, n, Tail::Upper).unwrap();
            assert!((s - tau.atanh()).abs() < 1e-9, "{s} vs {}", tau.atanh());
            let residual = cd.lambda_prime(s) - cd.lambda_prime(0.0) - cd.sigma() * tau;
            assert!(residual.abs() < 1e-12);
            let lower = solve_saddle(&cd, t, n, Tail::Lower).unwrap();
            assert!((lower + s).abs() < 1e-10);
            assert!(((series_saddle(&cd, t, n, Tail::Upper) - s) / tau.powi(4)).abs() < 1.0);
        }
        assert!(solve_saddle(&cd, 30.0, 100, Tail::Upper).is_err());
        assert!(solve_saddle(&cd, -1.0, 100, Tail::Upper).is_err());
    }

    #[test]
    fn rate_identity_log_cosh() {
        let cd = log_cosh_data();
        assert!(rate_value(&cd, 0.0).abs() < 1e-9);
        for (t, n) in [(1.0, 100u64), (2.0, 100), (4.0, 400)] {
            for tail in [Tail::Upper, Tail::Lower] {
                let s = solve_saddle(&cd, t, n, tail).unwrap();
                let lhs = rate_value(&cd, s);
                // closed form: s tanh s − log cosh s at s = atanh τ
                let tau = t / (n as f64).sqrt();
                let closed = tau * tau.atanh() + 0.5 * (1.0 - tau * tau).ln();
                assert!((lhs - closed).abs() < 1e-9);
                let rhs = rate_series(&cd, t, n, tail).unwrap();
                assert!((lhs - rhs).abs() < 1e-3 * t * t / n as f64);
            }
        }
    }

    #[test]
    fn mde_examples() {
        let cd = log_cosh_data();
        for tail in [Tail::Upper, Tail::Lower] {
            assert_eq!(mde_theoretical(&cd, 0.0, 400, tail).unwrap(), 0.5);
        }
        let mut gauss = cd.clone();
        gauss.gamma = [0.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(mde_theoretical(&gauss, 1.5, 400, Tail::Upper).unwrap(), normal_upper_tail(1.5));
        let prev = (0..=30).map(|i| mde_theoretical(&cd, i as f64 * 0.1, 400, Tail::Upper).unwrap()).collect::<Vec<_>>();
        assert!(prev.windows(2).all(|w| w[1] < w[0]));
        // log cosh: ζ(τ) = −τ/12, so the correction is e^{−t⁴/(12n)}
        let v = mde_theoretical(&cd, 2.0, 400, Tail::Upper).unwrap();
        let closed = (-16.0 / (12.0 * 400.0_f64)).exp() * normal_upper_tail(2.0);
        assert!((v / closed - 1.0).abs() < 1e-6);
        assert!(mde_theoretical(&cd, 5.0, 400, Tail::Upper).is_err());
    }

    #[test]
    fn llt_examples() {
        let cd = log_cosh_data();
        let n = 400;
        let base = llt_theoretical(&cd, 0.0, n, -0.5, 0.5).unwrap();
        assert!((base * (2.0 * std::f64::consts::PI * n as f64).sqrt() - 1.0).abs() < 1e-8);
        let double = llt_theoretical(&cd, 1.0, n, -1.0, 1.0).unwrap();
        let single = llt_theoretical(&cd, 1.0, n, -0.5, 0.5).unwrap();
        assert!((double - 2.0 * single).abs() < 1e-16);
        assert!(llt_theoretical(&cd, 1.0, n, 0.5, 0.5).is_err());
    }
}
