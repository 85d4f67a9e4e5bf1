//! Smoothing kernel, one-sided exponentials with their Fourier transforms,
//! the smoothing sandwich and the partition of unity in `−log δ`.
//!
//! Fourier convention: `ĥ(u) = ∫ e^{−iuw} h(w) dw`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{angular_distance, delta, DualPoint, ProjectivePoint};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// [`adaptive_simpson`] over consecutive panels of width at most `panel`,
/// so narrow features are never stepped over by the first Simpson sample.
pub fn integrate_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panel: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let count = ((b - a) / panel).ceil().max(1.0) as usize;
    let h = (b - a) / count as f64;
    let per = tol / count as f64;
    (0..count).map(|i| adaptive_simpson(f, a + i as f64 * h, a + (i + 1) as f64 * h, per)).sum()
}

/// `∫ e^{−iuw} h(w) dw` over `[a, b]`, with `h` smooth on each piece between
/// consecutive `breaks`.
pub fn fourier_quadrature(h: &dyn Fn(f64) -> f64, breaks: &[f64], u: f64, tol: f64) -> Complex64 {
    let panel = if u == 0.0 { 1.0 } else { (std::f64::consts::PI / u.abs()).min(1.0) };
    let mut total = Complex64::new(0.0, 0.0);
    for w in breaks.windows(2) {
        let re = integrate_panels(&|x| h(x) * (u * x).cos(), w[0], w[1], panel, tol);
        let im = integrate_panels(&|x| -h(x) * (u * x).sin(), w[0], w[1], panel, tol);
        total += Complex64::new(re, im);
    }
    total
}

const RHO_NORM: f64 = 3.0 / (8.0 * std::f64::consts::PI);
/// `ρ(w) ≤ RHO_TAIL / w⁴`.
pub const RHO_TAIL: f64 = 96.0 / std::f64::consts::PI;

/// Cubic B-spline on `[−2, 2]`, unit mass.
fn cubic_bspline(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        2.0 / 3.0 - x * x + 0.5 * x * x * x
    } else if x <= 2.0 {
        (2.0 - x).powi(3) / 6.0
    } else {
        0.0
    }
}

/// `ρ(w) = (3/8π)(sin(w/4)/(w/4))⁴`, a probability density whose transform
/// `ρ̂(u) = (3/2) N(2u)` is a cubic B-spline supported on `[−1, 1]`.
pub fn rho(w: f64) -> f64 {
    let x = 0.25 * w;
    if x.abs() < 1e-4 {
        // sin x / x = 1 − x²/6 + x⁴/120
        let x2 = x * x;
        let sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        return RHO_NORM * sinc.powi(4);
    }
    RHO_NORM * (x.sin() / x).powi(4)
}

pub fn rho_hat(u: f64) -> f64 {
    1.5 * cubic_bspline(2.0 * u)
}

/// `ρ_ε(w) = ε⁻¹ρ(w/ε)`, `ρ̂_ε(u) = ρ̂(εu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingKernel {
    pub eps: f64,
}

impl SmoothingKernel {
    pub fn density(&self, w: f64) -> f64 {
        rho(w / self.eps) / self.eps
    }

    pub fn transform(&self, u: f64) -> f64 {
        rho_hat(self.eps * u)
    }

    /// Half-width of the support of `ρ̂_ε`.
    pub fn bandwidth(&self) -> f64 {
        1.0 / self.eps
    }

    /// Lipschitz constant of `ρ̂_ε`: `max|ρ̂'| = 2`, attained at `|u| = 1/3`.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.eps
    }

    /// `∫_{|w| < r} ρ_ε(w) dw`.
    pub fn mass_within(&self, r: f64) -> f64 {
        let r = r / self.eps;
        2.0 * integrate_panels(&rho, 0.0, r, 4.0 * std::f64::consts::PI, 1e-12)
    }

    /// `∫ ρ_ε` by quadrature, truncated where the tail bound drops below `1e-12`.
    pub fn total_mass(&self) -> f64 {
        // ∫_R^∞ RHO_TAIL w⁻⁴ dw = RHO_TAIL / (3R³)
        let cutoff = (RHO_TAIL / 3e-12).cbrt();
        self.mass_within(cutoff * self.eps)
    }
}

pub fn make_kernel(eps: f64) -> Result<SmoothingKernel> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange(format!("kernel scale must lie in (0, 1), got {eps}")));
    }
    Ok(SmoothingKernel { eps })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange(format!("ε must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn check_psi(s: f64, eps: f64) -> Result<()> {
    check_eps(eps)?;
    if !(s > 0.0) {
        return Err(Error::OutOfRange(format!("ψ⁻ needs s > 0, got {s}")));
    }
    Ok(())
}

fn check_phi(s: f64, eps: f64) -> Result<()> {
    check_eps(eps)?;
    if !(s < 0.0) {
        return Err(Error::OutOfRange(format!("φ⁺ needs s < 0, got {s}")));
    }
    Ok(())
}

/// `ψ⁻_{s,ε}(w) = e^{−s(w+ε)} 1{w ≥ ε}`, the lower envelope of `e^{−sw}1{w ≥ 0}`.
pub fn psi_minus(s: f64, eps: f64, w: f64) -> Result<f64> {
    check_psi(s, eps)?;
    Ok(if w >= eps { (-s * (w + eps)).exp() } else { 0.0 })
}

/// `ψ̂⁻_{s,ε}(u) = e^{−2εs} e^{−iεu} / (s + iu)`.
pub fn psi_minus_hat(s: f64, eps: f64, u: f64) -> Result<Complex64> {
    check_psi(s, eps)?;
    Ok((-2.0 * eps * s).exp() * Complex64::new(0.0, -eps * u).exp() / Complex64::new(s, u))
}

/// Upper envelope of `e^{−sw}1{w ≤ 0}` for `s < 0`: `0` above `ε`, `1` on
/// `[−ε, ε]`, `e^{−s(w+ε)}` below `−ε`.
pub fn phi_plus(s: f64, eps: f64, w: f64) -> Result<f64> {
    check_phi(s, eps)?;
    Ok(if w > eps {
        0.0
    } else if w >= -eps {
        1.0
    } else {
        (-s * (w + eps)).exp()
    })
}

/// `φ̂⁺_{s,ε}(u) = 2 sin(εu)/u + e^{iεu}/(−s − iu)`, with `sin(ε·0)/0 = ε`.
pub fn phi_plus_hat(s: f64, eps: f64, u: f64) -> Result<Complex64> {
    check_phi(s, eps)?;
    let sinc = if u == 0.0 { eps } else { (eps * u).sin() / u };
    Ok(Complex64::new(2.0 * sinc, 0.0) + Complex64::new(0.0, eps * u).exp() / Complex64::new(-s, -u))
}

/// Test functions for the smoothing sandwich, with closed-form envelopes
/// `ψ±_ε(w) = sup/inf_{|w−w'| ≤ ε} ψ(w')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Shape {
    Zero,
    /// `1{w ∈ [a, b]}`.
    Indicator { a: f64, b: f64 },
    /// `e^{−sw} 1{w ≥ 0}`, `s > 0`.
    OneSided { s: f64 },
}

impl Shape {
    pub fn value(&self, w: f64) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Indicator { a, b } => f64::from(u8::from((a..=b).contains(&w))),
            Shape::OneSided { s } => {
                if w >= 0.0 {
                    (-s * w).exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn upper(&self, eps: f64, w: f64) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Indicator { a, b } => Shape::Indicator { a: a - eps, b: b + eps }.value(w),
            Shape::OneSided { s } => {
                if w >= eps {
                    (-s * (w - eps)).exp()
                } else if w >= -eps {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn lower(&self, eps: f64, w: f64) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Indicator { a, b } => {
                if b - a > 2.0 * eps {
                    Shape::Indicator { a: a + eps, b: b - eps }.value(w)
                } else {
                    0.0
                }
            }
            Shape::OneSided { s } => {
                if w >= eps {
                    (-s * (w + eps)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the envelopes may jump.
    fn jumps(&self, eps: f64) -> Vec<f64> {
        match *self {
            Shape::Zero => vec![],
            Shape::Indicator { a, b } => vec![a - eps, a + eps, b - eps, b + eps],
            Shape::OneSided { .. } => vec![-eps, eps],
        }
    }
}

/// Bounds of the sandwich at one point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SandwichPoint {
    pub w: f64,
    /// `ψ⁻_ε ∗ ρ_{ε²}(w) − ∫_{|u| ≥ ε} ψ⁻_ε(w − u) ρ_{ε²}(u) du`.
    pub lower: f64,
    pub psi: f64,
    /// `ψ⁺_ε ∗ ρ_{ε²}(w)`.
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub eps: f64,
    /// `1/ρ_{ε²}(|u| < ε) − 1`.
    pub c_rho: f64,
    /// Smallest `c` with `ψ ≤ (1 + c) ψ⁺_ε ∗ ρ_{ε²}` on the grid.
    pub fitted_c: f64,
    pub max_violation: f64,
    pub points: Vec<SandwichPoint>,
}

/// `∫ g(w − u) ρ_{ε²}(u) du` over `u ∈ (lo, hi)` (in units of `ε²`
/// the kernel is `ρ`), splitting at the jumps of `g`.
fn convolve(g: &dyn Fn(f64) -> f64, jumps: &[f64], eps2: f64, w: f64, lo: f64, hi: f64) -> f64 {
    // substitute u = ε² v
    let (vlo, vhi) = (lo / eps2, hi / eps2);
    let mut breaks: Vec<f64> = jumps.iter().map(|j| (w - j) / eps2).filter(|v| *v > vlo && *v < vhi).collect();
    if 0.0 > vlo && 0.0 < vhi {
        breaks.push(0.0);
    }
    breaks.push(vlo);
    breaks.push(vhi);
    breaks.sort_by(f64::total_cmp);
    let f = |v: f64| g(w - eps2 * v) * rho(v);
    breaks
        .windows(2)
        .map(|p| {
            // the kernel decays like v⁻⁴: refine panels near the origin only
            let near = p[0].abs().min(p[1].abs());
            let panel = (4.0 * std::f64::consts::PI).max(near);
            integrate_panels(&f, p[0], p[1], panel, 1e-12)
        })
        .sum()
}

/// Evaluates both sides of the smoothing sandwich for `shape` on `grid`.
pub fn smoothing_sandwich_check(shape: &Shape, eps: f64, grid: &[f64]) -> Result<SandwichReport> {
    check_eps(eps)?;
    let eps2 = eps * eps;
    let kernel = SmoothingKernel { eps: eps2 };
    let c_rho = 1.0 / kernel.mass_within(eps) - 1.0;
    // beyond this the kernel mass is below 1e-12
    let reach = eps2 * (RHO_TAIL / 3e-12).cbrt();
    let jumps = shape.jumps(eps);
    let lower_fn = |w: f64| shape.lower(eps, w);
    let upper_fn = |w: f64| shape.upper(eps, w);
    let mut points = Vec::with_capacity(grid.len());
    let mut fitted_c: f64 = 0.0;
    let mut max_violation: f64 = 0.0;
    for &w in grid {
        let full_lower = convolve(&lower_fn, &jumps, eps2, w, -reach, reach);
        let outside = convolve(&lower_fn, &jumps, eps2, w, -reach, -eps) + convolve(&lower_fn, &jumps, eps2, w, eps, reach);
        let lower = full_lower - outside;
        let upper = convolve(&upper_fn, &jumps, eps2, w, -reach, reach);
        let psi = shape.value(w);
        if upper > 0.0 {
            fitted_c = fitted_c.max(psi / upper - 1.0);
        }
        max_violation = max_violation.max(lower - psi).max(psi - (1.0 + c_rho) * upper);
        points.push(SandwichPoint { w, lower, psi, upper });
    }
    Ok(SandwichReport { eps, c_rho, fitted_c, max_violation: max_violation.max(0.0), points })
}

/// `U(t) = min(max(t, 0), 1)`.
pub fn uniform_cdf(t: f64) -> f64 {
    t.clamp(0.0, 1.0)
}

/// Hölder sup-norm-plus-seminorm estimates of the `χ_k`, with the fitted
/// constant of the envelope `c e^{γka} / a^γ`.
#[derive(Debug, Clone, Serialize)]
pub struct HolderEnvelope {
    pub norms: Vec<f64>,
    pub fitted_c: f64,
}

/// Partition of unity `χ_k^y(x) = h_k(−log δ(y, x))` on `P(V)`.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionFamily {
    pub a: f64,
    pub gamma: f64,
    pub y: DualPoint,
}

pub fn partition(a: f64, gamma: f64, y: DualPoint) -> Result<PartitionFamily> {
    if !(a > 0.0 && a <= 0.5) {
        return Err(Error::OutOfRange(format!("step a must lie in (0, 1/2], got {a}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::OutOfRange(format!("Hölder exponent must lie in (0, 1], got {gamma}")));
    }
    Ok(PartitionFamily { a, gamma, y })
}

impl PartitionFamily {
    /// `U_k(t) = U((t − (k−1)a)/a)`.
    pub fn u_k(&self, k: usize, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 1.0;
        }
        uniform_cdf((t - (k as f64 - 1.0) * self.a) / self.a)
    }

    /// `h_k = U_k − U_{k+1}`.
    pub fn h_k(&self, k: usize, t: f64) -> f64 {
        self.u_k(k, t) - self.u_k(k + 1, t)
    }

    fn depth(&self, x: &ProjectivePoint) -> f64 {
        -delta(&self.y, x).ln()
    }

    pub fn chi(&self, k: usize, x: &ProjectivePoint) -> f64 {
        self.h_k(k, self.depth(x))
    }

    /// `χ̄_k^y(x) = U_k(−log δ(y, x))`.
    pub fn chi_bar(&self, k: usize, x: &ProjectivePoint) -> f64 {
        self.u_k(k, self.depth(x))
    }

    /// Window `[a(k−1), a(k+1)]` of `−log δ` outside which `χ_k` vanishes.
    pub fn support_window(&self, k: usize) -> (f64, f64) {
        (self.a * (k as f64 - 1.0), self.a * (k as f64 + 1.0))
    }

    /// `sup|χ_k| + sup |χ_k(x) − χ_k(x')| / d(x, x')^γ` on planar lines,
    /// with the quotient sampled over a fine angle grid and geometric
    /// offsets.
    pub fn hoelder_norm_estimate(&self, k: usize) -> Result<f64> {
        if self.y.dim() != 2 {
            return Err(Error::UnsupportedDimension { dim: self.y.dim(), what: "Hölder estimates sample planar lines" });
        }
        let nodes = 20_000;
        let offsets: Vec<f64> = (0..40).map(|i| 0.5 * 0.7_f64.powi(i)).collect();
        let mut sup: f64 = 0.0;
        let mut quotient: f64 = 0.0;
        for j in 0..nodes {
            let theta = std::f64::consts::PI * j as f64 / nodes as f64;
            let x = ProjectivePoint::from_angle(theta);
            let value = self.chi(k, &x);
            sup = sup.max(value.abs());
            for h in &offsets {
                let other = ProjectivePoint::from_angle(theta + h);
                let d = angular_distance(&x, &other);
                if d > 0.0 {
                    quotient = quotient.max((value - self.chi(k, &other)).abs() / d.powf(self.gamma));
                }
            }
        }
        Ok(sup + quotient)
    }

    /// Norm estimates for `k = 0..=k_max` and the smallest `c` with
    /// `‖χ_k‖_γ ≤ c e^{γka} / a^γ` for all of them.
    pub fn hoelder_envelope(&self, k_max: usize) -> Result<HolderEnvelope> {
        let norms = (0..=k_max).map(|k| self.hoelder_norm_estimate(k)).collect::<Result<Vec<_>>>()?;
        let fitted_c = norms
            .iter()
            .enumerate()
            .map(|(k, n)| n * self.a.powf(self.gamma) / (self.gamma * k as f64 * self.a).exp())
            .fold(0.0, f64::max);
        Ok(HolderEnvelope { norms, fitted_c })
    }
}
