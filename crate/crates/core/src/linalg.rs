//! Small dense linear algebra and the projective action of `GL(V)`.
//!
//! Everything downstream consumes three quantities attached to a matrix `g`
//! and a line `x = Rv`:
//!
//! * the projective image `g·x = R(gv)`,
//! * the norm cocycle `σ(g, x) = log(|gv| / |v|)`,
//! * the alignment `δ(y, x) = |f(v)| / (|f| |v|)` with a dual line `y = Rf`.
//!
//! They are tied together by the coefficient decomposition
//! `log |f(gv)| = σ(g, x) + log δ(y, g·x)` for unit `f` and `v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INVERTIBILITY_TOL: f64 = 1e-12;

/// Dense invertible `d × d` matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    /// Builds a matrix from row-major entries, rejecting singular input.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::UnsupportedDimension { dim, what: "dimension must be positive" });
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidLaw("matrix entries must be finite".into()));
        }
        let m = Self { dim, entries };
        m.check_invertible()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, v) in values.iter().enumerate() {
            entries[i * dim + i] = *v;
        }
        Self::new(dim, entries)
    }

    /// Planar rotation by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { dim: 2, entries: vec![c, -s, s, c] }
    }

    /// `scale · R(angle)`, a similarity of the plane.
    pub fn scaled_rotation(scale: f64, angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Self::new(2, vec![scale * c, -scale * s, scale * s, scale * c])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// Entries of a 2×2 matrix as `[[a, b], [c, d]]`.
    pub fn as_2x2(&self) -> Option<[[f64; 2]; 2]> {
        (self.dim == 2).then(|| {
            let e = &self.entries;
            [[e[0], e[1]], [e[2], e[3]]]
        })
    }

    fn scale(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    fn check_invertible(&self) -> Result<()> {
        let scale = self.scale();
        let det = self.det();
        if scale == 0.0 || det.abs() <= INVERTIBILITY_TOL * scale.powi(self.dim as i32) {
            return Err(Error::Singular { det, scale });
        }
        Ok(())
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let d = self.dim;
        if d == 2 {
            let e = &self.entries;
            return e[0] * e[3] - e[1] * e[2];
        }
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))
                .unwrap();
            if a[pivot * d + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..d {
                    a.swap(pivot * d + k, col * d + k);
                }
                det = -det;
            }
            let p = a[col * d + col];
            det *= p;
            for row in col + 1..d {
                let factor = a[row * d + col] / p;
                for k in col..d {
                    a[row * d + k] -= factor * a[col * d + k];
                }
            }
        }
        det
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matrix product");
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * other.entries[k * d + j];
                }
            }
        }
        SquareMatrix { dim: d, entries }
    }

    pub fn transpose(&self) -> SquareMatrix {
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.entries[i * d + j];
            }
        }
        SquareMatrix { dim: d, entries }
    }

    /// `g v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        assert_eq!(v.len(), d, "vector length does not match matrix dimension");
        self.entries
            .chunks(d)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> SquareMatrix {
        let d = self.dim;
        if d == 2 {
            let e = &self.entries;
            let det = self.det();
            return SquareMatrix {
                dim: 2,
                entries: vec![e[3] / det, -e[1] / det, -e[2] / det, e[0] / det],
            };
        }
        let mut a = self.entries.clone();
        let mut inv = Self::identity(d).entries;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))
                .unwrap();
            if pivot != col {
                for k in 0..d {
                    a.swap(pivot * d + k, col * d + k);
                    inv.swap(pivot * d + k, col * d + k);
                }
            }
            let p = a[col * d + col];
            for k in 0..d {
                a[col * d + k] /= p;
                inv[col * d + k] /= p;
            }
            for row in 0..d {
                if row == col {
                    continue;
                }
                let factor = a[row * d + col];
                if factor == 0.0 {
                    continue;
                }
                for k in 0..d {
                    a[row * d + k] -= factor * a[col * d + k];
                    inv[row * d + k] -= factor * inv[col * d + k];
                }
            }
        }
        SquareMatrix { dim: d, entries: inv }
    }

    /// Singular values in decreasing order.
    ///
    /// Closed form for `d = 2`, one-sided Jacobi otherwise.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.dim == 2 {
            let e = &self.entries;
            let (a, b, c, d) = (e[0], e[1], e[2], e[3]);
            // s1² + s2² = |g|_F², s1 s2 = |det g|
            let frob2 = a * a + b * b + c * c + d * d;
            let det = (a * d - b * c).abs();
            let disc = ((a - d).powi(2) + (b + c).powi(2)).sqrt() * ((a + d).powi(2) + (b - c).powi(2)).sqrt();
            let s1 = (0.5 * (frob2 + disc)).sqrt();
            let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
            return vec![s1, s2];
        }
        jacobi_singular_values(self.dim, &self.entries)
    }

    /// Operator norm `sup |gv| / |v|`.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values()[0]
    }

    /// Moduli of the eigenvalues in decreasing order.
    ///
    /// Exact for `d = 2`. For larger `d` the moduli are recovered from the
    /// singular values of high powers, `s_i(g^k)^{1/k} → |λ_i|`.
    pub fn eigenvalue_moduli(&self) -> Vec<f64> {
        if self.dim == 2 {
            let e = &self.entries;
            let tr = e[0] + e[3];
            let det = self.det();
            let disc = tr * tr - 4.0 * det;
            if disc < 0.0 {
                let m = det.abs().sqrt();
                return vec![m, m];
            }
            let sq = disc.sqrt();
            // avoid cancellation in the smaller root
            let big = 0.5 * (tr + tr.signum() * sq);
            let big = if big == 0.0 { 0.5 * sq } else { big };
            let small = det / big;
            let (x, y) = (big.abs(), small.abs());
            return if x >= y { vec![x, y] } else { vec![y, x] };
        }
        // log s_i(g^k) = k log|λ_i| + c_i + o(1); differencing the levels
        // k and 2k removes the constant c_i
        let mut p = self.clone();
        let mut log_scale = 0.0;
        let mut levels: Vec<Vec<f64>> = vec![self.singular_values().iter().map(|s| s.ln()).collect()];
        for _ in 0..40 {
            let next = p.mul(&p);
            let norm = next.operator_norm();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            let entries = next.entries.iter().map(|e| e / norm).collect();
            p = SquareMatrix { dim: self.dim, entries };
            log_scale = 2.0 * log_scale + norm.ln();
            let sv = p.singular_values();
            // beyond this the second singular value is rounding noise
            if sv[1] < 1e-10 * sv[0] {
                break;
            }
            levels.push(sv.iter().map(|s| s.ln() + log_scale).collect());
        }
        let last = levels.len() - 1;
        if last == 0 {
            return levels[0].iter().map(|l| l.exp()).collect();
        }
        let k_prev = (1u64 << (last - 1)) as f64;
        levels[last].iter().zip(&levels[last - 1]).map(|(a, b)| ((a - b) / k_prev).exp()).collect()
    }
}

fn jacobi_singular_values(d: usize, entries: &[f64]) -> Vec<f64> {
    // columns of g, orthogonalized pairwise until all pairs are orthogonal
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| entries[i * d + j]).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..d {
            for q in p + 1..d {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..d {
                    let a = cols[p][i];
                    let b = cols[q][i];
                    cols[p][i] = c * a - s * b;
                    cols[q][i] = s * a + c * b;
                }
            }
        }
        if off < 1e-12 {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn normalize_canonical(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    let sign = v.iter().find(|x| **x != 0.0).map(|x| x.signum()).unwrap_or(1.0);
    for x in v.iter_mut() {
        *x *= sign / norm;
    }
    Some(v)
}

/// A line `x = Rv` in `V`, stored as a unit vector whose first nonzero
/// coordinate is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectivePoint {
    rep: Vec<f64>,
}

impl ProjectivePoint {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        normalize_canonical(v)
            .map(|rep| Self { rep })
            .ok_or_else(|| Error::OutOfRange("zero or non-finite vector has no direction".into()))
    }

    /// Direction `(cos θ, sin θ)` in the plane.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(vec![c, s]).expect("unit vector")
    }

    /// The basis direction `R e_i` in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self { rep: v }
    }

    pub fn rep(&self) -> &[f64] {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    /// Angle in `[0, π)` of a planar line.
    pub fn angle(&self) -> f64 {
        assert_eq!(self.rep.len(), 2, "angle is only defined for planar lines");
        line_angle(self.rep[0], self.rep[1])
    }
}

/// A dual line `y = Rf` in `V*`, coordinates in the dual basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    rep: Vec<f64>,
}

impl DualPoint {
    pub fn new(f: Vec<f64>) -> Result<Self> {
        normalize_canonical(f)
            .map(|rep| Self { rep })
            .ok_or_else(|| Error::OutOfRange("zero or non-finite functional has no direction".into()))
    }

    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(vec![c, s]).expect("unit vector")
    }

    /// The coordinate functional `e_i*`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self { rep: v }
    }

    pub fn rep(&self) -> &[f64] {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }
}

/// Angle in `[0, π)` of the line through `(c, s)`.
pub fn line_angle(c: f64, s: f64) -> f64 {
    let mut theta = s.atan2(c);
    if theta < 0.0 {
        theta += std::f64::consts::PI;
    }
    if theta >= std::f64::consts::PI {
        theta -= std::f64::consts::PI;
    }
    theta
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `g·x`.
pub fn act(g: &SquareMatrix, x: &ProjectivePoint) -> ProjectivePoint {
    ProjectivePoint::new(g.apply(&x.rep)).expect("invertible matrices map lines to lines")
}

/// Norm cocycle `σ(g, x) = log(|gv| / |v|)`.
pub fn cocycle(g: &SquareMatrix, x: &ProjectivePoint) -> f64 {
    norm(&g.apply(&x.rep)).ln()
}

/// Alignment `δ(y, x) = |f(v)| / (|f| |v|)`, in `[0, 1]`.
pub fn delta(y: &DualPoint, x: &ProjectivePoint) -> f64 {
    dot(&y.rep, &x.rep).abs().min(1.0)
}

/// Angular distance `|v ∧ v'| / (|v| |v'|)`, in `[0, 1]`.
pub fn angular_distance(x: &ProjectivePoint, other: &ProjectivePoint) -> f64 {
    let (a, b) = (&x.rep, &other.rep);
    let mut wedge2 = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let w = a[i] * b[j] - a[j] * b[i];
            wedge2 += w * w;
        }
    }
    wedge2.sqrt().min(1.0)
}

/// `log |f(gv)|` for the unit representatives of `y` and `x`, evaluated
/// directly.
///
/// Returns `f64::NEG_INFINITY` when `δ(y, g·x) < 1e-300`; such events are
/// degenerate (probability zero under the laws considered here).
pub fn coefficient_log(y: &DualPoint, g: &SquareMatrix, x: &ProjectivePoint) -> f64 {
    let gv = g.apply(&x.rep);
    let n = norm(&gv);
    let pairing = dot(&y.rep, &gv).abs();
    if pairing / n < 1e-300 {
        return f64::NEG_INFINITY;
    }
    pairing.ln()
}

/// `σ(g, x) + log δ(y, g·x)`: the same quantity as [`coefficient_log`],
/// through the cocycle decomposition.
pub fn coefficient_log_decomposed(y: &DualPoint, g: &SquareMatrix, x: &ProjectivePoint) -> f64 {
    let d = delta(y, &act(g, x));
    if d < 1e-300 {
        return f64::NEG_INFINITY;
    }
    cocycle(g, x) + d.ln()
}

/// `N(g) = max(|g|, |g⁻¹|)`; always at least 1.
pub fn matrix_gauge(g: &SquareMatrix) -> f64 {
    let sv = g.singular_values();
    let smax = sv[0];
    let smin = sv[sv.len() - 1];
    smax.max(1.0 / smin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{E, PI};

    fn same_line(a: &ProjectivePoint, b: &ProjectivePoint) -> bool {
        angular_distance(a, b) < 1e-12
    }

    #[test]
    fn rejects_singular_and_ragged() {
        assert!(matches!(
            SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]),
            Err(Error::Singular { .. })
        ));
        assert!(SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0]]).is_err());
        assert!(SquareMatrix::new(2, vec![1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn canonical_sign() {
        let x = ProjectivePoint::new(vec![-3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(x.rep()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(x.rep()[1], -0.8, epsilon = 1e-15);
        let z = ProjectivePoint::new(vec![0.0, -2.0]).unwrap();
        assert_eq!(z.rep(), &[0.0, 1.0]);
        assert!(ProjectivePoint::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn act_examples() {
        let x = ProjectivePoint::from_angle(0.7);
        assert!(same_line(&act(&SquareMatrix::identity(2), &x), &x));
        let e1 = ProjectivePoint::basis(2, 0);
        assert!(same_line(&act(&SquareMatrix::diag(&[2.0, 1.0]).unwrap(), &e1), &e1));
        let rotated = act(&SquareMatrix::rotation(PI / 3.0), &e1);
        assert_abs_diff_eq!(rotated.angle(), PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn cocycle_examples() {
        let x = ProjectivePoint::from_angle(1.1);
        assert_abs_diff_eq!(cocycle(&SquareMatrix::identity(2), &x), 0.0, epsilon = 1e-15);
        let g = SquareMatrix::diag(&[E * E, 1.0 / E]).unwrap();
        assert_abs_diff_eq!(cocycle(&g, &ProjectivePoint::basis(2, 0)), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn delta_and_distance_examples() {
        let y = DualPoint::basis(2, 0);
        assert_abs_diff_eq!(delta(&y, &ProjectivePoint::basis(2, 0)), 1.0);
        assert_abs_diff_eq!(delta(&y, &ProjectivePoint::basis(2, 1)), 0.0);
        for theta in [0.3, 1.2, 2.9] {
            assert_abs_diff_eq!(delta(&y, &ProjectivePoint::from_angle(theta)), theta.cos().abs(), epsilon = 1e-15);
        }
        let e1 = ProjectivePoint::basis(2, 0);
        assert_abs_diff_eq!(angular_distance(&e1, &e1), 0.0);
        assert_abs_diff_eq!(angular_distance(&e1, &ProjectivePoint::basis(2, 1)), 1.0);
        assert_abs_diff_eq!(angular_distance(&e1, &ProjectivePoint::from_angle(PI / 6.0)), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn coefficient_examples() {
        let y = DualPoint::basis(2, 0);
        let x = ProjectivePoint::basis(2, 0);
        assert_abs_diff_eq!(coefficient_log(&y, &SquareMatrix::identity(2), &x), 0.0);
        let g = SquareMatrix::diag(&[3.0_f64.exp(), 1.0]).unwrap();
        assert_abs_diff_eq!(coefficient_log(&y, &g, &x), 3.0, epsilon = 1e-14);
        // f annihilates g v
        let rot = SquareMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(coefficient_log(&y, &rot, &x), f64::NEG_INFINITY);
        assert_eq!(coefficient_log_decomposed(&y, &rot, &x), f64::NEG_INFINITY);
    }

    #[test]
    fn gauge_examples() {
        assert_abs_diff_eq!(matrix_gauge(&SquareMatrix::identity(2)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(matrix_gauge(&SquareMatrix::diag(&[2.0, 0.5]).unwrap()), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(matrix_gauge(&SquareMatrix::rotation(0.4)), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_matches_closed_form() {
        let g = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 3.0]]).unwrap();
        let closed = g.singular_values();
        let jac = jacobi_singular_values(2, g.entries());
        for (a, b) in closed.iter().zip(&jac) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let g3 = SquareMatrix::diag(&[3.0, -0.5, 2.0]).unwrap();
        let sv = g3.singular_values();
        assert_abs_diff_eq!(sv[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sv[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sv[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalue_moduli_cases() {
        let fib = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let m = fib.eigenvalue_moduli();
        assert_abs_diff_eq!(m[0], (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m[1], (3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-13);
        let rot = SquareMatrix::rotation(1.0).eigenvalue_moduli();
        assert_abs_diff_eq!(rot[0], rot[1], epsilon = 1e-15);
        let d3 = SquareMatrix::from_rows(&[vec![3.0, 1.0, 0.0], vec![0.0, 2.0, 1.0], vec![0.0, 0.0, 0.5]]).unwrap();
        let m3 = d3.eigenvalue_moduli();
        assert!((m3[0] - 3.0).abs() < 1e-3 && (m3[1] - 2.0).abs() < 1e-3, "{m3:?}");
    }

    #[test]
    fn inverse_and_det() {
        let g = SquareMatrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]).unwrap();
        assert_abs_diff_eq!(g.det(), 18.0, epsilon = 1e-12);
        let p = g.mul(&g.inverse());
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(p.get(i, j), if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }
}
