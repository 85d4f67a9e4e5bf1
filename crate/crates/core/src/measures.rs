//! Finite-support matrix laws, samplers, and bounded searches for the
//! standing moment, strong-irreducibility and proximality conditions.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{angular_distance, matrix_gauge, ProjectivePoint, SquareMatrix};

/// One atom of a finite matrix law.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub matrix: SquareMatrix,
    pub weight: f64,
}

/// A probability measure on `GL(d, R)` with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixLaw {
    dim: usize,
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawAtom {
    m: Vec<Vec<f64>>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct RawLaw {
    dim: usize,
    atoms: Vec<RawAtom>,
}

impl MatrixLaw {
    pub fn new(atoms: Vec<(SquareMatrix, f64)>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::InvalidLaw("law has no atoms".into()))?;
        let dim = first.0.dim();
        let mut total = 0.0;
        for (m, w) in &atoms {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m.dim() });
            }
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidLaw(format!("weight {w} is not strictly positive")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!("weights sum to {total}, not 1")));
        }
        let atoms: Vec<Atom> = atoms.into_iter().map(|(matrix, weight)| Atom { matrix, weight }).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = atoms
            .iter()
            .map(|a| {
                acc += a.weight;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = f64::INFINITY;
        Ok(Self { dim, atoms, cumulative })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// Parses `{"dim":2,"atoms":[{"m":[[..],[..]],"w":0.5},...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawLaw = serde_json::from_str(text)?;
        let atoms = raw
            .atoms
            .into_iter()
            .map(|a| Ok((SquareMatrix::from_rows(&a.m)?, a.w)))
            .collect::<Result<Vec<_>>>()?;
        let law = Self::new(atoms)?;
        if law.dim != raw.dim {
            return Err(Error::DimensionMismatch { expected: raw.dim, got: law.dim });
        }
        Ok(law)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let raw = RawLaw {
            dim: self.dim,
            atoms: self.atoms.iter().map(|a| RawAtom { m: a.matrix.rows(), w: a.weight }).collect(),
        };
        serde_json::to_string(&raw).expect("law serializes")
    }

    /// Index of atom `i` drawn with probability `weight_i`.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.index_for_uniform(u)
    }

    /// Inverse-CDF lookup for a uniform `u ∈ [0, 1)`.
    pub fn index_for_uniform(&self, u: f64) -> usize {
        self.cumulative.iter().position(|c| u < *c).unwrap_or(self.atoms.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &SquareMatrix {
        &self.atoms[self.sample_index(rng)].matrix
    }

    /// Product `g_{w_k} ⋯ g_{w_1}` for the word `w = (w_1, …, w_k)`.
    pub fn word_product(&self, word: &[usize]) -> SquareMatrix {
        word.iter()
            .fold(SquareMatrix::identity(self.dim), |acc, &i| self.atoms[i].matrix.mul(&acc))
    }
}

/// Named laws shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The unipotent pair `[[1,1],[0,1]]`, `[[1,0],[1,1]]`, equal weights.
    Sl2Pair,
    /// `e·R(1)` and `e⁻¹·R(√2)` with equal weights: `σ = ±1` regardless of
    /// the direction, so `Λ(s) = log cosh s`.
    DiagRot,
    /// Two diagonal matrices; reducible (both axes are invariant).
    Diagonal,
    /// Rotations by `π/3` and `2π/3`: isometries with finite orbits.
    RationalRotation,
    /// A single rotation by one radian.
    IrrationalRotation,
}

impl Preset {
    pub const ALL: [Preset; 5] =
        [Preset::Sl2Pair, Preset::DiagRot, Preset::Diagonal, Preset::RationalRotation, Preset::IrrationalRotation];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sl2Pair => "sl2_pair",
            Preset::DiagRot => "diag_rot",
            Preset::Diagonal => "diagonal",
            Preset::RationalRotation => "rational_rotation",
            Preset::IrrationalRotation => "irrational_rotation",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))
    }

    pub fn law(self) -> MatrixLaw {
        use std::f64::consts::{E, PI, SQRT_2};
        let atoms = match self {
            Preset::Sl2Pair => vec![
                (SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(), 0.5),
                (SquareMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap(), 0.5),
            ],
            Preset::DiagRot => vec![
                (SquareMatrix::scaled_rotation(E, 1.0).unwrap(), 0.5),
                (SquareMatrix::scaled_rotation(1.0 / E, SQRT_2).unwrap(), 0.5),
            ],
            Preset::Diagonal => vec![
                (SquareMatrix::diag(&[2.0, 0.5]).unwrap(), 0.5),
                (SquareMatrix::diag(&[0.8, 1.5]).unwrap(), 0.5),
            ],
            Preset::RationalRotation => vec![
                (SquareMatrix::rotation(PI / 3.0), 0.5),
                (SquareMatrix::rotation(2.0 * PI / 3.0), 0.5),
            ],
            Preset::IrrationalRotation => vec![(SquareMatrix::rotation(1.0), 1.0)],
        };
        MatrixLaw::new(atoms).expect("presets are valid laws")
    }
}

/// `Σ w_i N(g_i)^ε`, the exponential moment of the gauge `N(g)`.
pub fn check_moment(law: &MatrixLaw, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::OutOfRange(format!("moment exponent must be positive, got {eps}")));
    }
    Ok(law.atoms.iter().map(|a| a.weight * matrix_gauge(&a.matrix).powf(eps)).sum())
}

/// Outcome of the bounded proximality search.
#[derive(Debug, Clone, PartialEq)]
pub enum Proximality {
    /// `word` multiplies out to a matrix with `|λ₁| / |λ₂| = ratio > 1 + 1e-6`.
    Proximal { word: Vec<usize>, ratio: f64 },
    /// No witness among the words searched; this is not a disproof.
    Inconclusive,
}

const PROXIMAL_MARGIN: f64 = 1e-6;
const WORD_BUDGET: usize = 1 << 20;

fn words_up_to(n_atoms: usize, max_len: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut queue: VecDeque<Vec<usize>> = (0..n_atoms).map(|i| vec![i]).collect();
    let mut emitted = 0usize;
    std::iter::from_fn(move || {
        let word = queue.pop_front()?;
        emitted += 1;
        if emitted > WORD_BUDGET {
            return None;
        }
        if word.len() < max_len {
            for i in 0..n_atoms {
                let mut next = word.clone();
                next.push(i);
                queue.push_back(next);
            }
        }
        Some(word)
    })
}

/// Searches words of length at most `max_word_len` for a proximal product.
pub fn check_proximality(law: &MatrixLaw, max_word_len: usize) -> Result<Proximality> {
    if max_word_len == 0 {
        return Err(Error::OutOfRange("max_word_len must be at least 1".into()));
    }
    for word in words_up_to(law.len(), max_word_len) {
        let m = law.word_product(&word).eigenvalue_moduli();
        if m.len() < 2 {
            return Ok(Proximality::Proximal { word, ratio: f64::INFINITY });
        }
        let ratio = m[0] / m[1];
        if ratio > 1.0 + PROXIMAL_MARGIN {
            return Ok(Proximality::Proximal { word, ratio });
        }
    }
    Ok(Proximality::Inconclusive)
}

/// Outcome of the strong-irreducibility search on the projective line.
#[derive(Debug, Clone, PartialEq)]
pub enum StrongIrreducibility {
    /// No invariant union of at most `m` lines was found.
    Passes { m: usize },
    /// These lines form a finite set invariant under every atom.
    Invariant { lines: Vec<ProjectivePoint> },
}

const LINE_TOL: f64 = 1e-9;

/// Real eigen-directions of a 2×2 matrix; a scalar matrix fixes every line
/// and contributes a representative one.
fn eigen_directions(g: &SquareMatrix) -> Vec<ProjectivePoint> {
    let [[a, b], [c, d]] = g.as_2x2().expect("planar matrix");
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if b.abs() <= 1e-12 * scale && c.abs() <= 1e-12 * scale && (a - d).abs() <= 1e-12 * scale {
        return vec![ProjectivePoint::basis(2, 0)];
    }
    let tr = a + d;
    let disc = tr * tr - 4.0 * (a * d - b * c);
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.max(0.0).sqrt();
    let mut out = Vec::new();
    for lambda in [0.5 * (tr + sq), 0.5 * (tr - sq)] {
        // (g - λ) v = 0: take the row with the larger entries
        let v = if b.abs() + (a - lambda).abs() >= c.abs() + (d - lambda).abs() {
            vec![b, lambda - a]
        } else {
            vec![lambda - d, c]
        };
        if let Ok(p) = ProjectivePoint::new(v) {
            if !out.iter().any(|q| angular_distance(q, &p) < LINE_TOL) {
                out.push(p);
            }
        }
    }
    out
}

/// Orbit of `line` under the atoms, or `None` once it exceeds `limit` lines.
fn finite_orbit(law: &MatrixLaw, line: &ProjectivePoint, limit: usize) -> Option<Vec<ProjectivePoint>> {
    let mut orbit = vec![line.clone()];
    let mut frontier = vec![line.clone()];
    while let Some(x) = frontier.pop() {
        for atom in law.atoms() {
            let image = crate::linalg::act(&atom.matrix, &x);
            if !orbit.iter().any(|q| angular_distance(q, &image) < LINE_TOL) {
                if orbit.len() == limit {
                    return None;
                }
                orbit.push(image.clone());
                frontier.push(image);
            }
        }
    }
    Some(orbit)
}

/// Looks for a `Γ_μ`-invariant set of at most `m` lines in the plane.
///
/// A finite invariant set consists of periodic lines, and a periodic line is
/// an eigen-direction of some word, so candidates are eigen-directions of
/// words of length at most `max_word_len` whose orbits close up.
pub fn check_strong_irreducibility(law: &MatrixLaw, max_word_len: usize, m: usize) -> Result<StrongIrreducibility> {
    if law.dim() != 2 {
        return Err(Error::UnsupportedDimension { dim: law.dim(), what: "strong irreducibility search needs d = 2" });
    }
    if m == 0 || max_word_len == 0 {
        return Err(Error::OutOfRange("m and max_word_len must be at least 1".into()));
    }
    for word in words_up_to(law.len(), max_word_len) {
        for line in eigen_directions(&law.word_product(&word)) {
            if let Some(lines) = finite_orbit(law, &line, m) {
                return Ok(StrongIrreducibility::Invariant { lines });
            }
        }
    }
    Ok(StrongIrreducibility::Passes { m })
}
