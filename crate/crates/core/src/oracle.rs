//! Exact laws of short products by enumerating every word.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{line_angle, DualPoint, ProjectivePoint};
use crate::measures::MatrixLaw;
use crate::montecarlo::{Event, TiltedKernel};
use crate::transfer::GridFunction;

/// Largest number of words [`enumerate`] will produce.
pub const WORD_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordEntry {
    pub probability: f64,
    /// `σ(G_n, x)`.
    pub cocycle: f64,
    /// `log δ(y, G_n·x)`.
    pub logdelta: f64,
    pub point: ProjectivePoint,
}

/// Every word of length `n` with its probability and end state, in
/// lexicographic order of `(g_1, …, g_n)`.
#[derive(Debug, Clone, Serialize)]
pub struct WordTable {
    pub n: usize,
    pub entries: Vec<WordEntry>,
}

impl WordTable {
    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("probability,cocycle,logdelta,point\n");
        for e in &self.entries {
            let point: Vec<String> = e.point.rep().iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&format!("{:e},{:e},{:e},{}\n", e.probability, e.cocycle, e.logdelta, point.join(" ")));
        }
        out
    }
}

fn check_budget(atoms: usize, n: usize) -> Result<()> {
    let required = (atoms as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > WORD_LIMIT {
        return Err(Error::BudgetExceeded { required, limit: WORD_LIMIT });
    }
    Ok(())
}

fn descend(law: &MatrixLaw, depth: usize, v: &[f64], sigma: f64, prob: f64, f: &[f64], out: &mut Vec<WordEntry>) {
    if depth == 0 {
        let d: f64 = f.iter().zip(v).map(|(a, b)| a * b).sum();
        out.push(WordEntry {
            probability: prob,
            cocycle: sigma,
            logdelta: d.abs().min(1.0).ln(),
            point: ProjectivePoint::new(v.to_vec()).expect("unit vector"),
        });
        return;
    }
    for atom in law.atoms() {
        let mut u = atom.matrix.apply(v);
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        u.iter_mut().for_each(|a| *a /= norm);
        descend(law, depth - 1, &u, sigma + norm.ln(), prob * atom.weight, f, out);
    }
}

/// Depth-first enumeration sharing each prefix; the first letter splits the
/// work into independent subtrees.
pub fn enumerate(law: &MatrixLaw, n: usize, x: &ProjectivePoint, y: &DualPoint) -> Result<WordTable> {
    check_budget(law.len(), n)?;
    if x.dim() != law.dim() || y.dim() != law.dim() {
        return Err(Error::DimensionMismatch { expected: law.dim(), got: x.dim().max(y.dim()) });
    }
    if n == 0 {
        let mut entries = Vec::new();
        descend(law, 0, x.rep(), 0.0, 1.0, y.rep(), &mut entries);
        return Ok(WordTable { n, entries });
    }
    let parts: Vec<Vec<WordEntry>> = law
        .atoms()
        .par_iter()
        .map(|atom| {
            let mut u = atom.matrix.apply(x.rep());
            let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            u.iter_mut().for_each(|a| *a /= norm);
            let mut out = Vec::new();
            descend(law, n - 1, &u, norm.ln(), atom.weight, y.rep(), &mut out);
            out
        })
        .collect();
    Ok(WordTable { n, entries: parts.into_iter().flatten().collect() })
}

/// `Σ_w p_w φ(x_w) 1{event}` for the centred coefficient
/// `σ_w + log δ_w − nλ₁` at level `√nσt`.
pub fn exact_expectation(
    table: &WordTable,
    phi: &dyn Fn(&ProjectivePoint) -> f64,
    event: Event,
    lambda1: f64,
    sigma: f64,
    t: f64,
) -> f64 {
    let n = table.n as f64;
    let shift = n.sqrt() * sigma * t;
    table
        .entries
        .iter()
        .filter(|e| {
            let x = e.cocycle + e.logdelta - n * lambda1;
            match event {
                Event::Upper => x >= shift,
                Event::Lower => x <= -shift,
                Event::Window { a1, a2 } => (a1..=a2).contains(&(x - shift)),
            }
        })
        .map(|e| e.probability * phi(&e.point))
        .sum()
}

/// Outcome of [`verify_change_of_measure`].
#[derive(Debug, Clone, Serialize)]
pub struct ChangeOfMeasureReport {
    pub words: usize,
    /// Worst `|q(w)·weight(w) − p(w)|` for the kernel the sampler uses.
    pub sampler_discrepancy: f64,
    /// Same for the product-form kernel
    /// `q_i(x) = w_i e^{sσ(g_i,x)} r(g_i·x) / Z(x)` with weight
    /// `exp(Σ log Ẑ(x_k) − sσ(G_n,x) − log r(x_n) + log r(x_0))`.
    pub telescoped_discrepancy: f64,
    /// Spread of `Σ_k log Ẑ(x_k)` over words; near zero when `r` is the
    /// eigenfunction of the tilted operator.
    pub log_z_spread: f64,
}

impl ChangeOfMeasureReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.sampler_discrepancy.max(self.telescoped_discrepancy)
    }
}

fn words(atoms: usize, n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..atoms.pow(n as u32)).map(move |mut code| {
        let mut word = vec![0; n];
        for slot in word.iter_mut().rev() {
            *slot = code % atoms;
            code /= atoms;
        }
        word
    })
}

/// Enumerates the tilted chain word by word against the direct law, for
/// every word indicator `h`.
pub fn verify_change_of_measure(law: &MatrixLaw, s: f64, r: &GridFunction, n: usize, x: &ProjectivePoint) -> Result<ChangeOfMeasureReport> {
    if n > 6 {
        return Err(Error::OutOfRange(format!("change-of-measure enumeration is limited to n ≤ 6, got {n}")));
    }
    let kernel = TiltedKernel::new(law, s, r)?;
    let mats: Vec<[[f64; 2]; 2]> = law.atoms().iter().map(|a| a.matrix.as_2x2().expect("planar law")).collect();
    let weights = law.weights();
    let r_at = |v: [f64; 2]| r.eval_angle(line_angle(v[0], v[1]));
    let mut sampler_discrepancy: f64 = 0.0;
    let mut telescoped_discrepancy: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut count = 0;
    for word in words(law.len(), n) {
        count += 1;
        let direct: f64 = word.iter().map(|&i| weights[i]).product();
        let (q, log_w) = kernel.replay(x, &word);
        sampler_discrepancy = sampler_discrepancy.max((q * log_w.exp() - direct).abs());

        let mut v = [x.rep()[0], x.rep()[1]];
        let mut prob = 1.0;
        let mut sigma = 0.0;
        let mut log_z = 0.0;
        for &i in &word {
            let images: Vec<([f64; 2], f64)> = mats
                .iter()
                .map(|g| {
                    let u = [g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1]];
                    let norm = (u[0] * u[0] + u[1] * u[1]).sqrt();
                    ([u[0] / norm, u[1] / norm], norm.ln())
                })
                .collect();
            let masses: Vec<f64> = images.iter().zip(&weights).map(|((u, sg), w)| w * (s * sg).exp() * r_at(*u)).collect();
            let z: f64 = masses.iter().sum();
            prob *= masses[i] / z;
            log_z += (z / r_at(v)).ln();
            sigma += images[i].1;
            v = images[i].0;
        }
        let weight = (log_z - s * sigma - r_at(v).ln() + r_at([x.rep()[0], x.rep()[1]]).ln()).exp();
        telescoped_discrepancy = telescoped_discrepancy.max((prob * weight - direct).abs());
        lo = lo.min(log_z);
        hi = hi.max(log_z);
    }
    Ok(ChangeOfMeasureReport { words: count, sampler_discrepancy, telescoped_discrepancy, log_z_spread: hi - lo })
}
