//! Perron–Frobenius data of a primitive substitution: expansion factor,
//! letter frequencies, tile lengths, and the derived dynamical constants.
//!
//! Conventions (fixed once, used everywhere):
//! * the abelianization `M` counts `M[i][j]` = occurrences of letter `i`
//!   in the image of letter `j`;
//! * letter frequencies are the **right** eigenvector of `M` for the
//!   leading eigenvalue λ, normalized to sum 1 — iterating the rule
//!   multiplies occurrence-count vectors by `M` on the left, so their
//!   limit direction is the right eigenvector;
//! * tile (edge) lengths are the **left** eigenvector of `M`, the unique
//!   positive assignment with `Σ_{l' ∈ image(l)} len(l') = λ·len(l)`,
//!   normalized so that `Σ_l freq(l)·len(l) = 1` (unit measure on one
//!   average tile).
//!
//! λ is the dominant root of the exact characteristic polynomial of `M`,
//! polished to full double precision; the eigenvectors come from power
//! iteration, which converges for every primitive matrix.

use crate::error::{Error, Result};
use crate::intpoly::IntPoly;
use crate::ratmat::RatMat;
use crate::substitution::SubstitutionRule;

/// Spectral data of the abelianization of a primitive, expanding
/// substitution, plus the dynamical constants derived from it.
#[derive(Debug, Clone)]
pub struct PerronData {
    /// Abelianization matrix, `matrix[i][j]` = occurrences of `i` in the
    /// image of `j`.
    pub matrix: Vec<Vec<i64>>,
    /// Leading eigenvalue λ > 1.
    pub lambda: f64,
    /// Letter frequencies in the fixed point (right eigenvector, sum 1).
    pub letter_freq: Vec<f64>,
    /// Tile lengths (left eigenvector, `Σ freq·len = 1`).
    pub edge_lengths: Vec<f64>,
    /// Topological entropy `log λ` of the shift.
    pub h_top: f64,
    /// Smallest expansion factor of the map; equals λ in the self-similar
    /// one-dimensional case handled here.
    pub lambda0: f64,
    /// Smallest expansion exponent `log λ₀`.
    pub chi_minus: f64,
    /// Regularity threshold `h_top / χ₋` (= 1 here); Hölder-type
    /// constructions below this exponent are refused.
    pub alpha_threshold: f64,
    /// Exact characteristic polynomial of `M`, ascending coefficients.
    pub char_poly: IntPoly,
    /// Largest modulus among the non-leading eigenvalues (0 for degree 1);
    /// controls how fast finite-window counts converge to frequencies.
    pub subleading_modulus: f64,
}

impl PerronData {
    /// Computes the full spectral data; errors if the rule is not
    /// primitive or its expansion factor is not greater than 1.
    pub fn compute(rule: &SubstitutionRule) -> Result<PerronData> {
        rule.primitivity_check()?;
        let matrix = rule.matrix();
        let n = matrix.len();
        let char_poly = IntPoly::from_rat(&RatMat::from_i64(&matrix).char_poly());
        let mf: Vec<Vec<f64>> = matrix
            .iter()
            .map(|r| r.iter().map(|&x| x as f64).collect())
            .collect();
        let (rayleigh, right) = power_iteration(&mf)?;
        let lambda = polish_root(&char_poly, rayleigh);
        if lambda <= 1.0 + 1e-9 {
            return Err(Error::NotExpanding { lambda });
        }
        let mt: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| mf[j][i]).collect())
            .collect();
        let (_, left) = power_iteration(&mt)?;
        // Residual check against the polished eigenvalue.
        for (v, m) in [(&right, &mf), (&left, &mt)] {
            let res = apply(m, v)
                .iter()
                .zip(v.iter())
                .map(|(mv, vi)| (mv - lambda * vi).abs())
                .fold(0.0f64, f64::max);
            if res > 1e-11 * lambda {
                return Err(Error::Numerical {
                    what: "leading eigenvector".into(),
                    msg: format!("residual {:.3e} after power iteration", res),
                });
            }
        }
        if right.iter().chain(left.iter()).any(|&x| x <= 0.0) {
            return Err(Error::internal(
                "non-positive leading eigenvector of a primitive matrix",
            ));
        }
        let fsum: f64 = right.iter().sum();
        let letter_freq: Vec<f64> = right.iter().map(|x| x / fsum).collect();
        let dot: f64 = letter_freq.iter().zip(left.iter()).map(|(f, l)| f * l).sum();
        let edge_lengths: Vec<f64> = left.iter().map(|x| x / dot).collect();
        let subleading_modulus = subleading_modulus(&char_poly, lambda)?;
        let h_top = lambda.ln();
        Ok(PerronData {
            matrix,
            lambda,
            letter_freq,
            edge_lengths,
            h_top,
            lambda0: lambda,
            chi_minus: h_top,
            alpha_threshold: 1.0,
            char_poly,
            subleading_modulus,
        })
    }
}

pub(crate) fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
        .collect()
}

/// Power iteration with sup-norm normalization; returns the Rayleigh
/// quotient and the normalized eigenvector. Convergence is geometric at
/// the spectral gap, which is strict for primitive matrices.
pub(crate) fn power_iteration(m: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let n = m.len();
    let mut v = vec![1.0f64; n];
    for _ in 0..200_000 {
        let w = apply(m, &v);
        let norm = w.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if norm == 0.0 {
            return Err(Error::internal("nilpotent abelianization in power iteration"));
        }
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let delta = next
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = next;
        if delta < 1e-15 {
            break;
        }
    }
    // Rayleigh quotient refines the eigenvalue estimate by one order.
    let w = apply(m, &v);
    let num: f64 = w.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|x| x * x).sum();
    Ok((num / den.max(1e-300), v))
}

/// Newton polish of a simple root of the exact characteristic polynomial,
/// starting from a power-iteration estimate already inside its basin.
fn polish_root(p: &IntPoly, start: f64) -> f64 {
    let d = p.derivative();
    let mut x = start;
    for _ in 0..100 {
        let fx = p.eval_f64(x);
        let dx = d.eval_f64(x);
        if dx == 0.0 {
            break;
        }
        let step = fx / dx;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn subleading_modulus(char_poly: &IntPoly, lambda: f64) -> Result<f64> {
    let mut best = 0.0f64;
    for (factor, _) in char_poly.squarefree_decomposition() {
        for z in factor.roots()? {
            if (z.re - lambda).abs() > 1e-6 * (1.0 + lambda) || z.im.abs() > 1e-6 {
                best = best.max(z.norm());
            }
        }
    }
    Ok(best)
}
