//! Birkhoff sums over supertiles and deviation-exponent fits.
//!
//! The sum of a level-K cylinder function over the order-n supertile of a
//! collared letter satisfies the exact linear recursion
//! S_{n+1} = M̃ᵀ·S_n: the collared alphabet carries enough neighborhood
//! data to evaluate the function at every position (K ≤ collar depth), so
//! no boundary corrections are needed. Deviations of the sums along each
//! eigendirection are isolated exactly with integer annihilator
//! polynomials before fitting growth exponents.

use crate::ap::{build_ap_complex, collar, APComplex};
use crate::cylinder::CylinderFunction;
use crate::error::{Error, Result};
use crate::intpoly::IntPoly;
use crate::ratmat::RatMat;
use crate::spectral::{DeviationExponentTable, DeviationRow};
use crate::substitution::SubstitutionRule;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::Serialize;

/// How positions inside a supertile are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Weighting {
    /// Plain count: one unit per position (return-map Birkhoff sums).
    Count,
    /// Each position weighted by its letter interval length (flow
    /// Birkhoff integrals of fiberwise-constant functions).
    Length,
}

/// Supertile sums S_n(l) for every collared letter, n = 0..=n_max.
#[derive(Debug, Clone)]
pub struct SupertileSums {
    pub weighting: Weighting,
    /// Collared letter names, indexing the inner vectors.
    pub letters: Vec<String>,
    /// sums[n][l] = Σ_{positions p of the order-n supertile of l} w_p f(p).
    pub sums: Vec<Vec<f64>>,
    /// sizes[n][l] = |ϱⁿ(l)| (count weighting of 1).
    pub sizes: Vec<Vec<f64>>,
    pub lambda: f64,
    /// The recursion matrix M̃ᵀ as integers.
    pub recursion: Vec<Vec<i64>>,
}

/// Builds a complex whose collar depth is at least `level`, escalating
/// past it until the border certificate holds.
pub fn complex_for_level(
    base: &SubstitutionRule,
    level: usize,
    max_depth: usize,
) -> Result<APComplex> {
    let mut d = level.max(1);
    loop {
        let collared = collar(base, d)?;
        let certificate = collared.border_certificate();
        if certificate.holds {
            return build_ap_complex(collared, certificate);
        }
        if d >= max_depth {
            return Err(Error::Depth {
                msg: format!(
                    "no border-forcing collar found between depths {} and {}",
                    level.max(1),
                    max_depth
                ),
            });
        }
        d += 1;
    }
}

/// Value of a level-K function at a collared position: the collar window
/// supplies the K letters to the right of the center.
fn eval_at_collared(cx: &APComplex, f: &CylinderFunction, l: usize) -> Result<f64> {
    let d = cx.collared.depth;
    let window = &cx.collared.windows[l];
    f.value(&window[d..])
}

/// Exact recursion for the sums of `f` (level K) over supertiles of every
/// collared letter. Requires K ≤ collar depth of `cx`; rebuild the
/// complex with `complex_for_level` for deeper functions.
pub fn supertile_sums(
    cx: &APComplex,
    f: &CylinderFunction,
    n_max: usize,
    weighting: Weighting,
) -> Result<SupertileSums> {
    if f.level() > cx.collared.depth {
        let needed = 2 * f.level() + 1;
        let estimate = crate::language::legal_words(&cx.collared.base, needed)
            .map(|w| w.len().to_string())
            .unwrap_or_else(|_| "unknown".into());
        return Err(Error::Infeasible {
            msg: format!(
                "function level {} exceeds collar depth {}; rebuilding needs the {}-word language",
                f.level(),
                cx.collared.depth,
                needed
            ),
            estimate,
        });
    }
    let e = cx.n_edges();
    let mut s0 = vec![0.0; e];
    for l in 0..e {
        let v = eval_at_collared(cx, f, l)?;
        s0[l] = match weighting {
            Weighting::Count => v,
            Weighting::Length => v * cx.lengths[l],
        };
    }
    let size0 = match weighting {
        Weighting::Count => vec![1.0; e],
        Weighting::Length => cx.lengths.clone(),
    };
    let step = |v: &[f64]| -> Vec<f64> {
        (0..e)
            .map(|l| {
                cx.gamma1[l]
                    .iter()
                    .zip(v)
                    .map(|(&c, &x)| c as f64 * x)
                    .sum()
            })
            .collect()
    };
    let mut sums = vec![s0];
    let mut sizes = vec![size0];
    for n in 0..n_max {
        let next = step(&sums[n]);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Infeasible {
                msg: format!("supertile sums overflow f64 at order {}", n + 1),
                estimate: format!("growth is lambda^n with lambda = {}", cx.lambda),
            });
        }
        sums.push(next);
        sizes.push(step(&sizes[n]));
    }
    Ok(SupertileSums {
        weighting,
        letters: (0..e).map(|l| cx.edge_name(l).to_string()).collect(),
        sums,
        sizes,
        lambda: cx.lambda,
        recursion: cx.gamma1.clone(),
    })
}

/// The explicit order-n supertile word over collared letters.
pub fn explicit_supertile(cx: &APComplex, letter: usize, n: usize) -> Result<Vec<usize>> {
    if letter >= cx.n_edges() {
        return Err(Error::precondition("letter index outside the collared alphabet"));
    }
    let est = cx.lambda.powi(n as i32);
    if est > 5e7 {
        return Err(Error::Infeasible {
            msg: format!("explicit order-{} supertile is too long to materialize", n),
            estimate: format!("{:.3e} letters", est),
        });
    }
    let mut word = vec![letter];
    for _ in 0..n {
        word = cx.collared.rule.apply(&word);
    }
    Ok(word)
}

/// Direct summation oracle over the explicit supertile word.
pub fn direct_sum(
    cx: &APComplex,
    f: &CylinderFunction,
    letter: usize,
    n: usize,
    weighting: Weighting,
) -> Result<f64> {
    let word = explicit_supertile(cx, letter, n)?;
    let mut acc = 0.0;
    for &l in &word {
        let v = eval_at_collared(cx, f, l)?;
        acc += match weighting {
            Weighting::Count => v,
            Weighting::Length => v * cx.lengths[l],
        };
    }
    Ok(acc)
}

/// Fit of one eigendirection of the sums.
#[derive(Debug, Clone, Serialize)]
pub struct DirectionFit {
    pub eigenvalue: Complex64,
    /// Exponent predicted by the spectral table (log|ν|/log λ).
    pub predicted_exponent: f64,
    /// Expected power of log T from the Jordan structure.
    pub predicted_log_power: usize,
    /// Fitted exponent s in ‖component_n‖ ≈ C·λ^{sn}·n^j.
    pub fitted_exponent: f64,
    /// Fitted polynomial power j.
    pub fitted_log_power: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    /// Set when the direction carries no growth (fit slope ≤ 0 or the
    /// component is bounded over the window).
    pub bounded: bool,
    /// Set when the initial data has no component in this direction.
    pub zero_direction: bool,
}

/// Deviation fits per predicted eigendirection.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationFit {
    pub directions: Vec<DirectionFit>,
    /// Fit window in n.
    pub window: (usize, usize),
}

/// Isolates each table eigendirection with the integer annihilator
/// polynomial (the characteristic polynomial of the recursion divided by
/// the direction's irreducible factor) and fits growth exponents to the
/// isolated components.
pub fn fit_deviation(
    sums: &SupertileSums,
    table: &DeviationExponentTable,
) -> Result<DeviationFit> {
    let n_max = sums.sums.len() - 1;
    if n_max < 8 {
        return Err(Error::precondition(
            "deviation fits need sums through order at least 8",
        ));
    }
    let scale = sums
        .sums
        .iter()
        .flatten()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    if scale == 0.0 {
        return Err(Error::precondition(
            "zero function direction: supertile sums vanish identically",
        ));
    }
    let m = RatMat::from_i64(&sums.recursion);
    let char_m = IntPoly::from_rat(&m.char_poly());
    let roots = char_m.roots()?;
    // Every annihilator below has degree < deg(char), so sums above this
    // order stay usable after the shift-polynomial is applied.
    let deg = char_m.degree().unwrap_or(0);
    if n_max < deg + 8 {
        return Err(Error::precondition(format!(
            "deviation fits over a degree-{} recursion need sums through order {}",
            deg,
            deg + 8
        )));
    }
    let usable = n_max - deg + 1;
    let window = (2.max(usable / 3), usable);

    let mut directions = Vec::new();
    for row in &table.rows {
        directions.push(fit_direction(sums, &char_m, &roots, row, window, scale)?);
    }
    Ok(DeviationFit { directions, window })
}

/// Deflates `poly` (descending f64 coefficients) by the real factor of
/// `nu` — linear for real ν, quadratic for a conjugate pair.
fn deflate_eigenvalue(poly: &[f64], nu: Complex64) -> Vec<f64> {
    if nu.im.abs() < 1e-9 {
        // Synthetic division by (x − ν).
        let mut out = Vec::with_capacity(poly.len() - 1);
        let mut carry = 0.0;
        for &c in &poly[..poly.len() - 1] {
            carry = c + carry * nu.re;
            out.push(carry);
        }
        out
    } else {
        // Division by x² − 2Re(ν)x + |ν|².
        let (b, c) = (-2.0 * nu.re, nu.norm_sqr());
        let mut out = vec![0.0; poly.len() - 2];
        let mut rem = poly.to_vec();
        for i in 0..out.len() {
            let q = rem[i];
            out[i] = q;
            rem[i + 1] -= q * b;
            rem[i + 2] -= q * c;
        }
        out
    }
}

fn fit_direction(
    sums: &SupertileSums,
    char_m: &IntPoly,
    roots: &[Complex64],
    row: &DeviationRow,
    window: (usize, usize),
    scale: f64,
) -> Result<DirectionFit> {
    if !roots.iter().any(|r| (r - row.eigenvalue).norm() < 1e-6) {
        return Err(Error::internal(format!(
            "table eigenvalue {} is not an eigenvalue of the supertile recursion",
            row.eigenvalue
        )));
    }
    // Annihilate every other eigenvalue: divide the characteristic
    // polynomial by this eigenvalue's own real factor, as many times as
    // it divides, and apply the quotient as a shift polynomial to the
    // sum sequence.
    let mut q: Vec<f64> = char_m
        .coeffs()
        .iter()
        .rev()
        .map(|c| c.to_f64().unwrap_or(f64::INFINITY))
        .collect();
    let own_degree = if row.eigenvalue.im.abs() < 1e-9 { 1 } else { 2 };
    for _ in 0..row.multiplicity {
        if q.len() < own_degree + 1 {
            break;
        }
        q = deflate_eigenvalue(&q, row.eigenvalue);
    }
    // q is descending: q_0 x^d + … + q_d. Applied to the sequence:
    // T_n = Σ_i q_i S_{n+d−i}.
    let d = q.len() - 1;
    let count = sums.sums.len() - d;
    let letters = sums.sums[0].len();
    let comp_norm: Vec<f64> = (0..count)
        .map(|n| {
            (0..letters)
                .map(|l| {
                    q.iter()
                        .enumerate()
                        .map(|(i, &qi)| qi * sums.sums[n + d - i][l])
                        .sum::<f64>()
                        .abs()
                })
                .fold(0.0f64, f64::max)
        })
        .collect();
    // A component is "absent" only when it sits at the roundoff floor of
    // the shift-polynomial application (ε·‖q‖₁·‖S‖), not merely small
    // next to other, faster-growing components.
    let q_scale: f64 = q.iter().map(|x| x.abs()).sum();
    let peak = comp_norm.iter().fold(0.0f64, |a, &b| a.max(b));
    if peak < 1e-11 * scale * q_scale.max(1.0) {
        return Ok(DirectionFit {
            eigenvalue: row.eigenvalue,
            predicted_exponent: row.exponent,
            predicted_log_power: row.log_power,
            fitted_exponent: 0.0,
            fitted_log_power: 0.0,
            residual: 0.0,
            bounded: true,
            zero_direction: true,
        });
    }
    // Estimate (s, j) in ‖T_n‖ ≈ C·λ^{sn}·n^j from two long-lag log
    // ratios at different base points — exact on the pure model and free
    // of the near-collinearity that plagues a direct two-regressor fit.
    // Block maxima absorb oscillation zeros of complex pairs.
    let log_lambda = sums.lambda.ln();
    let block = |n: usize| -> f64 {
        comp_norm[n - 2..=n + 2].iter().fold(0.0f64, |a, &b| a.max(b))
    };
    // Keep all anchors two steps inside the usable range so every block
    // is full width — a clipped block breaks the lag arithmetic.
    let hi = window.1.min(comp_norm.len() - 1) - 2;
    let lo = window.0.max(2);
    let lag = (hi - lo) / 2;
    if lag < 3 {
        return Err(Error::precondition(
            "not enough usable sums in the fit window",
        ));
    }
    let (n1, n2) = (lo, hi - lag);
    let anchors = [block(n1), block(n1 + lag), block(n2), block(n2 + lag)];
    let (s, j, residual);
    if anchors.iter().any(|&a| a < 1e-12 * peak) {
        // Degenerate anchors: fall back to a plain slope regression.
        let pts: Vec<(f64, f64, f64)> = (lo..=hi)
            .filter(|&n| comp_norm[n] > 1e-12 * peak)
            .map(|n| ((n as f64) * log_lambda, (n as f64).ln(), comp_norm[n].ln()))
            .collect();
        if pts.len() < 4 {
            return Err(Error::precondition(
                "not enough usable sums in the fit window",
            ));
        }
        let fit = regress2(&pts);
        s = fit.0;
        j = fit.1;
        residual = fit.2;
    } else {
        let d1 = (anchors[1] / anchors[0]).ln();
        let d2 = (anchors[3] / anchors[2]).ln();
        let a1 = ((n1 + lag) as f64 / n1 as f64).ln();
        let a2 = ((n2 + lag) as f64 / n2 as f64).ln();
        j = (d1 - d2) / (a1 - a2);
        s = (d1 - j * a1) / (lag as f64 * log_lambda);
        // Residual of the fitted model over the window.
        let c = (lo..=hi)
            .filter(|&n| comp_norm[n] > 1e-12 * peak)
            .map(|n| {
                comp_norm[n].ln() - s * n as f64 * log_lambda - j * (n as f64).ln()
            })
            .collect::<Vec<_>>();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        residual =
            (c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c.len() as f64).sqrt();
    }
    let growth_over_window = block(hi) / block(lo).max(f64::MIN_POSITIVE);
    Ok(DirectionFit {
        eigenvalue: row.eigenvalue,
        predicted_exponent: row.exponent,
        predicted_log_power: row.log_power,
        fitted_exponent: s,
        fitted_log_power: j,
        residual,
        bounded: s <= 0.02 || growth_over_window < 2.0,
        zero_direction: false,
    })
}

/// Least squares y = c + s·x1 + j·x2; returns (s, j, rms residual).
fn regress2(pts: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let (mut sx1, mut sx2, mut sy) = (0.0, 0.0, 0.0);
    for &(x1, x2, y) in pts {
        sx1 += x1;
        sx2 += x2;
        sy += y;
    }
    let (mx1, mx2, my) = (sx1 / n, sx2 / n, sy / n);
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x1, x2, y) in pts {
        let (u, v, w) = (x1 - mx1, x2 - mx2, y - my);
        a11 += u * u;
        a12 += u * v;
        a22 += v * v;
        b1 += u * w;
        b2 += v * w;
    }
    let det = a11 * a22 - a12 * a12;
    let (s, j) = if det.abs() < 1e-12 * (a11 * a22).max(1e-300) {
        // Collinear regressors (tiny windows): fall back to slope only.
        (if a11 > 0.0 { b1 / a11 } else { 0.0 }, 0.0)
    } else {
        ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
    };
    let mut rss = 0.0;
    for &(x1, x2, y) in pts {
        let e = y - my - s * (x1 - mx1) - j * (x2 - mx2);
        rss += e * e;
    }
    (s, j, (rss / n).sqrt())
}
