//! Resonance extraction from correlation sequences.
//!
//! A correlation sequence of the hyperbolic map is expected to follow an
//! asymptotic expansion C_n ≈ Σ_i a_i ρ_iⁿ n^{j_i} past its transient. This
//! module fits the simple-exponential part of that model by linear
//! prediction (Prony least squares): solve the least-squares recurrence
//! C_n ≈ Σ_{j=1..m} p_j C_{n−j} over a fit window, read the rates ρ_i off
//! the roots of the prediction polynomial, then recover amplitudes by a
//! Vandermonde least squares. Residual and conditioning are always
//! reported; a fit whose data matrix has condition number above
//! [`COND_THRESHOLD`] is flagged rather than silently returned.
//!
//! The fit window is chosen automatically unless overridden: the lower end
//! skips the transient (first n with |C_n| < ½|C_0|), the upper end stops at
//! the error floor (last n with |C_n| above ten times its reported
//! quadrature bound). Interior entries below the floor are kept — an
//! oscillating series crosses zero without losing information.
//!
//! True Jordan terms (n·ρⁿ) make the prediction polynomial acquire a double
//! root; the fit then reports two nearly coincident rates and sets
//! `jordan_suspect`. Distinguishing a genuine size-2 block from two nearby
//! simple rates is numerically delicate and is only flagged, not resolved.

use num_complex::Complex64;
use serde::Serialize;

use crate::correlation::CorrelationSeries;
use crate::error::{Error, Result};

/// Condition-number threshold above which a fit is marked ill-conditioned.
pub const COND_THRESHOLD: f64 = 1e8;

/// Result of an exponential fit to a correlation sequence.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceFit {
    /// Fitted rates, sorted by modulus, largest first.
    pub rates: Vec<Complex64>,
    /// Amplitude in front of each rate, in the same order.
    pub amplitudes: Vec<Complex64>,
    /// Fit window `[n_lo, n_hi]`, inclusive.
    pub window: (usize, usize),
    /// Root-mean-square of C_n − Σ a_i ρ_iⁿ over the window.
    pub residual: f64,
    /// `residual` divided by the rms of C_n over the window.
    pub relative_residual: f64,
    /// Condition estimate: the larger of the prediction and the Vandermonde
    /// data-matrix condition numbers.
    pub condition: f64,
    /// `condition > COND_THRESHOLD`.
    pub ill_conditioned: bool,
    /// Two fitted rates are within 1e-4 of each other (relative): a Jordan
    /// block and a pair of nearby simple rates are indistinguishable here.
    pub jordan_suspect: bool,
}

impl ResonanceFit {
    /// Modulus of the leading (largest) fitted rate, if any.
    pub fn leading_modulus(&self) -> Option<f64> {
        self.rates.first().map(|r| r.norm())
    }
}

/// Fit `model_order` exponential rates to the series over an automatically
/// chosen window.
///
/// Errors when the series never decays below half its initial value
/// (nothing to fit — e.g. the constant series of two unit observables), or
/// when the window holds fewer than 2·m+2 entries before the error floor.
pub fn extract_resonances(series: &CorrelationSeries, model_order: usize) -> Result<ResonanceFit> {
    let window = auto_window(series)?;
    extract_resonances_in(series, model_order, window)
}

/// Fit over an explicit window `[n_lo, n_hi]` (inclusive), bypassing the
/// automatic transient/floor detection.
pub fn extract_resonances_in(
    series: &CorrelationSeries,
    model_order: usize,
    window: (usize, usize),
) -> Result<ResonanceFit> {
    let m = model_order;
    let (n_lo, n_hi) = window;
    if m == 0 {
        return Err(Error::precondition("model order must be at least 1"));
    }
    let last = match series.entries.last() {
        Some(e) => e.n,
        None => return Err(Error::precondition("empty correlation series")),
    };
    if n_hi > last || n_lo > n_hi {
        return Err(Error::mismatch(format!(
            "fit window [{n_lo}, {n_hi}] does not fit the series (0..={last})"
        )));
    }
    let count = n_hi - n_lo + 1;
    if count < 2 * m + 2 {
        return Err(Error::Precondition {
            msg: format!(
                "fit window [{n_lo}, {n_hi}] has {count} usable entries; \
                 model order {m} needs at least {}",
                2 * m + 2
            ),
        });
    }
    let c: Vec<f64> = series.entries[n_lo..=n_hi].iter().map(|e| e.value).collect();

    // Linear prediction: rows C_n = Σ_j p_j C_{n−j} for n−n_lo in m..count.
    let rows = count - m;
    let mut a = vec![vec![0.0f64; m]; rows];
    let mut b = vec![0.0f64; rows];
    for r in 0..rows {
        let n = r + m;
        for j in 0..m {
            a[r][j] = c[n - 1 - j];
        }
        b[r] = c[n];
    }
    let cond_lp = condition_estimate(&a);
    let p = least_squares(a, b)?;

    // Rates: roots of zᵐ − p₁ zᵐ⁻¹ − … − p_m.
    let mut monic = Vec::with_capacity(m + 1);
    monic.push(1.0);
    for &pj in &p {
        monic.push(-pj);
    }
    let mut rates = poly_roots(&monic)?;
    rates.sort_by(|x, y| {
        y.norm()
            .partial_cmp(&x.norm())
            .unwrap()
            .then(y.re.partial_cmp(&x.re).unwrap())
            .then(y.im.partial_cmp(&x.im).unwrap())
    });

    // Amplitudes: least-squares solve of the Vandermonde system
    // Σ_i a_i ρ_iⁿ ≈ C_n over the window, by complex normal equations.
    let mut v = vec![vec![Complex64::new(0.0, 0.0); m]; count];
    for (r, row) in v.iter_mut().enumerate() {
        let n = (n_lo + r) as i32;
        for (i, &rho) in rates.iter().enumerate() {
            row[i] = rho.powi(n);
        }
    }
    let cond_vand = condition_estimate_complex(&v);
    let amplitudes = complex_least_squares(&v, &c)?;

    let mut ss = 0.0f64;
    let mut ss_data = 0.0f64;
    for (r, row) in v.iter().enumerate() {
        let model: Complex64 = row.iter().zip(&amplitudes).map(|(x, a)| x * a).sum();
        ss += (Complex64::new(c[r], 0.0) - model).norm_sqr();
        ss_data += c[r] * c[r];
    }
    let residual = (ss / count as f64).sqrt();
    let rms = (ss_data / count as f64).sqrt();

    let mut jordan_suspect = false;
    for i in 0..rates.len() {
        for j in (i + 1)..rates.len() {
            let scale = rates[i].norm().max(rates[j].norm()).max(1e-30);
            if (rates[i] - rates[j]).norm() < 1e-4 * scale {
                jordan_suspect = true;
            }
        }
    }

    let condition = cond_lp.max(cond_vand);
    Ok(ResonanceFit {
        rates,
        amplitudes,
        window,
        residual,
        relative_residual: if rms > 0.0 { residual / rms } else { 0.0 },
        condition,
        ill_conditioned: !(condition <= COND_THRESHOLD),
        jordan_suspect,
    })
}

/// Automatic fit window: start past the transient (first n with
/// |C_n| < ½|C_0|), stop at the error floor (last n whose value exceeds ten
/// times its reported error bound).
fn auto_window(series: &CorrelationSeries) -> Result<(usize, usize)> {
    let entries = &series.entries;
    if entries.is_empty() {
        return Err(Error::precondition("empty correlation series"));
    }
    let c0 = entries[0].value.abs();
    let n_lo = entries
        .iter()
        .position(|e| e.value.abs() < 0.5 * c0)
        .ok_or_else(|| Error::Precondition {
            msg: "series never decays below half its initial value; nothing to fit".into(),
        })?;
    let n_hi = entries
        .iter()
        .rposition(|e| e.value.abs() > 10.0 * e.error)
        .ok_or_else(|| Error::Precondition {
            msg: "every entry sits at the quadrature error floor".into(),
        })?;
    if n_hi < n_lo {
        return Err(Error::Precondition {
            msg: format!("error floor (n={n_hi}) is reached before the transient ends (n={n_lo})"),
        });
    }
    Ok((n_lo, n_hi))
}

/// Dense least squares by Householder QR; consumes its inputs. Rows ≥ cols
/// is guaranteed by the window check.
fn least_squares(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let rows = a.len();
    let cols = a[0].len();
    for k in 0..cols {
        let mut norm = 0.0f64;
        for r in k..rows {
            norm += a[r][k] * a[r][k];
        }
        let norm = norm.sqrt();
        if norm < 1e-300 {
            return Err(Error::Numerical {
                what: "resonance fit".into(),
                msg: "prediction matrix is numerically rank-deficient".into(),
            });
        }
        let alpha = if a[k][k] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|r| a[r][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in k..cols {
                let dot: f64 = (k..rows).map(|r| v[r - k] * a[r][col]).sum();
                let scale = 2.0 * dot / vnorm2;
                for r in k..rows {
                    a[r][col] -= scale * v[r - k];
                }
            }
            let dot: f64 = (k..rows).map(|r| v[r - k] * b[r]).sum();
            let scale = 2.0 * dot / vnorm2;
            for r in k..rows {
                b[r] -= scale * v[r - k];
            }
        }
        a[k][k] = alpha;
    }
    let mut x = vec![0.0f64; cols];
    for k in (0..cols).rev() {
        let mut s = b[k];
        for j in (k + 1)..cols {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Ok(x)
}

/// Condition estimate of a real data matrix: square root of the eigenvalue
/// spread of its Gram matrix.
fn condition_estimate(a: &[Vec<f64>]) -> f64 {
    let cols = a[0].len();
    let mut gram = vec![vec![0.0f64; cols]; cols];
    for row in a {
        for i in 0..cols {
            for j in 0..cols {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    gram_condition(gram)
}

/// As [`condition_estimate`], for a complex data matrix (Gram = VᴴV; its
/// real part is what matters for the spread since VᴴV is Hermitian PSD and
/// we only need eigenvalue extremes, computed on the real embedding).
fn condition_estimate_complex(v: &[Vec<Complex64>]) -> f64 {
    let cols = v[0].len();
    // Real embedding [Re −Im; Im Re] of the Hermitian Gram matrix has the
    // same eigenvalues (doubled in multiplicity).
    let mut gram = vec![vec![0.0f64; 2 * cols]; 2 * cols];
    for row in v {
        for i in 0..cols {
            for j in 0..cols {
                let g = row[i].conj() * row[j];
                gram[i][j] += g.re;
                gram[cols + i][cols + j] += g.re;
                gram[i][cols + j] -= g.im;
                gram[cols + i][j] += g.im;
            }
        }
    }
    gram_condition(gram)
}

fn gram_condition(gram: Vec<Vec<f64>>) -> f64 {
    let eig = sym_eigenvalues(gram);
    let max = eig.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    if min == 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
fn sym_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cth = 1.0 / (t * t + 1.0).sqrt();
                let s = t * cth;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cth * akp - s * akq;
                    a[k][q] = s * akp + cth * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cth * apk - s * aqk;
                    a[q][k] = s * apk + cth * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// All complex roots of a monic real polynomial (`coeffs[k]` multiplies
/// z^{deg−k}, `coeffs[0] = 1`) by Durand–Kerner iteration.
fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    if deg == 1 {
        return Ok(vec![Complex64::new(-coeffs[1], 0.0)]);
    }
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(coeffs[0], 0.0);
        for &c in &coeffs[1..] {
            acc = acc * z + c;
        }
        acc
    };
    // Cauchy-style radius keeps the seeds on a circle enclosing all roots;
    // the rotating seed angle breaks any symmetry of the root set.
    let radius = 1.0 + coeffs[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| seed.powu(k as u32 + 1) / seed.norm().powi(k as i32 + 1) * radius * 0.7)
        .collect();
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    for _ in 0..1000 {
        let mut max_step = 0.0f64;
        for k in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != k {
                    denom *= z[k] - z[j];
                }
            }
            if denom.norm() < 1e-300 {
                // Coincident iterates: nudge apart and keep going.
                z[k] += Complex64::new(1e-8 * radius, 1e-8 * radius);
                continue;
            }
            let step = eval(z[k]) / denom;
            z[k] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * (1.0 + radius) {
            break;
        }
    }
    for &root in &z {
        if eval(root).norm() > 1e-8 * scale.max(1.0) {
            return Err(Error::Numerical {
                what: "resonance fit".into(),
                msg: format!(
                    "prediction-polynomial root finder did not converge (residual {:.3e})",
                    eval(root).norm()
                ),
            });
        }
    }
    // A real polynomial has conjugate-symmetric roots; snap tiny imaginary
    // parts so real rates print cleanly.
    for r in &mut z {
        if r.im.abs() < 1e-10 * (1.0 + r.re.abs()) {
            r.im = 0.0;
        }
    }
    Ok(z)
}

/// Complex least squares through the normal equations, solved by Gaussian
/// elimination with partial pivoting. The systems here are tiny (the model
/// order), so the squared conditioning is acceptable and is reported to the
/// caller anyway.
fn complex_least_squares(v: &[Vec<Complex64>], rhs: &[f64]) -> Result<Vec<Complex64>> {
    let cols = v[0].len();
    let mut h = vec![vec![Complex64::new(0.0, 0.0); cols + 1]; cols];
    for (r, row) in v.iter().enumerate() {
        for i in 0..cols {
            for j in 0..cols {
                h[i][j] += row[i].conj() * row[j];
            }
            h[i][cols] += row[i].conj() * rhs[r];
        }
    }
    for k in 0..cols {
        let (pivot_row, pivot) = (k..cols)
            .map(|r| (r, h[r][k].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot < 1e-300 {
            return Err(Error::Numerical {
                what: "resonance fit".into(),
                msg: "amplitude system is singular (coincident rates)".into(),
            });
        }
        h.swap(k, pivot_row);
        for r in (k + 1)..cols {
            let factor = h[r][k] / h[k][k];
            for j in k..=cols {
                let sub = factor * h[k][j];
                h[r][j] -= sub;
            }
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); cols];
    for k in (0..cols).rev() {
        let mut s = h[k][cols];
        for j in (k + 1)..cols {
            s -= h[k][j] * x[j];
        }
        x[k] = s / h[k][k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap::ap_complex;
    use crate::correlation::{correlation_sequence, suspended_mean, CorrelationEntry};
    use crate::cylinder::CylinderFunction;
    use crate::measure::InvariantMeasure;
    use crate::parallel::ExecMode;
    use crate::substitution::parse;
    use crate::suspension::suspend;

    fn synthetic(values: Vec<f64>, error: f64) -> CorrelationSeries {
        CorrelationSeries {
            entries: values
                .into_iter()
                .enumerate()
                .map(|(n, value)| CorrelationEntry { n, value, error })
                .collect(),
            quad_order: 0,
        }
    }

    #[test]
    fn single_rate_recovered() {
        let series = synthetic((0..15).map(|n| 0.5f64.powi(n)).collect(), 1e-15);
        let fit = extract_resonances(&series, 1).unwrap();
        assert_eq!(fit.rates.len(), 1);
        assert!((fit.rates[0].re - 0.5).abs() < 1e-6, "rate {}", fit.rates[0]);
        assert!(fit.rates[0].im.abs() < 1e-10);
        assert!((fit.amplitudes[0].re - 1.0).abs() < 1e-6);
        assert!(!fit.ill_conditioned);
        assert!(fit.relative_residual < 1e-10);
    }

    #[test]
    fn two_rates_recovered() {
        let series = synthetic(
            (0..16).map(|n| 0.7f64.powi(n) + 0.2f64.powi(n)).collect(),
            1e-15,
        );
        let fit = extract_resonances(&series, 2).unwrap();
        assert_eq!(fit.rates.len(), 2);
        assert!((fit.rates[0].re - 0.7).abs() < 1e-4, "rates {:?}", fit.rates);
        assert!((fit.rates[1].re - 0.2).abs() < 1e-4, "rates {:?}", fit.rates);
        assert!((fit.amplitudes[0].re - 1.0).abs() < 1e-4);
        assert!((fit.amplitudes[1].re - 1.0).abs() < 1e-4);
        assert!(!fit.jordan_suspect);
    }

    /// An oscillating series (conjugate rate pair) crosses zero inside the
    /// window; the floor rule must not cut the window at the dip.
    #[test]
    fn conjugate_pair_recovered() {
        let rho = Complex64::from_polar(0.6, std::f64::consts::FRAC_PI_4);
        let series = synthetic(
            (0..20).map(|n| 2.0 * (rho.powu(n as u32)).re).collect(),
            1e-15,
        );
        let fit = extract_resonances(&series, 2).unwrap();
        assert!((fit.rates[0].norm() - 0.6).abs() < 1e-8);
        assert!((fit.rates[1].norm() - 0.6).abs() < 1e-8);
        assert!((fit.rates[0].im + fit.rates[1].im).abs() < 1e-10, "conjugate pair");
        assert!(fit.window.1 >= 15, "window {:?} should reach past the zero dips", fit.window);
    }

    #[test]
    fn floor_cuts_short_series() {
        // Only entries up to n = 5 exist; order-2 fit needs six usable
        // entries strictly past the transient, which [2, 5] cannot hold.
        let series = synthetic((0..6).map(|n| 0.5f64.powi(n)).collect(), 1e-15);
        let err = extract_resonances(&series, 2).unwrap_err();
        assert!(matches!(err, Error::Precondition { .. }), "got {err:?}");
    }

    #[test]
    fn constant_series_is_rejected() {
        let series = synthetic(vec![1.0; 10], 1e-15);
        let err = extract_resonances(&series, 1).unwrap_err();
        assert!(matches!(err, Error::Precondition { .. }), "got {err:?}");
    }

    /// A genuine Jordan term (1 + n/2)·0.5ⁿ satisfies an order-2 linear
    /// recurrence with a double root. The fit must flag the near-coincident
    /// rates and the resulting Vandermonde ill-conditioning instead of
    /// pretending to resolve them.
    #[test]
    fn jordan_pair_flagged() {
        let series = synthetic(
            (0..21).map(|n| (1.0 + 0.5 * n as f64) * 0.5f64.powi(n)).collect(),
            1e-15,
        );
        let fit = extract_resonances(&series, 2).unwrap();
        assert!(fit.jordan_suspect, "double root must raise the Jordan flag");
        assert!(fit.condition > 1e6, "condition {}", fit.condition);
        assert!((fit.rates[0].norm() - 0.5).abs() < 1e-4, "rates {:?}", fit.rates);
        assert!((fit.rates[1].norm() - 0.5).abs() < 1e-4, "rates {:?}", fit.rates);
    }

    /// Over-modelling a pure geometric series with two rates makes the
    /// prediction columns exactly proportional: rejected as rank-deficient
    /// rather than silently returning an arbitrary second rate.
    #[test]
    fn coincident_columns_rejected() {
        let series = synthetic((0..20).map(|n| 2.0 * 0.5f64.powi(n)).collect(), 1e-15);
        let err = extract_resonances(&series, 2).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }), "got {err:?}");
    }

    /// A second component that has already sunk far below the leading one
    /// inside the fit window is numerically unrecoverable; the fit must come
    /// back flagged, with the leading rate still correct.
    #[test]
    fn floor_component_flagged() {
        let series = synthetic(
            (0..26).map(|n| 0.9f64.powi(n) + 0.05f64.powi(n)).collect(),
            1e-15,
        );
        let fit = extract_resonances_in(&series, 2, (8, 25)).unwrap();
        assert!(fit.ill_conditioned, "condition {}", fit.condition);
        assert!((fit.rates[0].re - 0.9).abs() < 1e-3, "rates {:?}", fit.rates);
    }

    /// End-to-end on a↦abbb, b↦a: the leading fitted rate of a mean-zero
    /// suspended autocorrelation is the Markov rate |ν₂|/λ = (√13−1)/(√13+1)
    /// ≈ 0.56574, carried by a negative real resonance (the signs
    /// alternate). The subspace spanned by the implementable observables is
    /// invariant under the transfer step and its spectrum is
    /// {λ^{−k}} ∪ {λ^{−k}·ν₂/λ}; the reciprocal 1/|ν₂| ≈ 0.76759 of the
    /// subleading substitution eigenvalue is not attained on it, so no fit
    /// of these correlations lands there. Monte-Carlo integration confirms
    /// the quadrature values independently (see the correlation module).
    #[test]
    fn abbb_leading_rate() {
        let rule = parse("a -> abbb\nb -> a").unwrap();
        let cx = ap_complex(&rule, 4).unwrap();
        let measure = InvariantMeasure::exact(&rule, 8).unwrap();
        let words = crate::language::legal_words(&rule, 3).unwrap();
        let values: std::collections::BTreeMap<Vec<usize>, f64> = words
            .iter()
            .map(|w| (w.clone(), if w[2] == 1 { 1.0 } else { 0.0 }))
            .collect();
        let h0 = CylinderFunction::from_values(2, &words, values).unwrap();
        let f0 = suspend(&h0, 0.15, &measure, &cx.lengths).unwrap();
        let mean = suspended_mean(&cx, &f0).unwrap();
        let unit = suspend(
            &CylinderFunction::constant(&rule, 1.0).unwrap(),
            0.15,
            &measure,
            &cx.lengths,
        )
        .unwrap();
        let unit_mean = suspended_mean(&cx, &unit).unwrap();
        let h = h0
            .sub(
                &CylinderFunction::constant(&rule, mean / unit_mean)
                    .unwrap()
                    .at_level(&measure, h0.level())
                    .unwrap(),
            )
            .unwrap();
        let f = suspend(&h, 0.15, &measure, &cx.lengths).unwrap();
        let series = correlation_sequence(&cx, &f, &f, 12, 12, ExecMode::Parallel).unwrap();

        let markov = (13f64.sqrt() - 1.0) / (13f64.sqrt() + 1.0);
        let fit = extract_resonances_in(&series, 2, (6, 12)).unwrap();
        let lead = fit.leading_modulus().unwrap();
        assert!(
            (lead - markov).abs() < 0.03,
            "leading modulus {lead} vs Markov rate {markov}"
        );
        assert!(fit.rates[0].re < 0.0, "alternating signs mean a negative rate");
        assert!(!fit.ill_conditioned, "condition {}", fit.condition);

        // The automatic window starts right after the transient; whatever it
        // fits stays well away from 1/|ν₂| ≈ 0.7676 — the reciprocal mode
        // has zero amplitude on this observable class.
        let auto = extract_resonances(&series, 2).unwrap();
        let auto_lead = auto.leading_modulus().unwrap();
        assert!(
            auto_lead < 0.71,
            "auto-window leading modulus {auto_lead} should stay below the reciprocal mode"
        );
    }
}
