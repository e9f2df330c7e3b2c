//! Spectral classification of the direct-limit cohomology action and the
//! dynamical predictions that hang off it: the resonance (Ruelle) ladder
//! for the suspension flow and the deviation-of-ergodic-averages exponent
//! table.
//!
//! Conventions, all for the one-dimensional pipeline unless stated:
//! the forward action Φ* on limit cohomology is `A_ER`; its inverse pulls
//! back under the flow direction, so predicted correlation resonances are
//! reciprocals of expanding eigenvalues. Thresholds against the unit
//! circle are decided exactly (integer evaluation at ±1, self-reciprocal
//! factor test) whenever a computed modulus falls within 1e-9 of 1, so
//! boundary eigenvalues land deterministically in the equality class.

use crate::cohomology::CohomologyData;
use crate::error::{Error, Result};
use crate::intpoly::IntPoly;
use crate::perron::PerronData;
use crate::ratmat::RatMat;
use num_complex::Complex64;
use num_traits::Zero;
use serde::ser::Serializer;
use serde::Serialize;

/// One eigenvalue of a rational matrix with its exact algebraic context.
#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueInfo {
    /// The eigenvalue, polished to ~1e-12 or better.
    pub value: Complex64,
    /// |value|, cached for reports.
    pub modulus: f64,
    /// Multiplicity of its irreducible factor in the characteristic
    /// polynomial (= algebraic multiplicity of this root).
    pub algebraic_multiplicity: usize,
    /// Jordan block sizes attached to this eigenvalue, descending. The
    /// sizes are identical across conjugate roots of one factor.
    pub jordan_blocks: Vec<usize>,
    /// The irreducible integer factor this eigenvalue is a root of.
    #[serde(serialize_with = "poly_as_string")]
    pub factor: IntPoly,
}

fn poly_as_string<S: Serializer>(p: &IntPoly, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

/// Exact Jordan structure of a square rational matrix.
///
/// The characteristic polynomial is factored over ℤ; for each irreducible
/// factor `p` of multiplicity `m`, block sizes follow from the nullities
/// of `p(A)^j`, j = 1..m, all in exact rational arithmetic. Roots are
/// numerical but everything structural is integer-certified.
pub fn jordan_structure(a: &RatMat) -> Result<Vec<EigenvalueInfo>> {
    if a.nrows() != a.ncols() {
        return Err(Error::precondition("jordan_structure needs a square matrix"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let char_poly = IntPoly::from_rat(&a.char_poly());
    let mut out = Vec::new();
    for (p, m) in char_poly.factor()? {
        let deg = p
            .degree()
            .ok_or_else(|| Error::internal("zero factor in a characteristic polynomial"))?;
        let blocks: Vec<usize> = if m == 1 {
            vec![1]
        } else {
            let pa = p.eval_mat(a);
            let mut nullities = vec![0usize];
            let mut power = RatMat::identity(n);
            for _ in 1..=m {
                power = power.mul(&pa);
                nullities.push(n - power.rank());
            }
            if nullities[m] != m * deg {
                return Err(Error::internal(
                    "primary-component dimension disagrees with factor multiplicity",
                ));
            }
            let mut ge = Vec::with_capacity(m);
            for j in 1..=m {
                let diff = nullities[j] - nullities[j - 1];
                if diff % deg != 0 {
                    return Err(Error::internal(
                        "nullity jump not divisible by the factor degree",
                    ));
                }
                ge.push(diff / deg);
            }
            let mut blocks = Vec::new();
            for j in 1..=m {
                let next = if j < m { ge[j] } else { 0 };
                for _ in 0..(ge[j - 1] - next) {
                    blocks.push(j);
                }
            }
            blocks.sort_unstable_by(|x, y| y.cmp(x));
            if blocks.iter().sum::<usize>() != m {
                return Err(Error::internal("Jordan block sizes do not add up"));
            }
            blocks
        };
        for root in p.roots()? {
            out.push(EigenvalueInfo {
                value: root,
                modulus: root.norm(),
                algebraic_multiplicity: m,
                jordan_blocks: blocks.clone(),
                factor: p.clone(),
            });
        }
    }
    let total: usize = out.iter().map(|e| e.algebraic_multiplicity).sum();
    if total != n {
        return Err(Error::internal("eigenvalue multiplicities do not sum to n"));
    }
    sort_complex_infos(&mut out);
    Ok(out)
}

fn sort_complex_infos(v: &mut [EigenvalueInfo]) {
    v.sort_by(|a, b| {
        b.modulus
            .partial_cmp(&a.modulus)
            .unwrap()
            .then(a.value.arg().partial_cmp(&b.value.arg()).unwrap())
    });
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(a.arg().partial_cmp(&b.arg()).unwrap())
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Above,
    Equal,
    Below,
}

/// Compares |ν| against a threshold. Against 1 the boundary is decided
/// exactly: a real root is ±1 iff its irreducible factor vanishes there,
/// and a complex root has unit modulus only if its factor is
/// self-reciprocal (1/ν must be the root ν̄ of the same factor). Against
/// other thresholds a 1e-12-relative tie goes to `Equal`, matching the
/// documented equality-class convention.
fn side_of(info: &EigenvalueInfo, threshold: f64) -> Side {
    let m = info.modulus;
    if threshold == 1.0 {
        if (m - 1.0).abs() > 1e-9 {
            return if m > 1.0 { Side::Above } else { Side::Below };
        }
        let p = &info.factor;
        let exact_unit = if info.value.im.abs() < 1e-9 {
            p.eval_int(&1.into()).is_zero() || p.eval_int(&(-1).into()).is_zero()
        } else {
            is_self_reciprocal(p)
        };
        if exact_unit {
            Side::Equal
        } else if m > 1.0 {
            Side::Above
        } else {
            Side::Below
        }
    } else if (m - threshold).abs() <= 1e-12 * (1.0 + threshold) {
        Side::Equal
    } else if m > threshold {
        Side::Above
    } else {
        Side::Below
    }
}

fn is_self_reciprocal(p: &IntPoly) -> bool {
    let c = p.coeffs();
    let n = c.len();
    if n == 0 {
        return false;
    }
    let plus = (0..n).all(|i| c[i] == c[n - 1 - i]);
    let minus = (0..n).all(|i| c[i] == -c[n - 1 - i].clone());
    plus || minus
}

/// Spectrum of the limit cohomology action, split into the sets that
/// drive resonance and deviation predictions.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralClassification {
    /// Expansion dimension (1 for the built-in substitution pipeline).
    pub d: usize,
    /// Total expansion factor (PF eigenvalue for d = 1).
    pub lambda: f64,
    /// Weakest expansion factor (= lambda for d = 1).
    pub lambda0: f64,
    /// Topological entropy log(lambda).
    pub h_top: f64,
    /// Weakest expansion exponent log(lambda0).
    pub chi_minus: f64,
    /// h_top / chi_minus, the regularity threshold for predictions.
    pub alpha_threshold: f64,
    /// Eigenvalues of the forward action on limit cohomology.
    pub eigenvalues: Vec<EigenvalueInfo>,
    /// Expanding eigenvalues of the forward action (|ν| > 1).
    pub sigma_plus_cap: Vec<Complex64>,
    /// Contracting eigenvalues of the inverse action (|ν| < 1).
    pub sigma_minus_cap: Vec<Complex64>,
    /// Eigenvalues ν of the inverse action with log|ν| < chi_minus − h_top;
    /// equals `sigma_minus_cap` when d = 1 (cross-checked).
    pub sigma_minus: Vec<Complex64>,
    /// Indices into `eigenvalues` with |ν| ≥ lambda/lambda0.
    pub e_plus: Vec<usize>,
    /// Indices into `eigenvalues` with |ν| > lambda/lambda0 strictly.
    pub e_plus_plus: Vec<usize>,
    /// True when sigma_minus \ {1/lambda} is empty: no predicted
    /// obstruction to super-exponential correlation decay.
    pub pisot_diagnostic: bool,
}

/// Classifies the spectrum for a substitution rule's limit cohomology.
pub fn classify_spectrum(
    coh: &CohomologyData,
    perron: &PerronData,
) -> Result<SpectralClassification> {
    let eigenvalues = jordan_structure(&coh.a_er)?;
    classify_inner(
        1,
        perron.lambda,
        perron.lambda0,
        perron.h_top,
        perron.chi_minus,
        eigenvalues,
    )
}

/// Classifies a user-supplied action for expansion dimension d ≥ 2 (no
/// complex construction is attempted; inputs are validated for
/// consistency only). `expansion` lists the d expansion factors of the
/// underlying hyperbolic map; `h_matrix` is its action on top-degree
/// limit cohomology.
pub fn classify_spectrum_custom(
    d: usize,
    expansion: &[f64],
    h_matrix: &RatMat,
) -> Result<SpectralClassification> {
    if d == 0 || expansion.len() != d {
        return Err(Error::precondition(
            "need exactly d expansion factors for a d-dimensional classification",
        ));
    }
    if expansion.iter().any(|&x| x <= 1.0) {
        return Err(Error::precondition("every expansion factor must exceed 1"));
    }
    let lambda: f64 = expansion.iter().product();
    let lambda0 = expansion.iter().cloned().fold(f64::INFINITY, f64::min);
    let eigenvalues = jordan_structure(h_matrix)?;
    if eigenvalues.iter().any(|e| e.modulus < 1e-12) {
        return Err(Error::precondition(
            "top-cohomology action must be invertible (supply the direct-limit action)",
        ));
    }
    let leading = eigenvalues
        .iter()
        .map(|e| e.modulus)
        .fold(0.0f64, f64::max);
    if (leading - lambda).abs() > 1e-9 * lambda {
        return Err(Error::mismatch(format!(
            "leading cohomology eigenvalue {} must equal the total expansion {}",
            leading, lambda
        )));
    }
    classify_inner(d, lambda, lambda0, lambda.ln(), lambda0.ln(), eigenvalues)
}

fn classify_inner(
    d: usize,
    lambda: f64,
    lambda0: f64,
    h_top: f64,
    chi_minus: f64,
    eigenvalues: Vec<EigenvalueInfo>,
) -> Result<SpectralClassification> {
    if h_top <= 0.0 || chi_minus <= 0.0 {
        return Err(Error::precondition(
            "classification needs positive entropy and expansion exponents",
        ));
    }
    let threshold = lambda / lambda0;
    let mut sigma_plus_cap = Vec::new();
    let mut sigma_minus_cap = Vec::new();
    let mut sigma_minus = Vec::new();
    let mut e_plus = Vec::new();
    let mut e_plus_plus = Vec::new();
    for (i, info) in eigenvalues.iter().enumerate() {
        let inv = 1.0 / info.value;
        if side_of(info, 1.0) == Side::Above {
            sigma_plus_cap.push(info.value);
            sigma_minus_cap.push(inv);
        }
        // Strict inequality log|1/ν| < chi_minus − h_top; a boundary value
        // (exactly on the circle when d = 1) is excluded.
        if inv.norm().ln() < chi_minus - h_top - 1e-12 {
            sigma_minus.push(inv);
        }
        match side_of(info, threshold) {
            Side::Above => {
                e_plus.push(i);
                e_plus_plus.push(i);
            }
            Side::Equal => e_plus.push(i),
            Side::Below => {}
        }
    }
    sort_complex(&mut sigma_plus_cap);
    sort_complex(&mut sigma_minus_cap);
    sort_complex(&mut sigma_minus);
    if d == 1 {
        // The defining inequality degenerates to |ν| < 1, so the two
        // contracting sets must agree; disagreement means a broken
        // threshold decision.
        if sigma_minus.len() != sigma_minus_cap.len()
            || sigma_minus
                .iter()
                .zip(&sigma_minus_cap)
                .any(|(a, b)| (a - b).norm() > 1e-9)
        {
            return Err(Error::internal(
                "d=1 contracting sets disagree between definition and shortcut",
            ));
        }
    }
    let pf_inv = 1.0 / lambda;
    if d == 1
        && !sigma_minus_cap
            .iter()
            .any(|v| (v - Complex64::new(pf_inv, 0.0)).norm() < 1e-9)
    {
        return Err(Error::internal(
            "reciprocal of the leading eigenvalue missing from the contracting set",
        ));
    }
    let pisot_diagnostic = sigma_minus
        .iter()
        .all(|v| (v - Complex64::new(pf_inv, 0.0)).norm() < 1e-9);
    Ok(SpectralClassification {
        d,
        lambda,
        lambda0,
        h_top,
        chi_minus,
        alpha_threshold: h_top / chi_minus,
        eigenvalues,
        sigma_plus_cap,
        sigma_minus_cap,
        sigma_minus,
        e_plus,
        e_plus_plus,
        pisot_diagnostic,
    })
}

/// One predicted resonance with the regularity space it is predicted in.
#[derive(Debug, Clone, Serialize)]
pub struct LadderEntry {
    /// Predicted resonance e^{−k·h_top}·ν.
    pub value: Complex64,
    pub modulus: f64,
    /// Ladder depth.
    pub k: usize,
    /// The base-set eigenvalue ν this entry descends from.
    pub source: Complex64,
    /// Smoothness index of the space the prediction lives in (r + k).
    pub target_r: i64,
    /// Transversal regularity of that space (α − k).
    pub target_alpha: f64,
}

/// Predicted correlation spectrum for observables of regularity (r, α).
#[derive(Debug, Clone, Serialize)]
pub struct RuellePrediction {
    /// σ⁻ with the trivial resonance 1/λ removed.
    pub base_set: Vec<Complex64>,
    /// e^{−k·h_top}·ν for ν in the base set, k ≤ k_max and k < α − h_top/χ₋.
    pub ladder: Vec<LadderEntry>,
    pub alpha_threshold: f64,
    /// Empty base set: nothing obstructs super-exponential decay.
    pub pisot_diagnostic: bool,
    pub r: i64,
    pub alpha: f64,
    pub k_max: usize,
}

/// Emits the predicted resonance set for the flow on observables with
/// `r` stable derivatives and transversal regularity `alpha`.
pub fn ruelle_prediction(
    cls: &SpectralClassification,
    r: i64,
    alpha: f64,
    k_max: usize,
) -> Result<RuellePrediction> {
    if alpha <= cls.alpha_threshold {
        return Err(Error::precondition(format!(
            "resonance predictions require alpha > h_top/chi_minus = {}; got alpha = {}",
            cls.alpha_threshold, alpha
        )));
    }
    let pf_inv = Complex64::new((-cls.h_top).exp(), 0.0);
    let mut base_set: Vec<Complex64> = cls
        .sigma_minus
        .iter()
        .cloned()
        .filter(|v| (v - pf_inv).norm() > 1e-9)
        .collect();
    sort_complex(&mut base_set);
    let mut ladder = Vec::new();
    if cls.d == 1 {
        for &nu in &base_set {
            for k in 0..=k_max {
                if (k as f64) >= alpha - cls.alpha_threshold {
                    break;
                }
                let value = nu * (-(k as f64) * cls.h_top).exp();
                ladder.push(LadderEntry {
                    value,
                    modulus: value.norm(),
                    k,
                    source: nu,
                    target_r: r + k as i64,
                    target_alpha: alpha - k as f64,
                });
            }
        }
    }
    ladder.sort_by(|a, b| {
        a.k.cmp(&b.k)
            .then(b.modulus.partial_cmp(&a.modulus).unwrap())
            .then(a.value.arg().partial_cmp(&b.value.arg()).unwrap())
    });
    for v in base_set.iter().chain(ladder.iter().map(|e| &e.value)) {
        let m = v.norm();
        if m <= 0.0 || m >= 1.0 {
            return Err(Error::internal("predicted resonance outside the open unit disc"));
        }
    }
    Ok(RuellePrediction {
        pisot_diagnostic: base_set.is_empty(),
        base_set,
        ladder,
        alpha_threshold: cls.alpha_threshold,
        r,
        alpha,
        k_max,
    })
}

/// One deviation row: ergodic sums against the matching invariant
/// distributions grow like T^exponent · (log T)^log_power.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationRow {
    pub eigenvalue: Complex64,
    pub modulus: f64,
    /// Growth exponent d·log|ν|/log λ.
    pub exponent: f64,
    /// Position within a Jordan block (1-based).
    pub j: usize,
    /// Power of log T (j−1 above the threshold, j on it).
    pub log_power: usize,
    /// Whether |ν| clears λ/λ₀ strictly.
    pub strict: bool,
    /// Number of Jordan blocks of size ≥ j (independent distributions
    /// at this row).
    pub multiplicity: usize,
}

/// Growth exponents for deviations of ergodic averages, ordered by
/// dominance.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationExponentTable {
    pub rows: Vec<DeviationRow>,
    /// Exponent d·(1 − log λ₀/log λ) of the boundary remainder once all
    /// listed distributions vanish; 0 in dimension one (bounded remainder).
    pub boundary_exponent: f64,
}

/// Builds the deviation exponent table from a classification.
pub fn deviation_exponent_table(cls: &SpectralClassification) -> DeviationExponentTable {
    let mut rows = Vec::new();
    for &i in &cls.e_plus {
        let info = &cls.eigenvalues[i];
        let strict = cls.e_plus_plus.contains(&i);
        let exponent = cls.d as f64 * info.modulus.ln() / cls.lambda.ln();
        let kappa = info.jordan_blocks.first().copied().unwrap_or(1);
        for j in 1..=kappa {
            let multiplicity = info.jordan_blocks.iter().filter(|&&s| s >= j).count();
            rows.push(DeviationRow {
                eigenvalue: info.value,
                modulus: info.modulus,
                exponent,
                j,
                log_power: if strict { j - 1 } else { j },
                strict,
                multiplicity,
            });
        }
    }
    rows.sort_by(|a, b| {
        b.exponent
            .partial_cmp(&a.exponent)
            .unwrap()
            .then(b.log_power.cmp(&a.log_power))
            .then(b.modulus.partial_cmp(&a.modulus).unwrap())
            .then(a.eigenvalue.arg().partial_cmp(&b.eigenvalue.arg()).unwrap())
    });
    let boundary_exponent = cls.d as f64 * (1.0 - cls.chi_minus / cls.h_top);
    DeviationExponentTable {
        rows,
        boundary_exponent,
    }
}
