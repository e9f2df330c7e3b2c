//! Integer polynomials: exact factorization over the integers and
//! floating-point roots.
//!
//! Characteristic polynomials of cohomology matrices are factored exactly
//! (content, Yun square-free decomposition, then Kronecker's interpolation
//! method for the irreducible splitting) because Jordan structure and
//! spectral classifications hang off the factor multiplicities. Kronecker's
//! method is exponential in principle but instant at the degrees that occur
//! here (cochain groups of collared complexes). Complex roots of the
//! irreducible factors are then polished numerically to ~1e-14.

use crate::error::{Error, Result};
use crate::ratmat::{Rat, RatMat};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Polynomial with integer coefficients, ascending order; the zero
/// polynomial has an empty coefficient vector, otherwise the last
/// coefficient is nonzero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        IntPoly::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// Clears denominators of a rational polynomial (ascending coefficients)
    /// by the least common multiple, returning the integer polynomial.
    pub fn from_rat(coeffs: &[Rat]) -> Self {
        let mut lcm = BigInt::one();
        for c in coeffs {
            let d = c.denom();
            lcm = &lcm / num_integer_gcd(&lcm, d) * d;
        }
        IntPoly::new(
            coeffs
                .iter()
                .map(|c| c.numer() * (&lcm / c.denom()))
                .collect(),
        )
    }

    pub fn zero() -> Self {
        IntPoly { coeffs: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial has none.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn leading(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn eval_int(&self, x: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + big_to_f64(c);
        }
        acc
    }

    /// Evaluates the polynomial at a square rational matrix, exactly.
    pub fn eval_mat(&self, a: &RatMat) -> RatMat {
        let n = a.nrows();
        let mut acc = RatMat::zeros(n, n);
        for c in self.coeffs.iter().rev() {
            acc = a.mul(&acc);
            let c = Rat::from_integer(c.clone());
            for i in 0..n {
                let v = &acc[(i, i)] + &c;
                acc[(i, i)] = v;
            }
        }
        acc
    }

    pub fn derivative(&self) -> IntPoly {
        if self.coeffs.len() <= 1 {
            return IntPoly::zero();
        }
        IntPoly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c * BigInt::from(i as u64 + 1))
                .collect(),
        )
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() || other.is_zero() {
            return IntPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPoly::new(out)
    }

    /// Exact division: `Some(q)` with `self = q * d` when `d` divides
    /// `self` over the integers, else `None`.
    pub fn divide_exact(&self, d: &IntPoly) -> Option<IntPoly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(IntPoly::zero());
        }
        let (q, r) = rat_div_rem(&to_rat(self), &to_rat(d));
        if !r.iter().all(|c| c.is_zero()) {
            return None;
        }
        // The quotient must be integral for integer divisibility.
        if q.iter().any(|c| !c.denom().is_one()) {
            return None;
        }
        Some(IntPoly::new(q.iter().map(|c| c.numer().clone()).collect()))
    }

    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = num_integer_gcd(&g, c);
        }
        g
    }

    /// Primitive part with positive leading coefficient.
    pub fn primitive(&self) -> IntPoly {
        if self.is_zero() {
            return IntPoly::zero();
        }
        let mut c = self.content();
        if self.leading().is_negative() {
            c = -c;
        }
        IntPoly::new(self.coeffs.iter().map(|x| x / &c).collect())
    }

    /// Polynomial gcd, returned primitive with positive leading coefficient.
    pub fn gcd(&self, other: &IntPoly) -> IntPoly {
        let mut a = to_rat(self);
        let mut b = to_rat(other);
        while !b.iter().all(|c| c.is_zero()) {
            let (_, r) = rat_div_rem(&a, &b);
            a = b;
            b = r;
        }
        from_rat_primitive(&a)
    }

    /// Square-free decomposition (Yun): returns pairwise-coprime square-free
    /// primitive factors with multiplicities, `self ~ prod f_i^{m_i}` up to
    /// content.
    pub fn squarefree_decomposition(&self) -> Vec<(IntPoly, usize)> {
        let a = self.primitive();
        let Some(deg) = a.degree() else { return Vec::new() };
        if deg == 0 {
            return Vec::new();
        }
        let da = a.derivative();
        let g = a.gcd(&da);
        if g.degree() == Some(0) {
            return vec![(a, 1)];
        }
        let mut out = Vec::new();
        let mut c = a.divide_exact(&g).expect("gcd divides");
        let mut d = da
            .divide_exact(&g)
            .expect("gcd divides derivative")
            .sub(&c.derivative());
        let mut i = 1usize;
        while c.degree().map_or(false, |dg| dg >= 1) {
            let p = c.gcd(&d);
            if p.degree().map_or(false, |dg| dg >= 1) {
                out.push((p.clone(), i));
            }
            c = c.divide_exact(&p).expect("squarefree step divides");
            d = d.divide_exact(&p).expect("squarefree step divides").sub(&c.derivative());
            i += 1;
        }
        out
    }

    fn sub(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![BigInt::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] -= c;
        }
        IntPoly::new(out)
    }

    /// Irreducible factorization over the integers (content dropped):
    /// `self ~ prod f_i^{m_i}` with each `f_i` primitive, irreducible, with
    /// positive leading coefficient; deterministic order.
    pub fn factor(&self) -> Result<Vec<(IntPoly, usize)>> {
        let mut out: Vec<(IntPoly, usize)> = Vec::new();
        for (sf, mult) in self.squarefree_decomposition() {
            for f in kronecker_split(&sf)? {
                out.push((f, mult));
            }
        }
        out.sort();
        Ok(out)
    }

    /// Complex roots to high accuracy. Intended for square-free polynomials
    /// (irreducible factors); multiple roots degrade the Durand–Kerner
    /// iteration and are rejected by the residual check.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let deg = self.degree().ok_or_else(|| Error::internal("roots of zero polynomial"))?;
        if deg == 0 {
            return Ok(Vec::new());
        }
        let c: Vec<f64> = self.coeffs.iter().map(big_to_f64).collect();
        let lead = c[deg];
        let monic: Vec<f64> = c.iter().map(|x| x / lead).collect();
        if deg == 1 {
            return Ok(vec![Complex64::new(-monic[0], 0.0)]);
        }
        if deg == 2 {
            let (b, c0) = (monic[1], monic[0]);
            let disc = b * b - 4.0 * c0;
            if disc >= 0.0 {
                let s = disc.sqrt();
                // Stable quadratic formula: avoid cancellation.
                let q = -0.5 * (b + b.signum() * s);
                let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q, c0 / q) };
                return Ok(vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]);
            }
            let s = (-disc).sqrt() / 2.0;
            return Ok(vec![
                Complex64::new(-b / 2.0, s),
                Complex64::new(-b / 2.0, -s),
            ]);
        }
        durand_kerner(&monic)
    }
}

impl std::fmt::Display for IntPoly {
    /// Human-readable form in descending powers, e.g. `x^2 - x - 1`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.sign() == num_bigint::Sign::Minus {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.sign() == num_bigint::Sign::Minus {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let show_coeff = k == 0 || !mag.is_one();
            if show_coeff {
                write!(f, "{}", mag)?;
            }
            match k {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{}", k)?,
            }
        }
        Ok(())
    }
}

fn num_integer_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let mut a = a.abs();
    let mut b = b.abs();
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

fn to_rat(p: &IntPoly) -> Vec<Rat> {
    p.coeffs.iter().map(|c| Rat::from_integer(c.clone())).collect()
}

fn trim_rat(mut v: Vec<Rat>) -> Vec<Rat> {
    while v.last().map_or(false, |c| c.is_zero()) {
        v.pop();
    }
    v
}

/// Division with remainder for rational polynomials (ascending coeffs).
fn rat_div_rem(a: &[Rat], b: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    let a = trim_rat(a.to_vec());
    let b = trim_rat(b.to_vec());
    assert!(!b.is_empty(), "division by zero polynomial");
    if a.len() < b.len() {
        return (Vec::new(), a);
    }
    let mut rem = a.clone();
    let mut quot = vec![Rat::zero(); a.len() - b.len() + 1];
    let lead = b.last().unwrap().clone();
    for k in (0..quot.len()).rev() {
        let idx = k + b.len() - 1;
        if rem.len() <= idx || rem[idx].is_zero() {
            continue;
        }
        let q = &rem[idx] / &lead;
        quot[k] = q.clone();
        for (i, bc) in b.iter().enumerate() {
            let v = &rem[k + i] - &(&q * bc);
            rem[k + i] = v;
        }
    }
    (trim_rat(quot), trim_rat(rem))
}

fn from_rat_primitive(coeffs: &[Rat]) -> IntPoly {
    IntPoly::from_rat(coeffs).primitive()
}

/// All divisors of `|v|`, both signs, by trial division. Values come from
/// evaluating small polynomials at small points, so they fit in `i128`.
fn signed_divisors(v: &BigInt) -> Result<Vec<BigInt>> {
    let n = v
        .abs()
        .to_i128()
        .ok_or_else(|| Error::Numerical {
            what: "polynomial factorization".into(),
            msg: "interpolation value too large for divisor enumeration".into(),
        })?;
    assert!(n != 0, "divisors of zero are not enumerable");
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1i128;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    let mut out = Vec::with_capacity(small.len() * 2);
    for d in small {
        out.push(BigInt::from(d));
        out.push(BigInt::from(-d));
    }
    Ok(out)
}

/// Splits a primitive square-free polynomial into irreducible factors by
/// Kronecker's method: a degree-k factor is determined by its values at
/// k+1 integer points, and those values must divide the values of the
/// polynomial there.
fn kronecker_split(p: &IntPoly) -> Result<Vec<IntPoly>> {
    let deg = match p.degree() {
        None | Some(0) => return Ok(Vec::new()),
        Some(d) => d,
    };
    if deg == 1 {
        return Ok(vec![p.primitive()]);
    }
    // Strip roots at zero first so evaluation points can start at 0.
    if p.coeffs()[0].is_zero() {
        let x = IntPoly::from_i64(&[0, 1]);
        let rest = p.divide_exact(&x).expect("x divides");
        let mut out = vec![x];
        out.extend(kronecker_split(&rest)?);
        out.sort();
        return Ok(out);
    }
    let points: Vec<BigInt> = sample_points(deg / 2 + 1);
    let values: Vec<BigInt> = points.iter().map(|x| p.eval_int(x)).collect();
    // A root at a sample point yields a linear factor immediately.
    for (x, v) in points.iter().zip(&values) {
        if v.is_zero() {
            let lin = IntPoly::new(vec![-x.clone(), BigInt::one()]);
            let rest = p.divide_exact(&lin).expect("root divides");
            let mut out = vec![lin.primitive()];
            out.extend(kronecker_split(&rest)?);
            out.sort();
            return Ok(out);
        }
    }
    for k in 1..=deg / 2 {
        let pts = &points[..=k];
        let divisor_sets: Vec<Vec<BigInt>> = values[..=k]
            .iter()
            .map(signed_divisors)
            .collect::<Result<_>>()?;
        let total: usize = divisor_sets.iter().map(|s| s.len()).product();
        if total > 2_000_000 {
            return Err(Error::Numerical {
                what: "polynomial factorization".into(),
                msg: format!("divisor search space too large ({} tuples)", total),
            });
        }
        // Fix the sign of the value at the first point: g and -g divide
        // together, so half the tuples are redundant.
        let first_half: Vec<BigInt> = divisor_sets[0]
            .iter()
            .filter(|d| d.is_positive())
            .cloned()
            .collect();
        let mut tuple = vec![BigInt::zero(); k + 1];
        if let Some(g) = search_tuples(p, pts, &first_half, &divisor_sets[1..], &mut tuple, 0)? {
            let rest = p.divide_exact(&g).expect("found factor divides");
            let mut out = kronecker_split(&g)?;
            out.extend(kronecker_split(&rest)?);
            out.sort();
            return Ok(out);
        }
    }
    Ok(vec![p.primitive()])
}

fn sample_points(n: usize) -> Vec<BigInt> {
    // 0, 1, -1, 2, -2, ...
    let mut pts = vec![BigInt::zero()];
    let mut k = 1i64;
    while pts.len() < n.max(2) + 2 {
        pts.push(BigInt::from(k));
        pts.push(BigInt::from(-k));
        k += 1;
    }
    pts
}

fn search_tuples(
    p: &IntPoly,
    pts: &[BigInt],
    first: &[BigInt],
    rest: &[Vec<BigInt>],
    tuple: &mut Vec<BigInt>,
    depth: usize,
) -> Result<Option<IntPoly>> {
    let options = if depth == 0 { first } else { &rest[depth - 1] };
    for val in options {
        tuple[depth] = val.clone();
        if depth + 1 < pts.len() {
            if let Some(g) = search_tuples(p, pts, first, rest, tuple, depth + 1)? {
                return Ok(Some(g));
            }
        } else if let Some(g) = interpolate_integer(pts, tuple) {
            if g.degree().map_or(false, |d| d >= 1) && p.divide_exact(&g).is_some() {
                return Ok(Some(g.primitive()));
            }
        }
    }
    Ok(None)
}

/// Lagrange interpolation; `Some` only when the result has integer
/// coefficients.
fn interpolate_integer(pts: &[BigInt], vals: &[BigInt]) -> Option<IntPoly> {
    let n = pts.len();
    let mut acc = vec![Rat::zero(); n];
    for i in 0..n {
        // Basis polynomial prod_{j != i} (x - x_j) / (x_i - x_j)
        let mut basis = vec![Rat::zero(); n];
        basis[0] = Rat::one();
        let mut deg = 0usize;
        let mut denom = Rat::one();
        for (j, xj) in pts.iter().enumerate() {
            if j == i {
                continue;
            }
            // basis *= (x - x_j)
            for k in (0..=deg).rev() {
                let shifted = basis[k].clone();
                basis[k + 1] += &shifted;
                let v = &basis[k] * &Rat::from_integer(-xj.clone());
                basis[k] = v;
            }
            deg += 1;
            denom *= Rat::from_integer(pts[i].clone() - xj);
        }
        let scale = Rat::from_integer(vals[i].clone()) / denom;
        for k in 0..n {
            let v = &acc[k] + &(&basis[k] * &scale);
            acc[k] = v;
        }
    }
    if acc.iter().any(|c| !c.denom().is_one()) {
        return None;
    }
    Some(IntPoly::new(acc.iter().map(|c| c.numer().clone()).collect()))
}

fn big_to_f64(c: &BigInt) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

/// Durand–Kerner simultaneous root iteration on a monic polynomial with
/// Newton polish; assumes simple roots.
fn durand_kerner(monic: &[f64]) -> Result<Vec<Complex64>> {
    let deg = monic.len() - 1;
    let radius = 1.0 + monic.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64) / (deg as f64) + 0.4;
            Complex64::from_polar(radius.powf(0.5), angle)
        })
        .collect();
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    for _ in 0..600 {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() < 1e-300 {
                denom = Complex64::new(1e-300, 0.0);
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius {
            break;
        }
    }
    // Newton polish against the same polynomial.
    let dcoeffs: Vec<f64> = monic
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect();
    let deval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in dcoeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    for zi in z.iter_mut() {
        for _ in 0..8 {
            let d = deval(*zi);
            if d.norm() < 1e-250 {
                break;
            }
            *zi -= eval(*zi) / d;
        }
    }
    for &zi in &z {
        if eval(zi).norm() > 1e-8 * (1.0 + radius.powi(deg as i32)) {
            return Err(Error::Numerical {
                what: "polynomial root finding".into(),
                msg: format!("residual {:e} too large at root {}", eval(zi).norm(), zi),
            });
        }
    }
    // Canonical order: by real part, then imaginary part.
    z.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(z)
}
