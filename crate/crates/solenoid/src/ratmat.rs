//! Dense matrices over the rationals with exact arithmetic.
//!
//! Cohomology bases, eventual ranges, characteristic polynomials and rank
//! computations all have to be exact — eigenvalue thresholds and Jordan
//! block sizes are combinatorial data, not floating-point estimates — so
//! this module works over `BigRational` throughout. Matrices here are tiny
//! (cochain groups of collared complexes), so no attention is paid to
//! asymptotic performance.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat_int(x: i64) -> Rat {
    BigRational::from_integer(BigInt::from(x))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMat {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl RatMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMat { rows, cols, data: vec![Rat::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RatMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rat::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        RatMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        RatMat::from_rows(
            rows.iter().map(|r| r.iter().map(|&x| rat_int(x)).collect()).collect(),
        )
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> RatMat {
        let mut t = RatMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = RatMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * &other[(k, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &RatMat) -> RatMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        out
    }

    pub fn sub(&self, other: &RatMat) -> RatMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        out
    }

    pub fn scale(&self, s: &Rat) -> RatMat {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= s;
        }
        out
    }

    pub fn pow(&self, e: usize) -> RatMat {
        assert_eq!(self.rows, self.cols, "pow needs a square matrix");
        let mut acc = RatMat::identity(self.rows);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Reduced row echelon form; returns `(rref, pivot_columns)`.
    pub fn rref(&self) -> (RatMat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0usize;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            // Deterministic pivot choice: first nonzero entry in the column.
            let pivot = (row..m.rows).find(|&r| !m[(r, col)].is_zero());
            let Some(p) = pivot else { continue };
            m.swap_rows(row, p);
            let inv = m[(row, col)].recip();
            for j in col..m.cols {
                let v = &m[(row, j)] * &inv;
                m[(row, j)] = v;
            }
            for r in 0..m.rows {
                if r != row && !m[(r, col)].is_zero() {
                    let factor = m[(r, col)].clone();
                    for j in col..m.cols {
                        let v = &m[(r, j)] - &(&factor * &m[(row, j)]);
                        m[(r, j)] = v;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the column space: the pivot columns of the original matrix,
    /// in column order (deterministic).
    pub fn column_space_basis(&self) -> RatMat {
        let (_, pivots) = self.rref();
        let mut out = RatMat::zeros(self.rows, pivots.len());
        for (k, &c) in pivots.iter().enumerate() {
            for i in 0..self.rows {
                out[(i, k)] = self[(i, c)].clone();
            }
        }
        out
    }

    /// Basis of the null space as columns.
    pub fn null_space_basis(&self) -> RatMat {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = RatMat::zeros(self.cols, free.len());
        for (k, &fcol) in free.iter().enumerate() {
            out[(fcol, k)] = Rat::one();
            for (prow, &pcol) in pivots.iter().enumerate() {
                out[(pcol, k)] = -r[(prow, fcol)].clone();
            }
        }
        out
    }

    /// Solves `self * x = rhs` exactly; `None` if inconsistent. When the
    /// solution is underdetermined the free variables are set to zero.
    pub fn solve(&self, rhs: &RatMat) -> Option<RatMat> {
        assert_eq!(self.rows, rhs.rows, "dimension mismatch in solve");
        let mut aug = RatMat::zeros(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            for j in 0..rhs.cols {
                aug[(i, self.cols + j)] = rhs[(i, j)].clone();
            }
        }
        let (r, pivots) = aug.rref();
        // Inconsistent iff a pivot lands in the rhs block.
        if pivots.iter().any(|&p| p >= self.cols) {
            return None;
        }
        let mut x = RatMat::zeros(self.cols, rhs.cols);
        for (prow, &pcol) in pivots.iter().enumerate() {
            for j in 0..rhs.cols {
                x[(pcol, j)] = r[(prow, self.cols + j)].clone();
            }
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<RatMat> {
        assert_eq!(self.rows, self.cols, "inverse needs a square matrix");
        let x = self.solve(&RatMat::identity(self.rows))?;
        // Underdetermined systems can "solve" with zero free variables;
        // verify honestly.
        if self.mul(&x) == RatMat::identity(self.rows) {
            Some(x)
        } else {
            None
        }
    }

    /// Characteristic polynomial by the Faddeev–LeVerrier recursion,
    /// returned as ascending coefficients `c[0] + c[1] x + ... + x^n`
    /// (monic, `c[n] = 1`). Exact.
    pub fn char_poly(&self) -> Vec<Rat> {
        assert_eq!(self.rows, self.cols, "char_poly needs a square matrix");
        let n = self.rows;
        let mut coeffs = vec![Rat::zero(); n + 1];
        coeffs[n] = Rat::one();
        let mut m = RatMat::identity(n);
        for k in 1..=n {
            m = self.mul(&m);
            let mut tr = Rat::zero();
            for i in 0..n {
                tr += &m[(i, i)];
            }
            let c = -tr / rat_int(k as i64);
            for i in 0..n {
                let v = &m[(i, i)] + &c;
                m[(i, i)] = v;
            }
            coeffs[n - k] = c;
        }
        coeffs
    }

    pub fn det(&self) -> Rat {
        let cp = self.char_poly();
        let d = cp[0].clone();
        if self.rows % 2 == 1 {
            -d
        } else {
            d
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| rat_to_f64(&self[(i, j)])).collect())
            .collect()
    }

    /// Applies the matrix to an `f64` vector (converting entries on the fly).
    pub fn apply_f64(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| rat_to_f64(&self[(i, j)]) * v[j]).sum())
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for RatMat {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    // Scale down with big-integer shifts so huge numerators/denominators
    // still convert with full f64 precision.
    let num = x.numer();
    let den = x.denom();
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift = (nb.max(db) - 900).max(0) as usize;
    let n = (num.clone() >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
    let d = (den.clone() >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
    if d == 0.0 {
        // Denominator underflowed the shift; fall back to sign * infinity.
        if num.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        n / d
    }
}
