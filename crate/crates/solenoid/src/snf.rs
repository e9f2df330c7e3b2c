//! Smith normal form over the integers with tracked change-of-basis
//! matrices.
//!
//! For an integer matrix `A` this computes unimodular `U`, `V` and a
//! diagonal `D` with `A = U · D · V` and a divisibility chain
//! `d_1 | d_2 | … | d_r` of positive diagonal entries. Both `U⁻¹` and
//! `V⁻¹` are maintained alongside so that cokernel classes (`U⁻¹x` tail
//! coordinates) and kernel bases (`V⁻¹` tail columns) come out without a
//! separate inversion. Arithmetic is `i128` and overflow-checked; the
//! matrices arising from collared complexes are small with small entries,
//! so an overflow indicates a bug upstream rather than a size problem.

use crate::error::{Error, Result};

/// Smith decomposition `A = U · diag(d) · V` with `U`, `V` unimodular.
#[derive(Debug, Clone)]
pub struct Snf {
    /// Positive diagonal entries forming a divisibility chain; length = rank.
    pub diag: Vec<i128>,
    pub rank: usize,
    pub u: Vec<Vec<i128>>,
    pub uinv: Vec<Vec<i128>>,
    pub v: Vec<Vec<i128>>,
    pub vinv: Vec<Vec<i128>>,
}

impl Snf {
    /// Invariant factors greater than one (the torsion of the cokernel).
    pub fn torsion(&self) -> Vec<i128> {
        self.diag.iter().copied().filter(|&d| d > 1).collect()
    }

    /// Basis of the kernel of `A` (columns of `V⁻¹` past the rank).
    pub fn kernel_basis(&self) -> Vec<Vec<i128>> {
        let n = self.vinv.len();
        (self.rank..n)
            .map(|j| (0..n).map(|i| self.vinv[i][j]).collect())
            .collect()
    }

    /// Basis of the free part of the cokernel of `A` in the ambient
    /// coordinates (columns of `U` past the rank).
    pub fn cokernel_free_basis(&self) -> Vec<Vec<i128>> {
        let m = self.u.len();
        (self.rank..m)
            .map(|j| (0..m).map(|i| self.u[i][j]).collect())
            .collect()
    }

    /// Coordinates of `x` on the free part of the cokernel: the tail of
    /// `U⁻¹ x` past the rank. Torsion coordinates are dropped.
    pub fn cokernel_class(&self, x: &[i128]) -> Result<Vec<i128>> {
        let m = self.u.len();
        assert_eq!(x.len(), m, "class vector has wrong length");
        let mut out = Vec::with_capacity(m - self.rank);
        for i in self.rank..m {
            let mut acc: i128 = 0;
            for (j, &xj) in x.iter().enumerate() {
                acc = add(acc, mul(self.uinv[i][j], xj)?)?;
            }
            out.push(acc);
        }
        Ok(out)
    }
}

fn add(a: i128, b: i128) -> Result<i128> {
    a.checked_add(b).ok_or_else(overflow)
}

fn mul(a: i128, b: i128) -> Result<i128> {
    a.checked_mul(b).ok_or_else(overflow)
}

fn overflow() -> Error {
    Error::Numerical {
        what: "integer normal form".into(),
        msg: "i128 overflow during row reduction".into(),
    }
}

struct Work {
    s: Vec<Vec<i128>>,
    u: Vec<Vec<i128>>,
    uinv: Vec<Vec<i128>>,
    v: Vec<Vec<i128>>,
    vinv: Vec<Vec<i128>>,
}

impl Work {
    // Row operation row_i += c * row_j on S means S ← E·S with E = I + c·e_ij.
    // To preserve A = U·S·V we set U ← U·E⁻¹ (column op on U) and
    // U⁻¹ ← E·U⁻¹ (row op on U⁻¹).
    fn row_add(&mut self, i: usize, j: usize, c: i128) -> Result<()> {
        for k in 0..self.s[0].len() {
            self.s[i][k] = add(self.s[i][k], mul(c, self.s[j][k])?)?;
        }
        let m = self.u.len();
        for r in 0..m {
            self.u[r][j] = add(self.u[r][j], mul(-c, self.u[r][i])?)?;
        }
        for k in 0..m {
            self.uinv[i][k] = add(self.uinv[i][k], mul(c, self.uinv[j][k])?)?;
        }
        Ok(())
    }

    fn row_swap(&mut self, i: usize, j: usize) {
        self.s.swap(i, j);
        self.uinv.swap(i, j);
        for r in 0..self.u.len() {
            self.u[r].swap(i, j);
        }
    }

    fn row_negate(&mut self, i: usize) {
        for x in self.s[i].iter_mut() {
            *x = -*x;
        }
        for x in self.uinv[i].iter_mut() {
            *x = -*x;
        }
        for r in 0..self.u.len() {
            self.u[r][i] = -self.u[r][i];
        }
    }

    // Column operation col_j += c * col_i on S means S ← S·F; then
    // V ← F⁻¹·V (row op) and V⁻¹ ← V⁻¹·F (column op).
    fn col_add(&mut self, j: usize, i: usize, c: i128) -> Result<()> {
        for r in 0..self.s.len() {
            self.s[r][j] = add(self.s[r][j], mul(c, self.s[r][i])?)?;
        }
        let n = self.v.len();
        for k in 0..n {
            self.v[i][k] = add(self.v[i][k], mul(-c, self.v[j][k])?)?;
        }
        for r in 0..n {
            self.vinv[r][j] = add(self.vinv[r][j], mul(c, self.vinv[r][i])?)?;
        }
        Ok(())
    }

    fn col_swap(&mut self, i: usize, j: usize) {
        for r in 0..self.s.len() {
            self.s[r].swap(i, j);
        }
        self.v.swap(i, j);
        for r in 0..self.vinv.len() {
            self.vinv[r].swap(i, j);
        }
    }
}

fn eye(n: usize) -> Vec<Vec<i128>> {
    (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect()
}

/// Computes the Smith normal form of `a` (rows × cols, possibly
/// non-square).
pub fn smith_normal_form(a: &[Vec<i128>]) -> Result<Snf> {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    assert!(a.iter().all(|r| r.len() == n), "ragged matrix");
    let mut w = Work {
        s: a.to_vec(),
        u: eye(m),
        uinv: eye(m),
        v: eye(n),
        vinv: eye(n),
    };
    let mut t = 0usize;
    while t < m.min(n) {
        // Find the entry of smallest absolute value in the trailing block.
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..m {
            for j in t..n {
                if w.s[i][j] != 0
                    && pivot.map_or(true, |(pi, pj)| w.s[i][j].abs() < w.s[pi][pj].abs())
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        w.row_swap(t, pi);
        w.col_swap(t, pj);
        // Reduce column and row against the pivot until both are clear.
        loop {
            let mut dirty = false;
            for i in t + 1..m {
                if w.s[i][t] != 0 {
                    let q = div_nearest(w.s[i][t], w.s[t][t]);
                    if q != 0 {
                        w.row_add(i, t, -q)?;
                    }
                    if w.s[i][t] != 0 {
                        // Remainder is smaller than the pivot; promote it.
                        w.row_swap(t, i);
                        dirty = true;
                    }
                }
            }
            for j in t + 1..n {
                if w.s[t][j] != 0 {
                    let q = div_nearest(w.s[t][j], w.s[t][t]);
                    if q != 0 {
                        w.col_add(j, t, -q)?;
                    }
                    if w.s[t][j] != 0 {
                        w.col_swap(t, j);
                        dirty = true;
                    }
                }
            }
            if !dirty
                && (t + 1..m).all(|i| w.s[i][t] == 0)
                && (t + 1..n).all(|j| w.s[t][j] == 0)
            {
                break;
            }
        }
        // Enforce divisibility: pivot must divide every later entry.
        let mut retry = false;
        'scan: for i in t + 1..m {
            for j in t + 1..n {
                if w.s[i][j] % w.s[t][t] != 0 {
                    w.row_add(t, i, 1)?;
                    retry = true;
                    break 'scan;
                }
            }
        }
        if retry {
            continue;
        }
        if w.s[t][t] < 0 {
            w.row_negate(t);
        }
        t += 1;
    }
    let rank = t;
    let diag: Vec<i128> = (0..rank).map(|i| w.s[i][i]).collect();
    debug_assert!(diag.windows(2).all(|p| p[1] % p[0] == 0));
    Ok(Snf {
        diag,
        rank,
        u: w.u,
        uinv: w.uinv,
        v: w.v,
        vinv: w.vinv,
    })
}

/// Quotient rounded toward the nearest integer, which makes the remainder
/// at most half the divisor and speeds up the gcd cascade.
fn div_nearest(a: i128, b: i128) -> i128 {
    let q = a / b;
    let r = a - q * b;
    if 2 * r.abs() > b.abs() {
        if (r < 0) == (b < 0) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &[Vec<i128>], b: &[Vec<i128>]) -> Vec<Vec<i128>> {
        let (m, k, n) = (a.len(), b.len(), b[0].len());
        let mut out = vec![vec![0i128; n]; m];
        for i in 0..m {
            for l in 0..k {
                for j in 0..n {
                    out[i][j] += a[i][l] * b[l][j];
                }
            }
        }
        out
    }

    fn check(a: &[Vec<i128>]) -> Snf {
        let snf = smith_normal_form(a).unwrap();
        let m = a.len();
        let n = a[0].len();
        let mut d = vec![vec![0i128; n]; m];
        for (i, &x) in snf.diag.iter().enumerate() {
            d[i][i] = x;
        }
        assert_eq!(matmul(&matmul(&snf.u, &d), &snf.v), a.to_vec());
        assert_eq!(matmul(&snf.u, &snf.uinv), eye(m));
        assert_eq!(matmul(&snf.v, &snf.vinv), eye(n));
        for w in snf.diag.windows(2) {
            assert_eq!(w[1] % w[0], 0);
        }
        assert!(snf.diag.iter().all(|&x| x > 0));
        snf
    }

    #[test]
    fn reconstruction_small_cases() {
        check(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]);
        check(&[vec![1, 0], vec![0, 1]]);
        check(&[vec![0, 0], vec![0, 0]]);
        check(&[vec![2, 0], vec![0, 3]]);
        check(&[vec![6, 10], vec![15, 25]]);
        check(&[vec![1, 2, 3]]);
        check(&[vec![4], vec![6]]);
    }

    #[test]
    fn classic_invariant_factors() {
        // d1 = gcd of entries = 2; d1*d2 = gcd of 2x2 minors = 4;
        // d1*d2*d3 = |det| = 624.
        let snf = check(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]);
        assert_eq!(snf.diag, vec![2, 2, 156]);
        let prod: i128 = snf.diag.iter().product();
        assert_eq!(prod, 624);
    }

    #[test]
    fn kernel_and_cokernel_bases() {
        // A = [[1, -1], [1, -1]]: rank 1, kernel span (1,1),
        // cokernel free part rank 1.
        let a = vec![vec![1i128, -1], vec![1, -1]];
        let snf = check(&a);
        assert_eq!(snf.rank, 1);
        let ker = snf.kernel_basis();
        assert_eq!(ker.len(), 1);
        // A · k = 0
        assert_eq!(ker[0][0] - ker[0][1], 0);
        let free = snf.cokernel_free_basis();
        assert_eq!(free.len(), 1);
        // Class map kills the image: class(A·e_0) = 0.
        let img = vec![a[0][0], a[1][0]];
        assert_eq!(snf.cokernel_class(&img).unwrap(), vec![0]);
        // ... and the free basis vector has class e_0.
        assert_eq!(snf.cokernel_class(&free[0]).unwrap(), vec![1]);
    }

    #[test]
    fn torsion_detection() {
        // coker [[2]] = Z/2
        let snf = check(&[vec![2i128]]);
        assert_eq!(snf.torsion(), vec![2]);
        // coker [[1,0],[0,3]] = Z/3
        let snf = check(&[vec![1, 0], vec![0, 3]]);
        assert_eq!(snf.torsion(), vec![3]);
    }

    #[test]
    fn rectangular_shapes() {
        let snf = check(&[vec![3, 1, 4, 1], vec![5, 9, 2, 6]]);
        assert_eq!(snf.rank, 2);
        assert_eq!(snf.kernel_basis().len(), 2);
    }
}
