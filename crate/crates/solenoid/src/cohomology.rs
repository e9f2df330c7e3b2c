//! Integer cohomology of the collared complex, the induced map on it, and
//! the eventual range (the direct-limit cohomology of the solenoid).
//!
//! Everything here is exact. The coboundary is put into Smith normal form
//! over the integers, H¹ is its cokernel (free for one-dimensional
//! complexes, but torsion is tracked and reported anyway), and the induced
//! map `A` on the free part is read off in the Smith basis — deterministic
//! because edge order is. The direct limit over ℚ is captured by the
//! eventual range `ER = im(A^β₁)`, on which `A` restricts to an invertible
//! rational matrix `A_ER`; classes project onto `ER` along `ker(A^β₁)`.

use crate::ap::APComplex;
use crate::error::{Error, Result};
use crate::intpoly::IntPoly;
use crate::ratmat::RatMat;
use crate::snf::{smith_normal_form, Snf};

/// Exact cohomology of a complex with the induced-map spectral scaffolding.
#[derive(Debug, Clone)]
pub struct CohomologyData {
    /// Rank of H⁰ (= number of connected components).
    pub h0_rank: usize,
    /// Free rank β₁ of H¹.
    pub h1_rank: usize,
    /// Invariant factors > 1 of H¹ (always empty for 1-complexes; kept in
    /// the report because the spectral layer must ignore it explicitly).
    pub h1_torsion: Vec<i128>,
    /// Induced map on the free part of H¹ in the recorded Smith basis.
    pub a: Vec<Vec<i64>>,
    /// Basis of the free part inside C¹ (one vector per column of `a`).
    pub h1_basis: Vec<Vec<i128>>,
    /// Exact characteristic polynomial of `a`.
    pub char_a: IntPoly,
    /// Rank of the eventual range `im(A^β₁)`.
    pub er_rank: usize,
    /// Columns: a rational basis of the eventual range (β₁ × er_rank).
    pub er_basis: RatMat,
    /// Matrix of `A` restricted to the eventual range, in `er_basis`.
    pub a_er: RatMat,
    /// Exact inverse of `a_er` (the restriction is invertible).
    pub a_er_inv: RatMat,
    /// Exact characteristic polynomial of `a_er`.
    pub char_a_er: IntPoly,
    /// Whether char(abelianization of the base rule) divides char(A) — an
    /// observed property across the corpus, reported but never assumed.
    pub base_char_divides: bool,
    snf: Snf,
    /// Projection ℚ^β₁ → ER coordinates along ker(A^β₁) (er_rank × β₁).
    proj_er: RatMat,
}

/// Computes exact cohomology and the direct-limit data of a complex.
pub fn cohomology(cx: &APComplex) -> Result<CohomologyData> {
    let e_count = cx.n_edges();
    let d128: Vec<Vec<i128>> = cx
        .coboundary
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let snf = smith_normal_form(&d128)?;
    let h0_rank = cx.n_vertices - snf.rank;
    let h1_rank = e_count - snf.rank;
    let h1_torsion = snf.torsion();
    let h1_basis = snf.cokernel_free_basis();
    let mut a = vec![vec![0i64; h1_rank]; h1_rank];
    for (j, u) in h1_basis.iter().enumerate() {
        let image = apply_i64_mat(&cx.gamma1, u)?;
        let class = snf.cokernel_class(&image)?;
        for (i, &c) in class.iter().enumerate() {
            a[i][j] = i64::try_from(c)
                .map_err(|_| Error::internal("induced-map entry exceeds i64"))?;
        }
    }
    let a_rat = RatMat::from_i64(&a);
    let char_a = IntPoly::from_rat(&a_rat.char_poly());
    let a_pow = a_rat.pow(h1_rank);
    if a_pow.rank() != a_pow.mul(&a_rat).rank() {
        return Err(Error::internal(
            "eventual range did not stabilize at the free rank",
        ));
    }
    let er_basis = a_pow.column_space_basis();
    let er_rank = er_basis.ncols();
    let (a_er, a_er_inv, proj_er) = if er_rank == 0 {
        (
            RatMat::zeros(0, 0),
            RatMat::zeros(0, 0),
            RatMat::zeros(0, h1_rank),
        )
    } else {
        let a_er = er_basis
            .solve(&a_rat.mul(&er_basis))
            .ok_or_else(|| Error::internal("eventual range is not A-invariant"))?;
        let a_er_inv = a_er
            .inverse()
            .ok_or_else(|| Error::internal("A is singular on its eventual range"))?;
        let null = a_pow.null_space_basis();
        let mut combined = RatMat::zeros(h1_rank, h1_rank);
        for i in 0..h1_rank {
            for j in 0..er_rank {
                combined[(i, j)] = er_basis[(i, j)].clone();
            }
            for j in 0..null.ncols() {
                combined[(i, er_rank + j)] = null[(i, j)].clone();
            }
        }
        let inv = combined
            .inverse()
            .ok_or_else(|| Error::internal("im(A^β₁) ⊕ ker(A^β₁) failed to span"))?;
        let mut proj = RatMat::zeros(er_rank, h1_rank);
        for i in 0..er_rank {
            for j in 0..h1_rank {
                proj[(i, j)] = inv[(i, j)].clone();
            }
        }
        (a_er, a_er_inv, proj)
    };
    let char_a_er = IntPoly::from_rat(&a_er.char_poly());
    let char_base = IntPoly::from_rat(&RatMat::from_i64(&cx.collared.base.matrix()).char_poly());
    let base_char_divides = char_a.divide_exact(&char_base).is_some();
    Ok(CohomologyData {
        h0_rank,
        h1_rank,
        h1_torsion,
        a,
        h1_basis,
        char_a,
        er_rank,
        er_basis,
        a_er,
        a_er_inv,
        char_a_er,
        base_char_divides,
        snf,
        proj_er,
    })
}

fn apply_i64_mat(m: &[Vec<i64>], v: &[i128]) -> Result<Vec<i128>> {
    let overflow = || Error::internal("integer overflow applying a cochain map");
    m.iter()
        .map(|row| {
            let mut acc: i128 = 0;
            for (a, b) in row.iter().zip(v.iter()) {
                acc = acc
                    .checked_add((*a as i128).checked_mul(*b).ok_or_else(overflow)?)
                    .ok_or_else(overflow)?;
            }
            Ok(acc)
        })
        .collect()
}

impl CohomologyData {
    /// Class of an integer 1-cochain on the free part of H¹ (exact).
    pub fn class_of(&self, cochain: &[i128]) -> Result<Vec<i128>> {
        self.snf.cokernel_class(cochain)
    }

    /// Class of a real 1-cochain on the free part of H¹ (the Smith basis
    /// change applied in floating point).
    pub fn class_of_f64(&self, cochain: &[f64]) -> Vec<f64> {
        let m = self.snf.uinv.len();
        (self.snf.rank..m)
            .map(|i| {
                cochain
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| self.snf.uinv[i][j] as f64 * x)
                    .sum()
            })
            .collect()
    }

    /// Projection of an H¹ class onto eventual-range coordinates, exact.
    pub fn project_er(&self, class: &RatMat) -> RatMat {
        self.proj_er.mul(class)
    }

    pub fn proj_er_f64(&self) -> Vec<Vec<f64>> {
        self.proj_er.to_f64()
    }

    pub fn er_basis_f64(&self) -> Vec<Vec<f64>> {
        self.er_basis.to_f64()
    }

    pub fn a_er_f64(&self) -> Vec<Vec<f64>> {
        self.a_er.to_f64()
    }

    pub fn a_er_inv_f64(&self) -> Vec<Vec<f64>> {
        self.a_er_inv.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap::ap_complex;
    use crate::substitution::parse;

    fn coh(text: &str) -> (APComplex, CohomologyData) {
        let cx = ap_complex(&parse(text).unwrap(), 2).unwrap();
        let data = cohomology(&cx).unwrap();
        (cx, data)
    }

    #[test]
    fn one_letter_circle_cohomology() {
        let (_, data) = coh("a -> aa");
        assert_eq!(data.h0_rank, 1);
        assert_eq!(data.h1_rank, 1);
        assert!(data.h1_torsion.is_empty());
        assert_eq!(data.a, vec![vec![2]]);
        assert_eq!(data.er_rank, 1);
        assert_eq!(data.char_a, IntPoly::from_i64(&[-2, 1]));
        assert!(data.base_char_divides);
    }

    #[test]
    fn fibonacci_cohomology() {
        let (_, data) = coh("a -> ab\nb -> a");
        assert_eq!(data.h0_rank, 1);
        assert_eq!(data.h1_rank, 2);
        assert!(data.h1_torsion.is_empty());
        // x^2 - x - 1, exactly.
        assert_eq!(data.char_a, IntPoly::from_i64(&[-1, -1, 1]));
        // A is invertible over Z, so the limit keeps the full rank.
        assert_eq!(data.er_rank, 2);
        assert_eq!(data.char_a_er, IntPoly::from_i64(&[-1, -1, 1]));
        assert!(data.base_char_divides);
    }

    #[test]
    fn thue_morse_cohomology() {
        let (_, data) = coh("a -> ab\nb -> ba");
        assert_eq!(data.h0_rank, 1);
        assert_eq!(data.h1_rank, 3);
        // Hand-derived via the cycle space of the 6-edge complex:
        // char(A) = x(x-2)(x+1). The kernel direction dies in the limit.
        assert_eq!(data.char_a, IntPoly::from_i64(&[0, -2, -1, 1]));
        assert_eq!(data.er_rank, 2);
        assert_eq!(data.char_a_er, IntPoly::from_i64(&[-2, -1, 1]));
        assert!(data.base_char_divides);
    }

    #[test]
    fn quartic_rule_cohomology() {
        let (_, data) = coh("a -> abbb\nb -> a");
        assert_eq!(data.h1_rank, 3);
        // Hand-derived: char(A) = x(x^2 - x - 3).
        assert_eq!(data.char_a, IntPoly::from_i64(&[0, -3, -1, 1]));
        assert_eq!(data.er_rank, 2);
        assert_eq!(data.char_a_er, IntPoly::from_i64(&[-3, -1, 1]));
        assert!(data.base_char_divides);
    }

    #[test]
    fn classes_evolve_by_a_exactly() {
        for text in ["a -> ab\nb -> a", "a -> ab\nb -> ba", "a -> abbb\nb -> a"] {
            let (cx, data) = coh(text);
            let e = cx.n_edges();
            // Deterministic pseudo-random integer cochains.
            let mut seedling = 37i128;
            for _ in 0..5 {
                let x: Vec<i128> = (0..e)
                    .map(|_| {
                        seedling = (seedling * 131 + 7) % 97;
                        seedling - 48
                    })
                    .collect();
                let gx = apply_i64_mat(&cx.gamma1, &x).unwrap();
                let lhs = data.class_of(&gx).unwrap();
                let cls = data.class_of(&x).unwrap();
                let rhs: Vec<i128> = (0..data.h1_rank)
                    .map(|i| {
                        (0..data.h1_rank)
                            .map(|j| data.a[i][j] as i128 * cls[j])
                            .sum()
                    })
                    .collect();
                assert_eq!(lhs, rhs, "{}", text);
            }
        }
    }

    #[test]
    fn coboundaries_have_zero_class() {
        let (cx, data) = coh("a -> abbb\nb -> a");
        for v in 0..cx.n_vertices {
            let f: Vec<i128> = (0..cx.n_vertices).map(|w| ((w == v) as i128) * 3).collect();
            let db: Vec<i128> = cx
                .coboundary
                .iter()
                .map(|row| row.iter().zip(f.iter()).map(|(&a, &b)| a as i128 * b).sum())
                .collect();
            assert!(data.class_of(&db).unwrap().iter().all(|&c| c == 0));
        }
    }

    #[test]
    fn lambda_is_always_in_the_spectrum() {
        // The length cochain is a lambda-eigenvector of the pullback and
        // pairs nontrivially with any directed cycle, so lambda is an
        // eigenvalue of A for every rule.
        for text in [
            "a -> ab\nb -> a",
            "a -> ab\nb -> ba",
            "a -> abbb\nb -> a",
            "a -> aa",
        ] {
            let (cx, data) = coh(text);
            let p = data.char_a.eval_f64(cx.lambda);
            assert!(p.abs() < 1e-9, "{}: char_a(lambda) = {}", text, p);
        }
    }

    #[test]
    fn er_projection_identities() {
        let (_, data) = coh("a -> abbb\nb -> a");
        // proj ∘ basis = identity on ER coordinates.
        let id = data.project_er(&data.er_basis);
        assert_eq!(id, RatMat::identity(data.er_rank));
        // A_ER ∘ A_ER⁻¹ = identity.
        assert_eq!(data.a_er.mul(&data.a_er_inv), RatMat::identity(data.er_rank));
        // Projection intertwines: proj(A v) = A_ER proj(v) for all v.
        let av = data.proj_er.mul(&RatMat::from_i64(&data.a));
        let va = data.a_er.mul(&data.proj_er);
        assert_eq!(av, va);
    }
}
