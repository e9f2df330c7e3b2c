//! Suspension of cylinder functions to the solenoid: time-bump profiles,
//! the graded solenoid series of a suspended function, and its leafwise
//! (flow-direction) derivative.
//!
//! A suspended function is u_ε(t)·h(c) in flow-box coordinates around the
//! canonical transversal section. Its level-k graded piece lives on the
//! k-th cover and equals u_ε(λ^k t)·(δ_k h) near each level-k preimage of
//! the section base point, so the stored norms are
//! ‖piece‖_C⁰ = ‖u‖_∞·‖δ_k h‖_∞ and ‖piece‖_C¹ picks up λ^k from the
//! rescaled time argument. The flow derivative X satisfies
//! X·(level-k pull-back) = λ^{−k}·(pull-back of d/dt), which is why one
//! derivative trades (r, α) certification for (r−1, α+1).

use crate::cylinder::{canonical_pieces, certify_from_norms, CylinderFunction, SraCertificate};
use crate::error::{Error, Result};
use crate::measure::InvariantMeasure;
use serde::Serialize;

/// The even bump c·(1 − (t/ε)²)⁴ on (−ε, ε), normalized to integral 1
/// (c = 315/256ε). Polynomial, so every norm used here has a closed form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BumpProfile {
    epsilon: f64,
    coefficient: f64,
}

impl BumpProfile {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::precondition("bump width must be positive and finite"));
        }
        Ok(BumpProfile {
            epsilon,
            coefficient: 315.0 / (256.0 * epsilon),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// u(t); zero outside (−ε, ε).
    pub fn eval(&self, t: f64) -> f64 {
        let s = t / self.epsilon;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        self.coefficient * q * q * q * q
    }

    /// u′(t) = −(8c/ε)·s(1−s²)³ with s = t/ε.
    pub fn derivative(&self, t: f64) -> f64 {
        let s = t / self.epsilon;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        -(8.0 * self.coefficient / self.epsilon) * s * q * q * q
    }

    /// u″(t) = −(8c/ε²)·(1−s²)²(1−7s²).
    pub fn second_derivative(&self, t: f64) -> f64 {
        let s = t / self.epsilon;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        -(8.0 * self.coefficient / self.epsilon / self.epsilon) * q * q * (1.0 - 7.0 * s * s)
    }

    /// ∫u = c·ε·256/315, which the constructor pins to 1.
    pub fn integral(&self) -> f64 {
        self.coefficient * self.epsilon * 256.0 / 315.0
    }

    /// sup|u^{(n)}| for n = 0, 1, 2 (closed forms: the extrema of
    /// s(1−s²)³ and (1−s²)²(1−7s²) sit at s² = 1/7, 0).
    pub fn sup_nth(&self, n: usize) -> Result<f64> {
        let c = self.coefficient;
        match n {
            0 => Ok(c),
            1 => Ok(8.0 * c / self.epsilon * 216.0 / (343.0 * 7f64.sqrt())),
            2 => Ok(8.0 * c / (self.epsilon * self.epsilon)),
            _ => Err(Error::precondition(
                "bump profile norms are tracked up to the second derivative",
            )),
        }
    }
}

/// One graded piece of a suspended function.
#[derive(Debug, Clone)]
pub struct SuspendedPiece {
    /// Tower level k the piece lives on.
    pub depth: usize,
    /// Transversal factor δ_k h.
    pub transverse: CylinderFunction,
    /// ‖δ_k h‖_∞.
    pub transverse_sup: f64,
    /// C⁰ norm of the piece on its level.
    pub c0_norm: f64,
    /// C¹ norm of the piece on its level (time argument scaled by λ^k).
    pub c1_norm: f64,
}

/// u_ε(t)·h(c) (or its flow derivatives) with its graded solenoid series.
#[derive(Debug, Clone)]
pub struct SuspendedFunction {
    pub profile: BumpProfile,
    /// Number of flow derivatives applied to the time factor (0 = u, 1 = u′).
    pub order: usize,
    /// The transversal factor h.
    pub transverse: CylinderFunction,
    pub lambda: f64,
    pub pieces: Vec<SuspendedPiece>,
}

/// Builds u_ε(t)h(c) and its graded series. `edge_lengths` are the return
/// times of the section (the letter interval lengths); ε must stay below
/// a quarter of the shortest so that flow boxes cannot overlap.
pub fn suspend(
    h: &CylinderFunction,
    epsilon: f64,
    measure: &InvariantMeasure,
    edge_lengths: &[f64],
) -> Result<SuspendedFunction> {
    let min_len = edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    if edge_lengths.is_empty() || !(min_len > 0.0) {
        return Err(Error::precondition("edge lengths must be positive"));
    }
    if !(epsilon < min_len / 4.0) {
        return Err(Error::precondition(format!(
            "bump width {} must be smaller than a quarter of the shortest return time {}",
            epsilon, min_len
        )));
    }
    let profile = BumpProfile::new(epsilon)?;
    let lambda = measure.lambda();
    let deltas = canonical_pieces(h, measure)?;
    let pieces = build_pieces(&profile, 0, lambda, deltas)?;
    Ok(SuspendedFunction {
        profile,
        order: 0,
        transverse: h.clone(),
        lambda,
        pieces,
    })
}

fn build_pieces(
    profile: &BumpProfile,
    order: usize,
    lambda: f64,
    deltas: Vec<CylinderFunction>,
) -> Result<Vec<SuspendedPiece>> {
    let time_sup = profile.sup_nth(order)?;
    let time_sup_d = profile.sup_nth(order + 1)?;
    Ok(deltas
        .into_iter()
        .enumerate()
        .map(|(k, delta)| {
            let transverse_sup = delta.sup_norm();
            let c0_norm = time_sup * transverse_sup;
            let c1_norm = c0_norm.max(lambda.powi(k as i32) * time_sup_d * transverse_sup);
            SuspendedPiece {
                depth: k,
                transverse: delta,
                transverse_sup,
                c0_norm,
                c1_norm,
            }
        })
        .collect())
}

impl SuspendedFunction {
    /// Flow-direction derivative. The time factor differentiates while
    /// each level-k pull-back contributes λ^{−k}, which cancels the λ^k
    /// from the rescaled argument: the new pieces are u′(λ^k t)·δ_k h.
    /// Only one derivative is available (norms are tracked through u″).
    pub fn leafwise_derivative(&self) -> Result<SuspendedFunction> {
        if self.order >= 1 {
            return Err(Error::precondition(
                "only one flow derivative of a suspended function is certified",
            ));
        }
        let deltas: Vec<CylinderFunction> =
            self.pieces.iter().map(|p| p.transverse.clone()).collect();
        let pieces = build_pieces(&self.profile, self.order + 1, self.lambda, deltas)?;
        Ok(SuspendedFunction {
            profile: self.profile,
            order: self.order + 1,
            transverse: self.transverse.clone(),
            lambda: self.lambda,
            pieces,
        })
    }

    /// Value in flow-box coordinates (t, c-word); zero outside the box.
    pub fn eval(&self, t: f64, word: &[crate::substitution::Letter]) -> Result<f64> {
        let time = match self.order {
            0 => self.profile.eval(t),
            1 => self.profile.derivative(t),
            _ => return Err(Error::internal("unexpected profile order")),
        };
        Ok(time * self.transverse.value(word)?)
    }

    /// Decay certificate of the graded series in the (r, α) class:
    /// least C with ‖piece_k‖_{C^r} ≤ C·λ^{−kα}. r ≤ 1.
    pub fn sra_certify(&self, r: usize, alpha: f64, budget: Option<f64>) -> Result<SraCertificate> {
        if r > 1 {
            return Err(Error::precondition(
                "suspended certificates are limited to r <= 1 (the profile is used through C^2)",
            ));
        }
        let norms: Vec<f64> = self
            .pieces
            .iter()
            .map(|p| if r == 0 { p.c0_norm } else { p.c1_norm })
            .collect();
        Ok(certify_from_norms(&norms, r, alpha, self.lambda, budget))
    }
}
