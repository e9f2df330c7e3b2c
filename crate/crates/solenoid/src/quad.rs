//! Gauss–Legendre quadrature with panel splitting.
//!
//! The correlation integrands are piecewise polynomial (bump combs against
//! bump combs), so panel-split Gauss–Legendre of modest order integrates
//! them exactly up to roundoff; a rule of order n is exact through degree
//! 2n−1 on each panel.

use crate::error::{Error, Result};

/// Nodes and weights on the reference interval [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the order-n rule by Newton iteration on the Legendre
    /// polynomial from the Chebyshev initial guesses.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::precondition("quadrature order must be at least 1"));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    let (_, d2) = legendre_with_derivative(n, x);
                    dp = d2;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x.abs();
            nodes[n - 1 - i] = x.abs();
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(GaussLegendre {
            order,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫_a^b f, mapped affinely from the reference interval.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integral over consecutive panels `[b_0,b_1], [b_1,b_2], …`.
    /// Breakpoints must be finite and non-decreasing.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        breakpoints: &[f64],
        mut f: F,
    ) -> Result<f64> {
        if breakpoints.len() < 2 {
            return Err(Error::precondition(
                "panel integration needs at least two breakpoints",
            ));
        }
        let mut acc = 0.0;
        for pair in breakpoints.windows(2) {
            if !pair[0].is_finite() || !pair[1].is_finite() || pair[1] < pair[0] {
                return Err(Error::precondition(
                    "panel breakpoints must be finite and non-decreasing",
                ));
            }
            acc += self.integrate(pair[0], pair[1], &mut f);
        }
        Ok(acc)
    }
}

/// (P_n(x), P_n′(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = if (x * x - 1.0).abs() < 1e-300 {
        // Endpoint value: P_n′(±1) = ±^{n+1} n(n+1)/2.
        let s = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 + 1) };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        (n as f64) * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}
