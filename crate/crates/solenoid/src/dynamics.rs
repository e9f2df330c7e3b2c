//! Finite-depth points of the expanding inverse limit, the induced
//! homeomorphism Φ, and the unit-speed translation flow.
//!
//! A depth-K point stores compatible coordinates (z_0, …, z_K) on the
//! complex, γ(z_{i+1}) = z_i. Φ applies γ to every coordinate, which
//! shifts the tuple; the flow moves level i at speed λ^{−i}. Crossing a
//! vertex at the deepest represented level is resolved only when the
//! departing edge has a unique legal successor — otherwise the orbit has
//! left the represented depth and the caller must deepen the point.

use crate::ap::APComplex;
use crate::error::{Error, Result};
use rand::Rng;

/// Point of the truncated inverse limit: coordinate i is
/// (edge index, arc-length position in [0, length)).
#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidPoint {
    pub coords: Vec<(usize, f64)>,
}

impl SolenoidPoint {
    pub fn depth(&self) -> usize {
        self.coords.len() - 1
    }

    /// Deepest represented coordinate.
    pub fn top(&self) -> (usize, f64) {
        *self.coords.last().expect("points have at least one coordinate")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Flow/shift evaluator over a fixed complex.
pub struct Dynamics<'a> {
    cx: &'a APComplex,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
}

impl<'a> Dynamics<'a> {
    pub fn new(cx: &'a APComplex) -> Result<Self> {
        let n = cx.n_edges();
        let mut successors = vec![Vec::new(); n];
        let mut predecessors = vec![Vec::new(); n];
        for &(e, f) in &cx.collared.legal_pairs {
            successors[e].push(f);
            predecessors[f].push(e);
        }
        // The expansion must map each edge across a path of the stated
        // total length; everything downstream leans on this.
        for e in 0..n {
            let path_len: f64 = cx.gamma_path[e].iter().map(|&f| cx.lengths[f]).sum();
            if (path_len - cx.lambda * cx.lengths[e]).abs() > 1e-9 {
                return Err(Error::internal(format!(
                    "edge {} image path length {} disagrees with lambda*length {}",
                    e,
                    path_len,
                    cx.lambda * cx.lengths[e]
                )));
            }
        }
        Ok(Dynamics {
            cx,
            successors,
            predecessors,
        })
    }

    pub fn complex(&self) -> &APComplex {
        self.cx
    }

    /// Image of a single coordinate under the expansion γ: position λ·t
    /// along the image path of the edge.
    pub fn gamma_point(&self, z: (usize, f64)) -> Result<(usize, f64)> {
        let (e, t) = z;
        self.check_coord(z)?;
        let mut s = self.cx.lambda * t;
        for &f in &self.cx.gamma_path[e] {
            if s < self.cx.lengths[f] {
                return Ok((f, s));
            }
            s -= self.cx.lengths[f];
        }
        // λ·t < λ·len(e) = total path length, so roundoff is the only
        // way here: clamp into the last edge.
        let f = *self.cx.gamma_path[e].last().expect("images are nonempty");
        Ok((f, self.cx.lengths[f] * (1.0 - 1e-15)))
    }

    fn check_coord(&self, z: (usize, f64)) -> Result<()> {
        let (e, t) = z;
        if e >= self.cx.n_edges() || !(0.0..self.cx.lengths[e]).contains(&t) {
            return Err(Error::precondition(format!(
                "coordinate ({}, {}) is outside the complex",
                e, t
            )));
        }
        Ok(())
    }

    /// Builds the full compatible tuple from its deepest coordinate.
    pub fn point_from_top(&self, depth: usize, top: (usize, f64)) -> Result<SolenoidPoint> {
        self.check_coord(top)?;
        let mut coords = vec![top; depth + 1];
        for i in (0..depth).rev() {
            coords[i] = self.gamma_point(coords[i + 1])?;
        }
        Ok(SolenoidPoint { coords })
    }

    /// Checks γ(z_{i+1}) = z_i for every represented level.
    pub fn validate(&self, p: &SolenoidPoint) -> Result<()> {
        if p.coords.is_empty() {
            return Err(Error::precondition("a point needs at least one coordinate"));
        }
        for (i, pair) in p.coords.windows(2).enumerate() {
            let (e, t) = self.gamma_point(pair[1])?;
            if e != pair[0].0 || (t - pair[0].1).abs() > 1e-12 {
                return Err(Error::mismatch(format!(
                    "coordinates {} and {} are not gamma-compatible: gamma gives ({}, {}), stored ({}, {})",
                    i + 1,
                    i,
                    e,
                    t,
                    pair[0].0,
                    pair[0].1
                )));
            }
        }
        Ok(())
    }

    /// The shift homeomorphism. Forward applies γ to every coordinate —
    /// prepend γ(z_0), truncate at the represented depth; inverse deletes
    /// the first coordinate and shortens the tuple.
    pub fn phi(&self, p: &SolenoidPoint, direction: Direction) -> Result<SolenoidPoint> {
        match direction {
            Direction::Forward => {
                let mut coords = Vec::with_capacity(p.coords.len());
                coords.push(self.gamma_point(p.coords[0])?);
                coords.extend(p.coords[..p.coords.len() - 1].iter().cloned());
                Ok(SolenoidPoint { coords })
            }
            Direction::Inverse => {
                if p.coords.len() < 2 {
                    return Err(Error::Depth {
                        msg: "inverse shift needs represented depth at least 1".into(),
                    });
                }
                Ok(SolenoidPoint {
                    coords: p.coords[1..].to_vec(),
                })
            }
        }
    }

    /// Translation flow by time t: level i moves by λ^{−i}·t. The deepest
    /// coordinate is advanced and the rest recomputed; a vertex crossing
    /// at the deepest level is followed only when the continuation there
    /// is unique.
    pub fn flow(&self, p: &SolenoidPoint, t: f64) -> Result<SolenoidPoint> {
        let depth = p.depth();
        let (mut e, mut pos) = p.top();
        pos += t * self.cx.lambda.powi(-(depth as i32));
        while pos >= self.cx.lengths[e] {
            if self.successors[e].len() != 1 {
                return Err(Error::Depth {
                    msg: format!(
                        "flow crossed a branch vertex leaving edge {} at the represented depth; deepen the point",
                        self.cx.edge_name(e)
                    ),
                });
            }
            pos -= self.cx.lengths[e];
            e = self.successors[e][0];
        }
        while pos < 0.0 {
            if self.predecessors[e].len() != 1 {
                return Err(Error::Depth {
                    msg: format!(
                        "flow crossed a branch vertex entering edge {} at the represented depth; deepen the point",
                        self.cx.edge_name(e)
                    ),
                });
            }
            e = self.predecessors[e][0];
            pos += self.cx.lengths[e];
        }
        self.point_from_top(depth, (e, pos))
    }

    /// Random compatible point: deepest edge by invariant edge mass,
    /// position uniform along it.
    pub fn sample<R: Rng>(&self, rng: &mut R, depth: usize) -> Result<SolenoidPoint> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut edge = self.cx.n_edges() - 1;
        for (e, &m) in self.cx.edge_mass.iter().enumerate() {
            acc += m;
            if u < acc {
                edge = e;
                break;
            }
        }
        let pos = rng.gen::<f64>() * self.cx.lengths[edge] * (1.0 - 1e-12);
        self.point_from_top(depth, (edge, pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap::ap_complex;
    use crate::substitution::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fib_dynamics() -> (APComplex, ) {
        let rule = parse("a -> ab\nb -> a").unwrap();
        (ap_complex(&rule, 4).unwrap(),)
    }

    #[test]
    fn forward_then_inverse_fixes_the_shallow_coordinates() {
        let (cx,) = fib_dynamics();
        let dyn_ = Dynamics::new(&cx).unwrap();
        let p = dyn_.point_from_top(3, (0, 0.25)).unwrap();
        let fwd = dyn_.phi(&p, Direction::Forward).unwrap();
        dyn_.validate(&fwd).unwrap();
        let back = dyn_.phi(&fwd, Direction::Inverse).unwrap();
        assert_eq!(back.coords, p.coords[..p.coords.len() - 1].to_vec());
        // Inverse at depth 0 is out of range.
        let shallow = dyn_.point_from_top(0, (0, 0.25)).unwrap();
        assert!(dyn_.phi(&shallow, Direction::Inverse).is_err());
    }

    #[test]
    fn one_letter_forward_doubles_the_circle_coordinate() {
        let rule = parse("a -> aa").unwrap();
        let cx = ap_complex(&rule, 4).unwrap();
        let dyn_ = Dynamics::new(&cx).unwrap();
        assert_eq!(cx.n_edges(), 1);
        let len = cx.lengths[0];
        for &t in &[0.1, 0.3, 0.49, 0.8] {
            let p = dyn_.point_from_top(2, (0, t * len)).unwrap();
            let q = dyn_.phi(&p, Direction::Forward).unwrap();
            let doubled = (2.0 * p.coords[0].1) % len;
            assert!(
                (q.coords[0].1 - doubled).abs() < 1e-12,
                "t={}: {} vs {}",
                t,
                q.coords[0].1,
                doubled
            );
        }
    }

    #[test]
    fn random_points_stay_compatible_under_both_shifts() {
        let (cx,) = fib_dynamics();
        let dyn_ = Dynamics::new(&cx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let p = dyn_.sample(&mut rng, 4).unwrap();
            dyn_.validate(&p).unwrap();
            let f = dyn_.phi(&p, Direction::Forward).unwrap();
            dyn_.validate(&f).unwrap();
            let b = dyn_.phi(&p, Direction::Inverse).unwrap();
            dyn_.validate(&b).unwrap();
        }
    }

    #[test]
    fn flow_traverses_an_edge_in_its_return_time() {
        let (cx,) = fib_dynamics();
        let dyn_ = Dynamics::new(&cx).unwrap();
        // Depth-0 flow moves at unit speed. Take an edge with a unique
        // successor and ride it end to end.
        let forced = (0..cx.n_edges())
            .find(|&e| {
                cx.collared
                    .legal_pairs
                    .iter()
                    .filter(|&&(a, _)| a == e)
                    .count()
                    == 1
            })
            .expect("collared Fibonacci has edges with forced successors");
        let p = dyn_.point_from_top(0, (forced, 0.0)).unwrap();
        let q = dyn_.flow(&p, cx.lengths[forced]).unwrap();
        assert_ne!(q.coords[0].0, forced);
        assert!(q.coords[0].1.abs() < 1e-12);
        // t = 0 is the identity.
        let id = dyn_.flow(&p, 0.0).unwrap();
        assert_eq!(id.coords, p.coords);
        // A branching exit is refused with a depth error.
        let branching = (0..cx.n_edges())
            .find(|&e| {
                cx.collared
                    .legal_pairs
                    .iter()
                    .filter(|&&(a, _)| a == e)
                    .count()
                    > 1
            })
            .expect("the complex has a branch");
        let bp = dyn_.point_from_top(0, (branching, 0.0)).unwrap();
        match dyn_.flow(&bp, cx.lengths[branching] + 1e-3) {
            Err(Error::Depth { .. }) => {}
            other => panic!("expected a depth error, got {:?}", other.map(|p| p.coords)),
        }
    }

    #[test]
    fn flow_is_additive_within_the_represented_depth() {
        let (cx,) = fib_dynamics();
        let dyn_ = Dynamics::new(&cx).unwrap();
        let min_len = cx.lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let depth = 5;
        let margin = cx.lambda.powi(depth as i32) * min_len / 4.0;
        for _ in 0..1_000 {
            // Keep the deepest coordinate away from its edge ends so no
            // top-level crossing can occur.
            let p = dyn_.sample(&mut rng, depth).unwrap();
            let (e, _) = p.top();
            let mid = dyn_
                .point_from_top(depth, (e, cx.lengths[e] / 2.0))
                .unwrap();
            let s = (rng.gen::<f64>() - 0.5) * margin;
            let t = (rng.gen::<f64>() - 0.5) * margin;
            let a = dyn_.flow(&dyn_.flow(&mid, s).unwrap(), t).unwrap();
            let b = dyn_.flow(&mid, s + t).unwrap();
            assert_eq!(a.top().0, b.top().0);
            assert!((a.top().1 - b.top().1).abs() < 1e-9);
        }
    }
}
