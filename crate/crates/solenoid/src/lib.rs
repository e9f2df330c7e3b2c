//! Cohomology and dynamics of one-dimensional substitution solenoids.
//!
//! Starting from a primitive substitution rule on a finite alphabet, this
//! crate builds the associated expanding flat solenoid (the inverse limit of
//! the collared cell complex under the substitution-induced self-map) and
//! computes:
//!
//! * exact integer Čech cohomology of the complex and the induced map on it,
//!   together with its eventual range (the direct-limit cohomology of the
//!   solenoid),
//! * the spectral data of the induced map: Jordan structure, expanding /
//!   contracting splitting, predicted Ruelle resonances of the hyperbolic
//!   map, and the deviation-of-ergodic-averages exponent table,
//! * a transversal function calculus: cylinder functions, martingale-style
//!   projections onto finite depth, transversal Hölder seminorms, and
//!   suspensions with smooth bump profiles along the flow direction,
//! * dynamical diagnostics: exact correlation integrals of suspended
//!   functions under the hyperbolic map, resonance extraction from the
//!   correlation sequence, supertile Birkhoff sums and their growth
//!   exponents,
//! * a solver for the cohomological (coboundary) equation over the subshift
//!   with a cohomological obstruction vector and Hölder certificates.
//!
//! Heavy batch computations (correlation entries, Monte Carlo chunks,
//! supertile initializations) go through [`parallel::run_map`], which uses
//! rayon when the `parallel` feature (on by default) is enabled and falls
//! back to a sequential map otherwise. Results are merged by index, so
//! outputs are identical in both modes.

pub mod ap;
pub mod cohomology;
pub mod coboundary;
pub mod correlation;
pub mod cylinder;
pub mod dynamics;
pub mod error;
pub mod intpoly;
pub mod language;
pub mod measure;
pub mod parallel;
pub mod perron;
pub mod quad;
pub mod ratmat;
pub mod resonance;
pub mod snf;
pub mod spectral;
pub mod substitution;
pub mod supertile;
pub mod suspension;

pub use error::{Error, Result};
pub use substitution::SubstitutionRule;
