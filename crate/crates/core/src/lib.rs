//! Symbolic-numeric workbench for decomposable exterior differential systems
//! given in distribution form: a chart, two characteristic distributions `F`
//! and `G`, their invariants, the Darboux projection, the tangential symmetry
//! algebras on its fibers, and integral surfaces obtained by integrating ODEs.

pub mod error;
pub mod expr;

pub use error::{Error, Result};
pub mod geometry;
pub mod linalg;
pub mod decomposable;
pub mod solver;
pub mod darboux;
