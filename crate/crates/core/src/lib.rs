//! Exact experiments on three-interval exchanges realized as induced maps of
//! irrational circle rotations.

pub mod field;
pub mod cf;
pub mod circle;
pub mod iet;
pub mod rng;
pub mod mobius;
pub mod renorm;
pub mod dioph;
pub mod witness;
pub mod appb;
pub mod suite;
