//! Projection-free convex optimization.
//!
//! The solver in [`fw`] only needs two things from a problem: an objective
//! with a gradient, and a domain that can minimize a linear function. The
//! remaining modules supply concrete domains ([`vector`], [`matrix`]),
//! the eigenvector oracle behind the matrix domains ([`eigen`]), norm-ball
//! lifts ([`transforms`]) and two applications ([`matcomp`], [`sdp`]).

pub mod eigen;
pub mod error;
pub mod fw;
pub mod linalg;
pub mod matcomp;
pub mod matrix;
pub mod rng;
pub mod sdp;
pub mod transforms;
pub mod vector;

pub use error::{FwError, Result};
