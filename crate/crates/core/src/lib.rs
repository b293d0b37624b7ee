//! Kinetic plasma coupled to point charges in smooth convex planar domains.
//!
//! The crate is organised bottom-up: [`geometry`] supplies boundary data,
//! [`greens`] and [`bem`] evaluate Green and Robin functions, [`charges`] and
//! [`plasma`] advance the two subsystems, [`system`] couples them, and
//! [`diagnostics`] / [`desingularization`] compute the observables. [`config`],
//! [`run`] and [`verify`] are the batch front end used by the `sim` binary.

pub mod bem;
pub mod boundary;
pub mod charges;
pub mod config;
pub mod desingularization;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod greens;
pub mod plasma;
pub mod run;
pub mod system;
pub mod verify;

pub use error::{Error, Result};

/// Points, velocities and field vectors all live in the plane.
pub type Point = nalgebra::Vector2<f64>;

/// Shorthand constructor.
#[inline]
pub fn pt(x: f64, y: f64) -> Point {
    Point::new(x, y)
}
