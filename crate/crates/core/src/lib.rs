pub mod atoms;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod operators;
pub mod point;
pub mod polynomial;
pub mod quadrature;
pub mod report;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use point::{Ball, Point};
