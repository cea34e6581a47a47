//! Directional Hilbert transforms along vector fields of the form
//! `v(x) = (1, u(h(x)))` on the discrete unit torus, together with the
//! decomposition objects used to study them: Littlewood-Paley projections,
//! projections adapted to the level curves of `h`, time-frequency tiles,
//! Jones beta numbers and the rectangle covering geometry.
//!
//! Everything here is a pure function of its inputs. Parallel loops write
//! to fixed output positions and every reduction runs in row-major order,
//! so results are identical for any rayon thread count.

pub mod adapted;
pub mod beta;
pub mod bumps;
pub mod covering;
pub mod error;
pub mod fft;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod ops;
pub mod rng;
pub mod tiles;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{GridFunction2D, Spectrum2D};

pub type C64 = num_complex::Complex64;
