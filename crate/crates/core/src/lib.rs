//! Synthesis and evaluation of Wasserstein-2 distributionally robust Kalman
//! filters for linear time-invariant state-space models.
//!
//! The crate is `no_std` (with `alloc`); the `std` feature only matters for
//! downstream convenience.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod dual;
mod error;
pub mod fft;
pub mod finite;
pub mod freq;
pub mod linalg;
mod lp;
mod math;
pub mod ratapprox;
pub mod realize;
pub mod sslib;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex<f64>;
pub type Mat = nalgebra::DMatrix<f64>;
pub type CMat = nalgebra::DMatrix<C64>;
