//! Linear-algebra, distribution and random-number kernels.
//!
//! Everything here is a pure function of its inputs. Random draws go through
//! [`RngStream`], an immutable descriptor that names a counter-based ChaCha
//! stream, so any unit of work can be replayed independently of the order in
//! which other units ran.

mod chisq;
mod linalg;
mod rng;

pub use chisq::{central_chisq_cdf, central_chisq_sf, noncentral_chisq_cdf, noncentral_chisq_sf};
pub use linalg::{
    default_eigen_floor, inv_sqrt_sym, inv_sqrt_sym_default, max_abs_diff, spectral_norm,
    sqrt_psd, SymMatrix,
};
pub use rng::{gaussian_matrix, standard_normal_vector, RngStream};

/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vector = nalgebra::DVector<f64>;
