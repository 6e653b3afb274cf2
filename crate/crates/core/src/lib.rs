//! Model-based clustering and semi-supervised classification for three-way
//! (matrix variate) data with finite mixtures of four skewed matrix variate
//! distributions: skew-t, generalized hyperbolic, variance-gamma and normal
//! inverse Gaussian. Parameters are estimated by an expectation–conditional
//! maximization algorithm.

pub mod data;
pub mod ecm;
pub mod error;
pub mod gig;
pub mod matvar;
pub mod select;
pub mod sim;
pub mod specfun;

pub use error::{Error, Result};
