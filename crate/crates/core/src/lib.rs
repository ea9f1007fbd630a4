//! Neural quantum kernels: a statevector simulator, data re-uploading
//! classifiers, fidelity kernels over trained embeddings, an SMO-based SVM
//! and the dataset and experiment plumbing around them.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod data;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod linalg;
pub mod qsim;
pub mod reupload;
pub mod scalar;
pub mod svm;
pub mod train;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type Statevector64 = qsim::Statevector<f64>;
pub type Statevector32 = qsim::Statevector<f32>;
pub type QnnParams64 = reupload::QnnParams<f64>;
pub type QnnParams32 = reupload::QnnParams<f32>;
pub type FeatureTable64 = data::FeatureTable<f64>;
pub type FeatureTable32 = data::FeatureTable<f32>;
pub type GramMatrix64 = kernel::GramMatrix<f64>;
pub type GramMatrix32 = kernel::GramMatrix<f32>;
pub type SvmModel64 = svm::SvmModel<f64>;
pub type SvmModel32 = svm::SvmModel<f32>;
pub type TrainHistory64 = train::TrainHistory<f64>;
pub type TrainHistory32 = train::TrainHistory<f32>;
