//! Data ingestion and problem builders.

pub mod bilinear;
pub mod dro;
pub mod libsvm;
pub mod quadratic;

pub use bilinear::BilinearToy;
pub use dro::{build_dro, DroInstance};
pub use libsvm::{load_libsvm, parse_libsvm, parse_libsvm_str, synthetic_logistic, DatasetError, SparseDataset};
pub use quadratic::{make_quadratic_finite_sum, make_quadratic_saddle, QuadraticFiniteSum, QuadraticSaddle};
