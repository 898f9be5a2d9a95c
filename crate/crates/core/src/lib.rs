//! Dense tensor low-rank approximation: randomized block Krylov sketching,
//! Tucker and tensor-ring solvers, synthetic data and accuracy metrics.

pub mod datagen;
pub mod error;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod sketch;
pub mod tensor;
pub mod tring;
pub mod tucker;

pub use error::{Error, Result};
pub use linalg::{EigenPairs, RngSeed};
pub use matrix::{kronecker, DenseMatrix};
pub use sketch::{SketchConfig, SketchMethod};
pub use tensor::DenseTensor;
pub use tring::{TRFactors, TRRank};
pub use tucker::{MultilinearRank, TuckerFactors};
