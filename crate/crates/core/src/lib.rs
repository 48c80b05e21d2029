//! Dense non-negative tensors, their dual log-linear coordinates, and
//! gradient-free Tucker rank reduction by blockwise rank-1 projections.
//!
//! ```
//! use ltr_core::{ltr_reduce_seeded, numerical_tucker_rank, uniform_tensor, LtrOptions, Shape, TuckerRank};
//!
//! let shape = Shape::new(vec![6, 5, 4]).unwrap();
//! let t = uniform_tensor(&shape, 1);
//! let target = TuckerRank::new(vec![2, 3, 1]);
//! let out = ltr_reduce_seeded(&t, &target, 7, &LtrOptions::default()).unwrap();
//! let est = numerical_tucker_rank(&out.tensor, 1e-8).unwrap();
//! assert!(est.ranks.iter().zip(target.ranks()).all(|(a, b)| a <= b));
//! ```

pub mod baselines;
pub mod bench;
pub mod error;
pub mod infogeo;
pub mod io;
pub mod ltr;
pub mod rank1;
pub mod suite;
pub mod synth;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use ltr::{
    blocks_from_spec, ltr_reduce, ltr_reduce_seeded, sample_bingo_spec, worst_case_cost,
    BingoSpec, BlockRule, LtrOptions, Reduction, TuckerRank,
};
pub use rank1::{best_rank1, is_rank1, Rank1Factors};
pub use synth::uniform_tensor;
pub use tensor::{DenseTensor, Matrix, ModeBlock, MultiIndex, Shape};
pub use verify::{
    certify_projection, kl_divergence, ls_error, numerical_tucker_rank, CertifyTolerances,
    ProjectionCertificate, RankEstimate,
};
