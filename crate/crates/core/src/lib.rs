//! Information quantities for data subset selection with generalized linear models.
//!
//! The crate computes weight-space approximations of the expected information
//! gain (EIG), information gain (IG), expected predictive information gain
//! (EPIG), joint EPIG (JEPIG) and their labeled counterparts (PIG, JPIG) from
//! Fisher / observed information and a Gaussian (Laplace) posterior. Each
//! quantity comes in a log-determinant and a trace flavour.
//!
//! Around the scores sit the batch-selection strategies that optimize them
//! (greedy submodular, BAIT forward-backward, BADGE k-means++, top-k),
//! similarity-matrix reformulations (LogDet, LogDetMI, LogDetCMI) and
//! prediction-space Monte-Carlo estimators (BALD, joint EIG, EPIG) that serve
//! as reference values.
//!
//! Weight vectors are flattened class-major: weight `(i, c)` of a `D × C`
//! matrix lives at index `c * D + i`. Every curvature matrix in the crate uses
//! that layout, so `fisher = kron(Λ, x xᵀ)` has `C × C` blocks of size `D × D`.

pub mod error;
pub mod glm;
pub mod info_scores;
pub mod posterior;
pub mod prediction_oracle;
pub mod psd;
pub mod selection;
pub mod similarity;

pub use error::{Error, Result};
pub use glm::{Dataset, GlmModel, Head, HeadKind, Label, Labels};
pub use info_scores::{ScorePair, Scorer};
pub use posterior::GaussianPosterior;
pub use psd::PsdMatrix;
pub use selection::SelectionResult;
