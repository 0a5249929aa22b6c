//! Functional alignment of multi-subject data matrices.
//!
//! Every subject is an `n × m` matrix (time points × variables) assumed to
//! be a scaled, orthogonally transformed, noisy copy of a shared reference:
//! `X_i = α_i (M + E_i) R_iᵀ`. This crate estimates `R_i`, `α_i` and `M`
//! by generalized Procrustes analysis, optionally regularized with a
//! von Mises-Fisher prior on `R_i` whose location matrix `F` pins down an
//! otherwise non-identifiable orientation. Wide data (`n < m`) can be
//! aligned in an `n`-dimensional space built from thin SVDs.
//!
//! ```
//! use promises::{align, AlignmentConfig, PriorSpec};
//! use promises::simulate::{random_reference, simulate_dataset, SimulationSpec};
//!
//! let reference = random_reference(20, 5, 1);
//! let data = simulate_dataset(&SimulationSpec::new(4, 20, 5, 0.05, 7), &reference).unwrap();
//! // k on the scale of the cross-products XᵢᵀM keeps the loop short
//! let config = AlignmentConfig::default().with_prior(PriorSpec::identity(20.0).unwrap());
//! let result = align(&data.xs, &config).unwrap();
//! assert!(result.converged);
//! ```

pub mod aligner;
pub mod connectivity;
pub mod efficient;
pub mod error;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod prior;
pub mod select;
pub mod simulate;

pub use aligner::{
    align, check_existence, estimate_covariances, estimate_rotation, estimate_scale,
    AlignmentConfig, AlignmentResult, CovarianceMode, CovariancePair,
};
pub use efficient::{align_efficient, project_subjects, EfficientAlignment, SubspaceTransform};
pub use error::{Error, Result};
pub use prior::{PriorLocation, PriorSpec};
pub use select::{select_k, KSelection};
