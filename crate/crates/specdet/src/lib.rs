//! specdet: spectral determinants of perturbed Laplace and Dirac operators
//! on flat model geometries.
//!
//! The toolkit discretizes `Delta + V` (bosonic) and `D + A` (fermionic, one
//! dimensional) in a truncated Fourier mode basis and computes their
//! determinants along several routes:
//!
//! * Fredholm determinants `det_F(Id + K)` and Gohberg-Krein regularized
//!   determinants `det_p`,
//! * zeta-regularized determinants through heat-trace Mellin continuation,
//!   with an independent Gelfand-Yaglom style monodromy oracle in d = 1,
//! * heat-regularized determinants `det_F(Id + e^{-2 eps Delta} Delta^{-1} V)`
//!   with counterterm extraction in the ring spanned by
//!   `{eps^-1, eps^-1/2, log eps, 1, eps^1/2, eps}`,
//! * Gaussian free field Monte Carlo partition functions and discrete lattice
//!   determinant ratios on the torus.
//!
//! The `factor` module turns the structural statements relating these
//! determinants (polynomial factorization gap, trace identities for
//! derivatives, disjoint-support second differentials, growth/order windows)
//! into runnable numerical checks.

pub mod det;
pub mod entire;
pub mod error;
pub mod factor;
pub mod geometry;
pub mod gff;
pub mod linalg;
pub mod operators;
pub mod renorm;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{Geometry, ModeBasis, PerturbationField};
pub use operators::{OperatorKind, TruncatedOperator};
