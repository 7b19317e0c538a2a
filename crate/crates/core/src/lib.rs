//! Coherent nets of finite-dimensional Hilbert spaces and operators over a
//! finite directed poset, dilation of *-semigroup-invariant positive
//! semidefinite operator-valued kernels, Stinespring dilation of unital
//! completely positive maps, and operator models plus exterior tensor
//! products of Hilbert modules over concrete locally C*-algebras. Every
//! construction is verified by testable residuals.

pub mod algebra;
pub mod csmodule;
pub mod dilation;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod poset;
pub mod sample;
pub mod space;
pub mod tol;

pub use algebra::{LocallyCStarAlgebra, MatrixProjectiveSystem};
pub use csmodule::{AbstractHilbertModule, ConcreteHilbertModule};
pub use dilation::{InvariantDilation, KolmogorovDecomposition, StinespringDilation};
pub use kernel::{CpMap, OperatorKernel, SemigroupAction, StarSemigroup};
pub use operator::LocallyBoundedOperator;
pub use poset::DirectedPoset;
pub use space::{LocalVector, LocallyHilbertSpace};
pub use tol::Tol;
