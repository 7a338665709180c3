//! Sheaf encodings of discrete-time network optimal-control problems.
//!
//! The crate is organized bottom-up:
//!
//! * [`poset`] finite partial orders, up-sets and the face order of a network graph.
//! * [`space`] Euclidean stalk spaces with real and Boolean coordinates, maps between
//!   them and Lipschitz constants.
//! * [`sheaf`] sheaves on finite posets, consistency radius, assignment distance,
//!   sheaf morphisms and the two consistency-radius bounds.
//! * [`netmodel`] the network dynamical system: graph, per-vertex spaces, feasible
//!   sets, dynamics and objectives.
//! * [`encode`] the single-step, objective, propagation, trajectory and full
//!   optimal-control sheaves built from a network problem.
//! * [`optimize`] constrained and relaxed consistency-radius minimization.
//! * [`boolrelax`] thresholding/lifting schemes, error budgets and the
//!   discretization bound.
//! * [`affine`] Heaviside-thresholded affine dynamics on nominal states.
//!
//! All numerical code is generic over a [`Scalar`]; the `*64` aliases below fix
//! it to `f64`, which is what the command line front end uses.

pub mod affine;
pub mod boolrelax;
pub mod encode;
pub mod error;
pub mod fixtures;
pub mod netmodel;
pub mod optimize;
pub mod poset;
pub mod scalar;
pub mod sheaf;
pub mod space;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point64 = space::Point<f64>;
pub type Space64 = space::Space<f64>;
pub type StalkMap64 = space::StalkMap<f64>;
pub type Sheaf64 = sheaf::Sheaf<f64>;
pub type Assignment64 = sheaf::Assignment<f64>;
pub type SheafMorphism64 = sheaf::SheafMorphism<f64>;
pub type NetworkProblem64 = netmodel::NetworkProblem<f64>;

pub type Point32 = space::Point<f32>;
pub type Space32 = space::Space<f32>;
pub type Sheaf32 = sheaf::Sheaf<f32>;
pub type Assignment32 = sheaf::Assignment<f32>;
pub type EncodedProblem64 = encode::EncodedProblem<f64>;
pub type ThresholdingScheme64 = boolrelax::ThresholdingScheme<f64>;
pub type ErrorBudget64 = boolrelax::ErrorBudget<f64>;
