//! Spectral-Galerkin simulator and verification toolkit for an extensible
//! thermoelastic beam with hinged ends.
//!
//! The displacement u, its velocity and the thermal variable are expanded in
//! the orthonormal sine eigenbasis of the fourth-order hinged operator, which
//! diagonalises the whole linear part; the only nonlinearity is the scalar
//! ||u||_1^2 multiplying the second-order term. The toolkit provides
//!
//! - the basis, norm scale and operator calculus ([`spectral`]),
//! - the state space, right-hand side and trajectory functionals ([`model`]),
//! - an exponential-IMEX integrator that treats the stiff linear part
//!   exactly per mode ([`integrator`]),
//! - enumeration of stationary and buckled states ([`stationary`]),
//! - the decaying/regular semigroup split and the backward-uniqueness
//!   ratio diagnostic ([`decomposition`]),
//! - verifiers for the two Gronwall-type lemmas ([`gronwall`]),
//! - seeded ensemble sampling ([`sampling`]).
//!
//! Everything is generic over the floating-point scalar through
//! [`Scalar`]; the `*64` aliases below are the concrete types the
//! command-line experiments use.

pub mod decomposition;
pub mod error;
pub mod gronwall;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod scalar;
pub mod spectral;
pub mod stationary;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use integrator::{simulate, step, IntegratorConfig, Observers, Scheme, TrajectoryRecord};
pub use model::{BeamState, Forcing, ForcingTerm, FunctionalRecord, ModelParams};
pub use spectral::{BasisSpec, SpectralField};
pub use stationary::{Branch, StationaryPoint};

/// Concrete double-precision aliases.
pub type Basis64 = spectral::BasisSpec<f64>;
pub type Field64 = spectral::SpectralField<f64>;
pub type State64 = model::BeamState<f64>;
pub type Params64 = model::ModelParams<f64>;
pub type Config64 = integrator::IntegratorConfig<f64>;
pub type Record64 = integrator::TrajectoryRecord<f64>;

/// Concrete single-precision aliases.
pub type Basis32 = spectral::BasisSpec<f32>;
pub type Field32 = spectral::SpectralField<f32>;
pub type State32 = model::BeamState<f32>;
pub type Params32 = model::ModelParams<f32>;
