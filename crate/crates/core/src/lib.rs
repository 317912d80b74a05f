//! Newton–Leipnik chaotic system: the ODE, its reaction–diffusion
//! master/slave pair with nonlinear synchronizing controllers, and numerical
//! checks of the associated stability results.
//!
//! Modules, bottom-up:
//! - [`linalg3`]: 3×3 determinants, cubic-root eigenvalues, second additive
//!   compounds and the trace/determinant stability certificate.
//! - [`model`]: vector field, Jacobian, divergence, equilibria.
//! - [`ode_sim`]: RK4 trajectories, Lyapunov spectra, phase-volume tracking.
//! - [`pde`]: Neumann grid, Laplacian, Thomas solver and IMEX stepper.
//! - [`sync`]: controllers, error matrices, the diffusion-dominance
//!   condition, Lyapunov functional, and the master/slave runner.

pub mod linalg3;
pub mod model;
pub mod ode_sim;
pub mod pde;
pub mod sync;

pub use linalg3::{CertificateReport, Complex3, Matrix3};
pub use model::{EquilibriumReport, Params, State3};
pub use ode_sim::{LyapunovSpectrum, OdeRun, SimError};
pub use pde::{Field3, Grid1D, PdeError, Scheme, StepperConfig};
pub use sync::{ConditionReport, RunStatus, SyncOptions, SyncOutcome, SyncTrace};
