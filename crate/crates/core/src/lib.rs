//! Nonlinear kinetic Fokker–Planck equation `∂t f + v·∇x f = Δv f^m`:
//! explicit self-similar solutions, a splitting solver in self-similar
//! variables, entropy diagnostics, the spectrum of the linearized operator
//! and the formal diffusion limit.

pub mod error;
pub mod fields;
pub mod par;
pub mod params;
pub mod profiles;
pub mod quad;
pub mod solver;
pub mod converge;
pub mod difflimit;
pub mod spectrum;

pub use error::{Error, Result};
pub use fields::{Field, Frame, PhaseGrid};
pub use par::Exec;
pub use params::{model_params, ModelParams};
