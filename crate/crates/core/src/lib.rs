//! Nonlocal convolution energies on periodically perforated domains.
//!
//! The crate evaluates energies of the form
//! `eps^-(d+p) ∬ a((y-x)/eps) |u(x)-u(y)|^p` over `Omega ∩ eps E`, builds the
//! reflection/partition-of-unity extension operator `T_eps` that carries
//! fields on the perforated set to the whole of `Omega`, and computes the
//! homogenized density `h_hom` by a periodic cell problem and by a finite
//! box formula.
//!
//! Modules map onto the pipeline:
//!
//! * [`geometry`]: periodic domains, component windows, retraction, discrete paths
//! * [`kernel`]: radial interaction kernels and their moments
//! * [`energy`]: grid fields, nonlocal functionals and diagnostics
//! * [`extension`]: local extension, gluing and the scaled operator
//! * [`cell_problem`]: correctors and `h_hom` through the cell formula
//! * [`asymptotic`]: box formula, T-sweeps and recovery-sequence experiments
//! * [`cli`]: configuration parsing and the experiment runner

pub mod asymptotic;
pub mod cell_problem;
pub mod cli;
pub mod dump;
pub mod energy;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod kernel;
pub mod par;
pub mod random;

pub use error::{Error, ErrorCategory, Result};
