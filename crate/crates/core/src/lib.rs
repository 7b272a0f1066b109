//! Numerical laboratory for thermodynamic formalism on one-sided subshifts
//! of finite type.
//!
//! The crate is organized around a small set of value types: [`sft::Sft`]
//! (the shift space), [`sft::Potential`] (locally constant observables),
//! and [`measure::MarkovMeasure`] (shift-invariant measures with finite
//! memory). On top of these it provides:
//!
//! * [`pressure`]: topological pressure by direct Birkhoff-weighted sums and
//!   by Perron eigenvalues of transfer matrices, equilibrium states, and
//!   one-sided directional derivatives;
//! * [`convex`]: the limiting log-moment generating function `L`, its
//!   gradient, Legendre-Fenchel conjugation, kink detection, and essential
//!   strict convexity certificates;
//! * [`rate`]: level-1 rate functions by dual (Legendre) and primal
//!   (constrained entropy minimization) routes, plus duality audits;
//! * [`ldp`]: weighted empirical laws, finite-n log-MGFs, ball probabilities
//!   and a Gartner-route large-deviation audit;
//! * [`schauder`]: a cylinder Haar-type coordinate system with computable
//!   functional norms, the perturbation-stability sum, and span-inclusion
//!   checks;
//! * [`scenario`]: the JSON system schema shared with the CLI.
//!
//! Every operation is a pure function of immutable inputs. With the default
//! `parallel` feature, grid scans and enumeration sums run on rayon; without
//! it the same code paths run sequentially.

pub mod convex;
pub mod exec;
pub mod ldp;
mod linalg;
pub mod measure;
pub mod pressure;
pub mod rate;
pub mod scenario;
pub mod schauder;
pub mod sft;

pub use sft::{Potential, Sft, SftError, Word};

/// Errors shared across modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<SftError> for Error {
    fn from(e: SftError) -> Self {
        Error::Input(e.to_string())
    }
}
