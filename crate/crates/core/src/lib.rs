//! Non-local logistic equations `𝔇^Φ_t u = f(u)` and their probabilistic
//! representation through inverse subordinators.

pub mod dd;
pub mod error;
pub mod cli;
pub mod growth;
pub mod mc;
pub mod paths;
pub mod quad;
pub mod series;
pub mod solver;
pub mod special;
pub mod symbols;

pub use error::{Error, Result};
pub use symbols::{Family, SymbolSpec, TailKernel};
