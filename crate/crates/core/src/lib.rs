//! Numerical laboratory for the nonlocal Fokker-Planck equation
//! `du/dt = eps^-2 (J_eps * u - u) + div(x u)`.

pub mod error;
pub mod kernels;
pub mod fields;
pub mod analysis;
pub mod clt;
pub mod cumulants;
pub mod initial;
pub mod jump;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
