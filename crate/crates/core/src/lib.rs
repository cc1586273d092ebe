//! Numerical construction and verification of boundary-singular solutions of
//! `Δu + u^p = 0`: separable half-space cells, the log-corrected critical cell,
//! the fast-decay connection cell and glued solutions on the disk and ball.

pub mod angular;
pub mod checks;
pub mod connection;
pub mod critical;
pub mod error;
pub mod fit;
pub mod glue;
pub mod halfspace;
pub mod heteroclinic;
pub mod interp;
pub mod ode;
pub mod params;
pub mod report;
pub mod run;
pub mod separable;
pub mod sphere;
pub mod tridiag;

pub use error::{Error, Result};
pub use params::{critical_exponent, ExponentParams};
pub use sphere::{AxisymGrid, SphericalProfile};
