//! Forward simulation and all-at-once frozen Newton inversion for
//! vibro-acoustic nonlinearity imaging in the paraxial regime.

pub mod aao;
pub mod beam;
pub mod bench;
pub mod error;
pub mod forward;
pub mod grid;
pub mod linalg;
pub mod newton;
pub mod scenario;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
