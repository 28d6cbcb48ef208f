//! Simulation engine for a coherently driven, dissipative Jaynes-Cummings
//! system: a two-level emitter coupled to one cavity mode, with cavity and
//! emitter losses.
//!
//! Internal units: rates and detunings are angular frequencies in rad/ns,
//! times are in ns. Conversion from ordinary GHz happens at the boundary
//! (see [`units`]).
//!
//! ```
//! use jcsim_core::hilbert::{DetuningSpec, JcSystem, RateSet};
//! use jcsim_core::liouvillian::steady_state;
//!
//! let rates = RateSet::from_ratios(20.0, 5.3, 14.0).unwrap();
//! let sys = JcSystem::new(4, rates).unwrap();
//! let det = DetuningSpec::new(0.0, -rates.g()).unwrap();
//! let d = sys.liouvillian(det, rates.g() / 100.0).unwrap();
//! let rho = steady_state(&d).unwrap();
//! assert!(rho.expect(sys.number()).re > 0.0);
//! ```

pub mod analytic;
pub mod correlator;
pub mod detection;
mod error;
pub mod fit;
pub mod hilbert;
pub mod linalg;
pub mod liouvillian;
pub mod tmm;
pub mod twolaser;
pub mod units;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMatrix = ndarray::Array2<C64>;
pub type CVector = ndarray::Array1<C64>;
