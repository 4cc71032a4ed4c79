//! Monte Carlo wavefunction (quantum-jump) simulation of Lindblad dynamics
//! for strongly coupled quantized oscillators.
//!
//! Deterministic intervals between jumps are propagated either exactly in a
//! truncated product basis ([`exact`]) or with a multi-configuration
//! time-dependent Hartree ansatz on harmonic-oscillator DVR grids
//! ([`mctdh`]). A dense density-matrix solver ([`oracle`]) provides the
//! reference against which trajectory ensembles are checked.
//!
//! The usual entry point is a [`model::Scenario`] preset, realized in a
//! [`model::Representation`] and handed to [`mcwf::run_ensemble`]:
//!
//! ```no_run
//! use mcmctdh::mcwf::{self, EngineOptions, Propagator};
//! use mcmctdh::model::{presets, Representation};
//!
//! let scenario = presets::lossy_cavity(&presets::LossyCavityParams::default());
//! let system = scenario.realize(&Representation::fock(&[10])).unwrap();
//! let opts = EngineOptions::new(0.05, 10.0);
//! let ensemble = mcwf::run_ensemble(&system, &Propagator::exact(), &opts, 7, 100).unwrap();
//! println!("{:?}", ensemble.mean.row(0));
//! ```

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dvr;
pub mod error;
pub mod exact;
pub mod mctdh;
pub mod mcwf;
pub mod model;
pub mod ode;
pub mod operator;
pub mod oracle;
pub mod run;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;

pub(crate) fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
