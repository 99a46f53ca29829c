//! Simulation and analysis of noisy twin beams.
//!
//! The crate covers the whole chain from a model photon-pair field to
//! entanglement figures:
//!
//! - [`state`]: Mandel-Rice thermal statistics, ideal multi-mode twin beams,
//!   thermal noise convolution and finite-frame sampling.
//! - [`detector`]: the pixelated photon-counting camera response and the
//!   forward map from photon numbers to photocounts.
//! - [`reconstruction`]: expectation-maximization inversion of that map.
//! - [`moments`]: intensity-moment algebra (Stirling conversion, s-ordering,
//!   mode counting, single-mode reduction, moment-level noise).
//! - [`quantifiers`]: the noise-reduction factor, moment identifiers,
//!   non-classicality depths, counting parameters and Gaussian negativity.
//! - [`harness`]: the noise-sweep scenario, histogram analysis, bootstrap
//!   error bars and table output.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod detector;
pub mod error;
pub mod harness;
pub mod io;
pub mod moments;
pub mod quantifiers;
pub mod reconstruction;
pub mod solve;
pub mod state;

mod special;

pub use error::{Error, Result};
