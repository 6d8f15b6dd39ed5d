//! Parallel sampling from Ising models through k-Glauber dynamics.
//!
//! An Ising model on `{±1}^n` has mass proportional to
//! `exp(½⟨x, Jx⟩ + ⟨h, x⟩)`. Resampling a random block of `k` coordinates
//! from its conditional law mixes roughly `k` times faster than single-site
//! Glauber dynamics, and for Ising models the block conditional is again an
//! Ising model that a product proposal approximates well when the block's
//! Frobenius norm is small. [`parallel`] combines both facts into a recursive
//! sampler whose outer loop runs `O(‖J‖_F polylog(n/ε))` sequential steps.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`model`] | model storage, energies, conditional fields, product proposals, SK instances |
//! | [`rng`] | splittable reproducible streams, subset and product sampling |
//! | [`glauber`] | single-site and exact block Glauber reference chains |
//! | [`rejection`] | two-draw approximate rejection sampler and diagnostics |
//! | [`parallel`] | the recursive parallel sampler and its telemetry |
//! | [`exact`] | brute-force distributions, transition matrices, down/up operators, spectra |
//! | [`io`] | matrix/vector file formats, spin output, CSV/JSON records |
//! | [`probe`], [`bench`], [`verify`] | calibration probe, benchmarks and property suites behind the CLI |

pub mod bench;
pub mod error;
pub mod exact;
pub mod glauber;
pub mod io;
pub mod model;
pub mod parallel;
pub mod probe;
pub mod rejection;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use model::{IsingModel, ProductDistribution, SpinVector, SubsetIndex};
pub use parallel::{RunTelemetry, SamplerConfig};
pub use rng::RngStream;

/// Version tag written into every CSV and JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
