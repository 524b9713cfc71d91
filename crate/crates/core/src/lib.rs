//! Distributed spectrum coordination for the Gaussian interference channel.
//!
//! The crate models multi-user DSL-style links as a non-cooperative game in
//! which every user picks a power spectral density and is paid its Shannon
//! rate. It provides:
//!
//! - [`channel`]: frequency grids, per-tone coupling matrices, noise
//!   profiles, a parametric twisted-pair channel generator and CSV I/O.
//! - [`game`]: the rate payoff, strategy validation and Nash checks.
//! - [`waterfilling`]: rate-adaptive and fixed-margin water-filling and the
//!   iterative water-filling (IWF) loop.
//! - [`symmetric`]: closed-form analysis of the symmetric two-user,
//!   two-band game (deadlock / prisoner's dilemma / chicken regions).
//! - [`nearfar`]: closed-form near-far power splits and rate-region bounds.
//! - [`dfdm`]: the dynamic FDM algorithm for a strong near user.
//! - [`oracle`]: a brute-force centralized Pareto frontier for small
//!   instances.
//! - [`scenario`]: JSON-configured experiment runs emitting CSV data.

pub mod channel;
pub mod dfdm;
pub mod error;
pub mod game;
pub mod nearfar;
pub mod oracle;
pub mod region;
pub mod scenario;
pub mod symmetric;
pub mod waterfilling;

pub use channel::{ChannelMatrixSet, FrequencyGrid, NoiseProfile};
pub use error::{Error, Result};
pub use game::{PowerAllocation, StrategyMode};
pub use region::{RateRegionCurve, RegionPoint};
pub use waterfilling::{EffectiveNoise, IwfReport};
