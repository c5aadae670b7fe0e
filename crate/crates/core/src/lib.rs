//! Sparse audio coding with adaptive gammachirp dictionaries.
//!
//! The crate is organized as a pipeline:
//!
//! - [`bank`]: ERB-spaced gammachirp / gammatone filter banks
//! - [`lca`]: LCA sparse coding over block-strided dictionaries
//! - [`adapt`]: gradient adaptation of the per-channel filter parameters
//! - [`repr`]: WAV ingestion, event representations, dataset utilities
//! - [`snn`]: LIF spiking readout with surrogate-gradient training
//!
//! Everything is generic over the scalar type through [`scalar::Real`]
//! (implemented for `f32` and `f64`); the `*64` aliases below pin the
//! default double-precision instantiations.

pub mod adapt;
pub mod bank;
pub mod error;
pub mod lca;
pub mod repr;
pub mod scalar;
pub mod snn;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FilterBank64 = bank::FilterBank<f64>;
pub type BankConfig64 = bank::BankConfig<f64>;
pub type GammachirpParams64 = bank::GammachirpParams<f64>;
pub type Dictionary64 = lca::Dictionary<f64>;
pub type LcaConfig64 = lca::LcaConfig<f64>;
pub type SparseCode64 = lca::SparseCode<f64>;
pub type AdaptConfig64 = adapt::AdaptConfig<f64>;
pub type AudioSignal64 = repr::AudioSignal<f64>;
pub type EventRepresentation64 = repr::EventRepresentation<f64>;
pub type LifNetwork64 = snn::LifNetwork<f64>;
pub type LifConfig64 = snn::LifConfig<f64>;
pub type TrainConfig64 = snn::TrainConfig<f64>;
