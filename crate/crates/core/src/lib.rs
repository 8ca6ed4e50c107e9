//! Federated learning workbench for Wi-Fi RSS fingerprint indoor localization.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: fingerprint data model, RSS normalization, CSV ingestion,
//!   synthetic radio maps and device-heterogeneity transforms.
//! - [`nn`]: a small dense MLP engine with backpropagation, SGD and a
//!   canonical flat weight layout.
//! - [`sae`]: the stacked autoencoder trained layer by layer and used to
//!   synthesize augmented fingerprints.
//! - [`localizer`]: the shallow classifier that maps a fingerprint to a
//!   reference point, plus the Euclidean error metric.
//! - [`federation`]: FedAvg, FedSGD and selective top-H aggregation with
//!   sparse wire encoding and byte accounting.
//! - [`simulator`]: the multi-client round protocol and experiment suites.

pub mod dataset;
pub mod error;
pub mod federation;
pub mod localizer;
pub mod nn;
pub mod sae;
pub mod seed;
pub mod simulator;

pub use dataset::{
    DeviceProfile, Fingerprint, FingerprintDataset, FloorplanSpec, Point3, RadioMap, RpMap,
};
pub use error::{Error, Result};
pub use federation::{AggregatorKind, ClientUpdate, HParam, SparseUpdate, UpdatePayload};
pub use localizer::{Prediction, SnnConfig};
pub use nn::{Activation, DenseLayer, Loss, Network, NetworkShape, TrainConfig, WeightVector};
pub use sae::{AeSpec, SaeConfig, StackedSae};
pub use simulator::{RoundReport, ScenarioConfig, ScenarioResult};
