//! Convex-by-construction networks and the option pricing pipelines built on
//! them: basket calls, best-of Bermudan calls and swing contracts.

pub mod analysis;
pub mod basket;
pub mod bermudan;
pub mod error;
pub mod market;
pub mod net;
pub mod rng;
pub mod scaling;
pub mod swing;
pub mod train;

pub use error::{Error, Result};
pub use net::{Activation, ActivationKind, AffineLayer, Architecture, ConvexNet, NetConfig, NetGradients};
