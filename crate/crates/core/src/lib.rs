//! Spectral refutation of odd-arity XOR instances arising from the query
//! structure of locally decodable codes.
//!
//! The pipeline is: build an instance from hypergraph matchings
//! ([`instance`]), split off heavy sets ([`decompose`]), build Kikuchi graphs
//! for the regular remainder and the bipartite pieces ([`kikuchi`]), prune
//! them to approximately regular subgraphs ([`prune`]), bound spectral norms
//! ([`spectral`]) and fold everything into a certificate ([`refute`]).

pub mod decompose;
pub mod error;
pub mod format;
pub mod instance;
pub mod kikuchi;
pub mod prune;
pub mod refute;
pub mod sets;
pub mod spectral;

pub use error::{Error, Result};

/// Version string embedded in every output file.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
