use crate::bandwidth::FlowAllocation;
use crate::crypto::CryptoError;
use crate::topology::{SwitchId, TopologyError};
use crate::wire::WireError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("malformed message: {0}")]
    Wire(#[from] WireError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("controller {controller} may not write entries for switch {switch}")]
    Unauthorized { controller: usize, switch: SwitchId },
    #[error("no route: {0}")]
    NoRoute(String),
    #[error("demand of {} unsatisfiable, {} allocated", .0.demand, .0.allocated())]
    Unsatisfiable(Box<FlowAllocation>),
}
