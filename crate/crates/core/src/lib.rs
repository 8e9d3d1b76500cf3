//! Privacy-preserving cross-domain routing for multi-controller SDN.
//!
//! Each domain controller keeps its intra-domain costs private. Controllers
//! jointly build a shortest-path tree over an equivalent cost graph of
//! gateways, either fully under threshold encryption ([`pspt`]) or with
//! plaintext replicas and private comparisons ([`fastpath`]), then install
//! forwarding entries hop by hop ([`pathsetup`]). [`bandwidth`] repeats the
//! process to split a demand over several paths.

pub mod bandwidth;
pub mod bench;
pub mod crypto;
mod error;
pub mod fastpath;
pub mod pathsetup;
pub mod pspt;
pub mod runtime;
pub mod secif;
pub mod topology;
pub mod wire;

pub use bandwidth::{run_ba, AllocatedPath, BaOptions, DeleteMode, FlowAllocation};
pub use crypto::{Backend, CryptoParams};
pub use error::Error;
pub use fastpath::{run_cr, PlainTree, TournamentMode};
pub use pathsetup::{route, Path, Route, RoutingMode};
pub use pspt::{reveal_tree, run_pspt};
pub use runtime::{spawn_network, Cluster, HelperPolicy, Metrics};
pub use topology::{EcgSkeleton, EquivalentCostGraph, MultiDomainNetwork, SwitchId};
