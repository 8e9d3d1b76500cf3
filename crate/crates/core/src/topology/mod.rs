//! Multi-domain networks: parsing, validation and intra-domain path costs.
//!
//! Grammar (one statement per line, `#` starts a comment):
//!
//! ```text
//! cmax <int>
//! domain <id>
//! switch <name> [gateway]
//! link <u> <v> cost <int> [cap <int>]
//! interlink <domA>:<u> <domB>:<v> cost <int> [cap <int>]
//! policy <dom> <u> <v> (<int>|refuse)
//! ```
//!
//! `switch` and `link` statements belong to the most recent `domain`. A switch
//! is a gateway when it terminates an inter-domain link; the `gateway` keyword
//! only marks border routers and is informational.

mod ecg;
mod generate;
mod parse;

pub(crate) use ecg::domain_quotes;
pub use ecg::{intra_pair_costs, EcgEdge, EcgSkeleton, EdgeKind, EquivalentCostGraph, IntraQuote};
pub use generate::{
    generate, generate_synthetic, preset, sweep, DomainShape, SyntheticConfig, SWEEP_INTER_LINKS, TABLE1,
};

use crate::wire::{Decode, Encode, Reader, WireError, Writer};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("unknown switch `{0}`")]
    UnknownSwitch(String),
    #[error("equivalent cost graph is disconnected: {0}")]
    Disconnected(String),
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
}

/// A switch, addressed by domain position and position within the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SwitchId {
    pub domain: usize,
    pub index: usize,
}

impl SwitchId {
    pub fn new(domain: usize, index: usize) -> Self {
        Self { domain, index }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Switch {
    pub name: String,
    /// Declared border router. Informational.
    pub border: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntraLink {
    pub a: usize,
    pub b: usize,
    pub cost: u64,
    pub capacity: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyOverride {
    Cost(u64),
    Refuse,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Domain {
    pub name: String,
    pub switches: Vec<Switch>,
    pub links: Vec<IntraLink>,
    /// Overrides keyed by `(min, max)` switch index.
    pub policy: BTreeMap<(usize, usize), PolicyOverride>,
}

impl Domain {
    pub fn switch_index(&self, name: &str) -> Option<usize> {
        self.switches.iter().position(|s| s.name == name)
    }

    pub fn policy_for(&self, a: usize, b: usize) -> Option<PolicyOverride> {
        self.policy.get(&(a.min(b), a.max(b))).copied()
    }

    /// Adjacency lists `(neighbor, link position)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.switches.len()];
        for (i, l) in self.links.iter().enumerate() {
            adj[l.a].push((l.b, i));
            adj[l.b].push((l.a, i));
        }
        adj
    }

    /// Single-source shortest paths inside the domain. Returns distances and
    /// predecessor links; unreachable switches have `None`.
    pub fn dijkstra(&self, from: usize) -> (Vec<Option<u64>>, Vec<Option<usize>>) {
        let adj = self.adjacency();
        let n = self.switches.len();
        let mut dist: Vec<Option<u64>> = vec![None; n];
        let mut prev: Vec<Option<usize>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[from] = Some(0);
        heap.push(Reverse((0u64, from)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u] != Some(d) {
                continue;
            }
            for &(v, li) in &adj[u] {
                let nd = d + self.links[li].cost;
                if dist[v].is_none_or(|old| nd < old) {
                    dist[v] = Some(nd);
                    prev[v] = Some(u);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        (dist, prev)
    }

    /// Link between two switches, if any.
    pub fn link_between(&self, a: usize, b: usize) -> Option<&IntraLink> {
        self.links.iter().find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterLink {
    pub a: SwitchId,
    pub b: SwitchId,
    pub cost: u64,
    pub capacity: Option<u64>,
}

impl InterLink {
    pub fn touches(&self, s: SwitchId) -> bool {
        self.a == s || self.b == s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiDomainNetwork {
    pub c_max: u64,
    pub domains: Vec<Domain>,
    pub inter_links: Vec<InterLink>,
}

impl MultiDomainNetwork {
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        parse::parse(text)
    }

    /// Serializes back to the text grammar. `parse(to_text(n)) == n`.
    pub fn to_text(&self) -> String {
        parse::render(self)
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn switch(&self, id: SwitchId) -> &Switch {
        &self.domains[id.domain].switches[id.index]
    }

    /// `domain:switch` label.
    pub fn label(&self, id: SwitchId) -> String {
        format!("{}:{}", self.domains[id.domain].name, self.switch(id).name)
    }

    /// Resolves a `domain:switch` label.
    pub fn resolve(&self, label: &str) -> Result<SwitchId, TopologyError> {
        let unknown = || TopologyError::UnknownSwitch(label.to_string());
        let (d, s) = label.split_once(':').ok_or_else(unknown)?;
        let domain = self.domain_index(d).ok_or_else(unknown)?;
        let index = self.domains[domain].switch_index(s).ok_or_else(unknown)?;
        Ok(SwitchId { domain, index })
    }

    pub fn switch_count(&self) -> usize {
        self.domains.iter().map(|d| d.switches.len()).sum()
    }

    pub fn intra_link_count(&self) -> usize {
        self.domains.iter().map(|d| d.links.len()).sum()
    }

    pub fn is_gateway(&self, id: SwitchId) -> bool {
        self.inter_links.iter().any(|l| l.touches(id))
    }

    /// All gateways in canonical order.
    pub fn gateways(&self) -> Vec<SwitchId> {
        let mut g: Vec<SwitchId> = self.inter_links.iter().flat_map(|l| [l.a, l.b]).collect();
        g.sort();
        g.dedup();
        g
    }

    pub fn domain_gateways(&self, domain: usize) -> Vec<SwitchId> {
        self.gateways().into_iter().filter(|g| g.domain == domain).collect()
    }

    /// Physical neighbors of a switch with link cost, intra links first.
    pub fn neighbors(&self, id: SwitchId) -> Vec<(SwitchId, u64)> {
        let d = &self.domains[id.domain];
        let mut out: Vec<(SwitchId, u64)> = d
            .links
            .iter()
            .filter_map(|l| {
                if l.a == id.index {
                    Some((SwitchId::new(id.domain, l.b), l.cost))
                } else if l.b == id.index {
                    Some((SwitchId::new(id.domain, l.a), l.cost))
                } else {
                    None
                }
            })
            .collect();
        for l in &self.inter_links {
            if l.a == id {
                out.push((l.b, l.cost));
            } else if l.b == id {
                out.push((l.a, l.cost));
            }
        }
        out
    }

    /// Cost of the physical link between two switches, if one exists.
    pub fn link_cost(&self, a: SwitchId, b: SwitchId) -> Option<u64> {
        if a.domain == b.domain {
            self.domains[a.domain].link_between(a.index, b.index).map(|l| l.cost)
        } else {
            self.inter_links
                .iter()
                .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
                .map(|l| l.cost)
        }
    }

    /// Capacity of the physical link between two switches.
    pub fn link_capacity(&self, a: SwitchId, b: SwitchId) -> Option<u64> {
        if a.domain == b.domain {
            self.domains[a.domain].link_between(a.index, b.index).and_then(|l| l.capacity)
        } else {
            self.inter_links
                .iter()
                .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
                .and_then(|l| l.capacity)
        }
    }

    /// Built-in example topologies by name.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "toy1" => include_str!("../../topologies/toy1.topo"),
            "toy-ba" => include_str!("../../topologies/toy-ba.topo"),
            "fig2" => include_str!("../../topologies/fig2.topo"),
            _ => return None,
        };
        Some(Self::parse(text).expect("built-in topologies are valid"))
    }
}

impl Encode for SwitchId {
    fn encode(&self, w: &mut Writer) {
        w.u32(self.domain as u32);
        w.u32(self.index as u32);
    }
}

impl Decode for SwitchId {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Self::new(r.u32()? as usize, r.u32()? as usize))
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}.{}", self.domain, self.index)
    }
}
