//! Greedy multipath bandwidth allocation.
//!
//! Repeatedly: build a tree over the residual graph, establish the shortest
//! path, find its bottleneck with a private tournament over the domains'
//! local minima, allocate up to the residual demand, and remove exhausted
//! edges. Each domain keeps the residual capacities of the edges it owns;
//! inter-domain links belong to the lower-numbered endpoint domain.

use crate::fastpath::tournament;
use crate::pathsetup::{build_tree, establish, Path, RoutingMode};
use crate::runtime::{edge_key, unexpected, Cluster, Controller, ControllerId, EdgeKey, Message};
use crate::topology::{EcgSkeleton, EdgeKind, SwitchId};
use crate::Error;
use std::collections::{BTreeMap, BTreeSet};

/// What happens to a path's edges after an allocation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeleteMode {
    /// Remove only edges whose residual capacity reached zero.
    #[default]
    ZeroCap,
    /// Remove every edge of the path.
    WholePath,
}

impl std::str::FromStr for DeleteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "zero-cap" => Ok(Self::ZeroCap),
            "whole-path" => Ok(Self::WholePath),
            _ => Err(Error::Config(format!("unknown delete mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BaOptions {
    pub delete: DeleteMode,
    /// Tree construction per iteration; shared trees are not supported.
    pub mode: RoutingMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocatedPath {
    pub path: Path,
    pub length: u64,
    pub amount: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlowAllocation {
    pub demand: u64,
    pub paths: Vec<AllocatedPath>,
    pub total_cost: u64,
    /// Allocation id; selects the controllers' residual capacities.
    pub alloc: u32,
}

impl FlowAllocation {
    pub fn allocated(&self) -> u64 {
        self.paths.iter().map(|p| p.amount).sum()
    }

    pub fn is_satisfied(&self) -> bool {
        self.allocated() >= self.demand
    }
}

/// `Σ amount · length` over the allocated paths.
pub fn allocation_cost(paths: &[AllocatedPath]) -> u64 {
    paths.iter().map(|p| p.amount * p.length).sum()
}

/// Domain that keeps the capacity of an ECG edge.
pub fn capacity_owner(key: EdgeKey) -> usize {
    key.0.domain.min(key.1.domain)
}

fn ask(cluster: &mut Cluster, from: ControllerId, to: ControllerId, msg: Message) -> Result<Message, Error> {
    if from == to {
        cluster.local(to, msg)?.ok_or_else(|| Error::Protocol("no local reply".into()))
    } else {
        cluster.call(from, to, msg)
    }
}

fn deleted_edges(reply: Message) -> Result<Vec<EdgeKey>, Error> {
    match reply {
        Message::Deleted { edges } => Ok(edges),
        other => Err(unexpected(&other)),
    }
}

/// Allocates `demand` units from `source` to `dest`. When the residual
/// graph no longer connects them the partial allocation is returned inside
/// [`Error::Unsatisfiable`].
pub fn run_ba(
    cluster: &mut Cluster,
    source: SwitchId,
    dest: SwitchId,
    demand: u64,
    opts: BaOptions,
) -> Result<FlowAllocation, Error> {
    if demand == 0 {
        return Err(Error::Config("demand must be at least 1".into()));
    }
    if source == dest {
        return Err(Error::Config("source and destination coincide".into()));
    }
    if opts.mode == RoutingMode::Shared {
        return Err(Error::Config("bandwidth allocation builds per-flow trees".into()));
    }
    let cs = source.domain;
    let full = EcgSkeleton::build(cluster.topology(), Some(source), &[dest])?;
    let init = cluster.start_session(cs, full.clone())?;
    let alloc = init;
    let mut deleted: BTreeSet<EdgeKey> = BTreeSet::new();
    for d in 0..cluster.len() {
        deleted.extend(deleted_edges(ask(cluster, cs, d, Message::CapInit { session: init, alloc })?)?);
    }
    let mut out = FlowAllocation { demand, alloc, ..Default::default() };
    let mut residual = demand;
    while residual > 0 {
        let key = |e: usize| edge_key(full.nodes[full.edges[e].u], full.nodes[full.edges[e].v]);
        let live = full.retain_edges(|e| !deleted.contains(&key(e)));
        let reach = live.component(live.source.expect("source is significant"));
        if !reach[live.position(dest).expect("destination is significant")] {
            out.total_cost = allocation_cost(&out.paths);
            return Err(Error::Unsatisfiable(Box::new(out)));
        }
        let skeleton = live.restrict(&reach);
        let session = cluster.start_session(cs, skeleton)?;
        build_tree(cluster, session, opts.mode)?;
        let route = establish(cluster, session, source, dest, true)?;
        let length = route.length.ok_or_else(|| Error::Protocol("destination withheld the path length".into()))?;

        let mut holders = Vec::new();
        for d in 0..cluster.len() {
            match ask(cluster, cs, d, Message::CapQuery { alloc, flow: route.flow })? {
                Message::Flag { has: true } => holders.push(d),
                Message::Flag { has: false } => {}
                other => return Err(unexpected(&other)),
            }
        }
        let winner = tournament(cluster, cs, &holders)?;
        let bottleneck = match ask(cluster, cs, winner, Message::CapReveal)? {
            Message::CapValue { value } => value,
            other => return Err(unexpected(&other)),
        };
        if bottleneck == 0 {
            return Err(Error::Protocol("selected path has no capacity left".into()));
        }
        let amount = bottleneck.min(residual);
        let whole_path = opts.delete == DeleteMode::WholePath;
        for &d in &holders {
            let msg = Message::Allocate { alloc, flow: route.flow, amount, whole_path };
            deleted.extend(deleted_edges(ask(cluster, cs, d, msg)?)?);
        }
        out.paths.push(AllocatedPath { path: route.path, length, amount });
        residual -= amount;
    }
    out.total_cost = allocation_cost(&out.paths);
    Ok(out)
}

impl Controller {
    /// Records the capacities of this domain's edges in the session's graph.
    /// Intra edges take the bottleneck of the committed path; refused or
    /// disconnected pairs start at zero.
    pub(crate) fn on_cap_init(&mut self, session: u32, alloc: u32) -> Result<Message, Error> {
        let id = self.id;
        let st = self.session(session)?;
        let mut caps = BTreeMap::new();
        for (e, edge) in st.skeleton.edges.iter().enumerate() {
            let (a, b) = (st.skeleton.nodes[edge.u], st.skeleton.nodes[edge.v]);
            let key = edge_key(a, b);
            if capacity_owner(key) != id {
                continue;
            }
            let cap = match edge.kind {
                EdgeKind::Inter { .. } => self.topo.link_capacity(a, b),
                EdgeKind::Intra { .. } => match st.quotes.get(&e).and_then(|q| q.path.as_ref()) {
                    None => Some(0),
                    Some(p) => p.windows(2).try_fold(u64::MAX, |acc, w| {
                        Some(acc.min(self.topo.link_capacity(SwitchId::new(id, w[0]), SwitchId::new(id, w[1]))?))
                    }),
                },
            };
            let cap = cap.ok_or_else(|| {
                Error::Config(format!("link {} - {} has no capacity", self.topo.label(a), self.topo.label(b)))
            })?;
            caps.insert(key, cap);
        }
        let edges = caps.iter().filter(|(_, &c)| c == 0).map(|(&k, _)| k).collect();
        self.capacities.insert(alloc, caps);
        Ok(Message::Deleted { edges })
    }

    fn path_capacities(&self, alloc: u32, flow: u64) -> Result<Vec<(EdgeKey, u64)>, Error> {
        let caps = self.capacities.get(&alloc).ok_or_else(|| Error::Protocol(format!("unknown allocation {alloc}")))?;
        let Some(f) = self.flows.get(&flow) else { return Ok(Vec::new()) };
        Ok(f.edges.iter().filter_map(|k| caps.get(k).map(|&c| (*k, c))).collect())
    }

    pub(crate) fn on_cap_query(&mut self, alloc: u32, flow: u64) -> Result<Message, Error> {
        let min = self.path_capacities(alloc, flow)?.into_iter().map(|(_, c)| c).min();
        self.tournament = min;
        Ok(Message::Flag { has: min.is_some() })
    }

    pub(crate) fn on_cap_reveal(&mut self) -> Result<Message, Error> {
        let value = self.tournament.ok_or_else(|| Error::Protocol("no capacity to reveal".into()))?;
        Ok(Message::CapValue { value })
    }

    pub(crate) fn on_allocate(&mut self, alloc: u32, flow: u64, amount: u64, whole_path: bool) -> Result<Message, Error> {
        let on_path = self.path_capacities(alloc, flow)?;
        let caps = self.capacities.get_mut(&alloc).expect("checked above");
        let mut edges = Vec::new();
        for (k, c) in on_path {
            let left = c
                .checked_sub(amount)
                .ok_or_else(|| Error::Protocol(format!("allocation of {amount} exceeds a capacity of {c}")))?;
            caps.insert(k, left);
            if left == 0 || whole_path {
                edges.push(k);
            }
        }
        Ok(Message::Deleted { edges })
    }
}
