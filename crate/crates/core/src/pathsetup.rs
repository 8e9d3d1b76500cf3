//! Path establishment from a revealed tree.
//!
//! The destination controller picks the tree node the flow enters its domain
//! through, installs the tail to the destination, and walks parent pointers
//! toward the root. Each controller installs entries only on its own
//! switches: when the walk crosses into another domain it asks that
//! domain's controller to install the boundary entry and continue.

use crate::runtime::{edge_key, unexpected, Cluster, Controller, ControllerId, Message};
use crate::topology::{Domain, EcgSkeleton, MultiDomainNetwork, SwitchId};
use crate::Error;
use std::collections::BTreeMap;

/// Next hops installed by one domain, keyed by `(switch index, flow)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForwardingTable {
    pub domain: usize,
    pub entries: BTreeMap<(usize, u64), SwitchId>,
}

impl ForwardingTable {
    pub fn new(domain: usize) -> Self {
        Self { domain, entries: BTreeMap::new() }
    }

    /// Reinstalling the same entry is a no-op.
    pub fn install(&mut self, switch: SwitchId, flow: u64, next: SwitchId) -> Result<(), Error> {
        if switch.domain != self.domain {
            return Err(Error::Unauthorized { controller: self.domain, switch });
        }
        match self.entries.insert((switch.index, flow), next) {
            Some(old) if old != next => {
                self.entries.insert((switch.index, flow), old);
                Err(Error::NoRoute(format!("path revisits switch {switch}")))
            }
            _ => Ok(()),
        }
    }

    pub fn next_hop(&self, switch: SwitchId, flow: u64) -> Option<SwitchId> {
        if switch.domain != self.domain {
            return None;
        }
        self.entries.get(&(switch.index, flow)).copied()
    }

    /// Entries of one flow in switch order.
    pub fn flow_entries(&self, flow: u64) -> Vec<(SwitchId, SwitchId)> {
        self.entries
            .iter()
            .filter(|((_, f), _)| *f == flow)
            .map(|(&(i, _), &n)| (SwitchId::new(self.domain, i), n))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Segment {
    Intra { domain: usize, switches: Vec<SwitchId> },
    Inter { from: SwitchId, to: SwitchId },
}

/// Switch-level path from source to destination. Empty when they coincide.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Path {
    pub switches: Vec<SwitchId>,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.switches.len().saturating_sub(1)
    }

    /// Sum of physical link costs, or `None` if two consecutive switches
    /// are not linked.
    pub fn cost(&self, net: &MultiDomainNetwork) -> Option<u64> {
        self.switches.windows(2).map(|w| net.link_cost(w[0], w[1])).sum()
    }

    /// Maximal same-domain runs and the inter-domain links between them.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut run: Vec<SwitchId> = Vec::new();
        for &s in &self.switches {
            if let Some(&last) = run.last() {
                if last.domain != s.domain {
                    out.push(Segment::Intra { domain: last.domain, switches: std::mem::take(&mut run) });
                    out.push(Segment::Inter { from: last, to: s });
                }
            }
            run.push(s);
        }
        if let Some(&last) = run.last() {
            out.push(Segment::Intra { domain: last.domain, switches: run });
        }
        out
    }

    pub fn render(&self, net: &MultiDomainNetwork) -> String {
        self.switches.iter().map(|s| net.label(*s)).collect::<Vec<_>>().join(" -> ")
    }
}

/// An established flow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub flow: u64,
    pub path: Path,
    /// Length reported by the destination controller, when requested.
    pub length: Option<u64>,
}

/// Distances and predecessors toward `to` inside one domain.
pub(crate) fn intra_route(domain: &Domain, to: usize) -> (Vec<Option<u64>>, Vec<Option<usize>>) {
    domain.dijkstra(to)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RoutingMode {
    /// Encrypted tree construction with per-node reveal.
    Baseline,
    /// Candidate recommendation with plaintext replicas.
    #[default]
    Cr,
    /// Shared trees rooted at the source domain's gateways.
    Shared,
}

impl std::str::FromStr for RoutingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "baseline" | "pspt" => Ok(Self::Baseline),
            "cr" => Ok(Self::Cr),
            "shared" => Ok(Self::Shared),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

/// Builds the source's tree in the given mode and establishes one flow.
pub fn route(cluster: &mut Cluster, source: SwitchId, dest: SwitchId, mode: RoutingMode) -> Result<Route, Error> {
    if source == dest {
        let flow = cluster.new_flow();
        return Ok(Route { flow, path: Path::default(), length: Some(0) });
    }
    match mode {
        RoutingMode::Shared => {
            let trees = crate::fastpath::build_shared_trees(cluster, source.domain, Default::default())?;
            crate::fastpath::answer_flow_query(cluster, &trees, source, dest)
        }
        RoutingMode::Baseline | RoutingMode::Cr => {
            let skeleton = EcgSkeleton::build(cluster.topology(), Some(source), &[])?;
            if !skeleton.is_connected() {
                return Err(Error::NoRoute("equivalent cost graph is disconnected".into()));
            }
            let session = cluster.start_session(source.domain, skeleton)?;
            build_tree(cluster, session, mode)?;
            establish(cluster, session, source, dest, true)
        }
    }
}

pub(crate) fn build_tree(cluster: &mut Cluster, session: u32, mode: RoutingMode) -> Result<(), Error> {
    if mode == RoutingMode::Baseline {
        let res = crate::pspt::run_pspt(cluster, session)?;
        crate::pspt::reveal_tree(cluster, &res)
    } else {
        crate::fastpath::run_cr(cluster, session, Default::default()).map(|_| ())
    }
}

/// Asks the destination controller to set up a flow along a revealed tree
/// and reads the installed path back from the forwarding tables.
pub fn establish(cluster: &mut Cluster, session: u32, source: SwitchId, dest: SwitchId, report: bool) -> Result<Route, Error> {
    let flow = cluster.new_flow();
    let (cs, ct) = (source.domain, dest.domain);
    let msg = Message::RouteReq { session, flow, source, dest, report };
    let reply = if cs == ct {
        cluster.local(ct, msg)?.ok_or_else(|| Error::Protocol("no route reply".into()))?
    } else {
        cluster.call(cs, ct, msg)?
    };
    let length = match reply {
        Message::RouteStarted { length } => length,
        other => return Err(unexpected(&other)),
    };
    finish_route(cluster, flow, source, dest, length)
}

pub(crate) fn finish_route(
    cluster: &mut Cluster,
    flow: u64,
    source: SwitchId,
    dest: SwitchId,
    length: Option<u64>,
) -> Result<Route, Error> {
    if !cluster.controller(source.domain).flows.get(&flow).is_some_and(|f| f.complete) {
        return Err(Error::Protocol(format!("flow {flow} did not reach its source")));
    }
    let path = follow(cluster, flow, source, dest)?;
    Ok(Route { flow, path, length })
}

/// Follows installed entries from `source` until `dest`.
pub fn follow(cluster: &Cluster, flow: u64, source: SwitchId, dest: SwitchId) -> Result<Path, Error> {
    if source == dest {
        return Ok(Path::default());
    }
    let limit = cluster.topology().switch_count();
    let mut switches = vec![source];
    let mut cur = source;
    while cur != dest {
        if switches.len() > limit {
            return Err(Error::NoRoute(format!("forwarding loop for flow {flow}")));
        }
        cur = cluster
            .controller(cur.domain)
            .forwarding()
            .next_hop(cur, flow)
            .ok_or_else(|| Error::NoRoute(format!("no entry for flow {flow} at {}", cluster.topology().label(cur))))?;
        switches.push(cur);
    }
    Ok(Path { switches })
}

impl Controller {
    /// Entries are installed from the destination backwards. A switch the
    /// walk reaches again keeps its first entry, which cuts the loop.
    fn install(&mut self, flow: u64, switch: SwitchId, next: SwitchId) -> Result<(), Error> {
        let rec = self.flows.entry(flow).or_default();
        if rec.dest == Some(switch) || self.forwarding.next_hop(switch, flow).is_some() {
            return Ok(());
        }
        self.forwarding.install(switch, flow, next)
    }

    /// Installs the shortest intra-domain path from switch `from` to `to`.
    fn install_toward(&mut self, flow: u64, from: usize, to: usize) -> Result<(), Error> {
        let d = self.id;
        let (dist, prev) = intra_route(&self.topo.domains[d], to);
        if dist[from].is_none() {
            return Err(Error::NoRoute(format!("switch {from} cannot reach {to} inside domain {d}")));
        }
        let mut x = from;
        while x != to {
            let next = prev[x].expect("reachable switch has a predecessor");
            self.install(flow, SwitchId::new(d, x), SwitchId::new(d, next))?;
            x = next;
        }
        Ok(())
    }

    /// Tail from tree node `w` to the destination.
    pub(crate) fn install_tail(&mut self, flow: u64, w: usize, session: u32, dest: SwitchId) -> Result<(), Error> {
        let from = self.session(session)?.skeleton.nodes[w];
        if from.domain != self.id || dest.domain != self.id {
            return Err(Error::Protocol("tail must stay inside the destination domain".into()));
        }
        self.install_toward(flow, from.index, dest.index)
    }

    /// Walks parent pointers from position `start` toward the root,
    /// installing entries on this domain's switches.
    pub(crate) fn walk(
        &mut self,
        session: u32,
        flow: u64,
        source: SwitchId,
        start: usize,
        out: &mut Vec<(ControllerId, Message)>,
    ) -> Result<(), Error> {
        let id = self.id;
        let st = self.session(session)?;
        let skeleton = st.skeleton.clone();
        let mut v = start;
        for _ in 0..=skeleton.nodes.len() {
            let st = self.session(session)?;
            let entry = *st.tree.entry(v).ok_or_else(|| {
                Error::NoRoute(format!("{} is not in the tree", self.topo.label(skeleton.nodes[v])))
            })?;
            let here = skeleton.nodes[v];
            let Some(p) = entry.parent else {
                if here != source {
                    if here.domain != source.domain || id != source.domain {
                        return Err(Error::Protocol("tree root is not in the source domain".into()));
                    }
                    self.install_toward(flow, source.index, here.index)?;
                }
                self.flows.entry(flow).or_default().complete = true;
                return Ok(());
            };
            let there = skeleton.nodes[p];
            let e = skeleton
                .edge_between(p, v)
                .ok_or_else(|| Error::Protocol("tree parent is not adjacent".into()))?;
            let quoted = st.quotes.get(&e).map(|q| q.path.clone());
            self.flows.entry(flow).or_default().edges.insert(edge_key(there, here));
            if there.domain != id {
                out.push((there.domain, Message::InstallReq { session, flow, source, switch: there, next: here }));
                return Ok(());
            }
            let mut hops = quoted
                .ok_or_else(|| Error::Protocol("no quote for a tree edge".into()))?
                .ok_or_else(|| Error::NoRoute(format!("domain {id} refuses to carry traffic from {there} to {here}")))?;
            // quotes run from the lower to the higher position
            if skeleton.edges[e].u != p {
                hops.reverse();
            }
            for w in hops.windows(2) {
                self.install(flow, SwitchId::new(id, w[0]), SwitchId::new(id, w[1]))?;
            }
            v = p;
        }
        Err(Error::NoRoute("parent pointers form a cycle".into()))
    }

    pub(crate) fn on_route_req(
        &mut self,
        session: u32,
        flow: u64,
        source: SwitchId,
        dest: SwitchId,
        report: bool,
        out: &mut Vec<(ControllerId, Message)>,
    ) -> Result<Message, Error> {
        if dest.domain != self.id {
            return Err(Error::Protocol("route request sent to the wrong domain".into()));
        }
        self.flows.entry(flow).or_default().dest = Some(dest);
        if dest == source {
            self.flows.entry(flow).or_default().complete = true;
            return Ok(Message::RouteStarted { length: report.then_some(0) });
        }
        let st = self.session(session)?;
        let (start, length) = match st.skeleton.position(dest) {
            Some(p) => {
                let d = st.tree.dist(p).ok_or_else(|| Error::NoRoute("destination is not in the tree".into()))?;
                (p, d)
            }
            None => {
                let (tail, _) = intra_route(&self.topo.domains[self.id], dest.index);
                let mut best: Option<(u64, usize)> = None;
                for v in st.skeleton.domain_nodes(self.id) {
                    let (Some(dv), Some(t)) = (st.tree.dist(v), tail[st.skeleton.nodes[v].index]) else { continue };
                    if best.is_none_or(|b| (dv + t, v) < b) {
                        best = Some((dv + t, v));
                    }
                }
                let (l, v) = best.ok_or_else(|| Error::NoRoute("destination is unreachable".into()))?;
                self.install_tail(flow, v, session, dest)?;
                (v, l)
            }
        };
        if length >= st_sentinel(self, session)? {
            return Err(Error::NoRoute("destination is unreachable".into()));
        }
        self.walk(session, flow, source, start, out)?;
        Ok(Message::RouteStarted { length: report.then_some(length) })
    }

    pub(crate) fn on_install_req(
        &mut self,
        session: u32,
        flow: u64,
        source: SwitchId,
        switch: SwitchId,
        next: SwitchId,
        out: &mut Vec<(ControllerId, Message)>,
    ) -> Result<(), Error> {
        self.install(flow, switch, next)?;
        self.flows.entry(flow).or_default().edges.insert(edge_key(switch, next));
        let pos = self
            .session(session)?
            .skeleton
            .position(switch)
            .ok_or_else(|| Error::Protocol("install request for a non-significant switch".into()))?;
        self.walk(session, flow, source, pos, out)
    }
}

fn st_sentinel(c: &Controller, session: u32) -> Result<u64, Error> {
    Ok(c.session(session)?.skeleton.sentinel())
}
