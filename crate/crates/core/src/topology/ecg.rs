use super::{Domain, MultiDomainNetwork, PolicyOverride, SwitchId, TopologyError};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};
use std::collections::{BTreeMap, VecDeque};

/// A domain's quote for a pair of its significant switches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntraQuote {
    pub cost: u64,
    /// Switch indices of the committed path, first endpoint to second.
    /// `None` when the pair is physically disconnected or refused.
    pub path: Option<Vec<usize>>,
}

/// Quotes for every pair of `nodes` (switch indices within `domain`), keyed
/// by `(min, max)` index. Shortest-path lengths by default, then policy
/// overrides; refusals, disconnected pairs and long paths all quote `c_max`.
pub fn intra_pair_costs(domain: &Domain, c_max: u64, nodes: &[usize]) -> BTreeMap<(usize, usize), IntraQuote> {
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let mut out = BTreeMap::new();
    for (i, &u) in nodes.iter().enumerate() {
        let (dist, prev) = domain.dijkstra(u);
        for &v in &nodes[i + 1..] {
            let path = dist[v].map(|_| {
                let mut p = vec![v];
                while let Some(q) = prev[*p.last().unwrap()] {
                    p.push(q);
                }
                p.reverse();
                p
            });
            let base = dist[v].map_or(c_max, |d| d.min(c_max));
            let (cost, path) = match domain.policy_for(u, v) {
                Some(PolicyOverride::Cost(c)) => (c.min(c_max), path),
                Some(PolicyOverride::Refuse) => (c_max, None),
                None => (base, path),
            };
            out.insert((u, v), IntraQuote { cost, path });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Quoted privately by the owning domain.
    Intra { domain: usize },
    /// Mirrors a physical inter-domain link; its cost is public.
    Inter { cost: u64 },
}

/// An ECG edge between node positions `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EcgEdge {
    pub u: usize,
    pub v: usize,
    pub kind: EdgeKind,
}

/// The public part of an equivalent cost graph: significant nodes, edges and
/// inter-domain costs. Intra-domain costs stay with their owners.
///
/// Nodes are ordered by `(domain, switch index)`; edges are sorted by
/// `(u, v)` and the public edge index is position + 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcgSkeleton {
    pub c_max: u64,
    pub nodes: Vec<SwitchId>,
    pub source: Option<usize>,
    pub edges: Vec<EcgEdge>,
}

impl EcgSkeleton {
    /// Significant nodes are all gateways plus `source` and `extra`.
    pub fn build(
        net: &MultiDomainNetwork,
        source: Option<SwitchId>,
        extra: &[SwitchId],
    ) -> Result<Self, TopologyError> {
        let mut nodes = net.gateways();
        for s in source.iter().chain(extra) {
            if s.domain >= net.domains.len() || s.index >= net.domains[s.domain].switches.len() {
                return Err(TopologyError::UnknownSwitch(s.to_string()));
            }
            nodes.push(*s);
        }
        nodes.sort();
        nodes.dedup();
        let mut edges = Vec::new();
        for (i, a) in nodes.iter().enumerate() {
            for (j, b) in nodes.iter().enumerate().skip(i + 1) {
                if a.domain == b.domain {
                    edges.push(EcgEdge { u: i, v: j, kind: EdgeKind::Intra { domain: a.domain } });
                }
            }
        }
        for l in &net.inter_links {
            let (pa, pb) = (nodes.binary_search(&l.a).unwrap(), nodes.binary_search(&l.b).unwrap());
            edges.push(EcgEdge { u: pa.min(pb), v: pa.max(pb), kind: EdgeKind::Inter { cost: l.cost } });
        }
        edges.sort_by_key(|e| (e.u, e.v));
        let source = source.map(|s| nodes.binary_search(&s).unwrap());
        Ok(Self { c_max: net.c_max, nodes, source, edges })
    }

    /// `c_max·|S| + 1`, larger than any simple-path length.
    pub fn sentinel(&self) -> u64 {
        self.c_max * self.nodes.len() as u64 + 1
    }

    pub fn position(&self, s: SwitchId) -> Option<usize> {
        self.nodes.binary_search(&s).ok()
    }

    pub fn node_domain(&self, pos: usize) -> usize {
        self.nodes[pos].domain
    }

    pub fn domain_nodes(&self, domain: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&p| self.nodes[p].domain == domain).collect()
    }

    /// Intra edges quoted by `domain`.
    pub fn intra_edges(&self, domain: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].kind == EdgeKind::Intra { domain })
            .collect()
    }

    /// Domain responsible for an edge: the quoting domain for intra edges,
    /// the lower-numbered endpoint domain for inter edges.
    pub fn owner(&self, edge: usize) -> usize {
        let e = &self.edges[edge];
        match e.kind {
            EdgeKind::Intra { domain } => domain,
            EdgeKind::Inter { .. } => self.node_domain(e.u).min(self.node_domain(e.v)),
        }
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search_by_key(&key, |e| (e.u, e.v)).ok()
    }

    /// `adj[node] = [(edge, other endpoint)]` in edge order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((i, e.v));
            adj[e.v].push((i, e.u));
        }
        adj
    }

    /// Nodes reachable from `root`.
    pub fn component(&self, root: usize) -> Vec<bool> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            for &(_, v) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        self.nodes.is_empty() || self.component(0).iter().all(|&r| r)
    }

    /// Keeps only edges for which `keep(edge position)` holds.
    pub fn retain_edges(&self, keep: impl Fn(usize) -> bool) -> Self {
        let edges = (0..self.edges.len()).filter(|&e| keep(e)).map(|e| self.edges[e]).collect();
        Self { edges, ..self.clone() }
    }

    /// Keeps only the nodes with `keep[pos]` and the edges between them.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        let mut remap = vec![None; self.nodes.len()];
        let mut nodes = Vec::new();
        for (p, &k) in keep.iter().enumerate() {
            if k {
                remap[p] = Some(nodes.len());
                nodes.push(self.nodes[p]);
            }
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|e| Some(EcgEdge { u: remap[e.u]?, v: remap[e.v]?, kind: e.kind }))
            .collect();
        Self { c_max: self.c_max, nodes, source: self.source.and_then(|s| remap[s]), edges }
    }
}

impl Encode for EcgSkeleton {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.c_max);
        w.len(self.nodes.len());
        for n in &self.nodes {
            w.u32(n.domain as u32);
            w.u32(n.index as u32);
        }
        match self.source {
            Some(s) => {
                w.bool(true);
                w.u32(s as u32);
            }
            None => w.bool(false),
        }
        w.len(self.edges.len());
        for e in &self.edges {
            w.u32(e.u as u32);
            w.u32(e.v as u32);
            match e.kind {
                EdgeKind::Intra { domain } => {
                    w.u8(0);
                    w.u32(domain as u32);
                }
                EdgeKind::Inter { cost } => {
                    w.u8(1);
                    w.u64(cost);
                }
            }
        }
    }
}

impl Decode for EcgSkeleton {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let c_max = r.u64()?;
        let n = r.len()?;
        let nodes = (0..n)
            .map(|_| Ok(SwitchId::new(r.u32()? as usize, r.u32()? as usize)))
            .collect::<Result<Vec<_>, WireError>>()?;
        let source = if r.bool()? { Some(r.u32()? as usize) } else { None };
        let m = r.len()?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let u = r.u32()? as usize;
            let v = r.u32()? as usize;
            let kind = match r.u8()? {
                0 => EdgeKind::Intra { domain: r.u32()? as usize },
                1 => EdgeKind::Inter { cost: r.u64()? },
                tag => return Err(WireError::BadTag { what: "edge kind", tag }),
            };
            if u >= v || v >= nodes.len() {
                return Err(WireError::Malformed("edge endpoints"));
            }
            edges.push(EcgEdge { u, v, kind });
        }
        if source.is_some_and(|s| s >= nodes.len()) {
            return Err(WireError::Malformed("source position"));
        }
        Ok(Self { c_max, nodes, source, edges })
    }
}

/// The full equivalent cost graph, including every domain's private quotes.
/// Protocol code never builds this; it serves oracles, reporting and
/// path expansion by owning domains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalentCostGraph {
    pub skeleton: EcgSkeleton,
    pub costs: Vec<u64>,
    /// Inter edges: link capacity. Intra edges: bottleneck of the committed
    /// path. `None` when any traversed link lacks a capacity.
    pub capacities: Vec<Option<u64>>,
    /// Committed switch-level path of each intra edge, oriented `u → v`.
    pub intra_paths: Vec<Option<Vec<SwitchId>>>,
}

impl EquivalentCostGraph {
    /// Per-flow graph for `source`; the graph must be connected.
    pub fn per_flow(net: &MultiDomainNetwork, source: SwitchId) -> Result<Self, TopologyError> {
        Self::connected(net, EcgSkeleton::build(net, Some(source), &[])?)
    }

    /// Gateways-only graph shared by an equal-flow group; must be connected.
    pub fn shared(net: &MultiDomainNetwork) -> Result<Self, TopologyError> {
        Self::connected(net, EcgSkeleton::build(net, None, &[])?)
    }

    fn connected(net: &MultiDomainNetwork, skeleton: EcgSkeleton) -> Result<Self, TopologyError> {
        if skeleton.nodes.is_empty() {
            return Err(TopologyError::Disconnected("no significant nodes".into()));
        }
        if !skeleton.is_connected() {
            let reach = skeleton.component(skeleton.source.unwrap_or(0));
            let lost = skeleton
                .nodes
                .iter()
                .zip(reach)
                .find(|(_, r)| !r)
                .map(|(n, _)| net.label(*n))
                .unwrap_or_default();
            return Err(TopologyError::Disconnected(format!("`{lost}` is unreachable")));
        }
        Ok(Self::from_skeleton(net, skeleton))
    }

    /// Attaches every domain's quotes to a skeleton without checking
    /// connectivity.
    pub fn from_skeleton(net: &MultiDomainNetwork, skeleton: EcgSkeleton) -> Self {
        let m = skeleton.edges.len();
        let mut costs = vec![0; m];
        let mut capacities = vec![None; m];
        let mut intra_paths = vec![None; m];
        for (d, domain) in net.domains.iter().enumerate() {
            for (e, q) in domain_quotes(domain, d, &skeleton) {
                let path: Option<Vec<SwitchId>> =
                    q.path.map(|p| p.into_iter().map(|i| SwitchId::new(d, i)).collect());
                capacities[e] = path.as_ref().and_then(|p| {
                    p.windows(2).map(|w| net.link_capacity(w[0], w[1])).try_fold(u64::MAX, |acc, c| Some(acc.min(c?)))
                });
                costs[e] = q.cost;
                intra_paths[e] = path;
            }
        }
        for (e, edge) in skeleton.edges.iter().enumerate() {
            if let EdgeKind::Inter { cost } = edge.kind {
                costs[e] = cost;
                capacities[e] = net.link_capacity(skeleton.nodes[edge.u], skeleton.nodes[edge.v]);
            }
        }
        Self { skeleton, costs, capacities, intra_paths }
    }

    pub fn nodes(&self) -> &[SwitchId] {
        &self.skeleton.nodes
    }

    pub fn edges(&self) -> &[EcgEdge] {
        &self.skeleton.edges
    }

    pub fn sentinel(&self) -> u64 {
        self.skeleton.sentinel()
    }
}

/// The quotes `domain` contributes to `skeleton`, keyed by edge position.
/// Paths are oriented from the edge's `u` endpoint to its `v` endpoint.
pub(crate) fn domain_quotes(domain: &Domain, d: usize, skeleton: &EcgSkeleton) -> Vec<(usize, IntraQuote)> {
    let edges = skeleton.intra_edges(d);
    if edges.is_empty() {
        return Vec::new();
    }
    let members: Vec<usize> = skeleton.domain_nodes(d).iter().map(|&p| skeleton.nodes[p].index).collect();
    let quotes = intra_pair_costs(domain, skeleton.c_max, &members);
    edges
        .into_iter()
        .map(|e| {
            let (a, b) = (skeleton.nodes[skeleton.edges[e].u].index, skeleton.nodes[skeleton.edges[e].v].index);
            let mut q = quotes[&(a.min(b), a.max(b))].clone();
            if a > b {
                if let Some(p) = q.path.as_mut() {
                    p.reverse();
                }
            }
            (e, q)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy1() -> MultiDomainNetwork {
        MultiDomainNetwork::builtin("toy1").unwrap()
    }

    #[test]
    fn toy1_per_flow_graph() {
        let net = toy1();
        let s = net.resolve("D1:s").unwrap();
        let ecg = EquivalentCostGraph::per_flow(&net, s).unwrap();
        let labels: Vec<String> = ecg.nodes().iter().map(|n| net.label(*n)).collect();
        assert_eq!(labels, ["D1:s", "D1:a", "D2:b"]);
        assert_eq!(ecg.edges().len(), 2);
        assert_eq!((ecg.edges()[0].u, ecg.edges()[0].v), (0, 1));
        assert_eq!(ecg.edges()[0].kind, EdgeKind::Intra { domain: 0 });
        assert_eq!((ecg.edges()[1].u, ecg.edges()[1].v), (1, 2));
        assert_eq!(ecg.costs, vec![1, 2]);
        assert_eq!(ecg.skeleton.source, Some(0));
        assert_eq!(ecg.sentinel(), net.c_max * 3 + 1);
    }

    #[test]
    fn toy1_shared_graph() {
        let net = toy1();
        let ecg = EquivalentCostGraph::shared(&net).unwrap();
        assert_eq!(ecg.nodes().len(), 2);
        assert_eq!(ecg.edges().len(), 1);
        assert!(matches!(ecg.edges()[0].kind, EdgeKind::Inter { cost: 2 }));
    }

    #[test]
    fn isolated_domain_is_rejected() {
        let net = MultiDomainNetwork::parse(
            "cmax 9\ndomain A\nswitch x\nswitch y\nlink x y cost 1\ndomain B\nswitch z\ndomain C\nswitch w\n\
             interlink A:y B:z cost 1\n",
        )
        .unwrap();
        let w = net.resolve("C:w").unwrap();
        assert!(matches!(EquivalentCostGraph::per_flow(&net, w), Err(TopologyError::Disconnected(_))));
        assert!(EquivalentCostGraph::shared(&net).is_ok());
    }

    #[test]
    fn quotes_apply_policy_and_caps() {
        let net = MultiDomainNetwork::parse(
            "cmax 6\ndomain A\nswitch v\nswitch x\nswitch w\nswitch u\nswitch lone\n\
             link v x cost 2\nlink x w cost 3\nlink w u cost 4\npolicy A v u refuse\npolicy A x u 1\n",
        )
        .unwrap();
        let q = intra_pair_costs(&net.domains[0], net.c_max, &[0, 1, 2, 3, 4]);
        assert_eq!(q[&(0, 2)].cost, 5);
        assert_eq!(q[&(0, 2)].path, Some(vec![0, 1, 2]));
        assert_eq!(q[&(0, 3)], IntraQuote { cost: 6, path: None });
        assert_eq!(q[&(1, 3)].cost, 1);
        assert_eq!(q[&(2, 3)].cost, 4);
        assert_eq!(q[&(0, 4)], IntraQuote { cost: 6, path: None });
        let q = intra_pair_costs(&net.domains[0], 4, &[0, 2]);
        assert_eq!(q[&(0, 2)].cost, 4);
    }

    #[test]
    fn skeleton_wire_round_trip_and_canonical_bytes() {
        let net = MultiDomainNetwork::builtin("fig2").unwrap();
        let a = EquivalentCostGraph::shared(&net).unwrap();
        let b = EquivalentCostGraph::shared(&net).unwrap();
        assert_eq!(a.skeleton.to_bytes(), b.skeleton.to_bytes());
        assert_eq!(EcgSkeleton::from_bytes(&a.skeleton.to_bytes()).unwrap(), a.skeleton);
        for w in a.edges().windows(2) {
            assert!((w[0].u, w[0].v) < (w[1].u, w[1].v));
        }
    }
}
