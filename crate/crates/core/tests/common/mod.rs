//! Plaintext oracles and network fixtures shared by the integration tests.
//!
//! The oracles work on the full (non-private) graphs and do not call any
//! protocol code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use xroute::fastpath::{run_cr, TournamentMode};
use xroute::topology::{generate, DomainShape, EdgeKind, SyntheticConfig};
use xroute::{reveal_tree, run_pspt, spawn_network, CryptoParams, EcgSkeleton, EquivalentCostGraph, MultiDomainNetwork, SwitchId};

fn config(n_domains: usize, switches: usize, n_inter_links: usize) -> SyntheticConfig {
    let links = (switches * 3 / 2).clamp(switches - 1, switches * (switches - 1) / 2);
    SyntheticConfig {
        domains: (1..=n_domains).map(|i| DomainShape::new(format!("D{i}"), switches, links, switches)).collect(),
        n_inter_links,
        cost_range: (1, 9),
        inter_cost_range: (1, 9),
        capacity_range: Some((1, 9)),
        c_max: 100,
    }
}

/// 2 to 4 domains, costs 1 to 9, at most 8 significant nodes.
pub fn small_network(seed: u64) -> MultiDomainNetwork {
    let n = 2 + (seed % 3) as usize;
    let switches = 3 + (seed / 3 % 3) as usize;
    // at most three inter links: six gateways plus the endpoints
    let links = (n - 1 + (seed / 9 % 2) as usize).min(3);
    generate(&config(n, switches, links), seed).unwrap()
}

/// 2 to 7 domains, at most 40 significant nodes.
pub fn medium_network(seed: u64) -> MultiDomainNetwork {
    let n = 2 + (seed % 6) as usize;
    let links = (n - 1 + (seed as usize * 7) % 12).min(19);
    generate(&config(n, 6, links), seed).unwrap()
}

/// Intra link costs in 100..=199, inter link costs in 1000..=1999, so that
/// private intra quotes cannot be confused with distances that cross a
/// domain border.
pub fn audit_network(seed: u64) -> MultiDomainNetwork {
    let n = 3 + (seed % 2) as usize;
    let mut cfg = config(n, 4, n + 1);
    cfg.cost_range = (100, 199);
    cfg.inter_cost_range = (1000, 1999);
    cfg.c_max = 5000;
    generate(&cfg, seed).unwrap()
}

/// First non-gateway switch of `domain`, or its first switch.
pub fn interior(net: &MultiDomainNetwork, domain: usize) -> SwitchId {
    (0..net.domains[domain].switches.len())
        .map(|i| SwitchId::new(domain, i))
        .find(|s| !net.is_gateway(*s))
        .unwrap_or(SwitchId::new(domain, 0))
}

pub fn endpoints(net: &MultiDomainNetwork) -> (SwitchId, SwitchId) {
    (interior(net, 0), interior(net, net.domains.len() - 1))
}

/// Bellman-Ford over the ECG edges: distance from the source to each node.
pub fn ecg_distances(ecg: &EquivalentCostGraph) -> Vec<Option<u64>> {
    let n = ecg.nodes().len();
    let mut dist = vec![None; n];
    dist[ecg.skeleton.source.unwrap()] = Some(0u64);
    for _ in 0..n {
        for (e, edge) in ecg.edges().iter().enumerate() {
            let c = ecg.costs[e];
            for (a, b) in [(edge.u, edge.v), (edge.v, edge.u)] {
                if let Some(da) = dist[a] {
                    if dist[b].is_none_or(|db: u64| da + c < db) {
                        dist[b] = Some(da + c);
                    }
                }
            }
        }
    }
    dist
}

/// Tree grown one node at a time: the outside node with the smallest
/// `(distance, position)`, attached to its lowest-positioned parent that
/// achieves that distance.
pub fn ecg_tree(ecg: &EquivalentCostGraph) -> Vec<Option<(u64, Option<usize>)>> {
    let n = ecg.nodes().len();
    let mut tree: Vec<Option<(u64, Option<usize>)>> = vec![None; n];
    tree[ecg.skeleton.source.unwrap()] = Some((0, None));
    loop {
        let mut best: Option<(u64, usize, usize)> = None;
        for (e, edge) in ecg.edges().iter().enumerate() {
            for (inside, outside) in [(edge.u, edge.v), (edge.v, edge.u)] {
                if let (Some((d, _)), None) = (tree[inside], tree[outside]) {
                    let cand = (d + ecg.costs[e], outside, inside);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
        }
        match best {
            Some((d, v, p)) => tree[v] = Some((d, Some(p))),
            None => return tree,
        }
    }
}

/// Switch-level path from the root to `node` along tree parents.
pub fn tree_path(ecg: &EquivalentCostGraph, tree: &[Option<(u64, Option<usize>)>], node: usize) -> Vec<SwitchId> {
    let mut rev = vec![ecg.nodes()[node]];
    let mut v = node;
    while let Some((_, Some(p))) = tree[v] {
        let e = ecg.skeleton.edge_between(p, v).unwrap();
        match ecg.edges()[e].kind {
            EdgeKind::Inter { .. } => rev.push(ecg.nodes()[p]),
            EdgeKind::Intra { .. } => {
                let mut hops = ecg.intra_paths[e].clone().expect("tree edge has a path");
                if ecg.edges()[e].u == p {
                    hops.reverse();
                }
                rev.extend(hops.into_iter().skip(1));
            }
        }
        v = p;
    }
    rev.reverse();
    rev
}

/// Bellman-Ford over every physical link of the network.
pub fn flat_distance(net: &MultiDomainNetwork, s: SwitchId, t: SwitchId) -> Option<u64> {
    let mut links: Vec<(SwitchId, SwitchId, u64)> = Vec::new();
    for (d, dom) in net.domains.iter().enumerate() {
        for l in &dom.links {
            links.push((SwitchId::new(d, l.a), SwitchId::new(d, l.b), l.cost));
        }
    }
    for l in &net.inter_links {
        links.push((l.a, l.b, l.cost));
    }
    let mut dist: BTreeMap<SwitchId, u64> = BTreeMap::from([(s, 0)]);
    for _ in 0..net.switch_count() {
        for &(a, b, c) in &links {
            for (x, y) in [(a, b), (b, a)] {
                if let Some(&dx) = dist.get(&x) {
                    if dist.get(&y).is_none_or(|&dy| dx + c < dy) {
                        dist.insert(y, dx + c);
                    }
                }
            }
        }
    }
    dist.get(&t).copied()
}

/// Removes loops from a switch walk: from each switch, continue after its
/// last occurrence. This is what per-flow next-hop entries installed from
/// the destination backwards produce.
pub fn shortcut(walk: &[SwitchId]) -> Vec<SwitchId> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < walk.len() {
        let x = walk[i];
        out.push(x);
        i = walk.iter().rposition(|&y| y == x).unwrap() + 1;
    }
    out
}

/// Sum of physical link costs along a switch sequence.
pub fn physical_cost(net: &MultiDomainNetwork, path: &[SwitchId]) -> u64 {
    path.windows(2).map(|w| net.link_cost(w[0], w[1]).expect("consecutive switches are linked")).sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleAllocation {
    /// `(switches, length, amount)` per extracted path.
    pub paths: Vec<(Vec<SwitchId>, u64, u64)>,
    /// ECG edges of each path, as ordered switch pairs.
    pub edges: Vec<Vec<(SwitchId, SwitchId)>>,
    pub total_cost: u64,
    pub satisfied: bool,
}

/// The greedy allocation loop on plaintext: shortest path of the residual
/// graph, allocate up to its bottleneck, drop exhausted (or all used) edges.
pub fn greedy_allocation(net: &MultiDomainNetwork, s: SwitchId, t: SwitchId, demand: u64, whole_path: bool) -> OracleAllocation {
    let full = EquivalentCostGraph::from_skeleton(net, EcgSkeleton::build(net, Some(s), &[t]).unwrap());
    let key = |e: usize| {
        let (a, b) = (full.nodes()[full.edges()[e].u], full.nodes()[full.edges()[e].v]);
        (a.min(b), a.max(b))
    };
    let mut cap: BTreeMap<(SwitchId, SwitchId), u64> = BTreeMap::new();
    for e in 0..full.edges().len() {
        cap.insert(key(e), full.capacities[e].unwrap_or(0));
    }
    let mut alive: BTreeMap<(SwitchId, SwitchId), bool> = cap.iter().map(|(&k, &c)| (k, c > 0)).collect();
    let mut out = OracleAllocation { paths: Vec::new(), edges: Vec::new(), total_cost: 0, satisfied: false };
    let mut residual = demand;
    while residual > 0 {
        let live = full.skeleton.retain_edges(|e| alive[&key(e)]);
        let reach = live.component(live.source.unwrap());
        let restricted = live.restrict(&reach);
        let Some(tpos) = restricted.position(t) else { return out };
        let ecg = EquivalentCostGraph::from_skeleton(net, restricted);
        let tree = ecg_tree(&ecg);
        let length = tree[tpos].unwrap().0;
        // ECG edges on the path
        let mut edges = Vec::new();
        let mut v = tpos;
        while let Some((_, Some(p))) = tree[v] {
            let (a, b) = (ecg.nodes()[p], ecg.nodes()[v]);
            edges.push((a.min(b), a.max(b)));
            v = p;
        }
        let bottleneck = edges.iter().map(|k| cap[k]).min().unwrap();
        let amount = bottleneck.min(residual);
        for k in &edges {
            *cap.get_mut(k).unwrap() -= amount;
            if cap[k] == 0 || whole_path {
                alive.insert(*k, false);
            }
        }
        out.paths.push((shortcut(&tree_path(&ecg, &tree, tpos)), length, amount));
        out.edges.push(edges);
        out.total_cost += amount * length;
        residual -= amount;
    }
    out.satisfied = true;
    out
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    /// Cleartext values inspected over all controllers.
    pub scanned: usize,
    pub frames: usize,
    pub findings: Vec<String>,
}

/// Runs a baseline or CR tree from `interior(net, 0)` with tracing on and
/// looks for other domains' intra link costs and quotes among the values
/// each controller saw in cleartext. Values the observer holds itself are
/// not findings. With `allow_source_leak`, CR's published distances of the
/// source domain's gateways (its quotes from the source) are not findings
/// either.
pub fn privacy_audit(net: &MultiDomainNetwork, seed: u64, cr: bool, allow_source_leak: bool) -> AuditReport {
    let s = interior(net, 0);
    let ecg = EquivalentCostGraph::per_flow(net, s).unwrap();
    let mut private: Vec<BTreeSet<u64>> = net.domains.iter().map(|d| d.links.iter().map(|l| l.cost).collect()).collect();
    let mut source_quotes = BTreeSet::new();
    for (e, edge) in ecg.edges().iter().enumerate() {
        if let EdgeKind::Intra { domain } = edge.kind {
            if ecg.costs[e] < net.c_max {
                private[domain].insert(ecg.costs[e]);
            }
            if [edge.u, edge.v].contains(&ecg.skeleton.source.unwrap()) {
                source_quotes.insert(ecg.costs[e]);
            }
        }
    }
    let mut c = spawn_network(net.clone(), &CryptoParams::transparent(), seed).unwrap();
    c.set_tracing(true);
    let session = c.start_session(s.domain, ecg.skeleton.clone()).unwrap();
    if cr {
        run_cr(&mut c, session, TournamentMode::HoldersOnly).unwrap();
    } else {
        let res = run_pspt(&mut c, session).unwrap();
        reveal_tree(&mut c, &res).unwrap();
    }
    let mut report = AuditReport { frames: c.trace().len(), ..Default::default() };
    for id in 0..net.domains.len() {
        let seen = c.observed_values(id);
        report.scanned += seen.len();
        for v in seen.into_iter().filter_map(|v| u64::try_from(v).ok()) {
            if private[id].contains(&v) || (cr && allow_source_leak && source_quotes.contains(&v)) {
                continue;
            }
            for d in (0..net.domains.len()).filter(|&d| d != id && private[d].contains(&v)) {
                report.findings.push(format!("controller {id} saw {v}, a private cost of domain {d}"));
            }
        }
    }
    report
}
