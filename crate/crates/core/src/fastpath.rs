//! Candidate-recommendation tree construction and shared trees.
//!
//! Every controller keeps a plaintext replica of the tree. Each round, every
//! domain proposes its best non-tree node; the source controller runs a
//! tournament of private comparisons over the proposals, asks the winner to
//! broadcast its candidate, and all replicas absorb it.
//!
//! Shared trees are rooted at the source domain's gateways over the
//! gateways-only graph, so one set of trees serves every flow that leaves
//! the source domain.

use crate::pathsetup::{intra_route, Route};
use crate::runtime::{unexpected, Cluster, Controller, ControllerId, Message};
use crate::secif::{blind, with_local};
use crate::topology::{EcgSkeleton, EdgeKind, IntraQuote, SwitchId};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};
use crate::Error;
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeEntry {
    pub dist: u64,
    /// Parent position; `None` at the root.
    pub parent: Option<usize>,
}

/// Tree over skeleton positions. Absent entries are outside the tree.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlainTree {
    pub entries: Vec<Option<TreeEntry>>,
}

impl PlainTree {
    /// Only the session source, at distance 0. Without a source the tree is empty.
    pub fn rooted(skeleton: &EcgSkeleton) -> Self {
        let mut entries = vec![None; skeleton.nodes.len()];
        if let Some(s) = skeleton.source {
            entries[s] = Some(TreeEntry { dist: 0, parent: None });
        }
        Self { entries }
    }

    pub fn in_tree(&self, v: usize) -> bool {
        self.entries.get(v).is_some_and(|e| e.is_some())
    }

    pub fn entry(&self, v: usize) -> Option<&TreeEntry> {
        self.entries.get(v)?.as_ref()
    }

    pub fn dist(&self, v: usize) -> Option<u64> {
        self.entry(v).map(|e| e.dist)
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.entry(v).and_then(|e| e.parent)
    }

    pub fn set(&mut self, v: usize, e: TreeEntry) {
        self.entries[v] = Some(e);
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Encode for PlainTree {
    fn encode(&self, w: &mut Writer) {
        w.len(self.entries.len());
        for e in &self.entries {
            match e {
                None => w.u8(0),
                Some(TreeEntry { dist, parent }) => {
                    w.u8(1);
                    w.u64(*dist);
                    w.u32(parent.map_or(u32::MAX, |p| p as u32));
                }
            }
        }
    }
}

impl Decode for PlainTree {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let n = r.len()?;
        let mut entries = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            entries.push(match r.u8()? {
                0 => None,
                1 => {
                    let dist = r.u64()?;
                    let p = r.u32()?;
                    Some(TreeEntry { dist, parent: (p != u32::MAX).then_some(p as usize) })
                }
                tag => return Err(WireError::BadTag { what: "tree entry", tag }),
            });
        }
        Ok(Self { entries })
    }
}

/// A domain's proposal `⟨v, d, h⟩`: node, tentative distance, parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub v: usize,
    pub d: u64,
    pub h: usize,
}

/// Best node of `domain` outside the tree, reached through one edge from a
/// tree node. Edge costs come from the domain's own quotes and the public
/// inter-domain costs. Ties go to the lowest node, then the lowest parent.
pub fn local_candidate(
    domain: usize,
    skeleton: &EcgSkeleton,
    quotes: &BTreeMap<usize, IntraQuote>,
    tree: &PlainTree,
) -> Option<Candidate> {
    let adj = skeleton.adjacency();
    let mut best: Option<Candidate> = None;
    for v in skeleton.domain_nodes(domain) {
        if tree.in_tree(v) {
            continue;
        }
        for &(e, u) in &adj[v] {
            let Some(du) = tree.dist(u) else { continue };
            let cost = match skeleton.edges[e].kind {
                EdgeKind::Inter { cost } => cost,
                EdgeKind::Intra { .. } => match quotes.get(&e) {
                    Some(q) => q.cost,
                    None => continue,
                },
            };
            let c = Candidate { v, d: du + cost, h: u };
            if best.is_none_or(|b| (c.d, c.v, c.h) < (b.d, b.v, b.h)) {
                best = Some(c);
            }
        }
    }
    best
}

/// Which domains take part in each tournament.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TournamentMode {
    /// Only domains holding a candidate.
    #[default]
    HoldersOnly,
    /// Every domain; those without a candidate enter the sentinel.
    AllDomains,
}

/// Decides `a < b` for the tournament values held by `a_dom` and `b_dom`.
/// Only `observer` learns the result.
///
/// One holder encrypts its value; the other subtracts it from its own under
/// encryption, blinds the difference with a random scale, offset and sign,
/// and partially decrypts it. The observer finishes the decryption and
/// learns the sign. When the observer is itself a holder it supplies its
/// value directly.
pub fn private_compare(
    cluster: &mut Cluster,
    observer: ControllerId,
    a_dom: ControllerId,
    b_dom: ControllerId,
) -> Result<bool, Error> {
    if a_dom == b_dom {
        return Err(Error::Protocol("a domain cannot be compared with itself".into()));
    }
    // x blinds, y contributes its encrypted value
    let (x, y) = if a_dom == observer { (b_dom, a_dom) } else { (a_dom, b_dom) };
    let other = if y == observer {
        let v = cluster.controller(observer).tournament.ok_or_else(|| Error::Protocol("observer has no value".into()))?;
        with_local(cluster, observer, |k, rng| k.public.add.encrypt(v as i128, rng))
    } else {
        match cluster.call(observer, y, Message::CmpFetch)? {
            Message::CmpValue { value } => value,
            other => return Err(unexpected(&other)),
        }
    };
    // d = a − b on x's side
    let other_first = y == a_dom;
    let (m, flip) = match cluster.call(observer, x, Message::CmpBlind { other, other_first })? {
        Message::CmpResult { m, flip } => (m, flip),
        other => return Err(unexpected(&other)),
    };
    let plain = with_local(cluster, observer, |k, _| k.public.add.decrypt_blinded(&m, &k.add_share))?;
    cluster.ctrl(observer).note(plain);
    cluster.metrics_mut().cmp_count += 1;
    let ge = (plain >= 0) ^ flip;
    Ok(!ge)
}

/// Finds the participant with the smallest tournament value. Scans in
/// ascending domain order; a challenger replaces the incumbent only when
/// strictly smaller.
pub(crate) fn tournament(
    cluster: &mut Cluster,
    observer: ControllerId,
    participants: &[ControllerId],
) -> Result<ControllerId, Error> {
    let (&first, rest) =
        participants.split_first().ok_or_else(|| Error::Protocol("tournament without participants".into()))?;
    let mut cmin = first;
    for &i in rest {
        if private_compare(cluster, observer, i, cmin)? {
            cmin = i;
        }
    }
    Ok(cmin)
}

fn ask(cluster: &mut Cluster, from: ControllerId, to: ControllerId, msg: Message) -> Result<Message, Error> {
    if from == to {
        cluster.local(to, msg)?.ok_or_else(|| Error::Protocol("no local reply".into()))
    } else {
        cluster.call(from, to, msg)
    }
}

/// Builds the tree of `session` round by round and returns the source
/// controller's replica.
pub fn run_cr(cluster: &mut Cluster, session: u32, mode: TournamentMode) -> Result<PlainTree, Error> {
    let started = Instant::now();
    let cs = crate::pspt::session_coordinator(cluster, session)?;
    let n_nodes = cluster.controller(cs).session(session)?.skeleton.nodes.len();
    for round in 0..n_nodes.saturating_sub(1) {
        let pad = mode == TournamentMode::AllDomains;
        let mut holders = Vec::new();
        for d in 0..cluster.len() {
            match ask(cluster, cs, d, Message::CandQuery { session, pad })? {
                Message::Flag { has } => {
                    if has {
                        holders.push(d);
                    }
                }
                other => return Err(unexpected(&other)),
            }
        }
        if holders.is_empty() {
            return Err(Error::Protocol(format!(
                "no candidates in round {} although the tree is incomplete; the graph is disconnected",
                round + 1
            )));
        }
        let participants: Vec<ControllerId> = if pad { (0..cluster.len()).collect() } else { holders };
        let winner = tournament(cluster, cs, &participants)?;
        match ask(cluster, cs, winner, Message::WinnerReq { session })? {
            Message::Ack => {}
            other => return Err(unexpected(&other)),
        }
        cluster.metrics_mut().rounds += 1;
    }
    cluster.metrics_mut().wall += started.elapsed();
    Ok(cluster.controller(cs).session(session)?.tree.clone())
}

/// Trees shared by all flows leaving one source domain: one CR session per
/// gateway of that domain, over the gateways-only graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedTrees {
    pub domain: usize,
    /// `(root gateway, session)` in gateway order.
    pub sessions: Vec<(SwitchId, u32)>,
}

pub fn build_shared_trees(cluster: &mut Cluster, domain: usize, mode: TournamentMode) -> Result<SharedTrees, Error> {
    let roots = cluster.topology().domain_gateways(domain);
    if roots.is_empty() {
        return Err(Error::Config(format!("domain {domain} has no gateways")));
    }
    let mut sessions = Vec::new();
    for g in roots {
        let skeleton = EcgSkeleton::build(cluster.topology(), Some(g), &[])?;
        if !skeleton.is_connected() {
            return Err(Error::Protocol("gateway graph is disconnected".into()));
        }
        let session = cluster.start_session(domain, skeleton)?;
        run_cr(cluster, session, mode)?;
        sessions.push((g, session));
    }
    Ok(SharedTrees { domain, sessions })
}

/// Routes one flow over shared trees. The source controller sends every
/// `(root, destination gateway)` length, partially decrypted, to the
/// destination controller, which adds its tail, keeps the minimum and
/// installs the path.
pub fn answer_flow_query(cluster: &mut Cluster, trees: &SharedTrees, source: SwitchId, dest: SwitchId) -> Result<Route, Error> {
    let (cs, ct) = (source.domain, dest.domain);
    if cs != trees.domain {
        return Err(Error::Config("source is outside the trees' domain".into()));
    }
    if cs == ct {
        return Err(Error::Config("shared trees route between different domains only".into()));
    }
    let flow = cluster.new_flow();
    let mut plain = Vec::new();
    {
        let c = cluster.controller(cs);
        let head = intra_route(&c.topo.domains[cs], source.index);
        for (i, &(root, session)) in trees.sessions.iter().enumerate() {
            let Some(to_root) = head.0[root.index] else { continue };
            let st = c.session(session)?;
            for w in st.skeleton.domain_nodes(ct) {
                if let Some(dw) = st.tree.dist(w) {
                    plain.push((i as u32, w as u32, to_root + dw));
                }
            }
        }
    }
    let lengths = with_local(cluster, cs, |k, rng| -> Result<Vec<_>, Error> {
        plain
            .iter()
            .map(|&(i, w, l)| {
                let c = k.public.add.encrypt(l as i128, rng);
                Ok((i, w, k.public.add.partial_decrypt(&k.add_share, &c)?))
            })
            .collect()
    })?;
    let sessions = trees.sessions.iter().map(|s| s.1).collect();
    let length = match cluster.call(cs, ct, Message::FlowQuery { flow, source, dest, sessions, lengths })? {
        Message::RouteStarted { length } => length,
        other => return Err(unexpected(&other)),
    };
    crate::pathsetup::finish_route(cluster, flow, source, dest, length)
}

impl Controller {
    pub(crate) fn on_cand_query(&mut self, session: u32, pad: bool) -> Result<Message, Error> {
        let id = self.id;
        let st = self.session_mut(session)?;
        let cand = local_candidate(id, &st.skeleton, &st.quotes, &st.tree);
        st.candidate = cand;
        let sentinel = st.skeleton.sentinel();
        self.tournament = match cand {
            Some(c) => Some(c.d),
            None if pad => Some(sentinel),
            None => None,
        };
        Ok(Message::Flag { has: cand.is_some() })
    }

    fn tournament_value(&self) -> Result<u64, Error> {
        self.tournament.ok_or_else(|| Error::Protocol(format!("controller {} holds no value", self.id)))
    }

    pub(crate) fn on_cmp_fetch(&mut self) -> Result<Message, Error> {
        let v = self.tournament_value()?;
        Ok(Message::CmpValue { value: self.keys.public.add.encrypt(v as i128, &mut self.rng) })
    }

    pub(crate) fn on_cmp_blind(&mut self, other: crate::crypto::AddCipher, other_first: bool) -> Result<Message, Error> {
        let key = self.keys.public.add.clone();
        let mine = key.encrypt(self.tournament_value()? as i128, &mut self.rng);
        let d = if other_first { key.sub(&other, &mine)? } else { key.sub(&mine, &other)? };
        let (m, flip) = blind(&key, &d, &mut self.rng)?;
        Ok(Message::CmpResult { m: key.partial_decrypt(&self.keys.add_share, &m)?, flip })
    }

    /// Applies this controller's candidate and announces it to the others.
    pub(crate) fn on_winner_req(&mut self, session: u32, out: &mut Vec<(ControllerId, Message)>) -> Result<(), Error> {
        let n = self.topo.domains.len();
        let id = self.id;
        let st = self.session_mut(session)?;
        let c = st.candidate.take().ok_or_else(|| Error::Protocol("winner has no candidate".into()))?;
        st.tree.set(c.v, TreeEntry { dist: c.d, parent: Some(c.h) });
        for to in (0..n).filter(|&to| to != id) {
            out.push((to, Message::WinnerBcast { session, node: c.v as u32, dist: c.d, parent: Some(c.h as u32) }));
        }
        Ok(())
    }

    pub(crate) fn on_winner_bcast(&mut self, session: u32, node: u32, dist: u64, parent: Option<u32>) -> Result<(), Error> {
        let st = self.session_mut(session)?;
        let n = st.skeleton.nodes.len();
        let (v, p) = (node as usize, parent.map(|p| p as usize));
        if v >= n || p.is_some_and(|p| p >= n || !st.tree.in_tree(p)) || st.tree.in_tree(v) {
            return Err(Error::Protocol(format!("invalid winner broadcast for node {node}")));
        }
        st.tree.set(v, TreeEntry { dist, parent: p });
        Ok(())
    }

    /// Destination side of a shared-tree query.
    pub(crate) fn on_flow_query(
        &mut self,
        flow: u64,
        source: SwitchId,
        dest: SwitchId,
        sessions: Vec<u32>,
        lengths: Vec<(u32, u32, crate::crypto::PartialDecryption)>,
        out: &mut Vec<(ControllerId, Message)>,
    ) -> Result<Message, Error> {
        if dest.domain != self.id {
            return Err(Error::Protocol("flow query sent to the wrong domain".into()));
        }
        let (tail, _) = intra_route(&self.topo.domains[self.id], dest.index);
        let mut best: Option<(u64, u32, u32)> = None;
        for (i, w, pd) in lengths {
            let l = self.keys.public.add.decrypt(&pd, &self.keys.add_share)?;
            self.note(l);
            let session = *sessions.get(i as usize).ok_or_else(|| Error::Protocol("unknown tree".into()))?;
            let st = self.session(session)?;
            let wpos = w as usize;
            if wpos >= st.skeleton.nodes.len() || st.skeleton.node_domain(wpos) != self.id || l < 0 {
                return Err(Error::Protocol(format!("bad flow query entry for node {w}")));
            }
            let Some(t) = tail[st.skeleton.nodes[wpos].index] else { continue };
            let total = l as u64 + t;
            if best.is_none_or(|b| (total, i, w) < b) {
                best = Some((total, i, w));
            }
        }
        let (total, i, w) = best.ok_or_else(|| Error::NoRoute("no destination gateway is reachable".into()))?;
        let session = sessions[i as usize];
        self.flows.entry(flow).or_default().dest = Some(dest);
        self.install_tail(flow, w as usize, session, dest)?;
        self.walk(session, flow, source, w as usize, out)?;
        Ok(Message::RouteStarted { length: Some(total) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::CryptoParams;
    use crate::runtime::spawn_network;
    use crate::topology::MultiDomainNetwork;

    fn toy1() -> (MultiDomainNetwork, SwitchId) {
        let net = MultiDomainNetwork::builtin("toy1").unwrap();
        let s = net.resolve("D1:s").unwrap();
        (net, s)
    }

    #[test]
    fn toy1_first_candidate() {
        let (net, s) = toy1();
        let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
        let quotes: BTreeMap<_, _> = crate::topology::domain_quotes(&net.domains[0], 0, &sk).into_iter().collect();
        let tree = PlainTree::rooted(&sk);
        let a = sk.position(net.resolve("D1:a").unwrap()).unwrap();
        assert_eq!(local_candidate(0, &sk, &quotes, &tree), Some(Candidate { v: a, d: 1, h: 0 }));
        // b is only reachable through a
        assert_eq!(local_candidate(1, &sk, &BTreeMap::new(), &tree), None);
    }

    #[test]
    fn absorbed_domain_has_no_candidate() {
        let (net, s) = toy1();
        let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
        let mut tree = PlainTree::rooted(&sk);
        tree.set(1, TreeEntry { dist: 1, parent: Some(0) });
        assert_eq!(local_candidate(0, &sk, &BTreeMap::new(), &tree), None);
    }

    #[test]
    fn equal_distances_pick_lowest_node() {
        let net = MultiDomainNetwork::parse(
            "cmax 20\ndomain A\nswitch s\nswitch g1\nswitch g2\nlink s g1 cost 2\nlink s g2 cost 2\n\
             domain B\nswitch h1\nswitch h2\nlink h1 h2 cost 1\n\
             interlink A:g1 B:h1 cost 1\ninterlink A:g2 B:h2 cost 1\n",
        )
        .unwrap();
        let s = net.resolve("A:s").unwrap();
        let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
        let quotes: BTreeMap<_, _> = crate::topology::domain_quotes(&net.domains[0], 0, &sk).into_iter().collect();
        let c = local_candidate(0, &sk, &quotes, &PlainTree::rooted(&sk)).unwrap();
        assert_eq!((c.v, c.d), (sk.position(net.resolve("A:g1").unwrap()).unwrap(), 2));
    }

    #[test]
    fn tree_round_trips() {
        let t = PlainTree { entries: vec![Some(TreeEntry { dist: 0, parent: None }), None, Some(TreeEntry { dist: 4, parent: Some(0) })] };
        assert_eq!(PlainTree::from_bytes(&t.to_bytes()).unwrap(), t);
    }

    #[test]
    fn private_compare_small_cases() {
        let net = MultiDomainNetwork::builtin("fig2").unwrap();
        let mut c = spawn_network(net, &CryptoParams::transparent(), 4).unwrap();
        for (a, b, want) in [(3, 5, true), (5, 5, false), (6, 2, false), (0, 1, true)] {
            c.ctrl(1).tournament = Some(a);
            c.ctrl(2).tournament = Some(b);
            c.ctrl(0).tournament = Some(b);
            assert_eq!(private_compare(&mut c, 0, 1, 2).unwrap(), want, "{a} < {b} (third party)");
            assert_eq!(private_compare(&mut c, 0, 1, 0).unwrap(), want, "{a} < {b} (observer second)");
            c.ctrl(0).tournament = Some(a);
            assert_eq!(private_compare(&mut c, 0, 0, 2).unwrap(), want, "{a} < {b} (observer first)");
        }
        assert_eq!(c.metrics_snapshot().cmp_count, 12);
    }

    #[test]
    fn toy1_cr_replicas_agree() {
        let (net, s) = toy1();
        let mut c = spawn_network(net.clone(), &CryptoParams::transparent(), 5).unwrap();
        let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
        let session = c.start_session(0, sk).unwrap();
        let t = run_cr(&mut c, session, TournamentMode::HoldersOnly).unwrap();
        let dists: Vec<_> = (0..3).map(|v| t.dist(v)).collect();
        assert_eq!(dists, vec![Some(0), Some(1), Some(3)]);
        assert_eq!(c.controller(1).tree(session), Some(&t));
        // one holder per round, so no comparisons
        assert_eq!(c.metrics_snapshot().cmp_count, 0);
        assert_eq!(c.metrics_snapshot().rounds, 2);
    }
}
