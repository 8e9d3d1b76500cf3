//! Baseline privacy-preserving shortest path tree.
//!
//! The source controller `C_s` holds every node's indicators: `f` (in-tree
//! flag, `2` outside and `2⁻¹` inside, under `E′`), `g` (distance, under
//! `E`) and `h` (parent code, under `E′`). Each of the `|S| − 1` iterations
//! adds exactly one node, the one reached by the minimum-`α` edge:
//!
//! 1. SecIf₀ computes `α` for every edge.
//! 2. Edges are visited in index order. SecIf₂ builds the update of the
//!    edge's endpoints, SecIf₁ keeps it only for the `(α, index)` minimum,
//!    and the result replaces both endpoints' indicators in place.
//!
//! After the loop the tree is revealed node by node to the owning domains.

use crate::crypto::{AddCipher, MulCipher, PartialDecryption, PublicKeys};
use crate::fastpath::TreeEntry;
use crate::runtime::{unexpected, Cluster, Controller, ControllerId, Message};
use crate::secif::{run_secif, secif0_params, secif1_params, secif2_params, with_local, OscTable, Slot};
use crate::topology::{EcgSkeleton, EdgeKind, SwitchId};
use crate::Error;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Indicators {
    pub f: MulCipher,
    pub g: AddCipher,
    pub h: MulCipher,
}

/// Harness measurements of one iteration, gathered only with tracing on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationProbe {
    /// SecIf₁ exchanges that kept their SecIf₂ update.
    pub winners: usize,
    /// Plaintext `α` of the winning edge.
    pub winning_alpha: i128,
}

#[derive(Clone, Debug)]
pub struct PsptCipherResult {
    pub session: u32,
    pub indicators: Vec<Indicators>,
    pub iterations: usize,
    pub probes: Vec<IterationProbe>,
}

/// Revealed distances and parents, grouped by the domain that learned them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RevealedTree {
    pub domains: Vec<BTreeMap<SwitchId, (u64, Option<SwitchId>)>>,
}

impl RevealedTree {
    pub fn dist(&self, s: SwitchId) -> Option<u64> {
        self.domains.get(s.domain)?.get(&s).map(|e| e.0)
    }

    pub fn parent(&self, s: SwitchId) -> Option<SwitchId> {
        self.domains.get(s.domain)?.get(&s).and_then(|e| e.1)
    }
}

pub(crate) fn coordinator_of(skeleton: &EcgSkeleton) -> Result<ControllerId, Error> {
    let s = skeleton.source.ok_or_else(|| Error::Config("session has no source".into()))?;
    Ok(skeleton.node_domain(s))
}

fn skeleton_of(cluster: &Cluster, coordinator: ControllerId, session: u32) -> Result<EcgSkeleton, Error> {
    Ok(cluster.controller(coordinator).session(session)?.skeleton.clone())
}

/// Gathers `E(d(vv′))` for every edge at the source controller. Other
/// domains encrypt their own intra quotes; `C_s` encrypts its own quotes and
/// the public inter-domain costs.
pub fn collect_encrypted_costs(cluster: &mut Cluster, session: u32, coordinator: ControllerId) -> Result<Vec<AddCipher>, Error> {
    let skeleton = skeleton_of(cluster, coordinator, session)?;
    let mut costs: Vec<Option<AddCipher>> = vec![None; skeleton.edges.len()];
    let own: Vec<(usize, u64)> = {
        let c = cluster.controller(coordinator);
        let st = c.session(session)?;
        let mut v: Vec<(usize, u64)> = st.quotes.iter().map(|(&e, q)| (e, q.cost)).collect();
        for (e, edge) in skeleton.edges.iter().enumerate() {
            if let EdgeKind::Inter { cost } = edge.kind {
                v.push((e, cost));
            }
        }
        v
    };
    with_local(cluster, coordinator, |k, rng| {
        for (e, cost) in own {
            costs[e] = Some(k.public.add.encrypt(cost as i128, rng));
        }
    });
    for d in 0..cluster.len() {
        if d == coordinator || skeleton.intra_edges(d).is_empty() {
            continue;
        }
        match cluster.call(coordinator, d, Message::CostRequest { session })? {
            Message::CostUpload { session: s, costs: upload } if s == session => {
                for (e, c) in upload {
                    let e = e as usize;
                    if e >= costs.len() || skeleton.edges[e].kind != (EdgeKind::Intra { domain: d }) {
                        return Err(Error::Protocol(format!("domain {d} uploaded a cost for edge {}", e + 1)));
                    }
                    costs[e] = Some(c);
                }
            }
            other => return Err(unexpected(&other)),
        }
    }
    costs
        .into_iter()
        .enumerate()
        .map(|(e, c)| c.ok_or_else(|| Error::Protocol(format!("missing cost ciphertext for edge {}", e + 1))))
        .collect()
}

/// Source: `(E′(2⁻¹), E(0), E′(φ))`; every other node `(E′(2), E(0), E′(φ))`.
pub fn init_indicators(
    keys: &PublicKeys,
    skeleton: &EcgSkeleton,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Indicators>, Error> {
    let source = skeleton.source.ok_or_else(|| Error::Config("source is not a significant node".into()))?;
    let cb = keys.mul.codebook();
    if skeleton.nodes.len() > cb.max_nodes() {
        return Err(Error::Config(format!("{} nodes exceed the codebook capacity", skeleton.nodes.len())));
    }
    (0..skeleton.nodes.len())
        .map(|v| {
            let flag = if v == source { cb.half() } else { cb.two() };
            Ok(Indicators {
                f: keys.mul.encrypt(&flag, rng)?,
                g: keys.add.encrypt(0, rng),
                h: keys.mul.encrypt(&cb.null_parent(), rng)?,
            })
        })
        .collect()
}

fn unpack(out: &[Slot]) -> Result<(Indicators, Indicators), Error> {
    if out.len() != 6 {
        return Err(Error::Protocol("indicator update must have six slots".into()));
    }
    let one = |o: &[Slot]| -> Result<Indicators, Error> {
        Ok(Indicators { f: o[0].as_mul()?.clone(), g: o[1].as_add()?.clone(), h: o[2].as_mul()?.clone() })
    };
    Ok((one(&out[..3])?, one(&out[3..])?))
}

/// Step 1: `α` for every edge.
pub fn compute_alphas(
    cluster: &mut Cluster,
    coordinator: ControllerId,
    skeleton: &EcgSkeleton,
    inds: &[Indicators],
    costs: &[AddCipher],
) -> Result<Vec<AddCipher>, Error> {
    let keys = cluster.public_keys().clone();
    let sentinel = skeleton.sentinel();
    let mut alphas = Vec::with_capacity(skeleton.edges.len());
    for (e, edge) in skeleton.edges.iter().enumerate() {
        let (a, b) = (&inds[edge.u], &inds[edge.v]);
        let params = with_local(cluster, coordinator, |_, rng| {
            let coin = rng.gen();
            secif0_params(&keys, &a.f, &b.f, &a.g, &b.g, &costs[e], sentinel, coin, rng)
        })?;
        alphas.push(run_secif(cluster, coordinator, &params)?[0].as_add()?.clone());
    }
    Ok(alphas)
}

/// One iteration over the indicators, updating them in place.
pub fn pspt_iteration(
    cluster: &mut Cluster,
    coordinator: ControllerId,
    skeleton: &EcgSkeleton,
    inds: &mut [Indicators],
    costs: &[AddCipher],
) -> Result<Option<IterationProbe>, Error> {
    let keys = cluster.public_keys().clone();
    let alphas = compute_alphas(cluster, coordinator, skeleton, inds, costs)?;
    let probing = !cluster.trace().is_empty() || cluster.controller(coordinator).observe;
    let mut probe = IterationProbe { winners: 0, winning_alpha: 0 };
    let m = skeleton.edges.len();
    if m < 2 {
        if let Some(edge) = skeleton.edges.first() {
            let params = with_local(cluster, coordinator, |_, rng| {
                let coin = rng.gen();
                secif2_params(&keys, &inds[edge.u], &inds[edge.v], edge.u, edge.v, &alphas[0], coin, rng)
            })?;
            let (a, b) = unpack(&run_secif(cluster, coordinator, &params)?)?;
            inds[edge.u] = a;
            inds[edge.v] = b;
            probe = IterationProbe { winners: 1, winning_alpha: cluster.inspect_add(&alphas[0]) };
        }
        return Ok(probing.then_some(probe));
    }
    let mut table = OscTable::new(alphas);
    for (k, edge) in skeleton.edges.iter().enumerate() {
        let (coin2, coin1) = with_local(cluster, coordinator, |_, rng| (rng.gen(), rng.gen()));
        let params = secif2_params(
            &keys,
            &inds[edge.u],
            &inds[edge.v],
            edge.u,
            edge.v,
            &table.alphas()[k],
            coin2,
            &mut cluster.ctrl(coordinator).rng,
        )?;
        let t_a = run_secif(cluster, coordinator, &params)?;
        let (ou, ov) = (inds[edge.u].clone(), inds[edge.v].clone());
        let tr = secif1_params(cluster, coordinator, &mut table, k, t_a, (&ou, &ov), coin1)?;
        let out = run_secif(cluster, coordinator, &tr.params)?;
        if probing && cluster.inspect_add(&tr.epsilon) == 1 {
            probe.winners += 1;
            probe.winning_alpha = cluster.inspect_add(&table.alphas()[k]);
        }
        let (a, b) = unpack(&out)?;
        inds[edge.u] = a;
        inds[edge.v] = b;
    }
    Ok(probing.then_some(probe))
}

/// Runs the full protocol for a session whose source domain coordinates.
pub fn run_pspt(cluster: &mut Cluster, session: u32) -> Result<PsptCipherResult, Error> {
    let started = Instant::now();
    let coordinator = session_coordinator(cluster, session)?;
    let skeleton = skeleton_of(cluster, coordinator, session)?;
    if !skeleton.is_connected() {
        return Err(Error::Protocol("equivalent cost graph is disconnected".into()));
    }
    let costs = collect_encrypted_costs(cluster, session, coordinator)?;
    let keys = cluster.public_keys().clone();
    let mut inds = with_local(cluster, coordinator, |_, rng| init_indicators(&keys, &skeleton, rng))?;
    let n = skeleton.nodes.len();
    let mut probes = Vec::new();
    for it in 0..n.saturating_sub(1) {
        let p = pspt_iteration(cluster, coordinator, &skeleton, &mut inds, &costs)
            .map_err(|e| Error::Protocol(format!("iteration {}: {e}", it + 1)))?;
        probes.extend(p);
        cluster.metrics_mut().rounds += 1;
    }
    cluster.metrics_mut().wall += started.elapsed();
    Ok(PsptCipherResult { session, indicators: inds, iterations: n.saturating_sub(1), probes })
}

/// The controller that opened a session: the source's domain.
pub(crate) fn session_coordinator(cluster: &Cluster, session: u32) -> Result<ControllerId, Error> {
    for c in cluster.controllers() {
        if let Ok(st) = c.session(session) {
            return coordinator_of(&st.skeleton);
        }
    }
    Err(Error::Protocol(format!("unknown session {session}")))
}

/// Sends every node's partially decrypted `(g, h)` to its owner. The
/// source domain's own nodes need a second party, so a helper supplies
/// the other partial decryption for those.
pub fn reveal_tree(cluster: &mut Cluster, result: &PsptCipherResult) -> Result<(), Error> {
    let session = result.session;
    let coordinator = session_coordinator(cluster, session)?;
    let skeleton = skeleton_of(cluster, coordinator, session)?;
    let mut own = Vec::new();
    for (v, ind) in result.indicators.iter().enumerate() {
        let owner = skeleton.node_domain(v);
        if owner == coordinator {
            own.push(v);
            continue;
        }
        let (g, h) = with_local(cluster, coordinator, |k, _| -> Result<_, Error> {
            Ok((
                k.public.add.partial_decrypt(&k.add_share, &ind.g)?,
                k.public.mul.partial_decrypt(&k.mul_share, &ind.h)?,
            ))
        })?;
        cluster.post(coordinator, owner, Message::Reveal { session, node: v as u32, g, h })?;
    }
    cluster.flush()?;
    if own.is_empty() {
        return Ok(());
    }
    let helper = cluster.choose_helper(coordinator)?;
    let g: Vec<AddCipher> = own.iter().map(|&v| result.indicators[v].g.clone()).collect();
    let h: Vec<MulCipher> = own.iter().map(|&v| result.indicators[v].h.clone()).collect();
    let (gp, hp) = match cluster.call(coordinator, helper, Message::RevealAssist { session, g, h })? {
        Message::RevealShares { g, h } if g.len() == own.len() && h.len() == own.len() => (g, h),
        other => return Err(unexpected(&other)),
    };
    let ctrl = cluster.ctrl(coordinator);
    for ((v, g), h) in own.into_iter().zip(gp).zip(hp) {
        ctrl.on_reveal(session, v as u32, g, h)?;
    }
    Ok(())
}

/// Collects what each controller learned from [`reveal_tree`].
pub fn revealed(cluster: &Cluster, session: u32) -> Result<RevealedTree, Error> {
    let mut out = RevealedTree { domains: vec![BTreeMap::new(); cluster.len()] };
    for c in cluster.controllers() {
        let st = c.session(session)?;
        for v in st.skeleton.domain_nodes(c.id()) {
            if let Some(e) = st.tree.entry(v) {
                let parent = e.parent.map(|p| st.skeleton.nodes[p]);
                out.domains[c.id()].insert(st.skeleton.nodes[v], (e.dist, parent));
            }
        }
    }
    Ok(out)
}

impl Controller {
    pub(crate) fn on_cost_request(&mut self, session: u32) -> Result<Message, Error> {
        let st = self.session(session)?;
        let mut quotes: Vec<(usize, u64)> = st.quotes.iter().map(|(&e, q)| (e, q.cost)).collect();
        if self.faults.omit_cost && !quotes.is_empty() {
            quotes.remove(0);
        }
        let key = self.keys.public.add.clone();
        let costs = quotes.into_iter().map(|(e, c)| (e as u32, key.encrypt(c as i128, &mut self.rng))).collect();
        Ok(Message::CostUpload { session, costs })
    }

    /// Finishes the decryption of a node's distance and parent.
    pub(crate) fn on_reveal(
        &mut self,
        session: u32,
        node: u32,
        g: PartialDecryption,
        h: PartialDecryption,
    ) -> Result<(), Error> {
        let keys = self.keys.public.clone();
        let dist = keys.add.decrypt(&g, &self.keys.add_share)?;
        let parent = keys.mul.codebook().decode(&keys.mul.finish(&h, &self.keys.mul_share)?)?;
        self.note(dist);
        let id = self.id;
        let st = self.session_mut(session)?;
        let v = node as usize;
        if v >= st.skeleton.nodes.len() || st.skeleton.node_domain(v) != id {
            return Err(Error::Protocol(format!("revealed node {node} is not in domain {id}")));
        }
        if dist < 0 || dist as u64 >= st.skeleton.sentinel() || parent.is_some_and(|p| p >= st.skeleton.nodes.len()) {
            return Err(Error::Protocol(format!("node {node} was not reached")));
        }
        st.tree.set(v, TreeEntry { dist: dist as u64, parent });
        Ok(())
    }

    pub(crate) fn on_reveal_assist(&mut self, g: Vec<AddCipher>, h: Vec<MulCipher>) -> Result<Message, Error> {
        let keys = &self.keys;
        let g = g.iter().map(|c| keys.public.add.partial_decrypt(&keys.add_share, c)).collect::<Result<_, _>>()?;
        let h = h.iter().map(|c| keys.public.mul.partial_decrypt(&keys.mul_share, c)).collect::<Result<_, _>>()?;
        Ok(Message::RevealShares { g, h })
    }
}
