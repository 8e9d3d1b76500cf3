use super::message::{EdgeKey, Message};
use super::{unexpected, ControllerId};
use crate::crypto::PartyKeys;
use crate::fastpath::{Candidate, PlainTree};
use crate::pathsetup::ForwardingTable;
use crate::topology::{EcgSkeleton, IntraQuote, MultiDomainNetwork};
use crate::Error;
use rand_chacha::ChaCha20Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Misbehaviour switches for failure tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Leave one ciphertext out of the cost upload.
    pub omit_cost: bool,
}

/// What a controller knows about one protocol session.
#[derive(Clone, Debug)]
pub(crate) struct SessionState {
    pub skeleton: EcgSkeleton,
    /// Quotes for this domain's intra edges, keyed by edge position.
    pub quotes: BTreeMap<usize, IntraQuote>,
    /// CR replica, or this domain's revealed entries in the baseline.
    pub tree: PlainTree,
    pub candidate: Option<Candidate>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct FlowRecord {
    /// ECG edges of the flow's path that touch this domain.
    pub edges: BTreeSet<EdgeKey>,
    pub complete: bool,
    /// Set on the destination's controller; no entry is installed there.
    pub dest: Option<crate::topology::SwitchId>,
}

/// One domain controller. It reads only its own domain from the topology,
/// plus public inter-domain links.
pub struct Controller {
    pub(crate) id: ControllerId,
    pub(crate) keys: PartyKeys,
    pub(crate) topo: Arc<MultiDomainNetwork>,
    pub(crate) rng: ChaCha20Rng,
    pub(crate) sessions: BTreeMap<u32, SessionState>,
    pub(crate) forwarding: ForwardingTable,
    pub(crate) flows: BTreeMap<u64, FlowRecord>,
    /// Value this controller contributes to the running private tournament.
    pub(crate) tournament: Option<u64>,
    pub(crate) capacities: BTreeMap<u32, BTreeMap<EdgeKey, u64>>,
    pub(crate) observe: bool,
    pub(crate) observed: Vec<i128>,
    pub(crate) faults: Faults,
    /// Secure-If requests served as helper: `(dt0 == x, total)`.
    pub(crate) secif_seen: (u64, u64),
}

impl Controller {
    pub(crate) fn new(id: ControllerId, keys: PartyKeys, topo: Arc<MultiDomainNetwork>, rng: ChaCha20Rng) -> Self {
        Self {
            id,
            keys,
            topo,
            rng,
            sessions: BTreeMap::new(),
            forwarding: ForwardingTable::new(id),
            flows: BTreeMap::new(),
            tournament: None,
            capacities: BTreeMap::new(),
            observe: false,
            observed: Vec::new(),
            faults: Faults::default(),
            secif_seen: (0, 0),
        }
    }

    pub fn id(&self) -> ControllerId {
        self.id
    }

    pub fn forwarding(&self) -> &ForwardingTable {
        &self.forwarding
    }

    /// Tree entries known to this controller for a session.
    pub fn tree(&self, session: u32) -> Option<&PlainTree> {
        self.sessions.get(&session).map(|s| &s.tree)
    }

    /// Remaining capacities of the edges this controller owns in a
    /// bandwidth allocation.
    pub fn capacities(&self, alloc: u32) -> Option<&BTreeMap<EdgeKey, u64>> {
        self.capacities.get(&alloc)
    }

    /// Secure-If requests served as helper: how many decrypted `t0` equal
    /// to `x`, out of how many.
    pub fn secif_condition_stats(&self) -> (u64, u64) {
        self.secif_seen
    }

    pub(crate) fn note(&mut self, v: i128) {
        if self.observe {
            self.observed.push(v);
        }
    }

    pub(crate) fn session(&self, session: u32) -> Result<&SessionState, Error> {
        self.sessions.get(&session).ok_or_else(|| Error::Protocol(format!("unknown session {session}")))
    }

    pub(crate) fn session_mut(&mut self, session: u32) -> Result<&mut SessionState, Error> {
        self.sessions.get_mut(&session).ok_or_else(|| Error::Protocol(format!("unknown session {session}")))
    }

    /// Installs a session's skeleton and computes this domain's quotes.
    pub(crate) fn start_session(&mut self, session: u32, skeleton: EcgSkeleton) {
        let domain = &self.topo.domains[self.id];
        let quotes = crate::topology::domain_quotes(domain, self.id, &skeleton).into_iter().collect();
        let tree = PlainTree::rooted(&skeleton);
        self.sessions.insert(session, SessionState { skeleton, quotes, tree, candidate: None });
    }

    pub(crate) fn handle(
        &mut self,
        from: ControllerId,
        msg: Message,
        out: &mut Vec<(ControllerId, Message)>,
    ) -> Result<Option<Message>, Error> {
        let reply = match msg {
            Message::SessionStart { session, skeleton } => {
                self.start_session(session, skeleton);
                Message::Ack
            }
            Message::CostRequest { session } => self.on_cost_request(session)?,
            Message::SecIfReq { op, x, t0, t1, t2 } => self.on_secif(op, x, t0, t1, t2)?,
            Message::ScReq { op, m } => self.on_sc(op, m)?,
            Message::Reveal { session, node, g, h } => {
                self.on_reveal(session, node, g, h)?;
                return Ok(None);
            }
            Message::RevealAssist { g, h, .. } => self.on_reveal_assist(g, h)?,
            Message::CandQuery { session, pad } => self.on_cand_query(session, pad)?,
            Message::CmpFetch => self.on_cmp_fetch()?,
            Message::CmpBlind { other, other_first } => self.on_cmp_blind(other, other_first)?,
            Message::WinnerReq { session } => {
                self.on_winner_req(session, out)?;
                Message::Ack
            }
            Message::WinnerBcast { session, node, dist, parent } => {
                self.on_winner_bcast(session, node, dist, parent)?;
                return Ok(None);
            }
            Message::RouteReq { session, flow, source, dest, report } => {
                self.on_route_req(session, flow, source, dest, report, out)?
            }
            Message::FlowQuery { flow, source, dest, sessions, lengths } => {
                self.on_flow_query(flow, source, dest, sessions, lengths, out)?
            }
            Message::InstallReq { session, flow, source, switch, next } => {
                self.on_install_req(session, flow, source, switch, next, out)?;
                out.push((from, Message::InstallAck { flow }));
                return Ok(None);
            }
            Message::InstallAck { .. } => return Ok(None),
            Message::CapInit { session, alloc } => self.on_cap_init(session, alloc)?,
            Message::CapQuery { alloc, flow } => self.on_cap_query(alloc, flow)?,
            Message::CapReveal => self.on_cap_reveal()?,
            Message::Allocate { alloc, flow, amount, whole_path } => {
                self.on_allocate(alloc, flow, amount, whole_path)?
            }
            other => return Err(unexpected(&other)),
        };
        Ok(Some(reply))
    }
}
