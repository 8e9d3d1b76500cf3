use crate::crypto::{AddCipher, MulCipher, PartialDecryption};
use crate::secif::{Condition, Slot};
use crate::topology::{EcgSkeleton, SwitchId};
use crate::wire::{Encode, Reader, WireError, Writer};

/// Undirected ECG edge named by its endpoints, smaller first. Stable across
/// skeleton rebuilds, unlike positional edge indices.
pub type EdgeKey = (SwitchId, SwitchId);

pub fn edge_key(a: SwitchId, b: SwitchId) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Every message exchanged between controllers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Ack,
    /// Publishes the skeleton of a new session.
    SessionStart { session: u32, skeleton: EcgSkeleton },
    CostRequest { session: u32 },
    CostUpload { session: u32, costs: Vec<(u32, AddCipher)> },
    SecIfReq { op: u64, x: Condition, t0: PartialDecryption, t1: Vec<Slot>, t2: Vec<Slot> },
    SecIfResp { op: u64, out: Vec<Slot> },
    ScReq { op: u64, m: PartialDecryption },
    ScResp { op: u64, out: AddCipher },
    Reveal { session: u32, node: u32, g: PartialDecryption, h: PartialDecryption },
    /// Asks a helper to partially decrypt the source domain's own indicators.
    RevealAssist { session: u32, g: Vec<AddCipher>, h: Vec<MulCipher> },
    RevealShares { g: Vec<PartialDecryption>, h: Vec<PartialDecryption> },
    CandQuery { session: u32, pad: bool },
    Flag { has: bool },
    CmpFetch,
    CmpValue { value: AddCipher },
    CmpBlind { other: AddCipher, other_first: bool },
    CmpResult { m: PartialDecryption, flip: bool },
    WinnerReq { session: u32 },
    WinnerBcast { session: u32, node: u32, dist: u64, parent: Option<u32> },
    RouteReq { session: u32, flow: u64, source: SwitchId, dest: SwitchId, report: bool },
    RouteStarted { length: Option<u64> },
    FlowQuery { flow: u64, source: SwitchId, dest: SwitchId, sessions: Vec<u32>, lengths: Vec<(u32, u32, PartialDecryption)> },
    InstallReq { session: u32, flow: u64, source: SwitchId, switch: SwitchId, next: SwitchId },
    InstallAck { flow: u64 },
    CapInit { session: u32, alloc: u32 },
    CapQuery { alloc: u32, flow: u64 },
    CapReveal,
    CapValue { value: u64 },
    Allocate { alloc: u32, flow: u64, amount: u64, whole_path: bool },
    Deleted { edges: Vec<EdgeKey> },
}

const NO_PARENT: u32 = u32::MAX;

impl Message {
    pub fn kind(&self) -> u16 {
        match self {
            Message::Ack => 1,
            Message::SessionStart { .. } => 2,
            Message::CostRequest { .. } => 3,
            Message::CostUpload { .. } => 4,
            Message::SecIfReq { .. } => 5,
            Message::SecIfResp { .. } => 6,
            Message::ScReq { .. } => 7,
            Message::ScResp { .. } => 8,
            Message::Reveal { .. } => 9,
            Message::RevealAssist { .. } => 10,
            Message::RevealShares { .. } => 11,
            Message::CandQuery { .. } => 12,
            Message::Flag { .. } => 13,
            Message::CmpFetch => 14,
            Message::CmpValue { .. } => 15,
            Message::CmpBlind { .. } => 16,
            Message::CmpResult { .. } => 17,
            Message::WinnerReq { .. } => 18,
            Message::WinnerBcast { .. } => 19,
            Message::RouteReq { .. } => 20,
            Message::RouteStarted { .. } => 21,
            Message::FlowQuery { .. } => 22,
            Message::InstallReq { .. } => 23,
            Message::InstallAck { .. } => 24,
            Message::CapInit { .. } => 25,
            Message::CapQuery { .. } => 26,
            Message::CapReveal => 27,
            Message::CapValue { .. } => 28,
            Message::Allocate { .. } => 29,
            Message::Deleted { .. } => 30,
        }
    }

    pub fn kind_name(kind: u16) -> &'static str {
        match kind {
            1 => "ACK",
            2 => "SESSION_START",
            3 => "COST_REQ",
            4 => "COST_UPLOAD",
            5 => "SECIF_REQ",
            6 => "SECIF_RESP",
            7 => "SC_REQ",
            8 => "SC_RESP",
            9 => "REVEAL",
            10 => "REVEAL_ASSIST",
            11 => "REVEAL_SHARES",
            12 => "CAND_QUERY",
            13 => "FLAG",
            14 => "CMP_FETCH",
            15 => "CMP_VALUE",
            16 => "CMP_REQ",
            17 => "CMP_RESP",
            18 => "WINNER_REQ",
            19 => "WINNER_BCAST",
            20 => "ROUTE_REQ",
            21 => "ROUTE_STARTED",
            22 => "FLOW_QUERY",
            23 => "INSTALL_REQ",
            24 => "INSTALL_ACK",
            25 => "CAP_INIT",
            26 => "CAP_QUERY",
            27 => "CAP_REVEAL",
            28 => "CAP_VALUE",
            29 => "ALLOCATE",
            30 => "DELETED",
            _ => "UNKNOWN",
        }
    }

    /// Cleartext quantities (distances, lengths, capacities) carried outside
    /// ciphertexts. Identifiers are not quantities and are left out.
    pub fn disclosed_values(&self) -> Vec<u64> {
        match self {
            Message::WinnerBcast { dist, .. } => vec![*dist],
            Message::RouteStarted { length: Some(l) } => vec![*l],
            Message::CapValue { value } => vec![*value],
            Message::Allocate { amount, .. } => vec![*amount],
            Message::SessionStart { skeleton, .. } => skeleton
                .edges
                .iter()
                .filter_map(|e| match e.kind {
                    crate::topology::EdgeKind::Inter { cost } => Some(cost),
                    _ => None,
                })
                .chain([skeleton.c_max])
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn put_opt_u32(w: &mut Writer, v: Option<u32>) {
    w.u32(v.unwrap_or(NO_PARENT));
}

fn get_opt_u32(r: &mut Reader<'_>) -> Result<Option<u32>, WireError> {
    let v = r.u32()?;
    Ok((v != NO_PARENT).then_some(v))
}

impl Encode for Message {
    fn encode(&self, w: &mut Writer) {
        match self {
            Message::Ack | Message::CmpFetch | Message::CapReveal => {}
            Message::SessionStart { session, skeleton } => {
                w.u32(*session);
                w.put(skeleton);
            }
            Message::CostRequest { session } => w.u32(*session),
            Message::CostUpload { session, costs } => {
                w.u32(*session);
                w.len(costs.len());
                for (e, c) in costs {
                    w.u32(*e);
                    w.put(c);
                }
            }
            Message::SecIfReq { op, x, t0, t1, t2 } => {
                w.u64(*op);
                w.put(x);
                w.put(t0);
                w.seq(t1);
                w.seq(t2);
            }
            Message::SecIfResp { op, out } => {
                w.u64(*op);
                w.seq(out);
            }
            Message::ScReq { op, m } => {
                w.u64(*op);
                w.put(m);
            }
            Message::ScResp { op, out } => {
                w.u64(*op);
                w.put(out);
            }
            Message::Reveal { session, node, g, h } => {
                w.u32(*session);
                w.u32(*node);
                w.put(g);
                w.put(h);
            }
            Message::RevealAssist { session, g, h } => {
                w.u32(*session);
                w.seq(g);
                w.seq(h);
            }
            Message::RevealShares { g, h } => {
                w.seq(g);
                w.seq(h);
            }
            Message::CandQuery { session, pad } => {
                w.u32(*session);
                w.bool(*pad);
            }
            Message::Flag { has } => w.bool(*has),
            Message::CmpValue { value } => w.put(value),
            Message::CmpBlind { other, other_first } => {
                w.put(other);
                w.bool(*other_first);
            }
            Message::CmpResult { m, flip } => {
                w.put(m);
                w.bool(*flip);
            }
            Message::WinnerReq { session } => w.u32(*session),
            Message::WinnerBcast { session, node, dist, parent } => {
                w.u32(*session);
                w.u32(*node);
                w.u64(*dist);
                put_opt_u32(w, *parent);
            }
            Message::RouteReq { session, flow, source, dest, report } => {
                w.u32(*session);
                w.u64(*flow);
                w.put(source);
                w.put(dest);
                w.bool(*report);
            }
            Message::RouteStarted { length } => match length {
                Some(l) => {
                    w.bool(true);
                    w.u64(*l);
                }
                None => w.bool(false),
            },
            Message::FlowQuery { flow, source, dest, sessions, lengths } => {
                w.u64(*flow);
                w.put(source);
                w.put(dest);
                w.seq(sessions);
                w.len(lengths.len());
                for (tree, gw, pd) in lengths {
                    w.u32(*tree);
                    w.u32(*gw);
                    w.put(pd);
                }
            }
            Message::InstallReq { session, flow, source, switch, next } => {
                w.u32(*session);
                w.u64(*flow);
                w.put(source);
                w.put(switch);
                w.put(next);
            }
            Message::InstallAck { flow } => w.u64(*flow),
            Message::CapInit { session, alloc } => {
                w.u32(*session);
                w.u32(*alloc);
            }
            Message::CapQuery { alloc, flow } => {
                w.u32(*alloc);
                w.u64(*flow);
            }
            Message::CapValue { value } => w.u64(*value),
            Message::Allocate { alloc, flow, amount, whole_path } => {
                w.u32(*alloc);
                w.u64(*flow);
                w.u64(*amount);
                w.bool(*whole_path);
            }
            Message::Deleted { edges } => {
                w.len(edges.len());
                for (a, b) in edges {
                    w.put(a);
                    w.put(b);
                }
            }
        }
    }
}

impl Message {
    /// Decodes a payload of the given kind.
    pub fn decode_kind(kind: u16, payload: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(payload);
        let msg = match kind {
            1 => Message::Ack,
            2 => Message::SessionStart { session: r.u32()?, skeleton: r.get()? },
            3 => Message::CostRequest { session: r.u32()? },
            4 => {
                let session = r.u32()?;
                let n = r.len()?;
                let costs = (0..n).map(|_| Ok((r.u32()?, r.get()?))).collect::<Result<_, WireError>>()?;
                Message::CostUpload { session, costs }
            }
            5 => Message::SecIfReq { op: r.u64()?, x: r.get()?, t0: r.get()?, t1: r.seq()?, t2: r.seq()? },
            6 => Message::SecIfResp { op: r.u64()?, out: r.seq()? },
            7 => Message::ScReq { op: r.u64()?, m: r.get()? },
            8 => Message::ScResp { op: r.u64()?, out: r.get()? },
            9 => Message::Reveal { session: r.u32()?, node: r.u32()?, g: r.get()?, h: r.get()? },
            10 => Message::RevealAssist { session: r.u32()?, g: r.seq()?, h: r.seq()? },
            11 => Message::RevealShares { g: r.seq()?, h: r.seq()? },
            12 => Message::CandQuery { session: r.u32()?, pad: r.bool()? },
            13 => Message::Flag { has: r.bool()? },
            14 => Message::CmpFetch,
            15 => Message::CmpValue { value: r.get()? },
            16 => Message::CmpBlind { other: r.get()?, other_first: r.bool()? },
            17 => Message::CmpResult { m: r.get()?, flip: r.bool()? },
            18 => Message::WinnerReq { session: r.u32()? },
            19 => Message::WinnerBcast {
                session: r.u32()?,
                node: r.u32()?,
                dist: r.u64()?,
                parent: get_opt_u32(&mut r)?,
            },
            20 => Message::RouteReq {
                session: r.u32()?,
                flow: r.u64()?,
                source: r.get()?,
                dest: r.get()?,
                report: r.bool()?,
            },
            21 => Message::RouteStarted { length: if r.bool()? { Some(r.u64()?) } else { None } },
            22 => {
                let flow = r.u64()?;
                let source = r.get()?;
                let dest = r.get()?;
                let sessions = r.seq()?;
                let n = r.len()?;
                let lengths =
                    (0..n).map(|_| Ok((r.u32()?, r.u32()?, r.get()?))).collect::<Result<_, WireError>>()?;
                Message::FlowQuery { flow, source, dest, sessions, lengths }
            }
            23 => Message::InstallReq {
                session: r.u32()?,
                flow: r.u64()?,
                source: r.get()?,
                switch: r.get()?,
                next: r.get()?,
            },
            24 => Message::InstallAck { flow: r.u64()? },
            25 => Message::CapInit { session: r.u32()?, alloc: r.u32()? },
            26 => Message::CapQuery { alloc: r.u32()?, flow: r.u64()? },
            27 => Message::CapReveal,
            28 => Message::CapValue { value: r.u64()? },
            29 => Message::Allocate { alloc: r.u32()?, flow: r.u64()?, amount: r.u64()?, whole_path: r.bool()? },
            30 => {
                let n = r.len()?;
                let edges = (0..n).map(|_| Ok((r.get()?, r.get()?))).collect::<Result<_, WireError>>()?;
                Message::Deleted { edges }
            }
            other => return Err(WireError::BadTag { what: "message kind", tag: other.min(255) as u8 }),
        };
        r.finish()?;
        Ok(msg)
    }
}
