//! Controllers and the in-process transport connecting them.
//!
//! Delivery is deterministic: a single FIFO queue, handlers run one message
//! at a time, and every controller draws randomness from its own seeded
//! stream. Each frame carries a fixed 16-byte header
//! (`from u32, to u32, kind u16, reserved u16, len u32`) that is counted in
//! the byte metrics.
//!
//! Protocol drivers act on behalf of one controller (usually the source
//! domain's) and talk to the others with [`Cluster::call`]. Handlers may
//! queue further one-way messages; those are delivered before `call` returns.

mod controller;
mod message;
mod metrics;

pub use controller::{Controller, Faults};
pub use message::{edge_key, EdgeKey, Message};
pub use metrics::{write_csv, ControllerMetrics, CsvRow, Metrics};

use crate::crypto::{keygen, CryptoParams, PublicKeys};
use crate::topology::{EcgSkeleton, MultiDomainNetwork};
use crate::wire::{Encode, WireError};
use crate::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::VecDeque;
use std::sync::Arc;

/// Controller index; controller `i` governs domain `i`.
pub type ControllerId = usize;

pub const HEADER_BYTES: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub from: ControllerId,
    pub to: ControllerId,
    pub kind: u16,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn size(&self) -> usize {
        self.payload.len()
    }

    /// Header plus payload, as counted on the wire.
    pub fn frame(&self) -> Vec<u8> {
        let mut f = Vec::with_capacity(HEADER_BYTES + self.payload.len());
        f.extend_from_slice(&(self.from as u32).to_be_bytes());
        f.extend_from_slice(&(self.to as u32).to_be_bytes());
        f.extend_from_slice(&self.kind.to_be_bytes());
        f.extend_from_slice(&0u16.to_be_bytes());
        f.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        f.extend_from_slice(&self.payload);
        f
    }

    pub fn parse_frame(frame: &[u8]) -> Result<Self, WireError> {
        if frame.len() < HEADER_BYTES {
            return Err(WireError::Truncated { wanted: HEADER_BYTES, left: frame.len() });
        }
        let u32_at = |i: usize| u32::from_be_bytes(frame[i..i + 4].try_into().unwrap());
        let len = u32_at(12) as usize;
        if frame.len() - HEADER_BYTES != len {
            return Err(WireError::Malformed("frame length"));
        }
        Ok(Self {
            from: u32_at(0) as usize,
            to: u32_at(4) as usize,
            kind: u16::from_be_bytes([frame[8], frame[9]]),
            payload: frame[HEADER_BYTES..].to_vec(),
        })
    }
}

/// How a Secure-If coordinator picks its helper.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HelperPolicy {
    /// Uniform over the other controllers, per operation, from a seeded stream.
    #[default]
    Random,
    Fixed(ControllerId),
}

impl HelperPolicy {
    /// `random` or `fixed:<domain name or index>`.
    pub fn parse(text: &str, net: &MultiDomainNetwork) -> Result<Self, Error> {
        if text == "random" {
            return Ok(HelperPolicy::Random);
        }
        let id = text
            .strip_prefix("fixed:")
            .ok_or_else(|| Error::Config(format!("unknown helper policy `{text}`")))?;
        let idx = net
            .domain_index(id)
            .or_else(|| id.parse::<usize>().ok().filter(|&i| i < net.domains.len()))
            .ok_or_else(|| Error::Config(format!("unknown helper controller `{id}`")))?;
        Ok(HelperPolicy::Fixed(idx))
    }
}

/// All controllers of one deployment plus the transport between them.
pub struct Cluster {
    topo: Arc<MultiDomainNetwork>,
    public: PublicKeys,
    controllers: Vec<Controller>,
    queue: VecDeque<Envelope>,
    metrics: Metrics,
    trace: Option<Vec<Envelope>>,
    inbox_values: Vec<Vec<u64>>,
    helper: HelperPolicy,
    helper_rng: ChaCha20Rng,
    down: Vec<bool>,
    next_session: u32,
    next_flow: u64,
    next_op: u64,
}

/// Generates keys and starts one controller per domain.
pub fn spawn_network(network: MultiDomainNetwork, params: &CryptoParams, seed: u64) -> Result<Cluster, Error> {
    let n = network.domains.len();
    if n < 2 {
        return Err(Error::Config("threshold decryption needs at least two domains".into()));
    }
    // v_s, v_t and every gateway can be significant
    let sentinel = network.c_max * (network.gateways().len() as u64 + 2) + 1;
    if params.plaintext_bound < sentinel {
        return Err(Error::Config(format!(
            "plaintext bound {} is below the sentinel {sentinel} of this network",
            params.plaintext_bound
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (public, keys) = keygen(params, n, &mut rng).map_err(|e| Error::Config(format!("key generation: {e}")))?;
    let topo = Arc::new(network);
    let controllers = keys
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let mut r = ChaCha20Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            Controller::new(i, k, Arc::clone(&topo), r)
        })
        .collect();
    let mut helper_rng = ChaCha20Rng::seed_from_u64(seed);
    helper_rng.set_stream(u64::MAX);
    Ok(Cluster {
        topo,
        public,
        controllers,
        queue: VecDeque::new(),
        metrics: Metrics::new(n),
        trace: None,
        inbox_values: vec![Vec::new(); n],
        helper: HelperPolicy::Random,
        helper_rng,
        down: vec![false; n],
        next_session: 1,
        next_flow: 1,
        next_op: 1,
    })
}

impl Cluster {
    pub fn topology(&self) -> &MultiDomainNetwork {
        &self.topo
    }

    pub fn public_keys(&self) -> &PublicKeys {
        &self.public
    }

    pub fn len(&self) -> usize {
        self.controllers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controllers.is_empty()
    }

    pub fn controller(&self, id: ControllerId) -> &Controller {
        &self.controllers[id]
    }

    pub fn controllers(&self) -> &[Controller] {
        &self.controllers
    }

    pub(crate) fn ctrl(&mut self, id: ControllerId) -> &mut Controller {
        &mut self.controllers[id]
    }

    pub fn set_helper_policy(&mut self, policy: HelperPolicy) {
        self.helper = policy;
    }

    pub fn helper_policy(&self) -> HelperPolicy {
        self.helper
    }

    /// Records every frame and every plaintext a controller decrypts.
    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
        for c in &mut self.controllers {
            c.observe = on;
        }
    }

    pub fn trace(&self) -> &[Envelope] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Quantities a controller has seen in cleartext: message fields outside
    /// ciphertexts and values it decrypted itself. Requires tracing.
    pub fn observed_values(&self, id: ControllerId) -> Vec<i128> {
        let mut v: Vec<i128> = self.inbox_values[id].iter().map(|&x| x as i128).collect();
        v.extend_from_slice(&self.controllers[id].observed);
        v
    }

    /// Marks a controller unreachable.
    pub fn set_down(&mut self, id: ControllerId, down: bool) {
        self.down[id] = down;
    }

    pub fn set_faults(&mut self, id: ControllerId, faults: Faults) {
        self.controllers[id].faults = faults;
    }

    pub fn metrics_snapshot(&self) -> Metrics {
        self.metrics.clone()
    }

    pub(crate) fn metrics_mut(&mut self) -> &mut Metrics {
        &mut self.metrics
    }

    pub(crate) fn new_session(&mut self) -> u32 {
        let s = self.next_session;
        self.next_session += 1;
        s
    }

    pub(crate) fn new_flow(&mut self) -> u64 {
        let f = self.next_flow;
        self.next_flow += 1;
        f
    }

    pub(crate) fn new_op(&mut self) -> u64 {
        let o = self.next_op;
        self.next_op += 1;
        o
    }

    pub(crate) fn choose_helper(&mut self, coordinator: ControllerId) -> Result<ControllerId, Error> {
        match self.helper {
            HelperPolicy::Fixed(h) if h == coordinator => {
                Err(Error::Config(format!("helper {h} cannot coordinate its own Secure-If")))
            }
            HelperPolicy::Fixed(h) if h >= self.len() => Err(Error::Config(format!("no controller {h}"))),
            HelperPolicy::Fixed(h) => Ok(h),
            HelperPolicy::Random => {
                let k = self.helper_rng.gen_range(0..self.len() - 1);
                Ok(if k >= coordinator { k + 1 } else { k })
            }
        }
    }

    /// Harness view: decrypts with the shares of controllers 0 and 1.
    /// Protocol code never calls this.
    pub fn inspect_add(&self, c: &crate::crypto::AddCipher) -> i128 {
        let (a, b) = (&self.controllers[0].keys, &self.controllers[1].keys);
        let pd = self.public.add.partial_decrypt(&a.add_share, c).expect("valid ciphertext");
        self.public.add.decrypt(&pd, &b.add_share).expect("plaintext in range")
    }

    /// Harness view of an `E′` plaintext, see [`Cluster::inspect_add`].
    pub fn inspect_mul(&self, c: &crate::crypto::MulCipher) -> num_bigint::BigUint {
        let (a, b) = (&self.controllers[0].keys, &self.controllers[1].keys);
        let pd = self.public.mul.partial_decrypt(&a.mul_share, c).expect("valid ciphertext");
        self.public.mul.finish(&pd, &b.mul_share).expect("matching key")
    }

    fn check_peer(&self, to: ControllerId) -> Result<(), Error> {
        if to >= self.controllers.len() {
            return Err(Error::Transport(format!("unknown recipient {to}")));
        }
        if self.down[to] {
            return Err(Error::Transport(format!("controller {to} is unreachable")));
        }
        Ok(())
    }

    fn envelope(from: ControllerId, to: ControllerId, msg: &Message) -> Envelope {
        Envelope { from, to, kind: msg.kind(), payload: msg.to_bytes() }
    }

    /// Counts a frame and decodes it as the receiver would. Messages a
    /// controller addresses to itself never touch the wire.
    fn transmit(&mut self, env: Envelope) -> Result<Message, Error> {
        if env.from == env.to {
            return Ok(Message::decode_kind(env.kind, &env.payload)?);
        }
        let bytes = (HEADER_BYTES + env.size()) as u64;
        let s = &mut self.metrics.controllers[env.from];
        s.bytes_sent += bytes;
        s.messages_sent += 1;
        let r = &mut self.metrics.controllers[env.to];
        r.bytes_received += bytes;
        r.messages_received += 1;
        let msg = Message::decode_kind(env.kind, &env.payload)?;
        if let Some(t) = &mut self.trace {
            self.inbox_values[env.to].extend(msg.disclosed_values());
            t.push(env);
        }
        Ok(msg)
    }

    fn deliver(&mut self, env: Envelope) -> Result<Option<Message>, Error> {
        let (from, to) = (env.from, env.to);
        let msg = self.transmit(env)?;
        let mut outbox = Vec::new();
        let reply = self.controllers[to].handle(from, msg, &mut outbox)?;
        for (dst, m) in outbox {
            self.post(to, dst, m)?;
        }
        Ok(reply)
    }

    /// Queues a one-way message.
    pub fn post(&mut self, from: ControllerId, to: ControllerId, msg: Message) -> Result<(), Error> {
        self.check_peer(to)?;
        self.queue.push_back(Self::envelope(from, to, &msg));
        Ok(())
    }

    /// Delivers queued messages until the network is quiescent.
    pub fn flush(&mut self) -> Result<(), Error> {
        while let Some(env) = self.queue.pop_front() {
            if let Some(reply) = self.deliver(env)? {
                return Err(Error::Protocol(format!("unexpected reply {:?} to a one-way message", reply.kind())));
            }
        }
        Ok(())
    }

    /// Request/response exchange from `from` to `to`.
    pub fn call(&mut self, from: ControllerId, to: ControllerId, msg: Message) -> Result<Message, Error> {
        if from == to {
            return Err(Error::Protocol("controller called itself".into()));
        }
        self.check_peer(to)?;
        self.flush()?;
        let kind = msg.kind();
        let reply = self
            .deliver(Self::envelope(from, to, &msg))?
            .ok_or_else(|| Error::Protocol(format!("no reply to {}", Message::kind_name(kind))))?;
        let reply = self.transmit(Self::envelope(to, from, &reply))?;
        self.flush()?;
        Ok(reply)
    }

    /// Runs `id`'s handler for a request it makes of itself.
    pub(crate) fn local(&mut self, id: ControllerId, msg: Message) -> Result<Option<Message>, Error> {
        self.flush()?;
        let reply = self.deliver(Self::envelope(id, id, &msg))?;
        self.flush()?;
        Ok(reply)
    }

    /// Opens a session coordinated by `coordinator` and publishes its
    /// skeleton to every controller.
    pub fn start_session(&mut self, coordinator: ControllerId, skeleton: EcgSkeleton) -> Result<u32, Error> {
        let session = self.new_session();
        self.controllers[coordinator].start_session(session, skeleton.clone());
        self.broadcast(coordinator, &Message::SessionStart { session, skeleton })?;
        Ok(session)
    }

    /// Sends `msg` from `from` to every other controller, in id order,
    /// expecting an acknowledgement from each.
    pub fn broadcast(&mut self, from: ControllerId, msg: &Message) -> Result<(), Error> {
        for to in 0..self.len() {
            if to != from {
                match self.call(from, to, msg.clone())? {
                    Message::Ack => {}
                    other => return Err(unexpected(&other)),
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn unexpected(msg: &Message) -> Error {
    Error::Protocol(format!("unexpected {} message", Message::kind_name(msg.kind())))
}
