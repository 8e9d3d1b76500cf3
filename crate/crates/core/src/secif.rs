//! Secure-If and the comparison subprotocols built on it.
//!
//! A Secure-If is one round trip between a coordinator and a helper. The
//! coordinator sends a partial decryption of `t0` together with two
//! equally shaped ciphertext tuples; the helper finishes the decryption,
//! compares the plaintext with `x`, and returns a re-randomization of `t1`
//! on a match and of `t2` otherwise. Which tuple means what is hidden from
//! the helper by a coin the coordinator flips while building the request.
//!
//! `sc` compares two encrypted integers with a blinded difference: the
//! helper only sees `r·d + u` or `-r·d - 1 - u` for random `r ≥ 1`,
//! `0 ≤ u < r` and a hidden sign coin.

use crate::crypto::{AddCipher, AddKey, MulCipher, PartyKeys, PublicKeys};
use crate::pspt::Indicators;
use crate::runtime::{unexpected, Cluster, Controller, ControllerId, Message};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};
use crate::Error;
use num_bigint::BigUint;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

/// A ciphertext tagged with its scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Add(AddCipher),
    Mul(MulCipher),
}

impl Slot {
    fn same_scheme(&self, other: &Slot) -> bool {
        matches!((self, other), (Slot::Add(_), Slot::Add(_)) | (Slot::Mul(_), Slot::Mul(_)))
    }

    pub fn as_add(&self) -> Result<&AddCipher, Error> {
        match self {
            Slot::Add(c) => Ok(c),
            Slot::Mul(_) => Err(Error::Protocol("expected an additive ciphertext".into())),
        }
    }

    pub fn as_mul(&self) -> Result<&MulCipher, Error> {
        match self {
            Slot::Mul(c) => Ok(c),
            Slot::Add(_) => Err(Error::Protocol("expected a multiplicative ciphertext".into())),
        }
    }

    fn rerandomize(&self, keys: &PublicKeys, rng: &mut ChaCha20Rng) -> Result<Slot, Error> {
        Ok(match self {
            Slot::Add(c) => Slot::Add(keys.add.rerandomize(c, rng)?),
            Slot::Mul(c) => Slot::Mul(keys.mul.rerandomize(c, rng)?),
        })
    }
}

impl Encode for Slot {
    fn encode(&self, w: &mut Writer) {
        match self {
            Slot::Add(c) => {
                w.u8(0);
                w.put(c);
            }
            Slot::Mul(c) => {
                w.u8(1);
                w.put(c);
            }
        }
    }
}

impl Decode for Slot {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8()? {
            0 => Ok(Slot::Add(r.get()?)),
            1 => Ok(Slot::Mul(r.get()?)),
            tag => Err(WireError::BadTag { what: "slot scheme", tag }),
        }
    }
}

/// The value `x` the helper compares `dt0` against. Its scheme is that of `t0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    Add(i64),
    Mul(BigUint),
}

impl Encode for Condition {
    fn encode(&self, w: &mut Writer) {
        match self {
            Condition::Add(v) => {
                w.u8(0);
                w.i64(*v);
            }
            Condition::Mul(v) => {
                w.u8(1);
                w.big(v);
            }
        }
    }
}

impl Decode for Condition {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8()? {
            0 => Ok(Condition::Add(r.i64()?)),
            1 => Ok(Condition::Mul(r.big()?)),
            tag => Err(WireError::BadTag { what: "condition scheme", tag }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SecIfParams {
    pub x: Condition,
    pub t0: Slot,
    pub t1: Vec<Slot>,
    pub t2: Vec<Slot>,
    /// Branch coin used while building; never transmitted.
    pub coin: bool,
}

fn check_shape(x: &Condition, t0_add: bool, t1: &[Slot], t2: &[Slot]) -> Result<(), Error> {
    if t1.is_empty() || t1.len() != t2.len() || t1.iter().zip(t2).any(|(a, b)| !a.same_scheme(b)) {
        return Err(Error::Protocol("Secure-If branches differ in shape".into()));
    }
    if matches!(x, Condition::Add(_)) != t0_add {
        return Err(Error::Protocol("Secure-If condition and t0 use different schemes".into()));
    }
    Ok(())
}

/// Blinds an encrypted difference. Returns the blinded ciphertext and the
/// sign coin; `(plain(m) ≥ 0) == (plain(d) ≥ 0) XOR coin`.
pub(crate) fn blind(key: &AddKey, d: &AddCipher, rng: &mut ChaCha20Rng) -> Result<(AddCipher, bool), Error> {
    let kappa = key.kappa();
    if kappa == 0 || kappa > 62 {
        return Err(Error::Config(format!("blinding parameter κ = {kappa} outside 1..=62")));
    }
    let s: bool = rng.gen();
    let r: u64 = rng.gen_range(1..=1u64 << kappa);
    let u: u64 = rng.gen_range(0..r);
    let m = if s {
        key.add(&key.scale(d, -(r as i64))?, &key.encrypt(-1 - u as i128, rng))?
    } else {
        key.add(&key.scale(d, r as i64)?, &key.encrypt(u as i128, rng))?
    };
    Ok((m, s))
}

/// Runs `f` with the coordinator's keys and random stream.
pub(crate) fn with_local<T>(
    cluster: &mut Cluster,
    id: ControllerId,
    f: impl FnOnce(&PartyKeys, &mut ChaCha20Rng) -> T,
) -> T {
    let c = cluster.ctrl(id);
    f(&c.keys, &mut c.rng)
}

/// Secure-If with a helper chosen by the cluster's policy.
pub fn run_secif(cluster: &mut Cluster, coordinator: ControllerId, params: &SecIfParams) -> Result<Vec<Slot>, Error> {
    let helper = cluster.choose_helper(coordinator)?;
    run_secif_with(cluster, coordinator, helper, params)
}

pub fn run_secif_with(
    cluster: &mut Cluster,
    coordinator: ControllerId,
    helper: ControllerId,
    params: &SecIfParams,
) -> Result<Vec<Slot>, Error> {
    if helper == coordinator {
        return Err(Error::Config("the helper must differ from the coordinator".into()));
    }
    check_shape(&params.x, matches!(params.t0, Slot::Add(_)), &params.t1, &params.t2)?;
    let t0 = with_local(cluster, coordinator, |k, _| match &params.t0 {
        Slot::Add(c) => k.public.add.partial_decrypt(&k.add_share, c),
        Slot::Mul(c) => k.public.mul.partial_decrypt(&k.mul_share, c),
    })?;
    let op = cluster.new_op();
    let req = Message::SecIfReq { op, x: params.x.clone(), t0, t1: params.t1.clone(), t2: params.t2.clone() };
    match cluster.call(coordinator, helper, req)? {
        Message::SecIfResp { op: o, out } if o == op => {
            if out.len() != params.t1.len() || out.iter().zip(&params.t1).any(|(a, b)| !a.same_scheme(b)) {
                return Err(Error::Protocol("Secure-If reply has the wrong shape".into()));
            }
            cluster.metrics_mut().secif_count += 1;
            Ok(out)
        }
        other => Err(unexpected(&other)),
    }
}

/// Encrypted `+1` iff `plain(a) ≥ plain(b)`, else `-1`.
pub fn sc(cluster: &mut Cluster, coordinator: ControllerId, a: &AddCipher, b: &AddCipher) -> Result<AddCipher, Error> {
    let helper = cluster.choose_helper(coordinator)?;
    let (pd, s) = with_local(cluster, coordinator, |k, rng| -> Result<_, Error> {
        let key = &k.public.add;
        let (m, s) = blind(key, &key.sub(a, b)?, rng)?;
        Ok((key.partial_decrypt(&k.add_share, &m)?, s))
    })?;
    let op = cluster.new_op();
    let out = match cluster.call(coordinator, helper, Message::ScReq { op, m: pd })? {
        Message::ScResp { op: o, out } if o == op => out,
        other => return Err(unexpected(&other)),
    };
    cluster.metrics_mut().cmp_count += 1;
    with_local(cluster, coordinator, |k, rng| {
        let key = &k.public.add;
        let out = if s { key.neg(&out)? } else { out };
        Ok(key.rerandomize(&out, rng)?)
    })
}

/// Encrypted `+1` iff `(plain(a), a_idx) < (plain(b), b_idx)`, else `-1`.
pub fn osc(
    cluster: &mut Cluster,
    coordinator: ControllerId,
    a: &AddCipher,
    a_idx: usize,
    b: &AddCipher,
    b_idx: usize,
) -> Result<AddCipher, Error> {
    if a_idx == b_idx {
        return Err(Error::Protocol(format!("osc needs distinct edge indices, got {a_idx} twice")));
    }
    let sab = sc(cluster, coordinator, a, b)?;
    let sba = sc(cluster, coordinator, b, a)?;
    let params = with_local(cluster, coordinator, |k, rng| -> Result<_, Error> {
        let key = &k.public.add;
        let theta = key.sub(&key.add(&sab, &sba)?, &key.encrypt(1, rng))?;
        let by_index = key.encrypt(if a_idx < b_idx { 1 } else { -1 }, rng);
        let by_value = key.rerandomize(&sba, rng)?;
        let coin: bool = rng.gen();
        Ok(if coin {
            SecIfParams {
                x: Condition::Add(1),
                t0: Slot::Add(key.neg(&theta)?),
                t1: vec![Slot::Add(by_value)],
                t2: vec![Slot::Add(by_index)],
                coin,
            }
        } else {
            SecIfParams {
                x: Condition::Add(1),
                t0: Slot::Add(theta),
                t1: vec![Slot::Add(by_index)],
                t2: vec![Slot::Add(by_value)],
                coin,
            }
        })
    })?;
    let out = run_secif(cluster, coordinator, &params)?;
    Ok(out[0].as_add()?.clone())
}

/// Builds SecIf₀: `α(vv′)` is the sentinel unless exactly one endpoint is in
/// the tree, in which case it is `g(v) + g(v′) + e(vv′)`.
#[allow(clippy::too_many_arguments)]
pub fn secif0_params(
    keys: &PublicKeys,
    f_v: &MulCipher,
    f_w: &MulCipher,
    g_v: &AddCipher,
    g_w: &AddCipher,
    e: &AddCipher,
    sentinel: u64,
    coin: bool,
    rng: &mut ChaCha20Rng,
) -> Result<SecIfParams, Error> {
    let (add, mul) = (&keys.add, &keys.mul);
    let r = mul.random_exponent(rng);
    let sum = add.rerandomize(&add.add(&add.add(g_v, g_w)?, e)?, rng)?;
    let sentinel = add.encrypt(sentinel as i128, rng);
    Ok(if coin {
        SecIfParams {
            x: Condition::Mul(mul.codebook().one()),
            t0: Slot::Mul(mul.pow(&mul.inv(&mul.mul(f_v, f_w)?)?, &r)?),
            t1: vec![Slot::Add(sum)],
            t2: vec![Slot::Add(sentinel)],
            coin,
        }
    } else {
        SecIfParams {
            x: Condition::Mul(mul.codebook().one()),
            t0: Slot::Mul(mul.pow(&mul.mul(f_v, &mul.inv(f_w)?)?, &r)?),
            t1: vec![Slot::Add(sentinel)],
            t2: vec![Slot::Add(sum)],
            coin,
        }
    })
}

fn rerandomized(keys: &PublicKeys, ind: &Indicators, rng: &mut ChaCha20Rng) -> Result<[Slot; 3], Error> {
    Ok([
        Slot::Mul(keys.mul.rerandomize(&ind.f, rng)?),
        Slot::Add(keys.add.rerandomize(&ind.g, rng)?),
        Slot::Mul(keys.mul.rerandomize(&ind.h, rng)?),
    ])
}

fn joined(keys: &PublicKeys, alpha: &AddCipher, parent: usize, rng: &mut ChaCha20Rng) -> Result<[Slot; 3], Error> {
    let cb = keys.mul.codebook();
    Ok([
        Slot::Mul(keys.mul.encrypt(&cb.half(), rng)?),
        Slot::Add(keys.add.rerandomize(alpha, rng)?),
        Slot::Mul(keys.mul.encrypt(&cb.encode(parent)?, rng)?),
    ])
}

/// Builds SecIf₂: the endpoint outside the tree joins with distance `α`
/// and the other endpoint as parent. Tuples list `v`'s indicators, then `w`'s.
#[allow(clippy::too_many_arguments)]
pub fn secif2_params(
    keys: &PublicKeys,
    ind_v: &Indicators,
    ind_w: &Indicators,
    v: usize,
    w: usize,
    alpha: &AddCipher,
    coin: bool,
    rng: &mut ChaCha20Rng,
) -> Result<SecIfParams, Error> {
    let mut update_v: Vec<Slot> = joined(keys, alpha, w, rng)?.into();
    update_v.extend(rerandomized(keys, ind_w, rng)?);
    let mut update_w: Vec<Slot> = rerandomized(keys, ind_v, rng)?.into();
    update_w.extend(joined(keys, alpha, v, rng)?);
    let mul = &keys.mul;
    Ok(if coin {
        SecIfParams {
            x: Condition::Mul(mul.codebook().two()),
            t0: Slot::Mul(mul.rerandomize(&mul.inv(&ind_v.f)?, rng)?),
            t1: update_w,
            t2: update_v,
            coin,
        }
    } else {
        SecIfParams {
            x: Condition::Mul(mul.codebook().two()),
            t0: Slot::Mul(mul.rerandomize(&ind_v.f, rng)?),
            t1: update_v,
            t2: update_w,
            coin,
        }
    })
}

/// Pairwise osc results of one iteration. The reverse pair is obtained by
/// homomorphic negation, which osc's strict total order makes exact.
pub struct OscTable {
    alphas: Vec<AddCipher>,
    cache: BTreeMap<(usize, usize), AddCipher>,
}

impl OscTable {
    pub fn new(alphas: Vec<AddCipher>) -> Self {
        Self { alphas, cache: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[AddCipher] {
        &self.alphas
    }

    /// `osc(α_k, k + 1, α_i, i + 1)` for 0-based positions.
    pub fn get(&mut self, cluster: &mut Cluster, coordinator: ControllerId, k: usize, i: usize) -> Result<AddCipher, Error> {
        let (lo, hi) = (k.min(i), k.max(i));
        if !self.cache.contains_key(&(lo, hi)) {
            let c = osc(cluster, coordinator, &self.alphas[lo], lo + 1, &self.alphas[hi], hi + 1)?;
            self.cache.insert((lo, hi), c);
        }
        let c = self.cache[&(lo, hi)].clone();
        if k == lo {
            Ok(c)
        } else {
            Ok(cluster.public_keys().add.neg(&c)?)
        }
    }
}

/// SecIf₁ request plus the intermediate ciphertexts used to build it.
#[derive(Clone, Debug)]
pub struct ComparisonTranscript {
    pub params: SecIfParams,
    pub gamma: AddCipher,
    pub zeta: i64,
    pub epsilon: AddCipher,
}

/// Builds SecIf₁ for edge position `k`: the SecIf₂ result `t_a` is kept iff
/// `α_k` is the strict minimum under the `(α, index)` order; otherwise the
/// endpoints keep re-randomizations of their current indicators.
pub fn secif1_params(
    cluster: &mut Cluster,
    coordinator: ControllerId,
    table: &mut OscTable,
    k: usize,
    t_a: Vec<Slot>,
    originals: (&Indicators, &Indicators),
    coin: bool,
) -> Result<ComparisonTranscript, Error> {
    let m = table.len();
    if m < 2 {
        return Err(Error::Protocol("SecIf₁ needs at least two edges".into()));
    }
    if k >= m {
        return Err(Error::Protocol(format!("edge position {k} out of range")));
    }
    let key = cluster.public_keys().add.clone();
    let mut gamma: Option<AddCipher> = None;
    for i in (0..m).filter(|&i| i != k) {
        let o = table.get(cluster, coordinator, k, i)?;
        gamma = Some(match gamma {
            None => o,
            Some(acc) => key.add(&acc, &o)?,
        });
    }
    let gamma = gamma.expect("m ≥ 2");
    let zeta = m as i64 - 1;
    let zeta_c = with_local(cluster, coordinator, |k, rng| k.public.add.encrypt(zeta as i128, rng));
    let epsilon = sc(cluster, coordinator, &gamma, &zeta_c)?;
    let params = with_local(cluster, coordinator, |k, rng| -> Result<_, Error> {
        let keys = &k.public;
        let mut t_b: Vec<Slot> = rerandomized(keys, originals.0, rng)?.into();
        t_b.extend(rerandomized(keys, originals.1, rng)?);
        Ok(if coin {
            SecIfParams { x: Condition::Add(1), t0: Slot::Add(keys.add.neg(&epsilon)?), t1: t_b, t2: t_a, coin }
        } else {
            SecIfParams { x: Condition::Add(1), t0: Slot::Add(epsilon.clone()), t1: t_a, t2: t_b, coin }
        })
    })?;
    Ok(ComparisonTranscript { params, gamma, zeta, epsilon })
}

impl Controller {
    pub(crate) fn on_secif(
        &mut self,
        op: u64,
        x: Condition,
        t0: crate::crypto::PartialDecryption,
        t1: Vec<Slot>,
        t2: Vec<Slot>,
    ) -> Result<Message, Error> {
        let keys = self.keys.public.clone();
        let hit = match &x {
            Condition::Add(xv) => {
                check_shape(&x, true, &t1, &t2)?;
                let v = keys.add.decrypt(&t0, &self.keys.add_share)?;
                self.note(v);
                v == *xv as i128
            }
            Condition::Mul(xv) => {
                check_shape(&x, false, &t1, &t2)?;
                keys.mul.finish(&t0, &self.keys.mul_share)? == *xv
            }
        };
        self.secif_seen.0 += hit as u64;
        self.secif_seen.1 += 1;
        let branch = if hit { &t1 } else { &t2 };
        let out = branch.iter().map(|s| s.rerandomize(&keys, &mut self.rng)).collect::<Result<_, _>>()?;
        Ok(Message::SecIfResp { op, out })
    }

    pub(crate) fn on_sc(&mut self, op: u64, m: crate::crypto::PartialDecryption) -> Result<Message, Error> {
        let key = self.keys.public.add.clone();
        let v = key.decrypt_blinded(&m, &self.keys.add_share)?;
        self.note(v);
        let out = key.encrypt(if v >= 0 { 1 } else { -1 }, &mut self.rng);
        Ok(Message::ScResp { op, out })
    }
}
