//! Threshold homomorphic encryption.
//!
//! `E` is an additively homomorphic scheme (threshold Paillier) carrying
//! signed integers; `E′` is a multiplicatively homomorphic scheme (threshold
//! ElGamal) carrying group elements such as node codes and membership flags.
//! Both are 2-out-of-N: a single partial decryption reveals nothing and any
//! second party can finish it.
//!
//! The [`Backend::Transparent`] backend keeps the same interface and control
//! flow but stores plaintexts in the clear. It exists for fast functional
//! testing and provides no confidentiality.

pub mod arith;
mod codebook;
mod elgamal;
mod paillier;
mod transparent;

pub use codebook::NodeCodebook;

use crate::wire::{Decode, Encode, Reader, WireError, Writer};
use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("ciphertext or share belongs to a different key")]
    KeyMismatch,
    #[error("party {0} supplied both halves of a threshold decryption")]
    SameParty(usize),
    #[error("party index {0} out of range")]
    UnknownParty(usize),
    #[error("decrypted residue lies outside the signed plaintext range")]
    OutOfRange,
    #[error("element is not in the plaintext group")]
    NotInGroup,
    #[error("codebook: {0}")]
    Codebook(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Real,
    Transparent,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Real => "real",
            Backend::Transparent => "transparent",
        })
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Backend::Real),
            "transparent" => Ok(Backend::Transparent),
            _ => Err(format!("unknown backend `{s}` (expected real or transparent)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CryptoParams {
    pub backend: Backend,
    /// Paillier modulus size and ElGamal group size.
    pub key_bits: u64,
    /// Largest magnitude an honest plaintext may take.
    pub plaintext_bound: u64,
    /// Statistical blinding parameter for comparisons.
    pub kappa: u32,
}

impl Default for CryptoParams {
    fn default() -> Self {
        Self { backend: Backend::Real, key_bits: 1024, plaintext_bound: 1 << 40, kappa: 40 }
    }
}

impl CryptoParams {
    pub fn transparent() -> Self {
        Self { backend: Backend::Transparent, ..Self::default() }
    }

    pub fn real(key_bits: u64) -> Self {
        Self { backend: Backend::Real, key_bits, ..Self::default() }
    }
}

/// Signed residue decoding: `[0, B]` is non-negative, `[space - B, space)` is
/// negative, anything between signals corruption or overflow.
pub fn decode_signed(residue: &BigUint, space: &BigUint, bound: &BigUint) -> Result<i128, CryptoError> {
    let to_i128 = |v: &BigUint| i128::try_from(v).map_err(|_| CryptoError::OutOfRange);
    if residue >= space {
        return Err(CryptoError::OutOfRange);
    }
    if residue <= bound {
        return to_i128(residue);
    }
    let neg = space - residue;
    if &neg <= bound {
        return Ok(-to_i128(&neg)?);
    }
    Err(CryptoError::OutOfRange)
}

pub fn encode_signed(v: i128, space: &BigUint) -> BigUint {
    arith::reduce_signed(&BigInt::from(v), space)
}

fn key_tag(label: &str, parts: &[&BigUint]) -> u64 {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    for p in parts {
        h.update(p.to_bytes());
    }
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().unwrap())
}

/// A party's secret share. The value never leaves its owner.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyShare {
    party: usize,
    key: u64,
    secret: BigUint,
}

impl KeyShare {
    pub fn party(&self) -> usize {
        self.party
    }
}

impl fmt::Debug for KeyShare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyShare").field("party", &self.party).finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum PdBody {
    Paillier { c: BigUint, part: BigUint },
    ElGamal { c1: BigUint, c2: BigUint, part: BigUint },
    Clear { masked: BigUint, nonce: u64 },
}

/// One party's half of a threshold decryption.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialDecryption {
    party: usize,
    key: u64,
    body: PdBody,
}

impl PartialDecryption {
    pub fn party(&self) -> usize {
        self.party
    }
}

impl Encode for PartialDecryption {
    fn encode(&self, w: &mut Writer) {
        w.u32(self.party as u32);
        w.u64(self.key);
        match &self.body {
            PdBody::Paillier { c, part } => {
                w.u8(0);
                w.big(c);
                w.big(part);
            }
            PdBody::ElGamal { c1, c2, part } => {
                w.u8(1);
                w.big(c1);
                w.big(c2);
                w.big(part);
            }
            PdBody::Clear { masked, nonce } => {
                w.u8(2);
                w.big(masked);
                w.u64(*nonce);
            }
        }
    }
}

impl Decode for PartialDecryption {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let party = r.u32()? as usize;
        let key = r.u64()?;
        let body = match r.u8()? {
            0 => PdBody::Paillier { c: r.big()?, part: r.big()? },
            1 => PdBody::ElGamal { c1: r.big()?, c2: r.big()?, part: r.big()? },
            2 => PdBody::Clear { masked: r.big()?, nonce: r.u64()? },
            tag => return Err(WireError::BadTag { what: "partial decryption", tag }),
        };
        Ok(Self { party, key, body })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum AddBody {
    Paillier(BigUint),
    Clear { residue: BigUint, nonce: u64 },
}

/// Ciphertext under the additive scheme `E`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AddCipher {
    key: u64,
    body: AddBody,
}

impl Encode for AddCipher {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.key);
        match &self.body {
            AddBody::Paillier(c) => {
                w.u8(0);
                w.big(c);
            }
            AddBody::Clear { residue, nonce } => {
                w.u8(1);
                w.big(residue);
                w.u64(*nonce);
            }
        }
    }
}

impl Decode for AddCipher {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let key = r.u64()?;
        let body = match r.u8()? {
            0 => AddBody::Paillier(r.big()?),
            1 => AddBody::Clear { residue: r.big()?, nonce: r.u64()? },
            tag => return Err(WireError::BadTag { what: "additive ciphertext", tag }),
        };
        Ok(Self { key, body })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum MulBody {
    ElGamal(BigUint, BigUint),
    Clear { elem: BigUint, nonce: u64 },
}

/// Ciphertext under the multiplicative scheme `E′`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MulCipher {
    key: u64,
    body: MulBody,
}

impl Encode for MulCipher {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.key);
        match &self.body {
            MulBody::ElGamal(c1, c2) => {
                w.u8(0);
                w.big(c1);
                w.big(c2);
            }
            MulBody::Clear { elem, nonce } => {
                w.u8(1);
                w.big(elem);
                w.u64(*nonce);
            }
        }
    }
}

impl Decode for MulCipher {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let key = r.u64()?;
        let body = match r.u8()? {
            0 => MulBody::ElGamal(r.big()?, r.big()?),
            1 => MulBody::Clear { elem: r.big()?, nonce: r.u64()? },
            tag => return Err(WireError::BadTag { what: "multiplicative ciphertext", tag }),
        };
        Ok(Self { key, body })
    }
}

enum AddImpl {
    Paillier(paillier::PublicKey),
    Clear,
}

struct AddInner {
    tag: u64,
    parties: usize,
    space: BigUint,
    bound: BigUint,
    blinded_bound: BigUint,
    kappa: u32,
    imp: AddImpl,
}

/// Public key of the additive scheme. Cheap to clone.
#[derive(Clone)]
pub struct AddKey(Arc<AddInner>);

impl fmt::Debug for AddKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AddKey")
            .field("tag", &format_args!("{:016x}", self.0.tag))
            .field("space_bits", &self.0.space.bits())
            .finish()
    }
}

impl AddKey {
    pub fn tag(&self) -> u64 {
        self.0.tag
    }

    pub fn parties(&self) -> usize {
        self.0.parties
    }

    /// Size of the residue space.
    pub fn space(&self) -> &BigUint {
        &self.0.space
    }

    /// Bound `B` on honest plaintext magnitudes.
    pub fn bound(&self) -> &BigUint {
        &self.0.bound
    }

    /// Bound on blinded comparison values `r·d + u`.
    pub fn blinded_bound(&self) -> &BigUint {
        &self.0.blinded_bound
    }

    pub fn kappa(&self) -> u32 {
        self.0.kappa
    }

    fn check(&self, c: &AddCipher) -> Result<(), CryptoError> {
        if c.key == self.0.tag {
            Ok(())
        } else {
            Err(CryptoError::KeyMismatch)
        }
    }

    pub fn encrypt<R: Rng + ?Sized>(&self, v: i128, rng: &mut R) -> AddCipher {
        self.encrypt_residue(&encode_signed(v, &self.0.space), rng)
    }

    pub fn encrypt_residue<R: Rng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> AddCipher {
        let body = match &self.0.imp {
            AddImpl::Paillier(pk) => AddBody::Paillier(pk.encrypt(m, rng)),
            AddImpl::Clear => {
                AddBody::Clear { residue: m % &self.0.space, nonce: transparent::nonce(rng) }
            }
        };
        AddCipher { key: self.0.tag, body }
    }

    pub fn add(&self, a: &AddCipher, b: &AddCipher) -> Result<AddCipher, CryptoError> {
        self.check(a)?;
        self.check(b)?;
        let body = match (&self.0.imp, &a.body, &b.body) {
            (AddImpl::Paillier(pk), AddBody::Paillier(x), AddBody::Paillier(y)) => {
                AddBody::Paillier(pk.add(x, y))
            }
            (AddImpl::Clear, AddBody::Clear { residue: x, nonce: nx }, AddBody::Clear { residue: y, nonce: ny }) => {
                AddBody::Clear { residue: (x + y) % &self.0.space, nonce: transparent::mix(*nx, *ny) }
            }
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(AddCipher { key: self.0.tag, body })
    }

    /// `E(k · m)`
    pub fn scale(&self, a: &AddCipher, k: i64) -> Result<AddCipher, CryptoError> {
        self.check(a)?;
        let body = match (&self.0.imp, &a.body) {
            (AddImpl::Paillier(pk), AddBody::Paillier(x)) => AddBody::Paillier(pk.scale(x, &BigInt::from(k))),
            (AddImpl::Clear, AddBody::Clear { residue, nonce }) => {
                let k = encode_signed(k as i128, &self.0.space);
                AddBody::Clear {
                    residue: residue * k % &self.0.space,
                    nonce: transparent::mix(*nonce, 0x5ca1e),
                }
            }
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(AddCipher { key: self.0.tag, body })
    }

    pub fn neg(&self, a: &AddCipher) -> Result<AddCipher, CryptoError> {
        self.scale(a, -1)
    }

    /// `E(a - b)`
    pub fn sub(&self, a: &AddCipher, b: &AddCipher) -> Result<AddCipher, CryptoError> {
        self.add(a, &self.neg(b)?)
    }

    pub fn rerandomize<R: Rng + ?Sized>(&self, a: &AddCipher, rng: &mut R) -> Result<AddCipher, CryptoError> {
        self.check(a)?;
        let body = match (&self.0.imp, &a.body) {
            (AddImpl::Paillier(pk), AddBody::Paillier(x)) => AddBody::Paillier(pk.rerandomize(x, rng)),
            (AddImpl::Clear, AddBody::Clear { residue, .. }) => {
                AddBody::Clear { residue: residue.clone(), nonce: transparent::nonce(rng) }
            }
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(AddCipher { key: self.0.tag, body })
    }

    pub fn partial_decrypt(&self, share: &KeyShare, a: &AddCipher) -> Result<PartialDecryption, CryptoError> {
        self.check(a)?;
        if share.key != self.0.tag {
            return Err(CryptoError::KeyMismatch);
        }
        let body = match (&self.0.imp, &a.body) {
            (AddImpl::Paillier(pk), AddBody::Paillier(c)) => {
                PdBody::Paillier { c: c.clone(), part: pk.partial(&share.secret, c) }
            }
            (AddImpl::Clear, AddBody::Clear { residue, nonce }) => PdBody::Clear {
                masked: transparent::mask(residue, &share.secret, *nonce),
                nonce: *nonce,
            },
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(PartialDecryption { party: share.party, key: self.0.tag, body })
    }

    /// Completes a threshold decryption with a second party's share and
    /// returns the plaintext residue.
    pub fn finish(&self, pd: &PartialDecryption, share: &KeyShare) -> Result<BigUint, CryptoError> {
        if pd.key != self.0.tag || share.key != self.0.tag {
            return Err(CryptoError::KeyMismatch);
        }
        if pd.party == share.party {
            return Err(CryptoError::SameParty(pd.party));
        }
        if pd.party >= self.0.parties {
            return Err(CryptoError::UnknownParty(pd.party));
        }
        let (xi, xj) = (pd.party + 1, share.party + 1);
        match (&self.0.imp, &pd.body) {
            (AddImpl::Paillier(pk), PdBody::Paillier { c, part }) => {
                let own = pk.partial(&share.secret, c);
                Ok(pk.combine(&[(xi, part), (xj, &own)]))
            }
            (AddImpl::Clear, PdBody::Clear { masked, nonce }) => {
                Ok(transparent::unmask(masked, *nonce, xi, xj, &share.secret))
            }
            _ => Err(CryptoError::KeyMismatch),
        }
    }

    pub fn decode(&self, residue: &BigUint) -> Result<i128, CryptoError> {
        decode_signed(residue, &self.0.space, &self.0.bound)
    }

    /// Finishes and decodes with the plaintext bound `B`.
    pub fn decrypt(&self, pd: &PartialDecryption, share: &KeyShare) -> Result<i128, CryptoError> {
        self.decode(&self.finish(pd, share)?)
    }

    /// Finishes and decodes with the wider bound used for blinded differences.
    pub fn decrypt_blinded(&self, pd: &PartialDecryption, share: &KeyShare) -> Result<i128, CryptoError> {
        decode_signed(&self.finish(pd, share)?, &self.0.space, &self.0.blinded_bound)
    }
}

enum MulImpl {
    ElGamal(elgamal::PublicKey),
    Clear,
}

struct MulInner {
    tag: u64,
    parties: usize,
    p: BigUint,
    q: BigUint,
    codebook: NodeCodebook,
    imp: MulImpl,
}

/// Public key of the multiplicative scheme. Cheap to clone.
#[derive(Clone)]
pub struct MulKey(Arc<MulInner>);

impl fmt::Debug for MulKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MulKey")
            .field("tag", &format_args!("{:016x}", self.0.tag))
            .field("group_bits", &self.0.p.bits())
            .finish()
    }
}

impl MulKey {
    pub fn tag(&self) -> u64 {
        self.0.tag
    }

    pub fn codebook(&self) -> &NodeCodebook {
        &self.0.codebook
    }

    /// Order of the plaintext group.
    pub fn order(&self) -> &BigUint {
        &self.0.q
    }

    fn check(&self, c: &MulCipher) -> Result<(), CryptoError> {
        if c.key == self.0.tag {
            Ok(())
        } else {
            Err(CryptoError::KeyMismatch)
        }
    }

    pub fn is_member(&self, elem: &BigUint) -> bool {
        !elem.is_zero() && elem < &self.0.p && arith::jacobi(elem, &self.0.p) == 1
    }

    /// Uniform exponent in `[1, q)`.
    pub fn random_exponent<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.0.q)
    }

    pub fn encrypt<R: Rng + ?Sized>(&self, elem: &BigUint, rng: &mut R) -> Result<MulCipher, CryptoError> {
        if !self.is_member(elem) {
            return Err(CryptoError::NotInGroup);
        }
        let body = match &self.0.imp {
            MulImpl::ElGamal(pk) => {
                let (c1, c2) = pk.encrypt(elem, rng);
                MulBody::ElGamal(c1, c2)
            }
            MulImpl::Clear => MulBody::Clear { elem: elem.clone(), nonce: transparent::nonce(rng) },
        };
        Ok(MulCipher { key: self.0.tag, body })
    }

    pub fn mul(&self, a: &MulCipher, b: &MulCipher) -> Result<MulCipher, CryptoError> {
        self.check(a)?;
        self.check(b)?;
        let body = match (&self.0.imp, &a.body, &b.body) {
            (MulImpl::ElGamal(pk), MulBody::ElGamal(a1, a2), MulBody::ElGamal(b1, b2)) => {
                let (c1, c2) = pk.mul(&(a1.clone(), a2.clone()), &(b1.clone(), b2.clone()));
                MulBody::ElGamal(c1, c2)
            }
            (MulImpl::Clear, MulBody::Clear { elem: x, nonce: nx }, MulBody::Clear { elem: y, nonce: ny }) => {
                MulBody::Clear { elem: x * y % &self.0.p, nonce: transparent::mix(*nx, *ny) }
            }
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(MulCipher { key: self.0.tag, body })
    }

    /// `E′(m^e)`
    pub fn pow(&self, a: &MulCipher, e: &BigUint) -> Result<MulCipher, CryptoError> {
        self.check(a)?;
        let body = match (&self.0.imp, &a.body) {
            (MulImpl::ElGamal(pk), MulBody::ElGamal(c1, c2)) => {
                let (c1, c2) = pk.pow(&(c1.clone(), c2.clone()), e);
                MulBody::ElGamal(c1, c2)
            }
            (MulImpl::Clear, MulBody::Clear { elem, nonce }) => MulBody::Clear {
                elem: elem.modpow(e, &self.0.p),
                nonce: transparent::mix(*nonce, 0x9047),
            },
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(MulCipher { key: self.0.tag, body })
    }

    /// `E′(m^{-1})`
    pub fn inv(&self, a: &MulCipher) -> Result<MulCipher, CryptoError> {
        self.check(a)?;
        let body = match (&self.0.imp, &a.body) {
            (MulImpl::ElGamal(pk), MulBody::ElGamal(c1, c2)) => {
                let (c1, c2) = pk.inv(&(c1.clone(), c2.clone()));
                MulBody::ElGamal(c1, c2)
            }
            (MulImpl::Clear, MulBody::Clear { elem, nonce }) => MulBody::Clear {
                elem: arith::mod_inverse(elem, &self.0.p).ok_or(CryptoError::NotInGroup)?,
                nonce: transparent::mix(*nonce, 0x1d),
            },
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(MulCipher { key: self.0.tag, body })
    }

    pub fn rerandomize<R: Rng + ?Sized>(&self, a: &MulCipher, rng: &mut R) -> Result<MulCipher, CryptoError> {
        self.check(a)?;
        let body = match (&self.0.imp, &a.body) {
            (MulImpl::ElGamal(pk), MulBody::ElGamal(c1, c2)) => {
                let (c1, c2) = pk.rerandomize(&(c1.clone(), c2.clone()), rng);
                MulBody::ElGamal(c1, c2)
            }
            (MulImpl::Clear, MulBody::Clear { elem, .. }) => {
                MulBody::Clear { elem: elem.clone(), nonce: transparent::nonce(rng) }
            }
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(MulCipher { key: self.0.tag, body })
    }

    pub fn partial_decrypt(&self, share: &KeyShare, a: &MulCipher) -> Result<PartialDecryption, CryptoError> {
        self.check(a)?;
        if share.key != self.0.tag {
            return Err(CryptoError::KeyMismatch);
        }
        let body = match (&self.0.imp, &a.body) {
            (MulImpl::ElGamal(pk), MulBody::ElGamal(c1, c2)) => PdBody::ElGamal {
                c1: c1.clone(),
                c2: c2.clone(),
                part: pk.partial(&share.secret, c1),
            },
            (MulImpl::Clear, MulBody::Clear { elem, nonce }) => PdBody::Clear {
                masked: transparent::mask(elem, &share.secret, *nonce),
                nonce: *nonce,
            },
            _ => return Err(CryptoError::KeyMismatch),
        };
        Ok(PartialDecryption { party: share.party, key: self.0.tag, body })
    }

    pub fn finish(&self, pd: &PartialDecryption, share: &KeyShare) -> Result<BigUint, CryptoError> {
        if pd.key != self.0.tag || share.key != self.0.tag {
            return Err(CryptoError::KeyMismatch);
        }
        if pd.party == share.party {
            return Err(CryptoError::SameParty(pd.party));
        }
        if pd.party >= self.0.parties {
            return Err(CryptoError::UnknownParty(pd.party));
        }
        let (xi, xj) = (pd.party + 1, share.party + 1);
        match (&self.0.imp, &pd.body) {
            (MulImpl::ElGamal(pk), PdBody::ElGamal { c1, c2, part }) => {
                let own = pk.partial(&share.secret, c1);
                Ok(pk.combine(c2, &[(xi, part), (xj, &own)]))
            }
            (MulImpl::Clear, PdBody::Clear { masked, nonce }) => {
                Ok(transparent::unmask(masked, *nonce, xi, xj, &share.secret))
            }
            _ => Err(CryptoError::KeyMismatch),
        }
    }
}

/// Public keys of both schemes.
#[derive(Clone, Debug)]
pub struct PublicKeys {
    pub add: AddKey,
    pub mul: MulKey,
    pub backend: Backend,
}

/// Everything a single controller holds: the public keys and its own shares.
#[derive(Clone, Debug)]
pub struct PartyKeys {
    pub party: usize,
    pub public: PublicKeys,
    pub add_share: KeyShare,
    pub mul_share: KeyShare,
}

/// Dealer-based key generation for `parties` controllers with threshold 2.
pub fn keygen<R: Rng + ?Sized>(
    params: &CryptoParams,
    parties: usize,
    rng: &mut R,
) -> Result<(PublicKeys, Vec<PartyKeys>), CryptoError> {
    if parties < 2 {
        return Err(CryptoError::InvalidParams("threshold decryption needs at least two parties".into()));
    }
    if parties > 64 {
        return Err(CryptoError::InvalidParams("at most 64 parties are supported".into()));
    }
    let bound = BigUint::from(params.plaintext_bound);
    // |r·d + u| < 2^κ (2B + 1) for |d| ≤ 2B
    let blinded_bound = (BigUint::one() << params.kappa) * (&bound * 2u8 + 1u8) + 1u8;

    let (add_imp, add_shares, space, add_tag) = match params.backend {
        Backend::Real => {
            if params.key_bits < 256 {
                return Err(CryptoError::InvalidParams("key size below 256 bits".into()));
            }
            let (pk, shares) = paillier::keygen(params.key_bits, parties, 2, rng);
            let tag = key_tag("paillier", &[&pk.n]);
            let space = pk.n.clone();
            (AddImpl::Paillier(pk), shares, space, tag)
        }
        Backend::Transparent => {
            let id = rng.gen_biguint(64);
            let tag = key_tag("clear-add", &[&id]);
            (AddImpl::Clear, transparent::zero_shares(parties, rng), transparent::add_space(), tag)
        }
    };
    if &blinded_bound * 2u8 >= space {
        return Err(CryptoError::InvalidParams(
            "plaintext bound and blinding parameter overflow the plaintext space".into(),
        ));
    }

    let (mul_imp, mul_shares, p, mul_tag) = match params.backend {
        Backend::Real => {
            let group = elgamal::Group::for_bits(params.key_bits, rng);
            let (pk, shares) = elgamal::keygen(group, parties, 2, rng);
            let tag = key_tag("elgamal", &[&pk.group.p, &pk.g, &pk.y]);
            let p = pk.group.p.clone();
            (MulImpl::ElGamal(pk), shares, p, tag)
        }
        Backend::Transparent => {
            let id = rng.gen_biguint(64);
            let tag = key_tag("clear-mul", &[&id]);
            (MulImpl::Clear, transparent::zero_shares(parties, rng), BigUint::from(transparent::MUL_PRIME), tag)
        }
    };

    let add = AddKey(Arc::new(AddInner {
        tag: add_tag,
        parties,
        space,
        bound,
        blinded_bound,
        kappa: params.kappa,
        imp: add_imp,
    }));
    let q = (&p - 1u8) >> 1;
    let mul = MulKey(Arc::new(MulInner {
        tag: mul_tag,
        parties,
        codebook: NodeCodebook::new(&p),
        p,
        q,
        imp: mul_imp,
    }));
    let public = PublicKeys { add, mul, backend: params.backend };
    let keys = add_shares
        .into_iter()
        .zip(mul_shares)
        .enumerate()
        .map(|(party, (a, m))| PartyKeys {
            party,
            public: public.clone(),
            add_share: KeyShare { party, key: add_tag, secret: a },
            mul_share: KeyShare { party, key: mul_tag, secret: m },
        })
        .collect();
    Ok((public, keys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys(backend: Backend) -> (PublicKeys, Vec<PartyKeys>, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let params = CryptoParams { backend, key_bits: 512, ..CryptoParams::default() };
        let (pk, parties) = keygen(&params, 3, &mut rng).unwrap();
        (pk, parties, rng)
    }

    #[test]
    fn signed_decoding_regions() {
        let space = BigUint::from(1000u32);
        let b = BigUint::from(10u32);
        assert_eq!(decode_signed(&BigUint::from(10u32), &space, &b), Ok(10));
        assert_eq!(decode_signed(&BigUint::from(990u32), &space, &b), Ok(-10));
        assert_eq!(decode_signed(&BigUint::from(500u32), &space, &b), Err(CryptoError::OutOfRange));
        assert_eq!(decode_signed(&BigUint::from(11u32), &space, &b), Err(CryptoError::OutOfRange));
    }

    #[test]
    fn both_backends_round_trip_and_combine() {
        for backend in [Backend::Transparent, Backend::Real] {
            let (pk, parties, mut rng) = keys(backend);
            for v in [-5i128, 0, 1, 17, 1 << 39] {
                let c = pk.add.encrypt(v, &mut rng);
                let pd = pk.add.partial_decrypt(&parties[2].add_share, &c).unwrap();
                assert_eq!(pk.add.decrypt(&pd, &parties[0].add_share), Ok(v));
                assert_eq!(pk.add.decrypt(&pd, &parties[1].add_share), Ok(v));
                assert_eq!(pk.add.decrypt(&pd, &parties[2].add_share), Err(CryptoError::SameParty(2)));
            }
            let a = pk.add.encrypt(7, &mut rng);
            let b = pk.add.encrypt(-3, &mut rng);
            let c = pk.add.scale(&pk.add.add(&a, &b).unwrap(), -6).unwrap();
            let c = pk.add.rerandomize(&c, &mut rng).unwrap();
            let pd = pk.add.partial_decrypt(&parties[0].add_share, &c).unwrap();
            assert_eq!(pk.add.decrypt(&pd, &parties[1].add_share), Ok(-24));

            let cb = pk.mul.codebook().clone();
            let e = pk.mul.encrypt(&cb.encode(5).unwrap(), &mut rng).unwrap();
            let two = pk.mul.encrypt(&cb.two(), &mut rng).unwrap();
            let half = pk.mul.inv(&two).unwrap();
            let prod = pk.mul.mul(&e, &pk.mul.mul(&two, &half).unwrap()).unwrap();
            let prod = pk.mul.rerandomize(&prod, &mut rng).unwrap();
            let pd = pk.mul.partial_decrypt(&parties[1].mul_share, &prod).unwrap();
            let m = pk.mul.finish(&pd, &parties[0].mul_share).unwrap();
            assert_eq!(cb.decode(&m).unwrap(), Some(5));
        }
    }

    #[test]
    fn keys_are_not_interchangeable() {
        let (pk1, p1, mut rng) = keys(Backend::Transparent);
        let mut rng2 = ChaCha20Rng::seed_from_u64(12);
        let (pk2, _) = keygen(&CryptoParams::transparent(), 3, &mut rng2).unwrap();
        let a = pk1.add.encrypt(1, &mut rng);
        let b = pk2.add.encrypt(1, &mut rng);
        assert_eq!(pk1.add.add(&a, &b), Err(CryptoError::KeyMismatch));
        assert!(pk2.add.partial_decrypt(&p1[0].add_share, &b).is_err());
    }

    #[test]
    fn one_party_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(matches!(
            keygen(&CryptoParams::transparent(), 1, &mut rng),
            Err(CryptoError::InvalidParams(_))
        ));
    }

    #[test]
    fn ciphertexts_serialize_deterministically() {
        let (pk, parties, mut rng) = keys(Backend::Real);
        let c = pk.add.encrypt(42, &mut rng);
        let bytes = c.to_bytes();
        assert_eq!(AddCipher::from_bytes(&bytes).unwrap(), c);
        assert_eq!(AddCipher::from_bytes(&bytes).unwrap().to_bytes(), bytes);
        let pd = pk.add.partial_decrypt(&parties[0].add_share, &c).unwrap();
        assert_eq!(PartialDecryption::from_bytes(&pd.to_bytes()).unwrap(), pd);
        let m = pk.mul.encrypt(&pk.mul.codebook().two(), &mut rng).unwrap();
        assert_eq!(MulCipher::from_bytes(&m.to_bytes()).unwrap(), m);
    }
}
