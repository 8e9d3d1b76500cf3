//! Threshold ElGamal in the quadratic-residue subgroup of a safe-prime group.

use super::arith::{mod_inverse, safe_prime, FixedBase};
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;
use std::fmt;

const OAKLEY_1024: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7EDEE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF";
const MODP_2048: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7EDEE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3BE39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

/// A safe-prime group `p = 2q + 1` with `p ≡ 7 (mod 8)`, so that 2 lies in the
/// order-`q` subgroup of quadratic residues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub p: BigUint,
    pub q: BigUint,
}

impl Group {
    pub fn from_prime(p: BigUint) -> Self {
        let q = (&p - 1u8) >> 1;
        Self { p, q }
    }

    /// The 1024-bit MODP group from RFC 2409 or the 2048-bit one from
    /// RFC 3526 when `bits` matches, a freshly generated group otherwise.
    pub fn for_bits<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Self {
        let hex = match bits {
            1024 => Some(OAKLEY_1024),
            2048 => Some(MODP_2048),
            _ => None,
        };
        match hex {
            Some(h) => Self::from_prime(BigUint::parse_bytes(h.as_bytes(), 16).unwrap()),
            None => Self::from_prime(safe_prime(bits, true, rng)),
        }
    }
}

pub struct PublicKey {
    pub group: Group,
    pub g: BigUint,
    pub y: BigUint,
    pub parties: usize,
    g_table: FixedBase,
    y_table: FixedBase,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("elgamal::PublicKey")
            .field("bits", &self.group.p.bits())
            .field("parties", &self.parties)
            .finish()
    }
}

pub fn keygen<R: Rng + ?Sized>(
    group: Group,
    parties: usize,
    threshold: usize,
    rng: &mut R,
) -> (PublicKey, Vec<BigUint>) {
    assert!(threshold >= 1 && threshold <= parties);
    let g = BigUint::from(4u8);
    let x = rng.gen_biguint_range(&BigUint::one(), &group.q);
    let coeffs: Vec<BigUint> = (1..threshold).map(|_| rng.gen_biguint_below(&group.q)).collect();
    let shares = (1..=parties)
        .map(|i| {
            let i = BigUint::from(i);
            let mut acc = BigUint::zero();
            for c in coeffs.iter().rev() {
                acc = (acc + c) * &i % &group.q;
            }
            (acc + &x) % &group.q
        })
        .collect();
    let y = g.modpow(&x, &group.p);
    let bits = group.q.bits();
    let pk = PublicKey {
        g_table: FixedBase::new(&g, &group.p, bits),
        y_table: FixedBase::new(&y, &group.p, bits),
        group,
        g,
        y,
        parties,
    };
    (pk, shares)
}

pub type Cipher = (BigUint, BigUint);

impl PublicKey {
    pub fn random_exponent<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.group.q)
    }

    pub fn encrypt<R: Rng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Cipher {
        let k = self.random_exponent(rng);
        let p = &self.group.p;
        (self.g_table.pow(&k), (m * self.y_table.pow(&k)) % p)
    }

    pub fn mul(&self, a: &Cipher, b: &Cipher) -> Cipher {
        let p = &self.group.p;
        ((&a.0 * &b.0) % p, (&a.1 * &b.1) % p)
    }

    pub fn pow(&self, a: &Cipher, e: &BigUint) -> Cipher {
        let p = &self.group.p;
        (a.0.modpow(e, p), a.1.modpow(e, p))
    }

    pub fn inv(&self, a: &Cipher) -> Cipher {
        let p = &self.group.p;
        (
            mod_inverse(&a.0, p).expect("group elements are units"),
            mod_inverse(&a.1, p).expect("group elements are units"),
        )
    }

    pub fn rerandomize<R: Rng + ?Sized>(&self, a: &Cipher, rng: &mut R) -> Cipher {
        let one = self.encrypt(&BigUint::one(), rng);
        self.mul(a, &one)
    }

    pub fn partial(&self, share: &BigUint, c1: &BigUint) -> BigUint {
        c1.modpow(share, &self.group.p)
    }

    /// Combines `(x, c1^{s_x})` pairs for distinct 1-based indices and strips
    /// the mask from `c2`.
    pub fn combine(&self, c2: &BigUint, parts: &[(usize, &BigUint)]) -> BigUint {
        let (p, q) = (&self.group.p, &self.group.q);
        let mut mask = BigUint::one();
        for (i, (xi, part)) in parts.iter().enumerate() {
            let mut num = BigUint::one();
            let mut den = BigUint::one();
            for (j, (xj, _)) in parts.iter().enumerate() {
                if i != j {
                    num = num * BigUint::from(*xj) % q;
                    // xj - xi (mod q)
                    let diff = (q + BigUint::from(*xj) - BigUint::from(*xi)) % q;
                    den = den * diff % q;
                }
            }
            let lambda = num * mod_inverse(&den, q).expect("q is prime") % q;
            mask = mask * part.modpow(&lambda, p) % p;
        }
        c2 * mod_inverse(&mask, p).expect("mask is a unit") % p
    }
}
