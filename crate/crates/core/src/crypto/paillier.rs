//! Threshold Paillier over `Z_{n^2}` with Shoup-style secret sharing.
//!
//! The modulus is a product of two safe primes `p = 2p' + 1`, `q = 2q' + 1`.
//! The decryption exponent `d` satisfies `d ≡ 0 (mod p'q')` and
//! `d ≡ 1 (mod n)`; it is split with a degree-`t - 1` polynomial over
//! `Z_{n p' q'}`. With `Δ = N!`, party `i` publishes `c^{2Δ s_i}` and any `t`
//! such values combine to `c^{4Δ² d}`, whose `L` value is `4Δ² m`.
//!
//! Randomizers are drawn as `h_n^α` for a fixed public `h_n = h^n` and a
//! half-length `α`, which admits a precomputed exponentiation table.

use super::arith::{factorial, mod_inverse, safe_prime, FixedBase};
use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::fmt;

pub struct PublicKey {
    pub n: BigUint,
    pub n_squared: BigUint,
    pub parties: usize,
    delta: BigUint,
    /// `(4Δ²)^{-1} mod n`
    combine_factor: BigUint,
    alpha_bits: u64,
    h_n: FixedBase,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("paillier::PublicKey")
            .field("bits", &self.n.bits())
            .field("parties", &self.parties)
            .finish()
    }
}

/// Generates a key for `parties` holders, any `threshold` of which decrypt.
/// Returns the public key and one share per party (index 0 is party 0).
pub fn keygen<R: Rng + ?Sized>(
    modulus_bits: u64,
    parties: usize,
    threshold: usize,
    rng: &mut R,
) -> (PublicKey, Vec<BigUint>) {
    assert!(threshold >= 1 && threshold <= parties);
    let half = modulus_bits / 2;
    let (p, q) = loop {
        let p = safe_prime(half, false, rng);
        let q = safe_prime(modulus_bits - half, false, rng);
        if p != q {
            break (p, q);
        }
    };
    let n = &p * &q;
    let m_prime = ((&p - 1u8) >> 1) * ((&q - 1u8) >> 1);
    let d = &m_prime * mod_inverse(&(&m_prime % &n), &n).expect("gcd(n, p'q') = 1");
    let share_modulus = &n * &m_prime;
    let coeffs: Vec<BigUint> = (1..threshold).map(|_| rng.gen_biguint_below(&share_modulus)).collect();
    let shares = (1..=parties)
        .map(|x| {
            let x = BigUint::from(x);
            let mut acc = BigUint::zero();
            for c in coeffs.iter().rev() {
                acc = (acc + c) * &x % &share_modulus;
            }
            (acc + &d) % &share_modulus
        })
        .collect();

    let n_squared = &n * &n;
    let h = {
        let x = rng.gen_biguint_below(&n);
        (&x * &x) % &n
    };
    let h_n = h.modpow(&n, &n_squared);
    let alpha_bits = n.bits().div_ceil(2);
    let delta = factorial(parties);
    let four_delta_sq = (&delta * &delta * 4u8) % &n;
    let combine_factor = mod_inverse(&four_delta_sq, &n).expect("n has no factors below N");
    let pk = PublicKey {
        h_n: FixedBase::new(&h_n, &n_squared, alpha_bits),
        n,
        n_squared,
        parties,
        delta,
        combine_factor,
        alpha_bits,
    };
    (pk, shares)
}

impl PublicKey {
    fn randomizer<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        let alpha = rng.gen_biguint(self.alpha_bits);
        self.h_n.pow(&alpha)
    }

    /// Encrypts a residue in `[0, n)`.
    pub fn encrypt<R: Rng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> BigUint {
        // (1 + n)^m = 1 + m n (mod n²)
        let gm = (BigUint::one() + (m % &self.n) * &self.n) % &self.n_squared;
        (gm * self.randomizer(rng)) % &self.n_squared
    }

    pub fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.n_squared
    }

    pub fn scale(&self, c: &BigUint, k: &BigInt) -> BigUint {
        let base = if k.is_negative() {
            mod_inverse(c, &self.n_squared).expect("ciphertexts are units mod n²")
        } else {
            c.clone()
        };
        base.modpow(&k.magnitude().clone(), &self.n_squared)
    }

    pub fn rerandomize<R: Rng + ?Sized>(&self, c: &BigUint, rng: &mut R) -> BigUint {
        (c * self.randomizer(rng)) % &self.n_squared
    }

    pub fn partial(&self, share: &BigUint, c: &BigUint) -> BigUint {
        let e = share * &self.delta * 2u8;
        c.modpow(&e, &self.n_squared)
    }

    /// Combines partial decryptions `(x, c^{2Δ s_x})` for distinct 1-based
    /// party indices `x`.
    pub fn combine(&self, parts: &[(usize, &BigUint)]) -> BigUint {
        let delta = BigInt::from_biguint(Sign::Plus, self.delta.clone());
        let mut acc = BigUint::one();
        for (i, (xi, part)) in parts.iter().enumerate() {
            let mut num = delta.clone();
            let mut den = BigInt::one();
            for (j, (xj, _)) in parts.iter().enumerate() {
                if i != j {
                    num *= BigInt::from(*xj);
                    den *= BigInt::from(*xj as i64 - *xi as i64);
                }
            }
            let (mu, rem) = num.div_rem(&den);
            debug_assert!(rem.is_zero(), "Δ clears Lagrange denominators");
            let exp = mu * 2;
            let term = self.scale(part, &exp);
            acc = (acc * term) % &self.n_squared;
        }
        let l = (acc - 1u8) / &self.n;
        (l * &self.combine_factor) % &self.n
    }
}
