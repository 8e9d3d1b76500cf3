//! Insecure stand-in for both schemes, used for fast functional testing.
//!
//! A ciphertext is the plaintext residue plus a fresh nonce. Partial
//! decryptions are masked with a Shamir sharing of zero so that a single
//! share reveals nothing structurally and two shares are needed to finish,
//! mirroring the control flow of the real schemes.

use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::Rng;

/// Plaintext space of the additive scheme: the Mersenne prime 2^127 - 1.
pub fn add_space() -> BigUint {
    (BigUint::one() << 127u8) - 1u8
}

/// Safe prime `p ≡ 7 (mod 8)` for the multiplicative scheme.
pub const MUL_PRIME: u64 = 0x3fff_ffff_ffff_d2bf;

pub fn nonce<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    loop {
        let n = rng.gen::<u64>();
        if n != 0 {
            return n;
        }
    }
}

/// Deterministic non-zero nonce for a ciphertext derived from others.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(23) ^ 0x9e37_79b9_7f4a_7c15;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    if z == 0 {
        1
    } else {
        z
    }
}

/// Shares of zero `s_x = a·x mod M` for 1-based `x`.
pub fn zero_shares<R: Rng + ?Sized>(parties: usize, rng: &mut R) -> Vec<BigUint> {
    let m = add_space();
    let a = rng.gen_biguint_range(&BigUint::one(), &m);
    (1..=parties).map(|x| (&a * BigUint::from(x)) % &m).collect()
}

pub fn mask(value: &BigUint, share: &BigUint, nonce: u64) -> BigUint {
    let m = add_space();
    (value + share * BigUint::from(nonce)) % &m
}

/// Recovers the value from party `xi`'s masked value using party `xj`'s share.
pub fn unmask(masked: &BigUint, nonce: u64, xi: usize, xj: usize, share_j: &BigUint) -> BigUint {
    let m = add_space();
    let inv_xj = BigUint::from(xj).modinv(&m).expect("M is prime");
    let share_i = share_j * BigUint::from(xi) % &m * inv_xj % &m;
    let offset = share_i * BigUint::from(nonce) % &m;
    (masked + &m - offset) % &m
}
