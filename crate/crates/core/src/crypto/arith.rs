//! Number-theoretic helpers: primality testing, safe-prime generation,
//! Jacobi symbols and fixed-base exponentiation tables.

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

/// Odd primes used to sieve candidates before any modular exponentiation.
fn small_primes() -> &'static [u32] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = 1 << 13;
        let mut composite = vec![false; limit];
        let mut out = Vec::new();
        for i in 3..limit {
            if i % 2 == 1 && !composite[i] {
                out.push(i as u32);
                let mut j = i * i;
                while j < limit {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        out
    })
}

fn small_factor(n: &BigUint) -> bool {
    small_primes().iter().any(|&p| {
        let p = BigUint::from(p);
        n != &p && (n % &p).is_zero()
    })
}

/// Miller–Rabin with `rounds` random bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    if n == &two || n == &BigUint::from(3u8) {
        return true;
    }
    if n.is_even() || small_factor(n) {
        return false;
    }
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Returns a safe prime `p = 2p' + 1` with exactly `bits` bits and the top two
/// bits set. When `seven_mod_eight` is set the result also satisfies
/// `p ≡ 7 (mod 8)`, which makes 2 a quadratic residue.
pub fn safe_prime<R: Rng + ?Sized>(bits: u64, seven_mod_eight: bool, rng: &mut R) -> BigUint {
    assert!(bits >= 16, "safe primes below 16 bits are not supported");
    let primes = small_primes();
    loop {
        let mut q = rng.gen_biguint(bits - 1);
        q.set_bit(bits - 2, true);
        q.set_bit(bits - 3, true);
        q.set_bit(0, true);
        // p' ≡ 3 (mod 4) gives p ≡ 7 (mod 8).
        let step: u32 = if seven_mod_eight {
            q.set_bit(1, true);
            4
        } else {
            2
        };
        let mut residues: Vec<u32> =
            primes.iter().map(|&sp| (&q % sp).try_into().unwrap()).collect();
        for _ in 0..(1u32 << 14) {
            let passes = primes.iter().zip(&residues).all(|(&sp, &r)| {
                // Neither p' nor 2p' + 1 may be divisible by a small prime.
                r != 0 && (2 * r + 1) % sp != 0
            });
            if passes {
                let p = (&q << 1u8) + 1u8;
                let two = BigUint::from(2u8);
                if two.modpow(&(&p - 1u8), &p).is_one()
                    && is_probable_prime(&q, 24, rng)
                    && is_probable_prime(&p, 4, rng)
                {
                    return p;
                }
            }
            q += step;
            for (r, &sp) in residues.iter_mut().zip(primes) {
                *r = (*r + step) % sp;
            }
            if q.bits() != bits - 1 {
                break;
            }
        }
    }
}

/// Jacobi symbol (a / n) for odd positive `n`.
pub fn jacobi(a: &BigUint, n: &BigUint) -> i8 {
    assert!(n.is_odd(), "Jacobi symbol needs an odd modulus");
    let mut a = a % n;
    let mut n = n.clone();
    let mut result = 1i8;
    while !a.is_zero() {
        let tz = a.trailing_zeros().unwrap_or(0);
        a >>= tz;
        let n_mod_8 = (&n % 8u8).to_u8_lossy();
        if tz % 2 == 1 && (n_mod_8 == 3 || n_mod_8 == 5) {
            result = -result;
        }
        std::mem::swap(&mut a, &mut n);
        if (&a % 4u8).to_u8_lossy() == 3 && (&n % 4u8).to_u8_lossy() == 3 {
            result = -result;
        }
        a %= &n;
    }
    if n.is_one() {
        result
    } else {
        0
    }
}

trait LowByte {
    fn to_u8_lossy(&self) -> u8;
}

impl LowByte for BigUint {
    fn to_u8_lossy(&self) -> u8 {
        self.iter_u32_digits().next().unwrap_or(0) as u8
    }
}

/// Modular inverse, `None` when `a` and `m` are not coprime.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    a.modinv(m)
}

/// Reduces a signed integer into `[0, m)`.
pub fn reduce_signed(v: &BigInt, m: &BigUint) -> BigUint {
    let m = BigInt::from_biguint(Sign::Plus, m.clone());
    v.mod_floor(&m).to_biguint().expect("mod_floor result is non-negative")
}

/// Precomputed powers of a fixed base: `table[i][d - 1] = base^(d * 256^i)`.
///
/// An exponentiation with an exponent of at most `max_bits` bits then costs
/// one modular multiplication per non-zero byte of the exponent.
#[derive(Debug)]
pub struct FixedBase {
    modulus: BigUint,
    base: BigUint,
    table: Vec<Vec<BigUint>>,
}

impl FixedBase {
    pub fn new(base: &BigUint, modulus: &BigUint, max_bits: u64) -> Self {
        let windows = max_bits.div_ceil(8) as usize;
        let mut table = Vec::with_capacity(windows);
        let mut b = base % modulus;
        for _ in 0..windows {
            let mut row = Vec::with_capacity(255);
            let mut acc = b.clone();
            row.push(acc.clone());
            for _ in 2..=255 {
                acc = (&acc * &b) % modulus;
                row.push(acc.clone());
            }
            // base^(256^(i+1)) = base^(255 * 256^i) * base^(256^i)
            b = (&acc * &b) % modulus;
            table.push(row);
        }
        Self { modulus: modulus.clone(), base: base % modulus, table }
    }

    pub fn pow(&self, e: &BigUint) -> BigUint {
        let bytes = e.to_bytes_le();
        if bytes.len() > self.table.len() {
            return self.base.modpow(e, &self.modulus);
        }
        let mut acc = BigUint::one();
        for (row, &digit) in self.table.iter().zip(&bytes) {
            if digit != 0 {
                acc = (acc * &row[digit as usize - 1]) % &self.modulus;
            }
        }
        acc
    }
}

/// `n!` as a big integer.
pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn miller_rabin_matches_trial_division() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for n in 0u32..3000 {
            let naive = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_probable_prime(&BigUint::from(n), 8, &mut rng), naive, "n = {n}");
        }
        // Carmichael numbers fool Fermat but not Miller–Rabin.
        for c in [561u32, 1105, 1729, 2465, 2821, 6601, 8911] {
            assert!(!is_probable_prime(&BigUint::from(c), 8, &mut rng));
        }
    }

    #[test]
    fn generated_safe_primes_have_requested_shape() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for bits in [64u64, 128, 256] {
            let p = safe_prime(bits, true, &mut rng);
            assert_eq!(p.bits(), bits);
            assert_eq!((&p % 8u8), BigUint::from(7u8));
            let q = (&p - 1u8) >> 1;
            assert!(is_probable_prime(&q, 16, &mut rng));
            assert!(is_probable_prime(&p, 16, &mut rng));
        }
    }

    #[test]
    fn jacobi_agrees_with_euler_criterion() {
        let p = BigUint::from(1019u32);
        let e = BigUint::from(509u32);
        for a in 1u32..1019 {
            let a = BigUint::from(a);
            let euler = a.modpow(&e, &p);
            let expected = if euler.is_one() { 1 } else { -1 };
            assert_eq!(jacobi(&a, &p), expected);
        }
        assert_eq!(jacobi(&BigUint::from(9u8), &BigUint::from(15u8)), 0);
    }

    #[test]
    fn fixed_base_matches_modpow() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let m = rng.gen_biguint(300) | BigUint::one();
        let base = rng.gen_biguint_below(&m);
        let fb = FixedBase::new(&base, &m, 200);
        for bits in [0u64, 1, 7, 8, 9, 64, 199, 200, 260] {
            let e = rng.gen_biguint(bits);
            assert_eq!(fb.pow(&e), base.modpow(&e, &m), "bits = {bits}");
        }
    }
}
