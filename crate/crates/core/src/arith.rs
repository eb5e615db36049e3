//! Exact elementary number theory: sieving, trial-division factorization,
//! the Kronecker symbol and the decomposition D = d·f² of a discriminant.

use fixedbitset::FixedBitSet;
use num_integer::{Integer, Roots};

use crate::error::{Error, Result};

/// Largest sieve limit accepted before reporting a resource error (about 500 MB of bits).
pub const SIEVE_LIMIT_MAX: u64 = 4_000_000_000;

/// Sieve of Eratosthenes up to an inclusive limit.
///
/// Immutable once built, so it can be shared read-only between workers.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    is_prime: FixedBitSet,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn new(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::domain(format!("sieve limit {limit} is below 2")));
        }
        if limit > SIEVE_LIMIT_MAX {
            return Err(Error::resource(format!(
                "sieve limit {limit} exceeds the budget of {SIEVE_LIMIT_MAX}"
            )));
        }
        let n = limit as usize;
        let mut bits = FixedBitSet::with_capacity(n + 1);
        bits.insert_range(2..n + 1);
        let mut p = 2usize;
        while p * p <= n {
            if bits.contains(p) {
                let mut m = p * p;
                while m <= n {
                    bits.set(m, false);
                    m += p;
                }
            }
            p += 1;
        }
        let primes = bits.ones().map(|i| i as u64).collect();
        Ok(PrimeTable {
            limit,
            is_prime: bits,
            primes,
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Primality of `n`; values above the limit are reported as an error.
    pub fn is_prime(&self, n: u64) -> Result<bool> {
        if n > self.limit {
            return Err(Error::resource(format!(
                "{n} lies above the prime table limit {}",
                self.limit
            )));
        }
        Ok(self.is_prime.contains(n as usize))
    }

    /// Primality for `n` within the table; panics above the limit.
    pub fn contains(&self, n: u64) -> bool {
        assert!(n <= self.limit, "{n} lies above the prime table limit");
        self.is_prime.contains(n as usize)
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Number of primes not exceeding `x` (x clamped to the limit).
    pub fn pi(&self, x: u64) -> usize {
        self.primes.partition_point(|&p| p <= x)
    }

    pub(crate) fn bits(&self) -> &FixedBitSet {
        &self.is_prime
    }
}

pub fn sieve(limit: u64) -> Result<PrimeTable> {
    PrimeTable::new(limit)
}

/// Deterministic primality by trial division; inputs here stay well below 10¹².
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return false;
        }
        p += 2;
    }
    true
}

/// Prime factorization `n = ∏ p^e`, primes ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn exponent(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    pub fn omega(&self) -> usize {
        self.factors.len()
    }
}

pub fn factorize(n: u64) -> Factorization {
    assert!(n >= 1, "factorize requires n >= 1");
    let mut factors = Vec::new();
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if m > 1 {
        factors.push((m, 1));
    }
    Factorization { n, factors }
}

/// Jacobi symbol (a/n) for odd positive n.
fn jacobi(a: u64, n: u64) -> i8 {
    debug_assert!(n % 2 == 1);
    let mut a = a % n;
    let mut n = n;
    let mut t = 1i8;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// The Kronecker symbol (a/n), extended to all integers n.
///
/// Conventions: (a/2) is 0 for even a, +1 for a ≡ ±1 (mod 8) and −1 for
/// a ≡ ±3 (mod 8); (a/−1) is −1 exactly when a < 0; (a/0) is 1 iff a = ±1.
pub fn kronecker(a: i64, n: i64) -> i8 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut sign = 1i8;
    if n < 0 && a < 0 {
        sign = -1;
    }
    let mut m = n.unsigned_abs();
    let twos = m.trailing_zeros();
    if twos > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if twos % 2 == 1 && matches!(a.rem_euclid(8), 3 | 5) {
            sign = -sign;
        }
        m >>= twos;
    }
    if m == 1 {
        return sign;
    }
    let r = a.rem_euclid(m as i64) as u64;
    sign * jacobi(r, m)
}

/// p* = (−1)^((p−1)/2)·p for an odd prime p.
pub fn p_star(p: u64) -> Result<i64> {
    if p % 2 == 0 || !is_prime(p) {
        return Err(Error::domain(format!(
            "p* is defined for odd primes, got {p}"
        )));
    }
    let p = i64::try_from(p).map_err(|_| Error::Overflow("p_star"))?;
    Ok(if p % 4 == 1 { p } else { -p })
}

pub fn is_discriminant(disc: i64) -> bool {
    disc < 0 && matches!(disc.rem_euclid(4), 0 | 1)
}

fn is_squarefree(n: u64) -> bool {
    factorize(n).factors.iter().all(|&(_, e)| e == 1)
}

/// Whether `d < 0` is the discriminant of an imaginary quadratic field.
pub fn is_fundamental(d: i64) -> bool {
    if d >= 0 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => is_squarefree(d.unsigned_abs()),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && is_squarefree(m.unsigned_abs())
        }
        _ => false,
    }
}

/// Splits a negative discriminant as D = d·f² with d fundamental.
pub fn fundamental_decomposition(disc: i64) -> Result<(i64, i64)> {
    if !is_discriminant(disc) {
        return Err(Error::domain(format!(
            "{disc} is not a negative discriminant (need D < 0, D ≡ 0,1 mod 4)"
        )));
    }
    let fac = factorize(disc.unsigned_abs());
    let mut core: i64 = -1;
    let mut root: i64 = 1;
    for &(p, e) in &fac.factors {
        let p = p as i64;
        if e % 2 == 1 {
            core *= p;
        }
        root *= p.pow(e / 2);
    }
    if core.rem_euclid(4) == 1 {
        Ok((core, root))
    } else {
        // D ≡ 0 mod 4 with a squarefree part ≡ 2,3 mod 4 forces 2 | root.
        debug_assert!(root % 2 == 0);
        Ok((4 * core, root / 2))
    }
}

/// A square root of `a` modulo an odd prime `p` (Tonelli–Shanks), if one exists.
pub fn sqrt_mod_prime(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if p == 2 || a == 0 {
        return Some(a);
    }
    let mul = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mul(r, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        r
    };
    if pow(a, (p - 1) / 2) != 1 {
        return None;
    }
    let mut q = p - 1;
    let mut s = 0;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while pow(z, (p - 1) / 2) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow(z, q);
    let mut t = pow(a, q);
    let mut r = pow(a, q.div_ceil(2));
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul(t2, t2);
            i += 1;
        }
        let b = pow(c, 1 << (m - i - 1));
        m = i;
        c = mul(b, b);
        t = mul(t, c);
        r = mul(r, b);
    }
    Some(r)
}

pub fn isqrt(n: u64) -> u64 {
    n.sqrt()
}

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .factors
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}
