//! Arbitrary-precision integer primitives: prime bases, smoothness
//! decomposition, modular arithmetic and RSA test-key generation.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Ordered list of the first `size` primes, with an optional sign element
/// `p0 = -1` tracked as a flag so list indices align with lattice coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeBasis {
    primes: Vec<u64>,
    include_sign: bool,
}

impl PrimeBasis {
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn size(&self) -> usize {
        self.primes.len()
    }

    pub fn include_sign(&self) -> bool {
        self.include_sign
    }

    /// Largest prime in the basis (the smoothness bound).
    pub fn bound(&self) -> u64 {
        *self.primes.last().expect("basis is never empty")
    }
}

/// Signed exponent vector over a [`PrimeBasis`]; `e0` is the exponent of the
/// sign element `p0 = -1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplicityVector {
    pub e0: u8,
    pub exponents: Vec<i64>,
}

impl MultiplicityVector {
    /// Rebuild the integer `(-1)^e0 * prod p_j^{e_j}`.
    ///
    /// Only defined for nonnegative exponents; ratio-form vectors with
    /// negative entries cannot be reconstructed as an integer.
    pub fn reconstruct(&self, basis: &PrimeBasis) -> Result<BigInt> {
        let mut acc = BigUint::one();
        for (&e, &p) in self.exponents.iter().zip(basis.primes()) {
            if e < 0 {
                return Err(Error::NotRepresentable(
                    "negative exponent in integer reconstruction".into(),
                ));
            }
            let e = u32::try_from(e)
                .map_err(|_| Error::Overflow(format!("exponent {e} out of range")))?;
            acc *= BigUint::from(p).pow(e);
        }
        let sign = if self.e0 % 2 == 1 { Sign::Minus } else { Sign::Plus };
        Ok(BigInt::from_biguint(sign, acc))
    }
}

/// Build the basis of the first `size` consecutive primes.
pub fn generate_prime_basis(size: usize, include_sign: bool) -> Result<PrimeBasis> {
    if size == 0 {
        return Err(Error::InvalidArgument("prime basis size must be >= 1".into()));
    }
    Ok(PrimeBasis {
        primes: first_n_primes(size),
        include_sign,
    })
}

/// First `count` primes via a sieve of Eratosthenes with a Rosser-style
/// upper bound on p_count (grown on the rare underestimate).
pub fn first_n_primes(count: usize) -> Vec<u64> {
    let mut bound = if count < 6 {
        16
    } else {
        let x = count as f64;
        (x * (x.ln() + x.ln().ln()) * 1.2) as usize + 16
    };
    loop {
        let primes = sieve_below(bound);
        if primes.len() >= count {
            return primes[..count].to_vec();
        }
        bound *= 2;
    }
}

/// All primes strictly below `bound`.
pub fn sieve_below(bound: usize) -> Vec<u64> {
    if bound < 3 {
        return Vec::new();
    }
    let mut composite = vec![false; bound];
    let mut primes = Vec::new();
    for p in 2..bound {
        if !composite[p] {
            primes.push(p as u64);
            let mut k = p * p;
            while k < bound {
                composite[k] = true;
                k += p;
            }
        }
    }
    primes
}

/// Trial-divide `x` over the basis.
///
/// Returns `Ok(Some(..))` with the unique multiplicity vector when `|x|`
/// factors completely over the basis primes, `Ok(None)` otherwise.
pub fn smooth_decompose(x: &BigInt, basis: &PrimeBasis) -> Result<Option<MultiplicityVector>> {
    if x.is_zero() {
        return Err(Error::InvalidArgument("cannot decompose zero".into()));
    }
    if x.is_negative() && !basis.include_sign() {
        return Err(Error::NotRepresentable(
            "negative value over a basis without the sign element".into(),
        ));
    }
    let e0 = u8::from(x.is_negative());
    let mag = x.magnitude();

    let exponents = match mag.to_u128() {
        Some(small) => decompose_u128(small, basis.primes()),
        None => decompose_big(mag, basis.primes()),
    };
    Ok(exponents.map(|exponents| MultiplicityVector { e0, exponents }))
}

fn decompose_u128(mut value: u128, primes: &[u64]) -> Option<Vec<i64>> {
    let mut exps = vec![0i64; primes.len()];
    for (j, &p) in primes.iter().enumerate() {
        if value == 1 {
            break;
        }
        let p = p as u128;
        if p * p > value {
            // Remaining cofactor is prime; it is smooth iff it appears later
            // in the basis, so search instead of dividing by everything.
            if let Ok(cofactor) = u64::try_from(value) {
                if let Ok(idx) = primes[j..].binary_search(&cofactor) {
                    exps[j + idx] = 1;
                    value = 1;
                }
            }
            break;
        }
        while value % p == 0 {
            value /= p;
            exps[j] += 1;
        }
    }
    (value == 1).then_some(exps)
}

fn decompose_big(value: &BigUint, primes: &[u64]) -> Option<Vec<i64>> {
    let mut exps = vec![0i64; primes.len()];
    let mut rest = value.clone();
    for (j, &p) in primes.iter().enumerate() {
        if let Some(small) = rest.to_u128() {
            let tail = decompose_u128(small, &primes[j..])?;
            for (slot, e) in exps[j..].iter_mut().zip(tail) {
                *slot = e;
            }
            return Some(exps);
        }
        let p = BigUint::from(p);
        loop {
            let (q, r) = rest.div_rem(&p);
            if !r.is_zero() {
                break;
            }
            rest = q;
            exps[j] += 1;
        }
    }
    rest.is_one().then_some(exps)
}

/// Greatest common divisor by the Euclidean algorithm.
pub fn gcd(a: &BigUint, b: &BigUint) -> Result<BigUint> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::InvalidArgument("gcd(0, 0) is undefined".into()));
    }
    let (mut a, mut b) = (a.clone(), b.clone());
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    Ok(a)
}

/// `base^exponent mod modulus` by square-and-multiply.
pub fn mod_pow(base: &BigInt, exponent: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if modulus < &BigUint::from(2u32) {
        return Err(Error::InvalidArgument("modulus must be >= 2".into()));
    }
    let m = BigInt::from(modulus.clone());
    let reduced = base.mod_floor(&m);
    Ok(reduced
        .magnitude()
        .modpow(exponent, modulus))
}

/// Miller–Rabin primality test: deterministic witness set below 2^64,
/// 40 seed-derived pseudorandom rounds above.
pub fn is_prime(n: &BigUint) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let trailing = n_minus_1.trailing_zeros().unwrap_or(0);
    let odd_part = &n_minus_1 >> trailing;

    let witness = |a: &BigUint| -> bool {
        // true => composite witnessed
        let mut x = a.modpow(&odd_part, n);
        if x.is_one() || x == n_minus_1 {
            return false;
        }
        for _ in 1..trailing {
            x = &x * &x % n;
            if x == n_minus_1 {
                return false;
            }
        }
        true
    };

    if n.bits() <= 64 {
        // This witness set is deterministic for all n < 3.3 * 10^24.
        for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            if witness(&BigUint::from(a)) {
                return false;
            }
        }
        true
    } else {
        let mut rng = SplitMix64::new(
            n.to_u64_digits().iter().fold(n.bits(), |acc, d| acc ^ d.rotate_left(13)),
        );
        let span = n - 3u32;
        for _ in 0..40 {
            // Uniform-ish base in [2, n-2]; modulo bias is irrelevant here.
            let mut a = BigUint::zero();
            for _ in 0..(span.bits() + 63) / 64 {
                a = (a << 64) | BigUint::from(rng.next_u64());
            }
            let a = &a % &span + 2u32;
            if witness(&a) {
                return false;
            }
        }
        true
    }
}

/// An RSA modulus with its bit length and, when known, its prime factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaKey {
    pub n: BigUint,
    pub bits: u64,
    pub p: Option<BigUint>,
    pub q: Option<BigUint>,
}

#[derive(Serialize, Deserialize)]
struct RsaKeyJson {
    #[serde(rename = "N")]
    n: String,
    bits: u64,
    p: Option<String>,
    q: Option<String>,
}

impl RsaKey {
    /// Wrap a modulus whose factors are unknown.
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n < BigUint::from(4u32) {
            return Err(Error::InvalidArgument("modulus too small".into()));
        }
        let bits = n.bits();
        Ok(Self { n, bits, p: None, q: None })
    }

    /// Wrap a modulus with known prime factors, checking `n = p * q`.
    pub fn with_factors(p: BigUint, q: BigUint) -> Result<Self> {
        if !is_prime(&p) || !is_prime(&q) {
            return Err(Error::InvalidArgument("factors must be prime".into()));
        }
        let n = &p * &q;
        let bits = n.bits();
        Ok(Self { n, bits, p: Some(p), q: Some(q) })
    }

    pub fn to_json(&self) -> String {
        let doc = RsaKeyJson {
            n: self.n.to_string(),
            bits: self.bits,
            p: self.p.as_ref().map(|v| v.to_string()),
            q: self.q.as_ref().map(|v| v.to_string()),
        };
        serde_json::to_string(&doc).expect("key serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RsaKeyJson = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("bad key JSON: {e}")))?;
        let parse = |s: &str| -> Result<BigUint> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad decimal integer {s:?}")))
        };
        let n = parse(&doc.n)?;
        if n.bits() != doc.bits {
            return Err(Error::InvalidArgument(format!(
                "bit length field {} does not match N ({} bits)",
                doc.bits,
                n.bits()
            )));
        }
        let p = doc.p.as_deref().map(parse).transpose()?;
        let q = doc.q.as_deref().map(parse).transpose()?;
        if let (Some(p), Some(q)) = (&p, &q) {
            if p * q != n {
                return Err(Error::InvalidArgument("p * q != N".into()));
            }
        }
        Ok(Self { n, bits: doc.bits, p, q })
    }
}

/// Deterministically generate an RSA key of exactly `bits` bits from `seed`.
///
/// The factors are random primes of `ceil(bits/2)` and `floor(bits/2)` bits,
/// redrawn until the product has exactly `bits` bits and `p != q`.
pub fn generate_rsa_key(bits: u64, seed: u64) -> Result<RsaKey> {
    if bits < 8 {
        return Err(Error::InvalidArgument(
            "key must have at least 8 bits".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let p_bits = bits.div_ceil(2);
    let q_bits = bits / 2;
    for _ in 0..100_000 {
        let p = random_prime(p_bits, &mut rng);
        let q = random_prime(q_bits, &mut rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() == bits {
            let (p, q) = if p <= q { (p, q) } else { (q, p) };
            return Ok(RsaKey { n, bits, p: Some(p), q: Some(q) });
        }
    }
    Err(Error::Internal(format!(
        "prime search did not terminate for {bits}-bit key"
    )))
}

fn random_prime(bits: u64, rng: &mut SplitMix64) -> BigUint {
    assert!(bits >= 2);
    loop {
        let mut candidate = BigUint::zero();
        for _ in 0..bits.div_ceil(64) {
            candidate = (candidate << 64) | BigUint::from(rng.next_u64());
        }
        candidate >>= (bits.div_ceil(64) * 64 - bits) as usize;
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_prime(&candidate) {
            return candidate;
        }
    }
}
