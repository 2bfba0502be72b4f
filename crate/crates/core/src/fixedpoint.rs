//! Fixed-point evaluation of `10^c * ln(x)` with enough precision that
//! nearest-integer rounding of lattice log rows is reproducible bit for bit.
//!
//! Values are nonnegative reals stored as `BigInt` scaled by 2^192. The
//! absolute error of a full `pow10 * ln` evaluation stays below 2^-170,
//! so the rounding decision is unambiguous for every realistic input.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::sync::OnceLock;

use crate::error::{Error, Result};

const FRAC_BITS: u64 = 192;

/// Nonnegative fixed-point real with 192 fractional bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixed(BigInt);

fn fixed_one() -> BigInt {
    BigInt::one() << FRAC_BITS
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> FRAC_BITS
}

fn div(a: &BigInt, b: &BigInt) -> BigInt {
    (a << FRAC_BITS) / b
}

/// ln(2) = 2 atanh(1/3).
fn ln2() -> &'static BigInt {
    static LN2: OnceLock<BigInt> = OnceLock::new();
    LN2.get_or_init(|| {
        let z = fixed_one() / 3;
        atanh(&z) << 1
    })
}

/// atanh(z) = z + z^3/3 + z^5/5 + ... for 0 <= z < 1/2.
fn atanh(z: &BigInt) -> BigInt {
    let z2 = mul(z, z);
    let mut term = z.clone();
    let mut sum = z.clone();
    let mut k = 3u64;
    loop {
        term = mul(&term, &z2);
        let contrib = &term / k;
        if contrib.is_zero() {
            return sum;
        }
        sum += contrib;
        k += 2;
    }
}

/// Natural logarithm of an integer `x >= 1` in fixed point.
fn ln_int(x: &BigUint) -> BigInt {
    assert!(!x.is_zero(), "ln of zero");
    if x.is_one() {
        return BigInt::zero();
    }
    // x = y * 2^k with y in [1, 2): ln x = ln y + k ln 2.
    let k = x.bits() - 1;
    let x = BigInt::from(x.clone());
    let y = if FRAC_BITS >= k { x << (FRAC_BITS - k) } else { x >> (k - FRAC_BITS) };
    let num = &y - fixed_one();
    let den = &y + fixed_one();
    let z = div(&num, &den);
    (atanh(&z) << 1) + ln2() * BigInt::from(k)
}

/// exp(x) for fixed-point 0 <= x <= 96.
fn exp_fixed(x: &BigInt) -> Result<BigInt> {
    if x.is_negative() {
        return Err(Error::Domain("exp argument must be nonnegative".into()));
    }
    if (x >> FRAC_BITS) > BigInt::from(96) {
        return Err(Error::Domain("exp argument too large".into()));
    }
    // Halve until the argument is below 1/2, then Taylor and square back.
    let int_bits = (x.bits() as i64) - FRAC_BITS as i64;
    let halvings = (int_bits + 1).max(0) as u64;
    let y = x >> halvings;

    let mut term = fixed_one();
    let mut sum = fixed_one();
    let mut k = 1u64;
    loop {
        term = mul(&term, &y) / k;
        if term.is_zero() {
            break;
        }
        sum += &term;
        k += 1;
    }
    for _ in 0..halvings {
        sum = mul(&sum, &sum);
    }
    Ok(sum)
}

impl Fixed {
    /// 10^c for a finite nonnegative `c` (the dyadic value of the f64 is
    /// taken exactly).
    pub fn pow10(c: f64) -> Result<Fixed> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::Domain(format!("precision c = {c} out of range")));
        }
        if c > 24.0 {
            return Err(Error::Domain(format!("precision c = {c} unreasonably large")));
        }
        let c_fixed = fixed_from_f64(c);
        let ln10 = ln_int(&BigUint::from(10u32));
        Ok(Fixed(exp_fixed(&mul(&c_fixed, &ln10))?))
    }

    /// Nearest integer to `self * ln(x)`, halves rounded up.
    pub fn rounded_scaled_ln(&self, x: &BigUint) -> Result<BigInt> {
        if x.is_zero() {
            return Err(Error::Domain("ln of zero".into()));
        }
        let v = mul(&self.0, &ln_int(x));
        Ok(round_half_up_fixed(&v))
    }

    pub fn to_f64(&self) -> f64 {
        // Good to ~15 digits; used for reporting only.
        let int_part = (&self.0 >> FRAC_BITS).to_f64().unwrap_or(f64::MAX);
        let frac_mask: BigInt = fixed_one() - 1;
        let frac: BigInt = &self.0 & &frac_mask;
        let frac = frac.to_f64().unwrap_or(0.0);
        int_part + frac / 2f64.powi(FRAC_BITS as i32)
    }
}

/// floor(v + 1/2) on a nonnegative fixed-point value.
fn round_half_up_fixed(v: &BigInt) -> BigInt {
    (v + (BigInt::one() << (FRAC_BITS - 1))) >> FRAC_BITS
}

/// Exact fixed-point image of a small nonnegative f64.
fn fixed_from_f64(x: f64) -> BigInt {
    debug_assert!(x.is_finite() && x >= 0.0);
    // Scale by 2^64 exactly (f64 mantissa has 52 bits), then shift up.
    let scaled = x * 2f64.powi(64);
    assert!(scaled < 2f64.powi(127), "fixed_from_f64 out of range");
    BigInt::from(scaled as u128) << (FRAC_BITS - 64)
}
