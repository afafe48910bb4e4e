//! Exact rational arithmetic shared by the oracle tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn choose(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

pub fn pow(x: &BigRational, e: u64) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e {
        out *= x;
    }
    out
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("finite rational")
}

/// `P(lo < S <= hi)` for `S ~ B(n, p)`, exactly.
pub fn binom_range(n: u64, p: &BigRational, lo: i64, hi: i64) -> BigRational {
    let q = BigRational::one() - p;
    let mut total = BigRational::zero();
    for k in (lo + 1).max(0)..=hi.min(n as i64) {
        let k = k as u64;
        total += BigRational::from_integer(choose(n, k)) * pow(p, k) * pow(&q, n - k);
    }
    total
}

/// `sum_{k in (k_lo, k_hi]} sum_{m <= m_hi} C(d,k) C(k,m) v^m (u-v)^(k-m) (1-u)^(d-k)`.
pub fn nested_double_sum(d: u64, u: &BigRational, v: &BigRational, k_lo: i64, k_hi: i64, m_hi: i64) -> BigRational {
    let one = BigRational::one();
    let mut total = BigRational::zero();
    for k in (k_lo + 1).max(0)..=k_hi.min(d as i64) {
        let k = k as u64;
        let outer = BigRational::from_integer(choose(d, k)) * pow(&(&one - u), d - k);
        for m in 0..=m_hi.min(k as i64) {
            if m < 0 {
                continue;
            }
            let m = m as u64;
            total += &outer * BigRational::from_integer(choose(k, m)) * pow(v, m) * pow(&(u - v), k - m);
        }
    }
    total
}
