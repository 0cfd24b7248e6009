//! Extended-precision evaluation of the entrance-time CDF.
//!
//! The alternating sum
//!   P(zeta_n <= t) = (1/n!) sum_{j=1}^n C(n,j) (-1)^{n-j} j^n (1 - e^{-t/j})
//! has terms of magnitude up to roughly e^n while the result is at most 1,
//! so double precision is unusable beyond n of about 12. Here the sum is
//! accumulated in fixed-point big-integer arithmetic with enough fraction
//! bits to absorb the cancellation. Binomials and powers are exact
//! integers; only the exponentials are rounded, each to within a few ulps
//! of the working precision.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Fraction bits needed for order n: the largest term is about
/// e^n / sqrt(2 pi n) ~ 2^{1.45 n}, plus guard bits for rounding noise.
fn precision_bits(n: u64) -> u32 {
    (3 * n / 2) as u32 + 96
}

/// Exact fixed-point image of a non-negative finite f64 at `prec` bits.
fn fix_from_f64(x: f64, prec: u32) -> BigInt {
    assert!(x >= 0.0 && x.is_finite());
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp_bits == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let shift = e + prec as i64;
    let m = BigInt::from(mant);
    if shift >= 0 {
        m << shift
    } else {
        m >> (-shift)
    }
}

/// e^{-x} for fixed-point x >= 0, result fixed-point in [0, 1].
fn exp_neg(x: &BigInt, prec: u32) -> BigInt {
    let one = BigInt::one() << prec;
    let k = (x >> prec).to_u64().expect("exponent within range");
    let r = x - (BigInt::from(k) << prec);
    // Taylor for e^{-r}, r in [0, 1): alternating with decreasing terms.
    let mut sum = one.clone();
    let mut term = one.clone();
    let mut m = 1u64;
    loop {
        term = (&term * &r) >> prec;
        term /= m;
        if term.is_zero() {
            break;
        }
        if m % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        m += 1;
    }
    if k == 0 {
        return sum;
    }
    // e^{-k} by binary exponentiation of e^{-1}.
    let mut base = exp_neg_unit(prec);
    let mut acc = sum;
    let mut k = k;
    loop {
        if k & 1 == 1 {
            acc = (&acc * &base) >> prec;
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = (&base * &base) >> prec;
    }
    acc
}

/// e^{-1} at `prec` bits from the alternating factorial series.
fn exp_neg_unit(prec: u32) -> BigInt {
    let one = BigInt::one() << prec;
    let mut sum = one.clone();
    let mut term = one;
    let mut m = 1u64;
    loop {
        term /= m;
        if term.is_zero() {
            break;
        }
        if m % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        m += 1;
    }
    sum
}

/// P(zeta_n <= t) by the alternating binomial sum in fixed point.
pub fn entrance_cdf_big(n: u64, t: f64) -> f64 {
    assert!(n >= 1);
    let prec = precision_bits(n);
    let one = BigInt::one() << prec;
    let tfix = fix_from_f64(t, prec);
    let mut sum = BigInt::zero();
    // C(n, j) built incrementally: C(n, j) = C(n, j-1) * (n - j + 1) / j.
    let mut binom = BigInt::from(n);
    for j in 1..=n {
        let x = &tfix / j;
        let g = &one - exp_neg(&x, prec); // 1 - e^{-t/j}
        let coeff = &binom * BigInt::from(j).pow(n as u32);
        let term = coeff * g;
        if (n - j) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if j < n {
            binom = binom * (n - j) / (j + 1);
        }
    }
    let mut fact = BigInt::one();
    for j in 2..=n {
        fact *= j;
    }
    let denom = fact.to_f64().expect("n! fits in f64") * 2f64.powi(prec as i32);
    let num = if sum.is_negative() {
        -(-&sum).to_f64().unwrap()
    } else {
        sum.to_f64().unwrap()
    };
    (num / denom).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fix_round_trips_dyadics() {
        for &x in &[0.0, 1.0, 0.5, 3.75, 12345.0625] {
            let f = fix_from_f64(x, 128);
            let back = f.to_f64().unwrap() / 2f64.powi(128);
            assert_eq!(back, x);
        }
    }

    #[test]
    fn exp_neg_matches_f64() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 17.0] {
            let prec = 128;
            let fx = fix_from_f64(x, prec);
            let got = exp_neg(&fx, prec).to_f64().unwrap() / 2f64.powi(prec as i32);
            assert!(
                (got - (-x).exp()).abs() < 1e-15,
                "x={x}: {got} vs {}",
                (-x).exp()
            );
        }
    }

    #[test]
    fn small_n_matches_closed_forms() {
        // n = 1: 1 - e^{-t}
        for &t in &[0.5, 2.0, 10.0] {
            let got = entrance_cdf_big(1, t);
            assert!((got - (1.0 - (-t).exp())).abs() < 1e-14);
        }
        // n = 2, t = 2: 1 - 2 e^{-1} + e^{-2}
        let expect = 1.0 - 2.0 * (-1.0f64).exp() + (-2.0f64).exp();
        assert!((entrance_cdf_big(2, 2.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn stays_in_unit_interval_at_large_n() {
        for n in [20u64, 40, 60] {
            for &t in &[0.0, 1.0, 10.0, 30.0, 100.0] {
                let p = entrance_cdf_big(n, t);
                assert!((0.0..=1.0).contains(&p), "n={n} t={t} p={p}");
            }
        }
    }
}
