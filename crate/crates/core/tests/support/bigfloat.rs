//! Binary fixed-point arithmetic on big integers, precise enough to act as
//! a reference for double-precision formulas.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Fractional bits.
const P: u64 = 320;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixed(BigInt);

impl Fixed {
    pub fn from_int(n: u64) -> Self {
        Fixed(BigInt::from(n) << P)
    }

    /// Exact conversion of a finite double.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite());
        if x == 0.0 {
            return Fixed(BigInt::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        let m = BigInt::from(sign) * BigInt::from(mantissa);
        let shift = e + P as i64;
        Fixed(if shift >= 0 { m << shift as u64 } else { m >> (-shift) as u64 })
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.0.bits() as i64;
        let drop = (bits - 64).max(0) as u64;
        let top = (&self.0 >> drop).to_f64().unwrap();
        top * 2f64.powi(drop as i32 - P as i32)
    }

    pub fn add(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 - &o.0)
    }

    pub fn mul(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 * &o.0) >> P)
    }

    pub fn div(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 << P) / &o.0)
    }

    pub fn sqrt(&self) -> Fixed {
        assert!(!self.0.is_negative());
        Fixed((&self.0 << P).sqrt())
    }

    /// `2 atanh(z) = ln((1 + z)/(1 − z))` for `|z| ≤ 1/3`.
    fn two_atanh(z: &Fixed) -> Fixed {
        let z2 = z.mul(z);
        let mut power = z.clone();
        let mut sum = Fixed(BigInt::zero());
        let mut k = 1u64;
        while !power.0.is_zero() {
            sum = sum.add(&Fixed(&power.0 / BigInt::from(k)));
            power = power.mul(&z2);
            k += 2;
        }
        Fixed(sum.0 * 2)
    }

    pub fn ln(&self) -> Fixed {
        assert!(self.0.is_positive());
        let one = Fixed(BigInt::one() << P);
        // self = 2^k · m with m in [1, 2)
        let k = self.0.bits() as i64 - P as i64 - 1;
        let m = if k >= 0 { Fixed(&self.0 >> k as u64) } else { Fixed(&self.0 << (-k) as u64) };
        let ln_m = Self::two_atanh(&m.sub(&one).div(&m.add(&one)));
        let three = Fixed::from_int(3);
        let ln2 = Self::two_atanh(&one.div(&three));
        Fixed(ln_m.0 + ln2.0 * BigInt::from(k))
    }
}

/// The bound evaluated in fixed point from the exact double inputs.
pub fn reference_bound(n: u64, delta: f64, dim: u64, w_norm2_sq: f64, rho: f64, rho0: f64) -> f64 {
    let one = Fixed::from_int(1);
    let nf = Fixed::from_int(n);
    let dimf = Fixed::from_int(dim);
    let rho = Fixed::from_f64(rho);
    let rho0 = Fixed::from_f64(rho0);
    let rho_prime_sq = rho.mul(&rho).add(&rho0.mul(&rho0));
    let spread = one.add(&nf.ln().div(&dimf).sqrt());
    let inner = one.add(&Fixed::from_f64(w_norm2_sq).div(&rho_prime_sq).mul(&spread).mul(&spread));
    let complexity = dimf.mul(&inner.ln());
    let confidence = Fixed::from_int(4).mul(&nf.div(&Fixed::from_f64(delta)).ln());
    let union = Fixed::from_int(8).mul(&Fixed::from_int(6 * n + 3 * dim).ln());
    let total = complexity.add(&confidence).add(&union);
    total.div(&nf.sub(&one)).sqrt().to_f64()
}

/// (n, δ, dim, ‖w‖², ρ′) grid shared by the oracle tests.
pub fn bound_grid() -> Vec<(u64, f64, u64, f64, f64)> {
    let mut grid = Vec::new();
    for (n, delta, dim) in [(100, 0.1, 10), (10_000, 0.05, 100), (1_000_000, 0.01, 5000)] {
        for w2 in [1.0, 100.0, 1e4] {
            for rho_prime in [0.05, 0.5, 2.0] {
                grid.push((n, delta, dim, w2, rho_prime));
            }
        }
    }
    grid
}
