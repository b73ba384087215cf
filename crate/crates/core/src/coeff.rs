//! Exact term coefficients: a rational times i^k times eps^m times a
//! polynomial in the quantization weight gamma.
//!
//! Canonical form keeps the imaginary power reduced to {0, 1} with the sign
//! of i^2 folded into the rational part, and keeps the gamma polynomial
//! primitive (integer coefficients with gcd one and positive leading
//! coefficient) with all rational content carried by `rational`. Terms with
//! different `(i_power, eps_power)` never merge; within one key the gamma
//! polynomials add exactly.

use alloc::vec;
use alloc::vec::Vec;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(num: i64) -> Rational {
    Rational::from_integer(BigInt::from(num))
}

/// Polynomial in gamma, ascending powers, without trailing zeros.
/// The empty vector is the zero polynomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GammaPoly(Vec<Rational>);

impl GammaPoly {
    pub fn zero() -> Self {
        GammaPoly(Vec::new())
    }

    pub fn one() -> Self {
        GammaPoly(vec![Rational::one()])
    }

    pub fn constant(c: Rational) -> Self {
        GammaPoly::from_coeffs(vec![c])
    }

    pub fn gamma() -> Self {
        GammaPoly(vec![Rational::zero(), Rational::one()])
    }

    pub fn gamma_pow(k: u32) -> Self {
        let mut v = vec![Rational::zero(); k as usize];
        v.push(Rational::one());
        GammaPoly(v)
    }

    /// Linear polynomial (c0 + c1 gamma) / den.
    pub fn linear(c0: i64, c1: i64, den: i64) -> Self {
        GammaPoly::from_coeffs(vec![rat(c0, den), rat(c1, den)])
    }

    pub fn from_coeffs(mut v: Vec<Rational>) -> Self {
        while v.last().map_or(false, |c| c.is_zero()) {
            v.pop();
        }
        GammaPoly(v)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0[0].is_one()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.0.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add(&self, other: &GammaPoly) -> GammaPoly {
        let n = self.0.len().max(other.0.len());
        let mut v = Vec::with_capacity(n);
        for k in 0..n {
            v.push(self.coeff(k) + other.coeff(k));
        }
        GammaPoly::from_coeffs(v)
    }

    pub fn mul(&self, other: &GammaPoly) -> GammaPoly {
        if self.is_zero() || other.is_zero() {
            return GammaPoly::zero();
        }
        let mut v = vec![Rational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        GammaPoly::from_coeffs(v)
    }

    pub fn scale(&self, c: &Rational) -> GammaPoly {
        if c.is_zero() {
            return GammaPoly::zero();
        }
        GammaPoly(self.0.iter().map(|a| a * c).collect())
    }

    pub fn neg(&self) -> GammaPoly {
        GammaPoly(self.0.iter().map(|a| -a).collect())
    }

    pub fn eval(&self, g: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.0.iter().rev() {
            acc = acc * g + c;
        }
        acc
    }

    /// Signed content: the rational c such that self = c * primitive where the
    /// primitive part has coprime integer coefficients and positive leading
    /// coefficient. Zero polynomial has content zero.
    fn signed_content(&self) -> Rational {
        if self.is_zero() {
            return Rational::zero();
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in &self.0 {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut content = Rational::new(num_gcd, den_lcm);
        if self.0.last().unwrap().is_negative() {
            content = -content;
        }
        content
    }
}

/// One term's scalar part: rational * i^i_power * eps^eps_power * gamma_poly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coefficient {
    rational: Rational,
    i_power: u8,
    eps_power: i32,
    gamma_poly: GammaPoly,
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient {
            rational: Rational::zero(),
            i_power: 0,
            eps_power: 0,
            gamma_poly: GammaPoly::one(),
        }
    }

    pub fn one() -> Self {
        Coefficient::from_rational(Rational::one())
    }

    pub fn from_rational(q: Rational) -> Self {
        Coefficient::from_parts(q, 0, 0, GammaPoly::one())
    }

    pub fn from_int(n: i64, d: i64) -> Self {
        Coefficient::from_rational(rat(n, d))
    }

    pub fn i() -> Self {
        Coefficient::from_parts(Rational::one(), 1, 0, GammaPoly::one())
    }

    pub fn i_pow(k: u32) -> Self {
        Coefficient::from_parts(Rational::one(), k, 0, GammaPoly::one())
    }

    pub fn eps_pow(m: i32) -> Self {
        Coefficient::from_parts(Rational::one(), 0, m, GammaPoly::one())
    }

    pub fn gamma_pow(k: u32) -> Self {
        Coefficient::from_parts(Rational::one(), 0, 0, GammaPoly::gamma_pow(k))
    }

    pub fn from_poly(p: GammaPoly) -> Self {
        Coefficient::from_parts(Rational::one(), 0, 0, p)
    }

    /// Normalizing constructor; i_power is reduced mod 4 and then to {0, 1}.
    pub fn from_parts(rational: Rational, i_power: u32, eps_power: i32, gamma_poly: GammaPoly) -> Self {
        let combined = gamma_poly.scale(&rational);
        if combined.is_zero() {
            return Coefficient::zero();
        }
        let mut content = combined.signed_content();
        let primitive = combined.scale(&(Rational::one() / &content));
        let i_mod = i_power % 4;
        let i_final = i_mod % 2;
        if i_mod >= 2 {
            content = -content;
        }
        Coefficient {
            rational: content,
            i_power: i_final as u8,
            eps_power,
            gamma_poly: primitive,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero()
    }

    pub fn rational(&self) -> &Rational {
        &self.rational
    }

    pub fn i_power(&self) -> u8 {
        self.i_power
    }

    pub fn eps_power(&self) -> i32 {
        self.eps_power
    }

    pub fn gamma_poly(&self) -> &GammaPoly {
        &self.gamma_poly
    }

    /// Merge key: terms combine only when imaginary and eps powers agree.
    pub fn merge_key(&self) -> (u8, i32) {
        (self.i_power, self.eps_power)
    }

    /// Gamma polynomial with the rational folded in.
    pub fn raw_poly(&self) -> GammaPoly {
        self.gamma_poly.scale(&self.rational)
    }

    pub fn mul(&self, other: &Coefficient) -> Coefficient {
        Coefficient::from_parts(
            &self.rational * &other.rational,
            (self.i_power + other.i_power) as u32,
            self.eps_power + other.eps_power,
            self.gamma_poly.mul(&other.gamma_poly),
        )
    }

    pub fn neg(&self) -> Coefficient {
        Coefficient::from_parts(
            -self.rational.clone(),
            self.i_power as u32,
            self.eps_power,
            self.gamma_poly.clone(),
        )
    }

    pub fn scale(&self, q: &Rational) -> Coefficient {
        Coefficient::from_parts(
            &self.rational * q,
            self.i_power as u32,
            self.eps_power,
            self.gamma_poly.clone(),
        )
    }

    pub fn times_eps(&self, m: i32) -> Coefficient {
        let mut c = self.clone();
        c.eps_power += m;
        c
    }

    /// Complex conjugate: i -> -i, everything else real.
    pub fn conj(&self) -> Coefficient {
        if self.i_power == 1 {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Substitute a rational value for gamma.
    pub fn eval_gamma(&self, g: &Rational) -> Coefficient {
        Coefficient::from_parts(
            &self.rational * self.gamma_poly.eval(g),
            self.i_power as u32,
            self.eps_power,
            GammaPoly::one(),
        )
    }

    /// Split into gamma monomials: (gamma degree, rational weight), ascending.
    pub fn gamma_monomials(&self) -> Vec<(usize, Rational)> {
        let raw = self.raw_poly();
        raw.coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (k, c.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i_powers_fold_into_sign() {
        let c = Coefficient::i_pow(2);
        assert_eq!(c, Coefficient::from_int(-1, 1));
        let c3 = Coefficient::i_pow(3);
        assert_eq!(c3.i_power(), 1);
        assert_eq!(c3.rational(), &rat_int(-1));
        assert_eq!(Coefficient::i().mul(&Coefficient::i()), Coefficient::from_int(-1, 1));
        assert_eq!(Coefficient::i_pow(4), Coefficient::one());
    }

    #[test]
    fn gamma_poly_content_is_extracted() {
        // (3 - 4 gamma)/12 stored as rational 1/12 times primitive -(4 gamma - 3)...
        let c = Coefficient::from_poly(GammaPoly::linear(3, -4, 12));
        // leading coefficient of the primitive part is positive
        assert!(c.gamma_poly().coeffs().last().unwrap() > &Rational::zero());
        let val = c.rational() * c.gamma_poly().eval(&rat(1, 2));
        assert_eq!(val, rat(1, 12)); // (3 - 2)/12
    }

    #[test]
    fn conj_flips_imaginary_sign() {
        let c = Coefficient::i().mul(&Coefficient::from_int(5, 3));
        let cc = c.conj();
        assert_eq!(cc.i_power(), 1);
        assert_eq!(cc.rational(), &rat(-5, 3));
        assert_eq!(cc.conj(), c);
    }

    #[test]
    fn eval_gamma_collapses_polynomial() {
        let c = Coefficient::from_poly(GammaPoly::linear(3, -4, 12));
        assert_eq!(c.eval_gamma(&rat(3, 4)), Coefficient::zero());
        assert_eq!(c.eval_gamma(&rat_int(0)), Coefficient::from_int(1, 4));
    }

    #[test]
    fn raw_poly_addition_merges_exactly() {
        // 1/2 + gamma/3 = (3 + 2 gamma)/6
        let a = Coefficient::from_int(1, 2).raw_poly();
        let b = Coefficient::from_poly(GammaPoly::linear(0, 1, 3)).raw_poly();
        let sum = a.add(&b);
        assert_eq!(sum, GammaPoly::linear(3, 2, 6).scale(&Rational::one()));
    }
}
