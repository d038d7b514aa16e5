//! Dense univariate polynomials over a generic coefficient ring.
//!
//! Used with `f64` coefficients for grid evaluation and with
//! [`num_rational::BigRational`] for the exact lattice-lifetime path, where
//! generating functions are iterated by polynomial composition and integrated
//! over `[0, 1]` without rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num};

/// Coefficients in ascending degree order; no trailing zeros (the zero
/// polynomial is the empty vector).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Num + Clone> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// The identity polynomial `s`.
    pub fn identity() -> Self {
        Self::new(vec![T::zero(), T::one()])
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Horner evaluation.
    pub fn eval(&self, x: &T) -> T {
        let mut acc = T::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    /// Constant term (the value at 0).
    pub fn constant_term(&self) -> T {
        self.coeffs.first().cloned().unwrap_or_else(T::zero)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| mul_usize(c.clone(), k))
            .collect();
        Self::new(coeffs)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, mut exp: usize) -> Self {
        let mut base = self.clone();
        let mut acc = Self::new(vec![T::one()]);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn scale(&self, factor: &T) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|c| c.clone() * factor.clone())
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.coeffs.get(i).cloned().unwrap_or_else(T::zero);
            let b = other.coeffs.get(i).cloned().unwrap_or_else(T::zero);
            out.push(a + b);
        }
        Self::new(out)
    }

    /// `self ∘ inner`, i.e. substitute `inner` for the variable, Horner form.
    pub fn compose(&self, inner: &Self) -> Self {
        let mut acc = Self::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&Self::new(vec![c.clone()]));
        }
        acc
    }

    /// Exact `∫_0^1 p(s) ds = Σ c_m / (m + 1)`.
    pub fn integral_unit(&self) -> T
    where
        T: FromPrimitive,
    {
        let mut acc = T::zero();
        for (m, c) in self.coeffs.iter().enumerate() {
            let denom = T::from_usize(m + 1).expect("small integer");
            acc = acc + c.clone() / denom;
        }
        acc
    }
}

fn mul_usize<T: Num + Clone>(c: T, k: usize) -> T {
    // repeated doubling; k is a polynomial degree, so this stays cheap
    let mut acc = T::zero();
    let mut add = c;
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc + add.clone();
        }
        k >>= 1;
        if k > 0 {
            add = add.clone() + add;
        }
    }
    acc
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite f64")
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    // num-rational's ToPrimitive handles arbitrary magnitudes
    use num_traits::ToPrimitive;
    x.to_f64().expect("rational convertible to f64")
}

pub fn rational_from_usize(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}
