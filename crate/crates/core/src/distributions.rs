//! Offspring and lifetime laws.

use rand_distr::Distribution;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// How far the probabilities may miss 1 before construction is refused.
/// Renormalizing silently would hide configuration bugs, so we never do.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Finite-support offspring law `(p_k)_{k=0..k_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution<F> {
    probs: Vec<F>,
    cumulative: Vec<F>,
}

impl<F: Scalar> OffspringDistribution<F> {
    /// Validates and stores the law. Trailing zeros are trimmed so that
    /// `probs[k_max] > 0`; entries must lie in `[0, 1]` and sum to 1 within
    /// [`PROB_SUM_TOL`].
    pub fn new(mut probs: Vec<F>) -> Result<Self> {
        while probs.len() > 1 && *probs.last().unwrap() == F::zero() {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(Error::Config(
                "offspring law needs at least one entry".into(),
            ));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !(p >= F::zero() && p <= F::one()) {
                return Err(Error::Config(format!(
                    "offspring probability p_{k} = {p} outside [0, 1]"
                )));
            }
        }
        let sum: F = probs.iter().copied().sum();
        if (sum - F::one()).abs().as_f64() > PROB_SUM_TOL {
            return Err(Error::Config(format!(
                "offspring probabilities sum to {sum}, not 1 (tolerance {PROB_SUM_TOL:e}); \
                 renormalize explicitly if that is intended"
            )));
        }
        if probs.len() > 1 && *probs.last().unwrap() == F::zero() {
            return Err(Error::Config("p_{k_max} must be positive".into()));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = F::zero();
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(Self { probs, cumulative })
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    /// `p_k`, zero beyond the support.
    pub fn prob(&self, k: usize) -> F {
        self.probs.get(k).copied().unwrap_or_else(F::zero)
    }

    pub fn k_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mean offspring number `m = Σ k p_k = f'(1)`.
    pub fn mean(&self) -> F {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| F::of_usize(k) * p)
            .sum()
    }

    /// One-step probability generating function `f(s) = Σ p_k s^k`, Horner form.
    pub fn pgf(&self, s: F) -> Result<F> {
        check_unit_interval(s)?;
        Ok(self.pgf_raw(s).clamp(F::zero(), F::one()))
    }

    /// `f'(s) = Σ k p_k s^{k-1}`; equals the mean at `s = 1`.
    pub fn pgf_derivative(&self, s: F) -> Result<F> {
        check_unit_interval(s)?;
        Ok(self.pgf_derivative_raw(s).max(F::zero()))
    }

    /// Horner evaluation without the domain clamp, for solver internals that
    /// may sit a rounding error outside `[0, 1]`.
    #[inline]
    pub(crate) fn pgf_raw(&self, s: F) -> F {
        let mut acc = F::zero();
        for &p in self.probs.iter().rev() {
            acc = acc * s + p;
        }
        acc
    }

    #[inline]
    pub(crate) fn pgf_derivative_raw(&self, s: F) -> F {
        let mut acc = F::zero();
        for (k, &p) in self.probs.iter().enumerate().skip(1).rev() {
            acc = acc * s + F::of_usize(k) * p;
        }
        acc
    }

    /// Draws an offspring count by inverse CDF on the precomputed cumulative table.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = F::of(rng.uniform());
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.k_max())
    }
}

/// Lifetime distribution `μ` on the positive half-line.
#[derive(Debug, Clone, PartialEq)]
pub enum LifetimeLaw<F> {
    Exponential { rate: F },
    Deterministic { value: F },
    Gamma { shape: F, scale: F },
}

impl<F: Scalar> LifetimeLaw<F> {
    pub fn exponential(rate: F) -> Result<Self> {
        require_positive(rate, "exponential rate")?;
        Ok(Self::Exponential { rate })
    }

    pub fn deterministic(value: F) -> Result<Self> {
        require_positive(value, "deterministic lifetime")?;
        Ok(Self::Deterministic { value })
    }

    pub fn gamma(shape: F, scale: F) -> Result<Self> {
        require_positive(shape, "gamma shape")?;
        require_positive(scale, "gamma scale")?;
        Ok(Self::Gamma { shape, scale })
    }

    /// True for laws with a density (everything except `Deterministic`).
    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Deterministic { .. })
    }

    pub fn mean(&self) -> F {
        match *self {
            Self::Exponential { rate } => F::one() / rate,
            Self::Deterministic { value } => value,
            Self::Gamma { shape, scale } => shape * scale,
        }
    }

    /// One lifetime draw. Exponential uses the inverse CDF `-ln(1-U)/r`;
    /// Gamma uses the Marsaglia-Tsang rejection sampler from `rand_distr`.
    pub fn sample(&self, rng: &mut RngStream) -> F {
        match *self {
            Self::Exponential { rate } => {
                let u = rng.uniform();
                F::of(-(1.0 - u).ln()) / rate
            }
            Self::Deterministic { value } => value,
            Self::Gamma { shape, scale } => {
                let g = rand_distr::Gamma::new(shape.as_f64(), scale.as_f64())
                    .expect("parameters validated at construction");
                F::of(g.sample(rng))
            }
        }
    }

    /// Tail `μ((t, ∞))` for `t ≥ 0`. The deterministic tail is the
    /// right-continuous step `1{t < d}`.
    pub fn tail(&self, t: F) -> F {
        if t <= F::zero() {
            return F::one();
        }
        match *self {
            Self::Exponential { rate } => (-rate * t).exp(),
            Self::Deterministic { value } => {
                if t < value {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Self::Gamma { shape, scale } => F::of(gamma_ur(shape.as_f64(), (t / scale).as_f64())),
        }
    }

    /// Density of `μ` at `x`; domain error for the deterministic law.
    pub fn density(&self, x: F) -> Result<F> {
        match *self {
            Self::Exponential { rate } => Ok(if x < F::zero() {
                F::zero()
            } else {
                rate * (-rate * x).exp()
            }),
            Self::Deterministic { .. } => Err(Error::Domain(
                "deterministic lifetimes have no density; use the lattice path".into(),
            )),
            Self::Gamma { shape, scale } => {
                if x < F::zero() || (x == F::zero() && shape >= F::one()) {
                    return Ok(F::zero());
                }
                if x == F::zero() {
                    // shape < 1 diverges at the origin
                    return Ok(F::infinity());
                }
                let (a, th, xf) = (shape.as_f64(), scale.as_f64(), x.as_f64());
                Ok(F::of(
                    ((a - 1.0) * xf.ln() - xf / th - ln_gamma(a) - a * th.ln()).exp(),
                ))
            }
        }
    }
}

fn check_unit_interval<F: Scalar>(s: F) -> Result<()> {
    if s >= F::zero() && s <= F::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("s = {s} outside [0, 1]")))
    }
}

fn require_positive<F: Scalar>(x: F, what: &str) -> Result<()> {
    if x > F::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} must be strictly positive, got {x}"
        )))
    }
}
