//! Evaluators for the exact ancestral-lineage laws.
//!
//! The joint law of the reproduction events along a sampled lineage factors
//! into a renewal-process time component and a per-event size component; the
//! three sampling schemes differ only in the size component:
//!
//! * uniform marker: `ℓ p_ℓ E[s^{N_{T-t}}]^{ℓ-1}` jointly with the marker `s`
//!   ([`uniform_marker_density`]);
//! * marker-conditioned / Palm: `ℓ p_ℓ / E[N_T]` ([`palm_density`]);
//! * leftmost surviving: `p_ℓ P(N_{T-t} = 0)^k` ([`leftmost_density`]).
//!
//! The lattice specialization `μ = δ_1` is served exactly from the retained
//! polynomial coefficients ([`uniform_marker_lattice_exact`], [`leftmost_lattice_exact`]).

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::distributions::{LifetimeLaw, OffspringDistribution};
use crate::error::{Error, Result};
use crate::genfun::{DiscreteGenFun, GenFunTable, DEFAULT_COEFF_BUDGET};
use crate::quad::simpson;
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Survival probabilities below this make conditioning on `{N_T > 0}` degenerate.
pub const SURVIVAL_FLOOR: f64 = 1e-12;

/// Renewal process with interarrival law `μ`; carries the time component of
/// all three lineage laws.
#[derive(Debug, Clone)]
pub struct RenewalLaw<F> {
    law: LifetimeLaw<F>,
}

/// Arrival times in `(0, T]` plus the first arrival beyond `T`.
#[derive(Debug, Clone)]
pub struct RenewalSample<F> {
    pub arrivals: Vec<F>,
    pub next: F,
}

impl<F: Scalar> RenewalLaw<F> {
    pub fn new(law: LifetimeLaw<F>) -> Self {
        Self { law }
    }

    pub fn law(&self) -> &LifetimeLaw<F> {
        &self.law
    }

    /// Cumulative sums of i.i.d. lifetimes truncated at `horizon`.
    pub fn sample(&self, horizon: F, rng: &mut RngStream) -> RenewalSample<F> {
        let mut arrivals = Vec::new();
        let mut t = F::zero();
        loop {
            t += self.law.sample(rng);
            if t > horizon {
                return RenewalSample { arrivals, next: t };
            }
            arrivals.push(t);
        }
    }

    /// Joint density `P(τ_1 ∈ dt_1, ..., τ_j ∈ dt_j, τ_{j+1} > T)` for a
    /// continuous interarrival law. The exponential case uses the closed form
    /// `r^j e^{-rT}`, which is exactly constant over admissible time vectors.
    pub fn interval_density(&self, times: &[F], horizon: F) -> Result<F> {
        validate_times(times, horizon)?;
        match self.law {
            LifetimeLaw::Exponential { rate } => {
                Ok(rate.powi(times.len() as i32) * (-rate * horizon).exp())
            }
            LifetimeLaw::Deterministic { .. } => Err(Error::Domain(
                "interval density undefined for the lattice law; use the discrete path".into(),
            )),
            LifetimeLaw::Gamma { .. } => {
                let mut density = F::one();
                let mut prev = F::zero();
                for &t in times {
                    density *= self.law.density(t - prev)?;
                    prev = t;
                }
                Ok(density * self.law.tail(horizon - prev))
            }
        }
    }
}

fn validate_times<F: Scalar>(times: &[F], horizon: F) -> Result<()> {
    let mut prev = F::zero();
    for &t in times {
        if t <= prev {
            return Err(Error::Domain(format!(
                "event times must be strictly increasing and positive, got {t} after {prev}"
            )));
        }
        prev = t;
    }
    if prev > horizon {
        return Err(Error::Domain(format!(
            "event time {prev} beyond horizon {horizon}"
        )));
    }
    Ok(())
}

/// Arguments of the uniform-marker law: event times, event sizes, the marker
/// value and the horizon.
#[derive(Debug, Clone)]
pub struct UniformMarkerQuery<F> {
    pub times: Vec<F>,
    pub sizes: Vec<usize>,
    pub s: F,
    pub horizon: F,
}

impl<F: Scalar> UniformMarkerQuery<F> {
    pub fn new(times: Vec<F>, sizes: Vec<usize>, s: F, horizon: F) -> Result<Self> {
        if times.len() != sizes.len() {
            return Err(Error::Domain(
                "times and sizes must have equal length".into(),
            ));
        }
        if sizes.iter().any(|&l| l < 1) {
            return Err(Error::Domain("event sizes must be >= 1".into()));
        }
        if !(s >= F::zero() && s <= F::one()) {
            return Err(Error::Domain(format!("marker s = {s} outside [0, 1]")));
        }
        if horizon <= F::zero() {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        validate_times(&times, horizon)?;
        Ok(Self {
            times,
            sizes,
            s,
            horizon,
        })
    }

    pub fn j(&self) -> usize {
        self.times.len()
    }
}

/// Joint density of `(N_T > 0, J = j, T_i ∈ dt_i, L_i = ℓ_i, S ∈ ds)` under
/// uniform-marker sampling: renewal factor times
/// `∏ ℓ_i p_{ℓ_i} E[s^{N_{T-t_i}}]^{ℓ_i - 1}`.
pub fn uniform_marker_density<F: Scalar>(
    q: &UniformMarkerQuery<F>,
    table: &GenFunTable<F>,
    d: &OffspringDistribution<F>,
    rl: &RenewalLaw<F>,
) -> Result<F> {
    let mut density = rl.interval_density(&q.times, q.horizon)?;
    for (&t, &l) in q.times.iter().zip(&q.sizes) {
        let p = d.prob(l);
        if p == F::zero() {
            return Ok(F::zero());
        }
        let gen = table.eval(q.horizon - t, q.s)?;
        density = density * F::of_usize(l) * p * gen.powi(l as i32 - 1);
    }
    Ok(density)
}

/// Exact lattice specialization of the uniform-marker law:
/// `P(N_n > 0, L_1 = ℓ_1, ..., L_n = ℓ_n) = ∫_0^1 ∏ ℓ_i p_{ℓ_i} F_{n-i}(s)^{ℓ_i-1} ds`
/// by exact coefficient convolution and term-wise integration.
pub fn uniform_marker_lattice_exact(sizes: &[usize], gen: &DiscreteGenFun) -> Result<BigRational> {
    let n = sizes.len();
    if n == 0 || n > gen.horizon() {
        return Err(Error::Domain(format!(
            "need 1 <= |sizes| <= table horizon {}, got {n}",
            gen.horizon()
        )));
    }
    if sizes.iter().any(|&l| l < 1) {
        return Err(Error::Domain("event sizes must be >= 1".into()));
    }
    let k_max = gen.offspring().len() - 1;
    let mut degree: u128 = 0;
    for (i, &l) in sizes.iter().enumerate() {
        degree += (l as u128 - 1) * (k_max as u128).pow((n - 1 - i) as u32);
    }
    if degree > DEFAULT_COEFF_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: degree,
            budget: DEFAULT_COEFF_BUDGET,
        });
    }
    let mut scalar = BigRational::one();
    let mut product = crate::poly::Polynomial::new(vec![BigRational::one()]);
    for (i, &l) in sizes.iter().enumerate() {
        let p = gen
            .offspring()
            .get(l)
            .cloned()
            .unwrap_or_else(BigRational::zero);
        if p.is_zero() {
            return Ok(BigRational::zero());
        }
        scalar *= crate::poly::rational_from_usize(l) * p;
        product = product.mul(&gen.poly(n - 1 - i).pow(l - 1));
    }
    Ok(scalar * product.integral_unit())
}

/// Exact lattice analogue of the leftmost law:
/// `P(N_n > 0, L = ℓ⃗, K = k⃗) = ∏ p_{ℓ_i} q_{n-i}^{k_i}` with `q_j = F_j(0)`.
pub fn leftmost_lattice_exact(
    sizes: &[usize],
    skips: &[usize],
    gen: &DiscreteGenFun,
) -> Result<BigRational> {
    let n = sizes.len();
    if n == 0 || n > gen.horizon() {
        return Err(Error::Domain(format!(
            "need 1 <= |sizes| <= table horizon {}, got {n}",
            gen.horizon()
        )));
    }
    if skips.len() != n {
        return Err(Error::Domain(
            "sizes and skip counts must have equal length".into(),
        ));
    }
    let mut result = BigRational::one();
    for (i, (&l, &k)) in sizes.iter().zip(skips).enumerate() {
        if l < 1 || k + 1 > l {
            return Err(Error::Domain(format!(
                "skip count k = {k} outside 0..{} for size {l}",
                l.saturating_sub(1)
            )));
        }
        let p = gen
            .offspring()
            .get(l)
            .cloned()
            .unwrap_or_else(BigRational::zero);
        if p.is_zero() {
            return Ok(BigRational::zero());
        }
        result *= p;
        let q = gen.extinction(n - 1 - i);
        for _ in 0..k {
            result *= q.clone();
        }
    }
    Ok(result)
}

/// Ancestral rate bias
/// `B(t, T, ℓ) = (1 - F_T(0))^{-1} ∫_0^1 F_{T-t}(s)^{ℓ-1} F'_T(s) ds`
/// by composite Simpson quadrature on the tabulated generating function.
/// For `ℓ = 1` the integrand is `F'_T` whose integral telescopes to
/// `1 - F_T(0)` exactly, so the bias is returned as exactly 1.
pub fn rate_bias<F: Scalar>(
    table: &GenFunTable<F>,
    t: F,
    ell: usize,
    quad_points: usize,
) -> Result<F> {
    if ell < 1 {
        return Err(Error::Domain("reproduction size must be >= 1".into()));
    }
    let horizon = table.horizon();
    if t < F::zero() || t > horizon {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    let survival = F::one() - table.extinction_prob(horizon)?;
    if survival.as_f64() <= SURVIVAL_FLOOR {
        return Err(Error::DegenerateConditioning {
            survival: survival.as_f64(),
        });
    }
    if ell == 1 {
        return Ok(F::one());
    }
    if quad_points < 201 {
        return Err(Error::Config(format!(
            "quad_points = {quad_points} too coarse, need >= 201"
        )));
    }
    let panels = (quad_points - 1).next_multiple_of(2);
    let u = horizon - t;
    let integral = simpson(F::zero(), F::one(), panels, |s| {
        Ok(table.eval(u, s)?.powi(ell as i32 - 1) * table.eval_deriv(horizon, s)?)
    })?;
    Ok(integral / survival)
}

/// Density of the sampled marker: `F'_T(s) / (1 - F_T(0))`.
pub fn s_density<F: Scalar>(table: &GenFunTable<F>, s: F) -> Result<F> {
    let horizon = table.horizon();
    let survival = F::one() - table.extinction_prob(horizon)?;
    if survival.as_f64() <= SURVIVAL_FLOOR {
        return Err(Error::DegenerateConditioning {
            survival: survival.as_f64(),
        });
    }
    Ok(table.eval_deriv(horizon, s)? / survival)
}

/// Rate of size-`ℓ` reproduction along the uniform ancestral lineage at time
/// `t` for exponential lifetimes: `r ℓ p_ℓ B(t, T, ℓ)`.
pub fn ancestral_rate<F: Scalar>(
    table: &GenFunTable<F>,
    d: &OffspringDistribution<F>,
    rate: F,
    t: F,
    ell: usize,
    quad_points: usize,
) -> Result<F> {
    let p = d.prob(ell);
    if p == F::zero() {
        return Ok(F::zero());
    }
    Ok(rate * F::of_usize(ell) * p * rate_bias(table, t, ell, quad_points)?)
}

/// Conditional lineage density under marker-conditioned (Palm) sampling:
/// renewal factor times `∏ ℓ_i p_{ℓ_i}`, normalized by `E[N_T]`.
pub fn palm_density<F: Scalar>(
    times: &[F],
    sizes: &[usize],
    horizon: F,
    d: &OffspringDistribution<F>,
    rl: &RenewalLaw<F>,
    table: &GenFunTable<F>,
) -> Result<F> {
    if times.len() != sizes.len() {
        return Err(Error::Domain(
            "times and sizes must have equal length".into(),
        ));
    }
    let mean_pop = table.eval_deriv(horizon, F::one())?;
    if mean_pop <= F::zero() {
        return Err(Error::Numerics("E[N_T] not positive".into()));
    }
    let mut density = rl.interval_density(times, horizon)?;
    for &l in sizes {
        if l < 1 {
            return Err(Error::Domain("event sizes must be >= 1".into()));
        }
        density = density * F::of_usize(l) * d.prob(l);
    }
    Ok(density / mean_pop)
}

/// Joint density under leftmost sampling (including the event `{N_T > 0}`):
/// renewal factor times `∏ p_{ℓ_i} P(N_{T-t_i} = 0)^{k_i}`.
pub fn leftmost_density<F: Scalar>(
    times: &[F],
    sizes: &[usize],
    skips: &[usize],
    horizon: F,
    d: &OffspringDistribution<F>,
    rl: &RenewalLaw<F>,
    table: &GenFunTable<F>,
) -> Result<F> {
    if times.len() != sizes.len() || skips.len() != sizes.len() {
        return Err(Error::Domain(
            "times, sizes and skip counts must have equal length".into(),
        ));
    }
    let mut density = rl.interval_density(times, horizon)?;
    for ((&t, &l), &k) in times.iter().zip(sizes).zip(skips) {
        if l < 1 || k + 1 > l {
            return Err(Error::Domain(format!(
                "skip count k = {k} outside 0..{} for size {l}",
                l.saturating_sub(1)
            )));
        }
        let q = table.extinction_prob(horizon - t)?;
        density = density * d.prob(l) * q.powi(k as i32);
    }
    Ok(density)
}
