//! Brute-force micro-simulations of the maxima-of-markers identities that
//! underpin the lineage laws. Each experiment draws its own i.i.d. samples
//! and compares empirical masses against the closed-form prediction, so they
//! are independent of the tree simulator and the table solvers.

use crate::distributions::OffspringDistribution;
use crate::rng::RngStream;

/// Outcome of a binned density comparison.
#[derive(Debug, Clone)]
pub struct DensityCheck {
    /// Total variation distance between empirical and predicted bin masses.
    pub tv: f64,
    /// Monte Carlo error scale: half the summed per-bin standard errors.
    pub mc_err: f64,
    pub bins: usize,
    pub trials: u64,
}

impl DensityCheck {
    pub fn passes(&self, k: f64) -> bool {
        self.tv <= k * self.mc_err
    }
}

fn tv_and_error(emp: &[f64], theory: &[f64], trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let mut tv = 0.0;
    let mut err = 0.0;
    for (&e, &t) in emp.iter().zip(theory) {
        tv += (e - t).abs();
        err += (t * (1.0 - t) / n).sqrt();
    }
    (tv / 2.0, err / 2.0)
}

/// Max of `ell` group maxima, each group holding `Ñ_k` i.i.d. uniform marks
/// with `Ñ ~ d`. On `{ΣÑ > 0}` the maximum has distribution function
/// `g(s)^ell - g(0)^ell` with `g` the pgf of `Ñ`; the empirical joint masses
/// are compared bin-wise against the exact increments.
pub fn check_group_max_density(
    d: &OffspringDistribution<f64>,
    ell: usize,
    bins: usize,
    trials: u64,
    rng: &mut RngStream,
) -> DensityCheck {
    assert!(ell >= 1 && bins >= 1);
    let mut emp = vec![0.0; bins];
    for _ in 0..trials {
        let mut max = f64::NEG_INFINITY;
        let mut total = 0usize;
        for _ in 0..ell {
            let n = d.sample(rng);
            total += n;
            for _ in 0..n {
                max = max.max(rng.uniform());
            }
        }
        if total > 0 {
            let b = ((max * bins as f64) as usize).min(bins - 1);
            emp[b] += 1.0;
        }
    }
    for e in emp.iter_mut() {
        *e /= trials as f64;
    }
    let cdf = |s: f64| d.pgf(s).unwrap().powi(ell as i32);
    let theory: Vec<f64> = (0..bins)
        .map(|b| {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            cdf(hi) - cdf(lo)
        })
        .collect();
    let (tv, mc_err) = tv_and_error(&emp, &theory, trials);
    DensityCheck {
        tv,
        mc_err,
        bins,
        trials,
    }
}

/// Same experiment with a random group count `L ~ group_law`, checking the
/// joint masses `P(L = ℓ, ΣÑ > 0, S ∈ bin) = p_ℓ (g(hi)^ℓ - g(lo)^ℓ)` over
/// the product of group-count cells and marker bins.
pub fn check_group_max_mixture(
    d: &OffspringDistribution<f64>,
    group_law: &OffspringDistribution<f64>,
    bins: usize,
    trials: u64,
    rng: &mut RngStream,
) -> DensityCheck {
    let cells = (group_law.k_max() + 1) * bins;
    let mut emp = vec![0.0; cells];
    for _ in 0..trials {
        let ell = group_law.sample(rng);
        let mut max = f64::NEG_INFINITY;
        let mut total = 0usize;
        for _ in 0..ell {
            let n = d.sample(rng);
            total += n;
            for _ in 0..n {
                max = max.max(rng.uniform());
            }
        }
        if total > 0 {
            let b = ((max * bins as f64) as usize).min(bins - 1);
            emp[ell * bins + b] += 1.0;
        }
    }
    for e in emp.iter_mut() {
        *e /= trials as f64;
    }
    let mut theory = vec![0.0; cells];
    for ell in 1..=group_law.k_max() {
        let p = group_law.prob(ell);
        let cdf = |s: f64| d.pgf(s).unwrap().powi(ell as i32);
        for b in 0..bins {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            theory[ell * bins + b] = p * (cdf(hi) - cdf(lo));
        }
    }
    let (tv, mc_err) = tv_and_error(&emp, &theory, trials);
    DensityCheck {
        tv,
        mc_err,
        bins: cells,
        trials,
    }
}

/// Outcome of the skip-count law check: one row per `k`.
#[derive(Debug, Clone)]
pub struct SkipLawCheck {
    /// `(k, empirical mass, predicted mass, standard error)`.
    pub per_k: Vec<(usize, f64, f64, f64)>,
    pub trials: u64,
}

impl SkipLawCheck {
    pub fn passes(&self, k_sigma: f64) -> bool {
        self.per_k
            .iter()
            .all(|&(_, emp, theory, se)| (emp - theory).abs() <= k_sigma * se)
    }

    pub fn worst_sigma(&self) -> f64 {
        self.per_k
            .iter()
            .map(|&(_, emp, theory, se)| (emp - theory).abs() / se)
            .fold(0.0, f64::max)
    }
}

/// Skip-count identity behind the leftmost scheme: with `ell` slots carrying
/// i.i.d. marks `U_k` and i.i.d. sizes `Ñ_k`, the number of marks below the
/// smallest mark among nonempty slots satisfies
/// `P(ΣÑ > 0, K = k) = P(Ñ = 0)^k P(Ñ > 0)` for every `k < ell`.
pub fn check_leftmost_skips(
    d: &OffspringDistribution<f64>,
    ell: usize,
    trials: u64,
    rng: &mut RngStream,
) -> SkipLawCheck {
    assert!(ell >= 1);
    let mut counts = vec![0u64; ell];
    for _ in 0..trials {
        let mut smallest_nonempty: Option<f64> = None;
        let mut marks = Vec::with_capacity(ell);
        let mut total = 0usize;
        for _ in 0..ell {
            let u = rng.uniform();
            let n = d.sample(rng);
            total += n;
            marks.push(u);
            if n > 0 {
                smallest_nonempty = Some(match smallest_nonempty {
                    Some(s) => s.min(u),
                    None => u,
                });
            }
        }
        if total > 0 {
            let s = smallest_nonempty.unwrap();
            let k = marks.iter().filter(|&&u| u < s).count();
            counts[k] += 1;
        }
    }
    let q = d.prob(0);
    let n = trials as f64;
    let per_k = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let emp = c as f64 / n;
            let theory = q.powi(k as i32) * (1.0 - q);
            let se = (theory * (1.0 - theory) / n).sqrt();
            (k, emp, theory, se)
        })
        .collect();
    SkipLawCheck { per_k, trials }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ntilde_law() -> OffspringDistribution<f64> {
        OffspringDistribution::new(vec![0.4, 0.35, 0.25]).unwrap()
    }

    #[test]
    fn group_max_density_matches_closed_form() {
        let mut rng = RngStream::new(101, 0);
        let check = check_group_max_density(&ntilde_law(), 3, 20, 200_000, &mut rng);
        assert!(
            check.passes(3.0),
            "tv = {} vs {}",
            check.tv,
            3.0 * check.mc_err
        );
    }

    #[test]
    fn group_max_density_specializes_to_classic_max() {
        // Ñ ≡ 1 reduces to the max of ell plain uniforms with density ℓ s^{ℓ-1}
        let unit = OffspringDistribution::new(vec![0.0, 1.0]).unwrap();
        let mut rng = RngStream::new(102, 0);
        let check = check_group_max_density(&unit, 4, 20, 200_000, &mut rng);
        assert!(
            check.passes(3.0),
            "tv = {} vs {}",
            check.tv,
            3.0 * check.mc_err
        );
    }

    #[test]
    fn group_max_mixture_matches_closed_form() {
        let groups = OffspringDistribution::new(vec![0.25, 0.25, 0.5]).unwrap();
        let mut rng = RngStream::new(103, 0);
        let check = check_group_max_mixture(&ntilde_law(), &groups, 20, 200_000, &mut rng);
        assert!(
            check.passes(3.0),
            "tv = {} vs {}",
            check.tv,
            3.0 * check.mc_err
        );
    }

    #[test]
    fn leftmost_skip_law_matches() {
        let mut rng = RngStream::new(104, 0);
        let check = check_leftmost_skips(&ntilde_law(), 4, 200_000, &mut rng);
        assert!(
            check.passes(3.0),
            "worst deviation {} sigma",
            check.worst_sigma()
        );
        // k = 0 must be attainable and is in fact the most likely value
        assert!(check.per_k[0].1 > 0.0);
    }
}
