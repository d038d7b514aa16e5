//! Exhaustive enumeration of unit-lattice genealogies with exact rational
//! probabilities.
//!
//! Every planar tree of depth `n` is generated by assigning each individual
//! in generations `0..n` an ordered offspring count; sibling subtrees are
//! i.i.d., so the planar order is already the exchangeable order used by the
//! leftmost scheme. For each complete genealogy the joint law of the lineage
//! statistics is accumulated under all three sampling rules, giving exact
//! reference tables for the lattice specializations of the lineage laws.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use lineage_core::poly::{rational_from_f64, rational_from_usize, rational_to_f64};
use lineage_core::Error as CoreError;

use crate::error::{CliError, Result};

/// Enumerated genealogies above this are refused.
pub const DEFAULT_STATE_BUDGET: u64 = 10_000_000;

#[derive(Debug)]
pub struct ExactLaw {
    /// `P(N_n > 0)`.
    pub survival: BigRational,
    /// Uniform scheme: `P(N_n > 0, L = ℓ⃗)` per size vector.
    pub uniform: BTreeMap<Vec<usize>, BigRational>,
    /// Palm scheme: `E[#individuals alive with lineage ℓ⃗]` per size vector
    /// (one unit of weight per alive individual).
    pub palm: BTreeMap<Vec<usize>, BigRational>,
    /// Leftmost scheme: `P(N_n > 0, L = ℓ⃗, K = k⃗)`.
    pub leftmost: BTreeMap<(Vec<usize>, Vec<usize>), BigRational>,
    /// Total probability over all genealogies; exactly 1 up to the rational
    /// representation of the input probabilities.
    pub total: BigRational,
    pub genealogies: u64,
}

struct Node {
    gen: usize,
    children: Vec<usize>,
}

struct Enumerator {
    probs: Vec<BigRational>,
    horizon: usize,
    budget: u64,
    genealogies: u64,
    survival: BigRational,
    total: BigRational,
    uniform: BTreeMap<Vec<usize>, BigRational>,
    palm: BTreeMap<Vec<usize>, BigRational>,
    leftmost: BTreeMap<(Vec<usize>, Vec<usize>), BigRational>,
}

/// Enumerates all depth-`n` genealogies of the offspring law given by
/// `probs` (converted bit-exactly from their float representation).
pub fn enumerate_exact(probs: &[f64], n: usize, budget: u64) -> Result<ExactLaw> {
    if n == 0 {
        return Err(CliError::Config("enumeration horizon must be >= 1".into()));
    }
    let k_max = probs.len().saturating_sub(1);
    let states = (k_max as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if states > budget {
        return Err(CliError::from(CoreError::BudgetExceeded {
            needed: states as u128,
            budget: budget as u128,
        }));
    }
    let mut e = Enumerator {
        probs: probs.iter().map(|&p| rational_from_f64(p)).collect(),
        horizon: n,
        budget,
        genealogies: 0,
        survival: BigRational::zero(),
        total: BigRational::zero(),
        uniform: BTreeMap::new(),
        palm: BTreeMap::new(),
        leftmost: BTreeMap::new(),
    };
    let mut nodes = vec![Node {
        gen: 0,
        children: Vec::new(),
    }];
    e.recurse(&mut nodes, 0, BigRational::one())?;
    Ok(ExactLaw {
        survival: e.survival,
        uniform: e.uniform,
        palm: e.palm,
        leftmost: e.leftmost,
        total: e.total,
        genealogies: e.genealogies,
    })
}

impl Enumerator {
    fn recurse(&mut self, nodes: &mut Vec<Node>, next: usize, prob: BigRational) -> Result<()> {
        if next == nodes.len() {
            self.genealogies += 1;
            if self.genealogies > self.budget {
                return Err(CliError::from(CoreError::BudgetExceeded {
                    needed: self.genealogies as u128,
                    budget: self.budget as u128,
                }));
            }
            self.tally(nodes, prob);
            return Ok(());
        }
        if nodes[next].gen == self.horizon {
            // alive at the horizon; reproduces only after it
            return self.recurse(nodes, next + 1, prob);
        }
        for count in 0..self.probs.len() {
            let p = &self.probs[count];
            if p.is_zero() {
                continue;
            }
            let child_gen = nodes[next].gen + 1;
            let first_child = nodes.len();
            for _ in 0..count {
                nodes.push(Node {
                    gen: child_gen,
                    children: Vec::new(),
                });
            }
            nodes[next].children = (first_child..first_child + count).collect();
            self.recurse(nodes, next + 1, prob.clone() * p)?;
            nodes.truncate(first_child);
            nodes[next].children.clear();
        }
        Ok(())
    }

    fn tally(&mut self, nodes: &[Node], prob: BigRational) {
        self.total += prob.clone();
        let alive: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].gen == self.horizon)
            .collect();
        if alive.is_empty() {
            return;
        }
        self.survival += prob.clone();

        let mut parent = vec![usize::MAX; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            for &c in &n.children {
                parent[c] = i;
            }
        }
        let share = prob.clone() / rational_from_usize(alive.len());
        for &leaf in &alive {
            let mut sizes = vec![0usize; self.horizon];
            let mut cur = leaf;
            for g in (0..self.horizon).rev() {
                let p = parent[cur];
                sizes[g] = nodes[p].children.len();
                cur = p;
            }
            *self
                .uniform
                .entry(sizes.clone())
                .or_insert_with(BigRational::zero) += share.clone();
            *self.palm.entry(sizes).or_insert_with(BigRational::zero) += prob.clone();
        }

        // leftmost surviving descent
        let mut survives = vec![false; nodes.len()];
        for i in (0..nodes.len()).rev() {
            survives[i] =
                nodes[i].gen == self.horizon || nodes[i].children.iter().any(|&c| survives[c]);
        }
        let mut sizes = Vec::with_capacity(self.horizon);
        let mut skips = Vec::with_capacity(self.horizon);
        let mut cur = 0usize;
        while nodes[cur].gen < self.horizon {
            let children = &nodes[cur].children;
            let mut k = 0usize;
            let mut chosen = None;
            for &c in children {
                if survives[c] {
                    chosen = Some(c);
                    break;
                }
                k += 1;
            }
            sizes.push(children.len());
            skips.push(k);
            cur = chosen.expect("surviving tree has a surviving child");
        }
        *self
            .leftmost
            .entry((sizes, skips))
            .or_insert_with(BigRational::zero) += prob;
    }
}

/// JSON-friendly rendering of an exact rational.
#[derive(Debug, serde::Serialize)]
pub struct ExactValue {
    pub fraction: String,
    pub value: f64,
}

impl ExactValue {
    pub fn of(r: &BigRational) -> Self {
        Self {
            fraction: format!("{}/{}", r.numer(), r.denom()),
            value: rational_to_f64(r),
        }
    }
}

pub fn rational_one() -> BigRational {
    BigRational::from_integer(BigInt::from(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn single_child_law_is_deterministic() {
        let law = enumerate_exact(&[0.0, 1.0], 3, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(law.genealogies, 1);
        assert!(law.survival.is_one());
        assert_eq!(law.uniform.len(), 1);
        let key = vec![1usize, 1, 1];
        assert!(law.uniform[&key].is_one());
        assert!(law.leftmost[&(key.clone(), vec![0, 0, 0])].is_one());
        assert!(law.palm[&key].is_one());
    }

    #[test]
    fn critical_binary_one_generation() {
        let law = enumerate_exact(&[0.5, 0.0, 0.5], 1, DEFAULT_STATE_BUDGET).unwrap();
        assert!(law.total.is_one());
        assert_eq!(rational_to_f64(&law.survival), 0.5);
        assert_eq!(rational_to_f64(&law.uniform[&vec![2usize]]), 0.5);
        // palm weight counts both alive children
        assert_eq!(rational_to_f64(&law.palm[&vec![2usize]]), 1.0);
        assert_eq!(
            rational_to_f64(&law.leftmost[&(vec![2usize], vec![0usize])]),
            0.5
        );
    }

    #[test]
    fn critical_binary_two_generations_hand_values() {
        let law = enumerate_exact(&[0.5, 0.0, 0.5], 2, DEFAULT_STATE_BUDGET).unwrap();
        assert!(law.total.is_one());
        // survival 1 - F_2(0) = 0.375
        assert_eq!(rational_to_f64(&law.survival), 0.375);
        // the hand value for the uniform law
        assert_eq!(rational_to_f64(&law.uniform[&vec![2usize, 2]]), 0.375);
        // leftmost: (2,2) with k = (0,0) is 1/4, with k = (1,0) is 1/8
        assert_eq!(
            rational_to_f64(&law.leftmost[&(vec![2usize, 2], vec![0usize, 0])]),
            0.25
        );
        assert_eq!(
            rational_to_f64(&law.leftmost[&(vec![2usize, 2], vec![1usize, 0])]),
            0.125
        );
        // palm: E[#alive] = m^2 = 1 spread across the single size vector
        assert_eq!(rational_to_f64(&law.palm[&vec![2usize, 2]]), 1.0);
    }

    #[test]
    fn budget_is_enforced() {
        assert!(enumerate_exact(&[0.5, 0.0, 0.5], 30, 1000).is_err());
    }
}
