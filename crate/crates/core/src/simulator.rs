//! Event-driven simulation of a Bellman-Harris tree up to a horizon,
//! retaining the full genealogy for lineage extraction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::distributions::{LifetimeLaw, OffspringDistribution};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// One individual. Children are born at the parent's death time; an
/// individual alive at the horizon keeps its sampled death time (`> T`) and
/// simply has no children generated.
#[derive(Debug, Clone)]
pub struct TreeNode<F> {
    pub parent: Option<usize>,
    pub birth: F,
    pub death: F,
    pub children: Vec<usize>,
    /// Index among siblings in simulation draw order; since children are
    /// exchangeable this doubles as the planar order of the leftmost scheme.
    pub birth_order: u32,
}

/// A complete simulated genealogy. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Tree<F> {
    nodes: Vec<TreeNode<F>>,
    horizon: F,
    alive: Vec<usize>,
    survival: OnceLock<Vec<bool>>,
}

/// One reproduction event on an ancestral lineage: the event time, the
/// total offspring count, which child continues the lineage, and for every
/// child whether its subtree reaches the horizon.
#[derive(Debug, Clone)]
pub struct LineageEvent<F> {
    pub time: F,
    pub size: usize,
    pub child_order: usize,
    pub child_survives: Vec<bool>,
}

struct PendingDeath<F> {
    death: F,
    node: usize,
}

impl<F: PartialOrd> PartialEq for PendingDeath<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<F: PartialOrd> Eq for PendingDeath<F> {}
impl<F: PartialOrd> PartialOrd for PendingDeath<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: PartialOrd> Ord for PendingDeath<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (death, node id); death times are finite by construction
        other
            .death
            .partial_cmp(&self.death)
            .expect("finite death times")
            .then(other.node.cmp(&self.node))
    }
}

/// Simulates one tree started from a single individual born at time 0.
///
/// Individuals are processed in death-time order so that hitting `max_nodes`
/// is time-consistent; the whole tree is discarded on overflow and the caller
/// decides whether to abort or record the overflow rate.
pub fn simulate_tree<F: Scalar>(
    d: &OffspringDistribution<F>,
    law: &LifetimeLaw<F>,
    horizon: F,
    rng: &mut RngStream,
    max_nodes: usize,
) -> Result<Tree<F>> {
    if max_nodes < 1 {
        return Err(Error::Config("max_nodes must be >= 1".into()));
    }
    if horizon <= F::zero() {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let mut nodes: Vec<TreeNode<F>> = Vec::new();
    let root_death = law.sample(rng);
    nodes.push(TreeNode {
        parent: None,
        birth: F::zero(),
        death: root_death,
        children: Vec::new(),
        birth_order: 0,
    });
    let mut queue = BinaryHeap::new();
    queue.push(PendingDeath {
        death: root_death,
        node: 0,
    });
    while let Some(PendingDeath { death, node }) = queue.pop() {
        if death > horizon {
            continue; // censored alive at the horizon
        }
        let count = d.sample(rng);
        if nodes.len() + count > max_nodes {
            return Err(Error::PopulationCap { limit: max_nodes });
        }
        for order in 0..count {
            let id = nodes.len();
            let child_death = death + law.sample(rng);
            nodes.push(TreeNode {
                parent: Some(node),
                birth: death,
                death: child_death,
                children: Vec::new(),
                birth_order: order as u32,
            });
            nodes[node].children.push(id);
            queue.push(PendingDeath {
                death: child_death,
                node: id,
            });
        }
    }
    let alive = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.death > horizon)
        .map(|(i, _)| i)
        .collect();
    Ok(Tree {
        nodes,
        horizon,
        alive,
        survival: OnceLock::new(),
    })
}

impl<F: Scalar> Tree<F> {
    pub fn nodes(&self) -> &[TreeNode<F>] {
        &self.nodes
    }

    pub fn horizon(&self) -> F {
        self.horizon
    }

    /// Indices of individuals alive at the horizon.
    pub fn alive(&self) -> &[usize] {
        &self.alive
    }

    pub fn n_alive(&self) -> usize {
        self.alive.len()
    }

    pub fn survived(&self) -> bool {
        !self.alive.is_empty()
    }

    /// Population size `N_t`, right-continuous: at a reproduction instant the
    /// offspring are counted, the parent is not.
    pub fn count_at(&self, t: F) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.birth <= t && t < n.death)
            .count()
    }

    /// For every node, whether its subtree contains an individual alive at
    /// the horizon. Computed once per tree on first use.
    pub fn subtree_survival(&self) -> &[bool] {
        self.survival.get_or_init(|| {
            let mut survives = vec![false; self.nodes.len()];
            // children always carry larger indices, so one reverse sweep suffices
            for i in (0..self.nodes.len()).rev() {
                let n = &self.nodes[i];
                survives[i] = n.death > self.horizon || n.children.iter().any(|&c| survives[c]);
            }
            survives
        })
    }

    /// Reproduction events on the path from the root to `v`, which must be
    /// alive at the horizon.
    pub fn ancestral_lineage(&self, v: usize) -> Result<Vec<LineageEvent<F>>> {
        let node = self
            .nodes
            .get(v)
            .ok_or_else(|| Error::Domain(format!("node {v} does not exist")))?;
        if node.death <= self.horizon {
            return Err(Error::Domain(format!(
                "node {v} is not alive at the horizon"
            )));
        }
        let survives = self.subtree_survival();
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        let mut events = Vec::with_capacity(path.len() - 1);
        for w in path.windows(2) {
            let (parent, child) = (&self.nodes[w[0]], &self.nodes[w[1]]);
            events.push(LineageEvent {
                time: parent.death,
                size: parent.children.len(),
                child_order: child.birth_order as usize,
                child_survives: parent.children.iter().map(|&c| survives[c]).collect(),
            });
        }
        Ok(events)
    }
}
