//! The three ancestral-lineage sampling rules.
//!
//! * Uniform marker: every individual alive at the horizon gets an i.i.d.
//!   uniform mark on `[0, 1]`; the argmax is a uniform pick and its mark is
//!   recorded.
//! * Palm: one record per alive individual, each with weight 1; estimators
//!   divide by `trees x E[N_T]` downstream.
//! * Leftmost: descend from the root, at each reproduction event taking the
//!   first child (in exchangeable birth order) whose subtree survives, and
//!   count the extinct siblings that were skipped.

use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::simulator::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    UniformMarker,
    Palm,
    Leftmost,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::UniformMarker => "uniform",
            Scheme::Palm => "palm",
            Scheme::Leftmost => "leftmost",
        }
    }
}

/// One sampled ancestral lineage.
///
/// `times` and `sizes` always have the same length `J`; `left_extinct` is
/// populated only by the leftmost scheme and `marker` only by the
/// uniform-marker scheme. `node` is the sampled individual, kept for
/// debugging.
#[derive(Debug, Clone, PartialEq)]
pub struct LineageRecord<F> {
    pub scheme: Scheme,
    pub survived: bool,
    pub times: Vec<F>,
    pub sizes: Vec<usize>,
    pub left_extinct: Vec<usize>,
    pub marker: Option<F>,
    pub weight: F,
    pub node: Option<usize>,
}

impl<F: Scalar> LineageRecord<F> {
    pub fn j(&self) -> usize {
        self.times.len()
    }

    fn not_survived(scheme: Scheme) -> Self {
        Self {
            scheme,
            survived: false,
            times: Vec::new(),
            sizes: Vec::new(),
            left_extinct: Vec::new(),
            marker: None,
            weight: F::one(),
            node: None,
        }
    }
}

/// Uniform pick among the individuals alive at the horizon, realized through
/// i.i.d. markers; the recorded marker is the maximum of `N_T` uniforms.
pub fn sample_uniform_marker<F: Scalar>(tree: &Tree<F>, rng: &mut RngStream) -> LineageRecord<F> {
    if !tree.survived() {
        return LineageRecord::not_survived(Scheme::UniformMarker);
    }
    let mut best = f64::NEG_INFINITY;
    let mut winner = tree.alive()[0];
    for &v in tree.alive() {
        let u = rng.uniform();
        if u > best {
            best = u;
            winner = v;
        }
    }
    let events = tree
        .ancestral_lineage(winner)
        .expect("alive node has a lineage");
    LineageRecord {
        scheme: Scheme::UniformMarker,
        survived: true,
        times: events.iter().map(|e| e.time).collect(),
        sizes: events.iter().map(|e| e.size).collect(),
        left_extinct: Vec::new(),
        marker: Some(F::of(best)),
        weight: F::one(),
        node: Some(winner),
    }
}

/// One record per alive individual (size-biased / Palm sampling). Extinct
/// trees yield an empty vector.
pub fn sample_palm<F: Scalar>(tree: &Tree<F>) -> Vec<LineageRecord<F>> {
    tree.alive()
        .iter()
        .map(|&v| {
            let events = tree.ancestral_lineage(v).expect("alive node has a lineage");
            LineageRecord {
                scheme: Scheme::Palm,
                survived: true,
                times: events.iter().map(|e| e.time).collect(),
                sizes: events.iter().map(|e| e.size).collect(),
                left_extinct: Vec::new(),
                marker: None,
                weight: F::one(),
                node: Some(v),
            }
        })
        .collect()
}

/// Leftmost surviving lineage; `left_extinct[i]` counts the lower-order
/// siblings at event `i` whose subtrees die out before the horizon.
pub fn sample_leftmost<F: Scalar>(tree: &Tree<F>) -> LineageRecord<F> {
    if !tree.survived() {
        return LineageRecord::not_survived(Scheme::Leftmost);
    }
    let survives = tree.subtree_survival();
    let nodes = tree.nodes();
    let mut times = Vec::new();
    let mut sizes = Vec::new();
    let mut skips = Vec::new();
    let mut cur = 0usize;
    while nodes[cur].death <= tree.horizon() {
        let children = &nodes[cur].children;
        let mut skipped = 0usize;
        let mut next = None;
        for &c in children {
            if survives[c] {
                next = Some(c);
                break;
            }
            skipped += 1;
        }
        let next = next.expect("a surviving subtree contains a surviving child");
        times.push(nodes[cur].death);
        sizes.push(children.len());
        skips.push(skipped);
        cur = next;
    }
    LineageRecord {
        scheme: Scheme::Leftmost,
        survived: true,
        times,
        sizes,
        left_extinct: skips,
        marker: None,
        weight: F::one(),
        node: Some(cur),
    }
}
