//! Mergeable histograms and goodness-of-fit machinery for Monte Carlo
//! versus theory comparisons.

use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::quad::simpson;
use crate::sampling::{LineageRecord, Scheme};
use crate::scalar::Scalar;

/// Which coordinate of a [`LineageRecord`] an axis bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// `times[i]` (0-based event index).
    EventTime(usize),
    /// The uniform-marker value `S`.
    Marker,
    /// `sizes[i]`.
    EventSize(usize),
    /// `left_extinct[i]` (leftmost scheme only).
    SkipCount(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis<F> {
    pub name: String,
    pub kind: AxisKind,
    /// Strictly increasing bin edges; values equal to the last edge fall in
    /// the last bin.
    pub edges: Vec<F>,
}

impl<F: Scalar> Axis<F> {
    pub fn new(name: impl Into<String>, kind: AxisKind, edges: Vec<F>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "axis edges must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            kind,
            edges,
        })
    }

    /// Uniformly spaced edges.
    pub fn uniform(
        name: impl Into<String>,
        kind: AxisKind,
        lo: F,
        hi: F,
        bins: usize,
    ) -> Result<Self> {
        if bins == 0 || lo >= hi {
            return Err(Error::Config("axis needs bins >= 1 and lo < hi".into()));
        }
        let edges = (0..=bins)
            .map(|i| lo + (hi - lo) * F::of_usize(i) / F::of_usize(bins))
            .collect();
        Self::new(name, kind, edges)
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    fn locate(&self, x: F) -> Option<usize> {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if x < lo || x > hi {
            return None;
        }
        if x == hi {
            return Some(self.bins() - 1);
        }
        Some(self.edges.partition_point(|&e| e <= x) - 1)
    }
}

/// Filter selecting which records enter a histogram.
#[derive(Debug, Clone, Default)]
pub struct RecordFilter {
    pub scheme: Option<Scheme>,
    /// Exact number of reproduction events `J`.
    pub j: Option<usize>,
    /// Exact size vector `L_1..L_J`.
    pub sizes: Option<Vec<usize>>,
}

impl RecordFilter {
    pub fn matches<F: Scalar>(&self, r: &LineageRecord<F>) -> bool {
        if !r.survived {
            return false;
        }
        if let Some(s) = self.scheme {
            if r.scheme != s {
                return false;
            }
        }
        if let Some(j) = self.j {
            if r.j() != j {
                return false;
            }
        }
        if let Some(sizes) = &self.sizes {
            if &r.sizes != sizes {
                return false;
            }
        }
        true
    }
}

/// Dense multi-dimensional histogram of weighted counts.
///
/// `n_trials` is the conditioning denominator (all trees, not just
/// survivors), so `counts / n_trials` estimates joint probabilities that
/// include the `{N_T > 0}` factor. Merging histograms with identical axes is
/// exact addition.
#[derive(Debug, Clone)]
pub struct JointHistogram<F> {
    axes: Vec<Axis<F>>,
    counts: Vec<F>,
    total_weight: F,
    n_trials: u64,
    out_of_range: u64,
}

impl<F: Scalar> JointHistogram<F> {
    pub fn new(axes: Vec<Axis<F>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Config("histogram needs at least one axis".into()));
        }
        let len = axes.iter().map(Axis::bins).product();
        Ok(Self {
            axes,
            counts: vec![F::zero(); len],
            total_weight: F::zero(),
            n_trials: 0,
            out_of_range: 0,
        })
    }

    pub fn axes(&self) -> &[Axis<F>] {
        &self.axes
    }

    pub fn counts(&self) -> &[F] {
        &self.counts
    }

    pub fn total_weight(&self) -> F {
        self.total_weight
    }

    pub fn n_trials(&self) -> u64 {
        self.n_trials
    }

    /// Records that matched the filter but fell outside the binned domain.
    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn add_trials(&mut self, n: u64) {
        self.n_trials += n;
    }

    fn flat_index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &c) in self.axes.iter().zip(coords) {
            idx = idx * axis.bins() + c;
        }
        idx
    }

    /// Flat bin index of a point, `None` when any coordinate is out of range.
    pub fn bin_index(&self, point: &[F]) -> Option<usize> {
        debug_assert_eq!(point.len(), self.axes.len());
        let mut idx = 0;
        for (axis, &x) in self.axes.iter().zip(point) {
            idx = idx * axis.bins() + axis.locate(x)?;
        }
        Some(idx)
    }

    pub fn deposit(&mut self, point: &[F], weight: F) {
        debug_assert_eq!(point.len(), self.axes.len());
        let mut coords = Vec::with_capacity(point.len());
        for (axis, &x) in self.axes.iter().zip(point) {
            match axis.locate(x) {
                Some(c) => coords.push(c),
                None => {
                    self.out_of_range += 1;
                    return;
                }
            }
        }
        let idx = self.flat_index(&coords);
        self.counts[idx] += weight;
        self.total_weight += weight;
    }

    /// Exact addition of a histogram with identical axes.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.axes != other.axes {
            return Err(Error::AxisMismatch(
                "cannot merge histograms with different axes".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += *b;
        }
        self.total_weight += other.total_weight;
        self.n_trials += other.n_trials;
        self.out_of_range += other.out_of_range;
        Ok(())
    }

    /// Per-bin probability estimates `counts / n_trials`.
    pub fn joint_masses(&self) -> Result<Vec<F>> {
        if self.n_trials == 0 {
            return Err(Error::InsufficientData("histogram has n_trials = 0".into()));
        }
        let n = F::of(self.n_trials as f64);
        Ok(self.counts.iter().map(|&c| c / n).collect())
    }
}

/// Bins a stream of lineage records. `n_trials` is the number of trees the
/// stream came from, including extinct ones.
pub fn bin_records<'a, F: Scalar>(
    records: impl IntoIterator<Item = &'a LineageRecord<F>>,
    axes: Vec<Axis<F>>,
    filter: &RecordFilter,
    n_trials: u64,
) -> Result<JointHistogram<F>> {
    let mut hist = JointHistogram::new(axes)?;
    hist.add_trials(n_trials);
    let mut point = Vec::with_capacity(hist.axes.len());
    for r in records {
        if !filter.matches(r) {
            continue;
        }
        point.clear();
        let mut complete = true;
        for axis in &hist.axes {
            let coord = match axis.kind {
                AxisKind::EventTime(i) => r.times.get(i).copied(),
                AxisKind::Marker => r.marker,
                AxisKind::EventSize(i) => r.sizes.get(i).map(|&v| F::of_usize(v)),
                AxisKind::SkipCount(i) => r.left_extinct.get(i).map(|&v| F::of_usize(v)),
            };
            match coord {
                Some(x) => point.push(x),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            let w = r.weight;
            hist.deposit(&point, w);
        }
    }
    Ok(hist)
}

/// Bin-integrates a theoretical density over the same axes, by tensor-product
/// composite Simpson with `panels` subintervals per axis per bin.
pub fn expected_histogram<F: Scalar>(
    density: impl Fn(&[F]) -> Result<F>,
    axes: Vec<Axis<F>>,
    panels: usize,
) -> Result<JointHistogram<F>> {
    let mut hist = JointHistogram::new(axes)?;
    let dims = hist.axes.len();
    let mut bin = vec![0usize; dims];
    let total_bins = hist.counts.len();
    for flat in 0..total_bins {
        // unpack flat index into per-axis bin coordinates
        let mut rem = flat;
        for d in (0..dims).rev() {
            bin[d] = rem % hist.axes[d].bins();
            rem /= hist.axes[d].bins();
        }
        let mut point = vec![F::zero(); dims];
        let mass = integrate_bin(&hist.axes, &bin, 0, &mut point, panels, &density)?;
        if !mass.is_finite() {
            return Err(Error::Numerics("non-finite density mass in a bin".into()));
        }
        hist.counts[flat] = mass;
        hist.total_weight += mass;
    }
    Ok(hist)
}

fn integrate_bin<F: Scalar>(
    axes: &[Axis<F>],
    bin: &[usize],
    dim: usize,
    point: &mut Vec<F>,
    panels: usize,
    density: &impl Fn(&[F]) -> Result<F>,
) -> Result<F> {
    let lo = axes[dim].edges[bin[dim]];
    let hi = axes[dim].edges[bin[dim] + 1];
    simpson(lo, hi, panels, |x| {
        point[dim] = x;
        if dim + 1 == axes.len() {
            density(point)
        } else {
            integrate_bin(axes, bin, dim + 1, point, panels, density)
        }
    })
}

/// Half the L1 distance between the normalized histograms.
pub fn tv_distance<F: Scalar>(a: &JointHistogram<F>, b: &JointHistogram<F>) -> Result<F> {
    if a.axes != b.axes {
        return Err(Error::AxisMismatch(
            "TV distance needs identical axes".into(),
        ));
    }
    let (wa, wb) = (a.total_weight, b.total_weight);
    if wa <= F::zero() || wb <= F::zero() {
        return Err(Error::InsufficientData(
            "empty histogram in TV distance".into(),
        ));
    }
    let mut l1 = F::zero();
    for (&x, &y) in a.counts.iter().zip(&b.counts) {
        l1 += (x / wa - y / wb).abs();
    }
    Ok(l1 / F::of(2.0))
}

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected masses, with
/// greedy pooling of adjacent sparse bins until every expected count is at
/// least 5. Expected masses are rescaled to the observed total.
pub fn chi_square_test<F: Scalar>(
    observed: &JointHistogram<F>,
    expected: &JointHistogram<F>,
) -> Result<TestOutcome> {
    if observed.axes != expected.axes {
        return Err(Error::AxisMismatch(
            "chi-square needs identical axes".into(),
        ));
    }
    let obs: Vec<f64> = observed.counts.iter().map(|&c| c.as_f64()).collect();
    let exp_raw: Vec<f64> = expected.counts.iter().map(|&c| c.as_f64()).collect();
    let obs_total: f64 = obs.iter().sum();
    let exp_total: f64 = exp_raw.iter().sum();
    if obs_total <= 0.0 || exp_total <= 0.0 {
        return Err(Error::InsufficientData(
            "chi-square on empty histogram".into(),
        ));
    }
    let scale = obs_total / exp_total;
    let pooled = pool_sparse_bins(&obs, &exp_raw, scale, 5.0);
    if pooled.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 bins with expected count >= 5 after pooling".into(),
        ));
    }
    let stat: f64 = pooled
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = pooled.len() - 1;
    Ok(TestOutcome {
        statistic: stat,
        dof,
        p_value: chi_square_sf(stat, dof as f64),
    })
}

fn pool_sparse_bins(obs: &[f64], exp: &[f64], scale: f64, min_expected: f64) -> Vec<(f64, f64)> {
    let mut pooled = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &e) in obs.iter().zip(exp) {
        acc.0 += o;
        acc.1 += e * scale;
        if acc.1 >= min_expected {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else if acc.1 >= min_expected {
            pooled.push(acc);
        }
    }
    pooled
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof / 2.0, stat / 2.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, asymptotic
/// p-value with the Stephens small-sample correction.
pub fn ks_test<F: Scalar>(samples: &[F], cdf: impl Fn(F) -> F) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "KS test needs n >= 10, got {n}"
        )));
    }
    let mut xs: Vec<f64> = samples.iter().map(|&x| cdf(x).as_f64()).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite CDF values"));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in xs.iter().enumerate() {
        d = d.max(u - i as f64 / nf).max((i + 1) as f64 / nf - u);
    }
    let x = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    Ok((d, kolmogorov_sf(x)))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        kolmogorov_sf_theta(x)
    } else {
        kolmogorov_sf_series(x)
    }
}

/// Theta-function form, fast-converging for small arguments.
fn kolmogorov_sf_theta(x: f64) -> f64 {
    let t = (-std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x)).exp();
    let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * (t + t.powi(9) + t.powi(25) + t.powi(49));
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// Alternating series form, fast-converging for large arguments.
fn kolmogorov_sf_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn one_axis(bins: usize) -> Vec<Axis<f64>> {
        vec![Axis::uniform("s", AxisKind::Marker, 0.0, 1.0, bins).unwrap()]
    }

    #[test]
    fn empty_stream_gives_zero_histogram() {
        let hist = bin_records(
            std::iter::empty::<&LineageRecord<f64>>(),
            one_axis(10),
            &RecordFilter::default(),
            0,
        )
        .unwrap();
        assert_eq!(hist.total_weight(), 0.0);
        assert!(hist.counts().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn single_record_single_bin() {
        let rec = LineageRecord::<f64> {
            scheme: Scheme::UniformMarker,
            survived: true,
            times: vec![0.5],
            sizes: vec![2],
            left_extinct: vec![],
            marker: Some(0.25),
            weight: 1.0,
            node: Some(0),
        };
        let hist = bin_records([&rec], one_axis(4), &RecordFilter::default(), 1).unwrap();
        assert_eq!(hist.counts(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(hist.total_weight(), 1.0);
    }

    #[test]
    fn out_of_range_is_counted_not_dropped() {
        let rec = LineageRecord::<f64> {
            scheme: Scheme::UniformMarker,
            survived: true,
            times: vec![9.0],
            sizes: vec![2],
            left_extinct: vec![],
            marker: Some(0.25),
            weight: 1.0,
            node: None,
        };
        let axes = vec![Axis::uniform("t1", AxisKind::EventTime(0), 0.0, 2.0, 4).unwrap()];
        let hist = bin_records([&rec], axes, &RecordFilter::default(), 1).unwrap();
        assert_eq!(hist.out_of_range(), 1);
        assert_eq!(hist.total_weight(), 0.0);
    }

    #[test]
    fn merge_is_exact_and_matches_single_pass() {
        let mut rng = RngStream::new(5, 0);
        let records: Vec<LineageRecord<f64>> = (0..300)
            .map(|_| LineageRecord {
                scheme: Scheme::UniformMarker,
                survived: true,
                times: vec![],
                sizes: vec![],
                left_extinct: vec![],
                marker: Some(rng.uniform()),
                weight: 1.0,
                node: None,
            })
            .collect();
        let filter = RecordFilter::default();
        let single = bin_records(records.iter(), one_axis(16), &filter, 300).unwrap();
        // three shards merged in two different orders
        let shard = |range: std::ops::Range<usize>| {
            bin_records(records[range].iter(), one_axis(16), &filter, 100).unwrap()
        };
        let (a, b, c) = (shard(0..100), shard(100..200), shard(200..300));
        let mut ab_c = a.clone();
        ab_c.merge(&b).unwrap();
        ab_c.merge(&c).unwrap();
        let mut c_ba = c.clone();
        c_ba.merge(&b).unwrap();
        c_ba.merge(&a).unwrap();
        for ((x, y), z) in ab_c.counts().iter().zip(c_ba.counts()).zip(single.counts()) {
            assert_eq!(x, y);
            assert_eq!(x, z);
        }
        assert_eq!(ab_c.n_trials(), 300);
    }

    #[test]
    fn merge_rejects_axis_mismatch() {
        let a = JointHistogram::<f64>::new(one_axis(4)).unwrap();
        let mut b = JointHistogram::<f64>::new(one_axis(5)).unwrap();
        assert!(b.merge(&a).is_err());
    }

    #[test]
    fn expected_histogram_constant_density() {
        let hist = expected_histogram(|_| Ok(1.0), one_axis(10), 4).unwrap();
        for &c in hist.counts() {
            assert_abs_diff_eq!(c, 0.1, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(hist.total_weight(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn expected_histogram_refinement_agreement() {
        // smooth 2-D density: refinement changes bins by < 1e-8
        let axes = || {
            vec![
                Axis::uniform("t", AxisKind::EventTime(0), 0.0, 2.0, 5).unwrap(),
                Axis::uniform("s", AxisKind::Marker, 0.0, 1.0, 5).unwrap(),
            ]
        };
        let density = |p: &[f64]| Ok((-(p[0])).exp() * (1.0 + p[1] * p[1]));
        let coarse = expected_histogram(density, axes(), 8).unwrap();
        let fine = expected_histogram(density, axes(), 80).unwrap();
        for (a, b) in coarse.counts().iter().zip(fine.counts()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn tv_distance_cases() {
        let mut a = JointHistogram::<f64>::new(one_axis(2)).unwrap();
        let mut b = JointHistogram::<f64>::new(one_axis(2)).unwrap();
        a.deposit(&[0.25], 0.6);
        a.deposit(&[0.75], 0.4);
        b.deposit(&[0.25], 0.5);
        b.deposit(&[0.75], 0.5);
        assert_abs_diff_eq!(tv_distance(&a, &b).unwrap(), 0.1, epsilon = 1e-14);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        // disjoint supports
        let mut c = JointHistogram::<f64>::new(one_axis(2)).unwrap();
        let mut d = JointHistogram::<f64>::new(one_axis(2)).unwrap();
        c.deposit(&[0.25], 1.0);
        d.deposit(&[0.75], 1.0);
        assert_abs_diff_eq!(tv_distance(&c, &d).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn chi_square_exact_match_is_p_one() {
        let mut obs = JointHistogram::<f64>::new(one_axis(4)).unwrap();
        let mut exp = JointHistogram::<f64>::new(one_axis(4)).unwrap();
        for (i, &w) in [10.0, 20.0, 30.0, 40.0].iter().enumerate() {
            let x = (i as f64 + 0.5) / 4.0;
            obs.deposit(&[x], w);
            exp.deposit(&[x], w);
        }
        let out = chi_square_test(&obs, &exp).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.dof, 3);
    }

    #[test]
    fn chi_square_detects_shift() {
        let mut obs = JointHistogram::<f64>::new(one_axis(2)).unwrap();
        let mut exp = JointHistogram::<f64>::new(one_axis(2)).unwrap();
        // n = 1e5 draws from (0.6, 0.4) against expected (0.5, 0.5)
        obs.deposit(&[0.25], 60_000.0);
        obs.deposit(&[0.75], 40_000.0);
        exp.deposit(&[0.25], 0.5);
        exp.deposit(&[0.75], 0.5);
        let out = chi_square_test(&obs, &exp).unwrap();
        assert!(out.p_value < 1e-6, "p = {}", out.p_value);
    }

    #[test]
    fn chi_square_pools_sparse_bins() {
        let mut obs = JointHistogram::<f64>::new(one_axis(100)).unwrap();
        let mut exp = JointHistogram::<f64>::new(one_axis(100)).unwrap();
        // all mass in two wide regions; most bins are nearly empty
        for i in 0..100 {
            let x = (i as f64 + 0.5) / 100.0;
            obs.deposit(&[x], if i < 50 { 1.0 } else { 2.0 });
            exp.deposit(&[x], if i < 50 { 1.0 } else { 2.0 });
        }
        let out = chi_square_test(&obs, &exp).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert!(out.dof >= 1);
    }

    #[test]
    fn ks_against_true_cdf() {
        let mut rng = RngStream::new(9, 0);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let (_, p) = ks_test(&samples, |x| x).unwrap();
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn ks_power_against_wrong_rate() {
        // Exp(1) samples tested against Exp(2)
        let mut rng = RngStream::new(10, 0);
        let samples: Vec<f64> = (0..10_000).map(|_| -(1.0 - rng.uniform()).ln()).collect();
        let (_, p) = ks_test(&samples, |x: f64| 1.0 - (-2.0 * x).exp()).unwrap();
        assert!(p < 1e-6, "p = {p}");
    }

    #[test]
    fn ks_degenerate_sample() {
        let samples = vec![0.3f64; 50];
        let (d, _) = ks_test(&samples, |x| x).unwrap();
        // D = max(F(x0), 1 - F(x0)) for a point mass
        assert_abs_diff_eq!(d, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn ks_needs_enough_samples() {
        let samples = vec![0.5f64; 5];
        assert!(ks_test(&samples, |x| x).is_err());
    }

    #[test]
    fn kolmogorov_sf_reference_values() {
        // K(1.36) ≈ 0.9505 (the classical 5% critical point)
        assert_abs_diff_eq!(kolmogorov_sf(1.36), 0.0495, epsilon = 5e-4);
        // both branch formulas represent the same function; compare them
        // where each still converges
        for x in [0.9, 1.0, 1.18, 1.4] {
            assert_abs_diff_eq!(
                kolmogorov_sf_theta(x),
                kolmogorov_sf_series(x),
                epsilon = 1e-10
            );
        }
    }
}
