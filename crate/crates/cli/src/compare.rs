//! Observed-versus-theory comparisons: binned slices of the lineage laws,
//! the marker density, and the Palm homogeneity battery.

use serde::Serialize;

use lineage_core::sampling::Scheme;
use lineage_core::stats::{
    bin_records, chi_square_sf, chi_square_test, expected_histogram, ks_test, tv_distance, Axis,
    AxisKind, JointHistogram, RecordFilter,
};
use lineage_core::theory::{
    leftmost_density, palm_density, uniform_marker_density, RenewalLaw, UniformMarkerQuery,
};
use lineage_core::{GenFun64, Offspring64};

use crate::engine::Batch;
use crate::error::{CliError, Result};

/// One verdict line of a comparison report, JSON-shaped per the external
/// interface: test, statistic, dof, p_value, tv, n_trials, bins, verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub test: String,
    pub statistic: f64,
    pub dof: Option<usize>,
    pub p_value: Option<f64>,
    pub tv: Option<f64>,
    pub n_trials: u64,
    pub bins: Option<usize>,
    pub verdict: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.verdict == "PASS"
    }

    fn verdict_str(pass: bool) -> String {
        if pass { "PASS" } else { "FAIL" }.to_string()
    }
}

/// Per-bin rows for the CSV artifact.
#[derive(Debug, Clone, Serialize)]
pub struct BinRow {
    pub bounds: String,
    pub observed: f64,
    pub expected: f64,
    pub mc_err: f64,
    pub quad_err: f64,
}

pub struct SliceComparison {
    pub checks: Vec<CheckResult>,
    pub rows: Vec<BinRow>,
}

/// Quadrature nodes land on bin edges, including `t_1 = 0` where the lineage
/// densities extend continuously; nudge that edge inward and reject genuinely
/// inadmissible orderings (which carry no mass).
fn admissible_times(raw: &[f64]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(raw.len());
    let mut prev = 0.0f64;
    for (i, &t) in raw.iter().enumerate() {
        let t = if i == 0 && t == 0.0 { 1e-12 } else { t };
        if t <= prev {
            return None;
        }
        out.push(t);
        prev = t;
    }
    Some(out)
}

fn bin_bounds(axes: &[Axis<f64>], flat: usize) -> String {
    let mut rem = flat;
    let mut coords = vec![0usize; axes.len()];
    for d in (0..axes.len()).rev() {
        coords[d] = rem % axes[d].bins();
        rem /= axes[d].bins();
    }
    axes.iter()
        .zip(&coords)
        .map(|(a, &c)| format!("{}:{}..{}", a.name, a.edges[c], a.edges[c + 1]))
        .collect::<Vec<_>>()
        .join(";")
}

/// Compares an observed histogram against bin-integrals of a density:
/// every bin must sit within `err_multiple` combined Monte Carlo +
/// quadrature errors, and the Pearson chi-square must clear `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn binned_density_comparison(
    name: &str,
    observed: &JointHistogram<f64>,
    density: impl Fn(&[f64]) -> lineage_core::Result<f64>,
    axes: Vec<Axis<f64>>,
    quad_panels: usize,
    err_multiple: f64,
    alpha: f64,
) -> Result<SliceComparison> {
    let expected = expected_histogram(&density, axes.clone(), quad_panels)?;
    let refined = expected_histogram(&density, axes.clone(), quad_panels * 2)?;
    binned_histogram_comparison(
        name,
        observed,
        &expected,
        &refined,
        axes,
        err_multiple,
        alpha,
    )
}

/// Shared per-bin and chi-square verdicts given precomputed expected
/// histograms (`refined` estimates the quadrature error).
fn binned_histogram_comparison(
    name: &str,
    observed: &JointHistogram<f64>,
    expected: &JointHistogram<f64>,
    refined: &JointHistogram<f64>,
    axes: Vec<Axis<f64>>,
    err_multiple: f64,
    alpha: f64,
) -> Result<SliceComparison> {
    let n = observed.n_trials();
    let obs_mass = observed.joint_masses()?;
    let mut rows = Vec::with_capacity(obs_mass.len());
    let mut worst = 0.0f64;
    for (flat, &obs) in obs_mass.iter().enumerate() {
        let exp = expected.counts()[flat];
        let quad_err = (exp - refined.counts()[flat]).abs();
        let p = exp.clamp(0.0, 1.0);
        let mc_err = (p * (1.0 - p) / n as f64).sqrt();
        let ratio = (obs - exp).abs() / (mc_err + quad_err + 1e-300);
        worst = worst.max(ratio);
        rows.push(BinRow {
            bounds: bin_bounds(&axes, flat),
            observed: obs,
            expected: exp,
            mc_err,
            quad_err,
        });
    }
    let per_bin = CheckResult {
        test: format!("{name}: per-bin |obs-exp| <= {err_multiple} x (mc+quad) error"),
        statistic: worst,
        dof: None,
        p_value: None,
        tv: None,
        n_trials: n,
        bins: Some(rows.len()),
        verdict: CheckResult::verdict_str(worst <= err_multiple),
    };
    let chi = chi_square_test(observed, expected)?;
    let chi_check = CheckResult {
        test: format!("{name}: chi-square"),
        statistic: chi.statistic,
        dof: Some(chi.dof),
        p_value: Some(chi.p_value),
        tv: None,
        n_trials: n,
        bins: Some(rows.len()),
        verdict: CheckResult::verdict_str(chi.p_value >= alpha),
    };
    Ok(SliceComparison {
        checks: vec![per_bin, chi_check],
        rows,
    })
}

/// All size vectors in `{1..k_max}^n`.
pub fn for_each_size_vector(
    k_max: usize,
    n: usize,
    f: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    let mut sizes = vec![1usize; n];
    loop {
        f(&sizes)?;
        let mut i = 0;
        loop {
            if i == n {
                return Ok(());
            }
            sizes[i] += 1;
            if sizes[i] <= k_max {
                break;
            }
            sizes[i] = 1;
            i += 1;
        }
    }
}

/// All skip vectors with `0 <= k_i < ℓ_i`.
pub fn for_each_skip_vector(
    sizes: &[usize],
    f: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    let mut ks = vec![0usize; sizes.len()];
    loop {
        f(&ks)?;
        let mut i = 0;
        loop {
            if i == sizes.len() {
                return Ok(());
            }
            ks[i] += 1;
            if ks[i] < sizes[i] {
                break;
            }
            ks[i] = 0;
            i += 1;
        }
    }
}

/// Slice comparison for the leftmost scheme: skip counts are integer cells,
/// so the expected histogram enumerates every skip vector exactly and
/// quadratures only the event-time axes.
#[allow(clippy::too_many_arguments)]
pub fn leftmost_slice_comparison(
    batch: &Batch,
    table: &GenFun64,
    d: &Offspring64,
    rl: &RenewalLaw<f64>,
    slice_sizes: &[usize],
    horizon: f64,
    t_bins: usize,
    quad_panels: usize,
    err_multiple: f64,
    alpha: f64,
) -> Result<SliceComparison> {
    let j = slice_sizes.len();
    let axes = slice_axes(Scheme::Leftmost, slice_sizes, horizon, t_bins, 0)?;
    let observed = observed_slice(batch, Scheme::Leftmost, slice_sizes, horizon, t_bins, 0)?;
    let time_axes: Vec<Axis<f64>> = axes[..j].to_vec();
    let mut expected = JointHistogram::new(axes.clone())?;
    let mut refined = JointHistogram::new(axes.clone())?;
    for_each_skip_vector(slice_sizes, &mut |ks| {
        let density = |p: &[f64]| {
            let Some(times) = admissible_times(p) else {
                return Ok(0.0);
            };
            leftmost_density(&times, slice_sizes, ks, horizon, d, rl, table)
        };
        let by_time = expected_histogram(density, time_axes.clone(), quad_panels)?;
        let by_time_fine = expected_histogram(density, time_axes.clone(), quad_panels * 2)?;
        // scatter the time-bin masses into the (times, skips) cells through
        // bin-center points
        let mut point = vec![0.0f64; axes.len()];
        for (i, &k) in ks.iter().enumerate() {
            point[j + i] = k as f64;
        }
        let mut t_bin = vec![0usize; j];
        for (flat, (&mass, &fine)) in by_time
            .counts()
            .iter()
            .zip(by_time_fine.counts())
            .enumerate()
        {
            let mut rem = flat;
            for dim in (0..j).rev() {
                t_bin[dim] = rem % time_axes[dim].bins();
                rem /= time_axes[dim].bins();
            }
            for dim in 0..j {
                let e = &time_axes[dim].edges;
                point[dim] = (e[t_bin[dim]] + e[t_bin[dim] + 1]) / 2.0;
            }
            expected.deposit(&point, mass);
            refined.deposit(&point, fine);
        }
        Ok(())
    })?;
    binned_histogram_comparison(
        "leftmost slice (times, skip counts)",
        &observed,
        &expected,
        &refined,
        axes,
        err_multiple,
        alpha,
    )
}

/// Slice comparison for the Palm scheme with a general continuous lifetime
/// law. Several records of one tree can fall in the same bin and the weights
/// are expected counts rather than probabilities, so both the per-bin errors
/// and the global test come from the cluster (per-tree) covariance: per-bin
/// ratio-estimator standard errors plus a Wald chi-square over the bins with
/// enough expected mass.
#[allow(clippy::too_many_arguments)]
pub fn palm_slice_comparison(
    batch: &Batch,
    table: &GenFun64,
    d: &Offspring64,
    rl: &RenewalLaw<f64>,
    slice_sizes: &[usize],
    horizon: f64,
    t_bins: usize,
    quad_panels: usize,
    err_multiple: f64,
    alpha: f64,
) -> Result<SliceComparison> {
    let axes = slice_axes(Scheme::Palm, slice_sizes, horizon, t_bins, 0)?;
    let filter = RecordFilter {
        scheme: Some(Scheme::Palm),
        j: Some(slice_sizes.len()),
        sizes: Some(slice_sizes.to_vec()),
    };
    let n_trees = batch.replicates() as f64;
    let probe = JointHistogram::new(axes.clone())?;
    let n_bins = probe.counts().len();

    // per-tree binned contributions: first and second cluster moments
    let mut count = vec![0.0f64; n_bins];
    let mut cluster_sq = vec![0.0f64; n_bins];
    let mut local: Vec<(usize, f64)> = Vec::new();
    for outcome in &batch.outcomes {
        local.clear();
        for rec in &outcome.records {
            if !filter.matches(rec) {
                continue;
            }
            if let Some(idx) = probe.bin_index(&rec.times) {
                match local.iter_mut().find(|(i, _)| *i == idx) {
                    Some(entry) => entry.1 += rec.weight,
                    None => local.push((idx, rec.weight)),
                }
            }
        }
        for &(idx, w) in &local {
            count[idx] += w;
            cluster_sq[idx] += w * w;
        }
    }

    // expected masses: conditional density times E[N_T]
    let mean_pop = table.eval_deriv(horizon, 1.0)?;
    let inner = slice_density(Scheme::Palm, slice_sizes, horizon, table, d, rl);
    let density = move |p: &[f64]| Ok(inner(p)? * mean_pop);
    let expected = expected_histogram(&density, axes.clone(), quad_panels)?;
    let refined = expected_histogram(&density, axes.clone(), quad_panels * 2)?;

    let mut rows = Vec::with_capacity(n_bins);
    let mut worst = 0.0f64;
    let mut wald = 0.0f64;
    let mut wald_dof = 0usize;
    for idx in 0..n_bins {
        let obs = count[idx] / n_trees;
        let exp = expected.counts()[idx];
        let quad_err = (exp - refined.counts()[idx]).abs();
        // ratio-estimator variance over trees of the per-tree contribution
        let var = (cluster_sq[idx] - count[idx] * count[idx] / n_trees).max(0.0);
        let mc_err = var.sqrt() / n_trees;
        let ratio = (obs - exp).abs() / (mc_err + quad_err + 1e-300);
        worst = worst.max(ratio);
        if exp * n_trees >= 5.0 && mc_err > 0.0 {
            let z = (obs - exp) / mc_err;
            wald += z * z;
            wald_dof += 1;
        }
        rows.push(BinRow {
            bounds: bin_bounds(&axes, idx),
            observed: obs,
            expected: exp,
            mc_err,
            quad_err,
        });
    }
    let per_bin = CheckResult {
        test: format!(
            "palm slice (times): per-bin |obs-exp| <= {err_multiple} x (cluster+quad) error"
        ),
        statistic: worst,
        dof: None,
        p_value: None,
        tv: None,
        n_trials: batch.replicates(),
        bins: Some(n_bins),
        verdict: CheckResult::verdict_str(worst <= err_multiple),
    };
    let p_wald = chi_square_sf(wald, wald_dof.max(1) as f64);
    let wald_check = CheckResult {
        test: "palm slice (times): cluster Wald chi-square".into(),
        statistic: wald,
        dof: Some(wald_dof),
        p_value: Some(p_wald),
        tv: None,
        n_trials: batch.replicates(),
        bins: Some(wald_dof),
        verdict: CheckResult::verdict_str(p_wald >= alpha),
    };
    Ok(SliceComparison {
        checks: vec![per_bin, wald_check],
        rows,
    })
}

/// Observed slice histogram `{J = j, L = sizes}` over `(T_1..T_j, S)` or
/// `(T_1..T_j, K_1..K_j)` depending on the scheme.
pub fn observed_slice(
    batch: &Batch,
    scheme: Scheme,
    slice_sizes: &[usize],
    horizon: f64,
    t_bins: usize,
    s_bins: usize,
) -> Result<JointHistogram<f64>> {
    let axes = slice_axes(scheme, slice_sizes, horizon, t_bins, s_bins)?;
    let filter = RecordFilter {
        scheme: Some(scheme),
        j: Some(slice_sizes.len()),
        sizes: Some(slice_sizes.to_vec()),
    };
    Ok(bin_records(
        batch.records(),
        axes,
        &filter,
        batch.replicates(),
    )?)
}

pub fn slice_axes(
    scheme: Scheme,
    slice_sizes: &[usize],
    horizon: f64,
    t_bins: usize,
    s_bins: usize,
) -> Result<Vec<Axis<f64>>> {
    let j = slice_sizes.len();
    if j == 0 {
        return Err(CliError::Config("slice needs at least one event".into()));
    }
    let mut axes = Vec::new();
    for i in 0..j {
        axes.push(Axis::uniform(
            format!("t{}", i + 1),
            AxisKind::EventTime(i),
            0.0,
            horizon,
            t_bins,
        )?);
    }
    match scheme {
        Scheme::UniformMarker => {
            axes.push(Axis::uniform("s", AxisKind::Marker, 0.0, 1.0, s_bins)?);
        }
        Scheme::Palm => {}
        Scheme::Leftmost => {
            for (i, &l) in slice_sizes.iter().enumerate() {
                axes.push(Axis::new(
                    format!("k{}", i + 1),
                    AxisKind::SkipCount(i),
                    (0..=l).map(|k| k as f64 - 0.5).collect(),
                )?);
            }
        }
    }
    Ok(axes)
}

/// Theoretical density over the slice coordinates, for the schemes whose
/// coordinates are all continuous (the leftmost scheme carries integer skip
/// cells and goes through [`leftmost_slice_comparison`] instead). Points with
/// inadmissible time orderings contribute zero mass.
pub fn slice_density<'a>(
    scheme: Scheme,
    slice_sizes: &'a [usize],
    horizon: f64,
    table: &'a GenFun64,
    d: &'a Offspring64,
    rl: &'a RenewalLaw<f64>,
) -> impl Fn(&[f64]) -> lineage_core::Result<f64> + 'a {
    let j = slice_sizes.len();
    move |p: &[f64]| {
        let Some(times) = admissible_times(&p[..j]) else {
            return Ok(0.0);
        };
        match scheme {
            Scheme::UniformMarker => {
                let q = UniformMarkerQuery::new(times, slice_sizes.to_vec(), p[j], horizon)?;
                uniform_marker_density(&q, table, d, rl)
            }
            Scheme::Palm => palm_density(&times, slice_sizes, horizon, d, rl, table),
            Scheme::Leftmost => Err(lineage_core::Error::Config(
                "leftmost slices mix continuous and integer coordinates; use leftmost_slice_comparison".into(),
            )),
        }
    }
}

/// Marker-density comparison: empirical conditional histogram of `S` over
/// survivors against bin integrals of `F'_T(s) / (1 - F_T(0))`, in total
/// variation against the Monte Carlo error scale.
pub fn s_density_comparison(
    batch: &Batch,
    table: &GenFun64,
    bins: usize,
    err_multiple: f64,
) -> Result<(CheckResult, Vec<BinRow>)> {
    let survivors = batch.survivors();
    let axes = vec![Axis::uniform("s", AxisKind::Marker, 0.0, 1.0, bins)?];
    let filter = RecordFilter {
        scheme: Some(Scheme::UniformMarker),
        ..RecordFilter::default()
    };
    let observed = bin_records(batch.records(), axes.clone(), &filter, survivors)?;
    let expected = expected_histogram(
        |p| lineage_core::theory::s_density(table, p[0]),
        axes.clone(),
        16,
    )?;
    let tv = tv_distance(&observed, &expected)?;
    let mut mc_err = 0.0;
    let mut rows = Vec::with_capacity(bins);
    for (flat, &e) in expected.counts().iter().enumerate() {
        let p = (e / expected.total_weight()).clamp(0.0, 1.0);
        let bin_err = (p * (1.0 - p) / survivors as f64).sqrt();
        mc_err += bin_err;
        rows.push(BinRow {
            bounds: bin_bounds(&axes, flat),
            observed: observed.counts()[flat] / survivors as f64,
            expected: e,
            mc_err: bin_err,
            quad_err: 0.0,
        });
    }
    mc_err /= 2.0;
    let check = CheckResult {
        test: format!("marker density: TV <= {err_multiple} x MC error"),
        statistic: tv / mc_err,
        dof: None,
        p_value: None,
        tv: Some(tv),
        n_trials: survivors,
        bins: Some(bins),
        verdict: CheckResult::verdict_str(tv <= err_multiple * mc_err),
    };
    Ok((check, rows))
}

/// Inter-event waits rescaled through the censoring-aware conditional CDF of
/// an Exp(rate) wait; i.i.d. Exp(rate) when the events form a homogeneous
/// Poisson(rate) stream on `[0, horizon]`.
pub fn rescaled_waits(times: &[f64], horizon: f64, rate: f64, out: &mut Vec<f64>) {
    let mut prev = 0.0f64;
    for &t in times {
        let u = (1.0 - (-rate * (t - prev)).exp()) / (1.0 - (-rate * (horizon - prev)).exp());
        out.push(-(1.0 - u.min(1.0 - 1e-15)).ln() / rate);
        prev = t;
    }
}

/// Palm battery for exponential lifetimes: Poisson(r m) homogeneity via
/// time-rescaled KS, mean event count, and size-biased offspring frequencies.
///
/// Records from one tree share lineage prefixes, so trees — not records —
/// are the i.i.d. units; all error estimates here are cluster-robust ratio
/// estimators over trees, and the KS p-value is corrected by the estimated
/// design effect of the pooled empirical CDF.
pub fn palm_exponential_checks(
    batch: &Batch,
    d: &Offspring64,
    rate: f64,
    horizon: f64,
    alpha: f64,
) -> Result<Vec<CheckResult>> {
    let m = d.mean();
    let lineage_rate = rate * m;
    let null_cdf = |x: f64| 1.0 - (-lineage_rate * x).exp();
    let n_sizes = d.k_max() + 1;

    // per-tree aggregates
    struct TreeAgg {
        waits: Vec<f64>,
        records: f64,
        events: f64,
        size_counts: Vec<f64>,
    }
    let mut trees: Vec<TreeAgg> = Vec::new();
    let mut all_waits: Vec<f64> = Vec::new();
    for outcome in &batch.outcomes {
        if outcome.records.is_empty() {
            continue;
        }
        let mut agg = TreeAgg {
            waits: Vec::new(),
            records: outcome.records.len() as f64,
            events: 0.0,
            size_counts: vec![0.0; n_sizes],
        };
        for r in &outcome.records {
            rescaled_waits(&r.times, horizon, lineage_rate, &mut agg.waits);
            agg.events += r.j() as f64;
            for &l in &r.sizes {
                agg.size_counts[l] += 1.0;
            }
        }
        all_waits.extend_from_slice(&agg.waits);
        trees.push(agg);
    }
    if trees.is_empty() {
        return Err(CliError::Config("no Palm records to compare".into()));
    }
    let n_waits = all_waits.len() as f64;

    // KS statistic on the pooled waits; null p-value corrected by the
    // design effect of the clustered empirical CDF, estimated at the
    // deciles of the null distribution
    let (dstat, _naive_p) = ks_test(&all_waits, null_cdf)?;
    let mut deff: f64 = 1.0;
    for decile in 1..10 {
        let c = decile as f64 / 10.0;
        let x_c = -(1.0 - c).ln() / lineage_rate;
        let fhat = all_waits.iter().filter(|&&w| w <= x_c).count() as f64 / n_waits;
        let mut cluster_var = 0.0;
        for t in &trees {
            let a = t.waits.iter().filter(|&&w| w <= x_c).count() as f64;
            let dev = a - fhat * t.waits.len() as f64;
            cluster_var += dev * dev;
        }
        cluster_var /= n_waits * n_waits;
        let iid_var = c * (1.0 - c) / n_waits;
        deff = deff.max(cluster_var / iid_var);
    }
    let n_eff = n_waits / deff;
    let x = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * dstat;
    let p_ks = lineage_core::stats::kolmogorov_sf(x);
    let ks_check = CheckResult {
        test: format!(
            "palm waits: KS vs Exp({lineage_rate}) after censoring rescale (design effect {deff:.2})"
        ),
        statistic: dstat,
        dof: None,
        p_value: Some(p_ks),
        tv: None,
        n_trials: all_waits.len() as u64,
        bins: None,
        verdict: CheckResult::verdict_str(p_ks >= alpha),
    };

    // mean event count per record: ratio of clustered sums with a
    // delta-method standard error
    let sum_events: f64 = trees.iter().map(|t| t.events).sum();
    let sum_records: f64 = trees.iter().map(|t| t.records).sum();
    let mean_j = sum_events / sum_records;
    let mut var = 0.0;
    for t in &trees {
        let dev = t.events - mean_j * t.records;
        var += dev * dev;
    }
    let se = var.sqrt() / sum_records;
    let target = lineage_rate * horizon;
    let mean_check = CheckResult {
        test: format!("palm mean event count vs {target:.4} (cluster SE)"),
        statistic: (mean_j - target).abs() / se,
        dof: None,
        p_value: None,
        tv: None,
        n_trials: sum_records as u64,
        bins: None,
        verdict: CheckResult::verdict_str((mean_j - target).abs() <= 3.0 * se),
    };

    // event-size frequencies against ℓ p_ℓ / m: per-size 3-sigma bounds and
    // a Wald chi-square, both with cluster-robust covariance
    let total_events: f64 = trees
        .iter()
        .map(|t| t.size_counts.iter().sum::<f64>())
        .sum();
    let supported: Vec<usize> = (1..n_sizes).filter(|&l| d.prob(l) > 0.0).collect();
    let mut per_size_ok = true;
    let mut worst_sigma = 0.0f64;
    for &l in &supported {
        let p0 = l as f64 * d.prob(l) / m;
        let phat: f64 = trees.iter().map(|t| t.size_counts[l]).sum::<f64>() / total_events;
        let mut v = 0.0;
        for t in &trees {
            let dev = t.size_counts[l] - phat * t.size_counts.iter().sum::<f64>();
            v += dev * dev;
        }
        let se_l = v.sqrt() / total_events;
        let sigma = (phat - p0).abs() / se_l;
        worst_sigma = worst_sigma.max(sigma);
        if sigma > 3.0 {
            per_size_ok = false;
        }
    }
    let per_size_check = CheckResult {
        test: "palm event sizes within 3 sigma of size-biased law per size".into(),
        statistic: worst_sigma,
        dof: None,
        p_value: None,
        tv: None,
        n_trials: total_events as u64,
        bins: Some(supported.len()),
        verdict: CheckResult::verdict_str(per_size_ok),
    };
    let wald = cluster_wald_chi_square(&trees, &supported, d, m, total_events, |t| &t.size_counts);
    let p_sizes = chi_square_sf(wald.0, wald.1 as f64);
    let size_check = CheckResult {
        test: "palm event sizes vs size-biased law (cluster Wald chi-square)".into(),
        statistic: wald.0,
        dof: Some(wald.1),
        p_value: Some(p_sizes),
        tv: None,
        n_trials: total_events as u64,
        bins: Some(supported.len()),
        verdict: CheckResult::verdict_str(p_sizes >= alpha),
    };
    Ok(vec![ks_check, mean_check, per_size_check, size_check])
}

/// Wald chi-square for clustered multinomial proportions: drops the last
/// supported cell, builds the cluster-robust covariance of the remaining
/// proportions and inverts it by Gaussian elimination.
fn cluster_wald_chi_square<T>(
    trees: &[T],
    supported: &[usize],
    d: &Offspring64,
    m: f64,
    total_events: f64,
    counts_of: impl Fn(&T) -> &[f64],
) -> (f64, usize) {
    let k = supported.len() - 1;
    if k == 0 {
        // single supported size: nothing varies
        return (0.0, 1);
    }
    let phat: Vec<f64> = supported
        .iter()
        .map(|&l| trees.iter().map(|t| counts_of(t)[l]).sum::<f64>() / total_events)
        .collect();
    let mut cov = vec![vec![0.0f64; k]; k];
    for t in trees {
        let counts = counts_of(t);
        let w: f64 = counts.iter().sum();
        let dev: Vec<f64> = (0..k).map(|i| counts[supported[i]] - phat[i] * w).collect();
        for i in 0..k {
            for j in 0..k {
                cov[i][j] += dev[i] * dev[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= total_events * total_events;
        }
    }
    let z: Vec<f64> = (0..k)
        .map(|i| {
            let l = supported[i];
            phat[i] - l as f64 * d.prob(l) / m
        })
        .collect();
    match solve_linear(cov, z.clone()) {
        Some(solved) => {
            let stat: f64 = z.iter().zip(&solved).map(|(a, b)| a * b).sum();
            (stat.max(0.0), k)
        }
        None => (f64::INFINITY, k),
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting; `None`
/// for (numerically) singular systems.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (c, v) in lower[0].iter_mut().enumerate().skip(col) {
                *v -= f * upper[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}
