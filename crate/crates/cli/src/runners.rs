//! The five experiment entry points behind the CLI subcommands.

use std::path::PathBuf;

use serde::Serialize;

use lineage_core::genfun::{build_discrete, build_markov, build_volterra};
use lineage_core::poly::rational_to_f64;
use lineage_core::sampling::Scheme;
use lineage_core::simulator::simulate_tree;
use lineage_core::theory::{
    ancestral_rate, leftmost_lattice_exact, rate_bias, s_density, uniform_marker_lattice_exact,
    RenewalLaw,
};
use lineage_core::{GenFun64, RngStream};

use crate::compare::{
    binned_density_comparison, for_each_size_vector, for_each_skip_vector,
    leftmost_slice_comparison, observed_slice, palm_exponential_checks, palm_slice_comparison,
    s_density_comparison, slice_axes, slice_density, BinRow, CheckResult,
};
use crate::config::{ExperimentConfig, LifetimeConfig};
use crate::engine::simulate_batch;
use crate::enumerate::{enumerate_exact, ExactLaw, ExactValue, DEFAULT_STATE_BUDGET};
use crate::error::{CliError, Result};
use crate::output::{genfun_csv, lineage_csv, tree_csv, write_json, write_text};

/// Builds the generating-function table matching the configured lifetime law.
pub fn build_table(cfg: &ExperimentConfig) -> Result<GenFun64> {
    let d = cfg.offspring_law()?;
    let g = &cfg.genfun;
    Ok(match cfg.lifetime {
        LifetimeConfig::Exponential { rate } => build_markov(
            &d,
            rate,
            cfg.horizon,
            g.steps,
            g.s_points,
            cfg.strict_numerics,
        )?,
        LifetimeConfig::Gamma { .. } => build_volterra(
            &d,
            &cfg.lifetime_law()?,
            cfg.horizon,
            g.steps.max(200),
            g.s_points,
            cfg.strict_numerics,
        )?,
        LifetimeConfig::Deterministic { .. } => {
            let n = cfg.lattice_horizon()?;
            build_discrete(&d, n)?.to_table(g.s_points)?
        }
    })
}

pub fn run_genfun(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let table = build_table(cfg)?;
    let path = cfg.out_dir.join("genfun.csv");
    write_text(&path, &genfun_csv(&table))?;
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub config: ExperimentConfig,
    pub replicates: u64,
    pub survivors: u64,
    pub survival_fraction: f64,
    pub overflow_trees: u64,
    pub overflow_fraction: f64,
    pub mean_alive: f64,
    pub records_written: u64,
}

pub fn run_simulate(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SimulateSummary> {
    let batch = simulate_batch(cfg, threads)?;
    let csv = lineage_csv(
        batch
            .outcomes
            .iter()
            .flat_map(|o| o.records.iter().map(move |r| (o.replicate, r))),
    );
    write_text(&cfg.out_dir.join("lineages.csv"), &csv)?;
    if cfg.trace_trees > 0 {
        let d = cfg.offspring_law()?;
        let law = cfg.lifetime_law()?;
        for i in 0..cfg.trace_trees.min(cfg.replicates as usize) {
            let mut rng = RngStream::new(cfg.base_seed, i as u64);
            if let Ok(tree) = simulate_tree(&d, &law, cfg.horizon, &mut rng, cfg.max_nodes) {
                write_text(
                    &cfg.out_dir.join(format!("trace_{i:04}.csv")),
                    &tree_csv(&tree),
                )?;
            }
        }
    }
    // artifacts must not depend on where they are written
    let mut config_echo = cfg.clone();
    config_echo.out_dir = PathBuf::from(".");
    let summary = SimulateSummary {
        config: config_echo,
        replicates: batch.replicates(),
        survivors: batch.survivors(),
        survival_fraction: batch.survival_fraction(),
        overflow_trees: batch.overflow_trees(),
        overflow_fraction: batch.overflow_fraction(),
        mean_alive: batch.mean_alive(),
        records_written: batch.n_records(),
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn run_predict(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let d = cfg.offspring_law()?;
    let table = build_table(cfg)?;
    let p = &cfg.predict;
    let mut out = String::from("t,ell,B,rate,s,s_density\n");
    use std::fmt::Write as _;
    for i in 0..p.t_points {
        let t = cfg.horizon * i as f64 / (p.t_points - 1).max(1) as f64;
        for ell in 1..=p.ell_max {
            let b = rate_bias(&table, t, ell, p.quad_points)?;
            let rate_str = match cfg.exponential_rate() {
                Some(r) => ancestral_rate(&table, &d, r, t, ell, p.quad_points)?.to_string(),
                None => String::new(),
            };
            let _ = writeln!(out, "{t},{ell},{b},{rate_str},,");
        }
    }
    for j in 0..p.s_points {
        let s = j as f64 / (p.s_points - 1).max(1) as f64;
        let dens = s_density(&table, s)?;
        let _ = writeln!(out, ",,,,{s},{dens}");
    }
    let path = cfg.out_dir.join("predict.csv");
    write_text(&path, &out)?;
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub scheme: String,
    pub lifetime: LifetimeConfig,
    pub horizon: f64,
    pub replicates: u64,
    pub survivors: u64,
    pub checks: Vec<CheckResult>,
    pub verdict: String,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

pub fn run_compare(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<CompareReport> {
    let (checks, rows, replicates, survivors) =
        if matches!(cfg.lifetime, LifetimeConfig::Deterministic { .. }) {
            (lattice_exact_checks(cfg)?, Vec::new(), 0, 0)
        } else {
            continuous_checks(cfg, threads)?
        };
    let report = CompareReport {
        scheme: cfg.scheme().name().to_string(),
        lifetime: cfg.lifetime,
        horizon: cfg.horizon,
        replicates,
        survivors,
        verdict: if checks.iter().all(CheckResult::passed) {
            "PASS".into()
        } else {
            "FAIL".into()
        },
        checks,
    };
    write_json(&cfg.out_dir.join("compare.json"), &report)?;
    if !rows.is_empty() {
        let mut csv = String::from("bounds,observed,expected,mc_err,quad_err\n");
        use std::fmt::Write as _;
        for r in &rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                r.bounds, r.observed, r.expected, r.mc_err, r.quad_err
            );
        }
        write_text(&cfg.out_dir.join("compare_bins.csv"), &csv)?;
    }
    Ok(report)
}

fn continuous_checks(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<(Vec<CheckResult>, Vec<BinRow>, u64, u64)> {
    let d = cfg.offspring_law()?;
    let rl = RenewalLaw::new(cfg.lifetime_law()?);
    let table = build_table(cfg)?;
    let batch = simulate_batch(cfg, threads)?;
    if batch.survivors() < cfg.compare.min_survivors {
        return Err(CliError::Config(format!(
            "only {} surviving replicates, need at least {}",
            batch.survivors(),
            cfg.compare.min_survivors
        )));
    }
    let scheme = cfg.scheme();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    match scheme {
        Scheme::UniformMarker => {
            let sizes = &cfg.compare.slice_sizes;
            let observed = observed_slice(
                &batch,
                scheme,
                sizes,
                cfg.horizon,
                cfg.compare.t_bins,
                cfg.compare.s_bins,
            )?;
            let axes = slice_axes(
                scheme,
                sizes,
                cfg.horizon,
                cfg.compare.t_bins,
                cfg.compare.s_bins,
            )?;
            let density = slice_density(scheme, sizes, cfg.horizon, &table, &d, &rl);
            let cmp = binned_density_comparison(
                "uniform-marker slice (times, S)",
                &observed,
                density,
                axes,
                cfg.compare.quad_panels,
                4.0,
                0.001,
            )?;
            checks.extend(cmp.checks);
            rows = cmp.rows;
            let (sd_check, sd_rows) =
                s_density_comparison(&batch, &table, cfg.compare.density_bins, 3.0)?;
            checks.push(sd_check);
            rows.extend(sd_rows);
        }
        Scheme::Leftmost => {
            let cmp = leftmost_slice_comparison(
                &batch,
                &table,
                &d,
                &rl,
                &cfg.compare.slice_sizes,
                cfg.horizon,
                cfg.compare.t_bins,
                cfg.compare.quad_panels,
                4.0,
                0.001,
            )?;
            checks.extend(cmp.checks);
            rows = cmp.rows;
        }
        Scheme::Palm => match cfg.lifetime {
            LifetimeConfig::Exponential { rate } => {
                checks.extend(palm_exponential_checks(
                    &batch,
                    &d,
                    rate,
                    cfg.horizon,
                    0.001,
                )?);
            }
            _ => {
                let cmp = palm_slice_comparison(
                    &batch,
                    &table,
                    &d,
                    &rl,
                    &cfg.compare.slice_sizes,
                    cfg.horizon,
                    cfg.compare.t_bins,
                    cfg.compare.quad_panels,
                    4.0,
                    0.001,
                )?;
                checks.extend(cmp.checks);
                rows = cmp.rows;
            }
        },
    }
    Ok((checks, rows, batch.replicates(), batch.survivors()))
}

/// Exact comparisons for the unit-lattice lifetime: enumeration against the
/// closed-form lattice specializations, per size/skip vector, to 1e-12.
fn lattice_exact_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let n = cfg.lattice_horizon()?;
    let d = cfg.offspring_law()?;
    let law = enumerate_exact(&cfg.offspring, n, DEFAULT_STATE_BUDGET)?;
    let gen = build_discrete(&d, n)?;
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    match cfg.scheme() {
        Scheme::UniformMarker => {
            for_each_size_vector(d.k_max(), n, &mut |sizes| {
                let lhs = law.uniform.get(sizes).map(rational_to_f64).unwrap_or(0.0);
                let rhs = rational_to_f64(&uniform_marker_lattice_exact(sizes, &gen)?);
                worst = worst.max((lhs - rhs).abs());
                cells += 1;
                Ok(())
            })?;
        }
        Scheme::Palm => {
            // unnormalized lattice law: E[#alive with lineage ℓ⃗] = ∏ ℓ_i p_{ℓ_i}
            for_each_size_vector(d.k_max(), n, &mut |sizes| {
                let lhs = law.palm.get(sizes).map(rational_to_f64).unwrap_or(0.0);
                let rhs: f64 = sizes.iter().map(|&l| l as f64 * d.prob(l)).product();
                worst = worst.max((lhs - rhs).abs());
                cells += 1;
                Ok(())
            })?;
        }
        Scheme::Leftmost => {
            for_each_size_vector(d.k_max(), n, &mut |sizes| {
                for_each_skip_vector(sizes, &mut |skips| {
                    let lhs = law
                        .leftmost
                        .get(&(sizes.to_vec(), skips.to_vec()))
                        .map(rational_to_f64)
                        .unwrap_or(0.0);
                    let rhs = rational_to_f64(&leftmost_lattice_exact(sizes, skips, &gen)?);
                    worst = worst.max((lhs - rhs).abs());
                    cells += 1;
                    Ok(())
                })
            })?;
        }
    }
    Ok(vec![CheckResult {
        test: format!("lattice exact law vs enumeration ({} outcomes)", cells),
        statistic: worst,
        dof: None,
        p_value: None,
        tv: None,
        n_trials: law.genealogies,
        bins: Some(cells),
        verdict: if worst <= 1e-12 { "PASS" } else { "FAIL" }.into(),
    }])
}

#[derive(Debug, Serialize)]
pub struct EnumerateReport {
    pub offspring: Vec<f64>,
    pub horizon: usize,
    pub genealogies: u64,
    pub total: ExactValue,
    pub survival: ExactValue,
    pub uniform: Vec<SizeLawEntry>,
    pub palm: Vec<SizeLawEntry>,
    pub leftmost: Vec<SkipLawEntry>,
}

#[derive(Debug, Serialize)]
pub struct SizeLawEntry {
    pub sizes: Vec<usize>,
    pub prob: ExactValue,
}

#[derive(Debug, Serialize)]
pub struct SkipLawEntry {
    pub sizes: Vec<usize>,
    pub ks: Vec<usize>,
    pub prob: ExactValue,
}

pub fn run_enumerate(cfg: &ExperimentConfig) -> Result<EnumerateReport> {
    let n = cfg.lattice_horizon()?;
    let law = enumerate_exact(&cfg.offspring, n, DEFAULT_STATE_BUDGET)?;
    let report = enumerate_report(&cfg.offspring, n, &law)?;
    write_json(&cfg.out_dir.join("enumerate.json"), &report)?;
    Ok(report)
}

pub fn enumerate_report(offspring: &[f64], n: usize, law: &ExactLaw) -> Result<EnumerateReport> {
    // total probability over all genealogies must be 1 (up to the rational
    // representation of the inputs)
    let total = rational_to_f64(&law.total);
    if (total - 1.0).abs() > 1e-12 {
        return Err(CliError::Numerics(format!(
            "enumerated probabilities sum to {total}, not 1"
        )));
    }
    Ok(EnumerateReport {
        offspring: offspring.to_vec(),
        horizon: n,
        genealogies: law.genealogies,
        total: ExactValue::of(&law.total),
        survival: ExactValue::of(&law.survival),
        uniform: law
            .uniform
            .iter()
            .map(|(sizes, p)| SizeLawEntry {
                sizes: sizes.clone(),
                prob: ExactValue::of(p),
            })
            .collect(),
        palm: law
            .palm
            .iter()
            .map(|(sizes, p)| SizeLawEntry {
                sizes: sizes.clone(),
                prob: ExactValue::of(p),
            })
            .collect(),
        leftmost: law
            .leftmost
            .iter()
            .map(|((sizes, ks), p)| SkipLawEntry {
                sizes: sizes.clone(),
                ks: ks.clone(),
                prob: ExactValue::of(p),
            })
            .collect(),
    })
}
