//! The verification suite behind `lineage selftest`: eight criteria covering
//! solver accuracy, Monte Carlo agreement with every lineage law, the exact
//! lattice cross-checks, the rate-bias properties, the marker identities, and
//! bit-reproducibility across thread counts.
//!
//! Every criterion uses a pinned configuration and seed, writes its
//! artifacts under the output directory, and reports one pass/fail line.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use lineage_core::genfun::{build_discrete, build_markov};
use lineage_core::identities::{
    check_group_max_density, check_group_max_mixture, check_leftmost_skips,
};
use lineage_core::poly::rational_to_f64;
use lineage_core::theory::{leftmost_lattice_exact, rate_bias, uniform_marker_lattice_exact};
use lineage_core::{Offspring64, RngStream};

use crate::compare::palm_exponential_checks;
use crate::compare::{for_each_size_vector, for_each_skip_vector};
use crate::config::{CompareParams, ExperimentConfig, GenFunParams, LifetimeConfig, SchemeName};
use crate::engine::simulate_batch;
use crate::enumerate::{enumerate_exact, DEFAULT_STATE_BUDGET};
use crate::error::Result;
use crate::output::write_json;
use crate::runners::{enumerate_report, run_compare, run_simulate};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct SelftestReport {
    all_passed: bool,
    criteria: Vec<CriterionResult>,
}

fn base_config(
    offspring: Vec<f64>,
    lifetime: LifetimeConfig,
    horizon: f64,
    scheme: SchemeName,
    replicates: u64,
    base_seed: u64,
    out_dir: PathBuf,
) -> ExperimentConfig {
    ExperimentConfig {
        offspring,
        lifetime,
        horizon,
        scheme,
        replicates,
        base_seed,
        max_nodes: 1_000_000,
        genfun: GenFunParams::default(),
        predict: Default::default(),
        compare: CompareParams::default(),
        out_dir,
        strict_numerics: false,
        threads: None,
        trace_trees: 0,
    }
}

/// Runs all eight criteria, printing one line each, and writes
/// `results.json` plus per-criterion artifacts under `out_dir`.
pub fn run_selftest(out_dir: &Path, threads: Option<usize>) -> Result<Vec<CriterionResult>> {
    std::fs::create_dir_all(out_dir)?;
    type Criterion = fn(&Path, Option<usize>) -> Result<(bool, String)>;
    let criteria: [(&str, Criterion); 8] = [
        ("AC-1", ac1_genfun_closed_forms),
        ("AC-2", ac2_uniform_marker_monte_carlo),
        ("AC-3", ac3_lattice_uniform_exact),
        ("AC-4", ac4_lattice_leftmost_exact),
        ("AC-5", ac5_palm_homogeneity),
        ("AC-6", ac6_rate_bias),
        ("AC-7", ac7_marker_identities),
        ("AC-8", ac8_reproducibility),
    ];
    let mut results = Vec::new();
    for (id, f) in criteria {
        let start = Instant::now();
        let (passed, detail) = match f(out_dir, threads) {
            Ok(r) => r,
            Err(e) => (false, format!("errored: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{id} {} ({secs:.1} s) - {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
        results.push(CriterionResult {
            id: id.to_string(),
            passed,
            detail,
        });
    }
    let report = SelftestReport {
        all_passed: results.iter().all(|r| r.passed),
        criteria: results.clone(),
    };
    write_json(&out_dir.join("results.json"), &report)?;
    Ok(results)
}

/// Yule closed form `F_t(s) = s e^{-t} / (1 - s(1 - e^{-t}))`.
fn yule_f(t: f64, s: f64) -> f64 {
    let e = (-t).exp();
    s * e / (1.0 - s * (1.0 - e))
}

fn ac1_genfun_closed_forms(out_dir: &Path, _threads: Option<usize>) -> Result<(bool, String)> {
    let yule = Offspring64::new(vec![0.0, 0.0, 1.0])?;
    let table = build_markov(&yule, 1.0, 2.0, 1000, 201, false)?;
    let mut sup_yule = 0.0f64;
    for (i, &t) in table.t_grid().iter().enumerate() {
        for (j, &s) in table.s_grid().iter().enumerate() {
            sup_yule = sup_yule.max((table.values()[i][j] - yule_f(t, s)).abs());
        }
    }
    let binary = Offspring64::new(vec![0.5, 0.0, 0.5])?;
    let table_b = build_markov(&binary, 1.0, 2.0, 1000, 201, false)?;
    let mut sup_ext = 0.0f64;
    for (i, &t) in table_b.t_grid().iter().enumerate() {
        sup_ext = sup_ext.max((table_b.values()[i][0] - t / (t + 2.0)).abs());
    }
    #[derive(Serialize)]
    struct Ac1 {
        sup_yule: f64,
        sup_critical_extinction: f64,
        tolerance: f64,
    }
    write_json(
        &out_dir.join("ac1.json"),
        &Ac1 {
            sup_yule,
            sup_critical_extinction: sup_ext,
            tolerance: 1e-6,
        },
    )?;
    let pass = sup_yule <= 1e-6 && sup_ext <= 1e-6;
    Ok((
        pass,
        format!("sup err: yule {sup_yule:.2e}, critical extinction {sup_ext:.2e} (tol 1e-6)"),
    ))
}

fn ac2_uniform_marker_monte_carlo(
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<(bool, String)> {
    let cfg = base_config(
        vec![0.5, 0.0, 0.5],
        LifetimeConfig::Exponential { rate: 1.0 },
        2.0,
        SchemeName::Uniform,
        200_000,
        0x5EED_AC02,
        out_dir.join("ac2"),
    );
    let report = run_compare(&cfg, threads)?;
    let detail = report
        .checks
        .iter()
        .map(|c| format!("{} [{}]", c.test, c.verdict))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((report.passed(), detail))
}

fn ac3_lattice_uniform_exact(out_dir: &Path, _threads: Option<usize>) -> Result<(bool, String)> {
    let probs = vec![0.3, 0.2, 0.5];
    let n = 3;
    let d = Offspring64::new(probs.clone())?;
    let law = enumerate_exact(&probs, n, DEFAULT_STATE_BUDGET)?;
    let gen = build_discrete(&d, n)?;
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    for_each_size_vector(d.k_max(), n, &mut |sizes| {
        let lhs = law.uniform.get(sizes).map(rational_to_f64).unwrap_or(0.0);
        let rhs = rational_to_f64(&uniform_marker_lattice_exact(sizes, &gen)?);
        worst = worst.max((lhs - rhs).abs());
        cells += 1;
        Ok(())
    })?;
    // hand value: critical binary, n = 2, sizes (2, 2) has mass 3/8
    let binary = Offspring64::new(vec![0.5, 0.0, 0.5])?;
    let law2 = enumerate_exact(&[0.5, 0.0, 0.5], 2, DEFAULT_STATE_BUDGET)?;
    let gen2 = build_discrete(&binary, 2)?;
    let hand_enum = rational_to_f64(&law2.uniform[&vec![2usize, 2]]);
    let hand_formula = rational_to_f64(&uniform_marker_lattice_exact(&[2, 2], &gen2)?);
    let hand_ok = hand_enum == 0.375 && hand_formula == 0.375;
    write_json(
        &out_dir.join("ac3_enumerate.json"),
        &enumerate_report(&probs, n, &law)?,
    )?;
    #[derive(Serialize)]
    struct Ac3 {
        size_vectors: usize,
        max_abs_diff: f64,
        hand_value_enumeration: f64,
        hand_value_formula: f64,
    }
    write_json(
        &out_dir.join("ac3.json"),
        &Ac3 {
            size_vectors: cells,
            max_abs_diff: worst,
            hand_value_enumeration: hand_enum,
            hand_value_formula: hand_formula,
        },
    )?;
    let pass = worst <= 1e-12 && hand_ok;
    Ok((
        pass,
        format!("{cells} size vectors, max |enum - formula| = {worst:.2e}; hand value 0.375 reproduced: {hand_ok}"),
    ))
}

fn ac4_lattice_leftmost_exact(out_dir: &Path, _threads: Option<usize>) -> Result<(bool, String)> {
    let probs = vec![0.3, 0.2, 0.5];
    let n = 3;
    let d = Offspring64::new(probs.clone())?;
    let law = enumerate_exact(&probs, n, DEFAULT_STATE_BUDGET)?;
    let gen = build_discrete(&d, n)?;
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    let mut zero_skip_mass = 0.0f64;
    for_each_size_vector(d.k_max(), n, &mut |sizes| {
        for_each_skip_vector(sizes, &mut |skips| {
            let lhs = law
                .leftmost
                .get(&(sizes.to_vec(), skips.to_vec()))
                .map(rational_to_f64)
                .unwrap_or(0.0);
            let rhs = rational_to_f64(&leftmost_lattice_exact(sizes, skips, &gen)?);
            worst = worst.max((lhs - rhs).abs());
            if skips.iter().all(|&k| k == 0) {
                zero_skip_mass += lhs;
            }
            cells += 1;
            Ok(())
        })
    })?;
    // the all-zero skip vectors must carry positive mass: K_i = 0 is
    // attainable, resolving the skip-count range in favor of {0, ..., ℓ-1}
    let pass = worst <= 1e-12 && zero_skip_mass > 0.0;
    #[derive(Serialize)]
    struct Ac4 {
        outcomes: usize,
        max_abs_diff: f64,
        mass_on_all_zero_skips: f64,
    }
    write_json(
        &out_dir.join("ac4.json"),
        &Ac4 {
            outcomes: cells,
            max_abs_diff: worst,
            mass_on_all_zero_skips: zero_skip_mass,
        },
    )?;
    Ok((
        pass,
        format!("{cells} (sizes, skips) outcomes, max |enum - formula| = {worst:.2e}; k = 0 mass {zero_skip_mass:.4}"),
    ))
}

fn ac5_palm_homogeneity(out_dir: &Path, threads: Option<usize>) -> Result<(bool, String)> {
    let cfg = base_config(
        vec![0.2, 0.3, 0.5],
        LifetimeConfig::Exponential { rate: 1.0 },
        3.0,
        SchemeName::Palm,
        100_000,
        0x5EED_AC05,
        out_dir.join("ac5"),
    );
    let d = cfg.offspring_law()?;
    let batch = simulate_batch(&cfg, threads)?;
    let checks = palm_exponential_checks(&batch, &d, 1.0, cfg.horizon, 0.001)?;
    write_json(&out_dir.join("ac5_report.json"), &checks)?;
    let pass = checks.iter().all(|c| c.passed());
    let detail = checks
        .iter()
        .map(|c| format!("{} [{}]", c.test, c.verdict))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((pass, detail))
}

fn ac6_rate_bias(out_dir: &Path, _threads: Option<usize>) -> Result<(bool, String)> {
    // neutrality: B(t, T, 1) = 1 for random laws, rates, horizons and times
    let mut rng = RngStream::new(0x5EED_AC06, 0);
    let mut worst_neutral = 0.0f64;
    for _ in 0..20 {
        let k_max = 1 + (rng.uniform() * 3.0) as usize;
        let mut w: Vec<f64> = (0..=k_max).map(|_| 0.05 + rng.uniform()).collect();
        let total: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= total;
        }
        let d = Offspring64::new(w)?;
        let rate = 0.5 + 1.5 * rng.uniform();
        let horizon = 1.0 + 2.0 * rng.uniform();
        let table = build_markov(&d, rate, horizon, 300, 101, false)?;
        let t = rng.uniform() * horizon;
        worst_neutral = worst_neutral.max((rate_bias(&table, t, 1, 201)? - 1.0).abs());
    }
    // long-horizon stabilization: |B(T-1, T, 2) - 1| strictly decreasing
    let binary = Offspring64::new(vec![0.5, 0.0, 0.5])?;
    let mut deviations = Vec::new();
    let mut csv = String::from("T,B,abs_dev\n");
    for &horizon in &[5.0f64, 10.0, 20.0, 40.0] {
        let steps = (250.0 * horizon) as usize;
        let table = build_markov(&binary, 1.0, horizon, steps, 201, false)?;
        let b = rate_bias(&table, horizon - 1.0, 2, 2001)?;
        let dev = (b - 1.0).abs();
        use std::fmt::Write as _;
        let _ = writeln!(csv, "{horizon},{b},{dev}");
        deviations.push(dev);
    }
    crate::output::write_text(&out_dir.join("ac6.csv"), &csv)?;
    let monotone = deviations.windows(2).all(|w| w[1] < w[0]);
    let pass = worst_neutral <= 1e-10 && monotone;
    Ok((
        pass,
        format!(
            "neutrality worst |B-1| = {worst_neutral:.2e} (tol 1e-10); |B(T-1,T,2)-1| over T=5,10,20,40: {} (strictly decreasing: {monotone})",
            deviations
                .iter()
                .map(|d| format!("{d:.4}"))
                .collect::<Vec<_>>()
                .join(" > ")
        ),
    ))
}

fn ac7_marker_identities(out_dir: &Path, _threads: Option<usize>) -> Result<(bool, String)> {
    let trials = 1_000_000u64;
    let ntilde = Offspring64::new(vec![0.4, 0.35, 0.25])?;
    let groups = Offspring64::new(vec![0.25, 0.25, 0.5])?;
    let mut rng = RngStream::new(0x5EED_AC07, 0);
    let group_max = check_group_max_density(&ntilde, 3, 20, trials, &mut rng);
    let mixture = check_group_max_mixture(&ntilde, &groups, 20, trials, &mut rng);
    let skip_law = check_leftmost_skips(&ntilde, 4, trials, &mut rng);
    #[derive(Serialize)]
    struct Ac7 {
        group_max_tv: f64,
        group_max_bound: f64,
        mixture_tv: f64,
        mixture_bound: f64,
        skip_law_worst_sigma: f64,
    }
    write_json(
        &out_dir.join("ac7.json"),
        &Ac7 {
            group_max_tv: group_max.tv,
            group_max_bound: 3.0 * group_max.mc_err,
            mixture_tv: mixture.tv,
            mixture_bound: 3.0 * mixture.mc_err,
            skip_law_worst_sigma: skip_law.worst_sigma(),
        },
    )?;
    let pass = group_max.passes(3.0) && mixture.passes(3.0) && skip_law.passes(3.0);
    Ok((
        pass,
        format!(
            "group-max TV {:.2e} <= {:.2e}; mixture TV {:.2e} <= {:.2e}; skip law worst {:.2} sigma (<= 3)",
            group_max.tv,
            3.0 * group_max.mc_err,
            mixture.tv,
            3.0 * mixture.mc_err,
            skip_law.worst_sigma()
        ),
    ))
}

fn ac8_reproducibility(out_dir: &Path, _threads: Option<usize>) -> Result<(bool, String)> {
    let dir = out_dir.join("ac8");
    let cfg = base_config(
        vec![0.3, 0.2, 0.5],
        LifetimeConfig::Exponential { rate: 1.0 },
        2.0,
        SchemeName::Palm,
        20_000,
        0x5EED_AC08,
        dir.clone(),
    );
    let snapshot = || -> Result<(Vec<u8>, Vec<u8>)> {
        Ok((
            std::fs::read(dir.join("lineages.csv"))?,
            std::fs::read(dir.join("summary.json"))?,
        ))
    };
    run_simulate(&cfg, Some(1))?;
    let first = snapshot()?;
    run_simulate(&cfg, Some(8))?;
    let with_8_threads = snapshot()?;
    run_simulate(&cfg, Some(1))?;
    let rerun = snapshot()?;
    let identical = first == with_8_threads && first == rerun;
    #[derive(Serialize)]
    struct Ac8 {
        lineage_bytes: usize,
        identical_across_thread_counts: bool,
        identical_across_reruns: bool,
    }
    write_json(
        &out_dir.join("ac8.json"),
        &Ac8 {
            lineage_bytes: first.0.len(),
            identical_across_thread_counts: first == with_8_threads,
            identical_across_reruns: first == rerun,
        },
    )?;
    Ok((
        identical,
        format!(
            "{} lineage bytes byte-identical across 1 thread, 8 threads, and a rerun: {identical}",
            first.0.len()
        ),
    ))
}
