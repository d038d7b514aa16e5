//! Numerical and exact computation of `F_t(s) = E[s^{N_t}]`.
//!
//! Three builders cover the three lifetime laws:
//! * [`build_markov`] — exponential lifetimes, backward ODE
//!   `dF/dt = r(f(F) - F)` integrated with classical RK4, plus the companion
//!   linear ODE `dG/dt = r(f'(F) - 1)G` for the s-derivative;
//! * [`build_discrete`] — unit lattice lifetimes, exact polynomial iteration
//!   `F_j = f ∘ F_{j-1}` over `BigRational` coefficients;
//! * [`build_volterra`] — general continuous lifetimes, the renewal equation
//!   `F_t(s) = s μ((t,∞)) + ∫_0^t f(F_{t-u}(s)) μ(du)` discretized with
//!   trapezoidal weights on the lifetime density.

use num_rational::BigRational;

use crate::distributions::{LifetimeLaw, OffspringDistribution};
use crate::error::{Error, Result};
use crate::poly::{rational_from_f64, rational_to_f64, Polynomial};
use crate::scalar::Scalar;

/// Excursions beyond `[0, 1]` smaller than this are clamped; anything larger
/// aborts the build as an instability.
pub const CLAMP_TOL: f64 = 1e-9;

/// Default cap on the number of exact polynomial coefficients (`k_max^n`).
pub const DEFAULT_COEFF_BUDGET: u128 = 1_000_000;

/// Tabulated `F_t(s)` and `∂F_t/∂s` on a `(t, s)` grid.
///
/// Rows are times, columns are s-nodes. The s-grid is uniform except in the
/// last decile, which is refined fourfold because `F'_T` concentrates near
/// `s = 1` for long horizons.
#[derive(Debug, Clone)]
pub struct GenFunTable<F> {
    t_grid: Vec<F>,
    s_grid: Vec<F>,
    values: Vec<Vec<F>>,
    deriv: Vec<Vec<F>>,
}

impl<F: Scalar> GenFunTable<F> {
    pub fn t_grid(&self) -> &[F] {
        &self.t_grid
    }

    pub fn s_grid(&self) -> &[F] {
        &self.s_grid
    }

    pub fn values(&self) -> &[Vec<F>] {
        &self.values
    }

    pub fn deriv_values(&self) -> &[Vec<F>] {
        &self.deriv
    }

    pub fn horizon(&self) -> F {
        *self.t_grid.last().unwrap()
    }

    /// Bilinear interpolation of `F_t(s)`; exact at grid nodes.
    pub fn eval(&self, t: F, s: F) -> Result<F> {
        let (i, wt) = locate(&self.t_grid, t, "t")?;
        let (j, ws) = locate(&self.s_grid, s, "s")?;
        Ok(bilinear(&self.values, i, wt, j, ws))
    }

    /// Bilinear interpolation of `∂F_t/∂s`.
    pub fn eval_deriv(&self, t: F, s: F) -> Result<F> {
        let (i, wt) = locate(&self.t_grid, t, "t")?;
        let (j, ws) = locate(&self.s_grid, s, "s")?;
        Ok(bilinear(&self.deriv, i, wt, j, ws))
    }

    /// Extinction probability `q_t = F_t(0)`.
    pub fn extinction_prob(&self, t: F) -> Result<F> {
        self.eval(t, F::zero())
    }
}

/// Cell index and interpolation weight for `x` on a sorted grid. Values a
/// rounding error outside the grid are clamped; anything further out is a
/// domain error.
fn locate<F: Scalar>(grid: &[F], x: F, what: &str) -> Result<(usize, F)> {
    let lo = grid[0];
    let hi = *grid.last().unwrap();
    let slack = F::of(1e-9) * (F::one() + hi.abs());
    if x < lo - slack || x > hi + slack {
        return Err(Error::Domain(format!(
            "{what} = {x} outside table range [{lo}, {hi}]"
        )));
    }
    if x <= lo {
        return Ok((0, F::zero()));
    }
    if x >= hi {
        return Ok((grid.len() - 2, F::one()));
    }
    let idx = grid.partition_point(|&g| g <= x) - 1;
    let idx = idx.min(grid.len() - 2);
    let w = (x - grid[idx]) / (grid[idx + 1] - grid[idx]);
    Ok((idx, w))
}

fn bilinear<F: Scalar>(m: &[Vec<F>], i: usize, wt: F, j: usize, ws: F) -> F {
    let one = F::one();
    let a = m[i][j] * (one - ws) + m[i][j + 1] * ws;
    let b = m[i + 1][j] * (one - ws) + m[i + 1][j + 1] * ws;
    a * (one - wt) + b * wt
}

/// Uniform grid on `[0, 1]` with `s_points` base nodes and fourfold
/// refinement of the last decile. Endpoints are exactly 0 and 1.
pub fn refined_s_grid<F: Scalar>(s_points: usize) -> Vec<F> {
    let k = s_points - 1;
    let mut grid = Vec::with_capacity(s_points + 3 * (k / 10 + 1));
    for j in 0..k {
        let a = F::of_usize(j) / F::of_usize(k);
        let b = F::of_usize(j + 1) / F::of_usize(k);
        grid.push(a);
        if a >= F::of(0.9) - F::of(1e-12) {
            let q = F::of(0.25) * (b - a);
            grid.push(a + q);
            grid.push(a + q + q);
            grid.push(a + q + q + q);
        }
    }
    grid.push(F::one());
    grid
}

fn uniform_t_grid<F: Scalar>(horizon: F, steps: usize) -> Vec<F> {
    let h = horizon / F::of_usize(steps);
    let mut grid: Vec<F> = (0..steps).map(|i| F::of_usize(i) * h).collect();
    grid.push(horizon);
    grid
}

/// Clamp band: [`CLAMP_TOL`] for f64, widened to 100 ulp for coarser scalars.
fn clamp_band<F: Scalar>() -> F {
    F::of(CLAMP_TOL).max(F::epsilon() * F::of(100.0))
}

/// Clamp policy for a value that should lie in `[0, 1]`.
fn polish_unit<F: Scalar>(v: F, strict: bool, context: &str) -> Result<F> {
    let tol = clamp_band::<F>();
    if v >= F::zero() && v <= F::one() {
        return Ok(v);
    }
    if v >= -tol && v <= F::one() + tol {
        if strict {
            return Err(Error::Numerics(format!(
                "{context}: value {v} left [0, 1] under strict numerics"
            )));
        }
        return Ok(v.max(F::zero()).min(F::one()));
    }
    Err(Error::Numerics(format!(
        "{context}: value {v} left [0, 1] by more than {CLAMP_TOL:e}"
    )))
}

/// The s = 1 column must be exactly 1; drift beyond [`CLAMP_TOL`] aborts.
fn snap_unit_column<F: Scalar>(values: &mut [Vec<F>], context: &str) -> Result<()> {
    let last = values[0].len() - 1;
    let tol = clamp_band::<F>();
    for row in values.iter_mut() {
        let v = row[last];
        if (v - F::one()).abs() > tol {
            return Err(Error::Numerics(format!("{context}: F_t(1) drifted to {v}")));
        }
        row[last] = F::one();
    }
    Ok(())
}

/// Second-order finite-difference derivative of one table row on a possibly
/// non-uniform grid; three-point formulas inside and one-sided at the ends.
/// Negative estimates are floored at zero (`F` is nondecreasing in `s`).
pub(crate) fn derivative_row<F: Scalar>(grid: &[F], row: &[F]) -> Vec<F> {
    let n = grid.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let d = if j == 0 {
            let (h0, h1) = (grid[1] - grid[0], grid[2] - grid[1]);
            let f = (row[0], row[1], row[2]);
            -(h0 + h0 + h1) / (h0 * (h0 + h1)) * f.0 + (h0 + h1) / (h0 * h1) * f.1
                - h0 / (h1 * (h0 + h1)) * f.2
        } else if j == n - 1 {
            let (h0, h1) = (grid[n - 2] - grid[n - 3], grid[n - 1] - grid[n - 2]);
            let f = (row[n - 3], row[n - 2], row[n - 1]);
            h1 / (h0 * (h0 + h1)) * f.0 - (h0 + h1) / (h0 * h1) * f.1
                + (h1 + h1 + h0) / (h1 * (h0 + h1)) * f.2
        } else {
            let (hm, hp) = (grid[j] - grid[j - 1], grid[j + 1] - grid[j]);
            let cm = hp / (hm * (hm + hp));
            let cp = hm / (hp * (hm + hp));
            cm * (row[j] - row[j - 1]) + cp * (row[j + 1] - row[j])
        };
        out.push(d.max(F::zero()));
    }
    out
}

/// Backward-equation solver for exponential lifetimes (Markov case).
pub fn build_markov<F: Scalar>(
    d: &OffspringDistribution<F>,
    rate: F,
    horizon: F,
    steps: usize,
    s_points: usize,
    strict: bool,
) -> Result<GenFunTable<F>> {
    if rate <= F::zero() || horizon <= F::zero() {
        return Err(Error::Config("rate and horizon must be positive".into()));
    }
    if steps < 100 {
        return Err(Error::Config(format!(
            "steps = {steps} too coarse, need >= 100"
        )));
    }
    if s_points < 51 {
        return Err(Error::Config(format!(
            "s_points = {s_points} too coarse, need >= 51"
        )));
    }
    let s_grid = refined_s_grid::<F>(s_points);
    let t_grid = uniform_t_grid(horizon, steps);
    let h = horizon / F::of_usize(steps);
    let cols = s_grid.len();
    let mut values = vec![vec![F::zero(); cols]; steps + 1];
    let mut deriv = vec![vec![F::zero(); cols]; steps + 1];

    let half = F::of(0.5);
    let sixth = F::of(1.0 / 6.0);
    let two = F::of(2.0);
    for (j, &s0) in s_grid.iter().enumerate() {
        let mut y = s0;
        let mut g = F::one();
        values[0][j] = y;
        deriv[0][j] = g;
        for i in 1..=steps {
            let fy = |y: F| rate * (d.pgf_raw(y) - y);
            let fg = |y: F, g: F| rate * (d.pgf_derivative_raw(y) - F::one()) * g;
            let k1y = fy(y);
            let k1g = fg(y, g);
            let k2y = fy(y + half * h * k1y);
            let k2g = fg(y + half * h * k1y, g + half * h * k1g);
            let k3y = fy(y + half * h * k2y);
            let k3g = fg(y + half * h * k2y, g + half * h * k2g);
            let k4y = fy(y + h * k3y);
            let k4g = fg(y + h * k3y, g + h * k3g);
            y += h * sixth * (k1y + two * k2y + two * k3y + k4y);
            g += h * sixth * (k1g + two * k2g + two * k3g + k4g);
            values[i][j] = y;
            deriv[i][j] = g;
        }
    }

    finish_table(t_grid, s_grid, values, deriv, strict, "build_markov")
}

fn finish_table<F: Scalar>(
    t_grid: Vec<F>,
    s_grid: Vec<F>,
    mut values: Vec<Vec<F>>,
    mut deriv: Vec<Vec<F>>,
    strict: bool,
    context: &str,
) -> Result<GenFunTable<F>> {
    for row in values.iter_mut() {
        for v in row.iter_mut() {
            *v = polish_unit(*v, strict, context)?;
        }
    }
    snap_unit_column(&mut values, context)?;
    let tol = clamp_band::<F>();
    for row in deriv.iter_mut() {
        for v in row.iter_mut() {
            if *v < F::zero() {
                if *v < -tol {
                    return Err(Error::Numerics(format!(
                        "{context}: derivative {v} significantly negative"
                    )));
                }
                *v = F::zero();
            }
            if !v.is_finite() {
                return Err(Error::Numerics(format!("{context}: non-finite derivative")));
            }
        }
    }
    Ok(GenFunTable {
        t_grid,
        s_grid,
        values,
        deriv,
    })
}

/// Exact generating functions for the unit-lattice lifetime (`μ = δ_1`):
/// `F_j = f ∘ F_{j-1}` as polynomials with `BigRational` coefficients.
#[derive(Debug, Clone)]
pub struct DiscreteGenFun {
    polys: Vec<Polynomial<BigRational>>,
    probs: Vec<BigRational>,
}

impl DiscreteGenFun {
    /// Horizon `n`, i.e. the number of unit-time generations tabulated.
    pub fn horizon(&self) -> usize {
        self.polys.len() - 1
    }

    /// `F_j` as an exact polynomial.
    pub fn poly(&self, j: usize) -> &Polynomial<BigRational> {
        &self.polys[j]
    }

    /// Offspring probabilities as exact rationals (converted from their
    /// binary floating-point representation, so bit-faithful to the input).
    pub fn offspring(&self) -> &[BigRational] {
        &self.probs
    }

    /// Exact extinction probability `q_j = F_j(0)`.
    pub fn extinction(&self, j: usize) -> BigRational {
        self.polys[j].constant_term()
    }

    /// Evaluate the exact polynomials onto a float grid table with
    /// `t_grid = {0, 1, ..., n}`.
    pub fn to_table<F: Scalar>(&self, s_points: usize) -> Result<GenFunTable<F>> {
        if s_points < 51 {
            return Err(Error::Config(format!(
                "s_points = {s_points} too coarse, need >= 51"
            )));
        }
        let s_grid = refined_s_grid::<F>(s_points);
        let t_grid: Vec<F> = (0..=self.horizon()).map(F::of_usize).collect();
        let float_polys: Vec<Polynomial<f64>> = self
            .polys
            .iter()
            .map(|p| Polynomial::new(p.coeffs().iter().map(rational_to_f64).collect()))
            .collect();
        let mut values = Vec::with_capacity(self.polys.len());
        let mut deriv = Vec::with_capacity(self.polys.len());
        for p in &float_polys {
            let dp = p.derivative();
            values.push(
                s_grid
                    .iter()
                    .map(|&s| F::of(p.eval(&s.as_f64())))
                    .collect::<Vec<F>>(),
            );
            deriv.push(
                s_grid
                    .iter()
                    .map(|&s| F::of(dp.eval(&s.as_f64())))
                    .collect::<Vec<F>>(),
            );
        }
        finish_table(t_grid, s_grid, values, deriv, false, "discrete table")
    }
}

/// Iterates the offspring pgf `n` times exactly. Fails if the final degree
/// `k_max^n` would exceed [`DEFAULT_COEFF_BUDGET`].
pub fn build_discrete<F: Scalar>(d: &OffspringDistribution<F>, n: usize) -> Result<DiscreteGenFun> {
    build_discrete_with_budget(d, n, DEFAULT_COEFF_BUDGET)
}

pub fn build_discrete_with_budget<F: Scalar>(
    d: &OffspringDistribution<F>,
    n: usize,
    budget: u128,
) -> Result<DiscreteGenFun> {
    if n < 1 {
        return Err(Error::Config("discrete horizon must be >= 1".into()));
    }
    let needed = (d.k_max() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let probs: Vec<BigRational> = d
        .probs()
        .iter()
        .map(|&p| rational_from_f64(p.as_f64()))
        .collect();
    let f = Polynomial::new(probs.clone());
    let mut polys = vec![Polynomial::identity()];
    for j in 1..=n {
        let next = f.compose(&polys[j - 1]);
        polys.push(next);
    }
    Ok(DiscreteGenFun { polys, probs })
}

/// Bellman-Harris renewal-equation solver for continuous lifetime laws.
///
/// Trapezoidal weights on the lifetime density are renormalized so they sum
/// to the exact interval mass `μ([0, t_i])`; this keeps `F_t(1) = 1` exact
/// and removes the leading quadrature error on the probability mass. The
/// diagonal (implicit) term is resolved by Picard iteration to `1e-12`.
pub fn build_volterra<F: Scalar>(
    d: &OffspringDistribution<F>,
    law: &LifetimeLaw<F>,
    horizon: F,
    steps: usize,
    s_points: usize,
    strict: bool,
) -> Result<GenFunTable<F>> {
    if !law.is_continuous() {
        return Err(Error::Config(
            "Volterra solver needs a continuous lifetime law; use build_discrete for the lattice"
                .into(),
        ));
    }
    if let LifetimeLaw::Gamma { shape, .. } = law {
        if *shape < F::one() {
            return Err(Error::Config(
                "gamma shape < 1 has an unbounded density at 0; the trapezoidal Volterra solver needs shape >= 1".into(),
            ));
        }
    }
    if horizon <= F::zero() {
        return Err(Error::Config("horizon must be positive".into()));
    }
    if steps < 200 {
        return Err(Error::Config(format!(
            "steps = {steps} too coarse, need >= 200"
        )));
    }
    if s_points < 51 {
        return Err(Error::Config(format!(
            "s_points = {s_points} too coarse, need >= 51"
        )));
    }

    let s_grid = refined_s_grid::<F>(s_points);
    let t_grid = uniform_t_grid(horizon, steps);
    let h = horizon / F::of_usize(steps);
    let half = F::of(0.5);

    let dens: Vec<F> = t_grid
        .iter()
        .map(|&u| law.density(u))
        .collect::<Result<_>>()?;
    if dens.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerics(
            "lifetime density not finite on the grid".into(),
        ));
    }
    let tails: Vec<F> = t_grid.iter().map(|&u| law.tail(u)).collect();

    // Trapezoidal weights for ∫_0^{t_i}, rescaled to the exact mass 1 - tail_i.
    // weight_scale[i] multiplies every density node in row i.
    let mut raw_mass = vec![F::zero(); steps + 1];
    for i in 1..=steps {
        let mut m = half * (dens[0] + dens[i]);
        for g in dens.iter().take(i).skip(1) {
            m += *g;
        }
        raw_mass[i] = m * h;
    }
    let scale: Vec<F> = (0..=steps)
        .map(|i| {
            let exact = F::one() - tails[i];
            if i == 0 || raw_mass[i] <= F::zero() {
                F::one()
            } else {
                exact / raw_mass[i]
            }
        })
        .collect();

    let cols = s_grid.len();
    let mut values = vec![vec![F::zero(); cols]; steps + 1];
    let max_picard = 50;
    let picard_tol = F::of(1e-12);

    for (j, &s) in s_grid.iter().enumerate() {
        values[0][j] = s;
        // cache f(F_i(s)) per solved row
        let mut fvals = Vec::with_capacity(steps + 1);
        fvals.push(d.pgf_raw(s));
        for i in 1..=steps {
            // known part: nodes k = 1..=i use rows i-k < i; node k = 0 is implicit
            let mut known = half * dens[i] * fvals[0];
            for k in 1..i {
                known += dens[k] * fvals[i - k];
            }
            known *= h;
            let base = s * tails[i];
            let diag = half * h * dens[0];
            let mut cur = values[i - 1][j];
            let mut converged = false;
            for _ in 0..max_picard {
                let next = base + scale[i] * (known + diag * d.pgf_raw(cur));
                if (next - cur).abs() <= picard_tol {
                    cur = next;
                    converged = true;
                    break;
                }
                cur = next;
            }
            if !converged {
                return Err(Error::Numerics(format!(
                    "Picard iteration failed to contract at t = {}",
                    t_grid[i]
                )));
            }
            values[i][j] = cur;
            fvals.push(d.pgf_raw(cur));
        }
    }

    let deriv: Vec<Vec<F>> = values
        .iter()
        .map(|row| derivative_row(&s_grid, row))
        .collect();
    finish_table(t_grid, s_grid, values, deriv, strict, "build_volterra")
}
