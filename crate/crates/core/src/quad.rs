//! Composite Simpson quadrature.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Composite Simpson rule on `[a, b]` with `panels` subintervals (must be
/// even and >= 2). The integrand may fail, e.g. on a table domain error.
pub fn simpson<F: Scalar>(
    a: F,
    b: F,
    panels: usize,
    mut f: impl FnMut(F) -> Result<F>,
) -> Result<F> {
    if panels < 2 || !panels.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "Simpson needs an even panel count >= 2, got {panels}"
        )));
    }
    let h = (b - a) / F::of_usize(panels);
    let mut sum = f(a)? + f(b)?;
    let four = F::of(4.0);
    let two = F::of(2.0);
    for i in 1..panels {
        let x = a + F::of_usize(i) * h;
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::Numerics(format!("integrand not finite at {x}")));
        }
        sum += if i % 2 == 1 { four * v } else { two * v };
    }
    Ok(sum * h / F::of(3.0))
}
