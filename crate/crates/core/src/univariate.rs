//! Closed-form univariate iteration maps and basin-radius estimation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jets::FunctionOracle;
use crate::poly::MultiIndex;

/// Below this `|f'''|` the third-order step is taken to be the classical one.
pub const F3_DEGENERATE: f64 = 1e-12;

/// First three derivatives of a univariate function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarDerivs {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl ScalarDerivs {
    pub fn new(f1: f64, f2: f64, f3: f64) -> Result<Self> {
        if !(f1.is_finite() && f2.is_finite() && f3.is_finite()) {
            return Err(Error::Domain(format!("non-finite derivatives ({f1}, {f2}, {f3})")));
        }
        Ok(ScalarDerivs { f1, f2, f3 })
    }

    /// Derivatives of a one-dimensional oracle at `x`.
    pub fn of(f: &FunctionOracle, x: f64) -> Result<Self> {
        if f.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: f.dim(),
            });
        }
        let jet = f.jet(&[x], 3)?;
        // jet coefficients are Taylor coefficients f^(k)/k!
        let c = |k: u32| jet.coeff(&MultiIndex::new(vec![k]));
        ScalarDerivs::new(c(1), 2.0 * c(2), 6.0 * c(3))
    }
}

/// Classical step `x - f'/f''`.
pub fn n2_map(d: &ScalarDerivs, x_k: f64) -> Result<f64> {
    if d.f2 == 0.0 {
        return Err(Error::Singular(format!("f'' = 0 at {x_k}")));
    }
    Ok(x_k - d.f1 / d.f2)
}

/// Third-order step: the unique real minimizer of the cubic Taylor
/// polynomial plus `f'''^2/(48 f'') (x - x_k)^4`.
pub fn n3_map(d: &ScalarDerivs, x_k: f64) -> Result<f64> {
    if !(d.f2 > 0.0) {
        return Err(Error::Precondition(format!("third-order map needs f'' > 0, got {}", d.f2)));
    }
    if d.f3.abs() <= F3_DEGENERATE {
        return n2_map(d, x_k);
    }
    let radicand = (d.f1 - (2.0 / 3.0) * d.f2 * d.f2 / d.f3) / (d.f3 * d.f3 / (12.0 * d.f2));
    Ok(x_k - 2.0 * d.f2 / d.f3 - radicand.cbrt())
}

/// Convenience wrappers evaluating the maps on an oracle.
pub fn n2_step(f: &FunctionOracle, x: f64) -> Result<f64> {
    n2_map(&ScalarDerivs::of(f, x)?, x)
}

pub fn n3_step(f: &FunctionOracle, x: f64) -> Result<f64> {
    n3_map(&ScalarDerivs::of(f, x)?, x)
}

/// Whether iterating `map` from `x0` enters the `tol`-ball around `xstar`
/// within `iters` steps. A failed step or `|x| > 1e8` counts as not
/// converging.
pub fn converges_from<F>(map: &F, x0: f64, xstar: f64, iters: usize, tol: f64) -> bool
where
    F: Fn(f64) -> Option<f64>,
{
    let mut x = x0;
    for _ in 0..=iters {
        if (x - xstar).abs() <= tol {
            return true;
        }
        if !x.is_finite() || x.abs() > 1e8 {
            return false;
        }
        match map(x) {
            Some(n) => x = n,
            None => return false,
        }
    }
    false
}

pub const BISECTION_STEPS: usize = 50;

/// Bisects the convergence predicate between `lo` (converges) and `hi`
/// (does not) and returns the midpoint of the final bracket.
pub fn basin_radius<F>(map: &F, xstar: f64, lo: f64, hi: f64, iters: usize, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Option<f64>,
{
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty bracket ({lo}, {hi})")));
    }
    let conv = |x: f64| converges_from(map, x, xstar, iters, tol);
    if !conv(lo) || conv(hi) {
        return Err(Error::InvalidArgument(format!(
            "predicate not bracketed on ({lo}, {hi}): converges(lo) = {}, converges(hi) = {}",
            conv(lo),
            conv(hi)
        )));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..BISECTION_STEPS {
        let m = 0.5 * (a + b);
        if conv(m) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// `β = sqrt((11 + 142/c + c)/3)` with `c` the principal cube root of
/// `1691 + 9i sqrt(47)`. The imaginary part is roundoff.
pub fn beta_closed_form() -> Complex64 {
    let c = Complex64::new(1691.0, 9.0 * 47f64.sqrt()).cbrt();
    ((Complex64::new(11.0, 0.0) + Complex64::new(142.0, 0.0) / c + c) / 3.0).sqrt()
}
