//! Truncated multivariate Taylor arithmetic and the objective oracles built on
//! it.
//!
//! A [`Jet`] holds the Taylor coefficients of a function about a fixed point,
//! truncated at a fixed total order. The coefficient of the multi-index `a` is
//! `D^a f(x̄) / a!`, so the coefficient vector read as a polynomial in the
//! displacement `h = x - x̄` is exactly the centered Taylor polynomial.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{factorial, monomial_basis, MultiIndex, Polynomial};

/// Monomial layout and product table shared by all jets of one `(dim, order)`.
#[derive(Debug)]
pub struct JetSpace {
    dim: usize,
    order: u32,
    basis: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
    // (i, j, k): basis[i] * basis[j] = basis[k]
    products: Vec<(usize, usize, usize)>,
}

impl JetSpace {
    pub fn new(dim: usize, order: u32) -> Arc<Self> {
        let basis = monomial_basis(dim, order);
        let index: HashMap<_, _> = basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut products = Vec::new();
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                if a.degree() + b.degree() <= order {
                    products.push((i, j, index[&a.plus(b)]));
                }
            }
        }
        Arc::new(JetSpace {
            dim,
            order,
            basis,
            index,
            products,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.index.get(index).copied()
    }
}

/// Truncated Taylor series in `dim` variables up to total degree `order`.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.space.dim)
            .field("order", &self.space.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, c: f64) -> Jet {
        let mut coeffs = vec![0.0; space.basis.len()];
        coeffs[0] = c;
        Jet {
            space: Arc::clone(space),
            coeffs,
        }
    }

    /// The coordinate function `x_i` expanded about a point whose `i`-th
    /// coordinate is `value`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, value: f64) -> Jet {
        let mut j = Jet::constant(space, value);
        if space.order >= 1 {
            let k = space.index[&MultiIndex::unit(space.dim, i)];
            j.coeffs[k] = 1.0;
        }
        j
    }

    /// All coordinate jets for an expansion point.
    pub fn variables(space: &Arc<JetSpace>, point: &[f64]) -> Vec<Jet> {
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(space, i, v))
            .collect()
    }

    pub fn from_polynomial(space: &Arc<JetSpace>, centered: &Polynomial) -> Result<Jet> {
        if centered.dim() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: centered.dim(),
            });
        }
        let mut j = Jet::constant(space, 0.0);
        for (idx, c) in centered.terms() {
            if let Some(k) = space.position(idx) {
                j.coeffs[k] = c;
            }
        }
        Ok(j)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> u32 {
        self.space.order
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, index: &MultiIndex) -> f64 {
        self.space.position(index).map_or(0.0, |k| self.coeffs[k])
    }

    /// Gradient at the expansion point (needs order >= 1).
    pub fn gradient(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| self.coeff(&MultiIndex::unit(n, i)))
    }

    /// Hessian at the expansion point (needs order >= 2).
    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let idx = MultiIndex::unit(n, i).plus(&MultiIndex::unit(n, j));
                let v = if i == j { 2.0 } else { 1.0 } * self.coeff(&idx);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    /// The Taylor polynomial in the displacement `h = x - x̄`.
    pub fn to_centered_polynomial(&self) -> Polynomial {
        Polynomial::from_terms(
            self.dim(),
            self.space
                .basis
                .iter()
                .cloned()
                .zip(self.coeffs.iter().copied()),
        )
        .expect("basis indices share the jet dimension")
    }

    /// Re-truncates to a lower order.
    pub fn truncate(&self, order: u32) -> Jet {
        let space = JetSpace::new(self.dim(), order.min(self.order()));
        let coeffs = space.basis.iter().map(|m| self.coeff(m)).collect();
        Jet { space, coeffs }
    }

    fn check(&self, other: &Jet) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if self.order() != other.order() {
            return Err(Error::InvalidArgument(format!(
                "jet orders differ: {} vs {}",
                self.order(),
                other.order()
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Result<Jet> {
        self.check(other)?;
        Ok(Jet {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            coeffs[k] += self.coeffs[i] * other.coeffs[j];
        }
        Ok(Jet {
            space: Arc::clone(&self.space),
            coeffs,
        })
    }

    pub fn powi(&self, k: u32) -> Jet {
        let mut acc = Jet::constant(&self.space, 1.0);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).expect("same space");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).expect("same space");
            }
        }
        acc
    }

    /// `g(self)` where `series[k]` is the `k`-th Taylor coefficient of the
    /// outer function `g` about `self.value()`.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut nil = self.clone();
        nil.coeffs[0] = 0.0;
        let d = self.order() as usize;
        let mut acc = Jet::constant(&self.space, series[d]);
        for k in (0..d).rev() {
            acc = acc.mul(&nil).expect("same space").add_scalar(series[k]);
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a == 0.0 {
            return Err(Error::Domain("reciprocal of a jet with zero constant term".into()));
        }
        let d = self.order() as usize;
        let series: Vec<f64> = (0..=d)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / a.powi(k as i32 + 1))
            .collect();
        Ok(self.compose(&series))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        self.mul(&other.recip()?)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(Error::Domain(format!("sqrt of jet with constant term {a}")));
        }
        let d = self.order() as usize;
        let mut series = Vec::with_capacity(d + 1);
        let mut binom = 1.0;
        for k in 0..=d {
            series.push(binom * a.powf(0.5 - k as f64));
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&series))
    }

    pub fn ln(&self) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(Error::Domain(format!("log of jet with constant term {a}")));
        }
        let d = self.order() as usize;
        let mut series = vec![a.ln()];
        for k in 1..=d {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * a.powi(k as i32)));
        }
        Ok(self.compose(&series))
    }

    pub fn atan(&self) -> Jet {
        let a = self.value();
        let d = self.order() as usize;
        // 1 / (1 + (a+h)^2) = 1 / (q0 + q1 h + h^2), expanded by recurrence
        let q0 = 1.0 + a * a;
        let q1 = 2.0 * a;
        let mut r = vec![0.0; d.max(1)];
        r[0] = 1.0 / q0;
        for k in 1..r.len() {
            let prev2 = if k >= 2 { r[k - 2] } else { 0.0 };
            r[k] = -(q1 * r[k - 1] + prev2) / q0;
        }
        let mut series = vec![a.atan()];
        for k in 1..=d {
            series.push(r[k - 1] / k as f64);
        }
        self.compose(&series)
    }
}

/// How an objective produces jets.
#[derive(Clone)]
pub enum Evaluator {
    /// `sqrt(x^2 + 1) - 1`
    Sqrt1,
    /// `2 x atan(x) - log(1 + x^2) + x^2 / 10`
    Atan1,
    /// A polynomial objective; jets come from exact translation.
    Polynomial(Polynomial),
    /// Arbitrary composition of jet primitives applied to the coordinate jets.
    Custom(Arc<dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync>),
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evaluator::Sqrt1 => write!(f, "Sqrt1"),
            Evaluator::Atan1 => write!(f, "Atan1"),
            Evaluator::Polynomial(p) => write!(f, "Polynomial({p})"),
            Evaluator::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A smooth objective that can be expanded to any order at any point.
#[derive(Clone, Debug)]
pub struct FunctionOracle {
    name: String,
    dim: usize,
    evaluator: Evaluator,
    lipschitz: Option<f64>,
    minimizer: Option<Vec<f64>>,
}

/// Names of the built-in objectives.
pub const BUILTIN_NAMES: [&str; 3] = ["sqrt1", "atan1", "beale"];

impl FunctionOracle {
    pub fn sqrt1() -> Self {
        FunctionOracle {
            name: "sqrt1".into(),
            dim: 1,
            evaluator: Evaluator::Sqrt1,
            lipschitz: None,
            minimizer: Some(vec![0.0]),
        }
    }

    pub fn atan1() -> Self {
        FunctionOracle {
            name: "atan1".into(),
            dim: 1,
            evaluator: Evaluator::Atan1,
            lipschitz: None,
            minimizer: Some(vec![0.0]),
        }
    }

    pub fn beale() -> Self {
        let mut oracle = FunctionOracle::polynomial("beale", beale_polynomial());
        oracle.minimizer = Some(vec![3.0, 0.5]);
        oracle
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "sqrt1" => Some(Self::sqrt1()),
            "atan1" => Some(Self::atan1()),
            "beale" => Some(Self::beale()),
            _ => None,
        }
    }

    pub fn polynomial(name: &str, p: Polynomial) -> Self {
        FunctionOracle {
            name: name.into(),
            dim: p.dim(),
            evaluator: Evaluator::Polynomial(p),
            lipschitz: None,
            minimizer: None,
        }
    }

    pub fn custom<F>(name: &str, dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static,
    {
        FunctionOracle {
            name: name.into(),
            dim,
            evaluator: Evaluator::Custom(Arc::new(f)),
            lipschitz: None,
            minimizer: None,
        }
    }

    /// Sets the Lipschitz bound `M` on the highest derivative used by a run.
    pub fn with_lipschitz(mut self, m: f64) -> Self {
        self.lipschitz = Some(m);
        self
    }

    pub fn with_minimizer(mut self, x: Vec<f64>) -> Self {
        self.minimizer = Some(x);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Taylor jet of the objective about `x` truncated at `order`.
    pub fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        self.check_point(x)?;
        let space = JetSpace::new(self.dim, order);
        match &self.evaluator {
            Evaluator::Sqrt1 => {
                let v = Jet::variable(&space, 0, x[0]);
                Ok(v.mul(&v)?.add_scalar(1.0).sqrt()?.add_scalar(-1.0))
            }
            Evaluator::Atan1 => {
                let v = Jet::variable(&space, 0, x[0]);
                let sq = v.mul(&v)?;
                let a = v.mul(&v.atan())?.scale(2.0);
                let b = sq.add_scalar(1.0).ln()?;
                a.sub(&b)?.add(&sq.scale(0.1))
            }
            Evaluator::Polynomial(p) => Jet::from_polynomial(&space, &p.translate(x)?),
            Evaluator::Custom(f) => {
                let vars = Jet::variables(&space, x);
                let out = f(&vars)?;
                if out.order() != order || out.dim() != self.dim {
                    return Err(Error::InvalidArgument(
                        "custom evaluator returned a jet of the wrong shape".into(),
                    ));
                }
                Ok(out)
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x, 0)?.value())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.jet(x, 1)?.gradient())
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.jet(x, 2)?.hessian())
    }

    /// Order-`d` Taylor polynomial in the displacement `h = x - xbar`.
    pub fn taylor_centered(&self, xbar: &[f64], d: u32) -> Result<Polynomial> {
        Ok(self.jet(xbar, d)?.to_centered_polynomial())
    }

    /// Order-`d` Taylor polynomial in the original coordinates.
    pub fn taylor_expand(&self, xbar: &[f64], d: u32) -> Result<Polynomial> {
        if d < 1 {
            return Err(Error::InvalidArgument("Taylor order must be at least 1".into()));
        }
        let neg: Vec<f64> = xbar.iter().map(|v| -v).collect();
        self.taylor_centered(xbar, d)?.translate(&neg)
    }
}

/// `(1.5 - x1 + x1 x2)^2 + (2.25 - x1 + x1 x2^2)^2 + (2.625 - x1 + x1 x2^3)^2`
pub fn beale_polynomial() -> Polynomial {
    let x1 = Polynomial::var(2, 0);
    let x2 = Polynomial::var(2, 1);
    let mut f = Polynomial::zero(2);
    for (k, c) in [(1u32, 1.5), (2, 2.25), (3, 2.625)] {
        let r = Polynomial::constant(2, c)
            .sub(&x1)
            .and_then(|r| r.add(&x1.mul(&x2.powi(k))?))
            .expect("dimension 2");
        f = f.add(&r.mul(&r).expect("dimension 2")).expect("dimension 2");
    }
    f
}

/// Smallest eigenvalue of the Hessian at `x`, by cyclic Jacobi.
pub fn min_eig_hessian(f: &FunctionOracle, x: &[f64]) -> Result<f64> {
    Ok(linalg::min_eigenvalue(&f.hessian(x)?))
}

/// `max |f^(k)|` over a uniform grid of `points` samples on `[lo, hi]` for a
/// univariate objective.
pub fn univariate_derivative_bound(
    f: &FunctionOracle,
    k: u32,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<f64> {
    if f.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: f.dim(),
        });
    }
    let mut best: f64 = 0.0;
    let kf = factorial(k);
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64;
        let j = f.jet(&[x], k)?;
        best = best.max((j.coeff(&MultiIndex::new(vec![k])) * kf).abs());
    }
    Ok(best)
}

/// Outcome of checking the Taylor remainder bounds at a set of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderReport {
    /// Smallest `(L/d!) |x - x̄|^d - |∇R(x)|` over the samples.
    pub grad_slack: f64,
    /// Smallest `(L/(d-1)!) |x - x̄|^(d-1) - |∇²R(x)|` over the samples.
    pub hess_slack: f64,
    pub holds: bool,
}

/// Checks the gradient and Hessian remainder bounds of the order-`d` Taylor
/// expansion about `xbar` against a Lipschitz constant `lipschitz` of the
/// `d`-th derivative.
pub fn remainder_check(
    f: &FunctionOracle,
    xbar: &[f64],
    d: u32,
    samples: &[Vec<f64>],
    lipschitz: f64,
) -> Result<RemainderReport> {
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz bound must be finite and nonnegative, got {lipschitz}"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidArgument("remainder check needs d >= 2".into()));
    }
    let taylor = f.taylor_expand(xbar, d)?;
    let mut grad_slack = f64::INFINITY;
    let mut hess_slack = f64::INFINITY;
    for x in samples {
        let dist = x
            .iter()
            .zip(xbar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let jet = f.jet(x, 2)?;
        let grad_r = (jet.gradient() - taylor.eval_grad(x)).norm();
        let hess_r = linalg::sym_operator_norm(&(jet.hessian() - taylor.eval_hess(x)));
        let gb = lipschitz / factorial(d) * dist.powi(d as i32);
        let hb = lipschitz / factorial(d - 1) * dist.powi(d as i32 - 1);
        // roundoff allowance relative to the magnitudes being compared
        let g_tol = 1e-12 * (1.0 + jet.gradient().norm());
        let h_tol = 1e-12 * (1.0 + jet.hessian().norm());
        grad_slack = grad_slack.min(gb - grad_r + g_tol);
        hess_slack = hess_slack.min(hb - hess_r + h_tol);
    }
    Ok(RemainderReport {
        grad_slack,
        hess_slack,
        holds: grad_slack >= 0.0 && hess_slack >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_jet(order: u32) -> Jet {
        let space = JetSpace::new(1, order);
        Jet::variable(&space, 0, 0.0)
    }

    #[test]
    fn sqrt_series() {
        let x = x_jet(4);
        let s = x.mul(&x).unwrap().add_scalar(1.0).sqrt().unwrap();
        let expect = [1.0, 0.0, 0.5, 0.0, -0.125];
        for (a, b) in s.coeffs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn product_truncates() {
        let x = x_jet(3);
        let sq = x.mul(&x).unwrap();
        assert_eq!(sq.coeffs(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn atan_series() {
        let a = x_jet(5).atan();
        let expect = [0.0, 1.0, 0.0, -1.0 / 3.0, 0.0, 0.2];
        for (x, y) in a.coeffs().iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn atan_away_from_zero_matches_closed_form() {
        // d/dx atan = 1/(1+x^2), d2 = -2x/(1+x^2)^2
        let space = JetSpace::new(1, 3);
        let a = Jet::variable(&space, 0, 0.7).atan();
        let q = 1.0 + 0.49;
        assert!((a.coeffs()[1] - 1.0 / q).abs() < 1e-15);
        assert!((a.coeffs()[2] - (-1.4 / (q * q)) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn log_and_division() {
        let space = JetSpace::new(1, 4);
        let x = Jet::variable(&space, 0, 2.0);
        let l = x.ln().unwrap();
        assert!((l.coeffs()[1] - 0.5).abs() < 1e-15);
        assert!((l.coeffs()[2] + 0.125).abs() < 1e-15);
        let one = x.div(&x).unwrap();
        assert!((one.value() - 1.0).abs() < 1e-15);
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn domain_errors() {
        let x = x_jet(3);
        assert!(matches!(x.sqrt(), Err(Error::Domain(_))));
        assert!(matches!(x.add_scalar(-1.0).ln(), Err(Error::Domain(_))));
        assert!(matches!(x.recip(), Err(Error::Domain(_))));
        let other = JetSpace::new(1, 2);
        assert!(x.add(&Jet::constant(&other, 1.0)).is_err());
    }

    #[test]
    fn taylor_of_sqrt1() {
        let f = FunctionOracle::sqrt1();
        let t = f.taylor_expand(&[0.0], 3).unwrap();
        assert_eq!(t.num_terms(), 1);
        assert!((t.coeff(&MultiIndex::new(vec![2])) - 0.5).abs() < 1e-15);

        let c = f.taylor_centered(&[1.5], 3).unwrap();
        let q: f64 = 1.0 + 2.25;
        let d1 = 1.5 / q.sqrt();
        let d2 = q.powf(-1.5);
        let d3 = -3.0 * 1.5 * q.powf(-2.5);
        assert!((d1 - 0.83205).abs() < 1e-5);
        assert!((d2 - 0.17067).abs() < 1e-5);
        assert!((d3 + 0.23630).abs() < 5e-5);
        assert!((c.coeff(&MultiIndex::new(vec![1])) - d1).abs() < 1e-14);
        assert!((c.coeff(&MultiIndex::new(vec![2])) - d2 / 2.0).abs() < 1e-14);
        assert!((c.coeff(&MultiIndex::new(vec![3])) - d3 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn beale_full_order_taylor_is_beale() {
        let f = FunctionOracle::beale();
        let p = beale_polynomial();
        assert_eq!(p.degree(), 8);
        let t = f.taylor_expand(&[0.7, -1.3], 8).unwrap();
        for (idx, c) in p.terms() {
            assert!((t.coeff(idx) - c).abs() < 1e-10 * c.abs().max(1.0), "{idx:?}");
        }
        assert!(f.value(&[3.0, 0.5]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn min_eig_examples() {
        let q = Polynomial::from_terms(2, [(MultiIndex::new(vec![2, 0]), 1.0), (MultiIndex::new(vec![0, 2]), 1.0)]).unwrap();
        let f = FunctionOracle::polynomial("q", q);
        assert!((min_eig_hessian(&f, &[0.3, -2.0]).unwrap() - 2.0).abs() < 1e-14);

        // Beale Hessian at the minimizer from the closed-form 2x2 eigenvalue formula
        let b = FunctionOracle::beale();
        let h = b.hessian(&[3.0, 0.5]).unwrap();
        let (a, c, off) = (h[(0, 0)], h[(1, 1)], h[(0, 1)]);
        let brute = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + off * off).sqrt();
        assert!(brute > 0.0);
        assert!((min_eig_hessian(&b, &[3.0, 0.5]).unwrap() - brute).abs() < 1e-10 * brute.max(1.0));
    }

    #[test]
    fn remainder_of_polynomial_is_zero() {
        let p = Polynomial::from_terms(1, [(MultiIndex::new(vec![3]), 1.0), (MultiIndex::new(vec![1]), -2.0)]).unwrap();
        let f = FunctionOracle::polynomial("cubic", p);
        let samples: Vec<Vec<f64>> = (0..11).map(|i| vec![-1.0 + 0.2 * i as f64]).collect();
        let r = remainder_check(&f, &[0.3], 3, &samples, 0.0).unwrap();
        assert!(r.holds);
        assert!(remainder_check(&f, &[0.3], 3, &samples, -1.0).is_err());
        assert!(remainder_check(&f, &[0.3], 3, &samples, f64::NAN).is_err());
    }
}
