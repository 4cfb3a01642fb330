//! Multivariate polynomials with `f64` coefficients over graded-lex ordered
//! monomials.
//!
//! A [`Polynomial`] stores only nonzero coefficients. Every operation that can
//! cancel terms renormalizes by dropping coefficients that are exactly `0.0`;
//! nothing is pruned by magnitude.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a monomial `x_1^{a_1} ... x_n^{a_n}`.
///
/// Ordered graded-lexicographically: first by total degree, then
/// lexicographically on the exponents.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The index of the single variable `x_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `prod_i a_i!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// Value of the monomial at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc.round()
}

/// All monomials in `n` variables of total degree at most `k`, graded-lex
/// ascending. Index 0 is the constant monomial.
pub fn monomial_basis(n: usize, k: u32) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<u32>, n: usize, budget: u32, out: &mut Vec<MultiIndex>) {
        if prefix.len() == n {
            out.push(MultiIndex(prefix.clone()));
            return;
        }
        for a in 0..=budget {
            prefix.push(a);
            fill(prefix, n, budget - a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(&mut Vec::with_capacity(n), n, k, &mut out);
    out.sort();
    out
}

/// Multivariate polynomial with `f64` coefficients.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialJson", into = "PolynomialJson")]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(MultiIndex::zeros(dim), c)
    }

    /// The coordinate polynomial `x_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        Self::monomial(MultiIndex::unit(dim, i), 1.0)
    }

    pub fn monomial(index: MultiIndex, coef: f64) -> Self {
        let mut p = Polynomial::zero(index.dim());
        if coef != 0.0 {
            p.terms.insert(index, coef);
        }
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, summing
    /// repeated monomials.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = Polynomial::zero(dim);
        for (idx, c) in terms {
            if idx.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: idx.dim(),
                });
            }
            *p.terms.entry(idx).or_insert(0.0) += c;
        }
        p.normalize();
        Ok(p)
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn coeff(&self, index: &MultiIndex) -> f64 {
        self.terms.get(index).copied().unwrap_or(0.0)
    }

    /// Nonzero terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Largest coefficient magnitude (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_dim(&self, other: &Polynomial) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (k, &v) in &other.terms {
            *out.terms.entry(k.clone()).or_insert(0.0) += v;
        }
        out.normalize();
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (k, &v) in &other.terms {
            *out.terms.entry(k.clone()).or_insert(0.0) -= v;
        }
        out.normalize();
        Ok(out)
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = Polynomial::zero(self.dim);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                *out.terms.entry(a.plus(b)).or_insert(0.0) += ca * cb;
            }
        }
        out.normalize();
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial {
            dim: self.dim,
            terms: self.terms.iter().map(|(k, &v)| (k.clone(), v * s)).collect(),
        };
        out.normalize();
        out
    }

    pub fn powi(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.dim, 1.0);
        for _ in 0..k {
            acc = acc.mul(self).expect("same dimension");
        }
        acc
    }

    /// Drops every term of total degree above `max_degree`.
    pub fn truncate(&self, max_degree: u32) -> Polynomial {
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.degree() <= max_degree)
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
        }
    }

    /// Partial derivative with respect to `x_var`.
    pub fn differentiate(&self, var: usize) -> Result<Polynomial> {
        if var >= self.dim {
            return Err(Error::InvalidArgument(format!(
                "variable {var} out of range for dimension {}",
                self.dim
            )));
        }
        let mut out = Polynomial::zero(self.dim);
        for (k, &c) in &self.terms {
            let a = k.get(var);
            if a == 0 {
                continue;
            }
            let mut e = k.0.clone();
            e[var] -= 1;
            *out.terms.entry(MultiIndex(e)).or_insert(0.0) += c * f64::from(a);
        }
        out.normalize();
        Ok(out)
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.dim)
            .map(|i| self.differentiate(i).expect("index in range"))
            .collect()
    }

    pub fn hessian(&self) -> PolyMatrix {
        let n = self.dim;
        let grad = self.gradient();
        let mut entries = vec![Polynomial::zero(n); n * n];
        for i in 0..n {
            for j in i..n {
                let h = grad[i].differentiate(j).expect("index in range");
                entries[j * n + i] = h.clone();
                entries[i * n + j] = h;
            }
        }
        PolyMatrix {
            rows: n,
            cols: n,
            entries,
        }
    }

    /// Returns `q` with `q(x) = p(x + a)`.
    pub fn translate(&self, a: &[f64]) -> Result<Polynomial> {
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: a.len(),
            });
        }
        let mut out = Polynomial::zero(self.dim);
        // (x_i + a_i)^e expanded per variable, then multiplied out per term.
        for (k, &c) in &self.terms {
            let mut partial: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(self.dim), c)];
            for (i, &e) in k.0.iter().enumerate() {
                let mut next = Vec::with_capacity(partial.len() * (e as usize + 1));
                for (prefix, pc) in &partial {
                    for j in 0..=e {
                        let w = binomial(e, j) * a[i].powi((e - j) as i32);
                        if w == 0.0 {
                            continue;
                        }
                        let mut p = prefix.clone();
                        p.push(j);
                        next.push((p, pc * w));
                    }
                }
                partial = next;
            }
            for (e, v) in partial {
                *out.terms.entry(MultiIndex(e)).or_insert(0.0) += v;
            }
        }
        out.normalize();
        Ok(out)
    }

    /// Returns `q` with `q(z) = p(M z)` for a square `M`.
    pub fn linear_substitute(&self, m: &DMatrix<f64>) -> Result<Polynomial> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.nrows().max(m.ncols()),
            });
        }
        let n = self.dim;
        let rows: Vec<Polynomial> = (0..n)
            .map(|i| {
                let mut r = Polynomial::zero(n);
                for j in 0..n {
                    if m[(i, j)] != 0.0 {
                        r.terms.insert(MultiIndex::unit(n, j), m[(i, j)]);
                    }
                }
                r
            })
            .collect();
        let mut powers: Vec<Vec<Polynomial>> = rows.iter().map(|r| vec![Polynomial::constant(n, 1.0), r.clone()]).collect();
        let mut out = Polynomial::zero(n);
        for (k, &c) in &self.terms {
            let mut term = Polynomial::constant(n, c);
            for (i, &e) in k.0.iter().enumerate() {
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().expect("seeded").mul(&rows[i])?;
                    powers[i].push(next);
                }
                if e > 0 {
                    term = term.mul(&powers[i][e as usize])?;
                }
            }
            for (idx, v) in term.terms {
                *out.terms.entry(idx).or_insert(0.0) += v;
            }
        }
        out.normalize();
        Ok(out)
    }

    fn check_point(&self, x: &[f64]) {
        assert_eq!(
            x.len(),
            self.dim,
            "point of length {} for polynomial in {} variables",
            x.len(),
            self.dim
        );
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.check_point(x);
        self.terms.iter().map(|(k, &c)| c * k.eval(x)).sum()
    }

    pub fn eval_grad(&self, x: &[f64]) -> DVector<f64> {
        self.check_point(x);
        let n = self.dim;
        let mut g = DVector::zeros(n);
        for (k, &c) in &self.terms {
            for i in 0..n {
                let a = k.get(i);
                if a == 0 {
                    continue;
                }
                let mut v = c * f64::from(a);
                for (j, &xj) in x.iter().enumerate() {
                    let e = if j == i { a - 1 } else { k.get(j) };
                    v *= xj.powi(e as i32);
                }
                g[i] += v;
            }
        }
        g
    }

    /// Hessian at `x`; the result is exactly symmetric.
    pub fn eval_hess(&self, x: &[f64]) -> DMatrix<f64> {
        self.check_point(x);
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        for (k, &c) in &self.terms {
            for i in 0..n {
                for j in i..n {
                    let mut e = k.0.clone();
                    let mut w = c * f64::from(e[i]);
                    if e[i] == 0 {
                        continue;
                    }
                    e[i] -= 1;
                    w *= f64::from(e[j]);
                    if e[j] == 0 {
                        continue;
                    }
                    e[j] -= 1;
                    h[(i, j)] += w * MultiIndex(e).eval(x);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        h
    }
}

/// `(sum_i (x_i - c_i)^2)^(m/2)` for even `m >= 2`.
pub fn even_norm_power(n: usize, center: &[f64], m: u32) -> Result<Polynomial> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::OddExponent(m));
    }
    if center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: center.len(),
        });
    }
    let mut sq = Polynomial::zero(n);
    for (i, &c) in center.iter().enumerate() {
        let shifted = Polynomial::var(n, i).sub(&Polynomial::constant(n, c))?;
        sq = sq.add(&shifted.mul(&shifted)?)?;
    }
    Ok(sq.powi(m / 2))
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial(dim={}, ", self.dim)?;
        f.debug_map().entries(self.terms.iter()).finish()?;
        write!(f, ")")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (k, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (i, &e) in k.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exp: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialJson {
    dim: usize,
    terms: Vec<TermJson>,
}

impl From<Polynomial> for PolynomialJson {
    fn from(p: Polynomial) -> Self {
        PolynomialJson {
            dim: p.dim,
            terms: p
                .terms
                .into_iter()
                .map(|(k, coef)| TermJson { exp: k.0, coef })
                .collect(),
        }
    }
}

impl TryFrom<PolynomialJson> for Polynomial {
    type Error = Error;

    fn try_from(j: PolynomialJson) -> Result<Self> {
        if j.dim == 0 {
            return Err(Error::InvalidArgument("polynomial dimension must be positive".into()));
        }
        Polynomial::from_terms(
            j.dim,
            j.terms.into_iter().map(|t| (MultiIndex(t.exp), t.coef)),
        )
    }
}

/// Dense matrix of polynomials, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Polynomial>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if let Some(first) = entries.first() {
            if let Some(bad) = entries.iter().find(|p| p.dim() != first.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: bad.dim(),
                });
            }
        }
        Ok(PolyMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j).clone());
            }
        }
        PolyMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn mul(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let dim = self.entries.first().map_or(1, Polynomial::dim);
        let mut entries = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Polynomial::zero(dim);
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j))?)?;
                }
                entries.push(acc);
            }
        }
        PolyMatrix::new(self.rows, other.cols, entries)
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }
}
