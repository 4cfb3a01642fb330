//! Sum-of-squares and sos-convexity programs.
//!
//! Every program here has one symmetric Gram block (block 0) matched against a
//! target polynomial by coefficients, plus optional 1×1 blocks for
//! nonnegative scalars that enter the matching equations linearly. Surrogate
//! construction always works in coordinates centered at the current iterate.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{even_norm_power, monomial_basis, MultiIndex, PolyMatrix, Polynomial};
use crate::sdp::{self, Constraint, SdpProblem, SdpSolution, SolveStatus, SolverOptions, SymEntry};

/// Relative tolerance on the coefficient-matching residual of a certificate.
pub const CERT_RESIDUAL_TOL: f64 = 1e-6;
/// Floor on the smallest Gram eigenvalue of a certificate.
pub const CERT_EIG_FLOOR: f64 = -1e-7;
/// Stationarity tolerance for extracted minimizers, relative to the surrogate
/// coefficient scale.
pub const STATIONARITY_TOL: f64 = 1e-7;

/// Writes every compiled program to a directory in SDPA sparse format.
#[derive(Clone, Debug)]
pub struct SdpDump {
    dir: PathBuf,
    counter: Arc<AtomicUsize>,
}

impl SdpDump {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(SdpDump {
            dir,
            counter: Arc::new(AtomicUsize::new(0)),
        })
    }

    fn write(&self, label: &str, p: &SdpProblem) -> Result<()> {
        let k = self.counter.fetch_add(1, Ordering::SeqCst);
        let path = self.dir.join(format!("{k:06}_{label}.dat-s"));
        std::fs::write(path, p.to_sdpa())?;
        Ok(())
    }
}

/// Options shared by the sos programs.
#[derive(Clone, Debug)]
pub struct SosOptions {
    pub solver: SolverOptions,
    pub dump: Option<SdpDump>,
}

impl Default for SosOptions {
    fn default() -> Self {
        SosOptions {
            solver: SolverOptions {
                tol: 1e-10,
                ..SolverOptions::default()
            },
            dump: None,
        }
    }
}

fn run(label: &str, p: &SdpProblem, opts: &SosOptions) -> Result<SdpSolution> {
    if let Some(d) = &opts.dump {
        d.write(label, p)?;
    }
    let sol = sdp::solve(p, &opts.solver)?;
    debug!(
        "{label}: {:?} after {} iterations (gap {:.2e})",
        sol.status, sol.iterations, sol.relative_gap
    );
    Ok(sol)
}

fn solver_error(sol: &SdpSolution, what: &str) -> Error {
    Error::Solver {
        status: sol.status,
        detail: format!(
            "{what}: primal residual {:.2e}, dual residual {:.2e}, gap {:.2e}",
            sol.primal_residual, sol.dual_residual, sol.relative_gap
        ),
    }
}

/// Gram representation `target = v' Q v` over a monomial vector `v`.
///
/// For sos-convexity the target is the biform `y' ∇²p(x) y` as a polynomial in
/// `2n` variables `(x, y)` and the basis holds the Kronecker products
/// `x^β y_k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GramForm {
    pub basis: Vec<MultiIndex>,
    pub gram: Vec<Vec<f64>>,
    pub target: Polynomial,
}

impl GramForm {
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let n = self.basis.len();
        DMatrix::from_fn(n, n, |i, j| self.gram[i][j])
    }

    /// `v' Q v` expanded as a polynomial.
    pub fn reconstruct(&self) -> Polynomial {
        let dim = self.target.dim();
        let mut acc: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (i, bi) in self.basis.iter().enumerate() {
            for (j, bj) in self.basis.iter().enumerate() {
                *acc.entry(bi.plus(bj)).or_insert(0.0) += self.gram[i][j];
            }
        }
        Polynomial::from_terms(dim, acc).expect("basis shares the target dimension")
    }
}

/// Independent check of a Gram certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `|target - v'Qv|_inf / max(1, |target|_inf)` over coefficients.
    pub residual: f64,
    pub min_eig: f64,
    pub symmetric: bool,
    pub valid: bool,
}

/// Recomputes the coefficient residual and smallest Gram eigenvalue.
pub fn verify_certificate(g: &GramForm) -> CertificateReport {
    let n = g.basis.len();
    let shape_ok = g.gram.len() == n && g.gram.iter().all(|r| r.len() == n);
    let dims_ok = g.basis.iter().all(|b| b.dim() == g.target.dim());
    if !shape_ok || !dims_ok {
        return CertificateReport {
            residual: f64::INFINITY,
            min_eig: f64::NEG_INFINITY,
            symmetric: false,
            valid: false,
        };
    }
    let q = g.gram_matrix();
    let symmetric = (0..n).all(|i| (0..i).all(|j| q[(i, j)] == q[(j, i)]));
    let diff = g.target.sub(&g.reconstruct()).expect("same dimension");
    let residual = diff.max_abs_coeff() / g.target.max_abs_coeff().max(1.0);
    let min_eig = linalg::min_eigenvalue(&q);
    CertificateReport {
        residual,
        min_eig,
        symmetric,
        valid: symmetric && residual <= CERT_RESIDUAL_TOL && min_eig >= CERT_EIG_FLOOR,
    }
}

/// Certificate that `polynomial` is sos-convex.
///
/// The Gram form certifies `polynomial(A u)` in the variables `u`, where `A`
/// is the stored invertible change of variables (identity when absent);
/// sos-convexity is preserved by invertible linear maps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosConvexCertificate {
    pub polynomial: Polynomial,
    /// Row-major `A`.
    pub change_of_variables: Option<Vec<Vec<f64>>>,
    pub gramform: GramForm,
    pub min_eig: f64,
}

impl SosConvexCertificate {
    /// Checks the Gram form against a freshly computed biform of the stored
    /// polynomial, so a tampered target is caught as well.
    pub fn verify(&self) -> CertificateReport {
        let bad = CertificateReport {
            residual: f64::INFINITY,
            min_eig: f64::NEG_INFINITY,
            symmetric: false,
            valid: false,
        };
        let poly = match &self.change_of_variables {
            None => self.polynomial.clone(),
            Some(rows) => {
                let n = self.polynomial.dim();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return bad;
                }
                let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                if a.determinant() == 0.0 || !a.iter().all(|v| v.is_finite()) {
                    return bad;
                }
                match self.polynomial.linear_substitute(&a) {
                    Ok(p) => p,
                    Err(_) => return bad,
                }
            }
        };
        let fresh = GramForm {
            target: hessian_biform(&poly),
            ..self.gramform.clone()
        };
        verify_certificate(&fresh)
    }
}

/// `q(x, y) = y' ∇²p(x) y` as a polynomial in `(x_1..x_n, y_1..y_n)`.
pub fn hessian_biform(p: &Polynomial) -> Polynomial {
    let n = p.dim();
    let h = p.hessian();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for (idx, c) in h.get(i, j).terms() {
                let mut e = idx.exponents().to_vec();
                e.extend(std::iter::repeat_n(0, n));
                e[n + i] += 1;
                e[n + j] += 1;
                terms.push((MultiIndex::new(e), c));
            }
        }
    }
    Polynomial::from_terms(2 * n, terms).expect("2n-dimensional indices")
}

/// Kronecker basis `φ_k(x) ⊗ y` embedded in `2n` variables.
pub fn kronecker_basis(n: usize, k: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for m in monomial_basis(n, k) {
        for yi in 0..n {
            let mut e = m.exponents().to_vec();
            e.extend(std::iter::repeat_n(0, n));
            e[n + yi] = 1;
            out.push(MultiIndex::new(e));
        }
    }
    out
}

/// Coefficient-matching program over one Gram block and a list of scalar
/// unknowns `s_k ≥ 0` each contributing `s_k * extra_k` to the target side:
/// `target + sum_k s_k extra_k = v' Q v`.
#[derive(Clone, Debug)]
pub struct GramProgram {
    pub problem: SdpProblem,
    pub basis: Vec<MultiIndex>,
    /// Monomial matched by each constraint row.
    pub rows: Vec<MultiIndex>,
    pub target: Polynomial,
}

fn compile(
    target: &Polynomial,
    basis: &[MultiIndex],
    extras: &[(&Polynomial, f64)],
    skip_constant: bool,
) -> GramProgram {
    let nb = basis.len();
    let mut pairs: BTreeMap<MultiIndex, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..nb {
        for j in i..nb {
            pairs.entry(basis[i].plus(&basis[j])).or_default().push((i, j));
        }
    }
    for (idx, _) in target.terms() {
        pairs.entry(idx.clone()).or_default();
    }
    for (e, _) in extras {
        for (idx, _) in e.terms() {
            pairs.entry(idx.clone()).or_default();
        }
    }

    let mut blocks = vec![nb];
    blocks.extend(std::iter::repeat_n(1, extras.len()));
    let mut problem = SdpProblem::new(blocks);
    for (k, (_, cost)) in extras.iter().enumerate() {
        if *cost != 0.0 {
            problem.objective.push(SymEntry::new(k + 1, 0, 0, *cost));
        }
    }
    let mut rows = Vec::new();
    let zero = MultiIndex::zeros(target.dim());
    for (mono, plist) in pairs {
        if skip_constant && mono == zero {
            continue;
        }
        let mut entries: Vec<SymEntry> = plist
            .iter()
            .map(|&(i, j)| SymEntry::new(0, i, j, 1.0))
            .collect();
        for (k, (e, _)) in extras.iter().enumerate() {
            let c = e.coeff(&mono);
            if c != 0.0 {
                entries.push(SymEntry::new(k + 1, 0, 0, -c));
            }
        }
        let rhs = target.coeff(&mono);
        if entries.is_empty() && rhs == 0.0 {
            continue;
        }
        problem.constraints.push(Constraint { entries, rhs });
        rows.push(mono);
    }
    GramProgram {
        problem,
        basis: basis.to_vec(),
        rows,
        target: target.clone(),
    }
}

fn gram_of(sol: &SdpSolution) -> Vec<Vec<f64>> {
    let q = &sol.x[0];
    (0..q.nrows())
        .map(|i| (0..q.ncols()).map(|j| q[(i, j)]).collect())
        .collect()
}

fn even_degree(p: &Polynomial) -> Result<u32> {
    let d = p.degree();
    if d % 2 != 0 {
        return Err(Error::OddDegree(d as usize));
    }
    Ok(d)
}

/// Gram program for "`p` is sos" over `φ_{deg/2}`.
pub fn build_sos_constraint(p: &Polynomial) -> Result<GramProgram> {
    let d = even_degree(p)?;
    let basis = monomial_basis(p.dim(), d / 2);
    Ok(compile(p, &basis, &[], false))
}

/// Gram program for "`p` is sos-convex" over `φ_{deg/2-1}(x) ⊗ y`.
pub fn build_sosconvex_constraint(p: &Polynomial) -> Result<GramProgram> {
    let d = even_degree(p)?;
    if d < 2 {
        return Err(Error::InvalidArgument(
            "sos-convexity needs degree at least 2".into(),
        ));
    }
    let basis = kronecker_basis(p.dim(), d / 2 - 1);
    Ok(compile(&hessian_biform(p), &basis, &[], false))
}

/// Result of a pure feasibility check.
#[derive(Clone, Debug)]
pub enum Feasibility {
    Feasible(GramForm),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

fn feasibility(label: &str, prog: GramProgram, opts: &SosOptions) -> Result<Feasibility> {
    let sol = run(label, &prog.problem, opts)?;
    match sol.status {
        SolveStatus::Optimal => Ok(Feasibility::Feasible(GramForm {
            basis: prog.basis,
            gram: gram_of(&sol),
            target: prog.target,
        })),
        SolveStatus::PrimalInfeasible => Ok(Feasibility::Infeasible),
        _ => Err(solver_error(&sol, label)),
    }
}

/// Decides whether `p` is a sum of squares.
pub fn check_sos(p: &Polynomial, opts: &SosOptions) -> Result<Feasibility> {
    feasibility("sos", build_sos_constraint(p)?, opts)
}

/// Decides whether `p` is sos-convex.
pub fn check_sosconvex(p: &Polynomial, opts: &SosOptions) -> Result<Feasibility> {
    feasibility("sosconvex", build_sosconvex_constraint(p)?, opts)
}

/// sos-convexity certificate for `p` computed in conditioned coordinates.
pub fn sosconvex_certificate(p: &Polynomial, opts: &SosOptions) -> Result<Option<SosConvexCertificate>> {
    let d = even_degree(p)?;
    if d < 2 {
        return Err(Error::InvalidArgument("sos-convexity needs degree at least 2".into()));
    }
    let cond = Conditioner::for_polynomial(p)?;
    let pu = cond.apply(p)?;
    let s = coefficient_scale(&pu);
    let basis = kronecker_basis(p.dim(), d / 2 - 1);
    let prog = compile(&hessian_biform(&pu.scale(1.0 / s)), &basis, &[], false);
    let sol = run("sosconvex", &prog.problem, opts)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible => return Ok(None),
        _ => return Err(solver_error(&sol, "sosconvex")),
    }
    let gram: Vec<Vec<f64>> = gram_of(&sol)
        .into_iter()
        .map(|row| row.into_iter().map(|v| v * s).collect())
        .collect();
    let gramform = GramForm {
        basis,
        gram,
        target: hessian_biform(&pu),
    };
    let min_eig = linalg::min_eigenvalue(&gramform.gram_matrix());
    Ok(Some(SosConvexCertificate {
        polynomial: p.clone(),
        change_of_variables: Some(cond.rows()),
        gramform,
        min_eig,
    }))
}

/// Smallest regularization weight with its certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Regularization {
    pub weight: f64,
    pub certificate: SosConvexCertificate,
    pub solver_iterations: usize,
}

fn check_dprime(taylor: &Polynomial, dprime: u32) -> Result<()> {
    if dprime < 2 || dprime % 2 != 0 || dprime <= taylor.degree() {
        return Err(Error::InvalidArgument(format!(
            "regularizer degree {dprime} must be even and exceed the Taylor degree {}",
            taylor.degree()
        )));
    }
    Ok(())
}

/// Scale used to normalize a centered polynomial before compilation.
fn coefficient_scale(p: &Polynomial) -> f64 {
    let zero = MultiIndex::zeros(p.dim());
    let s = p
        .terms()
        .filter(|(k, _)| **k != zero)
        .fold(0.0f64, |m, (_, c)| m.max(c.abs()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Invertible change of variables `h = A u` that whitens the quadratic part
/// of a centered polynomial and balances its higher-degree coefficients.
/// Sos-convexity and minimum values are unchanged under such a map.
#[derive(Clone, Debug)]
struct Conditioner {
    a: DMatrix<f64>,
}

const WHITEN: f64 = 0.25;

impl Conditioner {
    fn for_polynomial(p: &Polynomial) -> Result<Self> {
        let n = p.dim();
        let h = p.eval_hess(&vec![0.0; n]);
        let (vals, vecs) = linalg::jacobi_eigen(&h);
        let lmax = vals.iter().fold(0.0f64, |m, v| m.max(*v));
        let a0 = if lmax > 0.0 {
            let floor = 1e-6 * lmax;
            let d = DVector::from_iterator(n, vals.iter().map(|v| v.max(floor).powf(-WHITEN)));
            &vecs * DMatrix::from_diagonal(&d)
        } else {
            DMatrix::identity(n, n)
        };
        let p0 = p.linear_substitute(&a0)?;
        let mut by_degree: BTreeMap<u32, f64> = BTreeMap::new();
        for (k, c) in p0.terms() {
            let e = by_degree.entry(k.degree()).or_insert(0.0);
            *e = e.max(c.abs());
        }
        let rho = by_degree
            .iter()
            .filter(|(deg, c)| **deg >= 3 && **c > 0.0)
            .map(|(deg, c)| c.powf(-1.0 / f64::from(deg - 2)))
            .fold(f64::INFINITY, f64::min);
        let rho = if rho.is_finite() { rho.clamp(1e-4, 1.0) } else { 1.0 };
        Ok(Conditioner { a: a0 * rho })
    }

    fn apply(&self, p: &Polynomial) -> Result<Polynomial> {
        p.linear_substitute(&self.a)
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.a.nrows())
            .map(|i| (0..self.a.ncols()).map(|j| self.a[(i, j)]).collect())
            .collect()
    }

    fn to_original(&self, u: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(u)).iter().copied().collect()
    }
}

/// Largest weight on `reg` needed for convexity of `base + w reg` along a
/// fixed set of lines through the origin. A lower bound for the sos-convex
/// weight, used only to scale the program.
fn line_weight_bound(base: &Polynomial, reg: &Polynomial, dprime: u32) -> f64 {
    let n = base.dim();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if n == 2 {
        for k in 0..32 {
            let a = std::f64::consts::PI * k as f64 / 32.0;
            dirs.push(vec![a.cos(), a.sin()]);
        }
    } else {
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            dirs.push(e);
            for j in i + 1..n {
                for sg in [1.0, -1.0] {
                    let mut e = vec![0.0; n];
                    e[i] = std::f64::consts::FRAC_1_SQRT_2;
                    e[j] = sg * std::f64::consts::FRAC_1_SQRT_2;
                    dirs.push(e);
                }
            }
        }
    }
    let deg = base.degree() as usize;
    let m = dprime as f64;
    let mut bound = 0.0f64;
    for u in &dirs {
        let mut c = vec![0.0; deg + 1];
        for (idx, v) in base.terms() {
            c[idx.degree() as usize] += v * idx.eval(u);
        }
        let ru = reg.eval(u);
        if !(ru > 0.0) {
            continue;
        }
        for i in 0..=48 {
            let mag = 10f64.powf(-3.0 + 6.0 * i as f64 / 48.0);
            for s in [mag, -mag] {
                let curv: f64 = (2..=deg).map(|k| (k * (k - 1)) as f64 * c[k] * s.powi(k as i32 - 2)).sum();
                let need = -curv / (m * (m - 1.0) * ru * s.powi(dprime as i32 - 2));
                if need.is_finite() {
                    bound = bound.max(need);
                }
            }
        }
    }
    bound
}

/// Smallest `w ≥ 0` with `base + w |h|^dprime` sos-convex, for `base`
/// already centered at the origin.
fn min_weight_centered(base: &Polynomial, dprime: u32, label: &str, opts: &SosOptions) -> Result<Regularization> {
    let n = base.dim();
    let reg = even_norm_power(n, &vec![0.0; n], dprime)?;
    let cond = Conditioner::for_polynomial(base)?;
    let base_u = cond.apply(base)?;
    let reg_u = cond.apply(&reg)?;
    let s = coefficient_scale(&base_u);
    let r = reg_u.max_abs_coeff();
    let kappa = line_weight_bound(&base_u.scale(1.0 / s), &reg_u.scale(1.0 / r), dprime).max(1.0);
    let r = r / kappa;
    let basis = kronecker_basis(n, dprime / 2 - 1);
    let target = hessian_biform(&base_u.scale(1.0 / s));
    let reg_biform = hessian_biform(&reg_u.scale(1.0 / r));
    let prog = compile(&target, &basis, &[(&reg_biform, 1.0)], false);
    let sol = run(label, &prog.problem, opts)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible => {
            return Err(Error::Infeasible(format!(
                "no nonnegative weight makes the {label} surrogate sos-convex"
            )))
        }
        _ => return Err(solver_error(&sol, label)),
    }
    let weight = sol.x[1][(0, 0)].max(0.0) * s / r;
    let polynomial = base.add(&reg.scale(weight))?;
    let gram: Vec<Vec<f64>> = gram_of(&sol)
        .into_iter()
        .map(|row| row.into_iter().map(|v| v * s).collect())
        .collect();
    let gramform = GramForm {
        basis,
        gram,
        target: hessian_biform(&cond.apply(&polynomial)?),
    };
    let min_eig = linalg::min_eigenvalue(&gramform.gram_matrix());
    Ok(Regularization {
        weight,
        certificate: SosConvexCertificate {
            polynomial,
            change_of_variables: Some(cond.rows()),
            gramform,
            min_eig,
        },
        solver_iterations: sol.iterations,
    })
}

/// Smallest `t ≥ 0` such that `T + t |x - center|^dprime` is sos-convex.
///
/// The returned certificate is for the surrogate in coordinates centered at
/// `center`.
pub fn min_t(taylor: &Polynomial, center: &[f64], dprime: u32, opts: &SosOptions) -> Result<Regularization> {
    check_dprime(taylor, dprime)?;
    min_t_centered(&taylor.translate(center)?, dprime, opts)
}

/// [`min_t`] for a Taylor polynomial already centered at the origin.
pub fn min_t_centered(taylor: &Polynomial, dprime: u32, opts: &SosOptions) -> Result<Regularization> {
    check_dprime(taylor, dprime)?;
    min_weight_centered(taylor, dprime, "min_t", opts)
}

/// Smallest `t̄ ≥ 0` such that
/// `T + (eps - lam_min)/2 |x - c|^2 + t̄ |x - c|^dprime` is sos-convex.
pub fn min_t_bar(
    taylor: &Polynomial,
    center: &[f64],
    eps: f64,
    lam_min: f64,
    dprime: u32,
    opts: &SosOptions,
) -> Result<Regularization> {
    check_dprime(taylor, dprime)?;
    min_t_bar_centered(&taylor.translate(center)?, eps, lam_min, dprime, opts)
}

/// [`min_t_bar`] for a Taylor polynomial already centered at the origin.
pub fn min_t_bar_centered(
    taylor: &Polynomial,
    eps: f64,
    lam_min: f64,
    dprime: u32,
    opts: &SosOptions,
) -> Result<Regularization> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    check_dprime(taylor, dprime)?;
    let shifted = shifted_taylor(taylor, eps, lam_min)?;
    min_weight_centered(&shifted, dprime, "min_t_bar", opts)
}

/// `T + (eps - lam_min)/2 |h|^2` for centered `T`.
pub fn shifted_taylor(taylor: &Polynomial, eps: f64, lam_min: f64) -> Result<Polynomial> {
    let n = taylor.dim();
    let sq = even_norm_power(n, &vec![0.0; n], 2)?;
    taylor.add(&sq.scale(0.5 * (eps - lam_min)))
}

/// Minimum of an sos-convex polynomial via the first moment relaxation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LasserreSolution {
    pub gamma_star: f64,
    /// Minimizer after Newton refinement of the moment estimate.
    pub minimizer: Vec<f64>,
    /// Degree-one moments, read directly from the moment matrix.
    pub moment_minimizer: Vec<f64>,
    /// Moment matrix indexed by `monomial_basis(n, deg/2)` in the internal
    /// recentred and conditioned coordinates; entry (0,0) is 1.
    pub moment_matrix: Vec<Vec<f64>>,
    /// `|∇psi(minimizer)|`.
    pub grad_norm: f64,
    /// Coefficient scale the stationarity check is relative to.
    pub scale: f64,
    pub solver_iterations: usize,
}

/// Solves `sup γ s.t. psi - γ sos` and recovers the minimizer of `psi` from
/// the degree-one moments of the dual moment matrix.
///
/// The constant term is removed from the matching equations so that `γ` is
/// implicit: `γ = psi(0) - Q_00` and the program minimizes `Q_00`. The dual
/// slack of the Gram block is then exactly the moment matrix with unit
/// `(0, 0)` entry.
pub fn lasserre_minimize(psi: &Polynomial, opts: &SosOptions) -> Result<LasserreSolution> {
    let d = even_degree(psi)?;
    if d < 2 {
        return Err(Error::InvalidArgument(
            "cannot minimize a constant polynomial".into(),
        ));
    }
    let n = psi.dim();
    let scale = coefficient_scale(psi);
    // recentre near the minimizer so the moments stay of order one
    let center = refine_minimizer(psi, &vec![0.0; n]);
    let psi_c = psi.translate(&center)?;
    let cond = Conditioner::for_polynomial(&psi_c)?;
    let psi_u = cond.apply(&psi_c)?;
    let scale_u = coefficient_scale(&psi_u);
    let scaled = psi_u.scale(1.0 / scale_u);
    let basis = monomial_basis(n, d / 2);
    let mut prog = compile(&scaled, &basis, &[], true);
    prog.problem.objective.push(SymEntry::new(0, 0, 0, 1.0));
    let sol = run("lasserre", &prog.problem, opts)?;
    if sol.status != SolveStatus::Optimal {
        return Err(solver_error(&sol, "lasserre"));
    }
    let psi0 = scaled.coeff(&MultiIndex::zeros(n));
    let gamma_star = (psi0 - sol.x[0][(0, 0)]) * scale_u;
    let mm = &sol.s[0];
    let moments_u: Vec<f64> = (0..n)
        .map(|i| {
            let k = basis
                .iter()
                .position(|b| *b == MultiIndex::unit(n, i))
                .expect("degree-one monomials are in the basis");
            mm[(0, k)] / mm[(0, 0)]
        })
        .collect();
    let shift = |v: Vec<f64>| -> Vec<f64> { v.iter().zip(&center).map(|(a, c)| a + c).collect() };
    let moment_minimizer = shift(cond.to_original(&moments_u));
    let minimizer = shift(cond.to_original(&refine_minimizer(&psi_u, &moments_u)));
    let minimizer = refine_minimizer(psi, &minimizer);
    let grad_norm = psi.eval_grad(&minimizer).norm();
    let tolerance = stationarity_tolerance(psi);
    if !(grad_norm <= tolerance) {
        return Err(Error::Stationarity { grad_norm, tolerance });
    }
    let gap = psi.eval(&minimizer) - gamma_star;
    if gap > CERT_RESIDUAL_TOL * scale.max(1.0) {
        return Err(Error::Solver {
            status: sol.status,
            detail: format!("value at extracted minimizer exceeds the sos bound by {gap:.3e}"),
        });
    }
    Ok(LasserreSolution {
        gamma_star,
        minimizer,
        moment_minimizer,
        moment_matrix: (0..mm.nrows())
            .map(|i| (0..mm.ncols()).map(|j| mm[(i, j)]).collect())
            .collect(),
        grad_norm,
        scale,
        solver_iterations: sol.iterations,
    })
}

/// `1e-7 · max(1, scale)`, the bound on `|∇psi|` at an accepted minimizer.
pub fn stationarity_tolerance(psi: &Polynomial) -> f64 {
    STATIONARITY_TOL * coefficient_scale(psi).max(1.0)
}

/// Damped Newton refinement on a convex polynomial. Never returns a point
/// with a larger value than the start.
fn refine_minimizer(psi: &Polynomial, start: &[f64]) -> Vec<f64> {
    let n = psi.dim();
    let mut x = DVector::from_column_slice(start);
    let mut fx = psi.eval(x.as_slice());
    for _ in 0..100 {
        let g = psi.eval_grad(x.as_slice());
        if g.norm() == 0.0 {
            break;
        }
        let mut h = psi.eval_hess(x.as_slice());
        let bump = 1e-14 * h.norm().max(1e-300);
        for i in 0..n {
            h[(i, i)] += bump;
        }
        let step = match h.cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone(),
        };
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial = &x - &step * alpha;
            let ft = psi.eval(trial.as_slice());
            let gt = psi.eval_grad(trial.as_slice()).norm();
            if ft < fx || (ft <= fx && gt < g.norm()) {
                x = trial;
                fx = ft;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x.iter().copied().collect()
}

/// Smallest eigenvalue of `∫₀¹ M(s) ds - M(alpha) / (2(d²-1))` for a
/// univariate polynomial matrix `M`, where `d` is the entry degree bound
/// rounded up to an even number (at least 2).
pub fn quadrature_margin(m: &PolyMatrix, alpha: f64) -> Result<f64> {
    if m.rows() != m.cols() {
        return Err(Error::InvalidArgument("quadrature check needs a square matrix".into()));
    }
    let r = m.rows();
    if r > 0 && m.get(0, 0).dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: m.get(0, 0).dim(),
        });
    }
    let mut d = m.max_degree().max(2);
    if d % 2 == 1 {
        d += 1;
    }
    let w0 = 1.0 / (f64::from(d * d) - 1.0);
    let integral = DMatrix::from_fn(r, r, |i, j| {
        m.get(i, j)
            .terms()
            .map(|(k, c)| c / f64::from(k.get(0) + 1))
            .sum::<f64>()
    });
    let at = m.eval(&[alpha]);
    Ok(linalg::min_eigenvalue(&(integral - at * (0.5 * w0))))
}
