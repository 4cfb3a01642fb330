//! Dense block-diagonal semidefinite programming.
//!
//! Primal: `min <C, X>  s.t.  <A_i, X> = b_i,  X ⪰ 0`
//! Dual:   `max b'y     s.t.  C - sum_i y_i A_i = S ⪰ 0`
//!
//! The solver is an infeasible-start primal-dual path-following method with
//! Nesterov–Todd scaling and a Mehrotra predictor–corrector. The Schur
//! complement is formed densely and factored by Cholesky. Infeasibility is
//! detected by testing the normalized iterates as Farkas rays each iteration.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of a symmetric matrix inside a block. The value applies to both
/// `(row, col)` and `(col, row)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl SymEntry {
    pub fn new(block: usize, row: usize, col: usize, value: f64) -> Self {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        SymEntry {
            block,
            row,
            col,
            value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub entries: Vec<SymEntry>,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<SymEntry>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Target for relative primal/dual residuals and relative gap.
    pub tol: f64,
    /// An iterate meeting this looser level is still reported `Optimal` when
    /// progress stalls before `tol` is reached.
    pub accept_tol: f64,
    pub max_iter: usize,
    /// Threshold on normalized Farkas rays.
    pub infeasibility_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            accept_tol: 1e-8,
            max_iter: 200,
            infeasibility_tol: 1e-9,
        }
    }
}

/// Block-diagonal symmetric matrix.
pub type BlockMatrix = Vec<DMatrix<f64>>;

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: BlockMatrix,
    pub y: Vec<f64>,
    pub s: BlockMatrix,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|b - A(X)| / (1 + |b|)` on the original problem.
    pub primal_residual: f64,
    /// `|C - S - A'y|_F / (1 + |C|_F)`.
    pub dual_residual: f64,
    /// `|pobj - dobj| / (1 + |pobj| + |dobj|)`.
    pub relative_gap: f64,
    pub iterations: usize,
    /// Farkas ray `y` with `b'y = 1` and `-A'y ⪰ 0` (approximately) when the
    /// primal is infeasible.
    pub primal_ray: Option<Vec<f64>>,
    /// Ray `X ⪰ 0` with `<C, X> = -1` and `A(X) ≈ 0` when the dual is
    /// infeasible.
    pub dual_ray: Option<BlockMatrix>,
    pub presolve: PresolveReport,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

// ---------------------------------------------------------------------------
// dense helpers

fn zeros_like(blocks: &[usize]) -> BlockMatrix {
    blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect()
}

/// `a * b` by plain loops; the blocks here are small enough that a packed
/// gemm costs more than it saves.
fn mm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k, m) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(n, m);
    let (av, bv) = (a.as_slice(), b.as_slice());
    let ov = out.as_mut_slice();
    for j in 0..m {
        let oc = &mut ov[j * n..(j + 1) * n];
        for l in 0..k {
            let blj = bv[j * k + l];
            if blj == 0.0 {
                continue;
            }
            for (o, &x) in oc.iter_mut().zip(&av[l * n..(l + 1) * n]) {
                *o += x * blj;
            }
        }
    }
    out
}

fn mmt(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    mm(a, &b.transpose())
}

fn mtm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    mm(&a.transpose(), b)
}

fn inner(a: &BlockMatrix, b: &BlockMatrix) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &BlockMatrix) -> f64 {
    inner(a, a).sqrt()
}

fn axpy(a: &mut BlockMatrix, alpha: f64, x: &BlockMatrix) {
    for (ai, xi) in a.iter_mut().zip(x) {
        *ai += xi * alpha;
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn dense_from_entries(blocks: &[usize], entries: &[SymEntry]) -> BlockMatrix {
    let mut out = zeros_like(blocks);
    for e in entries {
        let m = &mut out[e.block];
        m[(e.row, e.col)] += e.value;
        if e.row != e.col {
            m[(e.col, e.row)] += e.value;
        }
    }
    out
}

fn block_min_eig(m: &BlockMatrix) -> f64 {
    m.iter()
        .filter(|b| b.nrows() > 0)
        .map(|b| b.clone().symmetric_eigenvalues().min())
        .fold(f64::INFINITY, f64::min)
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        SdpProblem {
            blocks,
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Checks block indices and entry coordinates.
    pub fn validate(&self) -> Result<()> {
        let check = |e: &SymEntry| -> Result<()> {
            let n = *self.blocks.get(e.block).ok_or_else(|| {
                Error::InvalidArgument(format!("entry refers to missing block {}", e.block))
            })?;
            if e.row >= n || e.col >= n || !e.value.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "entry ({}, {}) = {} invalid for block {} of size {n}",
                    e.row, e.col, e.value, e.block
                )));
            }
            Ok(())
        };
        self.objective.iter().try_for_each(check)?;
        for c in &self.constraints {
            c.entries.iter().try_for_each(check)?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument("non-finite right-hand side".into()));
            }
        }
        Ok(())
    }

    pub fn dense_objective(&self) -> BlockMatrix {
        dense_from_entries(&self.blocks, &self.objective)
    }

    pub fn dense_constraints(&self) -> Vec<BlockMatrix> {
        self.constraints
            .iter()
            .map(|c| dense_from_entries(&self.blocks, &c.entries))
            .collect()
    }

    /// Writes the problem in SDPA sparse format. The file describes the
    /// SDPA primal `min b'y s.t. sum_i y_i F_i - F_0 ⪰ 0` with `F_0 = -C`
    /// and `F_i = -A_i`, whose optimal value is the negated optimum of this
    /// problem.
    pub fn to_sdpa(&self) -> String {
        let mut s = String::new();
        writeln!(s, "* block SDP, {} constraints", self.constraints.len()).unwrap();
        writeln!(s, "{}", self.constraints.len()).unwrap();
        writeln!(s, "{}", self.blocks.len()).unwrap();
        let sizes: Vec<String> = self.blocks.iter().map(|b| b.to_string()).collect();
        writeln!(s, "{}", sizes.join(" ")).unwrap();
        let rhs: Vec<String> = self.constraints.iter().map(|c| format!("{:.17e}", c.rhs)).collect();
        writeln!(s, "{}", rhs.join(" ")).unwrap();
        let mut emit = |k: usize, entries: &[SymEntry]| {
            for e in entries {
                if e.value != 0.0 {
                    writeln!(
                        s,
                        "{} {} {} {} {:.17e}",
                        k,
                        e.block + 1,
                        e.row + 1,
                        e.col + 1,
                        -e.value
                    )
                    .unwrap();
                }
            }
        };
        emit(0, &self.objective);
        for (k, c) in self.constraints.iter().enumerate() {
            emit(k + 1, &c.entries);
        }
        s
    }

    /// Reads the format written by [`SdpProblem::to_sdpa`].
    pub fn from_sdpa<R: Read>(reader: R) -> Result<SdpProblem> {
        let mut tokens: Vec<String> = Vec::new();
        let mut entry_lines: Vec<String> = Vec::new();
        let mut header_done = false;
        let mut header_tokens_needed: Option<usize> = None;
        for line in BufReader::new(reader).lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('*') || line.starts_with('"') {
                continue;
            }
            if header_done {
                entry_lines.push(line.to_string());
                continue;
            }
            tokens.extend(
                line.split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '(' || c == ')')
                    .filter(|t| !t.is_empty())
                    .map(str::to_string),
            );
            if header_tokens_needed.is_none() && tokens.len() >= 2 {
                let m: usize = parse_tok(&tokens[0])?;
                let nb: usize = parse_tok(&tokens[1])?;
                header_tokens_needed = Some(2 + nb + m);
            }
            if let Some(need) = header_tokens_needed {
                if tokens.len() >= need {
                    header_done = true;
                }
            }
        }
        let need = header_tokens_needed
            .ok_or_else(|| Error::InvalidArgument("truncated SDPA header".into()))?;
        if tokens.len() < need {
            return Err(Error::InvalidArgument("truncated SDPA header".into()));
        }
        let m: usize = parse_tok(&tokens[0])?;
        let nb: usize = parse_tok(&tokens[1])?;
        let blocks: Vec<usize> = tokens[2..2 + nb]
            .iter()
            .map(|t| parse_tok::<i64>(t).map(|v| v.unsigned_abs() as usize))
            .collect::<Result<_>>()?;
        let rhs: Vec<f64> = tokens[2 + nb..need].iter().map(|t| parse_tok(t)).collect::<Result<_>>()?;
        let mut p = SdpProblem::new(blocks);
        p.constraints = rhs
            .into_iter()
            .map(|rhs| Constraint {
                entries: Vec::new(),
                rhs,
            })
            .collect();
        for line in entry_lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 {
                return Err(Error::InvalidArgument(format!("bad SDPA entry line: {line}")));
            }
            let k: usize = parse_tok(t[0])?;
            let b: usize = parse_tok(t[1])?;
            let i: usize = parse_tok(t[2])?;
            let j: usize = parse_tok(t[3])?;
            let v: f64 = parse_tok(t[4])?;
            if b == 0 || i == 0 || j == 0 || k > m {
                return Err(Error::InvalidArgument(format!("bad SDPA entry line: {line}")));
            }
            let e = SymEntry::new(b - 1, i - 1, j - 1, -v);
            if k == 0 {
                p.objective.push(e);
            } else {
                p.constraints[k - 1].entries.push(e);
            }
        }
        p.validate()?;
        Ok(p)
    }
}

fn parse_tok<T: std::str::FromStr>(t: &str) -> Result<T> {
    t.parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot parse SDPA token {t:?}")))
}

// ---------------------------------------------------------------------------
// presolve

/// Record of the row transformations applied before the interior-point loop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PresolveReport {
    /// Original indices of the rows kept, in order.
    pub kept: Vec<usize>,
    /// Frobenius norms the kept rows were divided by.
    pub scales: Vec<f64>,
    /// Rows dropped as zero or linearly dependent on earlier rows.
    pub dropped: Vec<usize>,
    /// Set when presolve alone proves primal infeasibility.
    pub infeasible: Option<String>,
    /// Farkas ray over the original rows accompanying `infeasible`.
    pub ray: Option<Vec<f64>>,
}

impl PresolveReport {
    pub fn is_identity(&self) -> bool {
        self.dropped.is_empty()
            && self.infeasible.is_none()
            && self.scales.iter().all(|&s| s == 1.0)
            && self.kept.iter().enumerate().all(|(i, &k)| i == k)
    }
}

/// Vectorizes a block matrix so that Euclidean inner products equal trace
/// inner products.
fn svec(a: &BlockMatrix) -> Vec<f64> {
    let mut v = Vec::new();
    let r2 = std::f64::consts::SQRT_2;
    for b in a {
        let n = b.nrows();
        for j in 0..n {
            for i in 0..=j {
                v.push(if i == j { b[(i, j)] } else { r2 * b[(i, j)] });
            }
        }
    }
    v
}

/// Drops zero and numerically dependent rows (modified Gram–Schmidt, relative
/// threshold `1e-10`) and scales kept rows to unit Frobenius norm.
pub fn presolve(p: &SdpProblem) -> (SdpProblem, PresolveReport) {
    const DEP_TOL: f64 = 1e-10;
    let dense = p.dense_constraints();
    let m = dense.len();
    let bscale = 1.0 + p.constraints.iter().fold(0.0f64, |a, c| a.max(c.rhs.abs()));

    // orthonormal basis of kept rows, each with its combination of original
    // rows and the matching right-hand side
    let mut basis: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut report = PresolveReport::default();
    let mut out = SdpProblem::new(p.blocks.clone());
    out.objective = p.objective.clone();

    for i in 0..m {
        let a = svec(&dense[i]);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = a.clone();
        let mut combo = vec![0.0; m];
        combo[i] = 1.0;
        let mut rb = p.constraints[i].rhs;
        for _pass in 0..2 {
            for (q, qc, qb) in &basis {
                let c: f64 = r.iter().zip(q).map(|(x, y)| x * y).sum();
                if c == 0.0 {
                    continue;
                }
                for (x, y) in r.iter_mut().zip(q) {
                    *x -= c * y;
                }
                for (x, y) in combo.iter_mut().zip(qc) {
                    *x -= c * y;
                }
                rb -= c * qb;
            }
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || rnorm <= DEP_TOL * norm {
            report.dropped.push(i);
            if rb.abs() > 1e-9 * bscale && report.infeasible.is_none() {
                let what = if norm == 0.0 { "zero row" } else { "dependent row" };
                warn!("presolve: {what} {i} has inconsistent right-hand side {rb:e}");
                report.infeasible = Some(format!("{what} {i} with inconsistent right-hand side"));
                report.ray = Some(combo.iter().map(|c| c / rb).collect());
            } else {
                debug!("presolve: dropping row {i}");
            }
            continue;
        }
        for x in r.iter_mut() {
            *x /= rnorm;
        }
        for x in combo.iter_mut() {
            *x /= rnorm;
        }
        basis.push((r, combo, rb / rnorm));
        report.kept.push(i);
        report.scales.push(norm);
        out.constraints.push(Constraint {
            entries: p.constraints[i]
                .entries
                .iter()
                .map(|e| SymEntry { value: e.value / norm, ..*e })
                .collect(),
            rhs: p.constraints[i].rhs / norm,
        });
    }
    if !report.dropped.is_empty() {
        warn!("presolve dropped {} constraint rows", report.dropped.len());
    }
    (out, report)
}

// ---------------------------------------------------------------------------
// residuals by direct substitution

/// Residuals of a candidate `(X, y, S)` recomputed from the problem data.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub relative_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub min_eig_x: f64,
    pub min_eig_s: f64,
}

pub fn substitution_residuals(p: &SdpProblem, x: &BlockMatrix, y: &[f64], s: &BlockMatrix) -> Residuals {
    let c = p.dense_objective();
    let a = p.dense_constraints();
    let b: Vec<f64> = p.constraints.iter().map(|c| c.rhs).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rp: f64 = a
        .iter()
        .zip(&b)
        .map(|(ai, bi)| (bi - inner(ai, x)).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut rd = c.clone();
    axpy(&mut rd, -1.0, s);
    for (ai, yi) in a.iter().zip(y) {
        axpy(&mut rd, -yi, ai);
    }
    let pobj = inner(&c, x);
    let dobj: f64 = b.iter().zip(y).map(|(u, v)| u * v).sum();
    Residuals {
        primal: rp / (1.0 + bnorm),
        dual: fro(&rd) / (1.0 + fro(&c)),
        relative_gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        primal_objective: pobj,
        dual_objective: dobj,
        min_eig_x: block_min_eig(x),
        min_eig_s: block_min_eig(s),
    }
}

/// Checks a primal-infeasibility ray: returns `(b'y, λ_min(-A'y))`.
pub fn check_primal_ray(p: &SdpProblem, ray: &[f64]) -> (f64, f64) {
    let a = p.dense_constraints();
    let mut z = zeros_like(&p.blocks);
    for (ai, yi) in a.iter().zip(ray) {
        axpy(&mut z, -yi, ai);
    }
    let by: f64 = p.constraints.iter().zip(ray).map(|(c, y)| c.rhs * y).sum();
    (by, block_min_eig(&z))
}

// ---------------------------------------------------------------------------
// interior-point loop

struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let l = x.clone().cholesky()?.l();
    let r = s.clone().cholesky()?.l();
    let svd = mtm(&r, &l).svd(false, true);
    let vt = svd.v_t?;
    let d = svd.singular_values;
    if d.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let mut g = mmt(&l, &vt);
    for j in 0..n {
        g.column_mut(j).scale_mut(d[j].powf(-0.5));
    }
    let mut dvt = vt.clone();
    for i in 0..n {
        dvt.row_mut(i).scale_mut(d[i].sqrt());
    }
    let l_inv = l.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let g_inv = mm(&dvt, &l_inv);
    let mut w = mmt(&g, &g);
    symmetrize(&mut w);
    Some(Scaling { g, g_inv, w, d })
}

/// Largest step in `[0, inf)` keeping `M + a*D ⪰ 0`, for `M ≻ 0`.
fn max_step(m: &DMatrix<f64>, dm: &DMatrix<f64>) -> f64 {
    let Some(ch) = m.clone().cholesky() else {
        return 0.0;
    };
    let l = ch.l();
    let Some(half) = l.solve_lower_triangular(dm) else {
        return 0.0;
    };
    let Some(mut t) = l.solve_lower_triangular(&half.transpose()) else {
        return 0.0;
    };
    symmetrize(&mut t);
    let lmin = t.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn block_max_step(m: &BlockMatrix, dm: &BlockMatrix) -> f64 {
    m.iter()
        .zip(dm)
        .filter(|(b, _)| b.nrows() > 0)
        .map(|(b, d)| max_step(b, d))
        .fold(f64::INFINITY, f64::min)
}

struct Workspace<'a> {
    blocks: &'a [usize],
    a: Vec<Vec<SymEntry>>,
    c: BlockMatrix,
    b: DVector<f64>,
    scales: Vec<f64>,
}

impl Workspace<'_> {
    fn row_inner(row: &[SymEntry], x: &BlockMatrix) -> f64 {
        row.iter()
            .map(|e| {
                let v = x[e.block][(e.row, e.col)];
                if e.row == e.col { e.value * v } else { 2.0 * e.value * v }
            })
            .sum()
    }

    fn apply_a(&self, x: &BlockMatrix) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|r| Self::row_inner(r, x)))
    }

    fn apply_at(&self, y: &DVector<f64>) -> BlockMatrix {
        let mut out = zeros_like(self.blocks);
        for (row, &yi) in self.a.iter().zip(y.iter()) {
            if yi == 0.0 {
                continue;
            }
            for e in row {
                let m = &mut out[e.block];
                m[(e.row, e.col)] += yi * e.value;
                if e.row != e.col {
                    m[(e.col, e.row)] += yi * e.value;
                }
            }
        }
        out
    }

    /// `M_ij = <A_i, W A_j W>` from the sparse rows.
    fn schur(&self, w: &BlockMatrix) -> DMatrix<f64> {
        let m = self.a.len();
        let mut out = DMatrix::<f64>::zeros(m, m);
        let half = |e: &SymEntry| if e.row == e.col { 0.5 * e.value } else { e.value };
        for i in 0..m {
            for j in i..m {
                let mut v = 0.0;
                for e in &self.a[i] {
                    let fe = half(e);
                    for f in &self.a[j] {
                        if f.block != e.block {
                            continue;
                        }
                        let wb = &w[e.block];
                        let (r, c, p, q) = (e.row, e.col, f.row, f.col);
                        v += fe * half(f) * (wb[(c, p)] * wb[(q, r)] + wb[(c, q)] * wb[(p, r)]);
                    }
                }
                out[(i, j)] = 2.0 * v;
                out[(j, i)] = 2.0 * v;
            }
        }
        out
    }

    /// `b - A(X)` mapped back to original row scaling.
    fn primal_residual_norm(&self, rp: &DVector<f64>) -> f64 {
        rp.iter()
            .zip(&self.scales)
            .map(|(r, s)| (r * s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn wmw(w: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = mm(&mm(w, m), w);
    symmetrize(&mut out);
    out
}

/// Solves an SDP. Deterministic for identical inputs.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let (scaled, report) = presolve(problem);
    let blocks = &problem.blocks;
    let nb_total: usize = blocks.iter().sum();

    if let Some(reason) = &report.infeasible {
        debug!("presolve infeasible: {reason}");
        return Ok(finish(
            problem,
            &report,
            SolveStatus::PrimalInfeasible,
            zeros_like(blocks),
            DVector::zeros(scaled.constraints.len()),
            zeros_like(blocks),
            0,
            report.ray.clone(),
            None,
        ));
    }

    let ws = Workspace {
        blocks,
        a: scaled.constraints.iter().map(|c| c.entries.clone()).collect(),
        c: scaled.dense_objective(),
        b: DVector::from_iterator(scaled.constraints.len(), scaled.constraints.iter().map(|c| c.rhs)),
        scales: report.scales.clone(),
    };
    let m = ws.a.len();
    let b_orig_norm = problem.constraints.iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt();
    let c_norm = fro(&ws.c);

    // per-block starting point scaled to the data
    let mut x = Vec::with_capacity(blocks.len());
    let mut s = Vec::with_capacity(blocks.len());
    for (k, &nk) in blocks.iter().enumerate() {
        let sq = (nk as f64).sqrt();
        let mut xi = 10f64.max(sq);
        let mut eta = 10f64.max(sq).max(ws.c[k].norm());
        for (row, &bi) in ws.a.iter().zip(ws.b.iter()) {
            let nrm = row
                .iter()
                .filter(|e| e.block == k)
                .map(|e| if e.row == e.col { e.value * e.value } else { 2.0 * e.value * e.value })
                .sum::<f64>()
                .sqrt();
            xi = xi.max(sq * (1.0 + bi.abs()) / (1.0 + nrm));
            eta = eta.max(nrm);
        }
        x.push(DMatrix::identity(nk, nk) * xi);
        s.push(DMatrix::identity(nk, nk) * eta);
    }
    let mut y = DVector::<f64>::zeros(m);

    let mut status = SolveStatus::MaxIterations;
    let mut primal_ray = None;
    let mut dual_ray = None;
    let mut iter = 0;
    let mut best_acceptable: Option<(BlockMatrix, DVector<f64>, BlockMatrix)> = None;
    let mut best_err = f64::INFINITY;

    loop {
        let ax = ws.apply_a(&x);
        let rp = &ws.b - &ax;
        let aty = ws.apply_at(&y);
        let mut rd = ws.c.clone();
        axpy(&mut rd, -1.0, &s);
        axpy(&mut rd, -1.0, &aty);
        let pobj = inner(&ws.c, &x);
        let dobj = ws.b.dot(&y);
        let mu = inner(&x, &s) / nb_total.max(1) as f64;
        let relp = ws.primal_residual_norm(&rp) / (1.0 + b_orig_norm);
        let reld = fro(&rd) / (1.0 + c_norm);
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let err = relp.max(reld).max(relgap);
        debug!("iter {iter}: pobj {pobj:.10e} dobj {dobj:.10e} relp {relp:.2e} reld {reld:.2e} gap {relgap:.2e}");

        if err <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if err <= opts.accept_tol && err <= best_err {
            best_acceptable = Some((x.clone(), y.clone(), s.clone()));
        }
        if best_acceptable.is_some() && err > 100.0 * best_err {
            debug!("iterates degrading (err {err:.2e} vs best {best_err:.2e}); stopping");
            break;
        }
        best_err = best_err.min(err);

        // Farkas rays from the current iterate. A nearly feasible X rules a
        // ray out: with S = C - A'y, (S - C)/b'y passes the test on its own
        // once b'y dwarfs |C|.
        if dobj > 0.0 && relp > opts.tol {
            let z = ws.apply_at(&(-&y / dobj));
            if block_min_eig(&z) >= -opts.infeasibility_tol {
                status = SolveStatus::PrimalInfeasible;
                primal_ray = Some(&y / dobj);
                break;
            }
        }
        if pobj < 0.0 {
            let xr: BlockMatrix = x.iter().map(|b| b / (-pobj)).collect();
            let ar = ws.apply_a(&xr);
            if ar.norm() <= opts.infeasibility_tol {
                status = SolveStatus::DualInfeasible;
                dual_ray = Some(xr);
                break;
            }
        }

        if iter >= opts.max_iter {
            break;
        }
        iter += 1;

        // scaling per block
        let mut sc = Vec::with_capacity(blocks.len());
        let mut ok = true;
        for (xb, sb) in x.iter().zip(&s) {
            if xb.nrows() == 0 {
                sc.push(Scaling {
                    g: xb.clone(),
                    g_inv: xb.clone(),
                    w: xb.clone(),
                    d: DVector::zeros(0),
                });
                continue;
            }
            match nt_scaling(xb, sb) {
                Some(v) => sc.push(v),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            warn!("NT scaling failed at iteration {iter}");
            status = SolveStatus::NumericalFailure;
            break;
        }
        let w: BlockMatrix = sc.iter().map(|v| v.w.clone()).collect();

        let schur = ws.schur(&w);
        let chol = match schur.clone().cholesky() {
            Some(c) => Some(c),
            None => {
                let bump = 1e-14 * schur.diagonal().amax().max(1e-300);
                let mut reg = schur.clone();
                for i in 0..m {
                    reg[(i, i)] += bump;
                }
                reg.cholesky()
            }
        };
        let Some(chol) = chol else {
            warn!("Schur complement not positive definite at iteration {iter}");
            status = SolveStatus::NumericalFailure;
            break;
        };

        let w_rd_w: BlockMatrix = rd.iter().zip(&w).map(|(r, wb)| wmw(wb, r)).collect();
        let a_wrdw = ws.apply_a(&w_rd_w);

        let direction = |rc: &BlockMatrix| -> (BlockMatrix, DVector<f64>, BlockMatrix) {
            let rhs = &rp - ws.apply_a(rc) + &a_wrdw;
            let mut dy = chol.solve(&rhs);
            let mut ds = rd.clone();
            axpy(&mut ds, -1.0, &ws.apply_at(&dy));
            let mut dx = rc.clone();
            for ((dxb, dsb), wb) in dx.iter_mut().zip(&ds).zip(&w) {
                *dxb -= wmw(wb, dsb);
            }
            // refinement: shifting (dx, dy, ds) by (W A'z W, z, -A'z) keeps the
            // dual and complementarity equations and moves A dx by M z
            let target = rp.norm().max(f64::MIN_POSITIVE);
            let mut r = &rp - ws.apply_a(&dx);
            for _ in 0..3 {
                if r.norm() <= 1e-14 * target {
                    break;
                }
                let z = chol.solve(&r);
                let atz = ws.apply_at(&z);
                let mut dx2 = dx.clone();
                for ((dxb, ab), wb) in dx2.iter_mut().zip(&atz).zip(&w) {
                    *dxb += wmw(wb, ab);
                }
                let r2 = &rp - ws.apply_a(&dx2);
                if r2.norm() >= r.norm() {
                    break;
                }
                dx = dx2;
                dy += &z;
                axpy(&mut ds, -1.0, &atz);
                r = r2;
            }
            (dx, dy, ds)
        };

        // predictor
        let rc_aff: BlockMatrix = x.iter().map(|b| -b.clone()).collect();
        let (dx_a, _dy_a, ds_a) = direction(&rc_aff);
        let ap = block_max_step(&x, &dx_a).min(1.0);
        let ad = block_max_step(&s, &ds_a).min(1.0);
        let mut xa = x.clone();
        axpy(&mut xa, ap, &dx_a);
        let mut sa = s.clone();
        axpy(&mut sa, ad, &ds_a);
        let mu_aff = inner(&xa, &sa) / nb_total.max(1) as f64;
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = (mu_aff / mu).max(0.0).powf(expon).min(1.0);

        // corrector in the scaled space, where X and S both equal diag(d)
        let rc: BlockMatrix = sc
            .iter()
            .zip(dx_a.iter().zip(&ds_a))
            .map(|(v, (dxb, dsb))| {
                let n = v.d.len();
                if n == 0 {
                    return DMatrix::zeros(0, 0);
                }
                let dxs = mmt(&mm(&v.g_inv, dxb), &v.g_inv);
                let dss = mm(&mtm(&v.g, dsb), &v.g);
                let corr = (mm(&dxs, &dss) + mm(&dss, &dxs)) * 0.5;
                let h = DMatrix::from_fn(n, n, |i, j| {
                    let mut r = -corr[(i, j)];
                    if i == j {
                        r += sigma * mu - v.d[i] * v.d[i];
                    }
                    2.0 * r / (v.d[i] + v.d[j])
                });
                let mut out = mmt(&mm(&v.g, &h), &v.g);
                symmetrize(&mut out);
                out
            })
            .collect();
        let (dx, dy, ds) = direction(&rc);
        let ap_max = block_max_step(&x, &dx);
        let ad_max = block_max_step(&s, &ds);
        let gamma = 0.9 + 0.09 * ap_max.min(ad_max).min(1.0);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);

        if ap < 1e-10 && ad < 1e-10 {
            warn!("step length floor reached at iteration {iter}");
            status = SolveStatus::NumericalFailure;
            break;
        }
        axpy(&mut x, ap, &dx);
        axpy(&mut s, ad, &ds);
        y += &dy * ad;
        for b in x.iter_mut().chain(s.iter_mut()) {
            symmetrize(b);
        }
    }

    if status != SolveStatus::Optimal
        && status != SolveStatus::PrimalInfeasible
        && status != SolveStatus::DualInfeasible
    {
        if let Some((bx, by, bs)) = best_acceptable {
            x = bx;
            y = by;
            s = bs;
            status = SolveStatus::Optimal;
        }
    }

    // unscale the ray onto original rows
    let primal_ray = primal_ray.map(|r: DVector<f64>| {
        let mut full = vec![0.0; problem.constraints.len()];
        for ((&k, &sc), v) in report.kept.iter().zip(&report.scales).zip(r.iter()) {
            full[k] = v / sc;
        }
        full
    });
    Ok(finish(problem, &report, status, x, y, s, iter, primal_ray, dual_ray))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &SdpProblem,
    report: &PresolveReport,
    status: SolveStatus,
    x: BlockMatrix,
    y_scaled: DVector<f64>,
    s: BlockMatrix,
    iterations: usize,
    primal_ray: Option<Vec<f64>>,
    dual_ray: Option<BlockMatrix>,
) -> SdpSolution {
    let mut y = vec![0.0; problem.constraints.len()];
    for ((&k, &sc), v) in report.kept.iter().zip(&report.scales).zip(y_scaled.iter()) {
        y[k] = v / sc;
    }
    let r = substitution_residuals(problem, &x, &y, &s);
    SdpSolution {
        status,
        x,
        y,
        s,
        primal_objective: r.primal_objective,
        dual_objective: r.dual_objective,
        primal_residual: r.primal,
        dual_residual: r.dual,
        relative_gap: r.relative_gap,
        iterations,
        primal_ray,
        dual_ray,
        presolve: report.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e11_problem() -> SdpProblem {
        // min <I, X> s.t. X_00 = 1, X ⪰ 0 (2x2)
        let mut p = SdpProblem::new(vec![2]);
        p.objective = vec![SymEntry::new(0, 0, 0, 1.0), SymEntry::new(0, 1, 1, 1.0)];
        p.constraints.push(Constraint {
            entries: vec![SymEntry::new(0, 0, 0, 1.0)],
            rhs: 1.0,
        });
        p
    }

    #[test]
    fn trace_minimization() {
        let sol = solve(&e11_problem(), &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-7);
        assert!((sol.x[0][(0, 0)] - 1.0).abs() < 1e-7);
        assert!(sol.x[0][(1, 1)].abs() < 1e-7);
        assert!(sol.primal_residual <= 1e-8);
        assert!(sol.dual_residual <= 1e-8);
        assert!(sol.relative_gap <= 1e-8);
    }

    #[test]
    fn presolve_duplicate_and_clean() {
        let mut p = e11_problem();
        let (_, rep) = presolve(&p);
        assert!(rep.is_identity());
        p.constraints.push(p.constraints[0].clone());
        let (q, rep) = presolve(&p);
        assert_eq!(rep.dropped, vec![1]);
        assert_eq!(q.constraints.len(), 1);
        assert!(rep.infeasible.is_none());
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn presolve_zero_row_with_rhs() {
        let mut p = e11_problem();
        p.constraints.push(Constraint {
            entries: vec![],
            rhs: 2.0,
        });
        let (_, rep) = presolve(&p);
        assert!(rep.infeasible.is_some());
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        let (by, lmin) = check_primal_ray(&p, sol.primal_ray.as_ref().unwrap());
        assert!((by - 1.0).abs() < 1e-12);
        assert!(lmin >= -1e-12);
    }

    #[test]
    fn scaled_rows_are_unit_norm() {
        let mut p = e11_problem();
        p.constraints[0].entries[0].value = 4.0;
        p.constraints[0].rhs = 4.0;
        let (q, rep) = presolve(&p);
        assert_eq!(rep.scales, vec![4.0]);
        assert_eq!(q.constraints[0].entries[0].value, 1.0);
        assert!(!rep.is_identity());
    }

    #[test]
    fn sdpa_round_trip() {
        let p = e11_problem();
        let text = p.to_sdpa();
        let q = SdpProblem::from_sdpa(text.as_bytes()).unwrap();
        assert_eq!(p, q);
        assert!(SdpProblem::from_sdpa("1\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn unbounded_primal_is_dual_infeasible() {
        // min -X_00 subject to X_01 = 0: X_00 can grow without bound
        let mut p = SdpProblem::new(vec![2]);
        p.objective = vec![SymEntry::new(0, 0, 0, -1.0)];
        p.constraints.push(Constraint {
            entries: vec![SymEntry::new(0, 0, 1, 0.5)],
            rhs: 0.0,
        });
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
    }

    #[test]
    fn invalid_entry_rejected() {
        let mut p = e11_problem();
        p.objective.push(SymEntry::new(0, 0, 5, 1.0));
        assert!(solve(&p, &SolverOptions::default()).is_err());
    }
}
