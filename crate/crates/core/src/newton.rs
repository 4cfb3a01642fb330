//! Iteration drivers: the order-`d` Newton method, its globally convergent
//! odd-order variant, and the classical Newton baseline.

use log::{debug, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::FunctionOracle;
use crate::linalg;
use crate::poly::{even_norm_power, factorial, Polynomial};
use crate::sos::{
    self, lasserre_minimize, min_t_bar_centered, min_t_centered, CertificateReport, SosConvexCertificate,
    SosOptions,
};

/// Which surrogate a step minimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Hessian positive definite: Taylor polynomial plus the smallest
    /// sos-convexifying multiple of `|x - x_k|^d'`.
    PD,
    /// Hessian not positive definite: the Taylor polynomial is first shifted
    /// by `(eps - λ_min)/2 |x - x_k|^2`.
    Shifted,
    /// Odd-order globally convergent step with weight `max(dM/(d+1)!, t)`.
    Global,
    /// Classical Newton step on the quadratic model.
    Classical,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::PD => "pd",
            Branch::Shifted => "shifted",
            Branch::Global => "global",
            Branch::Classical => "classical",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub lambda_min: f64,
    /// Hessian counted as positive definite although `λ_min <= 1e-12`.
    pub near_singular: bool,
    /// The PD program reported infeasible and the step fell back to the
    /// shifted program.
    pub pd_fallback: bool,
    pub regularization_iterations: usize,
    pub lasserre_iterations: usize,
    pub certificate: Option<CertificateReport>,
    /// `|∇ surrogate(next)|`
    pub surrogate_grad_norm: f64,
    pub surrogate_scale: f64,
    /// `|∇f(next)|`
    pub grad_norm_next: f64,
    /// Lower bound from the moment relaxation, in centered coordinates.
    pub gamma_star: Option<f64>,
}

/// Everything computed during one iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepReport {
    pub center: Vec<f64>,
    pub branch: Branch,
    /// Order-`d` Taylor polynomial in original coordinates.
    pub taylor: Polynomial,
    /// `t`, `t̄`, or the global weight.
    pub weight: f64,
    pub eps_used: Option<f64>,
    pub dprime: u32,
    /// Surrogate in original coordinates.
    pub surrogate: Polynomial,
    /// Surrogate in coordinates centered at `center`; this is the polynomial
    /// the certificate refers to.
    pub surrogate_centered: Polynomial,
    pub certificate: Option<SosConvexCertificate>,
    pub next: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

/// Independent re-check of a stored step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    /// `None` for classical steps, which carry no certificate.
    pub certificate: Option<CertificateReport>,
    /// `|∇ surrogate(next)|`, recomputed from the stored surrogate.
    pub grad_norm: f64,
    pub grad_tolerance: f64,
    pub valid: bool,
}

impl StepReport {
    /// Recomputes the certificate residuals and the stationarity of `next`
    /// from the stored polynomials, without trusting the diagnostics.
    pub fn check(&self) -> StepCheck {
        let certificate = self.certificate.as_ref().map(|c| {
            let mut r = c.verify();
            if c.polynomial != self.surrogate_centered {
                r.valid = false;
            }
            r
        });
        let h: Vec<f64> = self.next.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let (grad_norm, grad_tolerance) = if h.len() == self.surrogate_centered.dim() {
            (
                self.surrogate_centered.eval_grad(&h).norm(),
                sos::stationarity_tolerance(&self.surrogate_centered),
            )
        } else {
            (f64::NAN, 0.0)
        };
        let valid = certificate.as_ref().is_none_or(|r| r.valid) && grad_norm <= grad_tolerance;
        StepCheck {
            certificate,
            grad_norm,
            grad_tolerance,
            valid,
        }
    }
}

/// Smallest even integer greater than `d`.
pub fn dprime_for(d: u32) -> u32 {
    if d % 2 == 1 {
        d + 1
    } else {
        d + 2
    }
}

fn neg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -v).collect()
}

fn finish_step(
    f: &FunctionOracle,
    x_k: &[f64],
    branch: Branch,
    taylor_c: &Polynomial,
    reg: sos::Regularization,
    weight: f64,
    eps_used: Option<f64>,
    dprime: u32,
    mut diagnostics: StepDiagnostics,
    opts: &SosOptions,
) -> Result<StepReport> {
    let surrogate_c = reg.certificate.polynomial.clone();
    let lasserre = lasserre_minimize(&surrogate_c, opts)?;
    let next: Vec<f64> = x_k.iter().zip(&lasserre.minimizer).map(|(a, h)| a + h).collect();
    diagnostics.regularization_iterations = reg.solver_iterations;
    diagnostics.lasserre_iterations = lasserre.solver_iterations;
    diagnostics.certificate = Some(reg.certificate.verify());
    diagnostics.surrogate_grad_norm = lasserre.grad_norm;
    diagnostics.surrogate_scale = lasserre.scale;
    diagnostics.gamma_star = Some(lasserre.gamma_star);
    diagnostics.grad_norm_next = match f.gradient(&next) {
        Ok(g) => g.norm(),
        Err(_) => f64::NAN,
    };
    let shift = neg(x_k);
    Ok(StepReport {
        center: x_k.to_vec(),
        branch,
        taylor: taylor_c.translate(&shift)?,
        weight,
        eps_used,
        dprime,
        surrogate: surrogate_c.translate(&shift)?,
        surrogate_centered: surrogate_c,
        certificate: Some(reg.certificate),
        next,
        diagnostics,
    })
}

/// One iteration of the order-`d` method from `x_k`.
pub fn step_order_d(f: &FunctionOracle, x_k: &[f64], d: u32, eps: f64, opts: &SosOptions) -> Result<StepReport> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("order must be at least 3, got {d}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let jet = f.jet(x_k, d)?;
    let taylor_c = jet.to_centered_polynomial();
    let lambda_min = linalg::min_eigenvalue(&jet.hessian());
    let dprime = dprime_for(d);
    let mut diag = StepDiagnostics {
        lambda_min,
        ..StepDiagnostics::default()
    };

    if lambda_min > 0.0 {
        diag.near_singular = lambda_min <= 1e-12;
        match min_t_centered(&taylor_c, dprime, opts) {
            Ok(reg) => {
                let w = reg.weight;
                return finish_step(f, x_k, Branch::PD, &taylor_c, reg, w, None, dprime, diag, opts);
            }
            Err(Error::Infeasible(msg)) => {
                warn!("PD program infeasible at {x_k:?} (λ_min = {lambda_min:e}): {msg}; using shifted program");
                diag.pd_fallback = true;
            }
            Err(e) => return Err(e),
        }
    }
    let reg = min_t_bar_centered(&taylor_c, eps, lambda_min, dprime, opts)?;
    let w = reg.weight;
    finish_step(f, x_k, Branch::Shifted, &taylor_c, reg, w, Some(eps), dprime, diag, opts)
}

/// One iteration of the globally convergent odd-order method.
///
/// `lipschitz` bounds the Lipschitz constant of the `d`-th derivative.
pub fn step_global(
    f: &FunctionOracle,
    x_k: &[f64],
    d: u32,
    lipschitz: f64,
    opts: &SosOptions,
) -> Result<StepReport> {
    if d % 2 == 0 || d < 3 {
        return Err(Error::InvalidArgument(format!("global method needs odd d >= 3, got {d}")));
    }
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(Error::InvalidArgument(format!("Lipschitz bound must be nonnegative, got {lipschitz}")));
    }
    let jet = f.jet(x_k, d)?;
    let taylor_c = jet.to_centered_polynomial();
    let lambda_min = linalg::min_eigenvalue(&jet.hessian());
    if lambda_min <= 0.0 {
        return Err(Error::Precondition(format!(
            "global step needs a positive definite Hessian, λ_min = {lambda_min:e} at {x_k:?}"
        )));
    }
    let dprime = d + 1;
    let reg = match min_t_centered(&taylor_c, dprime, opts) {
        Ok(r) => r,
        Err(Error::Infeasible(msg)) => {
            return Err(Error::Precondition(format!("regularization program infeasible: {msg}")))
        }
        Err(e) => return Err(e),
    };
    let floor = f64::from(d) * lipschitz / factorial(d + 1);
    let weight = floor.max(reg.weight);
    let n = f.dim();
    let surrogate_c = taylor_c.add(&even_norm_power(n, &vec![0.0; n], dprime)?.scale(weight))?;
    let certified = if weight > reg.weight {
        // strictly inside the cone: certify the heavier surrogate directly
        let certificate = sos::sosconvex_certificate(&surrogate_c, opts)?.ok_or_else(|| Error::Solver {
            status: crate::sdp::SolveStatus::PrimalInfeasible,
            detail: "weighted surrogate reported not sos-convex".into(),
        })?;
        sos::Regularization {
            weight,
            certificate,
            solver_iterations: reg.solver_iterations,
        }
    } else {
        reg
    };
    let diag = StepDiagnostics {
        lambda_min,
        ..StepDiagnostics::default()
    };
    let report = finish_step(f, x_k, Branch::Global, &taylor_c, certified, weight, None, dprime, diag, opts)?;
    let fk = f.value(x_k)?;
    let fnext = f.value(&report.next)?;
    if fnext > fk + 1e-10 * fk.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "descent violated: f(next) = {fnext:e} > f(x_k) = {fk:e}; is M a valid Lipschitz bound?"
        )));
    }
    Ok(report)
}

/// `x_k - ∇²f(x_k)^{-1} ∇f(x_k)`.
pub fn classical_newton_step(f: &FunctionOracle, x_k: &[f64]) -> Result<Vec<f64>> {
    let jet = f.jet(x_k, 2)?;
    let g = jet.gradient();
    let h = jet.hessian();
    let lu = h.lu();
    let step = lu
        .solve(&g)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("Hessian singular at {x_k:?}")))?;
    Ok(x_k.iter().zip(step.iter()).map(|(a, s)| a - s).collect())
}

fn classical_report(f: &FunctionOracle, x_k: &[f64]) -> Result<StepReport> {
    let jet = f.jet(x_k, 2)?;
    let next = classical_newton_step(f, x_k)?;
    let taylor_c = jet.to_centered_polynomial();
    let shift = neg(x_k);
    let taylor = taylor_c.translate(&shift)?;
    let diagnostics = StepDiagnostics {
        lambda_min: linalg::min_eigenvalue(&jet.hessian()),
        surrogate_grad_norm: taylor.eval_grad(&next).norm(),
        surrogate_scale: taylor_c.max_abs_coeff().max(1.0),
        grad_norm_next: f.gradient(&next).map(|g| g.norm()).unwrap_or(f64::NAN),
        ..StepDiagnostics::default()
    };
    Ok(StepReport {
        center: x_k.to_vec(),
        branch: Branch::Classical,
        surrogate: taylor.clone(),
        surrogate_centered: taylor_c,
        taylor,
        weight: 0.0,
        eps_used: None,
        dprime: 2,
        certificate: None,
        next,
        diagnostics,
    })
}

/// Iteration scheme for [`minimize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Order-`d` method, `d >= 3`.
    Hon { d: u32 },
    /// Odd-order global method with Lipschitz bound `lipschitz`.
    Global { d: u32, lipschitz: f64 },
    Classical,
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub eps: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Runs whose iterate norm exceeds this are declared divergent.
    pub divergence_radius: f64,
    pub sos: SosOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            eps: 0.01,
            grad_tol: 1e-10,
            max_iter: 100,
            divergence_radius: 1e8,
            sos: SosOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    MaxIter,
    SolverFailure,
    Diverged,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trace {
    pub function: String,
    pub method: Method,
    pub iterates: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub steps: Vec<StepReport>,
    pub termination: Termination,
    pub error: Option<String>,
}

impl Trace {
    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("trace holds the start point")
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// One row per iterate: `k, x_1..x_n, f, grad_norm, t, branch`. The
    /// weight and branch describe the step taken from that iterate and are
    /// empty on the last row.
    pub fn to_csv(&self) -> String {
        let n = self.iterates.first().map_or(0, Vec::len);
        let mut out = String::from("k");
        for i in 0..n {
            out.push_str(&format!(",x{}", i + 1));
        }
        out.push_str(",f,grad_norm,t,branch\n");
        for (k, x) in self.iterates.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in x {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            for v in [self.values.get(k), self.grad_norms.get(k)] {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&fmt17(*v));
                }
            }
            match self.steps.get(k) {
                Some(s) => out.push_str(&format!(",{},{}\n", fmt17(s.weight), s.branch.label())),
                None => out.push_str(",,\n"),
            }
        }
        out
    }
}

/// Fixed 17-significant-digit float formatting used by every CSV writer.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs one method from `x0` until the gradient norm drops to `grad_tol`,
/// the iteration cap, divergence, or a failure.
pub fn minimize(f: &FunctionOracle, x0: &[f64], method: Method, opts: &NewtonOptions) -> Result<Trace> {
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: x0.len(),
        });
    }
    match method {
        Method::Hon { d } if d < 3 => {
            return Err(Error::InvalidArgument(format!("order must be at least 3, got {d}")))
        }
        Method::Global { d, .. } if d % 2 == 0 || d < 3 => {
            return Err(Error::InvalidArgument(format!("global method needs odd d >= 3, got {d}")))
        }
        _ => {}
    }
    let mut trace = Trace {
        function: f.name().to_string(),
        method,
        iterates: vec![x0.to_vec()],
        values: Vec::new(),
        grad_norms: Vec::new(),
        steps: Vec::new(),
        termination: Termination::MaxIter,
        error: None,
    };
    let mut x = x0.to_vec();
    loop {
        let jet = match f.jet(&x, 1) {
            Ok(j) => j,
            Err(e) => {
                trace.termination = Termination::SolverFailure;
                trace.error = Some(e.to_string());
                break;
            }
        };
        let gnorm = jet.gradient().norm();
        trace.values.push(jet.value());
        trace.grad_norms.push(gnorm);
        if gnorm <= opts.grad_tol {
            trace.termination = Termination::GradTol;
            break;
        }
        if !gnorm.is_finite() || DVector::from_column_slice(&x).norm() > opts.divergence_radius {
            trace.termination = Termination::Diverged;
            break;
        }
        if trace.steps.len() >= opts.max_iter {
            trace.termination = Termination::MaxIter;
            break;
        }
        let step = match method {
            Method::Hon { d } => step_order_d(f, &x, d, opts.eps, &opts.sos),
            Method::Global { d, lipschitz } => step_global(f, &x, d, lipschitz, &opts.sos),
            Method::Classical => classical_report(f, &x),
        };
        match step {
            Ok(s) => {
                debug!("step {}: {:?} -> {:?} ({:?})", trace.steps.len(), x, s.next, s.branch);
                x = s.next.clone();
                trace.iterates.push(x.clone());
                trace.steps.push(s);
            }
            Err(e) => {
                debug!("step failed at {x:?}: {e}");
                trace.termination = match e {
                    Error::Singular(_) => Termination::Diverged,
                    _ => Termination::SolverFailure,
                };
                trace.error = Some(e.to_string());
                break;
            }
        }
    }
    Ok(trace)
}

/// Least-squares slope of `log e_{k+1}` against `log e_k` over consecutive
/// iterate errors that both lie in `(1e-13, 1e-1)`.
pub fn empirical_order(trace: &Trace, xstar: &[f64]) -> Result<f64> {
    empirical_order_in(trace, xstar, 1e-13, 1e-1)
}

/// [`empirical_order`] with an explicit error window.
pub fn empirical_order_in(trace: &Trace, xstar: &[f64], lo: f64, hi: f64) -> Result<f64> {
    pooled_order(std::slice::from_ref(trace), xstar, lo, hi)
}

/// Pools the qualifying error pairs of several runs into one regression.
///
/// At orders of four and up a single run rarely has more than one pair
/// inside the window before hitting roundoff.
pub fn empirical_order_pooled(traces: &[Trace], xstar: &[f64]) -> Result<f64> {
    pooled_order(traces, xstar, 1e-13, 1e-1)
}

fn pooled_order(traces: &[Trace], xstar: &[f64], lo: f64, hi: f64) -> Result<f64> {
    let usable = |e: f64| e > lo && e < hi;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for trace in traces {
        let errs: Vec<f64> = trace
            .iterates
            .iter()
            .map(|x| x.iter().zip(xstar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        pairs.extend(
            errs.windows(2)
                .filter(|w| usable(w[0]) && usable(w[1]))
                .map(|w| (w[0].ln(), w[1].ln())),
        );
    }
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} consecutive error pairs inside ({lo:e}, {hi:e}); need at least 2",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all usable errors are equal".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::MultiIndex;

    fn quadratic() -> FunctionOracle {
        // 1/2 x'Ax + b'x with A = [[3,1],[1,2]], b = (1,-1)
        let p = Polynomial::from_terms(
            2,
            [
                (MultiIndex::new(vec![2, 0]), 1.5),
                (MultiIndex::new(vec![1, 1]), 1.0),
                (MultiIndex::new(vec![0, 2]), 1.0),
                (MultiIndex::new(vec![1, 0]), 1.0),
                (MultiIndex::new(vec![0, 1]), -1.0),
            ],
        )
        .unwrap();
        FunctionOracle::polynomial("quad", p)
    }

    // -A^{-1} b with A^{-1} = [[2,-1],[-1,3]]/5
    const QUAD_MIN: [f64; 2] = [-0.6, 0.8];

    #[test]
    fn dprime_rule() {
        assert_eq!(dprime_for(3), 4);
        assert_eq!(dprime_for(4), 6);
        assert_eq!(dprime_for(5), 6);
    }

    #[test]
    fn sqrt1_first_step() {
        let s = step_order_d(&FunctionOracle::sqrt1(), &[1.5], 3, 0.01, &SosOptions::default()).unwrap();
        assert_eq!(s.branch, Branch::PD);
        let q: f64 = 3.25;
        let f2 = q.powf(-1.5);
        let f3 = -4.5 * q.powf(-2.5);
        let t = f3 * f3 / (48.0 * f2);
        assert!((t - 0.006817).abs() < 1e-6);
        assert!((s.weight - t).abs() < 1e-6 * t, "{} vs {t}", s.weight);
        assert!((s.next[0] + 0.2801).abs() < 1e-4, "{:?}", s.next);
        assert!(s.diagnostics.certificate.as_ref().unwrap().valid);
    }

    #[test]
    fn quadratic_one_step() {
        let f = quadratic();
        let s = step_order_d(&f, &[2.0, -3.0], 3, 0.01, &SosOptions::default()).unwrap();
        assert_eq!(s.branch, Branch::PD);
        assert!(s.weight.abs() < 1e-8);
        assert!((s.next[0] - QUAD_MIN[0]).abs() < 1e-7 && (s.next[1] - QUAD_MIN[1]).abs() < 1e-7);

        let c = classical_newton_step(&f, &[2.0, -3.0]).unwrap();
        assert!((c[0] - QUAD_MIN[0]).abs() < 1e-12 && (c[1] - QUAD_MIN[1]).abs() < 1e-12);

        let g = step_global(&f, &[2.0, -3.0], 3, 0.0, &SosOptions::default()).unwrap();
        assert!((g.next[0] - QUAD_MIN[0]).abs() < 1e-7);
    }

    #[test]
    fn concave_stationary_point_stays() {
        let f = FunctionOracle::polynomial("negsq", Polynomial::monomial(MultiIndex::new(vec![2]), -1.0));
        let s = step_order_d(&f, &[0.0], 3, 0.01, &SosOptions::default()).unwrap();
        assert_eq!(s.branch, Branch::Shifted);
        assert!((s.surrogate_centered.coeff(&MultiIndex::new(vec![2])) - 0.005).abs() < 1e-12);
        assert!(s.weight.abs() < 1e-8);
        assert!(s.next[0].abs() < 1e-8);
    }

    #[test]
    fn classical_on_sqrt1() {
        let f = FunctionOracle::sqrt1();
        for x in [0.3, -0.7, 1.5] {
            let n = classical_newton_step(&f, &[x]).unwrap()[0];
            assert!((n + x * x * x).abs() < 1e-12 * (1.0 + x.abs().powi(3)));
        }
        assert!((classical_newton_step(&f, &[1.5]).unwrap()[0] + 3.375).abs() < 1e-12);
        let flat = FunctionOracle::polynomial("cubic", Polynomial::monomial(MultiIndex::new(vec![3]), 1.0));
        assert!(matches!(classical_newton_step(&flat, &[0.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn empirical_order_of_exact_cubic_map() {
        let f = FunctionOracle::sqrt1();
        let opts = NewtonOptions::default();
        let t = minimize(&f, &[0.5], Method::Classical, &opts).unwrap();
        // only two iterates fall in the default window from 0.5
        assert!(empirical_order(&t, &[0.0]).is_err());
        let slope = empirical_order_in(&t, &[0.0], 1e-4, 1.0).unwrap();
        assert!((slope - 3.0).abs() < 0.2, "{slope}");
        let t = minimize(&f, &[0.4], Method::Classical, &opts).unwrap();
        let slope = empirical_order(&t, &[0.0]).unwrap();
        assert!((slope - 3.0).abs() < 1e-6, "{slope}");
    }

    #[test]
    fn quadratic_has_no_usable_order() {
        let f = quadratic();
        let t = minimize(&f, &[1.0, 1.0], Method::Hon { d: 3 }, &NewtonOptions::default()).unwrap();
        assert_eq!(t.termination, Termination::GradTol);
        assert!(t.num_steps() <= 2);
        assert!(matches!(empirical_order(&t, &QUAD_MIN), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn trace_csv_layout() {
        let t = minimize(&FunctionOracle::sqrt1(), &[1.5], Method::Hon { d: 3 }, &NewtonOptions::default()).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,x1,f,grad_norm,t,branch");
        assert_eq!(lines.len(), t.iterates.len() + 1);
        assert!(lines[1].starts_with("0,1.5000000000000000e0,"));
        assert!(lines[1].ends_with(",pd"));
        assert!(lines.last().unwrap().ends_with(",,"));
        let back: Trace = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back.iterates, t.iterates);
        assert_eq!(back.termination, Termination::GradTol);
    }

    #[test]
    fn argument_checks() {
        let f = FunctionOracle::sqrt1();
        let o = SosOptions::default();
        assert!(step_order_d(&f, &[1.0], 2, 0.01, &o).is_err());
        assert!(step_order_d(&f, &[1.0], 3, 0.0, &o).is_err());
        assert!(step_global(&f, &[1.0], 4, 1.0, &o).is_err());
        assert!(minimize(&f, &[1.0, 2.0], Method::Classical, &NewtonOptions::default()).is_err());
        let concave = FunctionOracle::polynomial("negsq", Polynomial::monomial(MultiIndex::new(vec![2]), -1.0));
        assert!(matches!(step_global(&concave, &[1.0], 3, 1.0, &o), Err(Error::Precondition(_))));
    }
}
