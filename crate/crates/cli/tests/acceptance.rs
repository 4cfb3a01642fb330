//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are expected to fail; see the README.
//! The full 41×41 Beale comparison runs when `HONEWTON_FULL_BASIN=1`; the
//! default is the 21×21 smoke grid.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use honewton::jets::{univariate_derivative_bound, FunctionOracle};
use honewton::newton::{self, Method, NewtonOptions, StepCheck, StepReport, Termination, Trace};
use honewton::poly::{MultiIndex, PolyMatrix, Polynomial};
use honewton::sos::{self, SosOptions};
use honewton::univariate::{self, basin_radius, beta_closed_form, converges_from};
use honewton_cli::{basin_scan, radius_table, BasinSettings, RadiusSettings};

/// The d = 5 radius of the SDP pipeline is about 10.07, not 5.9.
const KNOWN_FAILURES: &[usize] = &[3];

#[derive(Default)]
struct Audit {
    steps: usize,
    worst_residual: f64,
    worst_eig: f64,
    worst_grad_ratio: f64,
    failures: Vec<String>,
}

impl Audit {
    fn new() -> Self {
        Audit {
            worst_eig: f64::INFINITY,
            ..Audit::default()
        }
    }

    fn record(&mut self, source: &str, c: &StepCheck) {
        self.steps += 1;
        if let Some(r) = &c.certificate {
            self.worst_residual = self.worst_residual.max(r.residual);
            self.worst_eig = self.worst_eig.min(r.min_eig);
        }
        self.worst_grad_ratio = self.worst_grad_ratio.max(c.grad_norm / c.grad_tolerance);
        if !c.valid && self.failures.len() < 20 {
            self.failures.push(format!("{source}: {c:?}"));
        }
    }

    fn trace(&mut self, source: &str, t: &Trace) {
        for s in &t.steps {
            self.record(source, &s.check());
        }
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// test-side closed-form derivatives

fn sqrt1_derivs(x: f64) -> (f64, f64, f64) {
    let r = x * x + 1.0;
    (x / r.sqrt(), r.powf(-1.5), -3.0 * x * r.powf(-2.5))
}

fn atan1_derivs(x: f64) -> (f64, f64, f64) {
    let r = 1.0 + x * x;
    (2.0 * x.atan() + 0.2 * x, 2.0 / r + 0.2, -4.0 * x / (r * r))
}

/// The third-order step written out from the closed form.
fn n3_reference(x: f64, (f1, f2, f3): (f64, f64, f64)) -> f64 {
    if f3.abs() <= 1e-12 {
        return x - f1 / f2;
    }
    let z = (f1 - 2.0 / 3.0 * f2 * f2 / f3) / (f3 * f3 / (12.0 * f2));
    x - 2.0 * f2 / f3 - z.signum() * z.abs().powf(1.0 / 3.0)
}

fn hon(d: u32) -> Method {
    Method::Hon { d }
}

fn c1() -> Outcome {
    let t = Instant::now();
    let f = FunctionOracle::sqrt1();
    let map = |x: f64| univariate::n2_step(&f, x).ok();
    let r = basin_radius(&map, 0.0, 0.5, 2.0, 200, 1e-9).unwrap();
    let e = t.elapsed();
    outcome((r - 1.0).abs() <= 1e-4 && within(e, 1.0), format!("radius {r:.6} in {e:.2?}"))
}

fn c2() -> Outcome {
    let t = Instant::now();
    let f = FunctionOracle::sqrt1();
    let map = |x: f64| univariate::n3_step(&f, x).ok();
    let r = basin_radius(&map, 0.0, 2.0, 4.0, 200, 1e-9).unwrap();
    let beta = beta_closed_form();
    let e = t.elapsed();
    let pass = (r - 3.407).abs() <= 0.005 && (beta.re - r).abs() <= 1e-3 && beta.im.abs() < 1e-9 && within(e, 5.0);
    outcome(pass, format!("bisection {r:.6}, closed form {:.6}{:+.1e}i in {e:.2?}", beta.re, beta.im))
}

fn c3(audit: &Mutex<Audit>) -> Outcome {
    let t = Instant::now();
    let f = FunctionOracle::sqrt1();
    let observe = |s: &StepReport| audit.lock().unwrap().record("radius", &s.check());
    let rows = radius_table(&f, &[4, 5], &RadiusSettings::default(), &SosOptions::default(), &observe).unwrap();
    let e = t.elapsed();
    let r4 = rows.iter().find(|r| r.d == 4).unwrap().radius;
    let r5 = rows.iter().find(|r| r.d == 5).unwrap().radius;
    let pass = (r4 - 4.5).abs() <= 0.2 && (r5 - 5.9).abs() <= 0.2 && within(e, 600.0);
    outcome(pass, format!("d=4 radius {r4:.4} (4.5±0.2), d=5 radius {r5:.4} (5.9±0.2) in {e:.2?}"))
}

fn c4(audit: &Mutex<Audit>) -> Outcome {
    let t = Instant::now();
    let f = FunctionOracle::sqrt1();
    let tr = newton::minimize(&f, &[5.9], hon(5), &NewtonOptions::default()).unwrap();
    audit.lock().unwrap().trace("d5 from 5.9", &tr);
    let first = tr.iterates.iter().position(|x| x[0].abs() <= 1e-12);
    let e = t.elapsed();
    let pass = first.is_some_and(|k| k <= 6) && within(e, 60.0);
    outcome(pass, format!("|x_k| <= 1e-12 first at k = {first:?} in {e:.2?}"))
}

fn c5() -> Outcome {
    let t = Instant::now();
    let f = FunctionOracle::atan1();
    let back = univariate::n2_step(&f, 13.494).unwrap();
    let map = |x: f64| univariate::n2_step(&f, x).ok();
    let at172 = converges_from(&map, 1.72, 0.0, 200, 1e-9);
    let at170 = converges_from(&map, 1.70, 0.0, 200, 1e-9);
    let e = t.elapsed();
    let pass = (back + 13.494).abs() <= 0.01 && !at172 && at170 && within(e, 1.0);
    outcome(
        pass,
        format!("N2(13.494) = {back:.4}, converges from 1.72: {at172}, from 1.70: {at170} in {e:.2?}"),
    )
}

fn c6(audit: &Mutex<Audit>) -> Outcome {
    let t = Instant::now();
    let f = FunctionOracle::atan1();
    let mut contracting = true;
    for i in 1..=1000 {
        let x = 0.1 * i as f64;
        let n = univariate::n3_step(&f, x).unwrap();
        if !(n.abs() < x) {
            contracting = false;
        }
    }
    let mut runs = Vec::new();
    for x0 in [-50.0, -5.0, 5.0, 50.0] {
        let tr = newton::minimize(&f, &[x0], hon(3), &NewtonOptions::default()).unwrap();
        audit.lock().unwrap().trace("atan1 d3", &tr);
        runs.push((x0, tr.termination, tr.num_steps()));
    }
    let e = t.elapsed();
    let pass = contracting && runs.iter().all(|r| r.1 == Termination::GradTol) && within(e, 120.0);
    outcome(pass, format!("|N3(x)| < |x| on grid: {contracting}; runs {runs:?} in {e:.2?}"))
}

fn c7(audit: &Mutex<Audit>) -> Outcome {
    let full = std::env::var("HONEWTON_FULL_BASIN").is_ok_and(|v| v == "1");
    let (grid, limit) = if full { (41, 1800.0) } else { (21, 300.0) };
    let t = Instant::now();
    let f = FunctionOracle::beale();
    let xstar = [3.0, 0.5];
    let sos = SosOptions::default();
    let s3 = BasinSettings { grid, d: 3, ..BasinSettings::default() };
    let s2 = BasinSettings { grid, d: 2, ..BasinSettings::default() };
    let b3 = basin_scan(&f, &xstar, &s3, &sos).unwrap();
    let b2 = basin_scan(&f, &xstar, &s2, &sos).unwrap();
    let e = t.elapsed();
    let mut a = audit.lock().unwrap();
    for p in &b3.points {
        for c in &p.checks {
            a.record("beale d3", c);
        }
    }
    let failures = b3.points.iter().filter(|p| p.termination == Termination::SolverFailure).count();
    let (f3, f2) = (b3.converged_fraction(), b2.converged_fraction());
    outcome(
        f3 > f2 && within(e, limit),
        format!("{grid}x{grid}: d=3 fraction {f3:.4} vs classical {f2:.4} ({failures} solver failures) in {e:.2?}"),
    )
}

fn c8(audit: &Mutex<Audit>) -> Outcome {
    let opts = SosOptions::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let cases: [(FunctionOracle, fn(f64) -> (f64, f64, f64)); 2] =
        [(FunctionOracle::sqrt1(), sqrt1_derivs), (FunctionOracle::atan1(), atan1_derivs)];
    for (f, derivs) in &cases {
        for i in 0..50 {
            let x = -3.0 + 6.0 * i as f64 / 49.0;
            let d = derivs(x);
            if !(d.1 > 0.0) {
                continue;
            }
            let step = newton::step_order_d(f, &[x], 3, 0.01, &opts).unwrap();
            audit.lock().unwrap().record("closed-form grid", &step.check());
            worst = worst.max((step.next[0] - n3_reference(x, d)).abs());
            count += 1;
        }
    }
    outcome(worst <= 1e-6 && count == 100, format!("{count} points, max |N3 - step| = {worst:.2e}"))
}

fn c9(audit: &Mutex<Audit>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = SosOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f1 = rng.gen_range(-2.0..2.0);
        let f2 = rng.gen_range(0.05..5.0);
        let mut f3: f64 = rng.gen_range(-5.0..5.0);
        if f3.abs() < 0.05 {
            f3 = 0.05f64.copysign(f3);
        }
        let cubic = Polynomial::from_terms(
            1,
            [(1u32, f1), (2, f2 / 2.0), (3, f3 / 6.0)].map(|(k, c)| (MultiIndex::new(vec![k]), c)),
        )
        .unwrap();
        let reg = sos::min_t_centered(&cubic, 4, &opts).unwrap();
        let r = reg.certificate.verify();
        audit.lock().unwrap().record(
            "min_t cubic",
            &StepCheck {
                certificate: Some(r.clone()),
                grad_norm: 0.0,
                grad_tolerance: 1.0,
                valid: r.valid,
            },
        );
        let expected = f3 * f3 / (48.0 * f2);
        worst = worst.max((reg.weight - expected).abs() / expected);
    }
    outcome(worst <= 1e-6, format!("100 cubics, max relative error {worst:.2e}"))
}

fn c10(audit: &Mutex<Audit>) -> Outcome {
    let opts = NewtonOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;
    let cases: [(&str, FunctionOracle, u32, &[f64]); 3] = [
        ("atan1 d=3", FunctionOracle::atan1(), 3, &[3.0, 1.0, 0.5]),
        ("sqrt1 d=3", FunctionOracle::sqrt1(), 3, &[0.09, 0.07, 0.05]),
        ("sqrt1 d=4", FunctionOracle::sqrt1(), 4, &[0.08, 0.05, 0.02]),
    ];
    for (name, f, d, starts) in &cases {
        let traces: Vec<Trace> = starts
            .iter()
            .map(|&x0| newton::minimize(f, &[x0], hon(*d), &opts).unwrap())
            .collect();
        for t in &traces {
            audit.lock().unwrap().trace(name, t);
        }
        match newton::empirical_order_pooled(&traces, &[0.0]) {
            Ok(p) => {
                pass &= p >= *d as f64 - 0.3;
                parts.push(format!("{name}: {p:.3}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn random_poly(rng: &mut ChaCha8Rng, deg: u32) -> Polynomial {
    Polynomial::from_terms(
        1,
        (0..=deg).map(|k| (MultiIndex::new(vec![k]), rng.gen_range(-1.0..1.0))),
    )
    .unwrap()
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let r = rng.gen_range(1..=3usize);
        let k = rng.gen_range(1..=3usize);
        let deg = rng.gen_range(0..=3u32);
        let b = PolyMatrix::new(k, r, (0..k * r).map(|_| random_poly(&mut rng, deg)).collect()).unwrap();
        let m = b.transpose().mul(&b).unwrap();
        for alpha in [0.0, 1.0] {
            worst = worst.min(sos::quadrature_margin(&m, alpha).unwrap());
        }
    }
    outcome(worst >= -1e-9, format!("100 matrices, smallest eigenvalue {worst:.3e}"))
}

fn c12(audit: &Mutex<Audit>) -> Outcome {
    let t = Instant::now();
    let f = FunctionOracle::atan1();
    let m = univariate_derivative_bound(&f, 4, -60.0, 60.0, 24001).unwrap();
    let tr = newton::minimize(&f, &[50.0], Method::Global { d: 3, lipschitz: m }, &NewtonOptions::default()).unwrap();
    audit.lock().unwrap().trace("global", &tr);
    let rise = tr
        .values
        .windows(2)
        .map(|w| w[1] - w[0] - 1e-10 * w[0].abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let g = tr.grad_norms.last().copied().unwrap_or(f64::NAN);
    let e = t.elapsed();
    let pass = rise <= 0.0 && g <= 1e-8 && within(e, 120.0);
    outcome(
        pass,
        format!("M = {m:.4}, {} steps, final |grad| {g:.2e}, monotone: {} in {e:.2?}", tr.num_steps(), rise <= 0.0),
    )
}

fn main() {
    let audit = Mutex::new(Audit::new());
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut run = |k: usize, o: Outcome| {
        println!("criterion {k:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, o));
    };
    run(1, c1());
    run(2, c2());
    run(3, c3(&audit));
    run(4, c4(&audit));
    run(5, c5());
    run(6, c6(&audit));
    run(7, c7(&audit));
    run(8, c8(&audit));
    run(9, c9(&audit));
    run(10, c10(&audit));
    run(11, c11());
    run(12, c12(&audit));
    let a = audit.into_inner().unwrap();
    let pass13 = a.failures.is_empty() && a.steps > 0;
    run(
        13,
        outcome(
            pass13,
            format!(
                "{} surrogates, worst residual {:.2e}, worst Gram eigenvalue {:.2e}, worst |grad|/tol {:.2e}{}",
                a.steps,
                a.worst_residual,
                a.worst_eig,
                a.worst_grad_ratio,
                if a.failures.is_empty() { String::new() } else { format!("; {:?}", a.failures) }
            ),
        ),
    );

    let unexpected: Vec<usize> = results
        .iter()
        .filter(|(k, o)| o.pass == KNOWN_FAILURES.contains(k))
        .map(|(k, _)| *k)
        .collect();
    assert!(
        unexpected.is_empty(),
        "criteria {unexpected:?} differ from the expected outcome (known failures: {KNOWN_FAILURES:?})"
    );
}
