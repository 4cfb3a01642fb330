use proptest::prelude::*;

use honewton::sdp::{self, check_primal_ray, substitution_residuals, Constraint, SdpProblem, SolveStatus, SolverOptions, SymEntry};

/// Problem with a strictly feasible primal point and a strictly feasible
/// dual point, built from the raw entries.
fn feasible_problem(blocks: Vec<usize>, m: usize, raw: &[f64]) -> SdpProblem {
    let mut it = raw.iter().copied().cycle();
    let mut sym = |n: usize, b: usize| -> Vec<SymEntry> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v: f64 = it.next().unwrap();
                if v.abs() > 0.3 {
                    out.push(SymEntry::new(b, i, j, v));
                }
            }
        }
        out
    };
    let mut constraints = Vec::new();
    for _ in 0..m {
        let entries: Vec<SymEntry> = blocks.iter().enumerate().flat_map(|(b, &n)| sym(n, b)).collect();
        constraints.push(Constraint { entries, rhs: 0.0 });
    }
    // X0 = I gives b_i = trace(A_i)
    for c in &mut constraints {
        c.rhs = c.entries.iter().filter(|e| e.row == e.col).map(|e| e.value).sum();
    }
    // C = 2I + sum y0_i A_i with y0 = (0.1, -0.1, ...), so S0 = 2I
    let mut objective: Vec<SymEntry> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| (0..n).map(move |i| SymEntry::new(b, i, i, 2.0)))
        .collect();
    for (k, c) in constraints.iter().enumerate() {
        let y = if k % 2 == 0 { 0.1 } else { -0.1 };
        objective.extend(c.entries.iter().map(|e| SymEntry::new(e.block, e.row, e.col, y * e.value)));
    }
    SdpProblem {
        blocks,
        objective,
        constraints,
    }
}

fn problem() -> impl Strategy<Value = SdpProblem> {
    (
        prop::collection::vec(1usize..=4, 1..=3),
        1usize..=6,
        prop::collection::vec(-1.0f64..1.0, 64),
    )
        .prop_map(|(blocks, m, raw)| feasible_problem(blocks, m, &raw))
        .prop_filter("nonempty constraints", |p| p.constraints.iter().all(|c| !c.entries.is_empty()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimal_solutions_check_out(p in problem()) {
        let opts = SolverOptions::default();
        let sol = sdp::solve(&p, &opts).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let r = substitution_residuals(&p, &sol.x, &sol.y, &sol.s);
        prop_assert!(r.primal <= 1e-7, "{r:?}");
        prop_assert!(r.dual <= 1e-7, "{r:?}");
        prop_assert!(r.relative_gap <= 1e-7, "{r:?}");
        let scale = 1.0 + r.primal_objective.abs() + r.dual_objective.abs();
        prop_assert!(r.primal_objective >= r.dual_objective - 1e-7 * scale);
        prop_assert!(r.min_eig_x >= -1e-9 && r.min_eig_s >= -1e-9, "{r:?}");
    }

    #[test]
    fn solves_are_deterministic(p in problem()) {
        let opts = SolverOptions::default();
        let a = sdp::solve(&p, &opts).unwrap();
        let b = sdp::solve(&p, &opts).unwrap();
        prop_assert_eq!(a.iterations, b.iterations);
        prop_assert_eq!(a.y, b.y);
        prop_assert_eq!(a.x, b.x);
    }

    #[test]
    fn sdpa_round_trip(p in problem()) {
        let text = p.to_sdpa();
        let q = SdpProblem::from_sdpa(text.as_bytes()).unwrap();
        prop_assert_eq!(&q.blocks, &p.blocks);
        prop_assert_eq!(q.dense_objective(), p.dense_objective());
        prop_assert_eq!(q.dense_constraints(), p.dense_constraints());
    }

    #[test]
    fn infeasibility_rays_certify(shift in 0.1f64..5.0, n in 1usize..=3) {
        // trace(X) = -shift has no PSD solution
        let entries = (0..n).map(|i| SymEntry::new(0, i, i, 1.0)).collect();
        let p = SdpProblem {
            blocks: vec![n],
            objective: vec![SymEntry::new(0, 0, 0, 1.0)],
            constraints: vec![Constraint { entries, rhs: -shift }],
        };
        let sol = sdp::solve(&p, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        let ray = sol.primal_ray.expect("ray");
        let (by, eig) = check_primal_ray(&p, &ray);
        prop_assert!(by > 0.0 && eig >= -1e-9, "{by} {eig}");
    }
}
