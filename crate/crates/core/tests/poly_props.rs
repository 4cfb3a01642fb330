use proptest::prelude::*;

use honewton::poly::{monomial_basis, MultiIndex, Polynomial};

fn binom(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

fn poly(dim: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, dim), -3.0f64..3.0), 0..8).prop_map(
        move |terms| {
            Polynomial::from_terms(dim, terms.into_iter().map(|(e, c)| (MultiIndex::new(e), c)))
                .unwrap()
                .truncate(max_deg)
        },
    )
}

fn poly_and_point(max_deg: u32) -> impl Strategy<Value = (Polynomial, Vec<f64>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(move |n| {
        (
            poly(n, max_deg),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn basis_counts() {
    for n in 1..=4usize {
        for k in 0..=8u32 {
            let b = monomial_basis(n, k);
            assert_eq!(b.len() as u64, binom(n as u64 + k as u64, k as u64), "n={n} k={k}");
            assert!(b.windows(2).all(|w| w[0] < w[1]));
            assert!(b.iter().all(|m| m.dim() == n && m.degree() <= k));
        }
    }
}

proptest! {
    #[test]
    fn stored_terms_are_nonzero((p, _, _) in poly_and_point(4)) {
        prop_assert!(p.terms().all(|(m, c)| c != 0.0 && m.dim() == p.dim()));
        let deg = p.terms().map(|(m, _)| m.degree()).max().unwrap_or(0);
        prop_assert_eq!(p.degree(), deg);
    }

    #[test]
    fn mixed_partials_commute((p, _, _) in poly_and_point(5)) {
        let n = p.dim();
        for i in 0..n {
            for j in 0..n {
                let a = p.differentiate(i).unwrap().differentiate(j).unwrap();
                let b = p.differentiate(j).unwrap().differentiate(i).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn translate_is_a_ring_map(
        (p, a, x) in poly_and_point(3),
        seed in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let n = p.dim();
        let q = Polynomial::from_terms(
            n,
            seed.iter().enumerate().map(|(k, &c)| (MultiIndex::unit(n, k % n).plus(&MultiIndex::unit(n, (k + 1) % n)), c)),
        )
        .unwrap()
        .add(&Polynomial::constant(n, seed[0]))
        .unwrap();
        let lhs = p.mul(&q).unwrap().translate(&a).unwrap();
        let rhs = p.translate(&a).unwrap().mul(&q.translate(&a).unwrap()).unwrap();
        prop_assert!(lhs.degree() == p.mul(&q).unwrap().degree() || lhs.is_zero());
        let scale = lhs.max_abs_coeff().max(1.0);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs_coeff() <= 1e-11 * scale);
        prop_assert!(close(lhs.eval(&x), rhs.eval(&x), 1e-11));
    }

    #[test]
    fn translate_shifts_evaluation((p, a, x) in poly_and_point(6)) {
        let shifted: Vec<f64> = x.iter().zip(&a).map(|(u, v)| u + v).collect();
        let t = p.translate(&a).unwrap();
        // relative to the term magnitudes, which bound the cancellation
        let bound: Vec<f64> = x.iter().zip(&a).map(|(u, v)| u.abs() + v.abs()).collect();
        let mag: f64 = p.terms().map(|(m, c)| c.abs() * m.eval(&bound)).sum();
        prop_assert!((t.eval(&x) - p.eval(&shifted)).abs() <= 1e-12 * mag.max(1.0));
        prop_assert_eq!(t.degree(), p.degree());
    }

    #[test]
    fn hessian_is_symmetric((p, _, x) in poly_and_point(4)) {
        let h = p.hessian();
        for i in 0..p.dim() {
            for j in 0..p.dim() {
                prop_assert_eq!(h.get(i, j), h.get(j, i));
            }
        }
        let e = p.eval_hess(&x);
        prop_assert!((e.clone() - e.transpose()).abs().max() == 0.0);
    }

    #[test]
    fn json_round_trip((p, _, _) in poly_and_point(4)) {
        let s = serde_json::to_string(&p).unwrap();
        let q: Polynomial = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(p, q);
    }
}
