mod common;

use blowup_asym::dsl::parse_expr;
use blowup_asym::series::{primitive, ThetaSeries, ThetaTerm};
use blowup_asym::validate::{complete_bindings, symbolic_residual};
use blowup_asym::vf::{Expr, Params};
use common::{expand, label, load, EXAMPLES};
use proptest::prelude::*;

fn term() -> impl Strategy<Value = ThetaTerm> {
    (-4.0..4.0_f64, 0..12i32, 0..3u32).prop_map(|(c, g, m)| ThetaTerm::constant(c, g as f64 / 4.0, m))
}

fn series() -> impl Strategy<Value = ThetaSeries> {
    prop::collection::vec(term(), 1..5).prop_map(|ts| ThetaSeries::from_terms(ts, 4.0))
}

fn assert_same(a: &ThetaSeries, b: &ThetaSeries) -> Result<(), TestCaseError> {
    let trunc = a.trunc().min(b.trunc());
    let diff = a.truncate(trunc).sub(&b.truncate(trunc));
    let scale = a.terms().iter().chain(b.terms()).fold(1.0_f64, |m, t| m.max(t.coeff.max_abs()));
    for t in diff.terms() {
        prop_assert!(t.coeff.max_abs() <= 1e-10 * scale, "{a} vs {b}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn addition_commutes_and_associates(a in series(), b in series(), c in series()) {
        assert_same(&a.add(&b), &b.add(&a))?;
        assert_same(&a.add(&b).add(&c), &a.add(&b.add(&c)))?;
    }

    #[test]
    fn multiplication_commutes_and_associates(a in series(), b in series(), c in series()) {
        assert_same(&a.mul(&b), &b.mul(&a))?;
        assert_same(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c)))?;
    }

    #[test]
    fn multiplication_distributes(a in series(), b in series(), c in series()) {
        assert_same(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c)))?;
    }
}

fn any_term() -> impl Strategy<Value = ThetaTerm> {
    let gamma = prop_oneof![1 => Just(-1.0), 9 => (-30..=30i32).prop_map(|g| g as f64 / 7.0)];
    (-5.0..5.0_f64, gamma, 0..4u32).prop_map(|(c, g, m)| ThetaTerm::constant(c, g, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn differentiate_inverts_primitive(t in any_term()) {
        let back = primitive(&t).differentiate();
        let want = ThetaSeries::from_terms(vec![t.clone()], f64::INFINITY);
        let c = t.coeff.constant_part().abs().max(1.0);
        for d in back.sub(&want).terms() {
            prop_assert!(d.coeff.max_abs() <= 1e-12 * c, "{t:?} -> {back}");
        }
    }
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..20u32).prop_map(|k| Expr::Const(k as f64 / 4.0)),
        (0..2usize).prop_map(Expr::Var),
        Just(Expr::Param("a".into())),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let exponent = prop_oneof![Just(2.0), Just(3.0), Just(0.5), Just(-1.0), Just(1.5), Just(-0.25)];
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::div(a, b)),
            (inner.clone(), exponent).prop_map(|(a, r)| Expr::pow(a, r)),
            inner.prop_map(Expr::neg),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_parse_is_a_fixed_point(e in expr(), x in 0.2..3.0_f64, y in 0.2..3.0_f64) {
        let vars = vec!["u".to_string(), "v".to_string()];
        let params: Params = [("a".to_string(), 0.7)].into();
        let printed = e.display(&vars).to_string();
        let parsed = parse_expr(&printed, &vars, &params)
            .map_err(|err| TestCaseError::fail(format!("`{printed}`: {err}")))?;
        prop_assert_eq!(parsed.display(&vars).to_string(), printed.clone());
        if let (Ok(a), Ok(b)) = (e.eval(&[x, y], &params), parsed.eval(&[x, y], &params)) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "`{}`: {} vs {}", printed, a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn euler_identity_on_every_example(pt in prop::collection::vec(0.1..2.0_f64, 3)) {
        for (name, ov) in EXAMPLES {
            let l = load(name, ov).map_err(TestCaseError::fail)?;
            let x = &pt[..l.spec.field.n()];
            let res = l.spec.field.euler_residual(x).unwrap();
            let f = l.spec.field.eval_quasi(x).unwrap();
            let scale = 1.0 + f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for r in res {
                prop_assert!(r.abs() / scale < 1e-8, "{}: residual {} at {:?}", label(name, ov), r, x);
            }
        }
    }
}

#[test]
fn corrections_respect_the_gap() {
    for (name, ov) in EXAMPLES {
        let l = load(name, ov).unwrap();
        for e in expand(&l, 4).unwrap() {
            if !e.gap.delta.is_finite() {
                continue;
            }
            for (j, y) in e.y_terms.iter().enumerate().skip(1) {
                for s in y {
                    assert!(
                        s.deg() >= j as f64 * e.gap.delta - 1e-9,
                        "{}: deg Y_{j} = {} below {j} * {}",
                        label(name, ov),
                        s.deg(),
                        e.gap.delta
                    );
                }
            }
        }
    }
}

#[test]
fn exponents_lie_in_the_lattice() {
    for (name, ov) in EXAMPLES {
        let l = load(name, ov).unwrap();
        if !l.spec.field.is_polynomial() {
            continue;
        }
        for e in expand(&l, 4).unwrap() {
            for s in e.y_terms.iter().flatten() {
                for t in s.terms() {
                    assert!(
                        e.lattice.iter().any(|g| (g - t.gamma).abs() < 1e-9),
                        "{}: exponent {} not in {:?}",
                        label(name, ov),
                        t.gamma,
                        e.lattice
                    );
                }
            }
        }
    }
}

/// Smallest residual degree over components, measured in `Y`-space.
fn residual_degree(l: &common::Loaded, order: usize) -> Vec<f64> {
    expand(l, order)
        .unwrap()
        .iter()
        .map(|e| {
            let bind = complete_bindings(e, &Params::new());
            let r = symbolic_residual(&l.spec.field, e, &bind).unwrap();
            r.iter()
                .enumerate()
                .map(|(i, s)| s.deg() + 1.0 + l.spec.field.qh.rate(i))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[test]
fn residual_degree_grows_with_order() {
    for (name, ov) in EXAMPLES {
        let l = load(name, ov).unwrap();
        let degs: Vec<Vec<f64>> = (1..=3).map(|n| residual_degree(&l, n)).collect();
        for root in 0..degs[0].len() {
            let seq: Vec<f64> = degs.iter().map(|d| d[root]).collect();
            for w in seq.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{} root {root}: {seq:?}", label(name, ov));
            }
            assert!(
                seq[2] > seq[0] || seq[0].is_infinite(),
                "{} root {root}: residual degree did not grow: {seq:?}",
                label(name, ov)
            );
        }
    }
}
