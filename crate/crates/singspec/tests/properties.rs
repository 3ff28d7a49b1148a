use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use singspec::deficiency::{deficiency_closed_form, deficiency_constructive};
use singspec::forms::form_value;
use singspec::frobenius::{frobenius_basis, l2_count, residual, OperatorSpec, Side};
use singspec::scalar::Coeff;
use singspec::{AnalyticSeries, Gq, LogSeries};

type Q = LogSeries<Gq>;

fn ratio() -> impl Strategy<Value = BigRational> {
    (-9i64..=9, 1i64..=6).prop_map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
}

fn gq() -> impl Strategy<Value = Gq> {
    (ratio(), ratio()).prop_map(|(re, im)| Gq::new(re, im))
}

fn nonzero_ratio() -> impl Strategy<Value = BigRational> {
    ratio().prop_filter("nonzero", |r| *r != BigRational::from_integer(0.into()))
}

fn series() -> impl Strategy<Value = Q> {
    (-3i64..=3, 2usize..=6, 1usize..=2)
        .prop_flat_map(|(rho, trunc, logs)| (Just(rho), Just(trunc), prop::collection::vec(prop::collection::vec(gq(), trunc + 1), logs)))
        .prop_map(|(rho, trunc, rows)| Q::from_rows(rho, trunc, rows))
}

fn coefficient() -> impl Strategy<Value = AnalyticSeries> {
    (nonzero_ratio(), prop::collection::vec(ratio(), 0..3)).prop_map(|(a0, rest)| {
        let mut c = vec![a0];
        c.extend(rest);
        AnalyticSeries::polynomial(c)
    })
}

/// `(m, p)` with `1 <= p <= 2m - 1`.
fn order(max_m: usize) -> impl Strategy<Value = (usize, usize)> {
    (1..=max_m).prop_flat_map(|m| (Just(m), 1..2 * m))
}

fn agree(a: &Q, b: &Q) -> bool {
    a.sub(b).is_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrate_then_differentiate_is_identity(s in series()) {
        prop_assert!(agree(&s.integrate().differentiate(), &s));
    }

    #[test]
    fn mul_commutes_and_distributes(a in series(), b in series(), c in series()) {
        prop_assert!(agree(&a.mul(&b), &b.mul(&a)));
        prop_assert!(agree(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c))));
    }

    #[test]
    fn exact_evaluation_is_the_finite_sum(rho in -2i64..=3, coeffs in prop::collection::vec(gq(), 1..6), x in (1i64..=9, 2i64..=11)) {
        let trunc = coeffs.len() - 1;
        let s = Q::power(rho, coeffs.clone(), trunc);
        let x = BigRational::new(BigInt::from(x.0), BigInt::from(x.1));
        let mut expected = Gq::zero();
        for (nu, c) in coeffs.iter().enumerate() {
            let e = rho + nu as i64;
            let pow = if e >= 0 { num_traits::pow(x.clone(), e as usize) } else { num_traits::pow(x.clone(), (-e) as usize).recip() };
            expected = expected + c.clone() * Gq::real(pow);
        }
        prop_assert_eq!(s.evaluate_exact(&x).unwrap(), expected);
    }

    #[test]
    fn form_is_skew_hermitian(m in 1usize..=3, seed in prop::collection::vec(gq(), 12)) {
        let f = &seed[..2 * m];
        let g = &seed[6..6 + 2 * m];
        let fg = form_value(f, g, m).unwrap();
        let gf = form_value(g, f, m).unwrap();
        prop_assert_eq!(fg, -gf.conj());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn frobenius_solutions_solve_the_equation((m, p) in order(2), a in coefficient(), lambda in gq()) {
        let spec = OperatorSpec::new(m, p, p, a.clone(), a).unwrap();
        let trunc = spec.min_trunc() + 2;
        for side in [Side::Left, Side::Right] {
            let sols = frobenius_basis(&spec, side, lambda.clone(), trunc).unwrap();
            prop_assert_eq!(sols.len(), 2 * m);
            prop_assert_eq!(sols.iter().filter(|y| y.in_l2).count(), l2_count(&spec, side));
            for y in &sols {
                let r = residual(y, &spec);
                prop_assert!(r.is_zero(), "residual of y{} on {:?}", y.index, side);
                prop_assert_eq!(y.in_l2, y.series.rho() >= 0);
            }
        }
    }

    #[test]
    fn quasi_derivative_ladder((m, p) in order(2), a in coefficient(), lambda in gq()) {
        let spec = OperatorSpec::new(m, p, p, a.clone(), a).unwrap();
        let sols = frobenius_basis(&spec, Side::Right, lambda.clone(), spec.min_trunc() + 2).unwrap();
        for y in &sols {
            prop_assert!(agree(&y.qd[0], &y.series));
            for l in 0..2 * m - 1 {
                if l != m - 1 {
                    prop_assert!(agree(&y.qd[l].differentiate(), &y.qd[l + 1]), "step {}", l);
                }
            }
            prop_assert!(agree(&y.qd[2 * m - 1].differentiate(), &y.series.scale(&lambda)));
        }
    }

    #[test]
    fn deficiency_is_mirror_symmetric_and_lambda_free((m, p) in order(2), q in 1usize..=3, a in coefficient(), b in coefficient()) {
        let q = q.min(2 * m - 1);
        let n = deficiency_closed_form(m, p, q).unwrap();
        prop_assert_eq!(n, deficiency_closed_form(m, q, p).unwrap());
        let spec = OperatorSpec::new(m, p, q, a.clone(), b.clone()).unwrap();
        let mirror = OperatorSpec::new(m, q, p, b, a).unwrap();
        for lambda in [Gq::i(), Gq::new(BigRational::from_integer(0.into()), BigRational::from_integer(2.into()))] {
            prop_assert_eq!(deficiency_constructive(&spec, lambda.clone(), spec.min_trunc()).unwrap().n_counted, n);
            prop_assert_eq!(deficiency_constructive(&mirror, lambda, mirror.min_trunc()).unwrap().n_counted, n);
        }
    }
}
