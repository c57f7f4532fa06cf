use proptest::prelude::*;
use qfilter::charfn::{char_fn, TimeLambdaGrid};
use qfilter::matops::{c64, devectorize, sandwich, vectorize, ComplexMatrix};
use qfilter::trajectories::FilterKernel;
use qfilter::{generator, DensityMatrix, Detection, QsdeModel};

fn matrix(p: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), p * p).prop_map(move |v| {
        ComplexMatrix::from_iterator(p, p, v.into_iter().map(|(re, im)| c64(re, im)))
    })
}

fn hermitian(p: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(p).prop_map(|a| (&a + a.adjoint()).scale(0.5))
}

fn state(p: usize) -> impl Strategy<Value = DensityMatrix> {
    matrix(p).prop_map(|a| {
        DensityMatrix::new(
            &a * a.adjoint() + ComplexMatrix::identity(a.nrows(), a.nrows()).scale(1e-3),
        )
        .unwrap()
    })
}

fn model(p: usize) -> impl Strategy<Value = QsdeModel> {
    (hermitian(p), matrix(p), 0.1f64..=1.0, any::<bool>()).prop_map(|(h, l, eta, counting)| {
        let detection = if counting {
            Detection::Counting
        } else {
            Detection::Homodyne
        };
        QsdeModel::new(h, vec![l], eta, detection).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_matches_vectorized_product(a in matrix(3), b in matrix(3), x in matrix(3)) {
        let lhs = sandwich(&a, &b) * vectorize(&x).unwrap().coords();
        let rhs = vectorize(&(&a * &x * &b)).unwrap();
        prop_assert!((lhs - rhs.coords()).norm() < 1e-12);
        prop_assert_eq!(devectorize(&vectorize(&x).unwrap()), x);
    }

    #[test]
    fn filter_steps_return_states(m in model(2), rho in state(2), inc in -0.2f64..0.2, jump in any::<bool>()) {
        let kernel = FilterKernel::new(&m);
        let increment = match m.detection() {
            Detection::Homodyne => inc,
            Detection::Counting => if jump && rho.expect(&m.measurement_observable()).re > 1e-6 { 1.0 } else { 0.0 },
        };
        let out = kernel.step(&rho, increment, 1e-3).unwrap();
        prop_assert!((out.rho.trace() - 1.0).abs() <= 1e-12);
        prop_assert!(out.rho.min_eigenvalue().unwrap() >= -1e-12);
        let a = out.rho.as_matrix();
        prop_assert!((a - a.adjoint()).norm() == 0.0);
    }

    #[test]
    fn generator_kills_identity(m in model(3)) {
        let id = ComplexMatrix::identity(3, 3);
        prop_assert!(generator(&m).apply(&id).unwrap().norm() < 1e-12);
    }

    #[test]
    fn characteristic_function_is_bounded_and_symmetric(
        m in model(2),
        rho in state(2),
        t in 0.05f64..2.0,
        lambda in -3.0f64..3.0,
    ) {
        let phi = char_fn(&m, &rho, &TimeLambdaGrid::single(t, lambda).unwrap()).unwrap();
        let conj = char_fn(&m, &rho, &TimeLambdaGrid::single(t, -lambda).unwrap()).unwrap();
        prop_assert!(phi.norm() <= 1.0 + 1e-9);
        prop_assert!((phi - conj.conj()).norm() < 1e-10);
    }
}
