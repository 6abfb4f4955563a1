use nalgebra::DMatrix;
use proptest::prelude::*;

use weakval::analysis::{channel_weak_values, weak_value_of};
use weakval::extrapolate::extrapolate_to_zero;
use weakval::hilbert::{inner, spectral_decompose, Operator, Space, StateVector, C64};
use weakval::meter::{init_gaussian, q_mean, GaussianSpec};
use weakval::protocol::{
    couple_exact, evolve, operational_weak_value, postselect, postselected_meter, CouplingSpec,
    GSchedule,
};
use weakval::scenarios::{Observable, Scenario, Stage, CONVENTION};

fn space(n: usize) -> Space {
    Space::new((0..n).map(|i| format!("e{i}"))).unwrap()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    complex_vec(n)
        .prop_filter("non-negligible norm", |v| {
            v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 0.05
        })
        .prop_map(move |v| StateVector::new(space(n), v).unwrap().normalized().unwrap())
}

/// `(M + M†)/2`, scaled so its spectrum fits in [−1, 1].
fn hermitian(n: usize) -> impl Strategy<Value = Operator> {
    complex_vec(n * n).prop_map(move |v| {
        let m = DMatrix::from_vec(n, n, v);
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let scale = h.norm().max(1e-3);
        Operator::from_matrix(space(n), h / C64::new(scale, 0.0)).unwrap()
    })
}

fn unitary(n: usize) -> impl Strategy<Value = Operator> {
    complex_vec(n * n)
        .prop_filter("full rank", move |v| {
            DMatrix::from_vec(n, n, v.clone()).determinant().norm() > 1e-3
        })
        .prop_map(move |v| {
            Operator::from_matrix(space(n), DMatrix::from_vec(n, n, v).qr().q()).unwrap()
        })
}

fn scenario(input: StateVector, s: Operator, u: Operator, f: StateVector, delta: f64) -> Scenario {
    let sp = input.space().clone();
    Scenario {
        name: "random".into(),
        convention: CONVENTION.into(),
        live_labels: sp.labels().to_vec(),
        space: sp,
        preselected: input,
        observable: Observable::matrix("S", s),
        alternatives: Vec::new(),
        stages: vec![Stage::matrix("U", u)],
        postselected: f,
        meter: GaussianSpec::new(delta).unwrap(),
    }
}

fn system(n: usize) -> impl Strategy<Value = Scenario> {
    (state(n), hermitian(n), unitary(n), state(n), 0.5f64..2.0)
        .prop_map(|(i, s, u, f, d)| scenario(i, s, u, f, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coupling_and_evolution_preserve_norm(sc in (2usize..=5).prop_flat_map(system), g in 0.0f64..3.0) {
        let c = CouplingSpec::new(sc.observable.operator.clone(), g).unwrap();
        let joint = couple_exact(&sc.preselected, &init_gaussian(sc.meter), &c).unwrap();
        prop_assert!((joint.norm_squared().unwrap() - 1.0).abs() < 1e-10);
        let joint = evolve(&joint, &sc.stages[0].operator).unwrap();
        prop_assert!((joint.norm_squared().unwrap() - 1.0).abs() < 1e-10);
        let (_, p) = postselect(&joint, &sc.postselected).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn spectral_decomposition_reconstructs(s in (2usize..=6).prop_flat_map(hermitian)) {
        let d = spectral_decompose(&s).unwrap();
        prop_assert!(d.reconstruct().max_abs_diff(&s).unwrap() < 1e-10);
        let sum = d.projectors.iter().skip(1).fold(d.projectors[0].clone(), |acc, p| acc.add(p).unwrap());
        prop_assert!(sum.max_abs_diff(&Operator::identity(s.space())).unwrap() < 1e-10);
    }

    #[test]
    fn weak_values_are_linear(
        (sc, s2) in (2usize..=4).prop_flat_map(|n| (system(n), hermitian(n))),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        prop_assume!(sc.postselection_overlap().unwrap().norm() > 0.1);
        let s1 = sc.observable.operator.clone();
        let combo = s1.scale(C64::new(a, 0.0)).add(&s2.scale(C64::new(b, 0.0))).unwrap();
        let lhs = weak_value_of(&sc, &combo).unwrap();
        let rhs = weak_value_of(&sc, &s1).unwrap() * a + weak_value_of(&sc, &s2).unwrap() * b;
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()));
        let one = weak_value_of(&sc, &Operator::identity(&sc.space)).unwrap();
        prop_assert!((one - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn basis_channels_sum_to_one(sc in (2usize..=5).prop_flat_map(system)) {
        prop_assume!(sc.postselection_overlap().unwrap().norm() > 0.1);
        let channels: Vec<StateVector> = sc.space.labels().iter()
            .map(|l| StateVector::basis(&sc.space, l.as_str()).unwrap())
            .collect();
        let sum: C64 = channel_weak_values(&sc, &channels).unwrap().into_iter().sum();
        prop_assert!((sum - C64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn pointer_mean_is_odd_in_g(sc in (2usize..=4).prop_flat_map(system), g in 0.001f64..1.0) {
        let (plus, p1) = postselected_meter(&sc, g).unwrap();
        let (minus, p2) = postselected_meter(&sc, -g).unwrap();
        prop_assume!(p1 > 1e-6);
        prop_assert!((p1 - p2).abs() < 1e-12);
        let (mp, mm) = (q_mean(&plus).unwrap(), q_mean(&minus).unwrap());
        prop_assert!((mp + mm).abs() < 1e-10 * (1.0 + mp.abs()), "{mp} vs {mm}");
    }

    #[test]
    fn operational_matches_analytic(sc in (2usize..=4).prop_flat_map(system)) {
        prop_assume!(sc.postselection_overlap().unwrap().norm() > 0.3);
        let analytic = weak_value_of(&sc, &sc.observable.operator).unwrap();
        let op = operational_weak_value(&sc, &GSchedule::default_for(sc.meter)).unwrap();
        prop_assert!((op.value - analytic.re).abs() <= 1e-6f64.max(op.residual),
            "operational {} vs analytic {} (residual {:e})", op.value, analytic.re, op.residual);
    }

    #[test]
    fn extrapolation_is_exact_on_low_degree(c in prop::collection::vec(-3.0f64..3.0, 4), x0 in 0.01f64..1.0) {
        let xs: Vec<f64> = (0..6).map(|i| x0 * 0.25f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x).collect();
        let e = extrapolate_to_zero(&xs, &ys, 3).unwrap();
        prop_assert!((e.value - c[0]).abs() < 1e-9);
    }
}

#[test]
fn orthogonal_postselection_gives_zero_probability() {
    let sp = space(2);
    let a = StateVector::basis(&sp, "e0").unwrap();
    let b = StateVector::basis(&sp, "e1").unwrap();
    assert_eq!(inner(&a, &b).unwrap(), C64::new(0.0, 0.0));
    let c = CouplingSpec::new(Operator::identity(&sp), 0.2).unwrap();
    let joint = couple_exact(&a, &init_gaussian(GaussianSpec::default()), &c).unwrap();
    assert_eq!(postselect(&joint, &b).unwrap().1, 0.0);
}
