use bouncer_core::forcing::ForcingFunction;
use bouncer_core::genfun::{twist_certificate, GeneratingContext};
use proptest::prelude::*;
use quadrature::double_exponential;

fn test_forcing() -> ForcingFunction {
    ForcingFunction::from_terms(0.0, &[(1, 0.0, 0.03), (2, 0.01, 0.0)]).unwrap()
}

fn forcing() -> impl Strategy<Value = ForcingFunction> {
    prop::collection::vec((-0.05..0.05f64, -0.05..0.05f64), 1..=3)
        .prop_map(|h| ForcingFunction::new(0.0, h).unwrap())
}

fn integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let n = ((b - a).abs().ceil() as usize).max(1);
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| double_exponential::integrate(&f, a + i as f64 * h, a + (i + 1) as f64 * h, 1e-14).integral)
        .sum()
}

/// Kinetic action of the relative flight `x(t) = -g t^2/2 - f(t) + A t + B`
/// vanishing at both ends, with `A, B` from the 2x2 boundary system.
fn kinetic_action(g: f64, f: &ForcingFunction, t0: f64, t1: f64) -> f64 {
    let c0 = 0.5 * g * t0 * t0 + f.value(t0);
    let c1 = 0.5 * g * t1 * t1 + f.value(t1);
    let a = (c1 - c0) / (t1 - t0);
    integral(
        |t| {
            let v = -g * t - f.velocity(t) + a;
            0.5 * v * v
        },
        t0,
        t1,
    )
}

/// Closed form with the two integrals done by quadrature.
fn termwise(g: f64, f: &ForcingFunction, t0: f64, t1: f64) -> f64 {
    let d = t1 - t0;
    let slope = (f.value(t1) - f.value(t0)) / d;
    g * g * d.powi(3) / 24.0 + 0.5 * g * (f.value(t1) + f.value(t0)) * d - 0.5 * slope * slope * d
        - g * integral(|t| f.value(t), t0, t1)
        + 0.5 * integral(|t| f.velocity(t).powi(2), t0, t1)
}

fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, e: f64) -> f64 {
    let d = |e: f64| (f(x + e) - f(x - e)) / (2.0 * e);
    (4.0 * d(0.5 * e) - d(e)) / 3.0
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn value_is_kinetic_action(f in forcing(), g in 0.5..3.0f64, t0 in 0.0..1.0f64, delta in 0.1..15.0f64) {
        let ctx = GeneratingContext::new(g, f.clone()).unwrap();
        let t1 = t0 + delta;
        let h = ctx.h_value(t0, t1);
        prop_assert!(close(h, kinetic_action(g, &f, t0, t1), 1e-11));
        prop_assert!(close(h, termwise(g, &f, t0, t1), 1e-11));
    }

    #[test]
    fn derivatives_match_differences(f in forcing(), t0 in 0.0..1.0f64, delta in 0.5..30.0f64) {
        let ctx = GeneratingContext::new(1.0, f).unwrap();
        let t1 = t0 + delta;
        let e = 1e-3;
        let (p0, p1) = ctx.h_partials(t0, t1);
        prop_assert!(close(derivative(|x| ctx.h_value(x, t1), t0, e), p0, 1e-8));
        prop_assert!(close(derivative(|x| ctx.h_value(t0, x), t1, e), p1, 1e-8));
        let (h00, h01, h11) = ctx.h_second_partials(t0, t1);
        prop_assert!(close(derivative(|x| ctx.h_partials(x, t1).0, t0, e), h00, 1e-8));
        prop_assert!(close(derivative(|x| ctx.h_partials(t0, x).1, t1, e), h11, 1e-8));
        prop_assert!(close(derivative(|x| ctx.h_partials(t0, x).0, t1, e), h01, 1e-8));
        prop_assert!(close(ctx.cross_derivative(t0, t1), h01, 1e-14));
        let (d0, d1) = ctx.cross_partials(t0, t1);
        prop_assert!(close(derivative(|x| ctx.cross_derivative(x, t1), t0, e), d0, 1e-8));
        prop_assert!(close(derivative(|x| ctx.cross_derivative(t0, x), t1, e), d1, 1e-8));
        prop_assert!(close(ctx.third_derivative_difference(t0, t1), d1 - d0, 1e-14));
    }

    #[test]
    fn twist_holds_beyond_k(f in forcing(), g in 0.5..3.0f64, t0 in -2.0..2.0f64, u in 0.0..1.0f64) {
        let ctx = GeneratingContext::new(g, f).unwrap();
        let cert = *ctx.cert();
        // well past the audited band as well
        let delta = cert.k + 200.0 * u * u;
        prop_assert!(ctx.cross_derivative(t0, t0 + delta) <= cert.epsilon);
        prop_assert!(cert.epsilon < 0.0);
    }

    #[test]
    fn invariant_under_unit_shift(f in forcing(), t0 in 0.0..1.0f64, delta in 0.1..10.0f64, n in -4i32..4) {
        let ctx = GeneratingContext::new(1.0, f).unwrap();
        let s = n as f64;
        let t1 = t0 + delta;
        prop_assert!(close(ctx.h_value(t0 + s, t1 + s), ctx.h_value(t0, t1), 1e-11));
        prop_assert!(close(ctx.cross_derivative(t0 + s, t1 + s), ctx.cross_derivative(t0, t1), 1e-11));
    }
}

#[test]
fn shear_closed_forms() {
    for g in [1.0, 2.0, 9.8] {
        let ctx = GeneratingContext::new(g, ForcingFunction::zero()).unwrap();
        for delta in [0.5, 1.0, 5.0] {
            let (t0, t1) = (0.25, 0.25 + delta);
            assert!(close(ctx.h_value(t0, t1), g * g * delta.powi(3) / 24.0, 1e-13));
            assert!(close(ctx.cross_derivative(t0, t1), -g * g * delta / 4.0, 1e-13));
            assert!(close(ctx.third_derivative_difference(t0, t1), -g * g / 2.0, 1e-13));
        }
    }
}

#[test]
fn cross_derivative_asymptote() {
    let ctx = GeneratingContext::new(1.0, test_forcing()).unwrap();
    for i in 0..50 {
        let t0 = i as f64 / 50.0;
        let d = ctx.cross_derivative(t0, t0 + 1000.0);
        assert!((d / 1000.0 + 0.25).abs() < 1e-3);
    }
}

#[test]
fn certificate_constants() {
    let f = test_forcing();
    let cert = twist_certificate(1.0, &f).unwrap();
    assert!(close(cert.k, 8.0 * f.sup_bound(1), 1e-15));
    assert!(close(cert.epsilon, -cert.k / 16.0, 1e-15));
    assert_eq!(twist_certificate(2.0, &ForcingFunction::zero()).unwrap().k, 1.0);
}
