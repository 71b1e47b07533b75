use bouncer_core::extension::ExtensionContext;
use bouncer_core::forcing::ForcingFunction;
use bouncer_core::genfun::GeneratingContext;
use bouncer_core::mather::{
    action, convergents, el_gradient, el_jacobian, heteroclinic, minimize_periodic, order_compare,
    reconstruct_orbit, OrderRelation, ConnectionDirection, PeriodicConfiguration,
};
use bouncer_core::validation::brute_force_action;
use proptest::prelude::*;

fn context(g: f64, f: ForcingFunction) -> ExtensionContext {
    ExtensionContext::new(GeneratingContext::new(g, f).unwrap()).unwrap()
}

fn small_forcing() -> ForcingFunction {
    ForcingFunction::from_terms(0.0, &[(1, 0.01, 0.004), (2, 0.0, 0.003)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shear_minimisers_are_uniform(g in 0.5..3.0f64, q in 1u64..4, extra in 0u64..5) {
        let ctx = context(g, ForcingFunction::zero());
        // coprime by construction
        let p = (3 + extra) * q + 1;
        let c = minimize_periodic(&ctx, p, q, 4, 3).unwrap();
        let alpha = p as f64 / q as f64;
        for gap in c.gaps() {
            prop_assert!((gap - alpha).abs() < 1e-7);
        }
        let want = q as f64 * g * g * alpha.powi(3) / 24.0;
        prop_assert!((c.action - want).abs() < 1e-10 * want);
    }

    #[test]
    fn gradient_and_jacobian_match_differences(
        t0 in 0.0..1.0f64,
        gaps in prop::collection::vec(3.0..6.0f64, 3),
    ) {
        let ctx = context(1.0, small_forcing());
        let times = vec![t0, t0 + gaps[0], t0 + gaps[0] + gaps[1]];
        let p = (gaps.iter().sum::<f64>()).round() as u64;
        let grad = el_gradient(&ctx, p, &times).unwrap();
        let jac = el_jacobian(&ctx, p, &times).unwrap();
        let e = 1e-4;
        for i in 0..3 {
            let shifted = |s: f64| {
                let mut x = times.clone();
                x[i] += s;
                x
            };
            let fd = (action(&ctx, p, &shifted(e)).unwrap() - action(&ctx, p, &shifted(-e)).unwrap()) / (2.0 * e);
            prop_assert!((fd - grad[i]).abs() < 1e-6 * grad[i].abs().max(1.0), "{fd} vs {}", grad[i]);
            let gp = el_gradient(&ctx, p, &shifted(e)).unwrap();
            let gm = el_gradient(&ctx, p, &shifted(-e)).unwrap();
            for j in 0..3 {
                let fd = (gp[j] - gm[j]) / (2.0 * e);
                prop_assert!((fd - jac[(j, i)]).abs() < 1e-5 * jac[(j, i)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn action_invariant_under_relabelling(t0 in 0.0..1.0f64, a in 3.0..5.0f64, n in -3i32..3) {
        let ctx = context(1.0, small_forcing());
        let p = 9;
        let times = vec![t0, t0 + a];
        let base = action(&ctx, p, &times).unwrap();
        let shifted: Vec<f64> = times.iter().map(|t| t + n as f64).collect();
        let rotated = vec![t0 + a, t0 + p as f64];
        prop_assert!((action(&ctx, p, &shifted).unwrap() - base).abs() < 1e-10 * base.abs());
        prop_assert!((action(&ctx, p, &rotated).unwrap() - base).abs() < 1e-10 * base.abs());
    }
}

#[test]
fn minimisers_are_birkhoff_ordered() {
    let ctx = context(1.0, small_forcing());
    for (p, q) in [(9u64, 2u64), (13, 3), (17, 4)] {
        let c = minimize_periodic(&ctx, p, q, 16, 5).unwrap();
        let x = c.extended(-3 * q as i64, 6 * q as i64);
        for shift_index in 1..(2 * q as usize) {
            for shift_time in -(p as i64)..=(p as i64) {
                let d: Vec<f64> = (0..x.len() - shift_index)
                    .map(|n| x[n + shift_index] + shift_time as f64 - x[n])
                    .collect();
                let all_pos = d.iter().all(|&v| v > -1e-9);
                let all_neg = d.iter().all(|&v| v < 1e-9);
                assert!(all_pos || all_neg, "{p}/{q}: translate ({shift_index}, {shift_time}) crosses");
            }
        }
    }
}

#[test]
fn matches_brute_force_on_another_forcing() {
    let ctx = context(1.0, small_forcing());
    for (p, q) in [(4u64, 1u64), (7, 1), (9, 2), (11, 2)] {
        let c = minimize_periodic(&ctx, p, q, 16, 11).unwrap();
        let brute = brute_force_action(&ctx, p, q).unwrap();
        assert!((c.action - brute).abs() < 1e-9, "{p}/{q}: {} vs {brute}", c.action);
    }
}

#[test]
fn deterministic_under_seed() {
    let ctx = context(1.0, small_forcing());
    let a = minimize_periodic(&ctx, 13, 3, 8, 42).unwrap();
    let b = minimize_periodic(&ctx, 13, 3, 8, 42).unwrap();
    assert_eq!(a, b);
    let c = minimize_periodic(&ctx, 13, 3, 8, 43).unwrap();
    assert!((a.action - c.action).abs() < 1e-10);
}

#[test]
fn orbit_of_minimiser_is_certified() {
    let ctx = context(1.0, small_forcing());
    let c = minimize_periodic(&ctx, 13, 3, 8, 1).unwrap();
    let o = reconstruct_orbit(&ctx, &c).unwrap();
    assert!(o.bounds.graph_bound && o.bounds.gap_window && o.bounds.gaps_exceed_k && o.map_reproduces && o.energies_consistent);
}

#[test]
fn golden_convergents_are_fibonacci() {
    let fib = [1u64, 1, 2, 3, 5, 8, 13, 21, 34];
    let alpha = 5.0 + 0.5 * (5f64.sqrt() - 1.0);
    let cs = convergents(alpha, 9);
    assert_eq!(cs.len(), 9);
    for (i, &(p, q)) in cs.iter().enumerate() {
        assert_eq!(q, fib[i]);
        assert!(((p as f64 / q as f64) - alpha).abs() < 1.0 / (q * q) as f64);
    }
}

#[test]
fn order_relations() {
    assert_eq!(order_compare(&[0.0, 1.0], &[0.0, 2.0]).unwrap(), OrderRelation::Precedes);
    assert_eq!(order_compare(&[0.0, 2.0], &[0.0, 1.0]).unwrap(), OrderRelation::Follows);
    assert_eq!(order_compare(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), OrderRelation::Equal);
    assert_eq!(order_compare(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), OrderRelation::Incomparable);
    assert!(order_compare(&[0.0], &[0.0, 1.0]).is_err());
}

#[test]
fn heteroclinic_rejects_bad_anchors() {
    let ctx = context(1.0, small_forcing());
    let c = minimize_periodic(&ctx, 5, 1, 8, 1).unwrap();
    assert!(heteroclinic(&ctx, &c, &c, 10, ConnectionDirection::LowToHigh).is_err());
    let other = PeriodicConfiguration::evaluate(&ctx, 6, vec![0.1]).unwrap();
    assert!(heteroclinic(&ctx, &c, &other, 10, ConnectionDirection::LowToHigh).is_err());
    let later = PeriodicConfiguration::evaluate(&ctx, 5, vec![c.times[0] + 0.5]).unwrap();
    assert!(heteroclinic(&ctx, &later, &c, 10, ConnectionDirection::LowToHigh).is_err());
}
