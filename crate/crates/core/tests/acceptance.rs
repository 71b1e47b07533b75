//! Acceptance suite at the default configuration and unscaled thresholds.

use std::process::ExitCode;

use bouncer_core::config::RunConfig;
use bouncer_core::validation::{
    cantor_probe_check, coexistence, continuous_agreement, extension_certificate, generating_relation,
    heteroclinic_connection, mather_orbits, periodicity_check, shear_exactness, symplecticity, test_forcing,
    twist_asymptote, CriterionResult,
};

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let f = test_forcing();
    let runs: Vec<Box<dyn Fn() -> CriterionResult>> = vec![
        Box::new(|| periodicity_check(|k, t| f.eval_derivative(k, t).unwrap_or(f64::NAN), 1.0)),
        Box::new(|| shear_exactness(1.0)),
        Box::new(|| generating_relation(cfg.seed, 1.0)),
        Box::new(|| symplecticity(1.0)),
        Box::new(|| twist_asymptote(1.0)),
        Box::new(|| extension_certificate(1.0)),
        Box::new(|| mather_orbits(cfg.multistarts, cfg.seed, 1.0)),
        Box::new(|| continuous_agreement(1.0)),
        Box::new(|| heteroclinic_connection(cfg.multistarts, cfg.seed, 1.0)),
        Box::new(|| cantor_probe_check(cfg.depth, cfg.multistarts, cfg.seed, 1.0)),
        Box::new(|| coexistence(&cfg, 1.0)),
    ];
    let mut failed = 0;
    for run in runs {
        let r = run();
        println!("{}", r.summary_line());
        for c in r.failing() {
            println!("    failing check {:?}: measured {:.3e}, threshold {:.3e}", c.name, c.measured, c.threshold);
        }
        if !r.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}
