//! Search for accelerating orbits by phase locking.
//!
//! A flight of integer length `N` from phase `t*` leaves with relative
//! velocity `g N / 2 - f'(t*)` and lands with `g N / 2 + f'(t*)`. When
//! `f'(t*) = m g / 4` the next locked flight has length `N + m`, so the
//! velocity grows by `m g / 2` per bounce for as long as the lock holds.
//! Candidates are the roots of `f' = m g / 4` combined with integer flight
//! lengths; each is simulated and the best growth is reported. A failed
//! search is evidence of nothing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dynamics::{globally_monotone, map_forward, simulate_partial, velocity_threshold, ImpactState};
use crate::error::Result;
use crate::forcing::ForcingFunction;

/// Growth factor required for a positive verdict.
pub const GROWTH_TARGET: f64 = 10.0;

const PHASE_SAMPLES: usize = 4096;
const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Resonance order `m` in `f'(t*) = m g / 4`.
    pub order: usize,
    pub phase: f64,
    /// Initial flight length `N`.
    pub resonance: u64,
    pub initial: ImpactState,
    pub bounces: usize,
    /// Length of the strictly increasing run of velocities from the start.
    pub monotone_run: usize,
    pub growth: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelerationReport {
    pub verdict: bool,
    /// "found" or "not found".
    pub label: String,
    pub initial: Option<ImpactState>,
    pub bounce_count: usize,
    pub min_velocity: Option<f64>,
    pub max_velocity: Option<f64>,
    /// Least-squares slope of `w_n` against `n` over the stored orbit.
    pub trend_slope: Option<f64>,
    pub monotone_run: usize,
    pub growth_factor: f64,
    /// Mean velocity gain per bounce over the monotone run.
    pub mean_gain: Option<f64>,
    /// Orbit of the best candidate, impacts `0..=bounce_count`.
    pub orbit: Vec<ImpactState>,
    /// Impacts of the stored orbit that the impact map can re-check.
    pub map_checked: usize,
    /// Largest one-step discrepancy between the stored orbit and the map.
    pub map_defect: Option<f64>,
    pub candidates: Vec<Candidate>,
    /// Scan failures; recorded, not fatal.
    pub scan_errors: Vec<String>,
    pub note: String,
}

impl AccelerationReport {
    fn empty(note: &str) -> Self {
        Self {
            verdict: false,
            label: "not found".into(),
            initial: None,
            bounce_count: 0,
            min_velocity: None,
            max_velocity: None,
            trend_slope: None,
            monotone_run: 0,
            growth_factor: 0.0,
            mean_gain: None,
            orbit: Vec::new(),
            map_checked: 0,
            map_defect: None,
            candidates: Vec::new(),
            scan_errors: Vec::new(),
            note: note.into(),
        }
    }

    pub fn velocities(&self) -> Vec<f64> {
        self.orbit.iter().map(|s| s.w()).collect()
    }
}

/// Phases in `[0, 1)` where `f'(t) = level`, refined by bisection.
pub fn locked_phases(f: &ForcingFunction, level: f64) -> Vec<f64> {
    let u = |t: f64| f.velocity(t) - level;
    let mut roots = Vec::new();
    let mut prev = u(0.0);
    for i in 1..=PHASE_SAMPLES {
        let t = i as f64 / PHASE_SAMPLES as f64;
        let cur = u(t);
        if prev == 0.0 {
            roots.push((i - 1) as f64 / PHASE_SAMPLES as f64);
        } else if prev * cur < 0.0 {
            let (mut lo, mut hi) = ((i - 1) as f64 / PHASE_SAMPLES as f64, t);
            let up = cur > 0.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (u(mid) > 0.0) == up {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    roots
}

fn increasing_run(w: &[f64]) -> usize {
    w.windows(2).take_while(|p| p[1] > p[0]).count()
}

fn slope(w: &[f64]) -> Option<f64> {
    if w.len() < 2 {
        return None;
    }
    let n = w.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = w.iter().sum::<f64>() / n;
    let sxy: f64 = w.iter().enumerate().map(|(i, y)| (i as f64 - mx) * (y - my)).sum();
    let sxx: f64 = (0..w.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn simulate_candidate(
    g: f64,
    f: &ForcingFunction,
    order: usize,
    phase: f64,
    resonance: u64,
    n_bounces: usize,
) -> Option<(Candidate, Vec<ImpactState>)> {
    let w0 = 0.5 * g * resonance as f64 - 0.25 * g * order as f64;
    let initial = ImpactState::new(phase, w0).ok()?;
    let (trace, failure) = simulate_partial(g, f, initial, n_bounces);
    let states = trace.window.states().to_vec();
    let w: Vec<f64> = states.iter().map(|s| s.w()).collect();
    let run = increasing_run(&w);
    let cand = Candidate {
        order,
        phase,
        resonance,
        initial,
        bounces: states.len() - 1,
        monotone_run: run,
        growth: w[run] / w[0],
        failure: failure.map(|e| e.to_string()),
    };
    Some((cand, states))
}

/// One-step comparison of a stored orbit with the impact map wherever the map
/// is defined. Returns the number of checked steps and the largest time
/// discrepancy.
pub fn map_recheck(g: f64, f: &ForcingFunction, orbit: &[ImpactState]) -> (usize, Option<f64>) {
    let everywhere = globally_monotone(g, f);
    let threshold = velocity_threshold(g, f);
    let mut checked = 0;
    let mut worst: Option<f64> = None;
    for pair in orbit.windows(2) {
        if !everywhere && pair[0].w() <= threshold {
            continue;
        }
        let defect = match map_forward(g, f, &pair[0]) {
            Ok(s) => (s.t() - pair[1].t()).abs().max((s.w() - pair[1].w()).abs()),
            Err(_) => f64::INFINITY,
        };
        checked += 1;
        worst = Some(worst.map_or(defect, |w: f64| w.max(defect)));
    }
    (checked, worst)
}

/// Best velocity-growth orbit among the phase-locked candidates.
pub fn accelerate_search(cfg: &RunConfig, n_candidates: usize, n_bounces: usize) -> Result<AccelerationReport> {
    let g = cfg.g;
    let f = cfg.forcing()?;
    let peak = (0..PHASE_SAMPLES)
        .map(|i| f.velocity(i as f64 / PHASE_SAMPLES as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    if peak < 0.25 * g {
        return Ok(AccelerationReport::empty(&format!(
            "no candidate phases: max f' = {peak:.6e} is below g/4 = {:.6e}",
            0.25 * g
        )));
    }
    let mut jobs = Vec::new();
    for order in 1..=MAX_ORDER {
        let level = 0.25 * g * order as f64;
        if level > peak {
            break;
        }
        for phase in locked_phases(&f, level) {
            // w0 > 0 needs N > m / 2
            let first = order as u64 / 2 + 1;
            for resonance in first..first + n_candidates as u64 {
                jobs.push((order, phase, resonance));
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(order, phase, resonance)| {
            simulate_candidate(g, &f, order, phase, resonance, n_bounces).ok_or((order, phase, resonance))
        })
        .collect();

    let mut report = AccelerationReport::empty("");
    let mut best: Option<(usize, Vec<ImpactState>)> = None;
    for r in results {
        match r {
            Ok((cand, states)) => {
                if let Some(e) = &cand.failure {
                    report.scan_errors.push(format!(
                        "m = {}, phase = {:.6}, N = {}: {e}",
                        cand.order, cand.phase, cand.resonance
                    ));
                }
                let better = best.as_ref().is_none_or(|(i, _)| cand.growth > report.candidates[*i].growth);
                report.candidates.push(cand);
                if better {
                    best = Some((report.candidates.len() - 1, states));
                }
            }
            Err((order, phase, resonance)) => report
                .scan_errors
                .push(format!("m = {order}, phase = {phase:.6}, N = {resonance}: invalid initial state")),
        }
    }
    let Some((index, orbit)) = best else {
        report.note = "no candidate could be simulated".into();
        return Ok(report);
    };
    let cand = report.candidates[index].clone();
    let w: Vec<f64> = orbit.iter().map(|s| s.w()).collect();
    let (checked, defect) = map_recheck(g, &f, &orbit);
    report.verdict = cand.growth >= GROWTH_TARGET;
    report.label = if report.verdict { "found" } else { "not found" }.into();
    report.initial = Some(cand.initial);
    report.bounce_count = orbit.len() - 1;
    report.min_velocity = w.iter().cloned().reduce(f64::min);
    report.max_velocity = w.iter().cloned().reduce(f64::max);
    report.trend_slope = slope(&w);
    report.monotone_run = cand.monotone_run;
    report.growth_factor = cand.growth;
    report.mean_gain = (cand.monotone_run > 0).then(|| (w[cand.monotone_run] - w[0]) / cand.monotone_run as f64);
    report.map_checked = checked;
    report.map_defect = defect;
    report.note = format!(
        "best candidate: m = {}, phase = {:.12}, N = {}; velocity grows {:.4}x over {} bounces",
        cand.order, cand.phase, cand.resonance, cand.growth, cand.monotone_run
    );
    report.orbit = orbit;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(f: &ForcingFunction) -> RunConfig {
        RunConfig::default().with_forcing(f)
    }

    #[test]
    fn no_candidates_without_forcing() {
        let r = accelerate_search(&cfg(&ForcingFunction::zero()), 4, 50).unwrap();
        assert!(!r.verdict);
        assert_eq!(r.label, "not found");
        assert!(r.candidates.is_empty());
        assert!(r.note.contains("no candidate"));
    }

    #[test]
    fn no_candidates_below_resonance() {
        // 2 pi beta < 1/4
        let r = accelerate_search(&cfg(&ForcingFunction::sine(0.035)), 4, 50).unwrap();
        assert!(!r.verdict && r.candidates.is_empty());
    }

    #[test]
    fn locked_phase_of_sine() {
        let f = ForcingFunction::sine(0.05);
        let roots = locked_phases(&f, 0.25);
        let t = (0.25 / (0.1 * std::f64::consts::PI)).acos() / (2.0 * std::f64::consts::PI);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - t).abs() < 1e-14);
        assert!((roots[1] - (1.0 - t)).abs() < 1e-14);
    }

    #[test]
    fn increasing_run_stops_at_first_drop() {
        assert_eq!(increasing_run(&[1.0, 2.0, 3.0, 2.5, 4.0]), 2);
        assert_eq!(increasing_run(&[1.0]), 0);
        assert_eq!(slope(&[1.0, 3.0, 5.0]), Some(2.0));
    }
}
