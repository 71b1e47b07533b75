//! Ballistic flights between impacts, the event-driven simulator and the
//! implicit impact map on `(t, w)` / `(t, E)` states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingFunction;

/// Gaps below this are treated as accumulating impacts.
pub const CHATTER_GAP: f64 = 1e-6;

/// Iteration budget for every scalar root solve.
pub const ROOT_BUDGET: usize = 100;

/// Default bound on the scaled landing residual.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Step floor for the event marcher.
const MIN_EVENT_STEP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactState {
    t: f64,
    w: f64,
    energy: f64,
}

impl ImpactState {
    pub fn new(t: f64, w: f64) -> Result<Self> {
        if !t.is_finite() || !w.is_finite() {
            return Err(Error::domain("impact state must be finite"));
        }
        if w <= 0.0 {
            return Err(Error::domain(format!("impact velocity must be positive, got {w}")));
        }
        Ok(Self {
            t,
            w,
            energy: 0.5 * w * w,
        })
    }

    pub fn from_energy(t: f64, energy: f64) -> Result<Self> {
        if energy.is_nan() || energy <= 0.0 {
            return Err(Error::domain(format!("impact energy must be positive, got {energy}")));
        }
        let mut s = Self::new(t, (2.0 * energy).sqrt())?;
        s.energy = energy;
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }
}

/// `x(t) = -g t^2/2 - f(t) + A t + B` between two impacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightArc {
    t0: f64,
    t1: f64,
    a: f64,
    b: f64,
}

impl FlightArc {
    /// Arc with arbitrary coefficients; endpoints need not be zeros of `x`.
    pub fn from_coefficients(t0: f64, t1: f64, a: f64, b: f64) -> Self {
        Self { t0, t1, a, b }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn position(&self, g: f64, f: &ForcingFunction, t: f64) -> f64 {
        -0.5 * g * t * t - f.value(t) + self.a * t + self.b
    }

    pub fn velocity(&self, g: f64, f: &ForcingFunction, t: f64) -> f64 {
        -g * t - f.velocity(t) + self.a
    }
}

/// Impact times with their post-impact velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitWindow {
    states: Vec<ImpactState>,
}

impl OrbitWindow {
    pub fn new(states: Vec<ImpactState>) -> Result<Self> {
        if states.windows(2).any(|p| p[1].t <= p[0].t) {
            return Err(Error::Ordering("impact times must increase strictly".into()));
        }
        Ok(Self { states })
    }

    /// Window built from times alone, velocities set to one.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        Self::new(times.iter().map(|&t| ImpactState::new(t, 1.0)).collect::<Result<_>>()?)
    }

    pub fn states(&self) -> &[ImpactState] {
        &self.states
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.states.windows(2).map(|p| p[1].t - p[0].t).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn check_gap(t0: f64, t1: f64) -> Result<()> {
    if !(t1 > t0) {
        return Err(Error::domain(format!("flight needs t1 > t0, got ({t0}, {t1})")));
    }
    Ok(())
}

/// Arc with `x(t0) = x(t1) = 0`.
pub fn solve_dirichlet(g: f64, f: &ForcingFunction, t0: f64, t1: f64) -> Result<FlightArc> {
    check_gap(t0, t1)?;
    let a = 0.5 * g * (t0 + t1) + f.dd(&[t0, t1]);
    let b = 0.5 * g * t0 * t0 + f.value(t0) - a * t0;
    Ok(FlightArc { t0, t1, a, b })
}

/// Departure velocity `x'(t0)` and arrival speed `-x'(t1)` of the flight
/// joining two impacts, written with confluent differences so that both
/// stay accurate for short flights.
pub fn flight_velocities(g: f64, f: &ForcingFunction, t0: f64, t1: f64) -> (f64, f64) {
    let tab = f.pair_table(t0, t1);
    let delta = t1 - t0;
    (delta * (0.5 * g + tab.get(2, 1)), delta * (0.5 * g + tab.get(1, 2)))
}

pub fn boundary_velocities(arc: &FlightArc, f: &ForcingFunction, g: f64) -> (f64, f64) {
    flight_velocities(g, f, arc.t0, arc.t1)
}

/// `w_bar = 2 B1 + (g/2) k_F` with `k_F = max(1, 8 B1 / g)` and `B1` the
/// coefficient bound on `|f'|`.
pub fn velocity_threshold(g: f64, f: &ForcingFunction) -> f64 {
    let b1 = f.sup_bound(1);
    2.0 * b1 + 0.5 * g * gap_floor(g, f)
}

/// `k_F = max(1, 8 B1 / g)`
pub fn gap_floor(g: f64, f: &ForcingFunction) -> f64 {
    (8.0 * f.sup_bound(1) / g).max(1.0)
}

/// True when the departure velocity grows strictly with the gap, so every
/// positive velocity has exactly one landing time.
pub fn globally_monotone(g: f64, f: &ForcingFunction) -> bool {
    f.sup_bound(2) < g
}

/// Interval in which the next impact must lie for departure velocity `w0`.
pub fn landing_bracket(g: f64, f: &ForcingFunction, s: &ImpactState) -> Result<(f64, f64)> {
    let b1 = f.sup_bound(1);
    let centre = 2.0 * s.w / g;
    // slack for rounding when the bounds are tight (f constant)
    let spread = 4.0 * b1 / g + 1e-10 * (1.0 + centre);
    let lo = if globally_monotone(g, f) {
        (centre - spread).max(0.0)
    } else if s.w > velocity_threshold(g, f) {
        (centre - spread).max(gap_floor(g, f))
    } else {
        return Err(Error::domain(format!(
            "velocity {} is not above the threshold {}",
            s.w,
            velocity_threshold(g, f)
        )));
    };
    Ok((s.t + lo, s.t + centre + spread))
}

/// Safeguarded Newton iteration for an increasing function on `[lo, hi]`.
///
/// `func` returns the value and derivative. Stops when the Newton update drops
/// below a few ulps or the bracket collapses.
pub(crate) fn safeguarded_root<F>(mut func: F, lo: f64, hi: f64, start: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut lo, mut hi) = (lo, hi);
    let (flo, _) = func(lo);
    let (fhi, _) = func(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Convergence { iterations: 0, lo, hi });
    }
    let mut x = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
    for _ in 0..ROOT_BUDGET {
        let (fx, dfx) = func(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let scale = x.abs().max(1.0);
        if (next - x).abs() <= 4.0 * f64::EPSILON * scale || hi - lo <= 4.0 * f64::EPSILON * scale {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence {
        iterations: ROOT_BUDGET,
        lo,
        hi,
    })
}

/// Next impact time for a departure `(t0, w0)`, from the landing equation
/// `w_depart(t0, t1) = w0`.
pub fn landing_time(g: f64, f: &ForcingFunction, s: &ImpactState) -> Result<f64> {
    landing_time_with_tolerance(g, f, s, ROOT_TOLERANCE)
}

/// [`landing_time`] with the relative residual bound `tol` on the scaled
/// landing equation.
pub fn landing_time_with_tolerance(g: f64, f: &ForcingFunction, s: &ImpactState, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("root tolerance must be positive, got {tol}")));
    }
    let (lo, hi) = landing_bracket(g, f, s)?;
    let t0 = s.t;
    let residual = |t1: f64| {
        let tab = f.pair_table(t0, t1);
        let delta = t1 - t0;
        let wd = delta * (0.5 * g + tab.get(2, 1));
        // d/dt1 of f[t0,t1] - f'(t0) is f[t0,t1,t1]
        (2.0 / g * (wd - s.w), 2.0 / g * (0.5 * g + tab.get(1, 2)))
    };
    let lo = if lo <= t0 { t0 + f64::EPSILON * t0.abs().max(1.0) } else { lo };
    let t1 = safeguarded_root(residual, lo, hi, t0 + 2.0 * s.w / g)?;
    let delta = t1 - t0;
    let (r, _) = residual(t1);
    if r.abs() > tol * (1.0 + delta) {
        return Err(Error::Convergence {
            iterations: ROOT_BUDGET,
            lo,
            hi,
        });
    }
    Ok(t1)
}

/// One application of the impact map.
pub fn map_forward(g: f64, f: &ForcingFunction, s: &ImpactState) -> Result<ImpactState> {
    map_forward_with_tolerance(g, f, s, ROOT_TOLERANCE)
}

pub fn map_forward_with_tolerance(g: f64, f: &ForcingFunction, s: &ImpactState, tol: f64) -> Result<ImpactState> {
    let t1 = landing_time_with_tolerance(g, f, s, tol)?;
    let (_, wa) = flight_velocities(g, f, s.t, t1);
    ImpactState::new(t1, wa)
}

/// The map on `(t, E)` coordinates.
pub fn map_forward_energy(g: f64, f: &ForcingFunction, t: f64, energy: f64) -> Result<(f64, f64)> {
    let s = map_forward(g, f, &ImpactState::from_energy(t, energy)?)?;
    Ok((s.t, 0.5 * s.w * s.w))
}

/// Iterate the map `n` times, returning `n + 1` states.
pub fn iterate_map(g: f64, f: &ForcingFunction, s0: ImpactState, n: usize) -> Result<OrbitWindow> {
    let mut states = Vec::with_capacity(n + 1);
    states.push(s0);
    let mut s = s0;
    for _ in 0..n {
        s = map_forward(g, f, &s)?;
        states.push(s);
    }
    OrbitWindow::new(states)
}

/// Positivity of `x` on the open interval `(t0, t1)`.
///
/// For an arc through both endpoints, `x(t) = (t - t0)(t1 - t) r(t)` with
/// `r(t) = g/2 + f[t0, t, t1]`. `r` is Lipschitz with constant `B3 / 6`, so a
/// cell is certified once its sampled minimum exceeds the Lipschitz slack.
/// Cells that cannot be resolved count as violations. Arcs whose
/// coefficients do not match their endpoints are sampled directly.
pub fn positivity_check(arc: &FlightArc, f: &ForcingFunction, g: f64) -> bool {
    let (t0, t1) = (arc.t0, arc.t1);
    if !(t1 > t0) {
        return false;
    }
    let Ok(exact) = solve_dirichlet(g, f, t0, t1) else {
        return false;
    };
    let da = arc.a - exact.a;
    let db = arc.b - exact.b;
    let scale = arc.a.abs().max(1.0) * t0.abs().max(t1.abs()).max(1.0);
    let samples = 64 * ((t1 - t0).ceil() as usize).max(1);
    if da.abs() > 1e-12 * scale || db.abs() > 1e-12 * scale {
        return sampled_positive(|t| arc.position(g, f, t), t0, t1, 16 * samples);
    }
    let r = |t: f64| 0.5 * g + f.dd(&[t0, t, t1]);
    let lip = f.sup_bound(3) / 6.0;
    let h = (t1 - t0) / samples as f64;
    let mut values: Vec<f64> = (0..=samples).map(|i| r(t0 + i as f64 * h)).collect();
    values[samples] = r(t1);
    if values.iter().any(|&v| v <= 0.0) {
        return false;
    }
    let mut budget = 100_000usize;
    (0..samples).all(|i| {
        let a = t0 + i as f64 * h;
        certify_cell(&r, lip, a, a + h, values[i], values[i + 1], 0, &mut budget)
    })
}

#[allow(clippy::too_many_arguments)]
fn certify_cell<R: Fn(f64) -> f64>(
    r: &R,
    lip: f64,
    a: f64,
    b: f64,
    ra: f64,
    rb: f64,
    depth: u32,
    budget: &mut usize,
) -> bool {
    if ra.min(rb) > 0.5 * lip * (b - a) {
        return true;
    }
    if depth >= 30 || *budget == 0 {
        return false;
    }
    *budget -= 1;
    let m = 0.5 * (a + b);
    let rm = r(m);
    if rm <= 0.0 {
        return false;
    }
    certify_cell(r, lip, a, m, ra, rm, depth + 1, budget) && certify_cell(r, lip, m, b, rm, rb, depth + 1, budget)
}

fn sampled_positive<X: Fn(f64) -> f64>(x: X, t0: f64, t1: f64, n: usize) -> bool {
    let h = (t1 - t0) / n as f64;
    (1..n).all(|i| x(t0 + i as f64 * h) > 0.0)
}

/// Result of an event-driven run together with per-impact diagnostics.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub window: OrbitWindow,
    pub arcs: Vec<FlightArc>,
    /// `-x'(t_n^-)` of the arc ending at each impact.
    pub arrival_speeds: Vec<f64>,
}

/// Event-driven integration of the bouncing ball, `n` impacts after `s0`.
pub fn simulate_continuous(g: f64, f: &ForcingFunction, s0: ImpactState, n: usize) -> Result<OrbitWindow> {
    Ok(simulate_continuous_trace(g, f, s0, n)?.window)
}

pub fn simulate_continuous_trace(g: f64, f: &ForcingFunction, s0: ImpactState, n: usize) -> Result<SimulationTrace> {
    if n == 0 {
        return Err(Error::domain("number of impacts must be at least one"));
    }
    let (trace, failure) = simulate_partial(g, f, s0, n);
    match failure {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Like [`simulate_continuous_trace`] but keeps the impacts computed before
/// a failure and returns the failure alongside them.
pub fn simulate_partial(g: f64, f: &ForcingFunction, s0: ImpactState, n: usize) -> (SimulationTrace, Option<Error>) {
    let mut states = Vec::with_capacity(n + 1);
    let mut arcs = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    states.push(s0);
    let mut s = s0;
    let mut failure = None;
    for _ in 0..n {
        match flight(g, f, &s) {
            Ok((arc, speed)) => {
                arcs.push(arc);
                speeds.push(speed);
                s = ImpactState {
                    t: arc.t1,
                    w: speed,
                    energy: 0.5 * speed * speed,
                };
                states.push(s);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let trace = SimulationTrace {
        window: OrbitWindow { states },
        arcs,
        arrival_speeds: speeds,
    };
    (trace, failure)
}

fn flight(g: f64, f: &ForcingFunction, s: &ImpactState) -> Result<(FlightArc, f64)> {
    let (tau, speed) = next_event(g, f, s)?;
    let t1 = s.t + tau;
    let a = s.w + g * s.t + f.velocity(s.t);
    let b = 0.5 * g * s.t * s.t + f.value(s.t) - a * s.t;
    let arc = FlightArc::from_coefficients(s.t, t1, a, b);
    if !positivity_check(&arc, f, g) {
        return Err(Error::Simulation(format!("flight from t = {} leaves the half-line", s.t)));
    }
    Ok((arc, speed))
}

/// First zero of the relative height after departure, in local time.
///
/// `x(tau) = (w0 + f'(t0)) tau - g tau^2/2 - (f(t0 + tau) - f(t0))`.
/// Steps are bounded below by the first root of the quadratic lower envelope
/// built from `|x''| <= g + B2`, so no crossing is skipped.
fn next_event(g: f64, f: &ForcingFunction, s: &ImpactState) -> Result<(f64, f64)> {
    let t0 = s.t;
    let v0 = s.w + f.velocity(t0);
    let f0 = f.value(t0);
    let x = |tau: f64| v0 * tau - 0.5 * g * tau * tau - (f.value(t0 + tau) - f0);
    let xd = |tau: f64| v0 - g * tau - f.velocity(t0 + tau);
    let curvature = g + f.sup_bound(2);
    let horizon = 2.0 * (s.w + 2.0 * f.sup_bound(1)) / g + 1.0;

    let mut tau = 0.0;
    let mut xv = 0.0;
    let mut dv = s.w;
    let mut steps = 0usize;
    loop {
        // smallest positive root of xv + dv h - curvature h^2 / 2
        let disc = dv * dv + 2.0 * curvature * xv;
        let h = ((dv + disc.max(0.0).sqrt()) / curvature).max(MIN_EVENT_STEP);
        let next = tau + h;
        let xn = x(next);
        if xn <= 0.0 {
            let lo = tau;
            let root = safeguarded_root(|u| (-x(u), -xd(u)), lo.max(f64::MIN_POSITIVE), next, next)
                .map_err(|e| Error::Simulation(format!("impact refinement failed near t = {}: {e}", t0 + next)))?;
            if root < CHATTER_GAP {
                return Err(Error::Chatter { time: t0, gap: root });
            }
            let speed = -xd(root);
            if speed <= 0.0 {
                return Err(Error::Simulation(format!("grazing impact at t = {}", t0 + root)));
            }
            return Ok((root, speed));
        }
        tau = next;
        xv = xn;
        dv = xd(tau);
        steps += 1;
        if tau > horizon || steps > 1_000_000 {
            return Err(Error::Simulation(format!(
                "no impact found within {horizon} time units after t = {t0}"
            )));
        }
    }
}

/// `|det J - 1|` for the map on `(t, E)`, Jacobian from Richardson-extrapolated
/// central differences.
pub fn symplectic_defect(g: f64, f: &ForcingFunction, s: &ImpactState) -> Result<f64> {
    let (t0, e0) = (s.t, s.energy);
    // Jacobian entries reach O(100) at high energy, so the determinant
    // needs the truncation error well below 1e-10: two Richardson levels.
    let ht = 1e-3;
    let he = 1e-4 * e0.abs().max(1.0);
    let column = |dt: f64, de: f64| -> Result<(f64, f64)> {
        let p = map_forward_energy(g, f, t0 + dt, e0 + de)?;
        let m = map_forward_energy(g, f, t0 - dt, e0 - de)?;
        let scale = 2.0 * (dt + de);
        Ok(((p.0 - m.0) / scale, (p.1 - m.1) / scale))
    };
    let richardson = |dt: f64, de: f64| -> Result<(f64, f64)> {
        let a = column(dt, de)?;
        let b = column(0.5 * dt, 0.5 * de)?;
        let c = column(0.25 * dt, 0.25 * de)?;
        let first = |x: f64, y: f64| (4.0 * y - x) / 3.0;
        let (r1, r2) = ((first(a.0, b.0), first(a.1, b.1)), (first(b.0, c.0), first(b.1, c.1)));
        Ok(((16.0 * r2.0 - r1.0) / 15.0, (16.0 * r2.1 - r1.1) / 15.0))
    };
    let (dt1_dt0, de1_dt0) = richardson(ht, 0.0)?;
    let (dt1_de0, de1_de0) = richardson(0.0, he)?;
    Ok((dt1_dt0 * de1_de0 - dt1_de0 * de1_dt0 - 1.0).abs())
}
