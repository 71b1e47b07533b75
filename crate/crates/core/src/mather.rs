//! Variational orbits: periodic minimisers of the discrete action, their
//! certificates, heteroclinic windows and a convergent-based probe of
//! irrational rotation numbers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{map_forward, ImpactState, OrbitWindow};
use crate::error::{Error, Result};
use crate::extension::ExtensionContext;

/// Euler-Lagrange residual accepted by the periodic solver.
pub const EL_TOLERANCE: f64 = 1e-10;

/// Residual at which Newton stops iterating.
const NEWTON_TARGET: f64 = 1e-12;
const NEWTON_ITERATIONS: usize = 200;
const GRADIENT_STEPS: usize = 50;

/// Relative action difference treated as a tie.
const ACTION_TIE: f64 = 1e-11;

/// Distance under which two canonical configurations are the same.
const SAME_CONFIGURATION: f64 = 1e-7;

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `alpha_* = k + 2`: rotation numbers above it force every gap of a minimiser
/// above `k`, where the extension agrees with the physical generating function.
pub fn alpha_star(ctx: &ExtensionContext) -> f64 {
    ctx.k() + 2.0
}

fn check_ratio(p: u64, q: u64) -> Result<()> {
    if p == 0 || q == 0 {
        return Err(Error::domain("p and q must be positive"));
    }
    if gcd(p, q) != 1 {
        return Err(Error::domain(format!("{p}/{q} is not in lowest terms")));
    }
    Ok(())
}

/// Times `t_i` of the periodic extension for `i` in `from..to`.
pub fn periodic_extension(p: u64, times: &[f64], from: i64, to: i64) -> Vec<f64> {
    let q = times.len() as i64;
    (from..to)
        .map(|i| {
            let period = i.div_euclid(q);
            times[i.rem_euclid(q) as usize] + p as f64 * period as f64
        })
        .collect()
}

fn strictly_monotone(p: u64, times: &[f64]) -> bool {
    times.windows(2).all(|w| w[1] > w[0]) && times[times.len() - 1] < times[0] + p as f64
}

/// Pairs `(t_j, t_{j+1})` of one period, with `t_q = t_0 + p`.
fn pairs(p: u64, times: &[f64]) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
    let q = times.len();
    (0..q).map(move |j| {
        let next = if j + 1 == q { times[0] + p as f64 } else { times[j + 1] };
        (j, (j + 1) % q, times[j], next)
    })
}

pub fn action(ctx: &ExtensionContext, p: u64, times: &[f64]) -> Result<f64> {
    pairs(p, times).map(|(_, _, a, b)| ctx.extended_h(a, b)).sum()
}

/// `G_i = d2 h~(t_{i-1}, t_i) + d1 h~(t_i, t_{i+1})`
pub fn el_gradient(ctx: &ExtensionContext, p: u64, times: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; times.len()];
    for (i, j, a, b) in pairs(p, times) {
        let (h0, h1) = ctx.extended_partials(a, b)?;
        g[i] += h0;
        g[j] += h1;
    }
    Ok(g)
}

pub fn el_residual(ctx: &ExtensionContext, p: u64, times: &[f64]) -> Result<f64> {
    Ok(el_gradient(ctx, p, times)?.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Second variation of the periodic action: cyclic tridiagonal with the
/// mixed derivatives off the diagonal.
pub fn el_jacobian(ctx: &ExtensionContext, p: u64, times: &[f64]) -> Result<DMatrix<f64>> {
    let q = times.len();
    let mut h = DMatrix::zeros(q, q);
    for (i, j, a, b) in pairs(p, times) {
        let (h00, h01, h11) = ctx.extended_second_partials(a, b)?;
        h[(i, i)] += h00;
        h[(j, j)] += h11;
        h[(i, j)] += h01;
        h[(j, i)] += h01;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicConfiguration {
    pub p: u64,
    pub q: u64,
    pub times: Vec<f64>,
    pub action: f64,
    pub el_residual: f64,
}

impl PeriodicConfiguration {
    /// Validates `p/q` and ordering, then evaluates action and residual.
    pub fn evaluate(ctx: &ExtensionContext, p: u64, times: Vec<f64>) -> Result<Self> {
        let q = times.len() as u64;
        check_ratio(p, q)?;
        if !strictly_monotone(p, &times) {
            return Err(Error::Ordering("configuration times are not strictly increasing".into()));
        }
        let action = action(ctx, p, &times)?;
        let el_residual = el_residual(ctx, p, &times)?;
        Ok(Self {
            p,
            q,
            times,
            action,
            el_residual,
        })
    }

    pub fn rotation(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// Times `t_i` for `i` in `from..to`.
    pub fn extended(&self, from: i64, to: i64) -> Vec<f64> {
        periodic_extension(self.p, &self.times, from, to)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.extended(0, self.q as i64 + 1).windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Same orbit re-indexed so that `t_0` is the smallest phase in `[0, 1)`.
    pub fn canonical(&self) -> Self {
        let q = self.q as i64;
        let mut best: Option<Vec<f64>> = None;
        for m in 0..q {
            let seq = self.extended(m, m + q);
            let shift = seq[0].floor();
            let cand: Vec<f64> = seq.iter().map(|t| t - shift).collect();
            let better = match &best {
                None => true,
                Some(b) => lexicographic(&cand, b) == std::cmp::Ordering::Less,
            };
            if better {
                best = Some(cand);
            }
        }
        Self {
            times: best.expect("q >= 1"),
            ..self.clone()
        }
    }

    /// Largest gap between the impact phases on the circle.
    pub fn max_projected_gap(&self) -> f64 {
        let mut phases: Vec<f64> = self.times.iter().map(|t| t.rem_euclid(1.0)).collect();
        phases.sort_by(f64::total_cmp);
        let mut gap = phases[0] + 1.0 - phases[phases.len() - 1];
        for w in phases.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Solve `(H + mu I) dx = -g`, raising `mu` until the matrix is positive
/// definite and the step is a descent direction.
fn regularised_step(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(1e-300, f64::max);
    let mut mu = 0.0;
    for _ in 0..60 {
        let m = h + DMatrix::identity(n, n) * mu;
        if let Some(ch) = m.cholesky() {
            let dx = ch.solve(&(-g));
            if dx.iter().all(|v| v.is_finite()) && g.dot(&dx) < 0.0 {
                return Some(dx);
            }
        }
        mu = if mu == 0.0 { 1e-10 * scale } else { 4.0 * mu };
    }
    None
}

/// Local minimisation from one start. Returns the converged times.
pub fn minimize_from(ctx: &ExtensionContext, p: u64, start: &[f64]) -> Result<Vec<f64>> {
    check_ratio(p, start.len() as u64)?;
    if !strictly_monotone(p, start) {
        return Err(Error::Ordering("start configuration is not monotone".into()));
    }
    let mut x = start.to_vec();
    let mut w = action(ctx, p, &x)?;
    for _ in 0..NEWTON_ITERATIONS {
        let g = DVector::from_vec(el_gradient(ctx, p, &x)?);
        let res = g.amax();
        if res < NEWTON_TARGET {
            return Ok(x);
        }
        let h = el_jacobian(ctx, p, &x)?;
        let accepted = match regularised_step(&h, &g) {
            Some(dx) => newton_line_search(ctx, p, &x, w, res, &g, &dx)?,
            None => None,
        };
        match accepted {
            Some((xn, wn)) => {
                x = xn;
                w = wn;
            }
            None => {
                let (xn, wn) = gradient_descent(ctx, p, &x, w)?;
                if sup_distance(&xn, &x) == 0.0 {
                    break;
                }
                x = xn;
                w = wn;
            }
        }
    }
    let res = el_residual(ctx, p, &x)?;
    if res < EL_TOLERANCE {
        return Ok(x);
    }
    Err(Error::Solver(format!("Newton stalled at residual {res:e}")))
}

fn newton_line_search(
    ctx: &ExtensionContext,
    p: u64,
    x: &[f64],
    w: f64,
    res: f64,
    g: &DVector<f64>,
    dx: &DVector<f64>,
) -> Result<Option<(Vec<f64>, f64)>> {
    let slope = g.dot(dx);
    let mut lambda = 1.0;
    while lambda > 1e-10 {
        let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + lambda * d).collect();
        if strictly_monotone(p, &xn) {
            if let Ok(wn) = action(ctx, p, &xn) {
                if wn <= w + 1e-4 * lambda * slope {
                    return Ok(Some((xn, wn)));
                }
                // near convergence the action is flat to rounding; use the
                // residual instead
                if res < 1e-6 && lambda == 1.0 && el_residual(ctx, p, &xn)? < res {
                    return Ok(Some((xn, wn)));
                }
            }
        }
        lambda *= 0.5;
    }
    Ok(None)
}

fn gradient_descent(ctx: &ExtensionContext, p: u64, x: &[f64], w: f64) -> Result<(Vec<f64>, f64)> {
    let mut x = x.to_vec();
    let mut w = w;
    let mut step = 1e-2;
    for _ in 0..GRADIENT_STEPS {
        let g = el_gradient(ctx, p, &x)?;
        let norm2: f64 = g.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            break;
        }
        let mut moved = false;
        while step > 1e-14 {
            let xn: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a - step * d).collect();
            if strictly_monotone(p, &xn) {
                if let Ok(wn) = action(ctx, p, &xn) {
                    if wn <= w - 1e-4 * step * norm2 {
                        x = xn;
                        w = wn;
                        step *= 2.0;
                        moved = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((x, w))
}

/// Multistart initial configurations; deterministic in `seed`.
pub fn multistart_starts(p: u64, q: u64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = p as f64 / q as f64;
    (0..count)
        .map(|_| {
            let t0: f64 = rng.gen_range(0.0..1.0);
            (0..q)
                .map(|i| t0 + i as f64 * alpha + rng.gen_range(-0.3..0.3) * alpha)
                .collect()
        })
        .collect()
}

/// Distinct converged configurations from a multistart run, sorted by action
/// and then by canonical times.
pub fn critical_configurations(
    ctx: &ExtensionContext,
    p: u64,
    q: u64,
    multistarts: usize,
    seed: u64,
) -> Result<Vec<PeriodicConfiguration>> {
    check_ratio(p, q)?;
    let starts = multistart_starts(p, q, multistarts, seed);
    let results: Vec<Result<PeriodicConfiguration>> = starts
        .par_iter()
        .map(|s| {
            let x = minimize_from(ctx, p, s)?;
            Ok(PeriodicConfiguration::evaluate(ctx, p, x)?.canonical())
        })
        .collect();
    let mut found: Vec<PeriodicConfiguration> = Vec::new();
    let mut last_error = None;
    for r in results {
        match r {
            Ok(c) if c.el_residual < EL_TOLERANCE => {
                if !found.iter().any(|f| sup_distance(&f.times, &c.times) < SAME_CONFIGURATION) {
                    found.push(c);
                }
            }
            Ok(c) => last_error = Some(Error::Solver(format!("residual {:e} above tolerance", c.el_residual))),
            Err(e) => last_error = Some(e),
        }
    }
    if found.is_empty() {
        return Err(Error::Solver(format!(
            "no start out of {multistarts} converged for {p}/{q}; last failure: {}",
            last_error.map(|e| e.to_string()).unwrap_or_else(|| "none".into())
        )));
    }
    found.sort_by(|a, b| {
        let tie = ACTION_TIE * a.action.abs().max(b.action.abs()).max(1.0);
        if (a.action - b.action).abs() <= tie {
            lexicographic(&a.times, &b.times)
        } else {
            a.action.total_cmp(&b.action)
        }
    });
    Ok(found)
}

/// Minimal `(p, q)` configuration among all multistart critical points.
pub fn minimize_periodic(
    ctx: &ExtensionContext,
    p: u64,
    q: u64,
    multistarts: usize,
    seed: u64,
) -> Result<PeriodicConfiguration> {
    check_ratio(p, q)?;
    let alpha = p as f64 / q as f64;
    if alpha <= alpha_star(ctx) {
        return Err(Error::Precondition(format!(
            "rotation number {p}/{q} must exceed alpha_* = {}",
            alpha_star(ctx)
        )));
    }
    let best = critical_configurations(ctx, p, q, multistarts, seed)?.remove(0);
    if !strictly_monotone(p, &best.times) {
        return Err(Error::Ordering("minimiser is not monotone".into()));
    }
    Ok(best)
}

/// `(t_n - t_0) / n`
pub fn rotation_number(window: &OrbitWindow) -> Result<f64> {
    let s = window.states();
    if s.len() < 2 {
        return Err(Error::domain("rotation number needs at least two impacts"));
    }
    Ok((s[s.len() - 1].t() - s[0].t()) / (s.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificates {
    /// `|t_n - t_0 - n alpha| < 1` for every `n` in the window.
    pub graph_bound: bool,
    /// `alpha - 2 < gap < alpha + 2` for every gap.
    pub gap_window: bool,
    /// every gap exceeds `k`.
    pub gaps_exceed_k: bool,
    pub max_graph_defect: f64,
    pub min_gap: f64,
    pub max_gap: f64,
}

/// Exhaustive checks of the graph and gap bounds over a window of times.
pub fn certify_bounds(times: &[f64], alpha: f64, k: f64) -> BoundCertificates {
    let graph = times
        .iter()
        .enumerate()
        .fold(0.0, |m: f64, (n, t)| m.max((t - times[0] - n as f64 * alpha).abs()));
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_gap = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    BoundCertificates {
        graph_bound: graph < 1.0,
        gap_window: min_gap > alpha - 2.0 && max_gap < alpha + 2.0,
        gaps_exceed_k: min_gap > k,
        max_graph_defect: graph,
        min_gap,
        max_gap,
    }
}

/// Certificates of a periodic configuration over `periods` periods.
pub fn certify_configuration(ctx: &ExtensionContext, config: &PeriodicConfiguration, periods: u64) -> BoundCertificates {
    let times = config.extended(0, (config.q * periods) as i64 + 1);
    certify_bounds(&times, config.rotation(), ctx.k())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalOrbit {
    pub window: OrbitWindow,
    pub alpha: f64,
    pub bounds: BoundCertificates,
    /// `d1 h~(t_n, t_{n+1}) = -E_n` and `d2 h~(t_n, t_{n+1}) = E_{n+1}` to 1e-9.
    pub energies_consistent: bool,
    /// Impact map started at `(t_0, E_0)` reproduces one period to 1e-8.
    pub map_reproduces: bool,
    pub map_defect: f64,
}

/// Energies from the generating function, then one period of the impact map
/// from `(t_0, E_0)` compared against the configuration.
pub fn reconstruct_orbit(ctx: &ExtensionContext, config: &PeriodicConfiguration) -> Result<MinimalOrbit> {
    let q = config.q as i64;
    let times = config.extended(0, q + 1);
    let k = ctx.k();
    if let Some(gap) = times.windows(2).map(|w| w[1] - w[0]).find(|&g| g <= k) {
        return Err(Error::NotCertified(format!("gap {gap} does not exceed k = {k}")));
    }
    let (h0, _) = ctx.extended_partials(times[0], times[1])?;
    let mut energies = vec![-h0];
    let mut consistent = true;
    for n in 0..q as usize {
        let (d0, d1) = ctx.extended_partials(times[n], times[n + 1])?;
        consistent &= (d0 + energies[n]).abs() <= 1e-9 * energies[n].max(1.0);
        energies.push(d1);
    }
    let states = times
        .iter()
        .zip(&energies)
        .map(|(&t, &e)| ImpactState::from_energy(t, e))
        .collect::<Result<Vec<_>>>()?;
    let g = ctx.base().g();
    let f = ctx.base().forcing();
    let mut s = states[0];
    let mut defect: f64 = 0.0;
    for target in &states[1..] {
        s = map_forward(g, f, &s)?;
        defect = defect.max((s.t() - target.t()).abs());
    }
    Ok(MinimalOrbit {
        window: OrbitWindow::new(states)?,
        alpha: config.rotation(),
        bounds: certify_configuration(ctx, config, 3),
        energies_consistent: consistent,
        map_reproduces: defect <= 1e-8,
        map_defect: defect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderRelation {
    /// `a_i <= b_i` everywhere, not all equal.
    Precedes,
    /// `b_i <= a_i` everywhere, not all equal.
    Follows,
    Equal,
    Incomparable,
}

pub fn order_compare(a: &[f64], b: &[f64]) -> Result<OrderRelation> {
    if a.len() != b.len() {
        return Err(Error::domain(format!("index ranges differ: {} vs {}", a.len(), b.len())));
    }
    let le = a.iter().zip(b).all(|(x, y)| x <= y);
    let ge = a.iter().zip(b).all(|(x, y)| x >= y);
    Ok(match (le, ge) {
        (true, true) => OrderRelation::Equal,
        (true, false) => OrderRelation::Precedes,
        (false, true) => OrderRelation::Follows,
        (false, false) => OrderRelation::Incomparable,
    })
}

/// Which anchor the window starts from.
/// Two ordered minimal `(p, q)` configurations with no minimal configuration
/// between them, from a multistart run. `None` when fewer than two distinct
/// minimisers are found or they are not ordered.
pub fn anchor_pair(
    ctx: &ExtensionContext,
    p: u64,
    q: u64,
    multistarts: usize,
    seed: u64,
) -> Result<Option<(PeriodicConfiguration, PeriodicConfiguration)>> {
    let found = critical_configurations(ctx, p, q, multistarts, seed)?;
    let least = found[0].action;
    let tie = 1e-9 * least.abs().max(1.0);
    let minimal: Vec<&PeriodicConfiguration> = found.iter().filter(|c| c.action - least <= tie).collect();
    if minimal.len() < 2 {
        return Ok(None);
    }
    let span = 2 * q as i64;
    let window = |c: &PeriodicConfiguration| c.extended(-span, span + 1);
    let (lo, hi) = (window(minimal[0]), window(minimal[1]));
    if order_compare(&lo, &hi)? != OrderRelation::Precedes {
        return Ok(None);
    }
    for m in &minimal[2..] {
        let mid = window(m);
        if order_compare(&lo, &mid)? == OrderRelation::Precedes && order_compare(&mid, &hi)? == OrderRelation::Precedes {
            return Ok(None);
        }
    }
    Ok(Some((minimal[0].clone(), minimal[1].clone())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConnectionDirection {
    /// lower anchor at `-N`, upper at `+N`
    LowToHigh,
    /// upper anchor at `-N`, lower at `+N`
    HighToLow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionWindow {
    pub n: usize,
    pub direction: ConnectionDirection,
    /// Indices `-N..=N`.
    pub indices: Vec<i64>,
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Distance to the starting anchor at index `-N/3` and to the final anchor
    /// at `+N/3`.
    pub tail_defects: (f64, f64),
    pub el_residual: f64,
    /// `lower <= times <= upper` pointwise.
    pub ordered: bool,
    /// The periodic problem has a (numerically) zero second variation, as for
    /// a continuous family of translates.
    pub flat_direction: bool,
}

impl ConnectionWindow {
    /// First index at which the connection has crossed halfway between its
    /// anchors.
    pub fn transition_index(&self) -> Option<i64> {
        let (from, to) = match self.direction {
            ConnectionDirection::LowToHigh => (&self.lower, &self.upper),
            ConnectionDirection::HighToLow => (&self.upper, &self.lower),
        };
        (0..self.times.len())
            .find(|&i| (self.times[i] - from[i]).abs() > (self.times[i] - to[i]).abs())
            .map(|i| self.indices[i])
    }
}

fn window_action_terms(
    ctx: &ExtensionContext,
    full: &[f64],
) -> Result<(f64, Vec<f64>, Vec<(f64, f64, f64)>)> {
    let n = full.len();
    let mut w = 0.0;
    let mut grad = vec![0.0; n];
    let mut hess = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        w += ctx.extended_h(full[i], full[i + 1])?;
        let (h0, h1) = ctx.extended_partials(full[i], full[i + 1])?;
        grad[i] += h0;
        grad[i + 1] += h1;
        hess.push(ctx.extended_second_partials(full[i], full[i + 1])?);
    }
    Ok((w, grad, hess))
}

fn interior_residual(ctx: &ExtensionContext, full: &[f64]) -> Result<f64> {
    let n = full.len();
    let mut worst: f64 = 0.0;
    let mut prev = ctx.extended_partials(full[0], full[1])?;
    for i in 1..n - 1 {
        let next = ctx.extended_partials(full[i], full[i + 1])?;
        worst = worst.max((prev.1 + next.0).abs());
        prev = next;
    }
    Ok(worst)
}

fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Windowed connecting orbit between two ordered periodic configurations.
///
/// Minimises `sum_{i=-N}^{N-1} h~(x_i, x_{i+1})` with `x_{-N}` and `x_N`
/// clamped to the anchors.
pub fn heteroclinic(
    ctx: &ExtensionContext,
    low: &PeriodicConfiguration,
    high: &PeriodicConfiguration,
    n: usize,
    direction: ConnectionDirection,
) -> Result<ConnectionWindow> {
    if low.p != high.p || low.q != high.q {
        return Err(Error::Precondition("anchors must share the rotation number".into()));
    }
    if n < 3 {
        return Err(Error::Precondition("window half-length must be at least 3".into()));
    }
    let span = n as i64;
    let lower = low.extended(-span, span + 1);
    let upper = high.extended(-span, span + 1);
    match order_compare(&lower, &upper)? {
        OrderRelation::Precedes => {}
        OrderRelation::Equal => {
            return Err(Error::Precondition("anchors coincide; use the sanity mode".into()));
        }
        _ => return Err(Error::Precondition("anchors are not ordered low < high".into())),
    }
    connect(ctx, low, lower, upper, n, direction)
}

/// Degenerate connection with both ends on the same configuration. The
/// solver must return the configuration itself.
pub fn heteroclinic_sanity(ctx: &ExtensionContext, config: &PeriodicConfiguration, n: usize) -> Result<ConnectionWindow> {
    let span = n as i64;
    let seq = config.extended(-span, span + 1);
    connect(ctx, config, seq.clone(), seq, n, ConnectionDirection::LowToHigh)
}

fn connect(
    ctx: &ExtensionContext,
    anchor: &PeriodicConfiguration,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n: usize,
    direction: ConnectionDirection,
) -> Result<ConnectionWindow> {
    let span = n as i64;
    let len = 2 * n + 1;
    let (from, to) = match direction {
        ConnectionDirection::LowToHigh => (&lower, &upper),
        ConnectionDirection::HighToLow => (&upper, &lower),
    };
    // smooth switch centred on index 0
    let mut x: Vec<f64> = (0..len)
        .map(|i| {
            let s = (i as f64 - n as f64) / (0.1 * n as f64 + 1.0);
            let sigma = 0.5 * (1.0 + s.tanh());
            from[i] + sigma * (to[i] - from[i])
        })
        .collect();
    x[0] = from[0];
    x[len - 1] = to[len - 1];

    let m = len - 2;
    let mut converged = false;
    for _ in 0..NEWTON_ITERATIONS {
        let (w, grad, hess) = window_action_terms(ctx, &x)?;
        let g = DVector::from_iterator(m, grad[1..len - 1].iter().cloned());
        let res = g.amax();
        if res < 1e-12 {
            converged = true;
            break;
        }
        let mut hm = DMatrix::zeros(m, m);
        for (i, &(h00, h01, h11)) in hess.iter().enumerate() {
            // pair (i, i+1) in full indexing; interior unknowns are 1..len-1
            if i >= 1 {
                hm[(i - 1, i - 1)] += h00;
            }
            if i < m {
                hm[(i, i)] += h11;
            }
            if i >= 1 && i < m {
                hm[(i - 1, i)] += h01;
                hm[(i, i - 1)] += h01;
            }
        }
        let Some(dx) = regularised_step(&hm, &g) else {
            break;
        };
        let slope = g.dot(&dx);
        let mut lambda = 1.0;
        let mut moved = false;
        while lambda > 1e-10 {
            let mut xn = x.clone();
            for i in 0..m {
                xn[i + 1] += lambda * dx[i];
            }
            if xn.windows(2).all(|p| p[1] > p[0]) {
                let wn: Result<f64> = xn.windows(2).map(|p| ctx.extended_h(p[0], p[1])).sum();
                if let Ok(wn) = wn {
                    let accept = wn <= w + 1e-4 * lambda * slope
                        || (res < 1e-6 && lambda == 1.0 && interior_residual(ctx, &xn)? < res);
                    if accept {
                        x = xn;
                        moved = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let el_residual = interior_residual(ctx, &x)?;
    if !converged && el_residual >= 1e-8 {
        return Err(Error::Solver(format!("connection did not converge, residual {el_residual:e}")));
    }
    let third = n / 3;
    let left = n - third;
    let right = n + third;
    let tail_defects = ((x[left] - from[left]).abs(), (x[right] - to[right]).abs());
    let ordered = (0..len).all(|i| lower[i] <= x[i] + 1e-12 && x[i] <= upper[i] + 1e-12);
    let hessian = el_jacobian(ctx, anchor.p, &anchor.times)?;
    let scale = (0..hessian.nrows()).map(|i| hessian[(i, i)].abs()).fold(1.0, f64::max);
    let flat_direction = smallest_eigenvalue(&hessian).abs() < 1e-8 * scale;
    Ok(ConnectionWindow {
        n,
        direction,
        indices: (-span..=span).collect(),
        times: x,
        lower,
        upper,
        tail_defects,
        el_residual,
        ordered,
        flat_direction,
    })
}

/// Continued-fraction convergents `p_n / q_n` of `alpha`.
pub fn convergents(alpha: f64, count: usize) -> Vec<(u64, u64)> {
    let mut out = Vec::with_capacity(count);
    let (mut p0, mut q0, mut p1, mut q1) = (1u64, 0u64, alpha.floor() as u64, 1u64);
    let mut x = alpha;
    out.push((p1, q1));
    while out.len() < count {
        let frac = x - x.floor();
        if frac < 1e-12 {
            break;
        }
        x = 1.0 / frac;
        let a = x.floor() as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        out.push((p1, q1));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergentRecord {
    pub p: u64,
    pub q: u64,
    /// `None` when the convergent lies at or below `alpha_*`.
    pub max_gap: Option<f64>,
    pub action: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorReport {
    pub alpha: f64,
    pub records: Vec<ConvergentRecord>,
    /// Least-squares slope of `log(max_gap)` against `log(q)`.
    pub log_slope: Option<f64>,
    /// Evidence only: "curve-like" when gaps shrink like `1/q`, else
    /// "cantor-like".
    pub trend: String,
}

/// Maximal projected gap of the periodic minimiser at each convergent.
pub fn cantor_probe(ctx: &ExtensionContext, alpha: f64, depth: usize, multistarts: usize, seed: u64) -> Result<CantorReport> {
    if depth > 8 {
        return Err(Error::Precondition("depth is limited to 8".into()));
    }
    if alpha <= alpha_star(ctx) {
        return Err(Error::Precondition(format!("alpha {alpha} must exceed alpha_* = {}", alpha_star(ctx))));
    }
    let mut records = Vec::new();
    for (p, q) in convergents(alpha, depth + 1) {
        if (p as f64 / q as f64) <= alpha_star(ctx) {
            records.push(ConvergentRecord {
                p,
                q,
                max_gap: None,
                action: None,
                note: "skipped: below alpha_*".into(),
            });
            continue;
        }
        let c = minimize_periodic(ctx, p, q, multistarts, seed)?;
        records.push(ConvergentRecord {
            p,
            q,
            max_gap: Some(c.max_projected_gap()),
            action: Some(c.action),
            note: String::new(),
        });
    }
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.q > 1)
        .filter_map(|r| r.max_gap.map(|g| ((r.q as f64).ln(), g.ln())))
        .collect();
    let log_slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let trend = match log_slope {
        Some(s) if s < -0.5 => "curve-like: gaps shrink with q".to_string(),
        Some(_) => "cantor-like: gaps stabilise".to_string(),
        None => "undetermined".to_string(),
    };
    Ok(CantorReport {
        alpha,
        records,
        log_slope,
        trend,
    })
}
