//! The racket motion: a 1-periodic trigonometric polynomial
//!
//! ```text
//! f(t) = c + sum_j ( a_j cos(2 pi j t) + b_j sin(2 pi j t) )
//! ```
//!
//! Derivatives of every order, antiderivatives of `f` and of `f'^2`, and
//! (confluent) divided differences are all evaluated in closed form. Phases
//! are reduced modulo one before any trigonometric call so that results at
//! large times keep the accuracy they have near the origin.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order exposed by [`ForcingFunction::eval_derivative`].
pub const MAX_PUBLIC_ORDER: u32 = 4;

/// Extra Taylor terms tried beyond the leading one before giving up.
const TAYLOR_TERMS: usize = 60;

/// Cosine and sine coefficient of one harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TrigSeries {
    constant: f64,
    // harmonic j lives at index j - 1
    terms: Vec<Harmonic>,
}

/// Phase `2 pi frac(j t)` computed from the fractional part of `t`.
#[inline]
fn phase(j: usize, t: f64) -> f64 {
    let ft = t - t.floor();
    let x = j as f64 * ft;
    TAU * (x - x.floor())
}

/// k-th derivative of `a cos(th) + b sin(th)` with respect to `th`.
#[inline]
fn rotate(k: usize, a: f64, b: f64, c: f64, s: f64) -> f64 {
    match k % 4 {
        0 => a * c + b * s,
        1 => -a * s + b * c,
        2 => -a * c - b * s,
        _ => a * s - b * c,
    }
}

impl TrigSeries {
    fn derivative(&self, order: usize, t: f64) -> f64 {
        let mut acc = if order == 0 { self.constant } else { 0.0 };
        for (idx, h) in self.terms.iter().enumerate() {
            let j = idx + 1;
            if h.cos == 0.0 && h.sin == 0.0 {
                continue;
            }
            let omega = TAU * j as f64;
            let (s, c) = phase(j, t).sin_cos();
            acc += omega.powi(order as i32) * rotate(order, h.cos, h.sin, c, s);
        }
        acc
    }

    /// Antiderivative without the linear part `constant * t`.
    fn periodic_antiderivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (idx, h) in self.terms.iter().enumerate() {
            let j = idx + 1;
            let omega = TAU * j as f64;
            let (s, c) = phase(j, t).sin_cos();
            acc += (h.cos * s - h.sin * c) / omega;
        }
        acc
    }

    fn integral(&self, t0: f64, t1: f64) -> f64 {
        self.constant * (t1 - t0) + self.periodic_antiderivative(t1) - self.periodic_antiderivative(t0)
    }

    fn derivative_coefficients(&self) -> Vec<(f64, f64)> {
        self.terms
            .iter()
            .enumerate()
            .map(|(idx, h)| {
                let omega = TAU * (idx + 1) as f64;
                (omega * h.sin, -omega * h.cos)
            })
            .collect()
    }

    /// `(f')^2` expanded with product-to-sum identities.
    fn derivative_squared(&self) -> TrigSeries {
        let d = self.derivative_coefficients();
        let n = d.len();
        let mut cosc = vec![0.0; 2 * n + 1];
        let mut sinc = vec![0.0; 2 * n + 1];
        for (j0, &(aj, bj)) in d.iter().enumerate() {
            for (k0, &(ak, bk)) in d.iter().enumerate() {
                let (j, k) = (j0 + 1, k0 + 1);
                cosc[j + k] += 0.5 * (aj * ak - bj * bk);
                sinc[j + k] += 0.5 * (aj * bk + bj * ak);
                let cos_part = 0.5 * (aj * ak + bj * bk);
                let sin_part = 0.5 * (bj * ak - aj * bk);
                match j.cmp(&k) {
                    std::cmp::Ordering::Equal => cosc[0] += cos_part,
                    std::cmp::Ordering::Greater => {
                        cosc[j - k] += cos_part;
                        sinc[j - k] += sin_part;
                    }
                    std::cmp::Ordering::Less => {
                        cosc[k - j] += cos_part;
                        sinc[k - j] -= sin_part;
                    }
                }
            }
        }
        TrigSeries {
            constant: cosc[0],
            terms: (1..=2 * n)
                .map(|m| Harmonic {
                    cos: cosc[m],
                    sin: sinc[m],
                })
                .collect(),
        }
    }
}

/// Per-harmonic state for evaluating many derivative orders at one point.
struct PointExpansion {
    constant: f64,
    // (omega, a, b, cos, sin)
    parts: Vec<(f64, f64, f64, f64, f64)>,
}

impl PointExpansion {
    fn new(series: &TrigSeries, t: f64) -> Self {
        let parts = series
            .terms
            .iter()
            .enumerate()
            .filter(|(_, h)| h.cos != 0.0 || h.sin != 0.0)
            .map(|(idx, h)| {
                let j = idx + 1;
                let (s, c) = phase(j, t).sin_cos();
                (TAU * j as f64, h.cos, h.sin, c, s)
            })
            .collect();
        Self {
            constant: series.constant,
            parts,
        }
    }

    /// `f^(k)(t) / k!` for k = 0..=kmax.
    fn scaled_derivatives(&self, kmax: usize) -> Vec<f64> {
        let mut out = vec![0.0; kmax + 1];
        out[0] = self.constant;
        for &(omega, a, b, c, s) in &self.parts {
            // omega^k / k! built incrementally
            let mut scale = 1.0;
            for (k, slot) in out.iter_mut().enumerate() {
                if k > 0 {
                    scale *= omega / k as f64;
                }
                *slot += scale * rotate(k, a, b, c, s);
            }
        }
        out
    }
}

/// Divided difference from Taylor coefficients around a centre.
///
/// For nodes `x_i = m + u_i`, `f[x_0..x_n] = sum_{k>=n} f^(k)(m)/k! h_{k-n}(u)`
/// with `h` the complete homogeneous symmetric polynomial.
fn taylor_from_coefficients(coeffs: &[f64], offsets: &[f64]) -> f64 {
    let n = offsets.len() - 1;
    let terms = coeffs.len() - n;
    let mut h = vec![0.0; terms];
    h[0] = 1.0;
    for &u in offsets {
        for j in 1..terms {
            h[j] += u * h[j - 1];
        }
    }
    let mut sum = 0.0;
    let mut small = 0;
    for j in 0..terms {
        let term = coeffs[n + j] * h[j];
        sum += term;
        if j >= 4 {
            if term.abs() <= 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
                small += 1;
                if small >= 2 {
                    break;
                }
            } else {
                small = 0;
            }
        }
    }
    sum
}

/// External description of a forcing: mean offset plus `(j, a_j, b_j)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub mean_offset: f64,
    pub harmonics: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ForcingSpec", try_from = "ForcingSpec")]
pub struct ForcingFunction {
    series: TrigSeries,
    velocity_square: TrigSeries,
}

impl From<ForcingFunction> for ForcingSpec {
    fn from(f: ForcingFunction) -> Self {
        f.spec()
    }
}

impl TryFrom<ForcingSpec> for ForcingFunction {
    type Error = Error;

    fn try_from(spec: ForcingSpec) -> Result<Self> {
        ForcingFunction::from_terms(spec.mean_offset, &spec.harmonics)
    }
}

impl ForcingFunction {
    /// `harmonics[j - 1] = (a_j, b_j)`.
    pub fn new(mean_offset: f64, harmonics: Vec<(f64, f64)>) -> Result<Self> {
        if !mean_offset.is_finite() || harmonics.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::domain("forcing coefficients must be finite"));
        }
        let mut terms: Vec<Harmonic> = harmonics.into_iter().map(|(cos, sin)| Harmonic { cos, sin }).collect();
        while terms.last().is_some_and(|h| h.cos == 0.0 && h.sin == 0.0) {
            terms.pop();
        }
        let series = TrigSeries {
            constant: mean_offset,
            terms,
        };
        let velocity_square = series.derivative_squared();
        Ok(Self {
            series,
            velocity_square,
        })
    }

    /// Build from `(j, a_j, b_j)` triples; repeated `j` accumulate.
    pub fn from_terms(mean_offset: f64, terms: &[(usize, f64, f64)]) -> Result<Self> {
        let degree = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let mut harmonics = vec![(0.0, 0.0); degree];
        for &(j, a, b) in terms {
            if j == 0 {
                return Err(Error::domain("harmonic index must be at least 1"));
            }
            harmonics[j - 1].0 += a;
            harmonics[j - 1].1 += b;
        }
        Self::new(mean_offset, harmonics)
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vec::new()).expect("zero forcing is valid")
    }

    /// `beta * sin(2 pi t)`
    pub fn sine(beta: f64) -> Self {
        Self::new(0.0, vec![(0.0, beta)]).expect("finite amplitude")
    }

    pub fn spec(&self) -> ForcingSpec {
        ForcingSpec {
            mean_offset: self.series.constant,
            harmonics: self
                .series
                .terms
                .iter()
                .enumerate()
                .filter(|(_, h)| h.cos != 0.0 || h.sin != 0.0)
                .map(|(i, h)| (i + 1, h.cos, h.sin))
                .collect(),
        }
    }

    pub fn mean_offset(&self) -> f64 {
        self.series.constant
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.series.terms
    }

    /// Highest harmonic index present.
    pub fn degree(&self) -> usize {
        self.series.terms.len()
    }

    pub fn is_constant(&self) -> bool {
        self.series.terms.is_empty()
    }

    /// `2 pi J`, or zero for a constant forcing.
    pub fn max_frequency(&self) -> f64 {
        TAU * self.degree() as f64
    }

    pub fn value(&self, t: f64) -> f64 {
        self.series.derivative(0, t)
    }

    pub fn velocity(&self, t: f64) -> f64 {
        self.series.derivative(1, t)
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        self.series.derivative(2, t)
    }

    pub fn eval_derivative(&self, order: u32, t: f64) -> Result<f64> {
        if order > MAX_PUBLIC_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(self.series.derivative(order as usize, t))
    }

    /// Signed integral of `f` over `[t0, t1]`.
    pub fn definite_integral(&self, t0: f64, t1: f64) -> f64 {
        self.series.integral(t0, t1)
    }

    /// Signed integral of `f'(t)^2` over `[t0, t1]`.
    pub fn velocity_square_integral(&self, t0: f64, t1: f64) -> f64 {
        self.velocity_square.integral(t0, t1)
    }

    /// Coefficient-sum upper bound on `sup |f^(order)|`.
    pub fn sup_bound(&self, order: u32) -> f64 {
        let mut acc = if order == 0 { self.series.constant.abs() } else { 0.0 };
        for (idx, h) in self.series.terms.iter().enumerate() {
            let omega = TAU * (idx + 1) as f64;
            acc += omega.powi(order as i32) * (h.cos.abs() + h.sin.abs());
        }
        acc
    }

    /// Node spread below which divided differences switch to the Taylor branch.
    ///
    /// Two nodes: `1e-4 * max(1, |t0| + |t1|)`. Three or more nodes use
    /// `1 / (2 pi J)`, since the quotient recursion loses one power of the
    /// spread per order. Both are capped at `1 / (2 pi J)`: a Taylor radius of
    /// many periods cancels catastrophically, which matters at large times.
    pub fn switch_threshold(&self, nodes: &[f64]) -> f64 {
        let w = self.max_frequency();
        let cap = if w == 0.0 { f64::INFINITY } else { 1.0 / w };
        if nodes.len() <= 2 {
            (1e-4 * nodes.iter().map(|x| x.abs()).sum::<f64>().max(1.0)).min(cap)
        } else {
            cap
        }
    }

    /// `f[x_0, .., x_n]` for two or three (possibly repeated) nodes.
    pub fn divided_difference(&self, nodes: &[f64]) -> Result<f64> {
        check_nodes(nodes)?;
        Ok(self.dd(nodes))
    }

    /// The exact-quotient branch, valid for pairwise distinct nodes.
    pub fn divided_difference_quotient(&self, nodes: &[f64]) -> Result<f64> {
        check_nodes(nodes)?;
        let mut sorted = nodes.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("quotient branch needs distinct nodes"));
        }
        Ok(self.quotient(&sorted, false))
    }

    /// The Taylor branch around the node mean.
    pub fn divided_difference_taylor(&self, nodes: &[f64]) -> Result<f64> {
        check_nodes(nodes)?;
        Ok(self.taylor(nodes))
    }

    /// Divided difference over any number of nodes, switching branches per
    /// sub-problem.
    pub(crate) fn dd(&self, nodes: &[f64]) -> f64 {
        let mut sorted = nodes.to_vec();
        sorted.sort_by(f64::total_cmp);
        self.dd_sorted(&sorted)
    }

    fn dd_sorted(&self, nodes: &[f64]) -> f64 {
        if nodes.len() == 1 {
            return self.value(nodes[0]);
        }
        let spread = nodes[nodes.len() - 1] - nodes[0];
        if spread <= self.switch_threshold(nodes) {
            self.taylor(nodes)
        } else {
            self.quotient(nodes, true)
        }
    }

    fn quotient(&self, nodes: &[f64], recurse_with_switch: bool) -> f64 {
        let n = nodes.len();
        if n == 1 {
            return self.value(nodes[0]);
        }
        let (hi, lo) = if recurse_with_switch {
            (self.dd_sorted(&nodes[1..]), self.dd_sorted(&nodes[..n - 1]))
        } else {
            (self.quotient(&nodes[1..], false), self.quotient(&nodes[..n - 1], false))
        };
        (hi - lo) / (nodes[n - 1] - nodes[0])
    }

    fn taylor(&self, nodes: &[f64]) -> f64 {
        let m = nodes.iter().sum::<f64>() / nodes.len() as f64;
        let offsets: Vec<f64> = nodes.iter().map(|x| x - m).collect();
        let n = nodes.len() - 1;
        let coeffs = PointExpansion::new(&self.series, m).scaled_derivatives(n + TAYLOR_TERMS);
        taylor_from_coefficients(&coeffs, &offsets)
    }

    /// Confluent divided differences `f[t0 (a times), t1 (b times)]` for
    /// `a + b <= 5`.
    pub fn pair_table(&self, t0: f64, t1: f64) -> PairTable {
        PairTable::new(self, t0, t1)
    }
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if !(2..=3).contains(&nodes.len()) {
        return Err(Error::UnsupportedNodes(nodes.len()));
    }
    if nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("divided-difference nodes must be finite"));
    }
    Ok(())
}

/// Largest total node count held by a [`PairTable`].
pub const PAIR_TABLE_NODES: usize = 5;

/// Hermite divided-difference table on two points.
#[derive(Debug, Clone, Copy)]
pub struct PairTable {
    t0: f64,
    t1: f64,
    v: [[f64; PAIR_TABLE_NODES + 1]; PAIR_TABLE_NODES + 1],
}

impl PairTable {
    fn new(f: &ForcingFunction, t0: f64, t1: f64) -> Self {
        const N: usize = PAIR_TABLE_NODES;
        let mut v = [[0.0; N + 1]; N + 1];
        let delta = t1 - t0;
        let radius = f.switch_threshold(&[t0, t0, t1]);
        if delta.abs() <= radius {
            let m = 0.5 * (t0 + t1);
            let coeffs = PointExpansion::new(&f.series, m).scaled_derivatives(N - 1 + TAYLOR_TERMS);
            let (u0, u1) = (t0 - m, t1 - m);
            let mut offsets = Vec::with_capacity(N);
            for a in 0..=N {
                for b in 0..=(N - a) {
                    if a + b == 0 {
                        continue;
                    }
                    offsets.clear();
                    offsets.extend(std::iter::repeat_n(u0, a));
                    offsets.extend(std::iter::repeat_n(u1, b));
                    v[a][b] = taylor_from_coefficients(&coeffs, &offsets);
                }
            }
        } else {
            let d0 = PointExpansion::new(&f.series, t0).scaled_derivatives(N - 1);
            let d1 = PointExpansion::new(&f.series, t1).scaled_derivatives(N - 1);
            for m in 1..=N {
                v[m][0] = d0[m - 1];
                v[0][m] = d1[m - 1];
            }
            for total in 2..=N {
                for a in 1..total {
                    let b = total - a;
                    v[a][b] = (v[a - 1][b] - v[a][b - 1]) / delta;
                }
            }
        }
        Self { t0, t1, v }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// `f[t0 x a, t1 x b]`
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        assert!(a + b >= 1 && a + b <= PAIR_TABLE_NODES, "pair table holds 1..=5 nodes");
        self.v[a][b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mixed() -> ForcingFunction {
        ForcingFunction::from_terms(0.0, &[(1, 0.0, 0.1), (2, 0.05, 0.0)]).unwrap()
    }

    #[test]
    fn accurate_at_large_times() {
        let f = mixed();
        let t0 = 43_774.234_069;
        for delta in [1e-3, 0.3, 5.0, 13.0] {
            let t1 = t0 + delta;
            let shifted = f.dd(&[t0 - 43_774.0, t0 - 43_774.0, t1 - 43_774.0]);
            let tab = f.pair_table(t0, t1);
            assert!((tab.get(2, 1) - shifted).abs() < 1e-8, "delta = {delta}");
            assert!((f.dd(&[t0, t0, t1]) - shifted).abs() < 1e-8, "delta = {delta}");
        }
    }

    #[test]
    fn sine_values() {
        let f = ForcingFunction::sine(0.1);
        assert!((f.eval_derivative(0, 0.25).unwrap() - 0.1).abs() < 1e-15);
        assert!((f.eval_derivative(1, 0.0).unwrap() - 0.2 * PI).abs() < 1e-14);
    }

    #[test]
    fn rejects_order_five() {
        let f = ForcingFunction::sine(0.1);
        assert!(matches!(f.eval_derivative(5, 0.0), Err(Error::UnsupportedOrder(5))));
    }

    #[test]
    fn integrals_of_sine() {
        let f = ForcingFunction::sine(0.1);
        assert!(f.definite_integral(0.0, 1.0).abs() < 1e-16);
        assert!((f.definite_integral(0.0, 0.5) - 0.1 / PI).abs() < 1e-15);
        let beta: f64 = 0.3;
        let g = ForcingFunction::sine(beta);
        let v = g.velocity_square_integral(0.0, 1.0);
        assert!((v - 2.0 * PI * PI * beta * beta).abs() < 1e-13);
    }

    #[test]
    fn constant_forcing_has_no_velocity() {
        let f = ForcingFunction::new(0.7, vec![]).unwrap();
        assert_eq!(f.velocity_square_integral(-3.0, 5.0), 0.0);
        assert!((f.definite_integral(1.0, 3.0) - 1.4).abs() < 1e-15);
        assert_eq!(f.divided_difference(&[0.1, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn trailing_zero_harmonics_are_trimmed() {
        let f = ForcingFunction::new(0.0, vec![(0.0, 0.1), (0.0, 0.0)]).unwrap();
        assert_eq!(f.degree(), 1);
    }

    #[test]
    fn divided_difference_examples() {
        let f = ForcingFunction::sine(0.1);
        assert!(f.divided_difference(&[0.0, 0.5]).unwrap().abs() < 1e-15);
        for t in [0.0, 0.37, 12.9] {
            let v = f.divided_difference(&[t, t]).unwrap();
            assert!((v - f.velocity(t)).abs() < 1e-13);
            let w = f.divided_difference(&[t, t, t]).unwrap();
            assert!((w - 0.5 * f.acceleration(t)).abs() < 1e-12);
        }
        assert!(matches!(f.divided_difference(&[0.0, 1.0, 2.0, 3.0]), Err(Error::UnsupportedNodes(4))));
        assert!(matches!(f.divided_difference(&[0.0]), Err(Error::UnsupportedNodes(1))));
    }

    #[test]
    fn confluent_three_node_formula() {
        let f = mixed();
        let (t, s) = (0.3, 0.9);
        let expected = (f.divided_difference(&[t, s]).unwrap() - f.velocity(t)) / (s - t);
        let got = f.divided_difference(&[t, t, s]).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn branches_agree_near_switch() {
        let f = ForcingFunction::sine(0.1);
        let q = f.divided_difference_quotient(&[0.3, 0.3001]).unwrap();
        let t = f.divided_difference_taylor(&[0.3, 0.3001]).unwrap();
        assert!((q - t).abs() < 1e-10, "{q} vs {t}");
    }

    #[test]
    fn sup_bounds() {
        let f = mixed();
        assert!((f.sup_bound(0) - 0.15).abs() < 1e-15);
        assert!((f.sup_bound(1) - (0.2 * PI + 0.2 * PI)).abs() < 1e-14);
    }

    #[test]
    fn pair_table_matches_generic_engine() {
        let f = mixed();
        for &(t0, t1) in &[(0.2, 0.2), (0.2, 0.21), (0.2, 1.7), (3.1, -0.4), (5.0, 5.0 + 1e-9)] {
            let tab = f.pair_table(t0, t1);
            for a in 0..=3usize {
                for b in 0..=3usize {
                    if a + b == 0 || a + b > 4 {
                        continue;
                    }
                    let mut nodes = vec![t0; a];
                    nodes.extend(std::iter::repeat_n(t1, b));
                    let generic = f.dd(&nodes);
                    let scale = f.sup_bound((a + b - 1) as u32).max(1.0);
                    assert!(
                        (tab.get(a, b) - generic).abs() < 1e-11 * scale,
                        "({t0},{t1}) a={a} b={b}: {} vs {generic}",
                        tab.get(a, b)
                    );
                }
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let f = mixed();
        let s = serde_json::to_string(&f).unwrap();
        let back: ForcingFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
    }
}
