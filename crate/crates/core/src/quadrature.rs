//! Composite Gauss-Legendre quadrature with panel doubling.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes per panel. Panels are sized from a nodes-per-unit-length budget.
pub const PANEL_ORDER: usize = 16;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes from Newton iteration on the Legendre three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral over [a, b] split into `panels` equal panels.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let half = 0.5 * h;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut acc = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * f(mid + half * x);
            }
            total += acc * half;
        }
        total
    }
}

/// (P_n(x), P_n'(x))
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

/// Panel count so that roughly `nodes_per_unit` nodes fall in each unit length.
pub(crate) fn panels_for(length: f64, nodes_per_unit: usize) -> usize {
    let n = (length.abs() * nodes_per_unit as f64 / PANEL_ORDER as f64).ceil() as usize;
    n.max(1)
}

/// Settings shared by every adaptive integral in the extension.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    pub nodes_per_unit: usize,
    pub tolerance: f64,
    pub max_doublings: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            nodes_per_unit: 32,
            tolerance: 1e-10,
            max_doublings: 5,
        }
    }
}

impl QuadratureSettings {
    /// Evaluate `rule(nodes_per_unit)` at doubling resolutions until two
    /// successive values agree to `tolerance * max(1, |value|)`.
    pub fn converge<F: FnMut(usize) -> f64>(&self, mut rule: F) -> Result<f64> {
        let mut npu = self.nodes_per_unit.max(1);
        let mut prev = rule(npu);
        let mut diff = f64::INFINITY;
        for _ in 0..self.max_doublings {
            npu *= 2;
            let next = rule(npu);
            diff = (next - prev).abs();
            if diff <= self.tolerance * next.abs().max(1.0) {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::Accuracy {
            requested: self.tolerance,
            achieved: diff,
        })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let rule = panel_rule();
        let base = self.nodes_per_unit.max(1);
        let p0 = panels_for(b - a, base);
        self.converge(|npu| rule.composite(&f, a, b, p0 * (npu / base)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(5);
        // degree 9 is the highest exact degree for 5 nodes
        let v = gl.composite(|x| x.powi(9) + 3.0 * x.powi(8), -1.0, 1.0, 1);
        assert!((v - 6.0 / 9.0).abs() < 1e-14);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sixteen_point_nodes_are_symmetric_roots() {
        let gl = GaussLegendre::new(PANEL_ORDER);
        for (i, x) in gl.nodes.iter().enumerate() {
            assert!((x + gl.nodes[PANEL_ORDER - 1 - i]).abs() < 1e-15);
            assert!(legendre(PANEL_ORDER, *x).0.abs() < 1e-13);
        }
    }

    #[test]
    fn adaptive_integral_of_oscillatory_function() {
        let s = QuadratureSettings::default();
        let v = s.integrate(|x| (7.0 * x).cos(), 0.3, 4.1).unwrap();
        let exact = ((7.0f64 * 4.1).sin() - (7.0f64 * 0.3).sin()) / 7.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn reports_accuracy_failure() {
        let s = QuadratureSettings {
            nodes_per_unit: 1,
            tolerance: 1e-30,
            max_doublings: 1,
        };
        let err = s.integrate(|x| (50.0 * x).sin(), 0.0, 3.0).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }
}
