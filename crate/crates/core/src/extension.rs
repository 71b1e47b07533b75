//! Globally twisting extension of the generating function.
//!
//! Below the seam `t1 - t0 = k` the mixed derivative is replaced by
//!
//! ```text
//! D(t0, t1) = d((s - k)/2, (s + k)/2) + T(t0, t1)(D - k)/2 + H (D - k)^2
//! ```
//!
//! with `s = t0 + t1`, `D = t1 - t0` and `T = dd/dt1 - dd/dt0`. The extended
//! function solves `u_{t0 t1} = d~` with Cauchy data taken from `h` on the
//! seam, and is recovered by integrating along characteristics:
//!
//! ```text
//! u(a, b) = (phi(a) + phi(b - k))/2 + (1/2) int_a^{b-k} psi
//!           + int_{a+k}^{b} int_{s-k}^{a} d~(r, s) dr ds
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genfun::GeneratingContext;
use crate::quadrature::{panel_rule, panels_for, QuadratureSettings};

/// Margin factor applied to the sampled third-derivative maximum.
const C_SAFETY: f64 = 1.5;

/// Grid used to bound `|T|` when building the constants.
const BOUND_PHASES: usize = 41;
const BOUND_GAPS: usize = 201;

/// Below-seam band lower edge used for the bound and for verification.
pub const LOWER_GAP: f64 = -2.0;

/// `inf_{x < x0} (A + C (x - x0)) / (x - x0)^2`.
pub fn phi_infimum(a: f64, c: f64, x0: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain(format!("phi needs A > 0, got {a}")));
    }
    if !x0.is_finite() || !c.is_finite() {
        return Err(Error::domain("phi parameters must be finite"));
    }
    // stationary point at x = x0 - 2A/C when C > 0; otherwise phi > 0 and
    // decays to zero as x -> -inf
    Ok(if c > 0.0 { -c * c / (4.0 * a) } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConstants {
    pub k: f64,
    pub epsilon: f64,
    pub epsilon_tilde: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

/// Cauchy data on the seam at one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    /// `h(t0, t0 + k)`
    pub phi: f64,
    /// `(h_1 - h_0)(t0, t0 + k)`
    pub psi: f64,
    /// `(h_0 + h_1)(t0, t0 + k)`
    pub phi_prime: f64,
}

#[derive(Debug, Clone)]
pub struct ExtensionContext {
    base: GeneratingContext,
    constants: ExtensionConstants,
    quad: QuadratureSettings,
}

impl ExtensionContext {
    pub fn new(base: GeneratingContext) -> Result<Self> {
        Self::with_quadrature(base, QuadratureSettings::default())
    }

    pub fn with_quadrature(mut base: GeneratingContext, quad: QuadratureSettings) -> Result<Self> {
        let k = base.cert().k;
        let epsilon = base.cert().epsilon;
        let epsilon_tilde = 0.5 * epsilon;
        let a = epsilon_tilde - epsilon;
        let sampled = (0..BOUND_PHASES)
            .into_par_iter()
            .map(|i| {
                let t0 = i as f64 / (BOUND_PHASES - 1) as f64;
                (0..BOUND_GAPS)
                    .map(|j| {
                        let delta = LOWER_GAP + (k + 2.0 - LOWER_GAP) * j as f64 / (BOUND_GAPS - 1) as f64;
                        base.third_derivative_difference(t0, t0 + delta).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        let g = base.g();
        let bound = C_SAFETY * sampled.max(0.5 * g * g);
        let c = 0.5 * bound;
        let i = phi_infimum(a, c, k)?;
        let h = i - 1.0;
        base.set_epsilon_tilde(epsilon_tilde);
        Ok(Self {
            base,
            constants: ExtensionConstants {
                k,
                epsilon,
                epsilon_tilde,
                a,
                c,
                i,
                h,
            },
            quad,
        })
    }

    pub fn base(&self) -> &GeneratingContext {
        &self.base
    }

    pub fn constants(&self) -> &ExtensionConstants {
        &self.constants
    }

    pub fn quadrature(&self) -> &QuadratureSettings {
        &self.quad
    }

    pub fn k(&self) -> f64 {
        self.constants.k
    }

    /// `D(t0, t1)` evaluated as written, on either side of the seam.
    pub fn seam_correction(&self, t0: f64, t1: f64) -> f64 {
        let k = self.constants.k;
        let s = t0 + t1;
        let x = t1 - t0 - k;
        self.base.cross_derivative(0.5 * (s - k), 0.5 * (s + k))
            + 0.5 * self.base.third_derivative_difference(t0, t1) * x
            + self.constants.h * x * x
    }

    /// Right-hand side of the chain inequality `eps + C|x| + I x^2`.
    pub fn chain_bound(&self, t0: f64, t1: f64) -> f64 {
        let x = t1 - t0 - self.constants.k;
        self.constants.epsilon + self.constants.c * x.abs() + self.constants.i * x * x
    }

    /// The modified mixed derivative `d~`.
    pub fn extended_cross(&self, t0: f64, t1: f64) -> f64 {
        if t1 - t0 >= self.constants.k {
            self.base.cross_derivative(t0, t1)
        } else {
            self.seam_correction(t0, t1)
        }
    }

    pub fn boundary_data(&self, t0: f64) -> BoundaryData {
        let t1 = t0 + self.constants.k;
        let (h0, h1) = self.base.h_partials(t0, t1);
        BoundaryData {
            phi: self.base.h_value(t0, t1),
            psi: h1 - h0,
            phi_prime: h0 + h1,
        }
    }

    fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        self.quad.integrate(f, a, b)
    }

    /// `int_{a+k}^{b} int_{s-k}^{a} d~(r, s) dr ds`
    fn characteristic_double_integral(&self, a: f64, b: f64) -> Result<f64> {
        let k = self.constants.k;
        let (s0, s1) = (a + k, b);
        if s0 == s1 {
            return Ok(0.0);
        }
        let rule = panel_rule();
        let base = self.quad.nodes_per_unit.max(1);
        let outer_panels = panels_for(s1 - s0, base);
        self.quad.converge(|npu| {
            let scale = npu / base;
            rule.composite(
                |s| {
                    let (r0, r1) = (s - k, a);
                    if r0 == r1 {
                        return 0.0;
                    }
                    let inner = panels_for(r1 - r0, base) * scale;
                    rule.composite(|r| self.extended_cross(r, s), r0, r1, inner)
                },
                s0,
                s1,
                outer_panels * scale,
            )
        })
    }

    /// Solution of the seam Cauchy problem at any point, from the
    /// characteristic representation. Used below the seam and, as an
    /// independent check, above it.
    pub fn cauchy_value(&self, t0: f64, t1: f64) -> Result<f64> {
        let k = self.constants.k;
        let b0 = self.boundary_data(t0).phi;
        let b1 = self.boundary_data(t1 - k).phi;
        let psi = self.integrate(|x| self.boundary_data(x).psi, t0, t1 - k)?;
        let area = self.characteristic_double_integral(t0, t1)?;
        Ok(0.5 * (b0 + b1) + 0.5 * psi + area)
    }

    pub fn extended_h(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 - t0 >= self.constants.k {
            Ok(self.base.h_value(t0, t1))
        } else {
            self.cauchy_value(t0, t1)
        }
    }

    /// `(d h~/dt0, d h~/dt1)`
    pub fn extended_partials(&self, t0: f64, t1: f64) -> Result<(f64, f64)> {
        let k = self.constants.k;
        if t1 - t0 >= k {
            return Ok(self.base.h_partials(t0, t1));
        }
        let lower = self.boundary_data(t1 - k);
        let h1 = 0.5 * (lower.phi_prime + lower.psi) + self.integrate(|s| self.extended_cross(s, t1), t1 - k, t0)?;
        let upper = self.boundary_data(t0);
        let h0 = 0.5 * (upper.phi_prime - upper.psi) - self.integrate(|s| self.extended_cross(t0, s), t1, t0 + k)?;
        Ok((h0, h1))
    }

    /// `(h~_00, h~_01, h~_11)`. Below the seam the pure second derivatives come
    /// from central differences of the partials.
    pub fn extended_second_partials(&self, t0: f64, t1: f64) -> Result<(f64, f64, f64)> {
        if t1 - t0 >= self.constants.k {
            return Ok(self.base.h_second_partials(t0, t1));
        }
        // h~ is C^2 across the seam, so the stencil may straddle it
        let e = 1e-5;
        let (p0, _) = self.extended_partials(t0 + e, t1)?;
        let (m0, _) = self.extended_partials(t0 - e, t1)?;
        let (_, p1) = self.extended_partials(t0, t1 + e)?;
        let (_, m1) = self.extended_partials(t0, t1 - e)?;
        Ok(((p0 - m0) / (2.0 * e), self.extended_cross(t0, t1), (p1 - m1) / (2.0 * e)))
    }

    pub fn verify_extension(&self, grid: &GridSpec) -> Result<ExtensionReport> {
        verify(self, grid)
    }
}

/// Sampling density for [`ExtensionContext::verify_extension`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Phases in `[0, 1]` for the twist scan.
    pub phases: usize,
    /// Gaps in `[-2, k + 2]` for the twist scan.
    pub gaps: usize,
    /// Seam points for the C^1 check.
    pub seam_points: usize,
    /// Points above the seam compared with `h`.
    pub agreement_points: usize,
    /// Points below the seam for the mixed-difference check.
    pub fd_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            phases: 41,
            gaps: 161,
            seam_points: 50,
            agreement_points: 24,
            fd_points: 30,
        }
    }
}

impl GridSpec {
    /// Every count doubled.
    pub fn refined(&self) -> Self {
        Self {
            phases: 2 * self.phases - 1,
            gaps: 2 * self.gaps - 1,
            seam_points: 2 * self.seam_points,
            agreement_points: 2 * self.agreement_points,
            fd_points: 2 * self.fd_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub max_defect: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRow {
    fn upper(check: &str, value: f64, threshold: f64) -> Self {
        Self {
            check: check.to_string(),
            max_defect: value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub constants: ExtensionConstants,
    pub rows: Vec<CheckRow>,
}

impl ExtensionReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.check == name)
    }
}

/// Check names in report order.
pub mod checks {
    pub const TWIST: &str = "twist_max";
    pub const SEAM_VALUE: &str = "seam_value_jump";
    pub const SEAM_SLOPE: &str = "seam_slope_jump";
    pub const AGREEMENT: &str = "agreement_above_seam";
    pub const MIXED_FD: &str = "mixed_fd_below_seam";
    pub const PARTIALS_FD: &str = "partials_fd_below_seam";
    pub const CHAIN: &str = "chain_inequality";
    pub const PERIODICITY: &str = "diagonal_periodicity";
}

/// Second-order one-sided derivative `(-3u0 + 4u1 - u2) / (2e)` with step `e`
/// (negative `e` differences to the left).
fn one_sided(u: impl Fn(f64) -> f64, e: f64) -> f64 {
    (-3.0 * u(0.0) + 4.0 * u(e) - u(2.0 * e)) / (2.0 * e)
}

fn mixed_difference(ctx: &ExtensionContext, a: f64, b: f64, e: f64) -> Result<f64> {
    let pp = ctx.extended_h(a + e, b + e)?;
    let pm = ctx.extended_h(a + e, b - e)?;
    let mp = ctx.extended_h(a - e, b + e)?;
    let mm = ctx.extended_h(a - e, b - e)?;
    Ok((pp - pm - mp + mm) / (4.0 * e * e))
}

fn verify(ctx: &ExtensionContext, grid: &GridSpec) -> Result<ExtensionReport> {
    let k = ctx.k();
    let cst = *ctx.constants();
    let mut rows = Vec::new();

    // (a) twist on the full band, plus the chain inequality below the seam
    let (twist, chain, period) = (0..grid.phases)
        .into_par_iter()
        .map(|i| {
            let t0 = i as f64 / (grid.phases - 1).max(1) as f64;
            let mut out = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
            for j in 0..grid.gaps {
                let delta = LOWER_GAP + (k + 2.0 - LOWER_GAP) * j as f64 / (grid.gaps - 1).max(1) as f64;
                let v = ctx.extended_cross(t0, t0 + delta);
                out.0 = out.0.max(v);
                if delta < k {
                    let d = ctx.seam_correction(t0, t0 + delta);
                    let bound = ctx.chain_bound(t0, t0 + delta);
                    // both steps of the chain: D <= bound <= eps~
                    out.1 = out.1.max((d - bound).max(bound - cst.epsilon_tilde));
                }
                let shifted = ctx.extended_cross(t0 + 1.0, t0 + 1.0 + delta);
                out.2 = out.2.max((shifted - v).abs());
            }
            out
        })
        .reduce(
            || (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)),
        );
    rows.push(CheckRow {
        check: checks::TWIST.into(),
        max_defect: twist,
        threshold: cst.epsilon_tilde,
        pass: twist <= cst.epsilon_tilde && cst.epsilon_tilde < 0.0,
    });

    // (b) C^1 matching across the seam
    let e = 3e-5;
    let (value_jump, slope_jump) = (0..grid.seam_points)
        .into_par_iter()
        .map(|i| {
            let t0 = i as f64 / grid.seam_points as f64;
            let t1 = t0 + k;
            let base = ctx.base();
            let value = (ctx.seam_correction(t0, t1) - base.cross_derivative(t0, t1)).abs();
            // d/dt1: above the seam means larger t1
            let up1 = one_sided(|x| base.cross_derivative(t0, t1 + x), e);
            let dn1 = one_sided(|x| ctx.seam_correction(t0, t1 + x), -e);
            // d/dt0: above the seam means smaller t0
            let up0 = one_sided(|x| base.cross_derivative(t0 + x, t1), -e);
            let dn0 = one_sided(|x| ctx.seam_correction(t0 + x, t1), e);
            (value, (up1 - dn1).abs().max((up0 - dn0).abs()))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    rows.push(CheckRow::upper(checks::SEAM_VALUE, value_jump, 1e-10));
    rows.push(CheckRow::upper(checks::SEAM_SLOPE, slope_jump, 1e-6));

    // (c) Cauchy solution against h above the seam
    let n = grid.agreement_points.max(1);
    let agreement = (0..n)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let t0 = ((i as f64) * 0.618_033_988_749_895).fract();
            let delta = k + 2.0 * (i + 1) as f64 / n as f64;
            let h = ctx.base().h_value(t0, t0 + delta);
            let u = ctx.cauchy_value(t0, t0 + delta)?;
            Ok((u - h).abs() / (1.0 + h.abs()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    rows.push(CheckRow::upper(checks::AGREEMENT, agreement, 1e-8));

    // (d) mixed difference of h~ and partials consistency below the seam
    let n = grid.fd_points.max(1);
    let below: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t0 = ((i as f64) * 0.754_877_666_246_693).fract();
            let delta = LOWER_GAP + (k - 0.05 - LOWER_GAP) * (i as f64 + 0.5) / n as f64;
            (t0, t0 + delta)
        })
        .collect();
    let (mixed, partial) = below
        .par_iter()
        .map(|&(a, b)| -> Result<(f64, f64)> {
            let e = 4e-3;
            let coarse = mixed_difference(ctx, a, b, e)?;
            let fine = mixed_difference(ctx, a, b, 0.5 * e)?;
            let mixed = (4.0 * fine - coarse) / 3.0;
            let m = (mixed - ctx.extended_cross(a, b)).abs();
            let (h0, h1) = ctx.extended_partials(a, b)?;
            let step = 1e-3;
            let fd = |da: f64, db: f64| -> Result<f64> {
                let c = (ctx.extended_h(a + da, b + db)? - ctx.extended_h(a - da, b - db)?) / (2.0 * step);
                let f = (ctx.extended_h(a + 0.5 * da, b + 0.5 * db)? - ctx.extended_h(a - 0.5 * da, b - 0.5 * db)?)
                    / step;
                Ok((4.0 * f - c) / 3.0)
            };
            let p = (fd(step, 0.0)? - h0).abs().max((fd(0.0, step)? - h1).abs());
            Ok((m, p))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, 0.0), |a, b| (f64::max(a.0, b.0), f64::max(a.1, b.1)));
    rows.push(CheckRow::upper(checks::MIXED_FD, mixed, 1e-5));
    rows.push(CheckRow::upper(checks::PARTIALS_FD, partial, 1e-6));

    rows.push(CheckRow::upper(checks::CHAIN, chain.max(0.0), 1e-12));

    let h_period = below
        .iter()
        .take(6)
        .map(|&(a, b)| -> Result<f64> { Ok((ctx.extended_h(a + 1.0, b + 1.0)? - ctx.extended_h(a, b)?).abs()) })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(period, f64::max);
    rows.push(CheckRow::upper(checks::PERIODICITY, h_period, 1e-10));

    Ok(ExtensionReport { constants: cst, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::ForcingFunction;

    fn shear() -> ExtensionContext {
        ExtensionContext::new(GeneratingContext::new(2.0, ForcingFunction::zero()).unwrap()).unwrap()
    }

    #[test]
    fn phi_infimum_values() {
        assert_eq!(phi_infimum(1.0, 2.0, 0.0).unwrap(), -1.0);
        assert_eq!(phi_infimum(1.0, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(phi_infimum(4.0, 4.0, 7.0).unwrap(), -1.0);
        assert!(phi_infimum(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn shear_constants() {
        let ctx = shear();
        let c = ctx.constants();
        assert_eq!(c.k, 1.0);
        assert_eq!(c.epsilon, -0.25);
        assert_eq!(c.epsilon_tilde, -0.125);
        assert_eq!(c.a, 0.125);
        assert!(c.h < c.i && c.i <= 0.0);
        assert!((c.c - 0.5 * 1.5 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn shear_boundary_data() {
        let b = shear().boundary_data(0.3);
        assert!((b.phi - 1.0 / 6.0).abs() < 1e-15);
        assert!((b.psi - 1.0).abs() < 1e-15);
        assert!(b.phi_prime.abs() < 1e-15);
    }

    #[test]
    fn shear_cauchy_reproduces_h_above_seam() {
        let ctx = shear();
        let u = ctx.cauchy_value(0.0, 2.0).unwrap();
        assert!((u - 4.0 / 3.0).abs() < 1e-12, "{u}");
    }

    #[test]
    fn seam_continuity() {
        let ctx = shear();
        for t0 in [0.0, 0.37, 5.2] {
            let t1 = t0 + 1.0;
            assert!((ctx.extended_h(t0, t1).unwrap() - ctx.cauchy_value(t0, t1).unwrap()).abs() < 1e-12);
            let (a0, a1) = ctx.extended_partials(t0, t1).unwrap();
            let (b0, b1) = ctx.extended_partials(t0, t1 - 1e-12).unwrap();
            assert!((a0 - b0).abs() < 1e-9 && (a1 - b1).abs() < 1e-9);
        }
    }

    #[test]
    fn shear_twist_below_seam() {
        let ctx = shear();
        let eps_t = ctx.constants().epsilon_tilde;
        for delta in [-2.0, -1.0, 0.0, 0.5, 0.99] {
            assert!(ctx.extended_cross(0.2, 0.2 + delta) <= eps_t);
        }
        assert!((ctx.extended_cross(0.0, 2.0) + 2.0).abs() < 1e-15);
    }
}
