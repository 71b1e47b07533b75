//! The generating function of the impact map and its derivatives.
//!
//! With `D = t1 - t0`,
//!
//! ```text
//! h(t0, t1) = g^2 D^3 / 24 + (g/2)(f(t1) + f(t0)) D - f[t0,t1]^2 D / 2
//!             - g int f + (1/2) int f'^2
//! ```
//!
//! and `dh/dt0 = -w_depart^2 / 2`, `dh/dt1 = w_arrive^2 / 2`. Writing
//! `P = g/2 + f[t0,t0,t1]` and `Q = g/2 + f[t0,t1,t1]`, the departure and
//! arrival velocities are `D P` and `D Q`, and the mixed derivative is
//! `d = -D P Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{ForcingFunction, PairTable};

/// Points per axis of the certificate audit grid.
const AUDIT_PHASES: usize = 50;
const AUDIT_GAPS: usize = 200;
const AUDIT_BAND: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistCertificate {
    pub k: f64,
    pub epsilon: f64,
    /// Filled in once an extension has been built.
    pub epsilon_tilde: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingContext {
    g: f64,
    forcing: ForcingFunction,
    cert: TwistCertificate,
}

/// Velocity factors and confluent differences at one pair of times.
#[derive(Debug, Clone, Copy)]
struct Local {
    delta: f64,
    p: f64,
    q: f64,
    tab: PairTable,
}

impl GeneratingContext {
    /// Context with an audited twist certificate.
    pub fn new(g: f64, forcing: ForcingFunction) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::domain(format!("gravity must be positive, got {g}")));
        }
        let cert = twist_certificate(g, &forcing)?;
        Ok(Self { g, forcing, cert })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn forcing(&self) -> &ForcingFunction {
        &self.forcing
    }

    pub fn cert(&self) -> &TwistCertificate {
        &self.cert
    }

    pub(crate) fn set_epsilon_tilde(&mut self, value: f64) {
        self.cert.epsilon_tilde = Some(value);
    }

    fn local(&self, t0: f64, t1: f64) -> Local {
        let tab = self.forcing.pair_table(t0, t1);
        Local {
            delta: t1 - t0,
            p: 0.5 * self.g + tab.get(2, 1),
            q: 0.5 * self.g + tab.get(1, 2),
            tab,
        }
    }

    pub fn h_value(&self, t0: f64, t1: f64) -> f64 {
        let g = self.g;
        let f = &self.forcing;
        let delta = t1 - t0;
        let slope = f.dd(&[t0, t1]);
        g * g * delta.powi(3) / 24.0 + 0.5 * g * (f.value(t1) + f.value(t0)) * delta
            - 0.5 * slope * slope * delta
            - g * f.definite_integral(t0, t1)
            + 0.5 * f.velocity_square_integral(t0, t1)
    }

    /// `(-w_depart^2 / 2, w_arrive^2 / 2)`
    pub fn h_partials(&self, t0: f64, t1: f64) -> (f64, f64) {
        let l = self.local(t0, t1);
        let wd = l.delta * l.p;
        let wa = l.delta * l.q;
        (-0.5 * wd * wd, 0.5 * wa * wa)
    }

    /// `(h_00, h_01, h_11)`
    pub fn h_second_partials(&self, t0: f64, t1: f64) -> (f64, f64, f64) {
        let l = self.local(t0, t1);
        let g = self.g;
        let f = &self.forcing;
        let wd = l.delta * l.p;
        let wa = l.delta * l.q;
        let h00 = -wd * (-0.5 * g + l.tab.get(2, 1) - f.acceleration(t0));
        let h11 = wa * (0.5 * g - l.tab.get(1, 2) + f.acceleration(t1));
        (h00, -l.delta * l.p * l.q, h11)
    }

    /// `d = d^2 h / dt0 dt1 = -D P Q`
    pub fn cross_derivative(&self, t0: f64, t1: f64) -> f64 {
        let l = self.local(t0, t1);
        -l.delta * l.p * l.q
    }

    /// `(dd/dt0, dd/dt1)`
    pub fn cross_partials(&self, t0: f64, t1: f64) -> (f64, f64) {
        let l = self.local(t0, t1);
        let (p, q, delta) = (l.p, l.q, l.delta);
        let f0001 = l.tab.get(3, 1);
        let f0011 = l.tab.get(2, 2);
        let f0111 = l.tab.get(1, 3);
        let d0 = p * q - delta * (2.0 * f0001 * q + p * f0011);
        let d1 = -p * q - delta * (f0011 * q + 2.0 * p * f0111);
        (d0, d1)
    }

    /// `dd/dt1 - dd/dt0`
    pub fn third_derivative_difference(&self, t0: f64, t1: f64) -> f64 {
        let (d0, d1) = self.cross_partials(t0, t1);
        d1 - d0
    }
}

/// `k = max(1, 8 B1 / g)`, `eps = -k g^2 / 16`, audited on a grid.
///
/// For `D >= k`, `|f[t0,t0,t1]| = |f[t0,t1] - f'(t0)| / D <= 2 B1 / D <= g / 4`,
/// and likewise for `f[t0,t1,t1]`, so both velocity factors exceed `g / 4` and
/// `d <= -D g^2 / 16 <= eps`. The grid audit covers one period in `t0`, which
/// suffices by periodicity.
pub fn twist_certificate(g: f64, f: &ForcingFunction) -> Result<TwistCertificate> {
    let k = (8.0 * f.sup_bound(1) / g).max(1.0);
    let epsilon = -k * g * g / 16.0;
    let cert = TwistCertificate {
        k,
        epsilon,
        epsilon_tilde: None,
    };
    let ctx = GeneratingContext {
        g,
        forcing: f.clone(),
        cert,
    };
    for i in 0..AUDIT_PHASES {
        let t0 = i as f64 / AUDIT_PHASES as f64;
        for j in 0..=AUDIT_GAPS {
            let delta = k + AUDIT_BAND * j as f64 / AUDIT_GAPS as f64;
            let d = ctx.cross_derivative(t0, t0 + delta);
            if d > epsilon {
                return Err(Error::Certification(format!(
                    "cross derivative {d} exceeds {epsilon} at t0 = {t0}, gap = {delta}"
                )));
            }
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(g: f64, f: ForcingFunction) -> GeneratingContext {
        GeneratingContext::new(g, f).unwrap()
    }

    #[test]
    fn shear_values() {
        let c = ctx(2.0, ForcingFunction::zero());
        assert!((c.h_value(0.0, 1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(c.h_partials(0.0, 1.0), (-0.5, 0.5));
        assert!((c.cross_derivative(0.3, 2.3) + 2.0).abs() < 1e-14);
        assert_eq!(c.third_derivative_difference(0.3, 2.3), -2.0);
        assert_eq!(*c.cert(), TwistCertificate { k: 1.0, epsilon: -0.25, epsilon_tilde: None });
    }

    #[test]
    fn vanishes_on_diagonal() {
        let f = ForcingFunction::from_terms(0.1, &[(1, 0.0, 0.03), (2, 0.01, 0.0)]).unwrap();
        let c = ctx(1.0, f);
        for t in [0.0, 0.4, 17.3] {
            assert!(c.h_value(t, t).abs() < 1e-16);
            assert_eq!(c.cross_derivative(t, t), 0.0);
        }
    }

    #[test]
    fn certificate_for_sine() {
        let f = ForcingFunction::sine(0.05);
        let cert = twist_certificate(1.0, &f).unwrap();
        let k = 0.8 * std::f64::consts::PI;
        assert!((cert.k - k).abs() < 1e-14);
        assert!((cert.epsilon + k / 16.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_shift_invariance() {
        let f = ForcingFunction::sine(0.03);
        let c = ctx(1.0, f);
        let a = c.third_derivative_difference(0.1, 2.3);
        let b = c.third_derivative_difference(1.1, 3.3);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_gravity() {
        assert!(GeneratingContext::new(0.0, ForcingFunction::zero()).is_err());
        assert!(GeneratingContext::new(f64::NAN, ForcingFunction::zero()).is_err());
    }
}
