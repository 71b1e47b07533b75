//! Bounded and accelerating motions for one forcing.

use serde::{Deserialize, Serialize};

use crate::acceleration::{accelerate_search, AccelerationReport};
use crate::config::RunConfig;
use crate::error::Result;
use crate::mather::{alpha_star, minimize_periodic, reconstruct_orbit, MinimalOrbit, PeriodicConfiguration};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedSide {
    pub p: u64,
    pub q: u64,
    pub alpha_star: f64,
    pub configuration: Option<PeriodicConfiguration>,
    pub orbit: Option<MinimalOrbit>,
    /// All bound certificates hold and the impact map reproduces the orbit.
    pub certified: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceReport {
    pub bounded: BoundedSide,
    pub accelerating: Option<AccelerationReport>,
    pub acceleration_error: Option<String>,
    /// Both sides succeeded.
    pub coexist: bool,
}

/// Rotation number used when the configuration names none: `ceil(k + 3) / 1`.
pub fn default_rotation(k: f64) -> (u64, u64) {
    ((k + 3.0).ceil() as u64, 1)
}

pub fn coexistence_report(cfg: &RunConfig) -> Result<CoexistenceReport> {
    let ctx = cfg.extension_context()?;
    let (p, q) = cfg.rotation()?.unwrap_or_else(|| default_rotation(ctx.k()));
    let mut bounded = BoundedSide {
        p,
        q,
        alpha_star: alpha_star(&ctx),
        configuration: None,
        orbit: None,
        certified: false,
        error: None,
    };
    match minimize_periodic(&ctx, p, q, cfg.multistarts, cfg.seed)
        .and_then(|c| reconstruct_orbit(&ctx, &c).map(|o| (c, o)))
    {
        Ok((c, o)) => {
            let b = &o.bounds;
            bounded.certified =
                b.graph_bound && b.gap_window && b.gaps_exceed_k && o.map_reproduces && o.energies_consistent && c.el_residual < cfg.el_tolerance;
            bounded.configuration = Some(c);
            bounded.orbit = Some(o);
        }
        Err(e) => bounded.error = Some(e.to_string()),
    }
    let (accelerating, acceleration_error) = match accelerate_search(cfg, cfg.candidates, cfg.bounces) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let coexist = bounded.certified && accelerating.as_ref().is_some_and(|r| r.verdict);
    Ok(CoexistenceReport {
        bounded,
        accelerating,
        acceleration_error,
        coexist,
    })
}
