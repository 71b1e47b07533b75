//! Run configuration, stored as a flat TOML key-value file.
//!
//! ```toml
//! g = 1.0
//! mean_offset = 0.0
//! harmonics = [[1, 0.0, 0.05]]
//! seed = 7
//! ratio = "9/2"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::ROOT_TOLERANCE;
use crate::error::{Error, Result};
use crate::extension::ExtensionContext;
use crate::forcing::ForcingFunction;
use crate::genfun::GeneratingContext;
use crate::mather::EL_TOLERANCE;
use crate::quadrature::QuadratureSettings;

/// `5 + (sqrt 5 - 1) / 2`
pub const GOLDEN_ROTATION: f64 = 5.618_033_988_749_895;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub g: f64,
    pub mean_offset: f64,
    /// `(j, a_j, b_j)`: `a_j cos(2 pi j t) + b_j sin(2 pi j t)`.
    pub harmonics: Vec<(usize, f64, f64)>,
    pub root_tolerance: f64,
    pub quadrature_tolerance: f64,
    pub el_tolerance: f64,
    pub seed: u64,
    pub multistarts: usize,
    /// Rotation number `"p/q"` for the periodic-orbit commands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<String>,
    /// Half-length `N` of heteroclinic windows.
    pub window: usize,
    /// Continued-fraction depth of the Cantor probe.
    pub depth: usize,
    /// Irrational rotation number of the Cantor probe.
    pub alpha: f64,
    /// Initial state of the `orbit` command.
    pub t0: f64,
    pub w0: f64,
    pub bounces: usize,
    /// Integer resonances tried per locked phase by the acceleration search.
    pub candidates: usize,
    /// Divides every acceptance threshold in `validate`.
    pub tolerance_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            g: 1.0,
            mean_offset: 0.0,
            harmonics: vec![(1, 0.0, 0.05)],
            root_tolerance: ROOT_TOLERANCE,
            quadrature_tolerance: QuadratureSettings::default().tolerance,
            el_tolerance: EL_TOLERANCE,
            seed: 1,
            multistarts: 16,
            ratio: None,
            window: 40,
            depth: 8,
            alpha: GOLDEN_ROTATION,
            t0: 0.0,
            w0: 8.0,
            bounces: 200,
            candidates: 8,
            tolerance_scale: 1.0,
        }
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("g", self.g)?;
        positive("root_tolerance", self.root_tolerance)?;
        positive("quadrature_tolerance", self.quadrature_tolerance)?;
        positive("el_tolerance", self.el_tolerance)?;
        positive("tolerance_scale", self.tolerance_scale)?;
        positive("alpha", self.alpha)?;
        if !self.w0.is_finite() || !self.t0.is_finite() {
            return Err(Error::Config("initial state must be finite".into()));
        }
        // TOML integers are signed
        if i64::try_from(self.seed).is_err() {
            return Err(Error::Config(format!("seed must not exceed {}, got {}", i64::MAX, self.seed)));
        }
        if self.multistarts == 0 {
            return Err(Error::Config("multistarts must be at least 1".into()));
        }
        if self.window < 3 {
            return Err(Error::Config("window must be at least 3".into()));
        }
        if self.depth > 8 {
            return Err(Error::Config("depth is limited to 8".into()));
        }
        self.forcing()?;
        self.rotation()?;
        Ok(())
    }

    pub fn forcing(&self) -> Result<ForcingFunction> {
        ForcingFunction::from_terms(self.mean_offset, &self.harmonics).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn with_forcing(mut self, f: &ForcingFunction) -> Self {
        let spec = f.spec();
        self.mean_offset = spec.mean_offset;
        self.harmonics = spec.harmonics;
        self
    }

    /// The `ratio` key as `(p, q)`.
    pub fn rotation(&self) -> Result<Option<(u64, u64)>> {
        let Some(text) = &self.ratio else {
            return Ok(None);
        };
        let bad = || Error::Config(format!("ratio must look like p/q with positive integers, got {text:?}"));
        let (p, q) = text.split_once('/').ok_or_else(bad)?;
        let p: u64 = p.trim().parse().map_err(|_| bad())?;
        let q: u64 = q.trim().parse().map_err(|_| bad())?;
        if p == 0 || q == 0 {
            return Err(bad());
        }
        Ok(Some((p, q)))
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        QuadratureSettings {
            tolerance: self.quadrature_tolerance,
            ..QuadratureSettings::default()
        }
    }

    pub fn generating_context(&self) -> Result<GeneratingContext> {
        GeneratingContext::new(self.g, self.forcing()?)
    }

    pub fn extension_context(&self) -> Result<ExtensionContext> {
        ExtensionContext::with_quadrature(self.generating_context()?, self.quadrature())
    }
}
