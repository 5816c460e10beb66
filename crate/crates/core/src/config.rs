//! Run configuration, read from TOML. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TraitGrid;
use crate::limit::{integrate_mean_ode, PathVariant, MEAN_ODE_DT};
use crate::mortality::MortalitySpec;
use crate::operators::BaseKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `ε² ∂t n = r T_ε[n] - (m + κρ) n`
    #[default]
    SexualFull,
    /// `ε² ∂t q = r (T̃_ε[q] - q) - (m - ∫ m q) q`
    SexualRenormalized,
    /// `ε ∂t n = p (G_ε ⊛ n - n) + (r - m - κρ) n`
    AsexualFull,
}

impl ModelKind {
    /// Power of ε in front of the time derivative.
    pub fn time_scale_power(&self) -> i32 {
        match self {
            ModelKind::AsexualFull => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// First-order exponential Euler.
    ExponentialEuler,
    /// Second-order exponential Runge–Kutta (Cox–Matthews ETD2RK).
    #[default]
    ExponentialRk2,
}

/// Trait grid. When `x_min`/`x_max` are omitted the interval is fitted to
/// the mean path: `[min z - 12 √v0 ε - margin, max z + 12 √v0 ε + margin]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_points: usize,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub margin: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_points: 1024,
            x_min: None,
            x_max: None,
            margin: 0.5,
        }
    }
}

/// Gaussian initial datum: center `x0`, variance `v0 ε²`, mass `rho0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub x0: f64,
    pub v0: f64,
    pub rho0: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData {
            x0: 0.3,
            v0: 1.0,
            rho0: 1.0,
        }
    }
}

/// Extra parameters of the asexual model. The selection coefficient is the
/// `s` of the quadratic mortality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsexualParams {
    pub mutation_rate: f64,
    pub kernel: BaseKernel,
}

impl Default for AsexualParams {
    fn default() -> Self {
        AsexualParams {
            mutation_rate: 1.0,
            kernel: BaseKernel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub mortality: MortalitySpec,
    pub r: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub t_end: f64,
    /// `dt = dt_factor * ε² / r` (`ε / r` for the asexual model).
    pub dt_factor: f64,
    /// Steps between recorded samples.
    pub output_stride: usize,
    pub scheme: TimeScheme,
    pub k0: usize,
    pub grid: GridSpec,
    pub initial: InitialData,
    pub asexual: AsexualParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::SexualFull,
            mortality: MortalitySpec::quadratic(1.0, 0.7),
            r: 2.0,
            kappa: 1.0,
            epsilon: 0.2,
            t_end: 1.0,
            dt_factor: 0.05,
            output_stride: 1,
            scheme: TimeScheme::ExponentialRk2,
            k0: 5,
            grid: GridSpec::default(),
            initial: InitialData::default(),
            asexual: AsexualParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.mortality.prepare()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        let positive = [
            ("r", self.r),
            ("kappa", self.kappa),
            ("epsilon", self.epsilon),
            ("dt_factor", self.dt_factor),
            ("initial.v0", self.initial.v0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.initial.rho0 > 0.0 && self.initial.rho0.is_finite()) {
            return bad(format!("initial mass rho0 must be positive, got {}", self.initial.rho0));
        }
        if self.initial.x0.abs() >= self.mortality.l_window {
            return bad(format!(
                "initial center x0 = {} lies outside the convexity window (-{1}, {1})",
                self.initial.x0, self.mortality.l_window
            ));
        }
        if self.output_stride == 0 {
            return bad("output_stride must be >= 1".into());
        }
        if self.k0 < 2 {
            return bad(format!("k0 must be >= 2, got {}", self.k0));
        }
        if self.model == ModelKind::AsexualFull && !(self.asexual.mutation_rate >= 0.0) {
            return bad("asexual.mutation_rate must be >= 0".into());
        }
        if let (Some(a), Some(b)) = (self.grid.x_min, self.grid.x_max) {
            TraitGrid::new(a, b, self.grid.n_points)?;
        } else if self.grid.x_min.is_some() != self.grid.x_max.is_some() {
            return bad("grid.x_min and grid.x_max must be given together".into());
        }
        Ok(())
    }

    /// Nominal time step before adjustment to land on `t_end`.
    pub fn nominal_dt(&self) -> f64 {
        self.dt_factor * self.epsilon.powi(self.model.time_scale_power()) / self.r
    }

    pub fn build_grid(&self) -> Result<TraitGrid> {
        if let (Some(a), Some(b)) = (self.grid.x_min, self.grid.x_max) {
            return TraitGrid::new(a, b, self.grid.n_points);
        }
        let path = integrate_mean_ode(
            &self.mortality,
            self.initial.x0,
            self.t_end,
            MEAN_ODE_DT,
            PathVariant::Limit,
        )?;
        let lo = path.z_values.iter().copied().fold(self.initial.x0, f64::min);
        let hi = path.z_values.iter().copied().fold(self.initial.x0, f64::max);
        let pad = 12.0 * self.initial.v0.sqrt() * self.epsilon + self.grid.margin;
        TraitGrid::new(lo - pad, hi + pad, self.grid.n_points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = RunConfig::from_toml_str(
            r#"
            model = "sexual-renormalized"
            epsilon = 0.1
            [mortality]
            l_window = 1.0
            a0 = 1.0
            am = 12.0
            growth_exponent = 2
            [mortality.kind]
            type = "quartic-well"
            a = 0.5
            b = 1.0
            [initial]
            v0 = 2.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.model, ModelKind::SexualRenormalized);
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.initial.v0, 2.0);
        assert_eq!(cfg.initial.x0, 0.3);
        assert!((cfg.nominal_dt() - 0.05 * 0.01 / 2.0).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml_str("epsilon = 0.1\nbogus = 1"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(RunConfig::from_toml_str("[initial]\nx1 = 0.1"), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn invalid_values() {
        assert!(RunConfig::from_toml_str("[initial]\nrho0 = 0.0").is_err());
        assert!(RunConfig::from_toml_str("[initial]\nx0 = 0.9").is_err());
        assert!(RunConfig::from_toml_str("epsilon = -0.1").is_err());
        assert!(RunConfig::from_toml_str("[grid]\nx_min = -1.0").is_err());
    }

    #[test]
    fn auto_grid_covers_path() {
        let cfg = RunConfig::default();
        let g = cfg.build_grid().unwrap();
        assert!(g.x_min() < -12.0 * 0.2 && g.x_max() > 0.3 + 12.0 * 0.2);
        assert_eq!(g.n_points(), 1024);
    }
}
