//! TOML run configuration. Every key is optional; missing keys take the
//! defaults below.
//!
//! ```toml
//! output = "out"
//!
//! [geometry]
//! outer_lo = [0.0, 0.0, 0.0]
//! outer_hi = [1.0, 1.0, 1.0]
//! inner_lo = [0.25, 0.25, 0.25]
//! inner_hi = [0.75, 0.75, 0.75]
//! n = 4
//!
//! [simulate]
//! t_end = 50.0
//! tau = 0.01
//! seed = 1
//! fit_window = [1.0, 50.0]
//! initial = "smooth"        # or "zero"
//!
//! [sweep]
//! beta_min = 1.0
//! beta_max = 200.0
//! points = 25
//! probe_seed = 190709761
//! opnorm = true
//!
//! [probe]
//! manufactured = true
//! amplitude = 1.0
//! refinements = [4, 8, 16]
//! beta = 2.0
//! monitor_beta = 20.0
//!
//! [tolerances]
//! power_tol = 1e-4
//! power_max_iter = 5000
//! ```

use layered_fsi::geometry::{MeshConfig, Point};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    pub geometry: Geometry,
    pub simulate: Simulate,
    pub sweep: Sweep,
    pub probe: Probe,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("out"),
            geometry: Geometry::default(),
            simulate: Simulate::default(),
            sweep: Sweep::default(),
            probe: Probe::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub outer_lo: Point,
    pub outer_hi: Point,
    pub inner_lo: Point,
    pub inner_hi: Point,
    pub n: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        let m = MeshConfig::default();
        Self {
            outer_lo: m.outer_lo,
            outer_hi: m.outer_hi,
            inner_lo: m.inner_lo,
            inner_hi: m.inner_hi,
            n: m.n,
        }
    }
}

impl Geometry {
    pub fn mesh_config(&self) -> MeshConfig {
        MeshConfig {
            outer_lo: self.outer_lo,
            outer_hi: self.outer_hi,
            inner_lo: self.inner_lo,
            inner_hi: self.inner_hi,
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    Smooth,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Simulate {
    pub t_end: f64,
    pub tau: f64,
    pub seed: u64,
    pub fit_window: [f64; 2],
    pub initial: Initial,
}

impl Default for Simulate {
    fn default() -> Self {
        Self {
            t_end: 50.0,
            tau: 1e-2,
            seed: 1,
            fit_window: [1.0, 50.0],
            initial: Initial::Smooth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    pub probe_seed: u64,
    pub opnorm: bool,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            beta_min: 1.0,
            beta_max: 200.0,
            points: 25,
            probe_seed: 0x0b5e_0001,
            opnorm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Probe {
    pub manufactured: bool,
    pub amplitude: f64,
    pub refinements: Vec<usize>,
    /// Frequency of the manufactured study.
    pub beta: f64,
    /// Frequency of the resolvent solution whose `z` is checked.
    pub monitor_beta: f64,
}

impl Default for Probe {
    fn default() -> Self {
        Self {
            manufactured: true,
            amplitude: 1.0,
            refinements: vec![4, 8, 16],
            beta: 2.0,
            monitor_beta: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub power_tol: f64,
    pub power_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            power_tol: 1e-4,
            power_max_iter: 5000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        use anyhow::ensure;
        let s = &self.simulate;
        ensure!(s.t_end > 0.0 && s.t_end.is_finite(), "simulate.t_end must be positive");
        ensure!(s.tau > 0.0 && s.tau <= s.t_end, "simulate.tau must lie in (0, t_end]");
        let [ta, tb] = s.fit_window;
        ensure!(
            0.0 < ta && ta < tb && tb <= s.t_end,
            "simulate.fit_window must satisfy 0 < t_a < t_b <= t_end"
        );
        let w = &self.sweep;
        ensure!(w.beta_min >= 1.0, "sweep.beta_min must be at least 1");
        ensure!(w.beta_max >= w.beta_min && w.beta_max.is_finite(), "sweep.beta_max must be at least beta_min");
        ensure!(w.points >= 1, "sweep.points must be at least 1");
        let p = &self.probe;
        ensure!(!p.refinements.is_empty(), "probe.refinements must not be empty");
        ensure!(p.refinements.iter().all(|&n| n >= 1), "probe.refinements entries must be positive");
        ensure!(p.amplitude.is_finite(), "probe.amplitude must be finite");
        ensure!(p.beta.is_finite() && p.beta.abs() >= 1.0, "probe.beta must satisfy |β| >= 1");
        ensure!(p.monitor_beta.is_finite() && p.monitor_beta.abs() >= 1.0, "probe.monitor_beta must satisfy |β| >= 1");
        let t = &self.tolerances;
        ensure!(t.power_tol > 0.0, "tolerances.power_tol must be positive");
        ensure!(t.power_max_iter > 0, "tolerances.power_max_iter must be positive");
        ensure!(self.geometry.n >= 1, "geometry.n must be positive");
        Ok(())
    }
}
