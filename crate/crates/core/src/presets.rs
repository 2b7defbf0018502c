//! Analytic space-time fields used as controls and tracking targets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adjoint::CostConfig;
use crate::error::{Error, Result};
use crate::state::ProblemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `t · sin(πx)`
    Sine,
    /// `(t/T) · exp(−((x − ½)/0.15)²)`
    Pulse,
    Zero,
}

impl Preset {
    pub fn eval(&self, t: f64, x: f64, t_final: f64) -> f64 {
        match self {
            Preset::Sine => t * (PI * x).sin(),
            Preset::Pulse => (t / t_final) * (-((x - 0.5) / 0.15).powi(2)).exp(),
            Preset::Zero => 0.0,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Preset::Sine),
            "pulse" => Ok(Preset::Pulse),
            "zero" => Ok(Preset::Zero),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Sine => "sine",
            Preset::Pulse => "pulse",
            Preset::Zero => "zero",
        })
    }
}

/// Nodal samples `scale · preset(t_k, x_i)` for `k = 0..=n_t`.
pub fn control_sequence(cfg: &ProblemConfig, preset: Preset, scale: f64) -> Vec<Vec<f64>> {
    let nodes = cfg.mesh.nodes();
    let t_final = cfg.grid.t_final();
    (0..=cfg.n_t())
        .map(|k| {
            let t = cfg.grid.t(k);
            nodes.iter().map(|x| scale * preset.eval(t, *x, t_final)).collect()
        })
        .collect()
}

/// Forward-solve instance with a control strong enough to slip on part of
/// the domain: `σ = 1`, `T = 1`, 64 elements, 256 steps, `g = 1.5 t sin(πx)`.
pub fn state_reference(rho: f64) -> Result<(ProblemConfig, Vec<Vec<f64>>)> {
    let cfg = ProblemConfig::new(1.0, 64, 1.0, 256, rho)?;
    let g = control_sequence(&cfg, Preset::Sine, 1.5);
    Ok((cfg, g))
}

/// A tracking problem whose optimal control slips on most of space-time.
#[derive(Debug, Clone)]
pub struct TrackingInstance {
    pub cfg: ProblemConfig,
    pub cost: CostConfig,
    /// Starting control for the optimizer.
    pub g0: Vec<Vec<f64>>,
}

/// `σ = 1`, `T = 1`, 16 elements, 16 steps, `α₁ = α₂ = 1000`,
/// `z_d = 0.2 t sin(πx)`, `z_T = z_d(T)`, started from `g0 = 2 t sin(πx)`.
///
/// Started from `g0 = 0` the optimizer stays in the stick regime, where the
/// smoothed state barely reacts to the control.
pub fn tracking_reference(rho: f64) -> Result<TrackingInstance> {
    let cfg = ProblemConfig::new(1.0, 16, 1.0, 16, rho)?;
    let z_d = control_sequence(&cfg, Preset::Sine, 0.2);
    let z_t = z_d[cfg.n_t()].clone();
    let cost = CostConfig::new(z_d, z_t, 1000.0, 1000.0)?;
    let g0 = control_sequence(&cfg, Preset::Sine, 2.0);
    Ok(TrackingInstance { cfg, cost, g0 })
}
