//! Directional derivative `ζ = S'_rho(g) h` of the discrete smoothed
//! solution operator.
//!
//! Differentiating one implicit Euler step gives the linear system
//!
//! ```text
//! ((σ + τ) K + M_L diag(d'(w_k))) ω_k = H_k − K ζ_{k−1},   ζ_k = ζ_{k−1} + τ ω_k,
//! ```
//!
//! with the curvature frozen at the stored forward rates.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::state::{ProblemConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTrajectory {
    pub zeta: Vec<Vec<f64>>,
    /// `omega[0]` is zero.
    pub omega: Vec<Vec<f64>>,
}

/// Solves the linearized state system along `fwd` for the load direction `dir`.
pub fn solve_sensitivity(
    fwd: &Trajectory,
    dir: &[Vec<f64>],
    cfg: &ProblemConfig,
) -> Result<SensitivityTrajectory> {
    cfg.check_sequence("solve_sensitivity: forward z", &fwd.z)?;
    cfg.check_sequence("solve_sensitivity: forward w", &fwd.w)?;
    cfg.check_sequence("solve_sensitivity: direction", dir)?;
    if dir[0].iter().any(|v| *v != 0.0) {
        return Err(Error::Usage("direction must vanish at t = 0".into()));
    }
    let tau = cfg.grid.tau();
    let h = cfg.mesh.h();
    let k_mat = cfg.mesh.stiffness();
    let mut zeta = vec![cfg.zeros()];
    let mut omega = vec![cfg.zeros()];
    for k in 1..=cfg.n_t() {
        check_len("solve_sensitivity", cfg.n(), fwd.w[k].len())?;
        let curv: Vec<f64> = fwd.w[k].iter().map(|v| h * cfg.rho.second(*v)).collect();
        let jac = k_mat.scaled_plus_diag(cfg.sigma + tau, &curv);
        let kz = k_mat.mul(&zeta[k - 1]);
        let mut om: Vec<f64> = dir[k].iter().zip(&kz).map(|(a, b)| a - b).collect();
        jac.factor()?.solve_in_place(&mut om);
        let next: Vec<f64> = zeta[k - 1].iter().zip(&om).map(|(z, o)| z + tau * o).collect();
        zeta.push(next);
        omega.push(om);
    }
    Ok(SensitivityTrajectory { zeta, omega })
}
