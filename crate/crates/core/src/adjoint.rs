//! Discrete adjoint of the smoothed implicit Euler scheme and the reduced
//! gradient of `J(g) = j₁(z) + j₂(z(T)) + ½‖g‖²_{H¹(I,H)}`, `z = S_rho(g)`.
//!
//! With `B_k = σK + M_L diag(d'(w_k))` and `A_k = B_k + τK` the backward
//! sweep is
//!
//! ```text
//! u_{n_t}   = α₂ M (z_{n_t} − z_T)
//! A_k ξ_k   = u_k + τ j₁'_k                    k = n_t, …, 1
//! u_{k−1}   = u_k + τ j₁'_k − τ K ξ_k          (equivalently B_k ξ_k = u_{k−1})
//! q_k       = u_{k−1} − σ K ξ_k
//! ```
//!
//! where `j₁'_k = α₁ M (z_k − z_{d,k})`. This is the exact transpose of the
//! linearized forward recursion, so `Σ_k τ ξ_kᵀ H_k` equals the derivative
//! of `j₁ + j₂` in the load direction `H`. The rate `ξ_k` lives on
//! `(t_{k−1}, t_k]` and pairs with `u_{k−1}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fem1d::{dot, SymTridiag};
use crate::spacetime::h1_norm;
use crate::state::{solve_regularized, ProblemConfig, Trajectory};

/// Quadratic tracking cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Target states `z_{d,k}`, `k = 0..=n_t` (entry 0 unused).
    pub z_d: Vec<Vec<f64>>,
    /// Terminal target.
    pub z_t: Vec<f64>,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl CostConfig {
    pub fn new(z_d: Vec<Vec<f64>>, z_t: Vec<f64>, alpha1: f64, alpha2: f64) -> Result<Self> {
        for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2)] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {a}")));
            }
        }
        Ok(Self {
            z_d,
            z_t,
            alpha1,
            alpha2,
        })
    }

    /// All-zero targets.
    pub fn zero(cfg: &ProblemConfig, alpha1: f64, alpha2: f64) -> Result<Self> {
        Self::new(cfg.zero_sequence(), cfg.zeros(), alpha1, alpha2)
    }

    fn check(&self, cfg: &ProblemConfig) -> Result<()> {
        cfg.check_sequence("cost targets", &self.z_d)?;
        check_len("terminal target", cfg.n(), self.z_t.len())
    }

    /// Load `α₁ M (z_k − z_{d,k})`, the time density of `j₁'`.
    pub fn j1_load(&self, cfg: &ProblemConfig, z: &[f64], k: usize) -> Vec<f64> {
        let d: Vec<f64> = z.iter().zip(&self.z_d[k]).map(|(a, b)| self.alpha1 * (a - b)).collect();
        cfg.mesh.apply_m(&d)
    }

    /// Load `α₂ M (z_T − target)`.
    pub fn j2_load(&self, cfg: &ProblemConfig, z_final: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = z_final.iter().zip(&self.z_t).map(|(a, b)| self.alpha2 * (a - b)).collect();
        cfg.mesh.apply_m(&d)
    }

    /// `j₁(z) + j₂(z(T))`.
    pub fn tracking(&self, cfg: &ProblemConfig, traj: &Trajectory) -> f64 {
        let tau = cfg.grid.tau();
        let mut s = 0.0;
        for k in 1..traj.z.len() {
            let d: Vec<f64> = traj.z[k].iter().zip(&self.z_d[k]).map(|(a, b)| a - b).collect();
            s += 0.5 * self.alpha1 * tau * dot(&d, &cfg.mesh.apply_m(&d));
        }
        let last = traj.z.last().expect("trajectory has at least z_0");
        let d: Vec<f64> = last.iter().zip(&self.z_t).map(|(a, b)| a - b).collect();
        s + 0.5 * self.alpha2 * dot(&d, &cfg.mesh.apply_m(&d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointTriple {
    /// `u_k` for `k = 0..=n_t` (loads); `u_{n_t}` is the terminal value.
    pub u: Vec<Vec<f64>>,
    /// `ξ_k` for `k = 1..=n_t` (nodal); `xi[0]` is zero.
    pub xi: Vec<Vec<f64>>,
    /// `q_k = u_{k−1} − σ K ξ_k` (loads); `q[0]` is zero.
    pub q: Vec<Vec<f64>>,
}

impl AdjointTriple {
    /// The `u` value that pairs with `ξ_k` in `B_k ξ_k = u`.
    pub fn u_paired(&self, k: usize) -> &[f64] {
        &self.u[k - 1]
    }
}

/// Backward adjoint sweep along a smoothed forward trajectory.
pub fn solve_adjoint(fwd: &Trajectory, cost: &CostConfig, cfg: &ProblemConfig) -> Result<AdjointTriple> {
    cfg.check_sequence("solve_adjoint: forward z", &fwd.z)?;
    cfg.check_sequence("solve_adjoint: forward w", &fwd.w)?;
    cost.check(cfg)?;
    let n_t = cfg.n_t();
    let tau = cfg.grid.tau();
    let h = cfg.mesh.h();
    let k_mat = cfg.mesh.stiffness();

    let mut u = cfg.zero_sequence();
    let mut xi = cfg.zero_sequence();
    let mut q = cfg.zero_sequence();
    u[n_t] = cost.j2_load(cfg, &fwd.z[n_t]);
    for k in (1..=n_t).rev() {
        let j1 = cost.j1_load(cfg, &fwd.z[k], k);
        let rhs: Vec<f64> = u[k].iter().zip(&j1).map(|(a, b)| a + tau * b).collect();
        let curv: Vec<f64> = fwd.w[k].iter().map(|v| h * cfg.rho.second(*v)).collect();
        let mut x = rhs.clone();
        k_mat.scaled_plus_diag(cfg.sigma + tau, &curv).factor()?.solve_in_place(&mut x);
        let kx = k_mat.mul(&x);
        u[k - 1] = rhs.iter().zip(&kx).map(|(r, a)| r - tau * a).collect();
        q[k] = u[k - 1].iter().zip(&kx).map(|(a, b)| a - cfg.sigma * b).collect();
        xi[k] = x;
    }
    Ok(AdjointTriple { u, xi, q })
}

/// Riesz map of the time-`L²` pairing into `H¹` with `r(0) = 0`.
///
/// For each spatial node solves `(τ I + L/τ) r = τ ξ` on steps `1..=n_t`,
/// where `L` is the time stiffness matrix with a Dirichlet condition at
/// `t = 0` and a natural one at `t = T`. The spatial mass cancels from both
/// sides, so nodes decouple.
pub fn riesz_time(xi: &[Vec<f64>], cfg: &ProblemConfig) -> Result<Vec<Vec<f64>>> {
    cfg.check_sequence("riesz_time", xi)?;
    let n_t = cfg.n_t();
    let tau = cfg.grid.tau();
    let mut diag = vec![tau + 2.0 / tau; n_t];
    diag[n_t - 1] = tau + 1.0 / tau;
    let op = SymTridiag::new(diag, vec![-1.0 / tau; n_t - 1]);
    let factor = op.factor()?;
    let mut out = cfg.zero_sequence();
    let mut col = vec![0.0; n_t];
    for i in 0..cfg.n() {
        for k in 1..=n_t {
            col[k - 1] = tau * xi[k][i];
        }
        factor.solve_in_place(&mut col);
        for k in 1..=n_t {
            out[k][i] = col[k - 1];
        }
    }
    Ok(out)
}

/// One evaluation of the reduced objective, optionally with its gradient.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub tracking: f64,
    pub control: f64,
    pub traj: Trajectory,
    pub adjoint: Option<AdjointTriple>,
    /// `H¹(I,H)` Riesz representative of `dJ`.
    pub gradient: Option<Vec<Vec<f64>>>,
}

/// Evaluates `J(S_rho(g), g)` for nodal controls `g`.
pub fn evaluate(g: &[Vec<f64>], cost: &CostConfig, cfg: &ProblemConfig, with_gradient: bool) -> Result<Evaluation> {
    cfg.check_control("reduced objective", g)?;
    let traj = solve_regularized(&cfg.loads(g), cfg)?;
    let tracking = cost.tracking(cfg, &traj);
    let control = 0.5 * h1_norm(cfg, g).powi(2);
    let (adjoint, gradient) = if with_gradient {
        let adj = solve_adjoint(&traj, cost, cfg)?;
        let mut r = riesz_time(&adj.xi, cfg)?;
        for (rk, gk) in r.iter_mut().zip(g) {
            for (a, b) in rk.iter_mut().zip(gk) {
                *a += b;
            }
        }
        (Some(adj), Some(r))
    } else {
        (None, None)
    };
    Ok(Evaluation {
        objective: tracking + control,
        tracking,
        control,
        traj,
        adjoint,
        gradient,
    })
}

/// `J(S_rho(g), g)`.
pub fn reduced_objective(g: &[Vec<f64>], cost: &CostConfig, cfg: &ProblemConfig) -> Result<f64> {
    Ok(evaluate(g, cost, cfg, false)?.objective)
}

/// `H¹(I,H)` gradient `r` with `(r,h)_{H¹} = (ξ,h)_{L²(I,H)} + (g,h)_{H¹}`.
pub fn reduced_gradient(g: &[Vec<f64>], cost: &CostConfig, cfg: &ProblemConfig) -> Result<Vec<Vec<f64>>> {
    Ok(evaluate(g, cost, cfg, true)?.gradient.expect("gradient requested"))
}
