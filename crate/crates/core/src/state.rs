//! Forward solvers for the viscous stick-slip equation
//!
//! ```text
//! 0 ∈ ∂|ż| − Δz − σΔż − g,   z(0) = 0
//! ```
//!
//! and its smoothed version where `∂|·|` is replaced by the derivative of
//! `|·|_rho`. Time stepping is implicit Euler on the rate form: at step `k`
//! the rate `w_k` solves
//!
//! ```text
//! (σ + τ) K w + M_L d(w) = G_k − K z_{k−1},     z_k = z_{k−1} + τ w_k,
//! ```
//!
//! where `G_k` is the control load at `t_k` and `d` is either the smoothed
//! derivative (damped Newton) or a selection of the subdifferential (ADMM
//! with nodal shrinkage, then an active-set polish).
//!
//! Sequences indexed by time step have length `n_t + 1`; entry 0 of a rate,
//! dual or load sequence is zero.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fem1d::{dot, norm_inf, Mesh, SymTridiag, TridiagFactor};
use crate::smoothing::SmoothingParam;

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    n_t: usize,
    tau: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_t: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Config(format!("T must be positive, got {t_final}")));
        }
        if n_t == 0 {
            return Err(Error::Config("n_t must be positive".into()));
        }
        Ok(Self {
            t_final,
            n_t,
            tau: t_final / n_t as f64,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }
}

/// Tolerances and iteration limits of the inner solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Newton stops when `‖F‖∞ ≤ tol_newton · max(1, ‖rhs‖∞)`.
    pub tol_newton: f64,
    pub max_newton: usize,
    /// Sufficient-decrease constant of the Newton line search.
    pub newton_armijo: f64,
    /// ADMM stops when `max(primal, dual) ≤ tol_admm`.
    pub tol_admm: f64,
    pub max_admm: usize,
    /// ADMM penalty; `None` selects `σ / h`.
    pub admm_beta: Option<f64>,
    /// Rates with `|w_i| ≤ tol_active` count as zero.
    pub tol_active: f64,
    /// Refine the ADMM iterate with a primal-dual active-set solve.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_newton: 1e-11,
            max_newton: 50,
            newton_armijo: 1e-4,
            tol_admm: 1e-10,
            max_admm: 200_000,
            admm_beta: None,
            tol_active: 1e-8,
            polish: true,
        }
    }
}

/// Viscosity, discretization and smoothing width of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub sigma: f64,
    pub mesh: Mesh,
    pub grid: TimeGrid,
    pub rho: SmoothingParam,
    pub solver: SolverOptions,
}

impl ProblemConfig {
    pub fn new(sigma: f64, n_el: usize, t_final: f64, n_t: usize, rho: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            sigma,
            mesh: Mesh::new(n_el)?,
            grid: TimeGrid::new(t_final, n_t)?,
            rho: SmoothingParam::new(rho)?,
            solver: SolverOptions::default(),
        })
    }

    /// Same problem with a different smoothing width.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Ok(Self {
            rho: SmoothingParam::new(rho)?,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.mesh.n()
    }

    pub fn n_t(&self) -> usize {
        self.grid.n_t()
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.n()]
    }

    /// A zero sequence of `n_t + 1` fields.
    pub fn zero_sequence(&self) -> Vec<Vec<f64>> {
        vec![self.zeros(); self.n_t() + 1]
    }

    /// Nodal controls → load vectors `M g_k`.
    pub fn loads(&self, g_nodal: &[Vec<f64>]) -> Vec<Vec<f64>> {
        g_nodal.iter().map(|g| self.mesh.apply_m(g)).collect()
    }

    pub(crate) fn check_sequence(&self, context: &'static str, seq: &[Vec<f64>]) -> Result<()> {
        check_len(context, self.n_t() + 1, seq.len())?;
        for f in seq {
            check_len(context, self.n(), f.len())?;
        }
        Ok(())
    }

    pub(crate) fn check_control(&self, context: &'static str, g: &[Vec<f64>]) -> Result<()> {
        self.check_sequence(context, g)?;
        if g[0].iter().any(|v| *v != 0.0) {
            return Err(Error::Usage(format!(
                "{context}: the control must vanish at t = 0"
            )));
        }
        Ok(())
    }
}

/// Discrete state trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// States `z_0 = 0, z_1, …, z_{n_t}`.
    pub z: Vec<Vec<f64>>,
    /// Rates; `w[0]` is zero, `w[k]` is the rate on `(t_{k−1}, t_k]`.
    pub w: Vec<Vec<f64>>,
    /// Nodal subgradient `f_k ∈ ∂|w_k|` from the non-smooth solver.
    pub dual: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn n_t(&self) -> usize {
        self.z.len() - 1
    }
}

/// Damped Newton for `a K w + h d(w) = rhs`.
///
/// The line search measures the exact decrease of the convex energy
/// `½ a wᵀKw − rhsᵀw + h Σ |w_i|_rho`; close to the solution, where that
/// decrease drowns in rounding, a step that reduces the residual norm is
/// accepted instead.
fn newton_rate(
    mesh: &Mesh,
    a: f64,
    rhs: &[f64],
    init: &[f64],
    p: SmoothingParam,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let h = mesh.h();
    let k = mesh.stiffness();
    let n = mesh.n();
    let tol = opts.tol_newton * norm_inf(rhs).max(1.0);

    let residual = |w: &[f64], kw: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = a * kw[i] + h * p.deriv(w[i]) - rhs[i];
        }
    };

    let mut w = init.to_vec();
    let mut kw = k.mul(&w);
    let mut f = vec![0.0; n];
    residual(&w, &kw, &mut f);
    let mut trial = vec![0.0; n];
    let mut k_trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];

    for _ in 0..opts.max_newton {
        let rnorm = norm_inf(&f);
        if rnorm <= tol {
            return Ok(w);
        }
        let curv: Vec<f64> = w.iter().map(|v| h * p.second(*v)).collect();
        let jac = k.scaled_plus_diag(a, &curv);
        let mut step: Vec<f64> = f.iter().map(|v| -v).collect();
        jac.factor()?.solve_in_place(&mut step);
        let k_step = k.mul(&step);
        let slope = dot(&f, &step);
        let quad = a * dot(&step, &k_step);
        let f2 = dot(&f, &f).sqrt();
        let energy_scale = 0.5 * a * dot(&w, &kw).abs()
            + dot(rhs, &w).abs()
            + h * w.iter().map(|v| p.abs(*v)).sum::<f64>();
        let noise = 1e3 * f64::EPSILON * energy_scale.max(f64::MIN_POSITIVE);

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = w[i] + t * step[i];
                k_trial[i] = kw[i] + t * k_step[i];
            }
            let mut de = t * slope + 0.5 * t * t * quad;
            for i in 0..n {
                de += h * (p.abs(trial[i]) - p.abs(w[i]));
            }
            // slope = Fᵀstep includes h d(w)ᵀstep, which the sum above already accounts for
            de -= t * h * step.iter().zip(&w).map(|(s, v)| s * p.deriv(*v)).sum::<f64>();
            residual(&trial, &k_trial, &mut f_trial);
            let armijo = de <= opts.newton_armijo * t * slope;
            let shrinks = de <= noise && dot(&f_trial, &f_trial).sqrt() <= (1.0 - opts.newton_armijo * t) * f2;
            if armijo || shrinks {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NotConverged {
                solver: "newton line search",
                iterations: 60,
                residual: rnorm,
            });
        }
        std::mem::swap(&mut w, &mut trial);
        std::mem::swap(&mut kw, &mut k_trial);
        std::mem::swap(&mut f, &mut f_trial);
    }
    let rnorm = norm_inf(&f);
    if rnorm <= tol {
        return Ok(w);
    }
    Err(Error::NotConverged {
        solver: "newton",
        iterations: opts.max_newton,
        residual: rnorm,
    })
}

/// `newton_rate`, retried along `rho·10^j, …, rho·10, rho` when the direct
/// solve fails: each width warm-starts the next smaller one.
fn solve_rate(
    mesh: &Mesh,
    a: f64,
    rhs: &[f64],
    init: &[f64],
    p: SmoothingParam,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    match newton_rate(mesh, a, rhs, init, p, opts) {
        Err(Error::NotConverged { .. }) => {}
        other => return other,
    }
    let mut ladder = vec![p.rho()];
    while *ladder.last().unwrap() < 1.0 {
        ladder.push(ladder.last().unwrap() * 10.0);
    }
    // climb until a width converges from `init`, then descend warm-started
    let mut w = None;
    let mut top = ladder.len();
    for (j, r) in ladder.iter().enumerate().skip(1) {
        if let Ok(v) = newton_rate(mesh, a, rhs, init, SmoothingParam::new(*r)?, opts) {
            w = Some(v);
            top = j;
            break;
        }
    }
    let mut w = match w {
        Some(v) => v,
        None => return newton_rate(mesh, a, rhs, init, p, opts),
    };
    for r in ladder[..top].iter().rev() {
        w = newton_rate(mesh, a, rhs, &w, SmoothingParam::new(*r)?, opts)?;
    }
    Ok(w)
}

/// `T_rho(v)`: the solution `w` of `σ K w + M_L d_rho(w) = v` for a load `v`.
pub fn t_rho_apply(v: &[f64], cfg: &ProblemConfig) -> Result<Vec<f64>> {
    check_len("t_rho_apply", cfg.n(), v.len())?;
    solve_rate(&cfg.mesh, cfg.sigma, v, &cfg.zeros(), cfg.rho, &cfg.solver)
}

fn step_rhs(z_prev: &[f64], load: &[f64], mesh: &Mesh) -> Vec<f64> {
    let kz = mesh.apply_k(z_prev);
    load.iter().zip(kz).map(|(g, k)| g - k).collect()
}

fn advance(z_prev: &[f64], w: &[f64], tau: f64) -> Vec<f64> {
    z_prev.iter().zip(w).map(|(z, v)| z + tau * v).collect()
}

/// One implicit Euler step of the smoothed equation, warm-started at `w_init`.
pub fn step_regularized_from(
    z_prev: &[f64],
    load: &[f64],
    w_init: &[f64],
    cfg: &ProblemConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("step_regularized", cfg.n(), z_prev.len())?;
    check_len("step_regularized", cfg.n(), load.len())?;
    let tau = cfg.grid.tau();
    let rhs = step_rhs(z_prev, load, &cfg.mesh);
    let w = solve_rate(&cfg.mesh, cfg.sigma + tau, &rhs, w_init, cfg.rho, &cfg.solver)?;
    Ok((advance(z_prev, &w, tau), w))
}

/// One implicit Euler step of the smoothed equation. Returns `(z_k, w_k)`.
pub fn step_regularized(
    z_prev: &[f64],
    load: &[f64],
    cfg: &ProblemConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    step_regularized_from(z_prev, load, &cfg.zeros(), cfg)
}

/// Discrete smoothed solution operator `S_rho` applied to control loads.
pub fn solve_regularized(loads: &[Vec<f64>], cfg: &ProblemConfig) -> Result<Trajectory> {
    cfg.check_control("solve_regularized", loads)?;
    let n_t = cfg.n_t();
    let mut z = Vec::with_capacity(n_t + 1);
    let mut w = Vec::with_capacity(n_t + 1);
    z.push(cfg.zeros());
    w.push(cfg.zeros());
    for k in 1..=n_t {
        let (zk, wk) = step_regularized_from(&z[k - 1], &loads[k], &w[k - 1], cfg)?;
        z.push(zk);
        w.push(wk);
    }
    Ok(Trajectory { z, w, dual: None })
}

/// ADMM for `min ½ a wᵀKw − rhsᵀw + h Σ|w_i|` with the split `w = y`,
/// followed by an optional primal-dual active-set polish.
///
/// Holds the factorization of `aK + βI` and the splitting iterates so that
/// consecutive time steps warm-start each other.
pub struct NonsmoothStepper {
    a: f64,
    beta: f64,
    h: f64,
    stiffness: SymTridiag,
    factor: TridiagFactor,
    y: Vec<f64>,
    u: Vec<f64>,
    opts: SolverOptions,
    /// ADMM iterations spent in the most recent step.
    pub last_iterations: usize,
}

impl NonsmoothStepper {
    pub fn new(cfg: &ProblemConfig) -> Result<Self> {
        let a = cfg.sigma + cfg.grid.tau();
        let h = cfg.mesh.h();
        let beta = cfg.solver.admm_beta.unwrap_or(cfg.sigma / h);
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("admm_beta must be positive, got {beta}")));
        }
        let stiffness = cfg.mesh.stiffness().clone();
        let factor = stiffness.scaled_shifted(a, beta).factor()?;
        Ok(Self {
            a,
            beta,
            h,
            stiffness,
            factor,
            y: cfg.zeros(),
            u: cfg.zeros(),
            opts: cfg.solver,
            last_iterations: 0,
        })
    }

    /// Returns `(w, f)` with `a K w + h f = rhs` and `f ∈ ∂|w|` nodally.
    pub fn solve(&mut self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = rhs.len();
        let thresh = self.h / self.beta;
        let mut w = vec![0.0; n];
        let mut iters = 0;
        loop {
            iters += 1;
            for i in 0..n {
                w[i] = rhs[i] + self.beta * (self.y[i] - self.u[i]);
            }
            self.factor.solve_in_place(&mut w);
            let mut primal: f64 = 0.0;
            let mut dual: f64 = 0.0;
            for i in 0..n {
                let v = w[i] + self.u[i];
                let y_new = shrink(v, thresh);
                dual = dual.max((y_new - self.y[i]).abs());
                primal = primal.max((w[i] - y_new).abs());
                self.u[i] = v - y_new;
                self.y[i] = y_new;
            }
            dual *= self.beta;
            if primal.max(dual) <= self.opts.tol_admm {
                break;
            }
            if iters >= self.opts.max_admm {
                return Err(Error::NotConverged {
                    solver: "admm",
                    iterations: iters,
                    residual: primal.max(dual),
                });
            }
        }
        self.last_iterations = iters;
        let mut w = self.y.clone();
        // f = β u / h lies in ∂|y| exactly by the shrinkage identity
        let mut f: Vec<f64> = self.u.iter().map(|u| self.beta * u / self.h).collect();
        if self.opts.polish {
            if let Some((wp, fp)) = self.active_set_polish(rhs, &w) {
                w = wp;
                f = fp;
                self.y.clone_from(&w);
                for i in 0..n {
                    self.u[i] = self.h * f[i] / self.beta;
                }
            }
        }
        Ok((w, f))
    }

    /// Primal-dual active-set iteration started from the ADMM support.
    fn active_set_polish(&self, rhs: &[f64], start: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = rhs.len();
        let mut sign: Vec<f64> = start
            .iter()
            .map(|v| if *v > 0.0 { 1.0 } else if *v < 0.0 { -1.0 } else { 0.0 })
            .collect();
        for _ in 0..50 {
            let idx: Vec<usize> = (0..n).filter(|&i| sign[i] != 0.0).collect();
            let mut w = vec![0.0; n];
            if !idx.is_empty() {
                let sub = self.stiffness.principal(&idx).scaled_shifted(self.a, 0.0);
                let b: Vec<f64> = idx.iter().map(|&i| rhs[i] - self.h * sign[i]).collect();
                let ws = sub.solve(&b).ok()?;
                for (j, &i) in idx.iter().enumerate() {
                    w[i] = ws[j];
                }
            }
            let kw = self.stiffness.mul(&w);
            let mut f: Vec<f64> = (0..n).map(|i| (rhs[i] - self.a * kw[i]) / self.h).collect();
            let mut changed = false;
            for i in 0..n {
                if sign[i] != 0.0 {
                    if sign[i] * w[i] <= 0.0 {
                        sign[i] = 0.0;
                        changed = true;
                    }
                } else if f[i].abs() > 1.0 {
                    sign[i] = f[i].signum();
                    changed = true;
                }
            }
            if !changed {
                for i in 0..n {
                    if sign[i] != 0.0 {
                        f[i] = sign[i];
                    }
                }
                return Some((w, f));
            }
        }
        None
    }
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// One implicit Euler step of the non-smooth inclusion. Returns `(z_k, w_k, f_k)`.
pub fn step_nonsmooth(
    z_prev: &[f64],
    load: &[f64],
    cfg: &ProblemConfig,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut stepper = NonsmoothStepper::new(cfg)?;
    step_nonsmooth_with(&mut stepper, z_prev, load, cfg)
}

pub fn step_nonsmooth_with(
    stepper: &mut NonsmoothStepper,
    z_prev: &[f64],
    load: &[f64],
    cfg: &ProblemConfig,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_len("step_nonsmooth", cfg.n(), z_prev.len())?;
    check_len("step_nonsmooth", cfg.n(), load.len())?;
    let rhs = step_rhs(z_prev, load, &cfg.mesh);
    let (w, f) = stepper.solve(&rhs)?;
    Ok((advance(z_prev, &w, cfg.grid.tau()), w, f))
}

/// Discrete non-smooth solution operator `S` applied to control loads.
pub fn solve_nonsmooth(loads: &[Vec<f64>], cfg: &ProblemConfig) -> Result<Trajectory> {
    cfg.check_control("solve_nonsmooth", loads)?;
    let n_t = cfg.n_t();
    let mut stepper = NonsmoothStepper::new(cfg)?;
    let mut z = vec![cfg.zeros()];
    let mut w = vec![cfg.zeros()];
    let mut dual = vec![cfg.zeros()];
    for k in 1..=n_t {
        let (zk, wk, fk) = step_nonsmooth_with(&mut stepper, &z[k - 1], &loads[k], cfg)?;
        z.push(zk);
        w.push(wk);
        dual.push(fk);
    }
    Ok(Trajectory {
        z,
        w,
        dual: Some(dual),
    })
}

/// Per-step violations of the discrete inclusion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepResidual {
    /// `max_i (|f_i| − 1)⁺`.
    pub dual_range: f64,
    /// `max |f_i − sign(w_i)|` over nodes with `|w_i| > tol_active`.
    pub sign: f64,
    /// `‖σKw + M_L f + K z − G‖∞`.
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    /// Entry `k - 1` belongs to step `k`.
    pub steps: Vec<StepResidual>,
    pub max_dual_range: f64,
    pub max_sign: f64,
    pub max_force: f64,
}

impl InclusionReport {
    pub fn max(&self) -> f64 {
        self.max_dual_range.max(self.max_sign).max(self.max_force)
    }
}

/// Checks `f_k ∈ ∂|w_k|` and the force balance at every step.
pub fn residual_inclusion(
    traj: &Trajectory,
    loads: &[Vec<f64>],
    cfg: &ProblemConfig,
) -> Result<InclusionReport> {
    let dual = traj
        .dual
        .as_ref()
        .ok_or_else(|| Error::Usage("residual_inclusion needs a trajectory with a dual".into()))?;
    cfg.check_sequence("residual_inclusion: z", &traj.z)?;
    cfg.check_sequence("residual_inclusion: w", &traj.w)?;
    cfg.check_sequence("residual_inclusion: dual", dual)?;
    cfg.check_sequence("residual_inclusion: loads", loads)?;
    let h = cfg.mesh.h();
    let tol_active = cfg.solver.tol_active;
    let mut steps = Vec::with_capacity(cfg.n_t());
    for k in 1..=cfg.n_t() {
        let (w, f, z) = (&traj.w[k], &dual[k], &traj.z[k]);
        let dual_range = f.iter().fold(0.0f64, |m, v| m.max(v.abs() - 1.0));
        let sign = w
            .iter()
            .zip(f)
            .filter(|(wi, _)| wi.abs() > tol_active)
            .fold(0.0f64, |m, (wi, fi)| m.max((fi - wi.signum()).abs()));
        let kw = cfg.mesh.apply_k(w);
        let kz = cfg.mesh.apply_k(z);
        let force = (0..cfg.n()).fold(0.0f64, |m, i| {
            m.max((cfg.sigma * kw[i] + h * f[i] + kz[i] - loads[k][i]).abs())
        });
        steps.push(StepResidual {
            dual_range,
            sign,
            force,
        });
    }
    let max_of = |sel: fn(&StepResidual) -> f64| steps.iter().map(sel).fold(0.0, f64::max);
    Ok(InclusionReport {
        max_dual_range: max_of(|s| s.dual_range),
        max_sign: max_of(|s| s.sign),
        max_force: max_of(|s| s.force),
        steps,
    })
}
