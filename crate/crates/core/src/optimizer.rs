//! Gradient descent on the smoothed reduced objective in the `H¹(I,H)`
//! geometry, with Armijo backtracking, an optional trust ball around a
//! proximal center, and continuation in the smoothing width.

use serde::{Deserialize, Serialize};

use crate::adjoint::{evaluate, CostConfig, Evaluation};
use crate::error::{Error, Result};
use crate::kkt::{check_nonsmooth_kkt, KktReport};
use crate::spacetime::{axpy, h1_inner, h1_norm, l2_v, sub};
use crate::state::{solve_nonsmooth, ProblemConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub max_outer: usize,
    /// Stop when the (projected) gradient has `H¹` norm below this.
    pub opt_tol: f64,
    pub armijo_c: f64,
    /// Backtracking factor.
    pub shrink: f64,
    /// Adds `½‖g − ḡ‖²_{H¹}` to the objective when set.
    pub prox_center: Option<Vec<Vec<f64>>>,
    /// Radius of the `H¹` ball around `prox_center` the iterates are projected onto.
    pub delta: Option<f64>,
    pub rho_schedule: Vec<f64>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_outer: 5000,
            opt_tol: 1e-8,
            armijo_c: 1e-4,
            shrink: 0.5,
            prox_center: None,
            delta: None,
            rho_schedule: default_schedule(0.1, 0.5, 10),
        }
    }
}

type Seq = Vec<Vec<f64>>;

/// `start · factor^i` for `i = 0..levels`.
pub fn default_schedule(start: f64, factor: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| start * factor.powi(i as i32)).collect()
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.opt_tol > 0.0) {
            errs.push(format!("opt_tol must be positive, got {}", self.opt_tol));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            errs.push(format!("armijo_c must lie in (0,1), got {}", self.armijo_c));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            errs.push(format!("shrink must lie in (0,1), got {}", self.shrink));
        }
        if self.rho_schedule.is_empty() {
            errs.push("rho_schedule must not be empty".into());
        }
        if self.rho_schedule.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            errs.push("rho_schedule entries must be positive".into());
        }
        if self.rho_schedule.windows(2).any(|p| p[1] >= p[0]) {
            errs.push("rho_schedule must be strictly decreasing".into());
        }
        match (self.delta, &self.prox_center) {
            (Some(d), _) if !(d > 0.0) => errs.push(format!("delta must be positive, got {d}")),
            (Some(_), None) => errs.push("delta requires prox_center".into()),
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }
}

/// One accepted descent step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptedStep {
    pub step: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    /// `H¹` norm of the gradient at the start of the step.
    pub grad_norm: f64,
    /// `(∇J, g_new − g)_{H¹}`; equals `−step ‖∇J‖²` without projection.
    pub directional: f64,
}

impl AcceptedStep {
    /// Slack in the sufficient-decrease test (nonnegative for accepted steps).
    pub fn armijo_margin(&self, c: f64) -> f64 {
        self.objective_before + c * self.directional - self.objective_after
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub rho: f64,
    /// Objective at the start and after every accepted step.
    pub objective: Vec<f64>,
    /// Gradient norm at each iterate.
    pub grad_norm: Vec<f64>,
    pub steps: Vec<AcceptedStep>,
    /// `‖g − ḡ‖_{H¹}` at each iterate; empty without a proximal center.
    pub prox_distance: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt: Option<KktReport>,
}

struct Problem<'a> {
    cost: &'a CostConfig,
    cfg: &'a ProblemConfig,
    opts: &'a OptimizeOptions,
}

impl Problem<'_> {
    fn eval(&self, g: &[Vec<f64>], with_gradient: bool) -> Result<Evaluation> {
        let mut e = evaluate(g, self.cost, self.cfg, with_gradient)?;
        if let Some(center) = &self.opts.prox_center {
            let d = sub(g, center);
            e.objective += 0.5 * h1_norm(self.cfg, &d).powi(2);
            if let Some(r) = e.gradient.as_mut() {
                *r = axpy(r, 1.0, &d);
            }
        }
        Ok(e)
    }

    fn project(&self, g: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        match (&self.opts.prox_center, self.opts.delta) {
            (Some(center), Some(delta)) => {
                let d = sub(&g, center);
                let dist = h1_norm(self.cfg, &d);
                if dist > delta {
                    axpy(center, delta / dist, &d)
                } else {
                    g
                }
            }
            _ => g,
        }
    }

    fn stationarity(&self, g: &[Vec<f64>], grad: &[Vec<f64>]) -> f64 {
        if self.opts.delta.is_some() {
            let p = self.project(axpy(g, -1.0, grad));
            h1_norm(self.cfg, &sub(g, &p))
        } else {
            h1_norm(self.cfg, grad)
        }
    }
}

/// Minimizes `g ↦ J(S_rho(g), g)` (plus the proximal term if configured) from `g0`.
///
/// Trial steps use the Barzilai-Borwein length of the previous iteration
/// and are backtracked until the Armijo condition holds.
pub fn minimize_smoothed(
    g0: &[Vec<f64>],
    cost: &CostConfig,
    cfg: &ProblemConfig,
    opts: &OptimizeOptions,
) -> Result<(Vec<Vec<f64>>, OptimizeReport)> {
    opts.validate()?;
    cfg.check_control("minimize_smoothed", g0)?;
    let prob = Problem { cost, cfg, opts };

    let mut g = prob.project(g0.to_vec());
    let mut cur = prob.eval(&g, true)?;
    let mut grad = cur.gradient.take().expect("gradient requested");
    let mut report = OptimizeReport {
        rho: cfg.rho.rho(),
        objective: vec![cur.objective],
        grad_norm: vec![],
        steps: vec![],
        prox_distance: vec![],
        iterations: 0,
        converged: false,
        kkt: None,
    };
    let mut trial_step = 1.0;
    // (control, gradient) of the previous iterate, for the BB step
    let mut prev: Option<(Seq, Seq)> = None;

    loop {
        if let Some(center) = &opts.prox_center {
            report.prox_distance.push(h1_norm(cfg, &sub(&g, center)));
        }
        let gnorm = prob.stationarity(&g, &grad);
        report.grad_norm.push(gnorm);
        if gnorm <= opts.opt_tol {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_outer {
            break;
        }
        if let Some((g_old, r_old)) = &prev {
            let dg = sub(&g, g_old);
            let dr = sub(&grad, r_old);
            let curv = h1_inner(cfg, &dg, &dr);
            if curv > 0.0 {
                trial_step = (h1_inner(cfg, &dg, &dg) / curv).clamp(1e-8, 1e8);
            }
        }

        let mut step = trial_step;
        let mut accepted = None;
        for _ in 0..=60 {
            let cand = prob.project(axpy(&g, -step, &grad));
            let directional = h1_inner(cfg, &grad, &sub(&cand, &g));
            let e = prob.eval(&cand, false)?;
            if e.objective <= cur.objective + opts.armijo_c * directional {
                accepted = Some((cand, e, directional));
                break;
            }
            step *= opts.shrink;
        }
        let Some((cand, _, directional)) = accepted else {
            return Err(Error::Stall {
                iteration: report.iterations,
                objective: cur.objective,
                grad_norm: gnorm,
            });
        };
        let next = prob.eval(&cand, true)?;
        report.steps.push(AcceptedStep {
            step,
            objective_before: cur.objective,
            objective_after: next.objective,
            grad_norm: h1_norm(cfg, &grad),
            directional,
        });
        report.objective.push(next.objective);
        report.iterations += 1;

        let mut next = next;
        let next_grad = next.gradient.take().expect("gradient requested");
        prev = Some((std::mem::replace(&mut g, cand), std::mem::replace(&mut grad, next_grad)));
        cur = next;
    }

    // the adjoint of the accepted iterate is not kept across iterations; recompute once
    let fin = evaluate(&g, cost, cfg, true)?;
    let adj = fin.adjoint.as_ref().expect("adjoint requested");
    report.kkt = Some(check_nonsmooth_kkt(&fin.traj, &g, adj, cost, cfg)?);
    Ok((g, report))
}

/// Comparison of the smoothed and the non-smooth state at the final control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonsmoothCrossCheck {
    /// `‖w_rho − w‖_{L²(I,V)}`.
    pub err_l2v: f64,
    /// `sqrt(4 T |Ω| rho / σ)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationEntry {
    pub rho: f64,
    pub g_star: Vec<Vec<f64>>,
    pub report: OptimizeReport,
    /// Present on the last entry.
    pub crosscheck: Option<NonsmoothCrossCheck>,
}

/// Warm-started `minimize_smoothed` along `opts.rho_schedule`.
pub fn continuation(
    g0: &[Vec<f64>],
    cost: &CostConfig,
    cfg: &ProblemConfig,
    opts: &OptimizeOptions,
) -> Result<Vec<ContinuationEntry>> {
    opts.validate()?;
    let mut g = g0.to_vec();
    let mut path = Vec::with_capacity(opts.rho_schedule.len());
    for &rho in &opts.rho_schedule {
        let level = cfg.with_rho(rho)?;
        let (g_star, report) = minimize_smoothed(&g, cost, &level, opts)?;
        g.clone_from(&g_star);
        path.push(ContinuationEntry {
            rho,
            g_star,
            report,
            crosscheck: None,
        });
    }
    let last = path.last_mut().expect("nonempty schedule");
    let level = cfg.with_rho(last.rho)?;
    let loads = level.loads(&last.g_star);
    let smooth = crate::state::solve_regularized(&loads, &level)?;
    let rough = solve_nonsmooth(&loads, &level)?;
    last.crosscheck = Some(NonsmoothCrossCheck {
        err_l2v: l2_v(&level, &sub(&smooth.w, &rough.w))?,
        bound: (4.0 * cfg.grid.t_final() * last.rho / cfg.sigma).sqrt(),
    });
    Ok(path)
}

/// `‖g*(rho_{i+1}) − g*(rho_i)‖_{H¹}` along a continuation path.
pub fn path_increments(cfg: &ProblemConfig, path: &[ContinuationEntry]) -> Vec<f64> {
    path.windows(2)
        .map(|p| h1_norm(cfg, &sub(&p[1].g_star, &p[0].g_star)))
        .collect()
}
