//! The five experiment commands.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use viscoflow_core::adjoint::evaluate;
use viscoflow_core::optimizer::path_increments;
use viscoflow_core::spacetime::{h1_inner, l2_v, max_v, sub};
use viscoflow_core::{
    check_cone_c, check_nonsmooth_kkt, classify_regimes, continuation, reduced_gradient, reduced_objective,
    residual_inclusion, solve_nonsmooth, solve_regularized, ProblemConfig, Regime, Trajectory,
};

use crate::config::{ExperimentConfig, SolveMode};
use crate::output::{render_field, Cell, Sink, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    GradCheck,
    RhoSweep,
    Optimize,
    CheckKkt,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::GradCheck => "grad-check",
            Command::RhoSweep => "rho-sweep",
            Command::Optimize => "optimize",
            Command::CheckKkt => "check-kkt",
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub config: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    /// Human-readable reasons the run's built-in checks failed.
    pub failures: Vec<String>,
    pub files: Vec<String>,
}

struct Run<'a> {
    exp: &'a ExperimentConfig,
    meta: Vec<(String, String)>,
    sink: Sink,
    metrics: BTreeMap<String, f64>,
    failures: Vec<String>,
}

impl Run<'_> {
    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    fn expect(&mut self, ok: bool, msg: String) {
        if !ok {
            self.failures.push(msg);
        }
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        let text = t.render(&self.meta);
        self.sink.write(name, &text)
    }
}

/// Runs `cmd`, writes its files and returns the summary.
///
/// With `assert` set, a failed built-in check turns into
/// [`CliError::Assertion`] after all files have been written.
pub fn run(cmd: Command, exp: &ExperimentConfig, assert: bool) -> Result<Summary, CliError> {
    let mut run = Run {
        exp,
        meta: exp.entries(),
        sink: Sink::create(&exp.output_dir)?,
        metrics: BTreeMap::new(),
        failures: Vec::new(),
    };
    match cmd {
        Command::Solve => solve(&mut run)?,
        Command::GradCheck => grad_check(&mut run)?,
        Command::RhoSweep => rho_sweep(&mut run)?,
        Command::Optimize => optimize(&mut run)?,
        Command::CheckKkt => check_kkt(&mut run)?,
    }
    let files = run
        .sink
        .written
        .iter()
        .filter_map(|p| p.file_name())
        .map(|p| p.to_string_lossy().into_owned())
        .chain(std::iter::once("summary.json".to_string()))
        .collect();
    let summary = Summary {
        command: cmd.name(),
        config: run.meta.iter().cloned().collect(),
        metrics: run.metrics,
        failures: run.failures,
        files,
    };
    run.sink.json("summary.json", &summary)?;
    if assert && !summary.failures.is_empty() {
        return Err(CliError::Assertion(summary.failures.join("; ")));
    }
    Ok(summary)
}

fn state_table(cfg: &ProblemConfig, traj: &Trajectory) -> Table {
    let mut t = Table::new(&["k", "t", "node", "x", "z", "w", "dual"]);
    let xs = cfg.mesh.nodes();
    for k in 0..=cfg.n_t() {
        for (i, x) in xs.iter().enumerate() {
            let dual = match (&traj.dual, k) {
                (Some(d), 1..) => Cell::Float(d[k][i]),
                (None, 1..) => Cell::Float(cfg.rho.deriv(traj.w[k][i])),
                (_, 0) => Cell::Float(0.0),
            };
            t.push(vec![
                k.into(),
                cfg.grid.t(k).into(),
                (i + 1).into(),
                (*x).into(),
                traj.z[k][i].into(),
                traj.w[k][i].into(),
                dual,
            ]);
        }
    }
    t
}

fn solve(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.exp.problem_config()?;
    let g = run.exp.control(&cfg)?;
    let loads = cfg.loads(&g);
    let traj = match run.exp.solve_mode {
        SolveMode::Regularized => solve_regularized(&loads, &cfg)?,
        SolveMode::Nonsmooth => solve_nonsmooth(&loads, &cfg)?,
    };
    run.table("solve.csv", &state_table(&cfg, &traj))?;
    let max_abs = |s: &[Vec<f64>]| s.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    run.metric("max_abs_z", max_abs(&traj.z));
    run.metric("max_abs_w", max_abs(&traj.w));
    run.metric("z_final_v", cfg.mesh.norm_v(&traj.z[cfg.n_t()])?);
    if traj.dual.is_some() {
        let rep = residual_inclusion(&traj, &loads, &cfg)?;
        run.metric("inclusion_dual_range", rep.max_dual_range);
        run.metric("inclusion_sign", rep.max_sign);
        run.metric("inclusion_force", rep.max_force);
        let limit = 10.0 * cfg.solver.tol_admm;
        run.expect(rep.max() <= limit, format!("inclusion residual {:e} exceeds {limit:e}", rep.max()));
    }
    let finite = traj.z.iter().chain(&traj.w).flatten().all(|v| v.is_finite());
    run.expect(finite, "state contains non-finite values".into());
    Ok(())
}

fn grad_check(run: &mut Run) -> Result<(), CliError> {
    let gc = run.exp.grad_check.clone();
    let cfg = run.exp.problem_config()?;
    let cost = run.exp.cost(&cfg)?;
    let g = run.exp.control(&cfg)?;
    let grad = reduced_gradient(&g, &cost, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(gc.seed);
    let dirs: Vec<Vec<Vec<f64>>> = (0..gc.directions)
        .map(|_| {
            let mut d: Vec<Vec<f64>> = (0..=cfg.n_t())
                .map(|_| (0..cfg.n()).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                .collect();
            d[0].iter_mut().for_each(|v| *v = 0.0);
            d
        })
        .collect();
    let shifted = |dir: &[Vec<f64>], s: f64| -> Vec<Vec<f64>> {
        g.iter()
            .zip(dir)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect()
    };
    let mut table = Table::new(&["epsilon", "rel_error"]);
    let mut best = f64::INFINITY;
    for &eps in &gc.epsilons {
        let mut worst: f64 = 0.0;
        for d in &dirs {
            let analytic = h1_inner(&cfg, &grad, d);
            let fd = (reduced_objective(&shifted(d, eps), &cost, &cfg)?
                - reduced_objective(&shifted(d, -eps), &cost, &cfg)?)
                / (2.0 * eps);
            worst = worst.max((fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE));
        }
        best = best.min(worst);
        table.push(vec![eps.into(), worst.into()]);
    }
    run.table("grad_check.csv", &table)?;
    run.metric("min_rel_error", best);
    run.expect(
        best <= gc.threshold,
        format!("smallest relative error {best:e} exceeds {:e}", gc.threshold),
    );
    Ok(())
}

fn rho_sweep(run: &mut Run) -> Result<(), CliError> {
    let sweep = run.exp.sweep.clone();
    let cfg = run.exp.problem_config()?;
    let g = run.exp.control(&cfg)?;
    let loads = cfg.loads(&g);
    let oracle = solve_nonsmooth(&loads, &cfg)?;
    let t_final = cfg.grid.t_final();
    let one = |rho: f64| -> Result<(f64, f64, f64), CliError> {
        let c = cfg.with_rho(rho)?;
        let traj = solve_regularized(&loads, &c)?;
        let e_w = l2_v(&c, &sub(&traj.w, &oracle.w))?;
        let e_z = max_v(&c, &sub(&traj.z, &oracle.z))?;
        Ok((e_w, e_z, (4.0 * t_final * rho / c.sigma).sqrt()))
    };
    let rows: Vec<(f64, f64, f64)> = if sweep.parallel {
        sweep.rhos.par_iter().map(|r| one(*r)).collect::<Result<_, _>>()?
    } else {
        sweep.rhos.iter().map(|r| one(*r)).collect::<Result<_, _>>()?
    };
    let mut table = Table::new(&["rho", "err_L2IV", "err_CIV", "bound_sqrt", "slope_local"]);
    let mut worst_ratio: f64 = 0.0;
    for (j, (&rho, &(e_w, e_z, bound))) in sweep.rhos.iter().zip(&rows).enumerate() {
        let slope = if j == 0 {
            Cell::Text(String::new())
        } else {
            let (prev_rho, prev_err) = (sweep.rhos[j - 1], rows[j - 1].0);
            Cell::Float((e_w / prev_err).ln() / (rho / prev_rho).ln())
        };
        worst_ratio = worst_ratio.max(e_w / bound);
        table.push(vec![rho.into(), e_w.into(), e_z.into(), bound.into(), slope]);
    }
    run.table("rho_sweep.csv", &table)?;
    run.metric("max_err_over_bound", worst_ratio);
    run.expect(
        worst_ratio <= 1.0 + sweep.slack,
        format!("err_L2IV / bound reaches {worst_ratio}, limit {}", 1.0 + sweep.slack),
    );
    Ok(())
}

fn optimize(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.exp.problem_config()?;
    let cost = run.exp.cost(&cfg)?;
    let g0 = run.exp.control(&cfg)?;
    let opts = run.exp.optimize_options(&g0);
    let path = continuation(&g0, &cost, &cfg, &opts)?;
    let increments = path_increments(&cfg, &path);

    let mut summary = Table::new(&[
        "level",
        "rho",
        "objective",
        "grad_norm",
        "iterations",
        "converged",
        "r_gradient",
        "r_comp",
        "comp_bound",
        "increment_h1",
    ]);
    let mut history = Table::new(&["level", "rho", "iteration", "objective", "grad_norm"]);
    for (l, e) in path.iter().enumerate() {
        let kkt = e.report.kkt.as_ref();
        let pick = |f: fn(&viscoflow_core::KktReport) -> f64| kkt.map_or(f64::NAN, f);
        let incr = if l == 0 { Cell::Text(String::new()) } else { Cell::Float(increments[l - 1]) };
        summary.push(vec![
            l.into(),
            e.rho.into(),
            e.report.objective.last().copied().unwrap_or(f64::NAN).into(),
            e.report.grad_norm.last().copied().unwrap_or(f64::NAN).into(),
            e.report.iterations.into(),
            if e.report.converged { "true" } else { "false" }.into(),
            pick(|k| k.r_gradient).into(),
            pick(|k| k.r_comp).into(),
            pick(|k| k.comp_bound).into(),
            incr,
        ]);
        for (it, (j, gn)) in e.report.objective.iter().zip(&e.report.grad_norm).enumerate() {
            history.push(vec![l.into(), e.rho.into(), it.into(), (*j).into(), (*gn).into()]);
        }
    }
    run.table("optimize_path.csv", &summary)?;
    run.table("optimize_history.csv", &history)?;
    let last = path.last().expect("validated schedule is nonempty");
    let text = render_field(&last.g_star, &run.meta);
    run.sink.write("control.csv", &text)?;

    run.metric("objective", last.report.objective.last().copied().unwrap_or(f64::NAN));
    run.metric("levels", path.len() as f64);
    if let Some(k) = &last.report.kkt {
        run.metric("r_gradient", k.r_gradient);
        run.metric("r_comp", k.r_comp);
        run.metric("comp_bound", k.comp_bound);
        let limit = 10.0 * opts.opt_tol;
        run.expect(k.r_gradient <= limit, format!("r_gradient {:e} exceeds {limit:e}", k.r_gradient));
    }
    if let Some(x) = &last.crosscheck {
        run.metric("crosscheck_err_l2v", x.err_l2v);
        run.metric("crosscheck_bound", x.bound);
        run.expect(x.err_l2v <= x.bound, format!("cross-check {:e} exceeds {:e}", x.err_l2v, x.bound));
    }
    for (l, e) in path.iter().enumerate() {
        run.expect(e.report.converged, format!("level {l} (rho {}) stopped at max_outer", e.rho));
    }
    Ok(())
}

fn check_kkt(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.exp.problem_config()?;
    let cost = run.exp.cost(&cfg)?;
    let g = run.exp.control(&cfg)?;
    let ev = evaluate(&g, &cost, &cfg, true)?;
    let adj = ev.adjoint.as_ref().expect("gradient requested");
    let report = check_nonsmooth_kkt(&ev.traj, &g, adj, &cost, &cfg)?;
    let regimes = classify_regimes(&ev.traj, &g, &cfg, run.exp.kkt_eps)?;
    let cone = check_cone_c(adj, &regimes);

    let mut fields = Table::new(&["quantity", "value"]);
    for (name, v) in report.fields() {
        fields.push(vec![name.into(), v.into()]);
        run.metric(name, v);
    }
    fields.push(vec!["cone_c".into(), cone.into()]);
    run.metric("cone_c", cone);
    run.table("kkt.csv", &fields)?;

    let mut table = Table::new(&["regime", "count", "fraction", "max_violation", "mean_violation"]);
    for r in Regime::ALL {
        let stats = report.regime_stats.iter().find(|s| s.regime == r);
        table.push(vec![
            r.name().into(),
            regimes.count(r).into(),
            regimes.fraction(r).into(),
            stats.map_or(0.0, |s| s.max_violation).into(),
            stats.map_or(0.0, |s| s.mean_violation).into(),
        ]);
    }
    run.table("regimes.csv", &table)?;
    run.metric("unclassified_fraction", regimes.fraction(Regime::Unclassified));

    run.expect(
        report.r_comp <= report.comp_bound,
        format!("r_comp {:e} exceeds its bound {:e}", report.r_comp, report.comp_bound),
    );
    run.expect(
        report.sign_identity_residual <= 1e-8,
        format!("sign identity residual {:e} exceeds 1e-8", report.sign_identity_residual),
    );
    Ok(())
}
