//! Sectioned `key = value` experiment files.
//!
//! ```text
//! [problem]
//! sigma = 1
//! T = 1
//! n_el = 16
//! n_t = 16
//! rho = 1e-2
//! ```
//!
//! Every section and key is optional except the five in `[problem]`.
//! Parsing never stops at the first problem: all violations are collected
//! and reported together.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use viscoflow_core::optimizer::default_schedule;
use viscoflow_core::presets::{control_sequence, Preset};
use viscoflow_core::{CostConfig, OptimizeOptions, ProblemConfig, SolverOptions};

use crate::CliError;

/// Where a space-time field comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FieldSource {
    Preset(Preset),
    /// CSV with `n_t + 1` rows of `n_el − 1` nodal values.
    File(PathBuf),
}

impl fmt::Display for FieldSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSource::Preset(p) => write!(f, "{p}"),
            FieldSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FieldSource {
    fn parse(s: &str, base: &Path) -> FieldSource {
        match s.parse::<Preset>() {
            Ok(p) => FieldSource::Preset(p),
            Err(_) => FieldSource::File(base.join(s)),
        }
    }

    /// Nodal samples scaled by `scale`.
    pub fn sample(&self, cfg: &ProblemConfig, scale: f64) -> Result<Vec<Vec<f64>>, CliError> {
        match self {
            FieldSource::Preset(p) => Ok(control_sequence(cfg, *p, scale)),
            FieldSource::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let rows: Vec<&str> = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .collect();
                let mut out = Vec::with_capacity(rows.len());
                for (r, line) in rows.iter().enumerate() {
                    let vals = line
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| CliError::Config(format!("{}: row {}: {e}", path.display(), r + 1)))?;
                    if vals.len() != cfg.n() {
                        return Err(CliError::Config(format!(
                            "{}: row {} has {} values, expected {}",
                            path.display(),
                            r + 1,
                            vals.len(),
                            cfg.n()
                        )));
                    }
                    out.push(vals.into_iter().map(|v| scale * v).collect());
                }
                if out.len() != cfg.n_t() + 1 {
                    return Err(CliError::Config(format!(
                        "{}: {} rows, expected {}",
                        path.display(),
                        out.len(),
                        cfg.n_t() + 1
                    )));
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMode {
    Regularized,
    Nonsmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Terminal {
    /// `z_T = z_d(T)`.
    Final,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSection {
    pub sigma: f64,
    pub t_final: f64,
    pub n_el: usize,
    pub n_t: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSection {
    pub target: FieldSource,
    pub target_scale: f64,
    pub terminal: Terminal,
    pub alpha1: f64,
    pub alpha2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerSection {
    pub max_outer: usize,
    pub opt_tol: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    /// `initial` centers the trust ball at the starting control.
    pub prox_center: Option<String>,
    pub delta: Option<f64>,
    pub rho_schedule: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    pub rhos: Vec<f64>,
    pub slack: f64,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckSection {
    pub epsilons: Vec<f64>,
    pub directions: usize,
    pub seed: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub solver: SolverOptions,
    pub control: FieldSource,
    pub control_scale: f64,
    pub cost: CostSection,
    pub optimizer: OptimizerSection,
    pub sweep: SweepSection,
    pub grad_check: GradCheckSection,
    pub kkt_eps: f64,
    pub solve_mode: SolveMode,
    pub output_dir: PathBuf,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("problem", &["sigma", "T", "n_el", "n_t", "rho"]),
    ("solver", &["tol_newton", "max_newton", "tol_admm", "max_admm", "tol_active"]),
    ("control", &["source", "scale"]),
    ("cost", &["target", "target_scale", "terminal", "alpha1", "alpha2"]),
    (
        "optimizer",
        &["max_outer", "opt_tol", "armijo_c", "shrink", "prox_center", "delta", "rho_schedule"],
    ),
    ("sweep", &["rhos", "slack", "parallel"]),
    ("grad_check", &["epsilons", "directions", "seed", "threshold"]),
    ("kkt", &["eps"]),
    ("solve", &["mode"]),
    ("output", &["dir"]),
];

type Raw = BTreeMap<(String, String), (usize, String)>;

fn read_raw(text: &str, errs: &mut Vec<String>) -> Raw {
    let mut raw = Raw::new();
    let mut section: Option<String> = None;
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        let line = line.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if SECTIONS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                errs.push(format!("line {no}: unknown section [{name}]"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errs.push(format!("line {no}: expected `key = value`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = &section else {
            if !errs.iter().any(|e| e.contains("unknown section")) {
                errs.push(format!("line {no}: key '{key}' outside of a section"));
            }
            continue;
        };
        let known = SECTIONS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            errs.push(format!("line {no}: unknown key '{key}' in [{sec}]"));
            continue;
        }
        if raw.insert((sec.clone(), key.to_string()), (no, value.to_string())).is_some() {
            errs.push(format!("line {no}: duplicate key '{key}' in [{sec}]"));
        }
    }
    raw
}

struct Reader<'a> {
    raw: &'a Raw,
    errs: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn get<T: FromStr>(&mut self, sec: &str, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (no, v) = self.raw.get(&(sec.to_string(), key.to_string()))?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.errs.push(format!("line {no}: {key} = '{v}': {e}"));
                None
            }
        }
    }

    fn required<T: FromStr>(&mut self, sec: &str, key: &str, fallback: T) -> T
    where
        T::Err: fmt::Display,
    {
        if !self.raw.contains_key(&(sec.to_string(), key.to_string())) {
            self.errs.push(format!("missing required key '{key}' in [{sec}]"));
            return fallback;
        }
        self.get(sec, key).unwrap_or(fallback)
    }

    fn or<T: FromStr>(&mut self, sec: &str, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        self.get(sec, key).unwrap_or(default)
    }

    fn list(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let (no, v) = self.raw.get(&(sec.to_string(), key.to_string()))?;
        match v.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.errs.push(format!("line {no}: {key} = '{v}': {e}"));
                None
            }
        }
    }

    fn raw_str(&self, sec: &str, key: &str) -> Option<String> {
        self.raw.get(&(sec.to_string(), key.to_string())).map(|(_, v)| v.clone())
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.errs.push(msg.into());
        }
    }
}

/// Default `rho` values of the sweep command.
pub const DEFAULT_SWEEP: [f64; 6] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4];

/// Parses `text`; relative file paths resolve against `base`.
pub fn parse_str(text: &str, base: &Path) -> Result<ExperimentConfig, CliError> {
    let mut errs = Vec::new();
    let raw = read_raw(text, &mut errs);
    let mut r = Reader { raw: &raw, errs: &mut errs };

    let problem = ProblemSection {
        sigma: r.required("problem", "sigma", 1.0),
        t_final: r.required("problem", "T", 1.0),
        n_el: r.required("problem", "n_el", 2),
        n_t: r.required("problem", "n_t", 1),
        rho: r.required("problem", "rho", 1e-2),
    };
    r.check(problem.sigma > 0.0 && problem.sigma.is_finite(), "sigma must be positive");
    r.check(problem.t_final > 0.0 && problem.t_final.is_finite(), "T must be positive");
    r.check(problem.n_el >= 2, "n_el must be at least 2");
    r.check(problem.n_t >= 1, "n_t must be at least 1");
    r.check(problem.rho > 0.0 && problem.rho.is_finite(), "rho must be positive");

    let d = SolverOptions::default();
    let solver = SolverOptions {
        tol_newton: r.or("solver", "tol_newton", d.tol_newton),
        max_newton: r.or("solver", "max_newton", d.max_newton),
        tol_admm: r.or("solver", "tol_admm", d.tol_admm),
        max_admm: r.or("solver", "max_admm", d.max_admm),
        tol_active: r.or("solver", "tol_active", d.tol_active),
        ..d
    };
    for (name, v) in [
        ("tol_newton", solver.tol_newton),
        ("tol_admm", solver.tol_admm),
        ("tol_active", solver.tol_active),
    ] {
        r.check(v > 0.0, format!("{name} must be positive"));
    }
    r.check(solver.max_newton >= 1, "max_newton must be at least 1");
    r.check(solver.max_admm >= 1, "max_admm must be at least 1");

    let control = FieldSource::parse(&r.raw_str("control", "source").unwrap_or_else(|| "sine".into()), base);
    let control_scale: f64 = r.or("control", "scale", 1.0);
    r.check(control_scale.is_finite(), "control scale must be finite");

    let terminal = match r.raw_str("cost", "terminal").as_deref() {
        None | Some("final") => Terminal::Final,
        Some("zero") => Terminal::Zero,
        Some(other) => {
            r.errs.push(format!("terminal must be 'final' or 'zero', got '{other}'"));
            Terminal::Final
        }
    };
    let cost = CostSection {
        target: FieldSource::parse(&r.raw_str("cost", "target").unwrap_or_else(|| "zero".into()), base),
        target_scale: r.or("cost", "target_scale", 1.0),
        terminal,
        alpha1: r.or("cost", "alpha1", 1.0),
        alpha2: r.or("cost", "alpha2", 1.0),
    };
    r.check(cost.alpha1 >= 0.0, "alpha1 must be nonnegative");
    r.check(cost.alpha2 >= 0.0, "alpha2 must be nonnegative");

    let od = OptimizeOptions::default();
    let optimizer = OptimizerSection {
        max_outer: r.or("optimizer", "max_outer", od.max_outer),
        opt_tol: r.or("optimizer", "opt_tol", od.opt_tol),
        armijo_c: r.or("optimizer", "armijo_c", od.armijo_c),
        shrink: r.or("optimizer", "shrink", od.shrink),
        prox_center: r.raw_str("optimizer", "prox_center"),
        delta: r.get("optimizer", "delta"),
        rho_schedule: r
            .list("optimizer", "rho_schedule")
            .unwrap_or_else(|| default_schedule(0.1, 0.5, 10)),
    };
    if let Some(c) = &optimizer.prox_center {
        if c != "initial" {
            r.errs.push(format!("prox_center must be 'initial', got '{c}'"));
        }
    }
    let probe = OptimizeOptions {
        max_outer: optimizer.max_outer,
        opt_tol: optimizer.opt_tol,
        armijo_c: optimizer.armijo_c,
        shrink: optimizer.shrink,
        prox_center: optimizer.prox_center.as_ref().map(|_| Vec::new()),
        delta: optimizer.delta,
        rho_schedule: optimizer.rho_schedule.clone(),
    };
    if let Err(e) = probe.validate() {
        r.errs.push(e.to_string());
    }

    let sweep = SweepSection {
        rhos: r.list("sweep", "rhos").unwrap_or_else(|| DEFAULT_SWEEP.to_vec()),
        slack: r.or("sweep", "slack", 0.1),
        parallel: r.or("sweep", "parallel", true),
    };
    r.check(!sweep.rhos.is_empty() && sweep.rhos.iter().all(|x| *x > 0.0), "sweep rhos must be positive");
    r.check(sweep.slack >= 0.0, "sweep slack must be nonnegative");

    let grad_check = GradCheckSection {
        epsilons: r
            .list("grad_check", "epsilons")
            .unwrap_or_else(|| (1..=8).map(|e| 10f64.powi(-e)).collect()),
        directions: r.or("grad_check", "directions", 1),
        seed: r.or("grad_check", "seed", 0),
        threshold: r.or("grad_check", "threshold", 1e-6),
    };
    r.check(
        !grad_check.epsilons.is_empty() && grad_check.epsilons.iter().all(|x| *x > 0.0),
        "grad_check epsilons must be positive",
    );
    r.check(grad_check.directions >= 1, "grad_check directions must be at least 1");

    let kkt_eps: f64 = r.or("kkt", "eps", 0.05);
    r.check(kkt_eps > 0.0 && kkt_eps < 0.5, "kkt eps must lie in (0, 0.5)");

    let solve_mode = match r.raw_str("solve", "mode").as_deref() {
        None | Some("regularized") => SolveMode::Regularized,
        Some("nonsmooth") => SolveMode::Nonsmooth,
        Some(other) => {
            r.errs.push(format!("solve mode must be 'regularized' or 'nonsmooth', got '{other}'"));
            SolveMode::Regularized
        }
    };
    let output_dir = base.join(r.raw_str("output", "dir").unwrap_or_else(|| "out".into()));

    if !errs.is_empty() {
        return Err(CliError::Config(errs.join("\n")));
    }
    Ok(ExperimentConfig {
        problem,
        solver,
        control,
        control_scale,
        cost,
        optimizer,
        sweep,
        grad_check,
        kkt_eps,
        solve_mode,
        output_dir,
    })
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_str(&text, base)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn problem_config(&self) -> Result<ProblemConfig, CliError> {
        let p = &self.problem;
        let mut cfg = ProblemConfig::new(p.sigma, p.n_el, p.t_final, p.n_t, p.rho)?;
        cfg.solver = self.solver;
        Ok(cfg)
    }

    pub fn control(&self, cfg: &ProblemConfig) -> Result<Vec<Vec<f64>>, CliError> {
        let g = self.control.sample(cfg, self.control_scale)?;
        if g[0].iter().any(|v| *v != 0.0) {
            return Err(CliError::Config("control must vanish at t = 0".into()));
        }
        Ok(g)
    }

    pub fn cost(&self, cfg: &ProblemConfig) -> Result<CostConfig, CliError> {
        let z_d = self.cost.target.sample(cfg, self.cost.target_scale)?;
        let z_t = match self.cost.terminal {
            Terminal::Final => z_d[cfg.n_t()].clone(),
            Terminal::Zero => cfg.zeros(),
        };
        Ok(CostConfig::new(z_d, z_t, self.cost.alpha1, self.cost.alpha2)?)
    }

    pub fn optimize_options(&self, g0: &[Vec<f64>]) -> OptimizeOptions {
        let o = &self.optimizer;
        OptimizeOptions {
            max_outer: o.max_outer,
            opt_tol: o.opt_tol,
            armijo_c: o.armijo_c,
            shrink: o.shrink,
            prox_center: o.prox_center.as_ref().map(|_| g0.to_vec()),
            delta: o.delta,
            rho_schedule: o.rho_schedule.clone(),
        }
    }

    /// Effective values of every key, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let p = &self.problem;
        let s = &self.solver;
        let o = &self.optimizer;
        let mut v = vec![
            ("problem.sigma", p.sigma.to_string()),
            ("problem.T", p.t_final.to_string()),
            ("problem.n_el", p.n_el.to_string()),
            ("problem.n_t", p.n_t.to_string()),
            ("problem.rho", p.rho.to_string()),
            ("solver.tol_newton", s.tol_newton.to_string()),
            ("solver.max_newton", s.max_newton.to_string()),
            ("solver.tol_admm", s.tol_admm.to_string()),
            ("solver.max_admm", s.max_admm.to_string()),
            ("solver.tol_active", s.tol_active.to_string()),
            ("control.source", self.control.to_string()),
            ("control.scale", self.control_scale.to_string()),
            ("cost.target", self.cost.target.to_string()),
            ("cost.target_scale", self.cost.target_scale.to_string()),
            (
                "cost.terminal",
                match self.cost.terminal {
                    Terminal::Final => "final".into(),
                    Terminal::Zero => "zero".into(),
                },
            ),
            ("cost.alpha1", self.cost.alpha1.to_string()),
            ("cost.alpha2", self.cost.alpha2.to_string()),
            ("optimizer.max_outer", o.max_outer.to_string()),
            ("optimizer.opt_tol", o.opt_tol.to_string()),
            ("optimizer.armijo_c", o.armijo_c.to_string()),
            ("optimizer.shrink", o.shrink.to_string()),
            ("optimizer.rho_schedule", join(&o.rho_schedule)),
            ("sweep.rhos", join(&self.sweep.rhos)),
            ("sweep.slack", self.sweep.slack.to_string()),
            ("sweep.parallel", self.sweep.parallel.to_string()),
            ("grad_check.epsilons", join(&self.grad_check.epsilons)),
            ("grad_check.directions", self.grad_check.directions.to_string()),
            ("grad_check.seed", self.grad_check.seed.to_string()),
            ("grad_check.threshold", self.grad_check.threshold.to_string()),
            ("kkt.eps", self.kkt_eps.to_string()),
            (
                "solve.mode",
                match self.solve_mode {
                    SolveMode::Regularized => "regularized".into(),
                    SolveMode::Nonsmooth => "nonsmooth".into(),
                },
            ),
        ];
        if let Some(c) = &o.prox_center {
            v.push(("optimizer.prox_center", c.clone()));
        }
        if let Some(d) = o.delta {
            v.push(("optimizer.delta", d.to_string()));
        }
        v.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
