//! Diagnostics for the limiting optimality system.
//!
//! Given a state trajectory, a control, and the adjoint triple computed at a
//! small smoothing width, [`check_nonsmooth_kkt`] measures how far the
//! discrete data are from satisfying
//!
//! * the state inclusion `(ż, g + Δz + σΔż) ∈ graph ∂|·|`,
//! * the integrated adjoint equation `u(t) = j₂' + ∫_t^T (Δξ + j₁')`,
//! * the weak gradient equation `(ξ,h)_{L²(I,H)} + (g,h)_{H¹(I,H)} = 0`,
//! * complementarity `⟨q, φ|ż|⟩ = 0`, tested against nodal hat functions,
//! * the sign conditions `⟨u,ξ⟩ ≥ σ‖ξ‖²_V` and `⟨q,ξ⟩ ≥ 0`.
//!
//! [`classify_regimes`] labels every space-time node as stick or slip, and
//! [`check_cone_c`] reports how much adjoint mass sits on the strict-stick set.

use serde::{Deserialize, Serialize};

use crate::adjoint::{riesz_time, AdjointTriple, CostConfig};
use crate::error::Result;
use crate::fem1d::dot;
use crate::spacetime::{axpy, h1_norm};
use crate::state::{ProblemConfig, Trajectory};

/// Default band half-width around `±1` for regime classification.
pub const DEFAULT_REGIME_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `ż = 0`, `|d| < 1 − eps`.
    StickInterior,
    /// `ż = 0`, `d ≈ 1`.
    StickBoundaryPos,
    /// `ż = 0`, `d ≈ −1`.
    StickBoundaryNeg,
    SlipPos,
    SlipNeg,
    /// `|d| > 1 + eps`, impossible for an exact solution.
    Unclassified,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::StickInterior,
        Regime::StickBoundaryPos,
        Regime::StickBoundaryNeg,
        Regime::SlipPos,
        Regime::SlipNeg,
        Regime::Unclassified,
    ];

    fn index(self) -> usize {
        Regime::ALL.iter().position(|r| *r == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::StickInterior => "stick_interior",
            Regime::StickBoundaryPos => "stick_boundary_pos",
            Regime::StickBoundaryNeg => "stick_boundary_neg",
            Regime::SlipPos => "slip_pos",
            Regime::SlipNeg => "slip_neg",
            Regime::Unclassified => "unclassified",
        }
    }
}

/// Labels for steps `1..=n_t` (row `k − 1` is step `k`) and the dual argument used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeTable {
    pub eps: f64,
    pub labels: Vec<Vec<Regime>>,
    /// `d = g + Δz + σΔż` per node, same layout as `labels`.
    pub dual_arg: Vec<Vec<f64>>,
    pub counts: [usize; 6],
}

impl RegimeTable {
    pub fn count(&self, r: Regime) -> usize {
        self.counts[r.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn fraction(&self, r: Regime) -> f64 {
        self.count(r) as f64 / self.total().max(1) as f64
    }
}

/// Violation statistics of the pointwise condition attached to one regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeStats {
    pub regime: Regime,
    pub count: usize,
    pub max_violation: f64,
    pub mean_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub r_state: f64,
    pub r_adjoint: f64,
    pub r_gradient: f64,
    pub r_comp: f64,
    /// `T sqrt(2 rho) max_k ‖sqrt(d'(w_k)) ξ_k‖_H`, the a-priori bound for `r_comp`.
    pub comp_bound: f64,
    /// `max_k (σ ξ_kᵀKξ_k − u_{k−1}ᵀξ_k)⁺`.
    pub sign_u_xi: f64,
    /// `max_k (−q_kᵀξ_k)⁺`.
    pub sign_q_xi: f64,
    /// `min_k (u_{k−1}ᵀξ_k − σ ξ_kᵀKξ_k)`.
    pub min_u_xi_margin: f64,
    /// `max_k |u_{k−1}ᵀξ_k − σ ξ_kᵀKξ_k − Σ_i h d'(w_{k,i}) ξ_{k,i}²|`.
    pub sign_identity_residual: f64,
    pub regime_counts: Vec<(Regime, usize)>,
    pub regime_stats: Vec<RegimeStats>,
}

impl KktReport {
    /// `(name, value)` pairs of the scalar fields, in a fixed order.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("r_state", self.r_state),
            ("r_adjoint", self.r_adjoint),
            ("r_gradient", self.r_gradient),
            ("r_comp", self.r_comp),
            ("comp_bound", self.comp_bound),
            ("sign_u_xi", self.sign_u_xi),
            ("sign_q_xi", self.sign_q_xi),
            ("min_u_xi_margin", self.min_u_xi_margin),
            ("sign_identity_residual", self.sign_identity_residual),
        ]
    }
}

/// Width of the band treated as `ż = 0`.
fn stick_threshold(traj: &Trajectory, cfg: &ProblemConfig) -> f64 {
    if traj.dual.is_some() {
        cfg.solver.tol_active
    } else {
        cfg.solver.tol_active.max(cfg.rho.rho())
    }
}

/// Labels every `(k, i)` by the sign of the rate and the dual argument.
pub fn classify_regimes(traj: &Trajectory, g: &[Vec<f64>], cfg: &ProblemConfig, eps: f64) -> Result<RegimeTable> {
    cfg.check_sequence("classify_regimes: z", &traj.z)?;
    cfg.check_sequence("classify_regimes: w", &traj.w)?;
    cfg.check_sequence("classify_regimes: g", g)?;
    let h = cfg.mesh.h();
    let thresh = stick_threshold(traj, cfg);
    let mut labels = Vec::with_capacity(cfg.n_t());
    let mut dual_arg = Vec::with_capacity(cfg.n_t());
    let mut counts = [0usize; 6];
    for k in 1..=cfg.n_t() {
        let load = cfg.mesh.apply_m(&g[k]);
        let kz = cfg.mesh.apply_k(&traj.z[k]);
        let kw = cfg.mesh.apply_k(&traj.w[k]);
        let mut row = Vec::with_capacity(cfg.n());
        let mut drow = Vec::with_capacity(cfg.n());
        for i in 0..cfg.n() {
            let d = (load[i] - kz[i] - cfg.sigma * kw[i]) / h;
            let w = traj.w[k][i];
            let r = if d.abs() > 1.0 + eps {
                Regime::Unclassified
            } else if w > thresh {
                Regime::SlipPos
            } else if w < -thresh {
                Regime::SlipNeg
            } else if d.abs() < 1.0 - eps {
                Regime::StickInterior
            } else if d > 0.0 {
                Regime::StickBoundaryPos
            } else {
                Regime::StickBoundaryNeg
            };
            counts[r.index()] += 1;
            row.push(r);
            drow.push(d);
        }
        labels.push(row);
        dual_arg.push(drow);
    }
    Ok(RegimeTable {
        eps,
        labels,
        dual_arg,
        counts,
    })
}

/// Per-regime violations of the formal pointwise conditions, using nodal
/// values of `q` (through the lumped mass) and `ξ`.
pub fn regime_violations(table: &RegimeTable, adj: &AdjointTriple, cfg: &ProblemConfig) -> Vec<RegimeStats> {
    let h = cfg.mesh.h();
    let mut max = [0.0f64; 6];
    let mut sum = [0.0f64; 6];
    for (row_idx, row) in table.labels.iter().enumerate() {
        let k = row_idx + 1;
        for (i, r) in row.iter().enumerate() {
            let q = adj.q[k][i] / h;
            let xi = adj.xi[k][i];
            let v = match r {
                Regime::SlipPos | Regime::SlipNeg => q.abs(),
                Regime::StickBoundaryPos => (-q).max(0.0).max((-xi).max(0.0)),
                Regime::StickBoundaryNeg => q.max(0.0).max(xi.max(0.0)),
                Regime::StickInterior => xi.abs(),
                Regime::Unclassified => 0.0,
            };
            let j = r.index();
            max[j] = max[j].max(v);
            sum[j] += v;
        }
    }
    Regime::ALL
        .iter()
        .map(|&r| {
            let c = table.count(r);
            RegimeStats {
                regime: r,
                count: c,
                max_violation: max[r.index()],
                mean_violation: if c > 0 { sum[r.index()] / c as f64 } else { 0.0 },
            }
        })
        .collect()
}

/// Share of `‖ξ‖_{L²(I,H)}` carried by strict-stick nodes; 0 when there is none.
pub fn check_cone_c(adj: &AdjointTriple, regimes: &RegimeTable) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for (row_idx, row) in regimes.labels.iter().enumerate() {
        let xi = &adj.xi[row_idx + 1];
        for (i, r) in row.iter().enumerate() {
            let m = xi[i] * xi[i];
            total += m;
            if *r == Regime::StickInterior {
                inside += m;
            }
        }
    }
    // τ and h cancel in the ratio
    if total == 0.0 || inside == 0.0 {
        0.0
    } else {
        (inside / total).sqrt()
    }
}

/// Evaluates the non-smooth optimality system on computed data.
pub fn check_nonsmooth_kkt(
    traj: &Trajectory,
    g: &[Vec<f64>],
    adj: &AdjointTriple,
    cost: &CostConfig,
    cfg: &ProblemConfig,
) -> Result<KktReport> {
    cfg.check_sequence("check_nonsmooth_kkt: z", &traj.z)?;
    cfg.check_sequence("check_nonsmooth_kkt: w", &traj.w)?;
    cfg.check_sequence("check_nonsmooth_kkt: g", g)?;
    cfg.check_sequence("check_nonsmooth_kkt: u", &adj.u)?;
    cfg.check_sequence("check_nonsmooth_kkt: xi", &adj.xi)?;
    cfg.check_sequence("check_nonsmooth_kkt: q", &adj.q)?;
    let n_t = cfg.n_t();
    let tau = cfg.grid.tau();
    let h = cfg.mesh.h();
    let rho = cfg.rho;

    // state inclusion: graph distance of (w, f) to gph ∂|·| plus force balance
    let mut r_state = 0.0f64;
    for k in 1..=n_t {
        let f: Vec<f64> = match &traj.dual {
            Some(d) => d[k].clone(),
            None => traj.w[k].iter().map(|w| rho.deriv(*w)).collect(),
        };
        let kw = cfg.mesh.apply_k(&traj.w[k]);
        let kz = cfg.mesh.apply_k(&traj.z[k]);
        let load = cfg.mesh.apply_m(&g[k]);
        for i in 0..cfg.n() {
            let (w, fi) = (traj.w[k][i], f[i]);
            let range = (fi.abs() - 1.0).max(0.0);
            let graph = if w == 0.0 {
                range
            } else {
                w.abs().min((fi - w.signum()).abs())
            };
            let force = (cfg.sigma * kw[i] + h * fi + kz[i] - load[i]).abs();
            r_state = r_state.max(range).max(graph).max(force);
        }
    }

    // integrated adjoint identity, accumulated backward from T
    let mut r_adjoint = 0.0f64;
    let mut acc = cost.j2_load(cfg, &traj.z[n_t]);
    for k in (0..=n_t).rev() {
        if k < n_t {
            let j1 = cost.j1_load(cfg, &traj.z[k + 1], k + 1);
            let kx = cfg.mesh.apply_k(&adj.xi[k + 1]);
            for i in 0..cfg.n() {
                acc[i] += tau * (j1[i] - kx[i]);
            }
        }
        let diff: Vec<f64> = adj.u[k].iter().zip(&acc).map(|(a, b)| a - b).collect();
        r_adjoint = r_adjoint.max(cfg.mesh.norm_vstar(&diff)?);
    }

    let r_gradient = h1_norm(cfg, &axpy(&riesz_time(&adj.xi, cfg)?, 1.0, g));

    let mut r_comp = 0.0;
    let mut max_weighted_xi = 0.0f64;
    let mut sign_u_xi = 0.0f64;
    let mut sign_q_xi = 0.0f64;
    let mut min_margin = f64::INFINITY;
    let mut identity = 0.0f64;
    for k in 1..=n_t {
        let w = &traj.w[k];
        let xi = &adj.xi[k];
        r_comp += tau * adj.q[k].iter().zip(w).map(|(q, w)| (q * w).abs()).sum::<f64>();
        let weighted: f64 = w.iter().zip(xi).map(|(w, x)| h * rho.second(*w) * x * x).sum();
        max_weighted_xi = max_weighted_xi.max(weighted.sqrt());
        let energy = cfg.sigma * dot(xi, &cfg.mesh.apply_k(xi));
        let margin = dot(adj.u_paired(k), xi) - energy;
        min_margin = min_margin.min(margin);
        sign_u_xi = sign_u_xi.max(-margin);
        sign_q_xi = sign_q_xi.max(-dot(&adj.q[k], xi));
        identity = identity.max((margin - weighted).abs());
    }
    if n_t == 0 {
        min_margin = 0.0;
    }
    let comp_bound = cfg.grid.t_final() * (2.0 * rho.rho()).sqrt() * max_weighted_xi;

    let table = classify_regimes(traj, g, cfg, DEFAULT_REGIME_EPS)?;
    let regime_stats = regime_violations(&table, adj, cfg);
    Ok(KktReport {
        r_state,
        r_adjoint,
        r_gradient,
        r_comp,
        comp_bound,
        sign_u_xi,
        sign_q_xi,
        min_u_xi_margin: min_margin,
        sign_identity_residual: identity,
        regime_counts: Regime::ALL.iter().map(|r| (*r, table.count(*r))).collect(),
        regime_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::solve_adjoint;
    use crate::presets::{control_sequence, Preset};
    use crate::state::{solve_nonsmooth, solve_regularized};

    fn cfg() -> ProblemConfig {
        ProblemConfig::new(1.0, 16, 1.0, 16, 1e-3).unwrap()
    }

    #[test]
    fn zero_instance_is_clean() {
        let c = cfg();
        let g = c.zero_sequence();
        let traj = solve_regularized(&g, &c).unwrap();
        let cost = CostConfig::zero(&c, 1.0, 1.0).unwrap();
        let adj = solve_adjoint(&traj, &cost, &c).unwrap();
        let rep = check_nonsmooth_kkt(&traj, &g, &adj, &cost, &c).unwrap();
        for (name, v) in rep.fields() {
            assert_eq!(v, 0.0, "{name}");
        }
        let table = classify_regimes(&traj, &g, &c, 0.05).unwrap();
        assert_eq!(table.count(Regime::StickInterior), table.total());
        assert!(table.dual_arg.iter().flatten().all(|d| *d == 0.0));
        assert_eq!(check_cone_c(&adj, &table), 0.0);
    }

    #[test]
    fn pure_stick_instance() {
        let c = cfg();
        let g = control_sequence(&c, Preset::Sine, 0.9);
        let traj = solve_nonsmooth(&c.loads(&g), &c).unwrap();
        let table = classify_regimes(&traj, &g, &c, 0.05).unwrap();
        assert_eq!(table.count(Regime::StickInterior), c.n() * c.n_t());
        assert_eq!(table.count(Regime::Unclassified), 0);
    }

    #[test]
    fn labels_partition_all_nodes() {
        let c = cfg();
        let g = control_sequence(&c, Preset::Sine, 3.0);
        let traj = solve_nonsmooth(&c.loads(&g), &c).unwrap();
        let table = classify_regimes(&traj, &g, &c, 0.05).unwrap();
        assert_eq!(table.total(), c.n() * c.n_t());
        assert!(table.count(Regime::SlipPos) > 0);
        assert_eq!(table.count(Regime::Unclassified), 0);
    }

    #[test]
    fn sign_identity_holds() {
        let c = cfg();
        let g = control_sequence(&c, Preset::Sine, 3.0);
        let traj = solve_regularized(&c.loads(&g), &c).unwrap();
        let cost = CostConfig::new(control_sequence(&c, Preset::Pulse, 1.0), c.zeros(), 1.0, 1.0).unwrap();
        let adj = solve_adjoint(&traj, &cost, &c).unwrap();
        let rep = check_nonsmooth_kkt(&traj, &g, &adj, &cost, &c).unwrap();
        assert!(rep.sign_identity_residual < 1e-10, "{}", rep.sign_identity_residual);
        assert!(rep.min_u_xi_margin >= -1e-10);
        assert!(rep.sign_q_xi <= 1e-10);
        assert!(rep.r_adjoint < 1e-10);
        assert!(rep.r_comp <= rep.comp_bound * (1.0 + 1e-12));
    }

    #[test]
    fn cone_c_of_zero_adjoint() {
        let c = cfg();
        let g = control_sequence(&c, Preset::Sine, 3.0);
        let traj = solve_regularized(&c.loads(&g), &c).unwrap();
        let adj = AdjointTriple {
            u: c.zero_sequence(),
            xi: c.zero_sequence(),
            q: c.zero_sequence(),
        };
        let table = classify_regimes(&traj, &g, &c, 0.05).unwrap();
        assert_eq!(check_cone_c(&adj, &table), 0.0);
    }
}
