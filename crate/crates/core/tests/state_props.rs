mod common;

use common::random_control;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viscoflow_core::presets::{control_sequence, Preset};
use viscoflow_core::{residual_inclusion, solve_nonsmooth, solve_regularized, t_rho_apply, ProblemConfig, SmoothingParam};

#[test]
fn single_node_rate_matches_bisection() {
    // n_el = 2: one interior node, K = [4], M = [1/3], M_L = [1/2]
    for (sigma, rho, c) in [(1.0, 1e-3, 0.9), (0.5, 1e-2, -0.6), (2.0, 1e-1, 3.0)] {
        let cfg = ProblemConfig::new(sigma, 2, 1.0, 1, rho).unwrap();
        let load = c / 3.0;
        let w = t_rho_apply(&[load], &cfg).unwrap()[0];
        let p = SmoothingParam::new(rho).unwrap();
        let f = |x: f64| 4.0 * sigma * x + 0.5 * p.deriv(x) - load;
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((w - 0.5 * (lo + hi)).abs() <= 1e-12, "sigma={sigma} rho={rho} c={c}: {w} vs {lo}");
    }
}

#[test]
fn lipschitz_stability_of_smoothed_solution_operator() {
    // ‖δw_k‖_V ≤ ‖δG_k‖_*/σ + e^{t_k/σ}/σ² Σ_{j≤k} τ‖δG_j‖_*
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sigma in [0.3, 1.0, 4.0] {
        let cfg = ProblemConfig::new(sigma, 24, 1.0, 20, 1e-2).unwrap();
        for _ in 0..10 {
            let g1 = random_control(&cfg, &mut rng, 4.0);
            let g2 = random_control(&cfg, &mut rng, 4.0);
            let (l1, l2) = (cfg.loads(&g1), cfg.loads(&g2));
            let (t1, t2) = (solve_regularized(&l1, &cfg).unwrap(), solve_regularized(&l2, &cfg).unwrap());
            let tau = cfg.grid.tau();
            let mut integral = 0.0;
            for k in 1..=cfg.n_t() {
                let dg: Vec<f64> = l1[k].iter().zip(&l2[k]).map(|(a, b)| a - b).collect();
                let dgn = cfg.mesh.norm_vstar(&dg).unwrap();
                integral += tau * dgn;
                let dw: Vec<f64> = t1.w[k].iter().zip(&t2.w[k]).map(|(a, b)| a - b).collect();
                let lhs = cfg.mesh.norm_v(&dw).unwrap();
                let rhs = dgn / sigma + (cfg.grid.t(k) / sigma).exp() / sigma.powi(2) * integral;
                assert!(lhs <= rhs * (1.0 + 1e-9), "sigma={sigma} k={k}: {lhs} > {rhs}");
            }
        }
    }
}

#[test]
fn rho_cauchy_estimate() {
    // (σ/2)‖w^n − w^m‖²_{L²(I,V)} + ½ max_k ‖z^n_k − z^m_k‖²_V ≤ 2T|Ω||ρ_n − ρ_m|
    let base = ProblemConfig::new(1.0, 32, 1.0, 64, 1e-1).unwrap();
    let loads = base.loads(&control_sequence(&base, Preset::Sine, 1.5));
    let rhos = [1e-1, 3e-2, 1e-2, 1e-3];
    let trajs: Vec<_> = rhos
        .iter()
        .map(|r| solve_regularized(&loads, &base.with_rho(*r).unwrap()).unwrap())
        .collect();
    let tau = base.grid.tau();
    for i in 0..rhos.len() {
        for j in i + 1..rhos.len() {
            let mut l2 = 0.0;
            let mut zmax: f64 = 0.0;
            for k in 1..=base.n_t() {
                let dw: Vec<f64> = trajs[i].w[k].iter().zip(&trajs[j].w[k]).map(|(a, b)| a - b).collect();
                let dz: Vec<f64> = trajs[i].z[k].iter().zip(&trajs[j].z[k]).map(|(a, b)| a - b).collect();
                l2 += tau * base.mesh.norm_v(&dw).unwrap().powi(2);
                zmax = zmax.max(base.mesh.norm_v(&dz).unwrap());
            }
            let lhs = 0.5 * base.sigma * l2 + 0.5 * zmax * zmax;
            let rhs = 2.0 * base.grid.t_final() * (rhos[i] - rhos[j]).abs();
            assert!(lhs <= rhs, "rho {} vs {}: {lhs} > {rhs}", rhos[i], rhos[j]);
        }
    }
}

#[test]
fn trajectory_invariants_hold() {
    let cfg = ProblemConfig::new(1.0, 16, 1.0, 32, 1e-2).unwrap();
    let loads = cfg.loads(&control_sequence(&cfg, Preset::Pulse, 3.0));
    for traj in [solve_regularized(&loads, &cfg).unwrap(), solve_nonsmooth(&loads, &cfg).unwrap()] {
        assert!(traj.z[0].iter().all(|v| *v == 0.0));
        for k in 1..=cfg.n_t() {
            for i in 0..cfg.n() {
                let expect = traj.z[k - 1][i] + cfg.grid.tau() * traj.w[k][i];
                assert!((traj.z[k][i] - expect).abs() <= 1e-15 * (1.0 + expect.abs()));
            }
        }
        if let Some(d) = &traj.dual {
            assert!(d.iter().flatten().all(|f| f.abs() <= 1.0));
        }
    }
}

#[test]
fn nonsmooth_output_passes_inclusion_check() {
    let cfg = ProblemConfig::new(1.0, 32, 1.0, 32, 1e-2).unwrap();
    let loads = cfg.loads(&control_sequence(&cfg, Preset::Sine, 2.5));
    let traj = solve_nonsmooth(&loads, &cfg).unwrap();
    let rep = residual_inclusion(&traj, &loads, &cfg).unwrap();
    assert!(rep.max() <= 10.0 * cfg.solver.tol_admm, "{rep:?}");
    assert_eq!(rep.steps.len(), cfg.n_t());
    assert!(traj.w.iter().flatten().any(|v| *v != 0.0));
}

#[test]
fn zero_trajectory_has_zero_residuals() {
    let cfg = ProblemConfig::new(1.0, 8, 1.0, 4, 1e-2).unwrap();
    let loads = cfg.zero_sequence();
    let traj = solve_nonsmooth(&loads, &cfg).unwrap();
    let rep = residual_inclusion(&traj, &loads, &cfg).unwrap();
    assert_eq!(rep.max(), 0.0);
}

#[test]
fn rough_loads_converge_at_tiny_rho() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for rho in [1e-6, 1e-8] {
        let cfg = ProblemConfig::new(0.3, 24, 1.0, 20, rho).unwrap();
        let g = random_control(&cfg, &mut rng, 4.0);
        let loads = cfg.loads(&g);
        let smooth = solve_regularized(&loads, &cfg).unwrap();
        let rough = solve_nonsmooth(&loads, &cfg).unwrap();
        for k in 1..=cfg.n_t() {
            let d: Vec<f64> = smooth.w[k].iter().zip(&rough.w[k]).map(|(a, b)| a - b).collect();
            assert!(cfg.mesh.norm_v(&d).unwrap() < 1e-3, "rho={rho} k={k}");
        }
    }
}

#[test]
fn solves_are_bit_identical() {
    let cfg = ProblemConfig::new(0.7, 20, 1.0, 24, 1e-3).unwrap();
    let loads = cfg.loads(&control_sequence(&cfg, Preset::Sine, 2.0));
    assert_eq!(solve_regularized(&loads, &cfg).unwrap(), solve_regularized(&loads, &cfg).unwrap());
    assert_eq!(solve_nonsmooth(&loads, &cfg).unwrap(), solve_nonsmooth(&loads, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn t_rho_is_one_over_sigma_lipschitz(
        sigma in 0.05f64..20.0,
        log_rho in -4.0f64..0.0,
        seed in any::<u64>(),
    ) {
        let cfg = ProblemConfig::new(sigma, 12, 1.0, 1, 10f64.powf(log_rho)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_control(&cfg, &mut rng, 3.0 * sigma.max(1.0));
        let v1 = cfg.mesh.apply_m(&g[1]);
        let v2 = cfg.mesh.apply_m(&g[0].iter().zip(&g[1]).map(|(_, b)| 0.3 * b - 0.5).collect::<Vec<_>>());
        let w1 = t_rho_apply(&v1, &cfg).unwrap();
        let w2 = t_rho_apply(&v2, &cfg).unwrap();
        let dw: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a - b).collect();
        let dv: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a - b).collect();
        let lhs = cfg.mesh.norm_v(&dw).unwrap();
        let rhs = cfg.mesh.norm_vstar(&dv).unwrap() / sigma;
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-14);
    }
}
