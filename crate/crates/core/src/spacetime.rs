//! Discrete space-time norms and inner products.
//!
//! Sequences have `n_t + 1` entries indexed by time step. Time integrals use
//! the right-endpoint rule over steps `1..=n_t`, matching implicit Euler.

use crate::error::Result;
use crate::fem1d::dot;
use crate::state::ProblemConfig;

fn time_sum(cfg: &ProblemConfig, seq: &[Vec<f64>], f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let tau = cfg.grid.tau();
    let mut s = 0.0;
    for x in &seq[1..] {
        s += tau * f(x)?;
    }
    Ok(s)
}

/// `‖x‖_{L²(I,V)}` of nodal fields.
pub fn l2_v(cfg: &ProblemConfig, seq: &[Vec<f64>]) -> Result<f64> {
    Ok(time_sum(cfg, seq, |x| Ok(cfg.mesh.norm_v(x)?.powi(2)))?.sqrt())
}

/// `‖x‖_{L²(I,H)}` with the lumped mass.
pub fn l2_h_lumped(cfg: &ProblemConfig, seq: &[Vec<f64>]) -> Result<f64> {
    Ok(time_sum(cfg, seq, |x| Ok(cfg.mesh.norm_h_lumped(x)?.powi(2)))?.sqrt())
}

/// `‖f‖_{L²(I,V*)}` of load vectors.
pub fn l2_vstar(cfg: &ProblemConfig, seq: &[Vec<f64>]) -> Result<f64> {
    Ok(time_sum(cfg, seq, |x| Ok(cfg.mesh.norm_vstar(x)?.powi(2)))?.sqrt())
}

/// `‖f‖_{L¹(I,V*)}` of load vectors.
pub fn l1_vstar(cfg: &ProblemConfig, seq: &[Vec<f64>]) -> Result<f64> {
    time_sum(cfg, seq, |x| cfg.mesh.norm_vstar(x))
}

/// `max_k ‖x_k‖_V` over all entries.
pub fn max_v(cfg: &ProblemConfig, seq: &[Vec<f64>]) -> Result<f64> {
    seq.iter().try_fold(0.0f64, |m, x| Ok(m.max(cfg.mesh.norm_v(x)?)))
}

/// `max_k ‖f_k‖_V*` over all entries.
pub fn max_vstar(cfg: &ProblemConfig, seq: &[Vec<f64>]) -> Result<f64> {
    seq.iter().try_fold(0.0f64, |m, x| Ok(m.max(cfg.mesh.norm_vstar(x)?)))
}

/// `(a, b)_{L²(I,H)}` with the consistent mass.
pub fn l2_h_inner(cfg: &ProblemConfig, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let tau = cfg.grid.tau();
    (1..a.len()).map(|k| tau * dot(&a[k], &cfg.mesh.apply_m(&b[k]))).sum()
}

/// `(a, b)_{H¹(I,H)} = Σ τ [(a_k, b_k)_M + (δa_k, δb_k)_M / τ²]`.
pub fn h1_inner(cfg: &ProblemConfig, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let tau = cfg.grid.tau();
    let mut s = 0.0;
    for k in 1..a.len() {
        let mb = cfg.mesh.apply_m(&b[k]);
        s += tau * dot(&a[k], &mb);
        let da: Vec<f64> = a[k].iter().zip(&a[k - 1]).map(|(x, y)| x - y).collect();
        let db: Vec<f64> = b[k].iter().zip(&b[k - 1]).map(|(x, y)| x - y).collect();
        s += dot(&da, &cfg.mesh.apply_m(&db)) / tau;
    }
    s
}

pub fn h1_norm(cfg: &ProblemConfig, a: &[Vec<f64>]) -> f64 {
    h1_inner(cfg, a, a).max(0.0).sqrt()
}

/// `a − b` entrywise.
pub fn sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

/// `a + s·b` entrywise.
pub fn axpy(a: &[Vec<f64>], s: f64, b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + s * q).collect())
        .collect()
}

pub fn scale(a: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    a.iter().map(|x| x.iter().map(|v| s * v).collect()).collect()
}
