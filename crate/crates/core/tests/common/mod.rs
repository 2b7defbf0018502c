#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use viscoflow_core::ProblemConfig;

/// Nodal control with `g[0] = 0` and entries uniform in `[-amp, amp]`.
pub fn random_control(cfg: &ProblemConfig, rng: &mut ChaCha8Rng, amp: f64) -> Vec<Vec<f64>> {
    let mut g: Vec<Vec<f64>> = (0..=cfg.n_t())
        .map(|_| (0..cfg.n()).map(|_| rng.gen_range(-amp..=amp)).collect())
        .collect();
    g[0].iter_mut().for_each(|v| *v = 0.0);
    g
}

pub fn perturb(g: &[Vec<f64>], eps: f64, dir: &[Vec<f64>]) -> Vec<Vec<f64>> {
    g.iter()
        .zip(dir)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + eps * y).collect())
        .collect()
}
