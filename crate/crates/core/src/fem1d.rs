//! P1 finite elements on the unit interval with homogeneous Dirichlet
//! conditions.
//!
//! Unknowns are interior nodal values. A *nodal* vector represents an element
//! of V = H¹₀(0,1) (or H); a *load* vector represents an element of V* and
//! pairs with nodal vectors through the plain dot product. The stiffness
//! matrix `K` is the Riesz map V → V*, so `‖f‖_V* = sqrt(fᵀK⁻¹f)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        debug_assert_eq!(off.len() + 1, diag.len().max(1));
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = self * x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_into(x, &mut y);
        y
    }

    /// `self * s + diag(d)`.
    pub fn scaled_plus_diag(&self, s: f64, d: &[f64]) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().zip(d).map(|(a, b)| s * a + b).collect(),
            off: self.off.iter().map(|a| s * a).collect(),
        }
    }

    /// `self * s + c * I`.
    pub fn scaled_shifted(&self, s: f64, c: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|a| s * a + c).collect(),
            off: self.off.iter().map(|a| s * a).collect(),
        }
    }

    /// Principal submatrix on sorted indices `idx`.
    pub fn principal(&self, idx: &[usize]) -> SymTridiag {
        let diag = idx.iter().map(|&i| self.diag[i]).collect();
        let off = idx
            .windows(2)
            .map(|p| if p[1] == p[0] + 1 { self.off[p[0]] } else { 0.0 })
            .collect();
        SymTridiag { diag, off }
    }

    /// LDLᵀ factorization. Fails on a non-positive pivot.
    pub fn factor(&self) -> Result<TridiagFactor> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut piv = self.diag[i];
            if i > 0 {
                piv -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(piv > 0.0) || !piv.is_finite() {
                return Err(Error::Domain(format!(
                    "tridiagonal matrix is not positive definite (pivot {piv:e} at row {i})"
                )));
            }
            d[i] = piv;
            if i + 1 < n {
                l[i] = self.off[i] / piv;
            }
        }
        Ok(TridiagFactor { d, l })
    }

    /// One-shot solve (Thomas algorithm via LDLᵀ).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("tridiagonal solve", self.dim(), rhs.len())?;
        let mut x = rhs.to_vec();
        self.factor()?.solve_in_place(&mut x);
        Ok(x)
    }
}

/// LDLᵀ factors of an SPD tridiagonal matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagFactor {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }
}

/// Uniform mesh of (0,1) with `n_el` elements and `n_el - 1` interior nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    n_el: usize,
    h: f64,
    stiffness: SymTridiag,
    mass: SymTridiag,
}

impl Mesh {
    pub fn new(n_el: usize) -> Result<Self> {
        if n_el < 2 {
            return Err(Error::Config(format!(
                "n_el must be at least 2 (one interior node), got {n_el}"
            )));
        }
        let h = 1.0 / n_el as f64;
        let n = n_el - 1;
        let stiffness = SymTridiag::new(vec![2.0 / h; n], vec![-1.0 / h; n - 1]);
        let mass = SymTridiag::new(vec![4.0 * h / 6.0; n], vec![h / 6.0; n - 1]);
        Ok(Self {
            n_el,
            h,
            stiffness,
            mass,
        })
    }

    pub fn n_el(&self) -> usize {
        self.n_el
    }

    /// Number of interior nodes.
    pub fn n(&self) -> usize {
        self.n_el - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of interior node `i` (0-based).
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.x(i)).collect()
    }

    /// Discrete −Δ.
    pub fn stiffness(&self) -> &SymTridiag {
        &self.stiffness
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    /// Diagonal of the lumped mass matrix (every entry equals `h`).
    pub fn lumped(&self) -> f64 {
        self.h
    }

    pub fn apply_k(&self, u: &[f64]) -> Vec<f64> {
        self.stiffness.mul(u)
    }

    pub fn apply_m(&self, u: &[f64]) -> Vec<f64> {
        self.mass.mul(u)
    }

    /// `-Δu` as a nodal function, `M_L⁻¹ K u`.
    pub fn neg_laplacian_nodal(&self, u: &[f64]) -> Vec<f64> {
        let h = self.h;
        self.stiffness.mul(u).into_iter().map(|v| v / h).collect()
    }

    /// Load vector → nodal function through the lumped mass.
    pub fn load_to_nodal(&self, f: &[f64]) -> Vec<f64> {
        f.iter().map(|v| v / self.h).collect()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        check_len("mesh field", self.n(), u.len())
    }

    pub fn norm_v(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(dot(u, &self.stiffness.mul(u)).max(0.0).sqrt())
    }

    /// L² norm with the consistent mass matrix.
    pub fn norm_h(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(dot(u, &self.mass.mul(u)).max(0.0).sqrt())
    }

    /// L² norm with the lumped mass matrix.
    pub fn norm_h_lumped(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok((self.h * dot(u, u)).sqrt())
    }

    /// Dual norm of a load vector, `sqrt(fᵀK⁻¹f)`.
    pub fn norm_vstar(&self, f: &[f64]) -> Result<f64> {
        let u = self.poisson_solve(f)?;
        Ok(dot(f, &u).max(0.0).sqrt())
    }

    /// Solves `K u = f`.
    pub fn poisson_solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        self.stiffness.solve(f)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
