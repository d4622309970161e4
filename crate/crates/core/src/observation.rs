//! Linear-Gaussian (or exact) observation of the latent counts:
//! `Y = P' X + e`, `e ~ N(0, Sigma)`.

use crate::error::{usage, Result};
use crate::linalg::{cholesky_in_place, mvn_logpdf_chol};
use crate::network::{ReactionNetwork, State};

/// Tolerance for comparing `P'x` with an exact observation.
pub const EXACT_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    u: usize,
    p: usize,
    /// u×p, row-major.
    p_mat: Vec<f64>,
    /// p×p, row-major; all zeros when `error_free`.
    sigma: Vec<f64>,
    sigma_chol: Vec<f64>,
    error_free: bool,
}

impl ObservationModel {
    /// Gaussian observation with a positive-definite noise covariance.
    pub fn gaussian(u: usize, p: usize, p_mat: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        Self::check_shapes(u, p, &p_mat)?;
        if sigma.len() != p * p {
            return usage(format!("Sigma must be {p}x{p}"));
        }
        for a in 0..p {
            for b in 0..a {
                if (sigma[a * p + b] - sigma[b * p + a]).abs() > 1e-12 * (1.0 + sigma[a * p + b].abs()) {
                    return usage("Sigma must be symmetric");
                }
            }
        }
        let mut chol = sigma.clone();
        if !cholesky_in_place(&mut chol, p) {
            return usage("Sigma is singular; use an error-free observation model instead");
        }
        Ok(Self {
            u,
            p,
            p_mat,
            sigma,
            sigma_chol: chol,
            error_free: false,
        })
    }

    /// Exact observation: `y = P'x`.
    pub fn error_free(u: usize, p: usize, p_mat: Vec<f64>) -> Result<Self> {
        Self::check_shapes(u, p, &p_mat)?;
        Ok(Self {
            u,
            p,
            p_mat,
            sigma: vec![0.0; p * p],
            sigma_chol: Vec::new(),
            error_free: true,
        })
    }

    /// `P = I_u` with isotropic noise variance `var` (error-free when `var == 0`).
    pub fn identity(u: usize, var: f64) -> Result<Self> {
        let mut p_mat = vec![0.0; u * u];
        for j in 0..u {
            p_mat[j * u + j] = 1.0;
        }
        if var == 0.0 {
            return Self::error_free(u, u, p_mat);
        }
        let mut sigma = vec![0.0; u * u];
        for j in 0..u {
            sigma[j * u + j] = var;
        }
        Self::gaussian(u, u, p_mat, sigma)
    }

    /// Observe the listed species exactly or with isotropic noise.
    pub fn select(u: usize, species: &[usize], var: f64) -> Result<Self> {
        let p = species.len();
        let mut p_mat = vec![0.0; u * p];
        for (a, &j) in species.iter().enumerate() {
            if j >= u {
                return usage(format!("observed species index {j} out of range"));
            }
            p_mat[j * p + a] = 1.0;
        }
        if var == 0.0 {
            return Self::error_free(u, p, p_mat);
        }
        let mut sigma = vec![0.0; p * p];
        for a in 0..p {
            sigma[a * p + a] = var;
        }
        Self::gaussian(u, p, p_mat, sigma)
    }

    fn check_shapes(u: usize, p: usize, p_mat: &[f64]) -> Result<()> {
        if u == 0 || p == 0 {
            return usage("observation dimensions must be positive");
        }
        if p_mat.len() != u * p {
            return usage(format!("P must be {u}x{p} (row-major), got {} entries", p_mat.len()));
        }
        Ok(())
    }

    pub fn n_species(&self) -> usize {
        self.u
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn is_error_free(&self) -> bool {
        self.error_free
    }

    pub fn p_matrix(&self) -> &[f64] {
        &self.p_mat
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `P'x` for an integer state.
    pub fn project_counts(&self, x: &[i64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = (0..self.u).map(|j| self.p_mat[j * self.p + a] * x[j] as f64).sum();
        }
    }

    /// `P'z` for a real vector.
    pub fn project(&self, z: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = (0..self.u).map(|j| self.p_mat[j * self.p + a] * z[j]).sum();
        }
    }

    /// `P'S` as a p×v row-major matrix.
    pub fn project_stoichiometry(&self, net: &ReactionNetwork) -> Vec<f64> {
        let v = net.n_reactions();
        let mut b = vec![0.0; self.p * v];
        for a in 0..self.p {
            for i in 0..v {
                b[a * v + i] = (0..self.u)
                    .map(|j| self.p_mat[j * self.p + a] * net.stoich(j, i) as f64)
                    .sum();
            }
        }
        b
    }

    /// Observation log-density with a caller-provided buffer of length `2p`.
    pub fn loglik_counts(&self, y: &[f64], x: &[i64], scratch: &mut [f64]) -> f64 {
        let (mean, rest) = scratch.split_at_mut(self.p);
        self.project_counts(x, mean);
        if self.error_free {
            let hit = mean.iter().zip(y).all(|(m, v)| (m - v).abs() <= EXACT_MATCH_TOL);
            return if hit { 0.0 } else { f64::NEG_INFINITY };
        }
        mvn_logpdf_chol(y, mean, &self.sigma_chol, rest)
    }

    pub fn check_observation(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.p {
            return usage(format!("observation has {} components, model expects {}", y.len(), self.p));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return usage("observation contains non-finite values");
        }
        Ok(())
    }
}

/// `log p(y | x)`: Gaussian log-density, or 0 / -inf for exact observations.
pub fn gaussian_loglik(y: &[f64], x: &State, obs: &ObservationModel) -> Result<f64> {
    obs.check_observation(y)?;
    if x.len() != obs.n_species() {
        return usage("state dimension does not match observation model");
    }
    let mut scratch = vec![0.0; 2 * obs.dim()];
    Ok(obs.loglik_counts(y, &x.counts, &mut scratch))
}
