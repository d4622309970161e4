//! Gaussian approximations of the jump process: a single Euler-Maruyama step
//! of the chemical Langevin equation, and the linear noise approximation
//! integrated numerically.

use nalgebra::DMatrix;

use crate::error::{usage, Error, Result};
use crate::linalg::{cholesky_in_place, mvn_logpdf_chol};
use crate::network::{RateConstants, ReactionNetwork, State};
use crate::observation::{ObservationModel, EXACT_MATCH_TOL};

/// A multivariate normal with dense row-major covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianApprox {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl GaussianApprox {
    /// Symmetrises `cov` and clamps negative eigenvalues (round-off) to zero.
    pub fn new(mean: Vec<f64>, mut cov: Vec<f64>) -> Self {
        let p = mean.len();
        debug_assert_eq!(cov.len(), p * p);
        sanitize_cov(&mut cov, p);
        Self { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log-density at `y`. A singular covariance is treated as a point mass
    /// at the mean: 0 when `y` matches it, `-inf` otherwise.
    pub fn log_density(&self, y: &[f64]) -> f64 {
        let p = self.dim();
        let mut l = self.cov.clone();
        if cholesky_in_place(&mut l, p) {
            let mut scratch = vec![0.0; p];
            mvn_logpdf_chol(y, &self.mean, &l, &mut scratch)
        } else if y.iter().zip(&self.mean).all(|(a, b)| (a - b).abs() <= EXACT_MATCH_TOL) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn density(&self, y: &[f64]) -> f64 {
        self.log_density(y).exp()
    }

    /// Largest asymmetry and smallest eigenvalue of the covariance.
    pub fn covariance_diagnostics(&self) -> (f64, f64) {
        let p = self.dim();
        let m = DMatrix::from_row_slice(p, p, &self.cov);
        let asym = (0..p)
            .flat_map(|a| (0..p).map(move |b| (a, b)))
            .map(|(a, b)| (m[(a, b)] - m[(b, a)]).abs())
            .fold(0.0, f64::max);
        let min_eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        (asym, min_eig)
    }
}

fn sanitize_cov(cov: &mut [f64], p: usize) {
    for a in 0..p {
        for b in 0..a {
            let avg = 0.5 * (cov[a * p + b] + cov[b * p + a]);
            cov[a * p + b] = avg;
            cov[b * p + a] = avg;
        }
    }
    if p == 1 {
        cov[0] = cov[0].max(0.0);
        return;
    }
    let m = DMatrix::from_row_slice(p, p, cov);
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&e| e >= 0.0) {
        return;
    }
    let clamped = eig.eigenvalues.map(|e| e.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    for a in 0..p {
        for b in 0..p {
            cov[a * p + b] = 0.5 * (rebuilt[(a, b)] + rebuilt[(b, a)]);
        }
    }
}

/// Predictive law of `Y` after `dt` under one Euler-Maruyama step of the CLE:
/// mean `P'(x + S h dt)`, covariance `P'S H S'P dt + Sigma`.
pub fn cle_predictive(
    net: &ReactionNetwork,
    c: &RateConstants,
    x: &State,
    dt: f64,
    obs: &ObservationModel,
) -> Result<GaussianApprox> {
    if !(dt > 0.0) {
        return usage("cle_predictive needs dt > 0");
    }
    let ps = obs.project_stoichiometry(net);
    let mut h = vec![0.0; net.n_reactions()];
    net.hazards_into(&x.counts, c.as_slice(), &mut h);
    let (mean, cov) = cle_moments(&ps, obs, &x.counts, &h, dt);
    Ok(GaussianApprox::new(mean, cov))
}

/// Raw CLE predictive moments given precomputed `P'S` (p×v) and hazards.
pub(crate) fn cle_moments(
    ps: &[f64],
    obs: &ObservationModel,
    x: &[i64],
    h: &[f64],
    dt: f64,
) -> (Vec<f64>, Vec<f64>) {
    let p = obs.dim();
    let v = h.len();
    let mut mean = vec![0.0; p];
    obs.project_counts(x, &mut mean);
    for a in 0..p {
        mean[a] += (0..v).map(|i| ps[a * v + i] * h[i]).sum::<f64>() * dt;
    }
    let mut cov = obs.sigma().to_vec();
    for a in 0..p {
        for b in 0..p {
            cov[a * p + b] += (0..v).map(|i| ps[a * v + i] * h[i] * ps[b * v + i]).sum::<f64>() * dt;
        }
    }
    (mean, cov)
}

/// Endpoint of the LNA system: deterministic mean `z`, fundamental matrix `G`,
/// and the noise covariance in both parameterisations (`Psi` with
/// `V = G Psi G'`). Matrices are u×u row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LnaSolution {
    pub z: Vec<f64>,
    pub g: Vec<f64>,
    pub psi: Vec<f64>,
    pub v: Vec<f64>,
}

struct LnaRhs<'a> {
    net: &'a ReactionNetwork,
    c: &'a [f64],
    u: usize,
    h: Vec<f64>,
    jac: Vec<f64>,
    drift_jac: Vec<f64>,
}

impl LnaRhs<'_> {
    /// State layout: `[z (u) | G (u*u) | V (u*u)]`.
    fn eval(&mut self, y: &[f64], dy: &mut [f64]) {
        let u = self.u;
        let v = self.net.n_reactions();
        let (z, rest) = y.split_at(u);
        let (g, vm) = rest.split_at(u * u);
        self.net.real_hazards_into(z, self.c, &mut self.h);
        self.net.real_hazard_jacobian_into(z, self.c, &mut self.jac);
        // drift Jacobian J = S F (u×u)
        for a in 0..u {
            for b in 0..u {
                self.drift_jac[a * u + b] = (0..v)
                    .map(|i| self.net.stoich(a, i) as f64 * self.jac[i * u + b])
                    .sum();
            }
        }
        let (dz, drest) = dy.split_at_mut(u);
        let (dg, dv) = drest.split_at_mut(u * u);
        for a in 0..u {
            dz[a] = (0..v).map(|i| self.net.stoich(a, i) as f64 * self.h[i]).sum();
        }
        let j = &self.drift_jac;
        for a in 0..u {
            for b in 0..u {
                dg[a * u + b] = (0..u).map(|k| j[a * u + k] * g[k * u + b]).sum();
                let jv: f64 = (0..u).map(|k| j[a * u + k] * vm[k * u + b]).sum();
                let vj: f64 = (0..u).map(|k| vm[a * u + k] * j[b * u + k]).sum();
                let noise: f64 = (0..v)
                    .map(|i| self.net.stoich(a, i) as f64 * self.h[i] * self.net.stoich(b, i) as f64)
                    .sum();
                dv[a * u + b] = jv + vj + noise;
            }
        }
    }
}

fn rk4(rhs: &mut LnaRhs<'_>, y0: &[f64], dt: f64, steps: usize) -> Vec<f64> {
    let n = y0.len();
    let h = dt / steps as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        rhs.eval(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs.eval(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs.eval(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs.eval(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

const LNA_BASE_STEPS: usize = 200;
const LNA_REL_TOL: f64 = 1e-8;
const LNA_MAX_STEPS: usize = LNA_BASE_STEPS << 12;

fn blocks_agree(a: &[f64], b: &[f64], u: usize) -> bool {
    let ranges = [0..u, u..u + u * u, u + u * u..a.len()];
    ranges.into_iter().all(|r| {
        let scale = b[r.clone()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a[r.clone()]
            .iter()
            .zip(&b[r])
            .all(|(x, y)| (x - y).abs() <= LNA_REL_TOL * scale.max(f64::MIN_POSITIVE))
    })
}

/// Integrates the LNA ODEs from `(z0, G = I, V0)` over `dt`.
///
/// Fixed-step RK4 starting at `dt/200` steps, halving the step until two
/// successive solutions agree to 1e-8 relative.
pub fn lna_integrate(
    net: &ReactionNetwork,
    c: &RateConstants,
    z0: &[f64],
    v0: &[f64],
    dt: f64,
) -> Result<LnaSolution> {
    let u = net.n_species();
    if z0.len() != u || v0.len() != u * u {
        return usage("LNA initial conditions do not match the network dimension");
    }
    if !(dt >= 0.0) {
        return usage("LNA horizon must be non-negative");
    }
    if z0.iter().any(|&z| !(z >= 0.0)) {
        return usage("LNA initial mean must be non-negative");
    }
    let mut y0 = Vec::with_capacity(u + 2 * u * u);
    y0.extend_from_slice(z0);
    for a in 0..u {
        for b in 0..u {
            y0.push(if a == b { 1.0 } else { 0.0 });
        }
    }
    y0.extend_from_slice(v0);
    let y = if dt == 0.0 {
        y0
    } else {
        let mut rhs = LnaRhs {
            net,
            c: c.as_slice(),
            u,
            h: vec![0.0; net.n_reactions()],
            jac: vec![0.0; net.n_reactions() * u],
            drift_jac: vec![0.0; u * u],
        };
        let mut steps = LNA_BASE_STEPS;
        let mut coarse = rk4(&mut rhs, &y0, dt, steps);
        loop {
            steps *= 2;
            let fine = rk4(&mut rhs, &y0, dt, steps);
            if fine.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("LNA integration blew up over dt = {dt}")));
            }
            if blocks_agree(&coarse, &fine, u) {
                break fine;
            }
            if steps >= LNA_MAX_STEPS {
                return Err(Error::Numerical(format!(
                    "LNA integration did not converge over dt = {dt}"
                )));
            }
            coarse = fine;
        }
    };
    let z = y[..u].to_vec();
    let g = y[u..u + u * u].to_vec();
    let mut v = y[u + u * u..].to_vec();
    sanitize_cov(&mut v, u);
    let gm = DMatrix::from_row_slice(u, u, &g);
    let g_inv = gm
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("LNA fundamental matrix is singular".into()))?;
    let psi_m = &g_inv * DMatrix::from_row_slice(u, u, &v) * g_inv.transpose();
    let mut psi: Vec<f64> = (0..u).flat_map(|a| (0..u).map(move |b| (a, b))).map(|(a, b)| psi_m[(a, b)]).collect();
    sanitize_cov(&mut psi, u);
    Ok(LnaSolution { z, g, psi, v })
}

/// LNA predictive law of `Y` after `dt`, restarting the deterministic path at
/// the current state (`z = x`, `V0 = 0`): mean `P'z`, covariance `P'VP + Sigma`.
pub fn lna_predictive(
    net: &ReactionNetwork,
    c: &RateConstants,
    x: &State,
    dt: f64,
    obs: &ObservationModel,
) -> Result<GaussianApprox> {
    if !(dt > 0.0) {
        return usage("lna_predictive needs dt > 0");
    }
    let u = net.n_species();
    let z0: Vec<f64> = x.counts.iter().map(|&n| n as f64).collect();
    let sol = lna_integrate(net, c, &z0, &vec![0.0; u * u], dt)?;
    let p = obs.dim();
    let mut mean = vec![0.0; p];
    obs.project(&sol.z, &mut mean);
    let pm = obs.p_matrix();
    let mut cov = obs.sigma().to_vec();
    for a in 0..p {
        for b in 0..p {
            let mut acc = 0.0;
            for j in 0..u {
                for k in 0..u {
                    acc += pm[j * p + a] * sol.v[j * u + k] * pm[k * p + b];
                }
            }
            cov[a * p + b] += acc;
        }
    }
    Ok(GaussianApprox::new(mean, cov))
}

/// Closed-form LNA moments of the linear birth-death process started at `x0`.
pub fn birth_death_lna_moments(x0: f64, c1: f64, c2: f64, t: f64) -> (f64, f64) {
    let r = c1 - c2;
    let e = (r * t).exp();
    let var = if r.abs() < 1e-14 {
        x0 * (c1 + c2) * t
    } else {
        x0 * (c1 + c2) / r * e * (e - 1.0)
    };
    (x0 * e, var)
}
