//! Lorenz-63 with an additive forcing on the z equation.

use crate::error::{invalid, Error, Result};
use crate::field::RealField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl LorenzParams {
    /// The chaotic textbook values.
    pub const CLASSICAL: Self = Self {
        sigma: 10.0,
        rho: 28.0,
        beta: 8.0 / 3.0,
    };

    /// Equilibrium with x = y > 0 for zero forcing (requires rho > 1).
    pub fn positive_fixed_point(&self) -> [f64; 3] {
        let r = (self.beta * (self.rho - 1.0)).max(0.0).sqrt();
        [r, r, self.rho - 1.0]
    }
}

fn rhs(p: &LorenzParams, s: [f64; 3], f: f64) -> [f64; 3] {
    [
        p.sigma * (s[1] - s[0]),
        s[0] * (p.rho - s[2]) - s[1],
        s[0] * s[1] - p.beta * s[2] - f,
    ]
}

fn axpy(s: [f64; 3], h: f64, k: [f64; 3]) -> [f64; 3] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

/// Full state at every point of the forcing grid; `forcing[i]` is f(i dt)
/// and the half-step value is the average of its neighbours.
pub fn lorenz63_trajectory(
    forcing: &[f64],
    params: &LorenzParams,
    x0: [f64; 3],
    dt: f64,
) -> Result<Vec<[f64; 3]>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("time step {dt} must be positive")));
    }
    if forcing.is_empty() {
        return Err(invalid("forcing series is empty"));
    }
    let mut s = x0;
    let mut out = Vec::with_capacity(forcing.len());
    out.push(s);
    for i in 0..forcing.len() - 1 {
        let (f0, f1) = (forcing[i], forcing[i + 1]);
        let fm = 0.5 * (f0 + f1);
        let k1 = rhs(params, s, f0);
        let k2 = rhs(params, axpy(s, dt / 2.0, k1), fm);
        let k3 = rhs(params, axpy(s, dt / 2.0, k2), fm);
        let k4 = rhs(params, axpy(s, dt, k3), f1);
        for c in 0..3 {
            s[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged(format!(
                "Lorenz state non-finite at step {}",
                i + 1
            )));
        }
        out.push(s);
    }
    Ok(out)
}

/// x-component response to each forcing sample of `forcing` (shape
/// `(B, T, 1)`), sampled on the same grid.
pub fn lorenz63_solve(
    forcing: &RealField,
    params: &LorenzParams,
    x0: [f64; 3],
    dt: f64,
) -> Result<RealField> {
    if forcing.ndim() != 1 || forcing.channels() != 1 {
        return Err(invalid(format!(
            "expected a (batch, T, 1) forcing, got {:?}",
            forcing.shape()
        )));
    }
    let mut out = RealField::zeros(forcing.shape().to_vec())?;
    for b in 0..forcing.batch() {
        let traj = lorenz63_trajectory(forcing.sample(b), params, x0, dt)?;
        for (o, s) in out.sample_mut(b).iter_mut().zip(&traj) {
            *o = s[0];
        }
    }
    Ok(out)
}
