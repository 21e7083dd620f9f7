//! Viscous Burgers on the unit periodic interval.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{invalid, Error, Result};
use crate::fft::transform_axis;
use crate::field::RealField;

/// Largest admissible `dt * max|u0| * kappa_max`, with `kappa_max` the
/// highest wavenumber kept by the 2/3 rule.
pub const BURGERS_CFL: f64 = 2.0;

fn kappa_max(n: usize) -> f64 {
    2.0 * PI * (n / 3) as f64
}

/// Smallest step count that satisfies the stability bound at `cfl`.
pub fn burgers_min_steps(u0: &[f64], t_final: f64, cfl: f64) -> usize {
    let umax = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ((t_final * umax * kappa_max(u0.len()) / cfl).ceil() as usize).max(1)
}

struct Stepper {
    n: usize,
    e: Vec<f64>,
    e2: Vec<f64>,
    // -i kappa / 2 on kept modes, 0 elsewhere.
    flux: Vec<Complex64>,
    keep: Vec<bool>,
    dt: f64,
}

impl Stepper {
    fn new(n: usize, nu: f64, dt: f64) -> Self {
        let cut = n / 3;
        let mut e = Vec::with_capacity(n);
        let mut flux = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        for j in 0..n {
            let k = if 2 * j <= n {
                j as i64
            } else {
                j as i64 - n as i64
            };
            let kappa = 2.0 * PI * k as f64;
            e.push((-nu * kappa * kappa * dt / 2.0).exp());
            let kept = k.unsigned_abs() as usize <= cut && 2 * j != n;
            keep.push(kept);
            flux.push(if kept {
                Complex64::new(0.0, -kappa / 2.0)
            } else {
                Complex64::default()
            });
        }
        let e2 = e.iter().map(|x| x * x).collect();
        Self {
            n,
            e,
            e2,
            flux,
            keep,
            dt,
        }
    }

    fn shape(&self) -> [usize; 3] {
        [1, self.n, 1]
    }

    /// dt * N(v) with N(v) = -d/dx (u^2 / 2) from the dealiased spectrum.
    fn nonlinear(&self, v: &[Complex64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(
            v.iter()
                .zip(&self.keep)
                .map(|(z, &k)| if k { *z } else { Complex64::default() }),
        );
        transform_axis(out, &self.shape(), 1, FftDirection::Inverse);
        let inv = 1.0 / self.n as f64;
        for z in out.iter_mut() {
            let u = z.re * inv;
            *z = Complex64::new(u * u, 0.0);
        }
        transform_axis(out, &self.shape(), 1, FftDirection::Forward);
        for (z, f) in out.iter_mut().zip(&self.flux) {
            *z *= f * self.dt;
        }
    }

    fn step(&self, v: &mut [Complex64], scratch: &mut [Vec<Complex64>; 5]) {
        let [a, b, c, d, tmp] = scratch;
        self.nonlinear(v, a);
        tmp.clear();
        tmp.extend((0..self.n).map(|j| self.e[j] * (v[j] + a[j] / 2.0)));
        self.nonlinear(tmp, b);
        tmp.clear();
        tmp.extend((0..self.n).map(|j| self.e[j] * v[j] + b[j] / 2.0));
        self.nonlinear(tmp, c);
        tmp.clear();
        tmp.extend((0..self.n).map(|j| self.e2[j] * v[j] + self.e[j] * c[j]));
        self.nonlinear(tmp, d);
        for j in 0..self.n {
            v[j] = self.e2[j] * v[j]
                + (self.e2[j] * a[j] + 2.0 * self.e[j] * (b[j] + c[j]) + d[j]) / 6.0;
        }
    }
}

fn check_args(u0: &[f64], nu: f64, t_final: f64, n_steps: usize) -> Result<()> {
    if !(nu > 0.0) {
        return Err(invalid(format!("viscosity {nu} must be positive")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(invalid(format!(
            "final time {t_final} must be finite and non-negative"
        )));
    }
    if u0.len() < 4 {
        return Err(invalid(format!(
            "grid of {} points is too coarse",
            u0.len()
        )));
    }
    if n_steps == 0 {
        return Err(invalid("n_steps must be at least 1"));
    }
    let dt = t_final / n_steps as f64;
    let umax = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cfl = dt * umax * kappa_max(u0.len());
    if !(cfl <= BURGERS_CFL) {
        return Err(Error::Stability(format!(
            "n_steps = {n_steps} gives CFL number {cfl:.3} > {BURGERS_CFL}; at least {} steps needed",
            burgers_min_steps(u0, t_final, BURGERS_CFL)
        )));
    }
    Ok(())
}

/// Integrates one initial condition, returning the state after every
/// `every` steps (the initial state first, the final state last).
pub fn burgers_snapshots(
    u0: &[f64],
    nu: f64,
    t_final: f64,
    n_steps: usize,
    every: usize,
) -> Result<Vec<Vec<f64>>> {
    check_args(u0, nu, t_final, n_steps)?;
    let n = u0.len();
    let st = Stepper::new(n, nu, t_final / n_steps as f64);
    let shape = st.shape();
    let mut v: Vec<Complex64> = u0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    transform_axis(&mut v, &shape, 1, FftDirection::Forward);
    let to_physical = |v: &[Complex64]| {
        let mut w = v.to_vec();
        transform_axis(&mut w, &shape, 1, FftDirection::Inverse);
        w.iter().map(|z| z.re / n as f64).collect::<Vec<f64>>()
    };
    let every = every.max(1);
    let mut snaps = vec![u0.to_vec()];
    let mut scratch: [Vec<Complex64>; 5] = Default::default();
    for s in 1..=n_steps {
        st.step(&mut v, &mut scratch);
        if s % every == 0 || s == n_steps {
            if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Diverged(format!(
                    "Burgers state non-finite at step {s}"
                )));
            }
            snaps.push(to_physical(&v));
        }
    }
    Ok(snaps)
}

/// Pseudo-spectral solve of `u_t + (u^2/2)_x = nu u_xx` for every sample of
/// `u0` (shape `(B, N, 1)`), returning `u(., t_final)`.
pub fn burgers_solve(u0: &RealField, nu: f64, t_final: f64, n_steps: usize) -> Result<RealField> {
    if u0.ndim() != 1 || u0.channels() != 1 {
        return Err(invalid(format!(
            "expected a (batch, N, 1) field, got {:?}",
            u0.shape()
        )));
    }
    let mut out = RealField::zeros(u0.shape().to_vec())?;
    for b in 0..u0.batch() {
        let last = burgers_snapshots(u0.sample(b), nu, t_final, n_steps, n_steps)?
            .pop()
            .unwrap();
        out.sample_mut(b).copy_from_slice(&last);
    }
    Ok(out)
}
