//! Steady Darcy flow `-div(a grad u) = f` on the unit square with u = 0 on
//! the boundary.

use crate::error::{invalid, mismatch, Error, Result};
use crate::field::RealField;

/// Relative residual at which conjugate gradients stops.
pub const DARCY_TOL: f64 = 1e-10;

/// Nodes `x_i = i / (n - 1)`; boundary nodes are pinned to zero and the
/// interior nodes are the unknowns.
struct Stencil {
    n: usize,
    // Face coefficients / h^2, indexed by the node on the low side.
    east: Vec<f64>,
    north: Vec<f64>,
    diag: Vec<f64>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl Stencil {
    fn new(a: &[f64], n: usize) -> Self {
        let h2 = ((n - 1) as f64).powi(2);
        let mut east = vec![0.0; n * n];
        let mut north = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let p = i * n + j;
                if i + 1 < n {
                    east[p] = harmonic(a[p], a[p + n]) * h2;
                }
                if j + 1 < n {
                    north[p] = harmonic(a[p], a[p + 1]) * h2;
                }
            }
        }
        let mut diag = vec![0.0; n * n];
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let p = i * n + j;
                diag[p] = east[p] + east[p - n] + north[p] + north[p - 1];
            }
        }
        Self {
            n,
            east,
            north,
            diag,
        }
    }

    fn interior(&self, p: usize) -> bool {
        let (i, j) = (p / self.n, p % self.n);
        i > 0 && j > 0 && i + 1 < self.n && j + 1 < self.n
    }

    /// `A u` on interior nodes, zero on the boundary. `u` must vanish on the
    /// boundary.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.fill(0.0);
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let p = i * n + j;
                out[p] = self.diag[p] * u[p]
                    - self.east[p] * u[p + n]
                    - self.east[p - n] * u[p - n]
                    - self.north[p] * u[p + 1]
                    - self.north[p - 1] * u[p - 1];
            }
        }
    }

    fn residual(&self, u: &[f64], f: &[f64], r: &mut [f64]) {
        self.apply(u, r);
        for p in 0..r.len() {
            r[p] = if self.interior(p) { f[p] - r[p] } else { 0.0 };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn interior_norm(st: &Stencil, f: &[f64]) -> f64 {
    f.iter()
        .enumerate()
        .filter(|(p, _)| st.interior(*p))
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt()
}

fn check_coefficient(a: &[f64]) -> Result<()> {
    if let Some((p, v)) = a
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
    {
        return Err(invalid(format!(
            "coefficient must be positive and finite, found {v} at node {p}"
        )));
    }
    Ok(())
}

/// Jacobi-preconditioned CG on one `n x n` sample.
fn solve_one(a: &[f64], f: &[f64], n: usize) -> Result<Vec<f64>> {
    check_coefficient(a)?;
    let st = Stencil::new(a, n);
    let mut u = vec![0.0; n * n];
    let fnorm = interior_norm(&st, f);
    if fnorm == 0.0 || n < 3 {
        return Ok(u);
    }
    let max_iter = 10 * n * n;
    let mut r = vec![0.0; n * n];
    let mut z = vec![0.0; n * n];
    let mut ap = vec![0.0; n * n];
    st.residual(&u, f, &mut r);
    let precondition = |r: &[f64], z: &mut [f64]| {
        for p in 0..r.len() {
            z[p] = if st.diag[p] > 0.0 {
                r[p] / st.diag[p]
            } else {
                0.0
            };
        }
    };
    precondition(&r, &mut z);
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        st.apply(&dir, &mut ap);
        let alpha = rz / dot(&dir, &ap);
        for p in 0..u.len() {
            u[p] += alpha * dir[p];
            r[p] -= alpha * ap[p];
        }
        if dot(&r, &r).sqrt() < 0.5 * DARCY_TOL * fnorm {
            // The recursive residual drifts; confirm against the true one
            // and restart from it if needed.
            st.residual(&u, f, &mut r);
            if interior_norm(&st, &r) < DARCY_TOL * fnorm {
                return Ok(u);
            }
        }
        if !alpha.is_finite() {
            return Err(Error::SolverFailure(format!(
                "CG breakdown at iteration {it}"
            )));
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for p in 0..dir.len() {
            dir[p] = z[p] + beta * dir[p];
        }
    }
    st.residual(&u, f, &mut r);
    Err(Error::SolverFailure(format!(
        "CG did not reach relative residual {DARCY_TOL} in {max_iter} iterations (at {:.3e})",
        interior_norm(&st, &r) / fnorm
    )))
}

fn check_grid(field: &RealField, what: &str) -> Result<usize> {
    let s = field.spatial();
    if field.ndim() != 2 || field.channels() != 1 || s[0] != s[1] {
        return Err(invalid(format!(
            "{what} must have shape (batch, n, n, 1), got {:?}",
            field.shape()
        )));
    }
    Ok(s[0])
}

/// Solves every sample of `a` (shape `(B, n, n, 1)`). `f` has either the
/// same shape or a single sample shared by all.
pub fn darcy_solve(a: &RealField, f: &RealField) -> Result<RealField> {
    let n = check_grid(a, "coefficient")?;
    if check_grid(f, "forcing")? != n || (f.batch() != 1 && f.batch() != a.batch()) {
        return Err(mismatch(format!(
            "forcing {:?} does not match coefficient {:?}",
            f.shape(),
            a.shape()
        )));
    }
    let mut out = RealField::zeros(a.shape().to_vec())?;
    for b in 0..a.batch() {
        let fb = f.sample(if f.batch() == 1 { 0 } else { b });
        let u = solve_one(a.sample(b), fb, n)?;
        out.sample_mut(b).copy_from_slice(&u);
    }
    Ok(out)
}

/// `||f - A u|| / ||f||` over interior nodes for one sample.
pub fn darcy_residual(a: &[f64], f: &[f64], u: &[f64], n: usize) -> Result<f64> {
    if a.len() != n * n || f.len() != n * n || u.len() != n * n {
        return Err(mismatch(format!("arrays must hold {} values", n * n)));
    }
    check_coefficient(a)?;
    let st = Stencil::new(a, n);
    let mut r = vec![0.0; n * n];
    st.residual(u, f, &mut r);
    Ok(interior_norm(&st, &r) / interior_norm(&st, f))
}

/// Two-valued coefficient: `high` where `g >= threshold`, `low` elsewhere.
pub fn threshold_coefficient(g: &RealField, high: f64, low: f64, threshold: f64) -> RealField {
    let data = g
        .data()
        .iter()
        .map(|&v| if v >= threshold { high } else { low })
        .collect();
    RealField::new(g.shape().to_vec(), data).expect("same shape")
}
