//! Dataset generators for the three benchmark problems.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::datagen::burgers::{burgers_min_steps, burgers_snapshots};
use crate::datagen::darcy::{darcy_solve, threshold_coefficient};
use crate::datagen::dataset::DatasetPair;
use crate::datagen::grf::{grf_sample, GrfSpec};
use crate::datagen::lorenz::{lorenz63_trajectory, LorenzParams};
use crate::error::{invalid, Error, Result};
use crate::field::RealField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    Burgers1d,
    Darcy2d,
    Lorenz63,
}

impl Problem {
    pub const ALL: [Problem; 3] = [Problem::Burgers1d, Problem::Darcy2d, Problem::Lorenz63];

    pub fn tag(self) -> &'static str {
        match self {
            Problem::Burgers1d => "burgers1d",
            Problem::Darcy2d => "darcy2d",
            Problem::Lorenz63 => "lorenz63",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .into_iter()
            .find(|p| p.tag() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown problem '{s}' (burgers1d, darcy2d, lorenz63)"
                ))
            })
    }
}

/// Seed of sample `index` in a dataset generated from `seed`.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersGen {
    pub samples: usize,
    pub n: usize,
    pub viscosity: f64,
    pub t_final: f64,
    pub alpha: f64,
    pub tau: f64,
    pub amplitude: f64,
    /// Step counts are chosen per sample to keep the CFL number at or
    /// below this value.
    pub cfl: f64,
    pub seed: u64,
}

impl Default for BurgersGen {
    fn default() -> Self {
        Self {
            samples: 320,
            n: 256,
            viscosity: 0.1,
            t_final: 1.0,
            alpha: 2.5,
            tau: 7.0,
            amplitude: 1.0,
            cfl: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarcyGen {
    pub samples: usize,
    pub n: usize,
    pub alpha: f64,
    pub tau: f64,
    pub high: f64,
    pub low: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for DarcyGen {
    fn default() -> Self {
        Self {
            samples: 320,
            n: 64,
            alpha: 2.0,
            tau: 3.0,
            // Contrast 4 as in the usual 12/3 benchmark, scaled down so the
            // solutions are O(0.1) rather than O(0.01).
            high: 1.2,
            low: 0.3,
            threshold: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzGen {
    pub samples: usize,
    pub points: usize,
    pub dt: f64,
    pub params: LorenzParams,
    pub alpha: f64,
    pub tau: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for LorenzGen {
    fn default() -> Self {
        Self {
            samples: 320,
            points: 2048,
            dt: 0.01,
            // Below the chaotic threshold, so the forcing-to-response map is
            // a well-posed operator over the whole window.
            params: LorenzParams {
                sigma: 10.0,
                rho: 10.0,
                beta: 8.0 / 3.0,
            },
            alpha: 2.5,
            tau: 10.0,
            amplitude: 4.0,
            seed: 0,
        }
    }
}

fn meta(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn stack(samples: Vec<Vec<f64>>, spatial: &[usize]) -> Result<RealField> {
    let mut shape = vec![samples.len()];
    shape.extend_from_slice(spatial);
    shape.push(1);
    RealField::new(shape, samples.concat())
}

fn check_count(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    Ok(())
}

/// Pairs `(u0, u(., t_final))`.
pub fn generate_burgers(g: &BurgersGen) -> Result<DatasetPair> {
    check_count(g.samples)?;
    if !(g.cfl > 0.0) {
        return Err(invalid("cfl target must be positive"));
    }
    let mut inputs = Vec::with_capacity(g.samples);
    let mut outputs = Vec::with_capacity(g.samples);
    let mut max_steps = 0;
    for i in 0..g.samples {
        let u0 = grf_sample(&GrfSpec {
            shape: vec![g.n],
            alpha: g.alpha,
            tau: g.tau,
            amplitude: g.amplitude,
            seed: sample_seed(g.seed, i),
        })?
        .into_data();
        let steps = burgers_min_steps(&u0, g.t_final, g.cfl).max(16);
        max_steps = max_steps.max(steps);
        let u1 = burgers_snapshots(&u0, g.viscosity, g.t_final, steps, steps)?
            .pop()
            .unwrap();
        inputs.push(u0);
        outputs.push(u1);
    }
    let pair = DatasetPair::new(
        stack(inputs, &[g.n])?,
        stack(outputs, &[g.n])?,
        Problem::Burgers1d.tag(),
        meta(&[
            ("resolution", g.n.to_string()),
            ("samples", g.samples.to_string()),
            ("viscosity", g.viscosity.to_string()),
            ("t_final", g.t_final.to_string()),
            ("grf_alpha", g.alpha.to_string()),
            ("grf_tau", g.tau.to_string()),
            ("grf_amplitude", g.amplitude.to_string()),
            ("cfl_target", g.cfl.to_string()),
            ("max_steps", max_steps.to_string()),
            ("seed", g.seed.to_string()),
        ]),
    )?;
    pair.validate()?;
    Ok(pair)
}

/// Pairs `(a, u)` with two-valued coefficients and unit forcing.
pub fn generate_darcy(g: &DarcyGen) -> Result<DatasetPair> {
    check_count(g.samples)?;
    let f = RealField::new(vec![1, g.n, g.n, 1], vec![1.0; g.n * g.n])?;
    let mut inputs = Vec::with_capacity(g.samples);
    let mut outputs = Vec::with_capacity(g.samples);
    for i in 0..g.samples {
        let field = grf_sample(&GrfSpec {
            shape: vec![g.n, g.n],
            alpha: g.alpha,
            tau: g.tau,
            amplitude: 1.0,
            seed: sample_seed(g.seed, i),
        })?;
        let a = threshold_coefficient(&field, g.high, g.low, g.threshold);
        let u = darcy_solve(&a, &f)?;
        inputs.push(a.into_data());
        outputs.push(u.into_data());
    }
    let pair = DatasetPair::new(
        stack(inputs, &[g.n, g.n])?,
        stack(outputs, &[g.n, g.n])?,
        Problem::Darcy2d.tag(),
        meta(&[
            ("resolution", g.n.to_string()),
            ("samples", g.samples.to_string()),
            ("grf_alpha", g.alpha.to_string()),
            ("grf_tau", g.tau.to_string()),
            ("coef_high", g.high.to_string()),
            ("coef_low", g.low.to_string()),
            ("threshold", g.threshold.to_string()),
            ("forcing", "1".to_string()),
            ("seed", g.seed.to_string()),
        ]),
    )?;
    pair.validate()?;
    Ok(pair)
}

/// Pairs `(f(t), x(t))` started from the positive equilibrium.
pub fn generate_lorenz(g: &LorenzGen) -> Result<DatasetPair> {
    check_count(g.samples)?;
    let x0 = g.params.positive_fixed_point();
    let mut inputs = Vec::with_capacity(g.samples);
    let mut outputs = Vec::with_capacity(g.samples);
    for i in 0..g.samples {
        let f = grf_sample(&GrfSpec {
            shape: vec![g.points],
            alpha: g.alpha,
            tau: g.tau,
            amplitude: g.amplitude,
            seed: sample_seed(g.seed, i),
        })?
        .into_data();
        let traj = lorenz63_trajectory(&f, &g.params, x0, g.dt)?;
        outputs.push(traj.iter().map(|s| s[0]).collect());
        inputs.push(f);
    }
    let pair = DatasetPair::new(
        stack(inputs, &[g.points])?,
        stack(outputs, &[g.points])?,
        Problem::Lorenz63.tag(),
        meta(&[
            ("resolution", g.points.to_string()),
            ("samples", g.samples.to_string()),
            ("dt", g.dt.to_string()),
            ("sigma", g.params.sigma.to_string()),
            ("rho", g.params.rho.to_string()),
            ("beta", g.params.beta.to_string()),
            ("grf_alpha", g.alpha.to_string()),
            ("grf_tau", g.tau.to_string()),
            ("grf_amplitude", g.amplitude.to_string()),
            ("initial_state", format!("{},{},{}", x0[0], x0[1], x0[2])),
            ("response", "x".to_string()),
            ("seed", g.seed.to_string()),
        ]),
    )?;
    pair.validate()?;
    Ok(pair)
}
