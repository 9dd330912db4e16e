//! Coupled two-mass spring system used as the ground-truth simulator.
//!
//! ```text
//! m2 y2'' = -k2 (y2 - y1)
//! m1 y1'' =  k2 (y2 - y1) + k1 (x - y1)
//! ```
//!
//! Stiffnesses are given in N/mm. In [`UnitMode::Si`] they are converted to
//! N/m before integration, which puts the natural frequencies near 29 Hz
//! and 36 Hz; [`UnitMode::Literal`] uses the numbers as they stand.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::UniformSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitMode {
    /// Stiffness converted from N/mm to N/m.
    #[default]
    Si,
    /// Stiffness values used without conversion.
    Literal,
}

impl std::str::FromStr for UnitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "si" => Ok(UnitMode::Si),
            "literal" => Ok(UnitMode::Literal),
            other => Err(Error::Invalid(format!(
                "unit mode must be 'si' or 'literal', got '{other}'"
            ))),
        }
    }
}

/// Stiffness in N/mm, masses in kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringMassParams {
    pub k1: f64,
    pub k2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl Default for SpringMassParams {
    fn default() -> Self {
        Self {
            k1: 10_000.0,
            k2: 100.0,
            m1: 300.0,
            m2: 2.0,
        }
    }
}

impl SpringMassParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("m1", self.m1), ("m2", self.m2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveParam(name));
            }
        }
        Ok(())
    }

    /// `(k1, k2)` in the units the integrator uses.
    pub fn stiffness(&self, units: UnitMode) -> (f64, f64) {
        match units {
            UnitMode::Si => (self.k1 * 1e3, self.k2 * 1e3),
            UnitMode::Literal => (self.k1, self.k2),
        }
    }

    /// Upper bound on the largest natural angular frequency (Gershgorin
    /// bound on `M^-1 K`).
    fn omega_bound(&self, units: UnitMode) -> f64 {
        let (k1, k2) = self.stiffness(units);
        ((k1 + 2.0 * k2) / self.m1).max(2.0 * k2 / self.m2).sqrt()
    }

    /// Kinetic plus spring potential energy of a state.
    pub fn energy(&self, units: UnitMode, state: &State) -> f64 {
        let (k1, k2) = self.stiffness(units);
        0.5 * self.m1 * state.v1 * state.v1
            + 0.5 * self.m2 * state.v2 * state.v2
            + 0.5 * k1 * state.y1 * state.y1
            + 0.5 * k2 * (state.y2 - state.y1).powi(2)
    }
}

/// Positions and velocities of both masses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub y1: f64,
    pub v1: f64,
    pub y2: f64,
    pub v2: f64,
}

impl State {
    fn axpy(&self, h: f64, d: &State) -> State {
        State {
            y1: self.y1 + h * d.y1,
            v1: self.v1 + h * d.v1,
            y2: self.y2 + h * d.y2,
            v2: self.v2 + h * d.v2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Output sampling step, seconds.
    pub dt: f64,
    /// Duration, seconds; must be a multiple of `dt`.
    pub duration: f64,
    #[serde(default)]
    pub initial: State,
    #[serde(default)]
    pub units: UnitMode,
    /// Integrator sub-steps per output step. `None` picks at least 10 and
    /// enough that the fastest mode advances at most 0.02 rad per sub-step.
    #[serde(default)]
    pub substeps: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            duration: 30.0,
            initial: State::default(),
            units: UnitMode::Si,
            substeps: None,
        }
    }
}

/// Largest phase advance of the fastest mode per automatic sub-step.
const MAX_SUBSTEP_PHASE: f64 = 0.02;

impl SimConfig {
    /// Number of output samples, `duration / dt + 1`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::Invalid(format!("invalid duration {}", self.duration)));
        }
        let ratio = self.duration / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Invalid(format!(
                "duration {} is not a multiple of dt {}",
                self.duration, self.dt
            )));
        }
        Ok(steps as usize + 1)
    }

    pub fn substeps_for(&self, params: &SpringMassParams) -> usize {
        self.substeps.unwrap_or_else(|| {
            let needed = (self.dt * params.omega_bound(self.units) / MAX_SUBSTEP_PHASE).ceil();
            (needed as usize).max(10)
        })
    }
}

/// One sinusoid `A sin(2 pi B t + C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Mean of `N` random sinusoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub terms: Vec<SineTerm>,
}

impl Excitation {
    pub fn new(terms: Vec<SineTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid("excitation needs at least one term".into()));
        }
        Ok(Self { terms })
    }

    /// `N ~ U{1..10}`, `A, B ~ U(-1, 1)`, `C ~ U(-pi, pi)`.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let n = rng.random_range(1..=10usize);
        let terms = (0..n)
            .map(|_| SineTerm {
                amplitude: rng.random_range(-1.0..1.0),
                frequency: rng.random_range(-1.0..1.0),
                phase: rng.random_range(-PI..PI),
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .map(|s| s.amplitude * (2.0 * PI * s.frequency * t + s.phase).sin())
            .sum();
        sum / self.terms.len() as f64
    }

    /// The excitation sampled on the output grid, as channel `x`.
    pub fn sampled(&self, cfg: &SimConfig) -> Result<UniformSeries> {
        let n = cfg.n_steps()?;
        UniformSeries::single(cfg.dt, "x", (0..n).map(|i| self.eval(i as f64 * cfg.dt)).collect())
    }
}

/// Generator for run `stream` of the seed family `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the excitation of one run. Deterministic per `(seed, stream)`.
pub fn sample_excitation(seed: u64, stream: u64) -> Excitation {
    Excitation::sample(&mut run_rng(seed, stream))
}

/// Integrates the system with classical fourth-order Runge-Kutta, driven
/// by the continuous excitation `x(t)`. Returns channels `y1` and `y2`.
pub fn simulate<F: Fn(f64) -> f64>(
    params: &SpringMassParams,
    excitation: F,
    cfg: &SimConfig,
) -> Result<UniformSeries> {
    let (y1, y2, _) = integrate(params, excitation, cfg, false)?;
    UniformSeries::new(cfg.dt, 0.0, vec!["y1".into(), "y2".into()], vec![y1, y2])
}

/// Like [`simulate`] but also returns the full state at every output step.
pub fn simulate_states<F: Fn(f64) -> f64>(
    params: &SpringMassParams,
    excitation: F,
    cfg: &SimConfig,
) -> Result<Vec<State>> {
    Ok(integrate(params, excitation, cfg, true)?.2)
}

fn integrate<F: Fn(f64) -> f64>(
    params: &SpringMassParams,
    x: F,
    cfg: &SimConfig,
    keep_states: bool,
) -> Result<(Vec<f64>, Vec<f64>, Vec<State>)> {
    params.validate()?;
    let n = cfg.n_steps()?;
    let (k1, k2) = params.stiffness(cfg.units);
    let (m1, m2) = (params.m1, params.m2);
    let sub = cfg.substeps_for(params);
    let h = cfg.dt / sub as f64;

    let deriv = |s: &State, xv: f64| State {
        y1: s.v1,
        v1: (k2 * (s.y2 - s.y1) + k1 * (xv - s.y1)) / m1,
        y2: s.v2,
        v2: -k2 * (s.y2 - s.y1) / m2,
    };

    let mut s = cfg.initial;
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    let mut states = Vec::new();
    y1.push(s.y1);
    y2.push(s.y2);
    if keep_states {
        states.push(s);
    }
    let mut x_now = x(0.0);
    for step in 1..n {
        let t_start = (step - 1) as f64 * cfg.dt;
        for j in 0..sub {
            let t = t_start + j as f64 * h;
            let x_mid = x(t + 0.5 * h);
            let x_end = x(t + h);
            let d1 = deriv(&s, x_now);
            let d2 = deriv(&s.axpy(0.5 * h, &d1), x_mid);
            let d3 = deriv(&s.axpy(0.5 * h, &d2), x_mid);
            let d4 = deriv(&s.axpy(h, &d3), x_end);
            s = State {
                y1: s.y1 + h / 6.0 * (d1.y1 + 2.0 * d2.y1 + 2.0 * d3.y1 + d4.y1),
                v1: s.v1 + h / 6.0 * (d1.v1 + 2.0 * d2.v1 + 2.0 * d3.v1 + d4.v1),
                y2: s.y2 + h / 6.0 * (d1.y2 + 2.0 * d2.y2 + 2.0 * d3.y2 + d4.y2),
                v2: s.v2 + h / 6.0 * (d1.v2 + 2.0 * d2.v2 + 2.0 * d3.v2 + d4.v2),
            };
            x_now = x_end;
        }
        if !(s.y1.is_finite() && s.y2.is_finite()) {
            return Err(Error::Numeric(format!("simulation diverged at step {step}")));
        }
        y1.push(s.y1);
        y2.push(s.y2);
        if keep_states {
            states.push(s);
        }
    }
    Ok((y1, y2, states))
}

/// One simulated run: its random stream, excitation and the sampled
/// channels `x`, `y1`, `y2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub stream: u64,
    pub excitation: Excitation,
    pub series: UniformSeries,
}

/// Simulates runs for the given random streams of `seed`, in parallel.
/// The output does not depend on the number of worker threads.
pub fn simulate_streams(
    seed: u64,
    streams: std::ops::Range<u64>,
    params: &SpringMassParams,
    cfg: &SimConfig,
) -> Result<Vec<SimulatedRun>> {
    params.validate()?;
    cfg.n_steps()?;
    streams
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|stream| {
            let excitation = sample_excitation(seed, stream);
            let mut series = excitation.sampled(cfg)?;
            let out = simulate(params, |t| excitation.eval(t), cfg)?;
            series.merge(&out)?;
            Ok(SimulatedRun {
                stream,
                excitation,
                series,
            })
        })
        .collect()
}

/// An experimental design of `n_runs` independent simulations (streams
/// `0..n_runs` of `seed`).
pub fn build_ed(
    n_runs: usize,
    seed: u64,
    params: &SpringMassParams,
    cfg: &SimConfig,
) -> Result<Vec<SimulatedRun>> {
    if n_runs == 0 {
        return Err(Error::Invalid("an experimental design needs at least one run".into()));
    }
    simulate_streams(seed, 0..n_runs as u64, params, cfg)
}

/// Stream offset separating validation runs from training runs of the same seed.
pub const VALIDATION_STREAM_OFFSET: u64 = 1 << 32;

/// `n_runs` out-of-sample simulations, disjoint from [`build_ed`] streams.
pub fn build_validation_set(
    n_runs: usize,
    seed: u64,
    params: &SpringMassParams,
    cfg: &SimConfig,
) -> Result<Vec<SimulatedRun>> {
    if n_runs == 0 {
        return Err(Error::Invalid("a validation set needs at least one run".into()));
    }
    let start = VALIDATION_STREAM_OFFSET;
    simulate_streams(seed, start..start + n_runs as u64, params, cfg)
}
