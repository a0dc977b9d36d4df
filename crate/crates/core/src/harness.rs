//! Drivers that tie the simulator to the reduced theory: amplitude sweeps and
//! shadowing of the reduced dynamics by the PDE.

use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::bifurcated_amplitude;
use crate::error::{invalid, Result};
use crate::manifold::{cm_coefficients, integrate_reduced, ReducedState, ReducedSystem, SigmaMode};
use crate::params::{DomainSpec, PhysicalParams};
use crate::scalar::Scalar;
use crate::simulator::{
    initial_field, simulate_with, InitialData, Model, Scheme, SimState, SimulateOptions, Simulator, StepConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig<T> {
    /// Relative distances below `T_c`: `T = T_c (1 - eps)`.
    pub epsilons: Vec<T>,
    pub modes: [usize; 3],
    pub model: Model,
    pub scheme: Scheme,
    /// Time step as a fraction of `1 / beta` at each point.
    pub dt_scale: T,
    pub max_steps: usize,
    pub steady_tol: T,
    pub init: InitialData<T>,
}

impl<T: Scalar> SweepConfig<T> {
    pub fn new(epsilons: Vec<T>, modes: [usize; 3], seed: u64) -> Self {
        Self {
            epsilons,
            modes,
            model: Model::Truncated,
            scheme: Scheme::Imex1,
            dt_scale: T::lit(0.2),
            max_steps: 5000,
            steady_tol: T::lit(1e-10),
            init: InitialData::Random { amplitude: T::lit(1e-3), band: 4, seed },
        }
    }

    /// `n` points spaced geometrically over `[lo, hi]`.
    pub fn geometric(lo: T, hi: T, n: usize) -> Vec<T> {
        let ratio = (hi / lo).ln();
        (0..n).map(|i| lo * (ratio * T::from_usize_lossy(i) / T::from_usize_lossy(n.max(2) - 1)).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint<T> {
    pub epsilon: T,
    pub temperature: T,
    /// Norm of the critical-mode coefficients of the terminal state.
    pub amplitude: T,
    /// Leading-order law, single critical mode only.
    pub predicted: Option<T>,
    pub steady: bool,
    pub steps: usize,
    pub t_final: T,
    pub max_abs_mass: T,
    pub max_energy_rise: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult<T> {
    #[serde(rename = "Tc")]
    pub tc: T,
    pub points: Vec<SweepPoint<T>>,
    /// Least-squares slope of `ln amplitude` against `ln (T_c - T)`.
    pub slope: T,
    pub intercept: T,
}

pub fn sweep<T: Scalar>(p: &PhysicalParams<T>, d: &DomainSpec<T>, cfg: &SweepConfig<T>) -> Result<SweepResult<T>> {
    if cfg.epsilons.len() < 2 {
        return Err(invalid("epsilons", "a sweep needs at least two temperatures"));
    }
    if cfg.epsilons.iter().any(|&e| !(e > T::zero() && e < T::one())) {
        return Err(invalid("epsilons", "each relative offset must lie in (0, 1)"));
    }
    let tc = p.critical_temperature(d)?;
    let points: Vec<SweepPoint<T>> =
        cfg.epsilons.par_iter().map(|&eps| relax(p, d, cfg, eps)).collect::<Result<_>>()?;
    let xs: Vec<T> = points.iter().map(|q| (tc - q.temperature).ln()).collect();
    let ys: Vec<T> = points.iter().map(|q| q.amplitude.ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    Ok(SweepResult { tc, points, slope, intercept })
}

/// Relaxes the configured initial data at `T = T_c (1 - eps)` to a steady state.
pub fn relax<T: Scalar>(
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
    cfg: &SweepConfig<T>,
    eps: T,
) -> Result<SweepPoint<T>> {
    let tc = p.critical_temperature(d)?;
    let m = d.multiplicity();
    let temperature = tc * (T::one() - eps);
    let beta = ReducedSystem::new(p, d, temperature, SigmaMode::Ambient)?.beta();
    let step = StepConfig::new(cfg.dt_scale / beta.abs(), cfg.modes).with_model(cfg.model).with_scheme(cfg.scheme);
    let sim = Simulator::new(p, d, temperature, &step)?;
    let s0 = SimState::new(initial_field(cfg.modes, &cfg.init)?, temperature, p.clone(), d.clone())?;
    let opts = SimulateOptions {
        t_end: step.dt * T::from_usize_lossy(cfg.max_steps),
        record_every: 0,
        steady_tol: Some(cfg.steady_tol),
    };
    let tr = simulate_with(&sim, &s0, &opts)?;
    let amps = tr.final_state.mode_amplitudes(m);
    let amplitude = amps.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let predicted = if m == 1 { bifurcated_amplitude(p, d, temperature).ok() } else { None };
    Ok(SweepPoint {
        epsilon: eps,
        temperature,
        amplitude,
        predicted,
        steady: tr.steady,
        steps: tr.steps,
        t_final: tr.final_state.t,
        max_abs_mass: tr.max_abs_mass,
        max_energy_rise: tr.max_energy_rise,
    })
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit<T: Scalar>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().fold(T::zero(), |a, &x| a + x) / n;
    let my = ys.iter().fold(T::zero(), |a, &y| a + y) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateConfig<T> {
    pub epsilon: T,
    pub modes: [usize; 3],
    pub dt: T,
    pub scheme: Scheme,
    pub model: Model,
    /// Initial critical amplitudes as a fraction of the bifurcated amplitude.
    pub initial_fraction: T,
    /// Direction of the initial critical amplitudes; normalized internally.
    pub direction: Vec<T>,
    /// Horizon in units of `1 / beta`.
    pub horizon: T,
    /// Reduced RK4 substeps per PDE step.
    pub substeps: usize,
    pub sigma: SigmaMode,
}

impl<T: Scalar> ValidateConfig<T> {
    pub fn new(epsilon: T, modes: [usize; 3], m: usize) -> Self {
        let direction = [T::lit(0.8), T::lit(0.6), T::lit(0.5)][..m].to_vec();
        Self {
            epsilon,
            modes,
            dt: T::lit(0.1),
            scheme: Scheme::Imex2,
            model: Model::Truncated,
            initial_fraction: T::lit(0.25),
            direction,
            horizon: T::one(),
            substeps: 4,
            sigma: SigmaMode::Ambient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport<T> {
    #[serde(rename = "Tc")]
    pub tc: T,
    pub temperature: T,
    pub beta: T,
    /// `sqrt(beta / a1)`, the single-mode bifurcated amplitude.
    pub amplitude: T,
    pub horizon: T,
    pub times: Vec<T>,
    pub pde: Vec<Vec<T>>,
    pub reduced: Vec<Vec<T>>,
    pub max_deviation: T,
    /// `max_deviation / amplitude`.
    pub relative_deviation: T,
}

/// Runs the PDE from `y0 e + Phi(y0)` and the reduced system from `y0` and
/// compares the critical-mode coefficients at every PDE step.
pub fn validate<T: Scalar>(
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
    cfg: &ValidateConfig<T>,
) -> Result<ValidateReport<T>> {
    let m = d.multiplicity();
    if cfg.direction.len() != m {
        return Err(invalid("direction", format!("need {m} components, got {}", cfg.direction.len())));
    }
    if cfg.substeps == 0 {
        return Err(invalid("substeps", "need at least one reduced step per PDE step"));
    }
    let tc = p.critical_temperature(d)?;
    let temperature = tc * (T::one() - cfg.epsilon);
    let sys = ReducedSystem::new(p, d, temperature, cfg.sigma)?;
    let beta = sys.beta();
    let ratio = beta / sys.a1();
    if !(ratio > T::zero()) {
        return Err(invalid("epsilon", "no single-mode bifurcated state at this temperature"));
    }
    let amplitude = ratio.sqrt();
    let norm = cfg.direction.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let y0: Vec<T> = cfg.direction.iter().map(|&v| cfg.initial_fraction * amplitude * v / norm).collect();

    let state = ReducedState::new(y0.clone(), temperature)?;
    let phi = cm_coefficients(&state, p, d)?;
    let u0 = phi.lift(&y0, cfg.modes)?;
    let step = StepConfig::new(cfg.dt, cfg.modes).with_model(cfg.model).with_scheme(cfg.scheme);
    let sim = Simulator::new(p, d, temperature, &step)?;
    let horizon = cfg.horizon / beta.abs();
    let steps = (horizon / cfg.dt).ceil().to_usize().unwrap_or(0);

    let h = cfg.dt / T::from_usize_lossy(cfg.substeps);
    let reduced = integrate_reduced(&state, p, d, h, steps * cfg.substeps, cfg.sigma)?;

    let mut s = SimState::new(u0, temperature, p.clone(), d.clone())?;
    let mut times = vec![T::zero()];
    let mut pde = vec![s.mode_amplitudes(m)];
    let mut red = vec![y0];
    let mut max_deviation = T::zero();
    for n in 1..=steps {
        s = sim.step(&s)?;
        let idx = n * cfg.substeps;
        let Some(y) = reduced.states.get(idx) else { break };
        let a = s.mode_amplitudes(m);
        let dev = a.iter().zip(y).fold(T::zero(), |acc, (&x, &z)| acc.max((x - z).abs()));
        max_deviation = max_deviation.max(dev);
        times.push(s.t);
        pde.push(a);
        red.push(y.clone());
    }
    Ok(ValidateReport {
        tc,
        temperature,
        beta,
        amplitude,
        horizon,
        times,
        pde,
        reduced: red,
        max_deviation,
        relative_deviation: max_deviation / amplitude,
    })
}
