use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ch_onsager::classifier::{classify_transition, SCHEMA_VERSION};
use ch_onsager::harness::{self, SweepConfig, ValidateConfig};
use ch_onsager::manifold::{integrate_reduced, ReducedState, ReducedSystem, SigmaMode};
use ch_onsager::simulator::{
    grid_snapshot, initial_field, simulate_with, InitialData, SimState, SimulateOptions, Simulator, StepConfig,
};
use serde_json::json;

use crate::config::{is_input_error, RunConfig, TemperatureSpec};
use crate::CliError;

fn lib<'a>(cfg: &'a RunConfig, section: &str) -> impl Fn(ch_onsager::Error) -> CliError + 'a {
    let section = section.to_string();
    move |e| {
        if is_input_error(&e) {
            CliError::Config(cfg.input_error(&section, &e))
        } else {
            CliError::Numeric(e)
        }
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn columns(prefix: &str, m: usize) -> String {
    (1..=m).map(|j| format!(",{prefix}{j}")).collect()
}

fn row(values: &[f64]) -> String {
    values.iter().map(|v| format!(",{v:e}")).collect()
}

fn temperature(cfg: &RunConfig, command: &str) -> Result<(f64, f64), CliError> {
    let tc = cfg.params.critical_temperature(&cfg.domain).map_err(lib(cfg, command))?;
    let t = match cfg.temperature {
        Some(TemperatureSpec::Absolute(t)) => t,
        Some(TemperatureSpec::Relative(eps)) => tc * (1.0 - eps),
        None => return Err(cfg.missing("T", &format!("`{command}` needs `T` or `epsilon`")).into()),
    };
    Ok((tc, t))
}

pub fn classify(cfg: &RunConfig) -> Result<String, CliError> {
    let report = classify_transition(&cfg.params, &cfg.domain).map_err(lib(cfg, "classify"))?;
    let text = report.to_text();
    write_json(&cfg.output_dir, "report.json", &json!(report))?;
    write_text(&cfg.output_dir, "report.txt", &text)?;
    Ok(text)
}

pub fn simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let s = &cfg.simulate;
    let (tc, t) = temperature(cfg, "simulate")?;
    let err = lib(cfg, "simulate");
    let mut step = StepConfig::new(s.dt, s.modes).with_scheme(s.scheme.into()).with_model(cfg.model(s.model));
    step.stab_biharmonic = s.stab_biharmonic;
    step.stab_laplacian = s.stab_laplacian;
    let sim = Simulator::new(&cfg.params, &cfg.domain, t, &step).map_err(&err)?;
    let init = InitialData::Random { amplitude: s.amplitude, band: s.band, seed: cfg.seed };
    let u0 = initial_field(s.modes, &init).map_err(&err)?;
    let s0 = SimState::new(u0, t, cfg.params.clone(), cfg.domain.clone()).map_err(&err)?;
    let opts = SimulateOptions { t_end: s.t_end, record_every: s.record_every, steady_tol: s.steady_tol };
    let tr = simulate_with(&sim, &s0, &opts).map_err(&err)?;

    let m = cfg.domain.multiplicity();
    let mut csv = format!("t,mass,energy,dissipation{}\n", columns("y", m));
    for r in &tr.records {
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{:e}{}",
            r.t,
            r.mass,
            r.energy,
            r.energy_dissipation,
            row(&r.mode_amplitudes)
        );
    }
    write_text(&cfg.output_dir, "trajectory.csv", &csv)?;
    if s.snapshot {
        let grid = grid_snapshot(&tr.final_state).map_err(&err)?;
        let mut w = BufWriter::new(File::create(cfg.output_dir.join("final.bin"))?);
        grid.write_binary(&mut w).map_err(&err)?;
        w.flush()?;
    }
    let last = tr.records.last().expect("simulate records the final state");
    write_json(
        &cfg.output_dir,
        "simulate.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "Tc": tc,
            "T": t,
            "step": step,
            "steps": tr.steps,
            "steady": tr.steady,
            "t_final": tr.final_state.t,
            "max_abs_mass": tr.max_abs_mass,
            "max_energy_rise": tr.max_energy_rise,
            "final": last,
        }),
    )?;
    Ok(format!(
        "simulated to t = {} in {} steps (steady: {}), critical amplitudes {:?}, max |mass| {:e}\n",
        tr.final_state.t, tr.steps, tr.steady, last.mode_amplitudes, tr.max_abs_mass
    ))
}

pub fn reduce(cfg: &RunConfig) -> Result<String, CliError> {
    let r = &cfg.reduce;
    let (tc, t) = temperature(cfg, "reduce")?;
    let err = lib(cfg, "reduce");
    let sigma: SigmaMode = r.sigma.map(Into::into).unwrap_or_default();
    let sys = ReducedSystem::new(&cfg.params, &cfg.domain, t, sigma).map_err(&err)?;
    let m = sys.dimension();
    let y0 = r.y0.clone().ok_or_else(|| cfg.missing("reduce.y0", "initial critical amplitudes"))?;
    if y0.len() != m {
        return Err(cfg.invalid(Some("reduce"), "y0", format!("need {m} components, got {}", y0.len())).into());
    }
    let rate = sys.beta().abs();
    let dt = match r.dt {
        Some(dt) => dt,
        None if rate > 0.0 => 0.01 / rate,
        None => return Err(cfg.missing("reduce.dt", "no default at T = T_c").into()),
    };
    let t_end = match r.t_end {
        Some(t) => t,
        None if rate > 0.0 => 10.0 / rate,
        None => return Err(cfg.missing("reduce.t_end", "no default at T = T_c").into()),
    };
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(cfg.invalid(Some("reduce"), "dt", "need dt > 0 and t_end >= 0").into());
    }
    let steps = (t_end / dt).ceil() as usize;
    let state = ReducedState::new(y0, t).map_err(&err)?;
    let traj = integrate_reduced(&state, &cfg.params, &cfg.domain, dt, steps, sigma).map_err(&err)?;

    let mut csv = format!("t{}\n", columns("y", m));
    for (time, y) in traj.times.iter().zip(&traj.states) {
        let _ = writeln!(csv, "{time:e}{}", row(y));
    }
    write_text(&cfg.output_dir, "reduced.csv", &csv)?;
    let eq = sys.equilibria();
    write_json(
        &cfg.output_dir,
        "equilibria.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "Tc": tc,
            "T": t,
            "beta": sys.beta(),
            "sigma": sys.sigma(),
            "sigma_mode": sigma,
            "escaped": traj.escaped,
            "equilibria": eq,
        }),
    )?;
    Ok(format!(
        "reduced system m = {m}, beta = {}, {} equilibria, final y = {:?}{}\n",
        sys.beta(),
        eq.points.len(),
        traj.last(),
        if traj.escaped { " (escaped)" } else { "" }
    ))
}

pub fn sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let s = &cfg.sweep;
    let err = lib(cfg, "sweep");
    let tc = cfg.params.critical_temperature(&cfg.domain).map_err(&err)?;
    let epsilons = match (&s.epsilons, &s.offsets) {
        (Some(e), _) => e.clone(),
        (None, Some(o)) => o.iter().map(|d| d / tc).collect(),
        (None, None) => {
            if !(s.eps_min > 0.0 && s.eps_max > s.eps_min) || s.points < 2 {
                return Err(cfg.invalid(Some("sweep"), "eps_min", "need 0 < eps_min < eps_max and points >= 2").into());
            }
            SweepConfig::geometric(s.eps_min, s.eps_max, s.points)
        }
    };
    let mut sc = SweepConfig::new(epsilons, s.modes, cfg.seed);
    sc.model = cfg.model(s.model);
    sc.scheme = s.scheme.into();
    sc.dt_scale = s.dt_scale;
    sc.max_steps = s.max_steps;
    sc.steady_tol = s.steady_tol;
    sc.init = InitialData::Random { amplitude: s.amplitude, band: s.band, seed: cfg.seed };
    let result = harness::sweep(&cfg.params, &cfg.domain, &sc).map_err(&err)?;

    let mut csv = String::from("epsilon,T,amplitude,predicted,steady,steps,t_final,max_abs_mass,max_energy_rise\n");
    for q in &result.points {
        let predicted = q.predicted.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{predicted},{},{},{:e},{:e},{:e}",
            q.epsilon, q.temperature, q.amplitude, q.steady, q.steps, q.t_final, q.max_abs_mass, q.max_energy_rise
        );
    }
    write_text(&cfg.output_dir, "sweep.csv", &csv)?;
    write_json(
        &cfg.output_dir,
        "sweep.json",
        &json!({ "schema_version": SCHEMA_VERSION, "seed": cfg.seed, "config": sc, "result": result }),
    )?;
    Ok(format!("Tc = {}, fitted exponent {} over {} temperatures\n", result.tc, result.slope, result.points.len()))
}

pub fn validate(cfg: &RunConfig) -> Result<String, CliError> {
    let v = &cfg.validate;
    let m = cfg.domain.multiplicity();
    let mut vc = ValidateConfig::new(v.epsilon, v.modes, m);
    vc.dt = v.dt;
    vc.scheme = v.scheme.into();
    vc.model = cfg.model(v.model);
    vc.initial_fraction = v.initial_fraction;
    if let Some(d) = &v.direction {
        vc.direction = d.clone();
    }
    vc.horizon = v.horizon;
    vc.substeps = v.substeps;
    vc.sigma = v.sigma.into();
    let rep = harness::validate(&cfg.params, &cfg.domain, &vc).map_err(lib(cfg, "validate"))?;

    let mut csv = format!("t{}{}\n", columns("pde_y", m), columns("reduced_y", m));
    for ((t, p), r) in rep.times.iter().zip(&rep.pde).zip(&rep.reduced) {
        let _ = writeln!(csv, "{t:e}{}{}", row(p), row(r));
    }
    write_text(&cfg.output_dir, "validate.csv", &csv)?;
    write_json(
        &cfg.output_dir,
        "validate.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "config": vc,
            "Tc": rep.tc,
            "T": rep.temperature,
            "beta": rep.beta,
            "amplitude": rep.amplitude,
            "horizon": rep.horizon,
            "max_deviation": rep.max_deviation,
            "relative_deviation": rep.relative_deviation,
        }),
    )?;
    Ok(format!(
        "max deviation {:e} = {:.3e} of the bifurcated amplitude over {} time units\n",
        rep.max_deviation, rep.relative_deviation, rep.horizon
    ))
}
