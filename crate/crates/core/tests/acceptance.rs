//! Acceptance checks. Each check prints one line and the process exits
//! non-zero if any of them fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ch_onsager::classifier::{census_check, classify_transition, BifurcationSide, TransitionReport, TransitionType};
use ch_onsager::harness::{relax, sweep, validate, SweepConfig, SweepPoint, SweepResult, ValidateConfig};
use ch_onsager::linstab::critical_temperature_bisect;
use ch_onsager::manifold::{
    cm_coefficients, cm_coefficients_quotient, critical_vector_field, enumerate_equilibria, straight_line_orbits,
    ReducedState, SigmaMode,
};
use ch_onsager::params::{DomainSpec, MobilityProfile, MobilitySpec, PhysicalParams};
use ch_onsager::simulator::{Model, Scheme, SimState, Simulator, StepConfig};
use ch_onsager::spectral::{laplacian_eigenvalue, ModeIndex, SpectralField};
use ch_onsager::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn params(gamma: f64, ubar: f64) -> PhysicalParams<f64> {
    PhysicalParams::new(1.0, gamma, 1.0, ubar, MobilitySpec::constant(1.0).unwrap()).unwrap()
}

fn domain(l: [f64; 3]) -> DomainSpec<f64> {
    DomainSpec::new(l).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Draws a box whose first mode destabilizes at a positive temperature.
fn random_setup(rng: &mut ChaCha8Rng, m: usize) -> (PhysicalParams<f64>, DomainSpec<f64>) {
    let r = rng.gen_range(0.5..2.0);
    let gamma = rng.gen_range(0.5..5.0);
    let alpha = rng.gen_range(0.3..3.0);
    let ubar = rng.gen_range(0.05..0.95);
    let h0 = rng.gen_range(0.2..3.0);
    let h1 = rng.gen_range(-1.0..1.0);
    let h2 = rng.gen_range(-1.0..1.0);
    let f: f64 = rng.gen_range(0.1..0.9);
    let l1 = PI * (alpha / (2.0 * gamma * f)).sqrt();
    let l2 = if m >= 2 { l1 } else { l1 * rng.gen_range(0.3..0.95) };
    let l3 = if m == 3 { l1 } else { l2 * rng.gen_range(0.3..1.0) };
    let p = PhysicalParams::new(r, gamma, alpha, ubar, MobilitySpec::taylor(h0, h1, h2).unwrap()).unwrap();
    (p, domain([l1, l2, l3]))
}

/// Closed-form coefficients written out independently of the library.
struct Oracle {
    b3: f64,
    x: f64,
    tc: f64,
}

impl Oracle {
    fn new(p: &PhysicalParams<f64>, d: &DomainSpec<f64>) -> Self {
        let (r, g, a, u) = (p.gas_constant(), p.gamma(), p.alpha(), p.ubar());
        let l = d.lengths()[0];
        let tc = u * (1.0 - u) * (2.0 * g - a * PI * PI / (l * l)) / r;
        let b2 = 0.5 * r * tc * (1.0 / (1.0 - u).powi(2) - 1.0 / (u * u));
        let b3 = r * tc / 3.0 * (1.0 / (1.0 - u).powi(3) + 1.0 / u.powi(3));
        let x = l * l * b2 * b2 / (a * PI * PI);
        Self { b3, x, tc }
    }

    fn big_b(&self) -> [f64; 3] {
        [self.b3 - 2.0 * self.x / 9.0, self.b3 - 26.0 * self.x / 27.0, self.b3 - 10.0 * self.x / 9.0]
    }

    fn sigma(&self) -> (f64, f64) {
        (1.5 * self.b3 - self.x / 3.0, 3.0 * self.b3 - 4.0 * self.x)
    }

    /// Bifurcated single-mode amplitude at temperature `t`.
    fn amplitude(&self, p: &PhysicalParams<f64>, t: f64) -> f64 {
        let u = p.ubar();
        (4.0 * p.gas_constant() * (self.tc - t) / (3.0 * self.big_b()[0] * u * (1.0 - u))).sqrt()
    }
}

fn tc_agreement() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (p, d) = random_setup(&mut rng, 1 + i % 3);
        let tc = p.critical_temperature(&d)?;
        let hi = 4.0 * p.gamma() * p.mixing_factor() / p.gas_constant();
        let bisect = critical_temperature_bisect(&p, &d, (1e-9, hi), 8)?;
        worst = worst.max(rel(tc, bisect));
    }
    outcome(worst <= 1e-10, format!("100 sets, worst relative |dTc| = {worst:.2e} (tol 1e-10)"))
}

fn sigma_identities() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_identity, mut worst_oracle): (f64, f64) = (0.0, 0.0);
    for i in 0..1000 {
        let (p, d) = random_setup(&mut rng, 1 + i % 3);
        let disc = p.discriminants(&d)?;
        let oracle = Oracle::new(&p, &d);
        let scale = oracle.b3.abs() + oracle.x.abs();
        let (s1, s2) = (disc.sigma1, disc.sigma2);
        for e in [s1 - 1.5 * disc.b1, s1 + s2 - 4.5 * disc.b2, s1 + 2.0 * s2 - 7.5 * disc.b3] {
            worst_identity = worst_identity.max(e.abs() / scale);
        }
        let (o1, o2) = oracle.sigma();
        let ob = oracle.big_b();
        for (a, b) in [(s1, o1), (s2, o2), (disc.b1, ob[0]), (disc.b2, ob[1]), (disc.b3, ob[2])] {
            worst_oracle = worst_oracle.max((a - b).abs() / scale);
        }
    }
    let worst = worst_identity.max(worst_oracle);
    outcome(
        worst <= 1e-12,
        format!("1000 draws, identities {worst_identity:.2e}, vs closed form {worst_oracle:.2e} (tol 1e-12)"),
    )
}

fn center_manifold() -> Result<Outcome> {
    let cases: [([f64; 3], f64); 5] = [
        ([PI, 2.0, 1.0], 1.0),
        ([PI, PI, 1.0], 1.0),
        ([PI, PI, PI], 1.0),
        ([4.0, 3.0, 2.0], 2.0),
        ([3.0, 3.0, 3.0], 3.0),
    ];
    let y = [0.3, -0.2, 0.15];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (lengths, gamma) in cases {
        let d = domain(lengths);
        for ubar in [0.1, 0.3, 0.45, 0.6, 0.85] {
            let p = params(gamma, ubar);
            let tc = p.critical_temperature(&d)?;
            let state = ReducedState::new(y[..d.multiplicity()].to_vec(), tc)?;
            let lead = cm_coefficients(&state, &p, &d)?;
            let quot = cm_coefficients_quotient(&state, &p, &d)?;
            for &(k, v) in &lead.phi {
                worst = worst.max(rel(v, quot.get(k)));
                count += 1;
            }
        }
    }
    outcome(worst <= 1e-8, format!("{count} coefficients over 5 boxes, worst relative error {worst:.2e} (tol 1e-8)"))
}

fn regime_label(r: &TransitionReport<f64>) -> String {
    match (r.m, r.transition_type) {
        (1, TransitionType::TypeI) => "m1:I".into(),
        (1, TransitionType::TypeII) => "m1:II".into(),
        (2, TransitionType::TypeI) => "m2:I".into(),
        (2, TransitionType::TypeII) if r.side == BifurcationSide::Above => "m2:II-above".into(),
        (2, TransitionType::TypeII) => "m2:II-split".into(),
        (_, TransitionType::TypeI) => format!("m3:I-{}", r.minimal_attractors.map_or(0, |n| n)),
        (_, TransitionType::TypeII) => format!("m3:II-{}", r.census.above.total),
    }
}

fn equilibrium_census() -> Result<Outcome> {
    let boxes = [[PI, 2.0, 1.0], [PI, PI, 1.0], [PI, PI, PI]];
    let mut seen = BTreeSet::new();
    let mut failures = Vec::new();
    let mut checked = 0;
    for gamma in [1.0, 2.0, 5.0] {
        for i in 0..49 {
            let ubar = 0.02 + 0.02 * i as f64;
            let p = params(gamma, ubar);
            for lengths in boxes {
                let d = domain(lengths);
                let report = classify_transition(&p, &d)?;
                let check = census_check(&report, &p, &d, report.tc * 0.99)?;
                let full = 3usize.pow(report.m as u32) - 1;
                let below = enumerate_equilibria(&p, &d, report.tc * 0.99, SigmaMode::Critical)?;
                let above = enumerate_equilibria(&p, &d, report.tc * 1.01, SigmaMode::Critical)?;
                let bifurcated = below.points.len() + above.points.len();
                checked += 1;
                if !check.matches() || check.degenerate > 0 || bifurcated != full {
                    failures.push(format!(
                        "gamma={gamma} ubar={ubar:.2} L={lengths:?}: {:?}, degenerate {}, bifurcated {bifurcated}",
                        check.mismatches, check.degenerate
                    ));
                }
                seen.insert(regime_label(&report));
            }
        }
    }
    let expected: BTreeSet<String> =
        ["m1:I", "m1:II", "m2:I", "m2:II-split", "m2:II-above", "m3:I-6", "m3:I-8", "m3:II-8", "m3:II-20", "m3:II-26"]
            .into_iter()
            .map(String::from)
            .collect();
    let missing: Vec<_> = expected.difference(&seen).cloned().collect();
    let mut detail = format!("{checked} configurations, {} regimes covered", seen.len());
    if !missing.is_empty() {
        detail += &format!(", missing {missing:?}");
    }
    if let Some(f) = failures.first() {
        detail += &format!(", {} failures, first: {f}", failures.len());
    }
    outcome(failures.is_empty() && missing.is_empty(), detail)
}

fn cross_norm(y: &[f64], f: &[f64]) -> f64 {
    match y.len() {
        2 => (y[0] * f[1] - y[1] * f[0]).abs(),
        _ => {
            let c = [y[1] * f[2] - y[2] * f[1], y[2] * f[0] - y[0] * f[2], y[0] * f[1] - y[1] * f[0]];
            c.iter().map(|v| v * v).sum::<f64>().sqrt()
        }
    }
}

/// Invariant lines found by scanning the circle for sign changes of `y x f(y)`.
fn scan_lines_m2(p: &PhysicalParams<f64>, d: &DomainSpec<f64>, tc: f64) -> Result<usize> {
    let n = 3600;
    let g = |theta: f64| -> Result<f64> {
        let y = vec![theta.cos(), theta.sin()];
        let f = critical_vector_field(&ReducedState::new(y.clone(), tc)?, p, d)?;
        Ok(y[0] * f[1] - y[1] * f[0])
    };
    let theta0 = 0.0123;
    let mut prev = g(theta0)?;
    let mut roots = 0;
    for i in 1..=n {
        let cur = g(theta0 + PI * i as f64 / n as f64)?;
        if prev.signum() != cur.signum() {
            roots += 1;
        }
        prev = cur;
    }
    Ok(roots)
}

fn line_invariance() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut scans = Vec::new();
    let lines2 = straight_line_orbits::<f64>(2);
    let lines3 = straight_line_orbits::<f64>(3);
    for (gamma, ubar) in [(1.0, 0.3), (2.0, 0.45), (5.0, 0.12), (5.0, 0.7)] {
        let p = params(gamma, ubar);
        for (d, lines) in [(domain([PI, PI, 1.0]), &lines2), (domain([PI, PI, PI]), &lines3)] {
            let tc = p.critical_temperature(&d)?;
            for dir in lines.iter() {
                for scale in [1e-3, 0.1, 1.0, 10.0] {
                    let y: Vec<f64> = dir.iter().map(|v| v * scale).collect();
                    let f = critical_vector_field(&ReducedState::new(y.clone(), tc)?, &p, &d)?;
                    let fn_ = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if fn_ > 0.0 {
                        worst = worst.max(cross_norm(&y, &f) / (fn_ * scale));
                    }
                }
            }
            if d.multiplicity() == 2 {
                scans.push(scan_lines_m2(&p, &d, tc)?);
            }
        }
    }
    let distinct =
        |lines: &[Vec<f64>]| lines.iter().enumerate().all(|(i, a)| lines[..i].iter().all(|b| cross_norm(a, b) > 1e-6));
    let pass = worst <= 1e-12
        && lines2.len() == 4
        && lines3.len() == 13
        && distinct(&lines2)
        && distinct(&lines3)
        && scans.iter().all(|&n| n == 4);
    outcome(
        pass,
        format!(
            "{} + {} lines ({} + {} orbits), worst |y x f|/|y||f| = {worst:.2e} (tol 1e-12), circle scans {scans:?}",
            lines2.len(),
            lines3.len(),
            2 * lines2.len(),
            2 * lines3.len()
        ),
    )
}

const MODES: [usize; 3] = [32, 32, 32];
const SEED: u64 = 7;

struct ProfileRun {
    name: &'static str,
    report: TransitionReport<f64>,
    point: SweepPoint<f64>,
    sweep: SweepResult<f64>,
}

fn profile_run(name: &'static str, mobility: MobilitySpec<f64>, model: Model) -> Result<ProfileRun> {
    let p = params(1.0, 0.5).with_mobility(mobility);
    let d = domain([PI, 2.0, 1.0]);
    let mut cfg = SweepConfig::new(SweepConfig::geometric(0.01, 0.08, 8), MODES, SEED);
    cfg.model = model;
    let report = classify_transition(&p, &d)?;
    let point = relax(&p, &d, &cfg, 0.04)?;
    let sweep = sweep(&p, &d, &cfg)?;
    Ok(ProfileRun { name, report, point, sweep })
}

fn amplitude_law(run: &ProfileRun) -> Result<Outcome> {
    let p = params(1.0, 0.5);
    let d = domain([PI, 2.0, 1.0]);
    let oracle = Oracle::new(&p, &d);
    let law = oracle.amplitude(&p, run.point.temperature);
    let err = rel(run.point.amplitude, law);
    let slope = run.sweep.slope;
    let all_steady = run.point.steady && run.sweep.points.iter().all(|q| q.steady);
    outcome(
        err <= 0.1 && (slope - 0.5).abs() <= 0.02 && all_steady,
        format!(
            "eps=0.04: amplitude {:.5} vs law {law:.5} (rel {err:.3}, tol 0.1); slope {slope:.4} over eps in [0.01, 0.08] (tol 0.5 +- 0.02); steady {all_steady}",
            run.point.amplitude
        ),
    )
}

fn mobility_independence(runs: &[ProfileRun]) -> Result<Outcome> {
    let base = &runs[0];
    let mut worst: f64 = 0.0;
    let mut reports_equal = true;
    let mut slopes = Vec::new();
    for run in runs {
        let r = &run.report;
        let b = &base.report;
        reports_equal &= r.tc == b.tc
            && r.b == b.b
            && r.sigma == b.sigma
            && r.transition_type == b.transition_type
            && r.side == b.side
            && r.census == b.census
            && r.amplitude_law == b.amplitude_law;
        worst = worst.max(rel(run.point.amplitude, base.point.amplitude));
        for (q, q0) in run.sweep.points.iter().zip(&base.sweep.points) {
            worst = worst.max(rel(q.amplitude, q0.amplitude));
        }
        slopes.push(format!("{} {:.4}", run.name, run.sweep.slope));
    }
    let slopes_ok = runs.iter().all(|r| (r.sweep.slope - 0.5).abs() <= 0.02);
    outcome(
        reports_equal && worst <= 0.05 && slopes_ok,
        format!(
            "{} profiles, classifier outputs identical: {reports_equal}, worst amplitude spread {worst:.2e} (tol 0.05), slopes [{}]",
            runs.len(),
            slopes.join(", ")
        ),
    )
}

fn conservation(runs: &[ProfileRun]) -> Result<Outcome> {
    let points = runs.iter().flat_map(|r| std::iter::once(&r.point).chain(&r.sweep.points));
    let (mut mass, mut rise, mut n) = (0.0f64, f64::NEG_INFINITY, 0);
    for q in points {
        mass = mass.max(q.max_abs_mass);
        rise = rise.max(q.max_energy_rise);
        n += 1;
    }
    outcome(
        mass <= 1e-12 && rise <= 1e-8,
        format!("{n} runs, max |mass| {mass:.2e} (tol 1e-12), max relative energy rise per step {rise:.2e} (tol 1e-8)"),
    )
}

fn shadowing() -> Result<Outcome> {
    let p1 = params(1.0, 0.5);
    let d1 = domain([PI, 2.0, 1.0]);
    let r1 = validate(&p1, &d1, &ValidateConfig::new(0.02, [32, 16, 8], 1))?;
    let p2 = params(1.0, 0.45);
    let d2 = domain([PI, PI, 1.0]);
    let r2 = validate(&p2, &d2, &ValidateConfig::new(0.02, [32, 32, 8], 2))?;
    let worst = r1.relative_deviation.max(r2.relative_deviation);
    outcome(
        worst <= 0.05,
        format!(
            "eps=0.02: m=1 max deviation {:.2e}, m=2 {:.2e} of the bifurcated amplitude (tol 0.05)",
            r1.relative_deviation, r2.relative_deviation
        ),
    )
}

fn linear_spectrum() -> Result<Outcome> {
    let shape = [12, 12, 12];
    let p = PhysicalParams::new(1.0, 1.0, 1.0, 0.5, MobilitySpec::taylor(1.3, 0.4, 0.8)?)?;
    let d = domain([PI, 2.0, 1.0]);
    let mut modes: Vec<(ModeIndex, f64)> =
        ModeIndex::all_up_to(6).filter(|k| k.k() != [0, 0, 0]).map(|k| (k, laplacian_eigenvalue(k, &d))).collect();
    modes.sort_by(|a, b| a.1.total_cmp(&b.1));
    modes.truncate(20);
    let mut worst: f64 = 0.0;
    for temperature in [0.26, 0.24] {
        let b1 = p.gas_constant() * temperature / (p.ubar() * (1.0 - p.ubar())) - 2.0 * p.gamma();
        let rates: Vec<f64> = modes.iter().map(|&(_, rho)| -1.3 * rho * (b1 + p.alpha() * rho)).collect();
        let max_rate = rates.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        let dt = 0.02 / max_rate;
        let init: Vec<(ModeIndex, f64)> =
            modes.iter().enumerate().map(|(i, &(k, _))| (k, if i % 2 == 0 { 1e-6 } else { -1e-6 })).collect();
        let u = SpectralField::from_modes(shape, &init)?;
        let cfg = StepConfig::new(dt, shape).with_scheme(Scheme::Imex2);
        let sim = Simulator::new(&p, &d, temperature, &cfg)?;
        let mut s = SimState::new(u, temperature, p.clone(), d.clone())?;
        s = sim.step(&s)?;
        for _ in 0..8 {
            let next = sim.step(&s)?;
            for (&(k, _), &beta) in modes.iter().zip(&rates) {
                let factor = next.u.get(k) / s.u.get(k);
                worst = worst.max(rel(factor, (beta * dt).exp()));
            }
            s = next;
        }
    }
    outcome(
        worst <= 1e-3,
        format!("20 modes at T = 0.26 and 0.24, amplitude 1e-6, worst relative factor error {worst:.2e} (tol 1e-3)"),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, budget: Duration, run: &mut dyn FnMut() -> Result<Outcome>| {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{id:>2}] {} {name}: {detail} [{:.2} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        pass
    };
    let secs = Duration::from_secs;
    report(1, "critical temperature vs bisection", secs(1), &mut tc_agreement);
    report(2, "sigma-B identities", secs(1), &mut sigma_identities);
    report(3, "center manifold vs quotient form", secs(5), &mut center_manifold);
    report(4, "equilibrium census", secs(10), &mut equilibrium_census);
    report(5, "straight-line orbits", secs(1), &mut line_invariance);

    let mut runs: Vec<ProfileRun> = Vec::new();
    report(6, "pitchfork amplitude law", secs(300), &mut || {
        let base = profile_run("constant", MobilitySpec::constant(1.0)?, Model::Truncated)?;
        let o = amplitude_law(&base);
        runs.push(base);
        o
    });
    report(7, "mobility independence", secs(900), &mut || {
        if runs.is_empty() {
            return outcome(false, "no reference run".into());
        }
        let linear = MobilityProfile::polynomial(0.5, vec![1.0, 0.6])?;
        let quadratic = MobilityProfile::polynomial(0.5, vec![1.2, 0.5, 1.0])?;
        runs.push(profile_run("linear", MobilitySpec::from_profile(linear, 0.5, 0.1)?, Model::Divergence)?);
        runs.push(profile_run("quadratic", MobilitySpec::from_profile(quadratic, 0.5, 0.1)?, Model::Divergence)?);
        mobility_independence(&runs)
    });
    report(8, "conservation and dissipation", secs(300), &mut || {
        if runs.is_empty() {
            return outcome(false, "no simulation runs".into());
        }
        conservation(&runs)
    });
    let start = Instant::now();
    match profile_run("quadratic-taylor", MobilitySpec::taylor(1.2, 0.5, 2.0).unwrap(), Model::Truncated) {
        Ok(run) if !runs.is_empty() => {
            let base = &runs[0];
            let spread = run
                .sweep
                .points
                .iter()
                .zip(&base.sweep.points)
                .fold(rel(run.point.amplitude, base.point.amplitude), |a, (q, q0)| {
                    a.max(rel(q.amplitude, q0.amplitude))
                });
            let rise = run.sweep.points.iter().fold(run.point.max_energy_rise, |a, q| a.max(q.max_energy_rise));
            println!(
                "[--] INFO truncated model, Taylor data (1.2, 0.5, 2.0): amplitude spread vs constant {spread:.2e}, slope {:.4}, max energy rise per step {rise:.2e} (not a gradient flow) [{:.2} s]",
                run.sweep.slope,
                start.elapsed().as_secs_f64()
            );
        }
        Ok(_) => println!("[--] INFO truncated model: no reference run"),
        Err(e) => println!("[--] INFO truncated model: error: {e}"),
    }
    report(9, "reduced-system shadowing", secs(600), &mut shadowing);
    report(10, "linear-regime spectrum", secs(30), &mut linear_spectrum);

    println!("{} of 10 criteria failed", failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
