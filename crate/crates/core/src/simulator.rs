//! Pseudospectral time stepping for the full equation on the box.
//!
//! The state is the deviation `u` from the mean fraction, held as cosine
//! coefficients. The linear part `-H0 (alpha Delta^2 - b1 Delta)` is diagonal and
//! treated implicitly; everything else is formed on a (by default 2x padded)
//! cell-centred grid and treated explicitly.
//!
//! Two right-hand sides are offered:
//!
//! * [`Model::Truncated`]: `div[H0 grad mu0 + H1 u grad mu1 + H2/2 u^2 grad mu2]`
//!   with `mu0 = -alpha Lap u + b1 u + b2 u^2 + b3 u^3` and `mu1`, `mu2` dropping
//!   the cubic and then the quadratic term.
//! * [`Model::Divergence`]: `div[H(ubar + u) grad mu0]` with the full profile
//!   (or the quadratic Taylor polynomial when no profile is given).
//!
//! Chemical potentials entering a flux are projected onto the retained modes first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::params::{Coefficients, DomainSpec, PhysicalParams};
use crate::scalar::Scalar;
use crate::spectral::{AxisKind, CosineTransform, GridField, ModeIndex, SpectralField, Transform3, ALL_COS};

/// Smallest truncation per axis: room for the critical modes and their first harmonics.
pub const MIN_MODES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Backward/forward Euler.
    #[default]
    Imex1,
    /// Crank–Nicolson / second-order Adams–Bashforth. The first step falls back to `Imex1`.
    Imex2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Truncated,
    Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepConfig<T> {
    pub dt: T,
    pub scheme: Scheme,
    pub model: Model,
    /// `s` in the stabilizing term `s Delta^2 (u^{n+1} - u^n)`.
    pub stab_biharmonic: T,
    /// `S` in the stabilizing term `-S Delta (u^{n+1} - u^n)`.
    pub stab_laplacian: T,
    /// Retained cosine modes per axis.
    pub modes: [usize; 3],
    /// Evaluate products on a grid of twice the truncation.
    pub dealias: bool,
}

impl<T: Scalar> StepConfig<T> {
    pub fn new(dt: T, modes: [usize; 3]) -> Self {
        Self {
            dt,
            scheme: Scheme::Imex1,
            model: Model::Truncated,
            stab_biharmonic: T::zero(),
            stab_laplacian: T::zero(),
            modes,
            dealias: true,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.stab_biharmonic >= T::zero()) || !(self.stab_laplacian >= T::zero()) {
            return Err(invalid("stabilization", "stabilization parameters must be non-negative"));
        }
        if self.modes.iter().any(|&n| n < MIN_MODES) {
            return Err(invalid("modes", format!("need at least {MIN_MODES} modes per axis, got {:?}", self.modes)));
        }
        Ok(())
    }

    pub fn points(&self) -> [usize; 3] {
        if self.dealias {
            self.modes.map(|n| 2 * n)
        } else {
            self.modes
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct History<T> {
    u: Vec<T>,
    explicit: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub u: SpectralField<T>,
    pub t: T,
    pub temperature: T,
    pub params: PhysicalParams<T>,
    pub domain: DomainSpec<T>,
    history: Option<History<T>>,
}

impl<T: Scalar> SimState<T> {
    pub fn new(u: SpectralField<T>, temperature: T, params: PhysicalParams<T>, domain: DomainSpec<T>) -> Result<Self> {
        if !(temperature > T::zero()) {
            return Err(invalid("T", format!("temperature must be positive, got {temperature}")));
        }
        if !u.is_finite() {
            return Err(invalid("u", "initial field has non-finite coefficients"));
        }
        Ok(Self { u, t: T::zero(), temperature, params, domain, history: None })
    }

    /// Drops the multistep history, e.g. after editing `u` by hand.
    pub fn reset_history(&mut self) {
        self.history = None;
    }

    /// Coefficients of the first `m` unit modes.
    pub fn mode_amplitudes(&self, m: usize) -> Vec<T> {
        (0..m).map(|j| self.u.get(ModeIndex::unit(j))).collect()
    }
}

/// Initial data for [`SimState`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData<T> {
    /// Coefficients uniform in `[-amplitude, amplitude]` on modes with every `k_i <= band`.
    Random {
        amplitude: T,
        band: u32,
        seed: u64,
    },
    Modes(Vec<(ModeIndex, T)>),
}

pub fn initial_field<T: Scalar>(shape: [usize; 3], init: &InitialData<T>) -> Result<SpectralField<T>> {
    match init {
        InitialData::Modes(modes) => SpectralField::from_modes(shape, modes),
        InitialData::Random { amplitude, band, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut f = SpectralField::zeros(shape);
            let b = *band as usize;
            for k1 in 0..shape[0].min(b + 1) {
                for k2 in 0..shape[1].min(b + 1) {
                    for k3 in 0..shape[2].min(b + 1) {
                        if k1 + k2 + k3 == 0 {
                            continue;
                        }
                        let r: f64 = rng.gen_range(-1.0..1.0);
                        f.set(ModeIndex::new(k1 as u32, k2 as u32, k3 as u32)?, *amplitude * T::lit(r))?;
                    }
                }
            }
            Ok(f)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics<T> {
    pub t: T,
    pub mass: T,
    pub energy: T,
    pub energy_dissipation: T,
    pub mode_amplitudes: Vec<T>,
}

/// Per-step quantities available at no extra cost while stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo<T> {
    /// Energy of the state the step started from.
    pub energy: T,
    /// Grid mean of the state the step started from.
    pub mass: T,
    /// `||(u^{n+1} - u^n) / dt||` over the coefficients.
    pub rate: T,
}

/// Precomputed operators for one `(params, domain, T, config)` combination.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    config: StepConfig<T>,
    params: PhysicalParams<T>,
    domain: DomainSpec<T>,
    temperature: T,
    coeffs: Coefficients<T>,
    modes: [usize; 3],
    transform: Transform3<T>,
    rho: Vec<T>,
    lambda: Vec<T>,
    stab: Vec<T>,
    norm_sq: Vec<T>,
    wavenumbers: [Vec<T>; 3],
}

impl<T: Scalar> Simulator<T> {
    pub fn new(
        params: &PhysicalParams<T>,
        domain: &DomainSpec<T>,
        temperature: T,
        config: &StepConfig<T>,
    ) -> Result<Self> {
        config.validate()?;
        let coeffs = params.coefficients(temperature)?;
        let modes = config.modes;
        let lengths = domain.lengths();
        let wavenumbers: [Vec<T>; 3] =
            [0, 1, 2].map(|a| (0..modes[a]).map(|k| T::from_usize_lossy(k) * T::PI() / lengths[a]).collect());
        let len: usize = modes.iter().product();
        let (mut rho, mut norm_sq) = (Vec::with_capacity(len), Vec::with_capacity(len));
        let volume = domain.volume();
        for k1 in 0..modes[0] {
            for k2 in 0..modes[1] {
                for k3 in 0..modes[2] {
                    let w = [wavenumbers[0][k1], wavenumbers[1][k2], wavenumbers[2][k3]];
                    rho.push(w.iter().fold(T::zero(), |a, &x| a + x * x));
                    let active = [k1, k2, k3].iter().filter(|&&k| k > 0).count() as i32;
                    norm_sq.push(volume * T::lit(0.5).powi(active));
                }
            }
        }
        let h0 = params.mobility().h0();
        let alpha = params.alpha();
        let lambda = rho.iter().map(|&r| -h0 * (alpha * r * r + coeffs.b1 * r)).collect();
        let stab = rho.iter().map(|&r| config.stab_biharmonic * r * r + config.stab_laplacian * r).collect();
        Ok(Self {
            config: config.clone(),
            params: params.clone(),
            domain: domain.clone(),
            temperature,
            coeffs,
            modes,
            transform: Transform3::new(modes, config.points()),
            rho,
            lambda,
            stab,
            norm_sq,
            wavenumbers,
        })
    }

    /// Builds a simulator matching the state's parameters.
    pub fn for_state(s: &SimState<T>, config: &StepConfig<T>) -> Result<Self> {
        if s.u.shape() != config.modes {
            return Err(Error::ShapeMismatch { expected: config.modes.to_vec(), found: s.u.shape().to_vec() });
        }
        Self::new(&s.params, &s.domain, s.temperature, config)
    }

    pub fn config(&self) -> &StepConfig<T> {
        &self.config
    }

    /// Implicit linear rate of mode `k`, equal to its growth rate `beta_K(T)`.
    pub fn linear_rate(&self, k: ModeIndex) -> Option<T> {
        self.index(k).map(|i| self.lambda[i])
    }

    fn index(&self, k: ModeIndex) -> Option<usize> {
        let [a, b, c] = k.k().map(|x| x as usize);
        let [n1, n2, n3] = self.modes;
        (a < n1 && b < n2 && c < n3).then(|| (a * n2 + b) * n3 + c)
    }

    fn check(&self, s: &SimState<T>) -> Result<()> {
        if s.u.shape() != self.modes {
            return Err(Error::ShapeMismatch { expected: self.modes.to_vec(), found: s.u.shape().to_vec() });
        }
        if s.temperature != self.temperature {
            return Err(invalid("T", "state temperature differs from the simulator's"));
        }
        Ok(())
    }

    fn grid(&self, coeffs: &[T]) -> Vec<T> {
        self.transform.synthesize(coeffs, ALL_COS)
    }

    fn project(&self, values: &[T]) -> Vec<T> {
        let mut c = self.transform.analyze(values, ALL_COS);
        c[0] = T::zero();
        c
    }

    /// `d/dx_axis` of a cosine series, sampled on the grid.
    fn gradient(&self, coeffs: &[T], axis: usize) -> Vec<T> {
        let [_, n2, n3] = self.modes;
        let w = &self.wavenumbers[axis];
        let scaled: Vec<T> = coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let k = [i / (n2 * n3), (i / n3) % n2, i % n3][axis];
                -w[k] * c
            })
            .collect();
        let mut kinds = ALL_COS;
        kinds[axis] = AxisKind::Sin;
        self.transform.synthesize(&scaled, kinds)
    }

    /// Cosine coefficients of `div F` for a flux sampled on the grid, `F_i` odd in `x_i`.
    fn divergence(&self, flux: &[Vec<T>; 3]) -> Vec<T> {
        let [_, n2, n3] = self.modes;
        let mut out = vec![T::zero(); self.rho.len()];
        for (axis, f) in flux.iter().enumerate() {
            let mut kinds = ALL_COS;
            kinds[axis] = AxisKind::Sin;
            let c = self.transform.analyze(f, kinds);
            let w = &self.wavenumbers[axis];
            for (i, (o, v)) in out.iter_mut().zip(c).enumerate() {
                let k = [i / (n2 * n3), (i / n3) % n2, i % n3][axis];
                *o += w[k] * v;
            }
        }
        out[0] = T::zero();
        out
    }

    /// Linear part of the chemical potential, `(alpha rho + b1) u_K`.
    fn mu_linear(&self, u: &[T]) -> Vec<T> {
        let (alpha, b1) = (self.params.alpha(), self.coeffs.b1);
        u.iter().zip(&self.rho).map(|(&c, &r)| (alpha * r + b1) * c).collect()
    }

    /// `mu_N = P_N mu` from the coefficients and the grid samples of `u`.
    fn mu_from(&self, u: &[T], grid: &[T]) -> Vec<T> {
        let (b2, b3) = (self.coeffs.b2, self.coeffs.b3);
        let poly: Vec<T> = grid.iter().map(|&v| v * v * (b2 + b3 * v)).collect();
        let mut mu = self.mu_linear(u);
        for (m, p) in mu.iter_mut().zip(self.project(&poly)) {
            *m += p;
        }
        mu
    }

    /// Everything except the implicit diagonal part, as cosine coefficients.
    fn explicit(&self, u: &[T], grid: &[T]) -> Vec<T> {
        let (b2, b3) = (self.coeffs.b2, self.coeffs.b3);
        let h0 = self.params.mobility().h0();
        let mobility = self.params.mobility();
        let sq: Vec<T> = grid.iter().map(|&v| v * v).collect();
        let needs_quadratic_mu = self.config.model == Model::Truncated && mobility.h1() != T::zero();
        let (quad, poly) = if needs_quadratic_mu {
            let cube: Vec<T> = grid.iter().zip(&sq).map(|(&v, &s)| v * s).collect();
            let q = self.project(&sq);
            let c = self.project(&cube);
            let p: Vec<T> = q.iter().zip(&c).map(|(&q, &c)| b2 * q + b3 * c).collect();
            (Some(q), p)
        } else {
            let p: Vec<T> = grid.iter().zip(&sq).map(|(&v, &s)| s * (b2 + b3 * v)).collect();
            (None, self.project(&p))
        };
        let mut out: Vec<T> = poly.iter().zip(&self.rho).map(|(&p, &r)| -h0 * r * p).collect();

        let flux = match self.config.model {
            Model::Truncated => {
                let (h1, h2) = (mobility.h1(), mobility.h2());
                if h1 == T::zero() && h2 == T::zero() {
                    None
                } else {
                    let mu2 = self.mu_linear(u);
                    let mut flux: [Vec<T>; 3] = Default::default();
                    for (axis, f) in flux.iter_mut().enumerate() {
                        let g2 = self.gradient(&mu2, axis);
                        let g1 = match &quad {
                            Some(q) => {
                                let mu1: Vec<T> = mu2.iter().zip(q).map(|(&m, &q)| m + b2 * q).collect();
                                self.gradient(&mu1, axis)
                            }
                            None => vec![T::zero(); g2.len()],
                        };
                        *f = (0..g2.len()).map(|i| h1 * grid[i] * g1[i] + T::lit(0.5) * h2 * sq[i] * g2[i]).collect();
                    }
                    Some(flux)
                }
            }
            Model::Divergence => {
                if mobility.is_constant() {
                    None
                } else {
                    let ubar = self.params.ubar();
                    let mut mu0 = self.mu_linear(u);
                    for (m, p) in mu0.iter_mut().zip(&poly) {
                        *m += *p;
                    }
                    let excess: Vec<T> = grid.iter().map(|&v| mobility.eval_deviation(ubar, v) - h0).collect();
                    let mut flux: [Vec<T>; 3] = Default::default();
                    for (axis, f) in flux.iter_mut().enumerate() {
                        let g = self.gradient(&mu0, axis);
                        *f = g.iter().zip(&excess).map(|(&g, &e)| g * e).collect();
                    }
                    Some(flux)
                }
            }
        };
        if let Some(flux) = flux {
            for (o, d) in out.iter_mut().zip(self.divergence(&flux)) {
                *o += d;
            }
        }
        out
    }

    /// Energy from coefficients plus grid samples; exact for the quartic density on the padded grid.
    fn energy_from(&self, u: &[T], grid: &[T]) -> T {
        let (alpha, b1, b2, b3) = (self.params.alpha(), self.coeffs.b1, self.coeffs.b2, self.coeffs.b3);
        let half = T::lit(0.5);
        let quadratic = u
            .iter()
            .zip(&self.rho)
            .zip(&self.norm_sq)
            .fold(T::zero(), |a, ((&c, &r), &n)| a + (alpha * r + b1) * half * c * c * n);
        let density = grid.iter().fold(T::zero(), |a, &v| {
            let v2 = v * v;
            a + v2 * v * (b2 / T::lit(3.0) + b3 * T::lit(0.25) * v)
        });
        quadratic + self.domain.volume() * density / T::from_usize_lossy(grid.len())
    }

    fn mean(grid: &[T]) -> T {
        grid.iter().fold(T::zero(), |a, &v| a + v) / T::from_usize_lossy(grid.len())
    }

    /// Advances one step and reports quantities of the starting state.
    pub fn advance(&self, s: &SimState<T>) -> Result<(SimState<T>, StepInfo<T>)> {
        self.check(s)?;
        let dt = self.config.dt;
        let u0 = s.u.as_slice();
        let grid = self.grid(u0);
        let n0 = self.explicit(u0, &grid);
        let half = T::lit(0.5);
        let next: Vec<T> = match (&s.history, self.config.scheme) {
            (Some(h), Scheme::Imex2) => (0..u0.len())
                .map(|i| {
                    let (l, st) = (self.lambda[i], self.stab[i]);
                    let rhs = (T::one() + half * dt * l) * u0[i]
                        + dt * (T::lit(1.5) * n0[i] - half * h.explicit[i])
                        + dt * st * (T::lit(2.0) * u0[i] - h.u[i]);
                    rhs / (T::one() - half * dt * l + dt * st)
                })
                .collect(),
            _ => (0..u0.len())
                .map(|i| {
                    let (l, st) = (self.lambda[i], self.stab[i]);
                    (u0[i] + dt * (n0[i] + st * u0[i])) / (T::one() - dt * l + dt * st)
                })
                .collect(),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepRejected { t: s.t.as_f64(), reason: "non-finite coefficients".into() });
        }
        let rate = next.iter().zip(u0).fold(T::zero(), |a, (&x, &y)| a + (x - y) * (x - y)).sqrt() / dt;
        let info = StepInfo { energy: self.energy_from(u0, &grid), mass: Self::mean(&grid), rate };
        let history = (self.config.scheme == Scheme::Imex2).then(|| History { u: u0.to_vec(), explicit: n0 });
        let state = SimState {
            u: SpectralField::from_dense(self.modes, next)?,
            t: s.t + dt,
            temperature: s.temperature,
            params: s.params.clone(),
            domain: s.domain.clone(),
            history,
        };
        Ok((state, info))
    }

    pub fn step(&self, s: &SimState<T>) -> Result<SimState<T>> {
        self.advance(s).map(|(s, _)| s)
    }

    pub fn free_energy(&self, s: &SimState<T>) -> Result<T> {
        self.check(s)?;
        let u = s.u.as_slice();
        Ok(self.energy_from(u, &self.grid(u)))
    }

    pub fn mass(&self, s: &SimState<T>) -> Result<T> {
        self.check(s)?;
        Ok(Self::mean(&self.grid(s.u.as_slice())))
    }

    pub fn chemical_potential(&self, s: &SimState<T>) -> Result<SpectralField<T>> {
        self.check(s)?;
        let u = s.u.as_slice();
        SpectralField::from_dense(self.modes, self.mu_from(u, &self.grid(u)))
    }

    /// `-int H |grad mu_N|^2`, with `H` the Taylor polynomial for the truncated
    /// model and the full profile for the divergence model.
    pub fn dissipation(&self, s: &SimState<T>) -> Result<T> {
        self.check(s)?;
        let u = s.u.as_slice();
        let grid = self.grid(u);
        let mu = self.mu_from(u, &grid);
        let mob = self.params.mobility();
        let ubar = self.params.ubar();
        let h: Vec<T> = grid
            .iter()
            .map(|&v| match self.config.model {
                Model::Truncated => mob.h0() + v * (mob.h1() + T::lit(0.5) * mob.h2() * v),
                Model::Divergence => mob.eval_deviation(ubar, v),
            })
            .collect();
        let mut acc = vec![T::zero(); grid.len()];
        for axis in 0..3 {
            for (a, g) in acc.iter_mut().zip(self.gradient(&mu, axis)) {
                *a += g * g;
            }
        }
        let sum = acc.iter().zip(&h).fold(T::zero(), |a, (&g, &h)| a + g * h);
        Ok(-self.domain.volume() * sum / T::from_usize_lossy(grid.len()))
    }

    pub fn diagnostics(&self, s: &SimState<T>) -> Result<Diagnostics<T>> {
        self.check(s)?;
        let u = s.u.as_slice();
        let grid = self.grid(u);
        Ok(Diagnostics {
            t: s.t,
            mass: Self::mean(&grid),
            energy: self.energy_from(u, &grid),
            energy_dissipation: self.dissipation(s)?,
            mode_amplitudes: s.mode_amplitudes(self.domain.multiplicity()),
        })
    }
}

/// One step with a freshly built [`Simulator`]; prefer reusing a simulator in loops.
pub fn step<T: Scalar>(s: &SimState<T>, c: &StepConfig<T>) -> Result<SimState<T>> {
    Simulator::for_state(s, c)?.step(s)
}

pub fn free_energy<T: Scalar>(s: &SimState<T>) -> Result<T> {
    Simulator::for_state(s, &StepConfig::new(T::one(), s.u.shape()))?.free_energy(s)
}

pub fn chemical_potential<T: Scalar>(s: &SimState<T>) -> Result<SpectralField<T>> {
    Simulator::for_state(s, &StepConfig::new(T::one(), s.u.shape()))?.chemical_potential(s)
}

/// Dissipation under the full mobility (profile when present).
pub fn dissipation<T: Scalar>(s: &SimState<T>) -> Result<T> {
    let c = StepConfig::new(T::one(), s.u.shape()).with_model(Model::Divergence);
    Simulator::for_state(s, &c)?.dissipation(s)
}

/// Samples `u` on the unpadded cell-centred grid.
pub fn grid_snapshot<T: Scalar>(s: &SimState<T>) -> Result<GridField<T>> {
    CosineTransform::new(s.u.shape()).inverse(&s.u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateOptions<T> {
    pub t_end: T,
    /// Record diagnostics every this many steps (and at the end). Zero records only the ends.
    pub record_every: usize,
    /// Stop once `||du/dt|| < tol (1 + ||u||)`.
    pub steady_tol: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub records: Vec<Diagnostics<T>>,
    pub final_state: SimState<T>,
    pub steps: usize,
    pub steady: bool,
    /// Largest `|mass|` over every step.
    pub max_abs_mass: T,
    /// Largest `(G_{n+1} - G_n) / (1 + |G_n|)` over every step.
    pub max_energy_rise: T,
}

pub fn simulate<T: Scalar>(s0: &SimState<T>, c: &StepConfig<T>, opts: &SimulateOptions<T>) -> Result<Trajectory<T>> {
    let sim = Simulator::for_state(s0, c)?;
    simulate_with(&sim, s0, opts)
}

pub fn simulate_with<T: Scalar>(
    sim: &Simulator<T>,
    s0: &SimState<T>,
    opts: &SimulateOptions<T>,
) -> Result<Trajectory<T>> {
    let dt = sim.config().dt;
    let total = (opts.t_end / dt).round().to_usize().unwrap_or(0);
    let mut state = s0.clone();
    let mut records = vec![sim.diagnostics(&state)?];
    let mut max_abs_mass = T::zero();
    let mut max_energy_rise = T::neg_infinity();
    let mut last_energy: Option<T> = None;
    let mut steady = false;
    let mut steps = 0;
    while steps < total {
        let (next, info) = sim.advance(&state)?;
        max_abs_mass = max_abs_mass.max(info.mass.abs());
        if let Some(e) = last_energy {
            max_energy_rise = max_energy_rise.max((info.energy - e) / (T::one() + e.abs()));
        }
        last_energy = Some(info.energy);
        steps += 1;
        state = next;
        if let Some(tol) = opts.steady_tol {
            if info.rate < tol * (T::one() + state.u.coeff_norm()) {
                steady = true;
                break;
            }
        }
        if opts.record_every > 0 && steps % opts.record_every == 0 && steps < total {
            records.push(sim.diagnostics(&state)?);
        }
    }
    let last = sim.diagnostics(&state)?;
    max_abs_mass = max_abs_mass.max(last.mass.abs());
    if let Some(e) = last_energy {
        max_energy_rise = max_energy_rise.max((last.energy - e) / (T::one() + e.abs()));
    }
    records.push(last);
    Ok(Trajectory { records, final_state: state, steps, steady, max_abs_mass, max_energy_rise })
}
