//! Center-manifold reduction onto the critical modes.
//!
//! With `y` the amplitudes of the critical modes `e_J`, the reduced dynamics is
//!
//! ```text
//! dy_J/dt = beta_J(T) y_J - c y_J (sigma1 y_J^2 + sigma2 sum_{L != J} y_L^2),   c = H(ubar) pi^2 / (2 L^2)
//! ```
//!
//! truncated at cubic order. It is the gradient flow of a quartic potential.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linstab::{growth_rate, growth_rate_for_eigenvalue};
use crate::params::{DomainSpec, PhysicalParams};
use crate::scalar::Scalar;
use crate::spectral::{laplacian_eigenvalue, mode_l2_norm_sq, triple_product, ModeIndex, SpectralField};

/// Where the cubic coefficients `sigma1, sigma2` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// At the temperature of the state.
    #[default]
    Ambient,
    /// Frozen at the critical temperature.
    Critical,
}

/// Amplitudes on the critical eigenspace, ordered as the critical set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedState<T> {
    pub y: Vec<T>,
    pub temperature: T,
}

impl<T: Scalar> ReducedState<T> {
    pub fn new(y: Vec<T>, temperature: T) -> Result<Self> {
        if y.is_empty() || y.len() > 3 {
            return Err(invalid("y", format!("reduced state needs 1 to 3 components, got {}", y.len())));
        }
        Ok(Self { y, temperature })
    }
}

/// Leading-order center-manifold function, supported on `{J + L : J, L critical}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldCoeffs<T> {
    pub phi: Vec<(ModeIndex, T)>,
    /// `|T - T_c| / T_c < 0.1`; outside this window the approximation is not trusted.
    pub near_critical: bool,
}

impl<T: Scalar> ManifoldCoeffs<T> {
    pub fn get(&self, k: ModeIndex) -> T {
        self.phi.iter().find(|(m, _)| *m == k).map_or(T::zero(), |(_, v)| *v)
    }

    /// Embeds `u_c + Phi` into a spectral field.
    pub fn lift(&self, y: &[T], shape: [usize; 3]) -> Result<SpectralField<T>> {
        let mut f = SpectralField::zeros(shape);
        for (j, &yj) in y.iter().enumerate() {
            f.set(ModeIndex::unit(j), yj)?;
        }
        for &(k, v) in &self.phi {
            f.set(k, f.get(k) + v)?;
        }
        Ok(f)
    }
}

fn check_dimension<T: Scalar>(state: &ReducedState<T>, d: &DomainSpec<T>) -> Result<()> {
    if state.y.len() != d.multiplicity() {
        return Err(invalid(
            "y",
            format!("state has {} components but the critical set has {}", state.y.len(), d.multiplicity()),
        ));
    }
    Ok(())
}

/// Pairs `(J, L)` with `J <= L` over the critical set, and `K = J + L`.
fn second_order_support(m: usize) -> impl Iterator<Item = (usize, usize, ModeIndex)> {
    (0..m).flat_map(move |j| (j..m).map(move |l| (j, l, ModeIndex::unit(j).sum(ModeIndex::unit(l)))))
}

/// `Phi_{2J} = -b2 y_J^2 / (6 alpha rho_J)`, `Phi_{J+L} = -2 b2 y_J y_L / (alpha rho_J)`.
pub fn cm_coefficients<T: Scalar>(
    state: &ReducedState<T>,
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
) -> Result<ManifoldCoeffs<T>> {
    check_dimension(state, d)?;
    let tc = p.critical_temperature(d)?;
    let b2 = p.coefficients(state.temperature)?.b2;
    let alpha_rho = p.alpha() * d.critical_eigenvalue();
    let y = &state.y;
    let phi = second_order_support(y.len())
        .map(|(j, l, k)| {
            let v = if j == l {
                -b2 * y[j] * y[j] / (T::lit(6.0) * alpha_rho)
            } else {
                -T::lit(2.0) * b2 * y[j] * y[l] / alpha_rho
            };
            (k, v)
        })
        .collect();
    Ok(ManifoldCoeffs { phi, near_critical: near_critical(state.temperature, tc) })
}

/// Unexpanded quotient form
/// `Phi_K = H b2 rho_K / (beta_K <e_K,e_K>) sum_{J,L} y_J y_L int e_J e_L e_K`,
/// with triple products by quadrature and `beta_K` at the state temperature.
pub fn cm_coefficients_quotient<T: Scalar>(
    state: &ReducedState<T>,
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
) -> Result<ManifoldCoeffs<T>> {
    check_dimension(state, d)?;
    let tc = p.critical_temperature(d)?;
    let b2 = p.coefficients(state.temperature)?.b2;
    let h = p.mobility().h0();
    let m = state.y.len();
    let phi = second_order_support(m)
        .map(|(_, _, k)| {
            let rho = laplacian_eigenvalue(k, d);
            let beta = growth_rate(k, state.temperature, p, d);
            let mut sum = T::zero();
            for j in 0..m {
                for l in 0..m {
                    let tp = triple_product(ModeIndex::unit(j), ModeIndex::unit(l), k, d);
                    sum += state.y[j] * state.y[l] * tp;
                }
            }
            (k, h * b2 * rho * sum / (beta * mode_l2_norm_sq(k, d)))
        })
        .collect();
    Ok(ManifoldCoeffs { phi, near_critical: near_critical(state.temperature, tc) })
}

fn near_critical<T: Scalar>(t: T, tc: T) -> bool {
    ((t - tc) / tc).abs() < T::lit(0.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Attractor,
    Saddle,
    Repeller,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium<T> {
    pub y_star: Vec<T>,
    /// Eigenvalues of the reduced Jacobian, ascending.
    pub jacobian_eigs: Vec<T>,
    /// Stability within the reduced system.
    pub kind: EquilibriumKind,
    /// Indices with `y_J != 0`.
    pub support: Vec<usize>,
    pub residual: T,
}

impl<T: Scalar> Equilibrium<T> {
    /// In the full system the non-critical directions are all stable, so any
    /// unstable reduced direction makes the point a saddle.
    pub fn is_full_system_saddle(&self) -> bool {
        matches!(self.kind, EquilibriumKind::Saddle | EquilibriumKind::Repeller)
    }

    pub fn amplitude(&self) -> T {
        self.y_star.iter().fold(T::zero(), |a, &v| a + v * v).sqrt()
    }
}

/// Result of solving the steady-state equations over every support pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibria<T> {
    pub points: Vec<Equilibrium<T>>,
    /// Support patterns whose amplitude equation `a1 + (s-1) a2` vanishes.
    pub singular_patterns: Vec<Vec<usize>>,
}

/// Reduced cubic system at a fixed temperature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSystem<T> {
    m: usize,
    temperature: T,
    beta: T,
    prefactor: T,
    sigma: (T, T),
    sigma_critical: (T, T),
}

impl<T: Scalar> ReducedSystem<T> {
    pub fn new(p: &PhysicalParams<T>, d: &DomainSpec<T>, temperature: T, mode: SigmaMode) -> Result<Self> {
        let tc = p.critical_temperature(d)?;
        let sigma_critical = p.sigmas(d, tc)?;
        let sigma = match mode {
            SigmaMode::Ambient => p.sigmas(d, temperature)?,
            SigmaMode::Critical => sigma_critical,
        };
        let rho = d.critical_eigenvalue();
        Ok(Self {
            m: d.multiplicity(),
            temperature,
            beta: growth_rate_for_eigenvalue(rho, temperature, p),
            prefactor: p.mobility().h0() * rho * T::lit(0.5),
            sigma,
            sigma_critical,
        })
    }

    pub fn dimension(&self) -> usize {
        self.m
    }
    pub fn temperature(&self) -> T {
        self.temperature
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    /// `H(ubar) pi^2 / (2 L^2)`.
    pub fn prefactor(&self) -> T {
        self.prefactor
    }
    pub fn sigma(&self) -> (T, T) {
        self.sigma
    }
    pub fn a1(&self) -> T {
        self.prefactor * self.sigma.0
    }
    pub fn a2(&self) -> T {
        self.prefactor * self.sigma.1
    }

    fn field_with(&self, y: &[T], beta: T, (s1, s2): (T, T)) -> Vec<T> {
        let total: T = y.iter().fold(T::zero(), |a, &v| a + v * v);
        y.iter()
            .map(|&yj| {
                let own = yj * yj;
                beta * yj - self.prefactor * yj * (s1 * own + s2 * (total - own))
            })
            .collect()
    }

    pub fn vector_field(&self, y: &[T]) -> Vec<T> {
        self.field_with(y, self.beta, self.sigma)
    }

    /// Field at `T = T_c`: no linear term and `sigma` frozen at `T_c`.
    pub fn critical_vector_field(&self, y: &[T]) -> Vec<T> {
        self.field_with(y, T::zero(), self.sigma_critical)
    }

    pub fn jacobian(&self, y: &[T]) -> Vec<Vec<T>> {
        let (a1, a2) = (self.a1(), self.a2());
        let total: T = y.iter().fold(T::zero(), |a, &v| a + v * v);
        (0..y.len())
            .map(|j| {
                (0..y.len())
                    .map(|l| {
                        if j == l {
                            let own = y[j] * y[j];
                            self.beta - T::lit(3.0) * a1 * own - a2 * (total - own)
                        } else {
                            -T::lit(2.0) * a2 * y[j] * y[l]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `V(y) = -beta |y|^2 / 2 + c (sigma1/4 sum y_J^4 + sigma2/2 sum_{J<L} y_J^2 y_L^2)`; the field is `-grad V`.
    pub fn potential(&self, y: &[T]) -> T {
        let quartic = y.iter().fold(T::zero(), |a, &v| a + v.powi(4));
        let mut cross = T::zero();
        for j in 0..y.len() {
            for l in j + 1..y.len() {
                cross += y[j] * y[j] * y[l] * y[l];
            }
        }
        let norm_sq = y.iter().fold(T::zero(), |a, &v| a + v * v);
        -self.beta * norm_sq * T::lit(0.5)
            + self.prefactor * (self.sigma.0 * quartic * T::lit(0.25) + self.sigma.1 * cross * T::lit(0.5))
    }

    /// Every non-zero steady state, found in closed form pattern by pattern:
    /// on a support of size `s`, `y_J^2 = beta / (a1 + (s-1) a2)`.
    pub fn equilibria(&self) -> Equilibria<T> {
        let (a1, a2) = (self.a1(), self.a2());
        let scale = a1.abs().max(a2.abs()).max(T::min_positive_value());
        let mut points = Vec::new();
        let mut singular_patterns = Vec::new();
        for mask in 1usize..(1 << self.m) {
            let support: Vec<usize> = (0..self.m).filter(|j| mask & (1 << j) != 0).collect();
            let s = support.len();
            let denom = a1 + T::from_usize_lossy(s - 1) * a2;
            if denom.abs() <= T::tiny() * scale {
                singular_patterns.push(support);
                continue;
            }
            let y_sq = self.beta / denom;
            if !(y_sq > T::zero()) {
                continue;
            }
            let amp = y_sq.sqrt();
            for signs in 0usize..(1 << s) {
                let mut y = vec![T::zero(); self.m];
                for (bit, &j) in support.iter().enumerate() {
                    y[j] = if signs & (1 << bit) != 0 { -amp } else { amp };
                }
                points.push(self.describe(y, support.clone()));
            }
        }
        Equilibria { points, singular_patterns }
    }

    fn describe(&self, y: Vec<T>, support: Vec<usize>) -> Equilibrium<T> {
        let residual = self.vector_field(&y).into_iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let eigs = symmetric_eigenvalues(self.jacobian(&y));
        let tol = T::lit(1e-9) * self.beta.abs().max(T::min_positive_value());
        let kind = if eigs.iter().any(|e| e.abs() <= tol) {
            EquilibriumKind::Degenerate
        } else if eigs.iter().all(|&e| e < T::zero()) {
            EquilibriumKind::Attractor
        } else if eigs.iter().all(|&e| e > T::zero()) {
            EquilibriumKind::Repeller
        } else {
            EquilibriumKind::Saddle
        };
        Equilibrium { y_star: y, jacobian_eigs: eigs, kind, support, residual }
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(mut a: Vec<Vec<T>>) -> Vec<T> {
    let n = a.len();
    for _ in 0..64 {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |s, (i, j)| s + a[i][j] * a[i][j]);
        let diag = (0..n).fold(T::zero(), |s, i| s + a[i][i] * a[i][i]);
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for (k, (&apk, &aqk)) in rp.iter().zip(&rq).enumerate() {
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<T> = (0..n).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eigs
}

/// `dy/dt` of the reduced system at the state's temperature (ambient `sigma`).
pub fn reduced_vector_field<T: Scalar>(
    state: &ReducedState<T>,
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
) -> Result<Vec<T>> {
    check_dimension(state, d)?;
    Ok(ReducedSystem::new(p, d, state.temperature, SigmaMode::Ambient)?.vector_field(&state.y))
}

pub fn critical_vector_field<T: Scalar>(
    state: &ReducedState<T>,
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
) -> Result<Vec<T>> {
    check_dimension(state, d)?;
    let tc = p.critical_temperature(d)?;
    Ok(ReducedSystem::new(p, d, tc, SigmaMode::Critical)?.critical_vector_field(&state.y))
}

pub fn enumerate_equilibria<T: Scalar>(
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
    temperature: T,
    mode: SigmaMode,
) -> Result<Equilibria<T>> {
    Ok(ReducedSystem::new(p, d, temperature, mode)?.equilibria())
}

/// Unit directions of the straight lines that are invariant under the
/// critical field for every `sigma1 != sigma2`: coordinate axes, in-plane
/// diagonals and (for `m = 3`) space diagonals. Each line carries two orbits.
pub fn straight_line_orbits<T: Scalar>(m: usize) -> Vec<Vec<T>> {
    let mut lines: Vec<Vec<i8>> = Vec::new();
    match m {
        1 => lines.push(vec![1]),
        2 => lines.extend([vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]]),
        3 => {
            lines.extend([vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                for sign in [1, -1] {
                    let mut v = vec![0i8; 3];
                    v[i] = 1;
                    v[j] = sign;
                    lines.push(v);
                }
            }
            for s2 in [1, -1] {
                for s3 in [1, -1] {
                    lines.push(vec![1, s2, s3]);
                }
            }
        }
        _ => {}
    }
    lines
        .into_iter()
        .map(|v| {
            let norm = T::from_usize_lossy(v.iter().filter(|&&c| c != 0).count()).sqrt();
            v.into_iter().map(|c| T::from_i8(c).unwrap() / norm).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// The orbit left every bounded neighbourhood (finite-time blow-up of the cubic truncation).
    pub escaped: bool,
}

impl<T: Scalar> ReducedTrajectory<T> {
    pub fn last(&self) -> &[T] {
        self.states.last().expect("trajectory holds the initial point")
    }
}

/// Escape radius for the reduced integrator, in multiples of `max(1, sqrt(|beta / a1|))`.
const ESCAPE_FACTOR: f64 = 1e3;

/// One classical RK4 step.
pub fn rk4_step<T: Scalar>(f: impl Fn(&[T]) -> Vec<T>, y: &[T], dt: T) -> Vec<T> {
    let axpy = |a: &[T], k: &[T], h: T| a.iter().zip(k).map(|(&x, &v)| x + h * v).collect::<Vec<T>>();
    let half = dt * T::lit(0.5);
    let k1 = f(y);
    let k2 = f(&axpy(y, &k1, half));
    let k3 = f(&axpy(y, &k2, half));
    let k4 = f(&axpy(y, &k3, dt));
    (0..y.len()).map(|i| y[i] + dt / T::lit(6.0) * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i])).collect()
}

/// Fixed-step RK4 integration of the reduced system.
pub fn integrate_reduced<T: Scalar>(
    y0: &ReducedState<T>,
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
    dt: T,
    steps: usize,
    mode: SigmaMode,
) -> Result<ReducedTrajectory<T>> {
    check_dimension(y0, d)?;
    let sys = ReducedSystem::new(p, d, y0.temperature, mode)?;
    if !(dt > T::zero()) || !(dt * sys.beta().abs() < T::lit(0.1)) {
        return Err(invalid("dt", format!("need 0 < dt and dt*|beta| < 0.1 (beta = {})", sys.beta())));
    }
    let natural = if sys.a1() != T::zero() { (sys.beta() / sys.a1()).abs().sqrt() } else { T::one() };
    let radius = T::lit(ESCAPE_FACTOR) * natural.max(T::one());
    let mut times = vec![T::zero()];
    let mut states = vec![y0.y.clone()];
    let mut escaped = false;
    let mut y = y0.y.clone();
    for n in 1..=steps {
        let next = rk4_step(|v| sys.vector_field(v), &y, dt);
        if next.iter().any(|v| !v.is_finite() || v.abs() > radius) {
            escaped = true;
            break;
        }
        y = next;
        times.push(dt * T::from_usize_lossy(n));
        states.push(y.clone());
    }
    Ok(ReducedTrajectory { times, states, escaped })
}
