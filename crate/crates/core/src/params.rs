//! Physical inputs, the Taylor coefficients of the Hildebrand free energy and
//! the transition discriminants derived from them.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Number of samples used when checking a mobility profile's lower bound.
const PROFILE_SAMPLES: usize = 1001;

/// Concentration dependence of the Onsager mobility `H(s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityProfile<T> {
    /// `H(s) = sum_k coeffs[k] * (s - center)^k`.
    Polynomial { center: T, coeffs: Vec<T> },
    /// Piecewise-linear interpolation through `(s, H)` points, constant outside.
    Table { points: Vec<(T, T)> },
}

impl<T: Scalar> MobilityProfile<T> {
    pub fn polynomial(center: T, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("profile", "polynomial needs at least one coefficient"));
        }
        Ok(Self::Polynomial { center, coeffs })
    }

    pub fn table(mut points: Vec<(T, T)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("profile", "table needs at least two points"));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite table abscissae"));
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid("profile", "table abscissae must be distinct"));
        }
        Ok(Self::Table { points })
    }

    pub fn eval(&self, s: T) -> T {
        match self {
            Self::Polynomial { center, coeffs } => {
                let x = s - *center;
                coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
            }
            Self::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if s <= first.0 {
                    return first.1;
                }
                if s >= last.0 {
                    return last.1;
                }
                let i = points.partition_point(|p| p.0 <= s);
                let (s0, h0) = points[i - 1];
                let (s1, h1) = points[i];
                h0 + (h1 - h0) * (s - s0) / (s1 - s0)
            }
        }
    }

    /// `(H, H', H'')` at `s`. Exact for polynomials, central differences for tables.
    pub fn taylor(&self, s: T) -> (T, T, T) {
        match self {
            Self::Polynomial { center, coeffs } => {
                let x = s - *center;
                let mut d = [T::zero(); 3];
                for (k, &c) in coeffs.iter().enumerate() {
                    let kk = T::from_usize_lossy(k);
                    d[0] += c * x.powi(k as i32);
                    if k >= 1 {
                        d[1] += c * kk * x.powi(k as i32 - 1);
                    }
                    if k >= 2 {
                        d[2] += c * kk * (kk - T::one()) * x.powi(k as i32 - 2);
                    }
                }
                (d[0], d[1], d[2])
            }
            Self::Table { .. } => {
                let h = T::lit(1e-4);
                let (m, c, p) = (self.eval(s - h), self.eval(s), self.eval(s + h));
                (c, (p - m) / (h + h), (p - c - c + m) / (h * h))
            }
        }
    }

    /// Minimum of `H` over `samples` equispaced points of `[lo, hi]`.
    pub fn sampled_min(&self, lo: T, hi: T, samples: usize) -> T {
        let n = samples.max(2);
        (0..n)
            .map(|i| lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1))
            .map(|s| self.eval(s))
            .fold(T::infinity(), T::min)
    }
}

/// Onsager mobility: Taylor data at the mean fraction plus an optional full profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MobilitySpec<T> {
    pub(crate) h0: T,
    pub(crate) h1: T,
    pub(crate) h2: T,
    pub(crate) profile: Option<MobilityProfile<T>>,
}

impl<T: Scalar> MobilitySpec<T> {
    /// Taylor data only: `H(ubar)`, `H'(ubar)`, `H''(ubar)`.
    pub fn taylor(h0: T, h1: T, h2: T) -> Result<Self> {
        if !(h0 > T::zero()) {
            return Err(invalid("H0", format!("mobility H(ubar) must be positive, got {h0}")));
        }
        if !h1.is_finite() || !h2.is_finite() {
            return Err(invalid("H1/H2", "mobility derivatives must be finite"));
        }
        Ok(Self { h0, h1, h2, profile: None })
    }

    pub fn constant(h0: T) -> Result<Self> {
        Self::taylor(h0, T::zero(), T::zero())
    }

    /// Full profile; Taylor data is derived at `ubar`. The profile must stay
    /// above `lower_bound > 0` on the physical range `s in [0, 1]`.
    pub fn from_profile(profile: MobilityProfile<T>, ubar: T, lower_bound: T) -> Result<Self> {
        if !(lower_bound > T::zero()) {
            return Err(invalid("H_min", "declared mobility lower bound must be positive"));
        }
        let min = profile.sampled_min(T::zero(), T::one(), PROFILE_SAMPLES);
        if !(min >= lower_bound) {
            return Err(invalid(
                "profile",
                format!("sampled minimum {min} of H(s) on [0,1] is below the lower bound {lower_bound}"),
            ));
        }
        let (h0, h1, h2) = profile.taylor(ubar);
        let mut spec = Self::taylor(h0, h1, h2)?;
        spec.profile = Some(profile);
        Ok(spec)
    }

    pub fn h0(&self) -> T {
        self.h0
    }
    pub fn h1(&self) -> T {
        self.h1
    }
    pub fn h2(&self) -> T {
        self.h2
    }
    pub fn profile(&self) -> Option<&MobilityProfile<T>> {
        self.profile.as_ref()
    }

    /// `H(ubar + u)`: the full profile when present, else the quadratic Taylor polynomial.
    pub fn eval_deviation(&self, ubar: T, u: T) -> T {
        match &self.profile {
            Some(p) => p.eval(ubar + u),
            None => self.h0 + u * (self.h1 + T::lit(0.5) * self.h2 * u),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.profile.is_none() && self.h1 == T::zero() && self.h2 == T::zero()
    }
}

/// Physical constants of the binary system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalParams<T> {
    pub(crate) gas_constant: T,
    pub(crate) gamma: T,
    pub(crate) alpha: T,
    pub(crate) ubar: T,
    pub(crate) mobility: MobilitySpec<T>,
}

impl<T: Scalar> PhysicalParams<T> {
    pub fn new(gas_constant: T, gamma: T, alpha: T, ubar: T, mobility: MobilitySpec<T>) -> Result<Self> {
        if !(gas_constant > T::zero()) {
            return Err(invalid("R", "must be positive"));
        }
        if !(gamma > T::zero()) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(alpha > T::zero()) {
            return Err(invalid("alpha", "must be positive"));
        }
        if !(ubar > T::zero() && ubar < T::one()) {
            return Err(invalid("ubar", format!("must lie in (0, 1), got {ubar}")));
        }
        Ok(Self { gas_constant, gamma, alpha, ubar, mobility })
    }

    pub fn gas_constant(&self) -> T {
        self.gas_constant
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn ubar(&self) -> T {
        self.ubar
    }
    pub fn mobility(&self) -> &MobilitySpec<T> {
        &self.mobility
    }

    /// Same physical constants, different mobility.
    pub fn with_mobility(&self, mobility: MobilitySpec<T>) -> Self {
        Self { mobility, ..self.clone() }
    }

    /// Same constants, different mean fraction.
    pub fn with_ubar(&self, ubar: T) -> Result<Self> {
        Self::new(self.gas_constant, self.gamma, self.alpha, ubar, self.mobility.clone())
    }

    /// `ubar (1 - ubar)`.
    pub fn mixing_factor(&self) -> T {
        self.ubar * (T::one() - self.ubar)
    }

    /// Coefficients of `Psi'(ubar + u) = b1 u + b2 u^2 + b3 u^3 + ...` shifted by `-2 gamma`.
    pub fn coefficients(&self, temperature: T) -> Result<Coefficients<T>> {
        if !(temperature > T::zero()) {
            return Err(invalid("T", format!("temperature must be positive, got {temperature}")));
        }
        let rt = self.gas_constant * temperature;
        let u = self.ubar;
        let v = T::one() - u;
        let two = T::lit(2.0);
        Ok(Coefficients {
            b1: rt / (u * v) - two * self.gamma,
            b2: T::lit(0.5) * rt * (T::one() / (v * v) - T::one() / (u * u)),
            b3: rt / T::lit(3.0) * (T::one() / (v * v * v) + T::one() / (u * u * u)),
        })
    }

    /// Temperature at which the homogeneous state loses linear stability.
    pub fn critical_temperature(&self, domain: &DomainSpec<T>) -> Result<T> {
        let two_gamma = T::lit(2.0) * self.gamma;
        let threshold = self.alpha * domain.critical_eigenvalue();
        if !(two_gamma > threshold) {
            return Err(Error::NoSupercriticalRegime { two_gamma: two_gamma.as_f64(), threshold: threshold.as_f64() });
        }
        Ok(self.mixing_factor() * (two_gamma - threshold) / self.gas_constant)
    }

    /// `L^2 b2^2 / (alpha pi^2)`, the quantity every discriminant subtracts from `b3`.
    fn quadratic_shift(&self, domain: &DomainSpec<T>, c: &Coefficients<T>) -> T {
        c.b2 * c.b2 / (self.alpha * domain.critical_eigenvalue())
    }

    /// Cubic coefficients `(sigma1, sigma2)` of the reduced system at `temperature`.
    pub fn sigmas(&self, domain: &DomainSpec<T>, temperature: T) -> Result<(T, T)> {
        let c = self.coefficients(temperature)?;
        let x = self.quadratic_shift(domain, &c);
        Ok((T::lit(1.5) * c.b3 - x / T::lit(3.0), T::lit(3.0) * c.b3 - T::lit(4.0) * x))
    }

    /// `B1, B2, B3` at the critical temperature together with `sigma1, sigma2` there.
    pub fn discriminants(&self, domain: &DomainSpec<T>) -> Result<Discriminants<T>> {
        let tc = self.critical_temperature(domain)?;
        self.discriminants_at(domain, tc)
    }

    /// Discriminant expressions evaluated at an arbitrary temperature.
    pub fn discriminants_at(&self, domain: &DomainSpec<T>, temperature: T) -> Result<Discriminants<T>> {
        let tc = self.critical_temperature(domain)?;
        let c = self.coefficients(temperature)?;
        let x = self.quadratic_shift(domain, &c);
        let (sigma1, sigma2) = self.sigmas(domain, temperature)?;
        Ok(Discriminants {
            critical_temperature: tc,
            temperature,
            b1: c.b3 - T::lit(2.0 / 9.0) * x,
            b2: c.b3 - T::lit(26.0 / 27.0) * x,
            b3: c.b3 - T::lit(10.0 / 9.0) * x,
            sigma1,
            sigma2,
            cubic: c.b3,
            quadratic_shift: x,
        })
    }
}

/// `b1, b2, b3` at a given temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients<T> {
    pub b1: T,
    pub b2: T,
    pub b3: T,
}

/// Transition discriminants. `b1..b3` are the `B_i` numbers (not the free-energy
/// coefficients); `cubic` is `b3` of the free energy at the same temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discriminants<T> {
    pub critical_temperature: T,
    pub temperature: T,
    pub b1: T,
    pub b2: T,
    pub b3: T,
    pub sigma1: T,
    pub sigma2: T,
    pub cubic: T,
    pub quadratic_shift: T,
}

impl<T: Scalar> Discriminants<T> {
    pub fn as_array(&self) -> [T; 3] {
        [self.b1, self.b2, self.b3]
    }

    /// Discriminant governing the transition for critical multiplicity `m`.
    pub fn governing(&self, m: usize) -> T {
        match m {
            1 => self.b1,
            2 => self.b2,
            _ => self.b3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainCase {
    /// `L1 > L2 >= L3`: one critical mode.
    Distinct,
    /// `L1 = L2 > L3`: two critical modes.
    TwoEqual,
    /// `L1 = L2 = L3`: three critical modes.
    AllEqual,
}

impl DomainCase {
    pub fn multiplicity(self) -> usize {
        match self {
            Self::Distinct => 1,
            Self::TwoEqual => 2,
            Self::AllEqual => 3,
        }
    }
}

/// Box `(0,L1) x (0,L2) x (0,L3)` with `L1 >= L2 >= L3`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec<T> {
    pub(crate) lengths: [T; 3],
    pub(crate) case: DomainCase,
    pub(crate) tie_tolerance: T,
}

impl<T: Scalar> DomainSpec<T> {
    pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

    pub fn new(lengths: [T; 3]) -> Result<Self> {
        Self::with_tolerance(lengths, T::lit(Self::DEFAULT_TIE_TOLERANCE))
    }

    pub fn with_tolerance(lengths: [T; 3], tie_tolerance: T) -> Result<Self> {
        Self::check_lengths(&lengths, tie_tolerance)?;
        let case = Self::detect_case(&lengths, tie_tolerance);
        Ok(Self { lengths, case, tie_tolerance })
    }

    /// Explicit case; it must agree with the lengths under `tie_tolerance`.
    pub fn with_case(lengths: [T; 3], case: DomainCase, tie_tolerance: T) -> Result<Self> {
        let d = Self::with_tolerance(lengths, tie_tolerance)?;
        if d.case != case {
            return Err(Error::InvalidDomain(format!(
                "lengths {:?} fall in case {:?} under tolerance {}, not {:?}",
                lengths.map(|l| l.as_f64()),
                d.case,
                tie_tolerance,
                case
            )));
        }
        Ok(d)
    }

    fn check_lengths(lengths: &[T; 3], tol: T) -> Result<()> {
        if lengths.iter().any(|l| !(*l > T::zero()) || !l.is_finite()) {
            return Err(Error::InvalidDomain("edge lengths must be positive and finite".into()));
        }
        if !(tol >= T::zero()) {
            return Err(Error::InvalidDomain("tie tolerance must be non-negative".into()));
        }
        for w in lengths.windows(2) {
            if w[1] > w[0] && !Self::ties(w[0], w[1], tol) {
                return Err(Error::InvalidDomain(format!(
                    "lengths must be ordered L1 >= L2 >= L3, got {:?}",
                    lengths.map(|l| l.as_f64())
                )));
            }
        }
        Ok(())
    }

    fn ties(a: T, b: T, tol: T) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs())
    }

    fn detect_case(l: &[T; 3], tol: T) -> DomainCase {
        match (Self::ties(l[0], l[1], tol), Self::ties(l[0], l[2], tol)) {
            (true, true) => DomainCase::AllEqual,
            (true, false) => DomainCase::TwoEqual,
            _ => DomainCase::Distinct,
        }
    }

    pub fn lengths(&self) -> [T; 3] {
        self.lengths
    }
    pub fn case(&self) -> DomainCase {
        self.case
    }
    pub fn tie_tolerance(&self) -> T {
        self.tie_tolerance
    }
    pub fn multiplicity(&self) -> usize {
        self.case.multiplicity()
    }

    /// `L = L1`.
    pub fn length(&self) -> T {
        self.lengths[0]
    }

    pub fn volume(&self) -> T {
        self.lengths[0] * self.lengths[1] * self.lengths[2]
    }

    /// `pi^2 / L^2`, the Laplacian eigenvalue of every critical mode.
    pub fn critical_eigenvalue(&self) -> T {
        let r = T::PI() / self.length();
        r * r
    }
}
