//! Linearized spectrum about the homogeneous state and the critical mode set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{DomainSpec, PhysicalParams};
use crate::scalar::Scalar;
use crate::spectral::{laplacian_eigenvalue, ModeIndex};

/// Relative gap in `rho` below which a non-critical mode is considered tied with the critical one.
const AMBIGUITY_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRate<T> {
    pub mode: ModeIndex,
    pub beta: T,
}

/// `beta_K(T) = H(ubar) rho_K (2 gamma - R T / (ubar (1 - ubar)) - alpha rho_K)`.
pub fn growth_rate<T: Scalar>(k: ModeIndex, temperature: T, p: &PhysicalParams<T>, d: &DomainSpec<T>) -> T {
    growth_rate_for_eigenvalue(laplacian_eigenvalue(k, d), temperature, p)
}

pub(crate) fn growth_rate_for_eigenvalue<T: Scalar>(rho: T, temperature: T, p: &PhysicalParams<T>) -> T {
    let two_gamma = T::lit(2.0) * p.gamma();
    p.mobility().h0() * rho * (two_gamma - p.gas_constant() * temperature / p.mixing_factor() - p.alpha() * rho)
}

/// Largest growth rate over all modes with `k_i <= k_max`.
pub fn max_growth_rate<T: Scalar>(
    temperature: T,
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
    k_max: u32,
) -> GrowthRate<T> {
    ModeIndex::all_up_to(k_max)
        .map(|mode| GrowthRate { mode, beta: growth_rate(mode, temperature, p, d) })
        .max_by(|a, b| a.beta.partial_cmp(&b.beta).expect("finite growth rates"))
        .expect("scan contains at least one mode")
}

/// Modes whose growth rate vanishes at the critical temperature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CriticalSet {
    pub modes: Vec<ModeIndex>,
}

impl CriticalSet {
    pub fn m(&self) -> usize {
        self.modes.len()
    }
}

/// `{(1,0,0)}`, `{(1,0,0),(0,1,0)}` or all three unit modes, following the domain case.
///
/// Fails when a non-critical unit mode's eigenvalue is within a relative
/// `1e-8` of the critical one without being tied under the domain tolerance.
pub fn critical_set<T: Scalar>(p: &PhysicalParams<T>, d: &DomainSpec<T>) -> Result<CriticalSet> {
    p.critical_temperature(d)?;
    let m = d.multiplicity();
    let rho_c = d.critical_eigenvalue();
    for axis in m..3 {
        let rho = laplacian_eigenvalue(ModeIndex::unit(axis), d);
        if (rho - rho_c).abs() <= T::lit(AMBIGUITY_GAP) * rho_c {
            return Err(Error::AmbiguousCriticalSet(format!(
                "mode {} has rho = {} within {AMBIGUITY_GAP:e} of the critical {} but the lengths {:?} \
                 are not tied under tolerance {}",
                ModeIndex::unit(axis),
                rho,
                rho_c,
                d.lengths().map(|l| l.as_f64()),
                d.tie_tolerance()
            )));
        }
    }
    Ok(CriticalSet { modes: (0..m).map(ModeIndex::unit).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PesScan<T> {
    pub k_max: u32,
    pub temperatures: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PesViolation<T> {
    pub mode: ModeIndex,
    pub temperature: T,
    pub beta: T,
    pub reason: String,
}

/// Outcome of a finite check of the exchange-of-stabilities sign pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PesReport<T> {
    #[serde(rename = "Tc")]
    pub tc: T,
    pub critical_modes: Vec<ModeIndex>,
    /// `min_{K not critical} |beta_K(T_c)|` over the scan.
    pub margin: T,
    /// Mode attaining the margin.
    pub margin_mode: Option<ModeIndex>,
    /// Whether `alpha rho_K > 2 gamma` holds beyond the scan, making every
    /// unscanned mode provably stable.
    pub tail_certified: bool,
    pub violations: Vec<PesViolation<T>>,
}

impl<T: Scalar> PesReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.tail_certified
    }
}

pub fn verify_pes<T: Scalar>(p: &PhysicalParams<T>, d: &DomainSpec<T>, scan: &PesScan<T>) -> Result<PesReport<T>> {
    let tc = p.critical_temperature(d)?;
    let critical = critical_set(p, d)?;
    let mut violations = Vec::new();
    let mut margin = T::infinity();
    let mut margin_mode = None;
    // beta_K(T_c) of a critical mode is zero up to rounding of the closed form.
    let zero_tol = T::tiny() * p.mobility().h0() * d.critical_eigenvalue() * p.gamma();

    for mode in ModeIndex::all_up_to(scan.k_max) {
        let is_critical = critical.modes.contains(&mode);
        let at_tc = growth_rate(mode, tc, p, d);
        if is_critical {
            if at_tc.abs() > zero_tol {
                violations.push(PesViolation {
                    mode,
                    temperature: tc,
                    beta: at_tc,
                    reason: "critical mode does not vanish at Tc".into(),
                });
            }
            for &t in &scan.temperatures {
                let beta = growth_rate(mode, t, p, d);
                let bad = (t > tc && !(beta < T::zero())) || (t < tc && !(beta > T::zero()));
                if bad {
                    violations.push(PesViolation {
                        mode,
                        temperature: t,
                        beta,
                        reason: "critical mode has the wrong sign off Tc".into(),
                    });
                }
            }
        } else {
            if !(at_tc < T::zero()) {
                violations.push(PesViolation {
                    mode,
                    temperature: tc,
                    beta: at_tc,
                    reason: "non-critical mode is not stable at Tc".into(),
                });
            }
            if at_tc.abs() < margin {
                margin = at_tc.abs();
                margin_mode = Some(mode);
            }
        }
    }

    // Smallest eigenvalue outside the scan cube is (k_max+1)^2 pi^2 / L1^2.
    let next = T::from_u32(scan.k_max + 1).unwrap() * T::PI() / d.length();
    let tail_certified = p.alpha() * next * next > T::lit(2.0) * p.gamma();

    Ok(PesReport { tc, critical_modes: critical.modes, margin, margin_mode, tail_certified, violations })
}

/// Root of `T -> max_K beta_K(T)` on `bracket` by bisection; independent of the closed form.
pub fn critical_temperature_bisect<T: Scalar>(
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
    bracket: (T, T),
    k_max: u32,
) -> Result<T> {
    let f = |t: T| max_growth_rate(t, p, d, k_max).beta;
    let (mut lo, mut hi) = bracket;
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let lo_positive = f(lo) > T::zero();
    if lo_positive == (f(hi) > T::zero()) || !(lo > T::zero()) {
        return Err(Error::NoSignChange { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::lit(0.5) * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MobilitySpec;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn canonical() -> (PhysicalParams<f64>, DomainSpec<f64>) {
        (
            PhysicalParams::new(1.0, 1.0, 1.0, 0.5, MobilitySpec::constant(1.0).unwrap()).unwrap(),
            DomainSpec::new([PI, 2.0, 1.0]).unwrap(),
        )
    }

    #[test]
    fn growth_rate_examples() {
        let (p, d) = canonical();
        let j = ModeIndex::unit(0);
        assert!(growth_rate(j, 0.25, &p, &d).abs() < 1e-15);
        assert_relative_eq!(growth_rate(j, 0.24, &p, &d), 0.04, max_relative = 1e-12);
        let k = ModeIndex::new(2, 0, 0).unwrap();
        assert_relative_eq!(growth_rate(k, 0.25, &p, &d), -12.0, max_relative = 1e-14);
    }

    #[test]
    fn critical_sets_follow_the_domain() {
        let p = PhysicalParams::new(1.0, 2.0, 1.0, 0.5, MobilitySpec::constant(1.0).unwrap()).unwrap();
        let cases = [([PI, 2.0, 1.0], 1), ([2.0, 2.0, 1.0], 2), ([2.0, 2.0, 2.0], 3)];
        for (l, m) in cases {
            let d = DomainSpec::new(l).unwrap();
            assert_eq!(critical_set(&p, &d).unwrap().m(), m);
        }
    }

    #[test]
    fn near_tie_is_ambiguous() {
        let p = PhysicalParams::new(1.0, 2.0, 1.0, 0.5, MobilitySpec::constant(1.0).unwrap()).unwrap();
        let d = DomainSpec::new([2.0, 2.0 * (1.0 - 1e-10), 1.0]).unwrap();
        assert!(matches!(critical_set(&p, &d), Err(Error::AmbiguousCriticalSet(_))));
    }

    #[test]
    fn pes_on_canonical_parameters() {
        let (p, d) = canonical();
        let scan = PesScan { k_max: 8, temperatures: vec![0.24, 0.26] };
        let r = verify_pes(&p, &d, &scan).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        // brute force over the scan, straight from the growth-rate formula
        let tc = 0.25;
        let oracle = ModeIndex::all_up_to(8)
            .filter(|k| k.k() != [1, 0, 0])
            .map(|k| {
                let [a, b, c] = k.k().map(f64::from);
                let rho = a * a + b * b * PI * PI / 4.0 + c * c * PI * PI;
                (rho * (2.0 - tc / 0.25 - rho)).abs()
            })
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(r.margin, oracle, max_relative = 1e-12);
        // the short axis, not the first harmonic, sets the margin on this box
        assert_eq!(r.margin_mode, Some(ModeIndex::new(0, 1, 0).unwrap()));
        assert_relative_eq!(r.margin, PI * PI / 4.0 * (PI * PI / 4.0 - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn sign_counts_around_tc() {
        let (p, d) = canonical();
        let positive = |t: f64| ModeIndex::all_up_to(8).filter(|&k| growth_rate(k, t, &p, &d) > 0.0).count();
        assert_eq!(positive(0.26), 0);
        assert_eq!(positive(0.24), 1);
    }

    #[test]
    fn bisection_finds_tc() {
        let (p, d) = canonical();
        let t = critical_temperature_bisect(&p, &d, (0.01, 1.0), 8).unwrap();
        assert!((t - 0.25).abs() < 1e-10);
        assert!(critical_temperature_bisect(&p, &d, (0.3, 1.0), 8).is_err());
    }

    #[test]
    fn growth_rate_decreases_with_temperature() {
        let (p, d) = canonical();
        for k in ModeIndex::all_up_to(4) {
            assert!(growth_rate(k, 0.2, &p, &d) > growth_rate(k, 0.21, &p, &d));
        }
    }
}
