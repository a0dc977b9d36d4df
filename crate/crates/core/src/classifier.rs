//! Transition type, bifurcation side and singular-point census from the discriminants.
//!
//! Nothing here reads the mobility: `T_c`, `B_1..B_3` and every count depend on
//! `(R, gamma, alpha, ubar, L)` only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{enumerate_equilibria, EquilibriumKind, SigmaMode};
use crate::params::{Discriminants, DomainSpec, PhysicalParams};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

/// `|B_i| < MARGINAL * b3` is refused.
const MARGINAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransitionType {
    #[serde(rename = "Type-I")]
    TypeI,
    #[serde(rename = "Type-II")]
    TypeII,
}

/// Side(s) of `T_c` on which the bifurcated equilibria live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationSide {
    Below,
    Above,
    Both,
}

/// Singular points on one side of `T_c`. `saddles` follows the full system:
/// anything with an unstable direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SideCensus {
    pub total: usize,
    pub attractors: usize,
    pub saddles: usize,
}

impl SideCensus {
    fn saddles(total: usize) -> Self {
        Self { total, attractors: 0, saddles: total }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Census {
    pub below: SideCensus,
    pub above: SideCensus,
}

impl Census {
    pub fn total(&self) -> usize {
        self.below.total + self.above.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionReport<T> {
    pub schema_version: u32,
    #[serde(rename = "Tc")]
    pub tc: T,
    pub m: usize,
    #[serde(rename = "B")]
    pub b: [T; 3],
    /// `(sigma1, sigma2)` at `T_c`.
    pub sigma: (T, T),
    #[serde(rename = "type")]
    pub transition_type: TransitionType,
    pub side: BifurcationSide,
    pub census: Census,
    /// `c` in `y* = c sqrt|T_c - T|`, single critical mode only.
    pub amplitude_law: Option<T>,
    pub attractor_topology: Option<String>,
    /// Type-I only; `None` when `sigma1 = sigma2` leaves the singular points non-isolated.
    pub minimal_attractors: Option<usize>,
    pub notes: Vec<String>,
}

impl<T: Scalar> TransitionReport<T> {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.transition_type {
            TransitionType::TypeI => "Type-I (continuous)",
            TransitionType::TypeII => "Type-II (jump)",
        };
        s.push_str(&format!("critical temperature  Tc = {}\n", self.tc));
        s.push_str(&format!("critical multiplicity m  = {}\n", self.m));
        s.push_str(&format!("B1 = {}  B2 = {}  B3 = {}\n", self.b[0], self.b[1], self.b[2]));
        s.push_str(&format!("sigma1 = {}  sigma2 = {}  (at Tc)\n", self.sigma.0, self.sigma.1));
        s.push_str(&format!("transition            {kind}\n"));
        s.push_str(&format!("bifurcation side      {:?}\n", self.side));
        for (name, c) in [("T < Tc", self.census.below), ("T > Tc", self.census.above)] {
            s.push_str(&format!(
                "{name}: {} singular points, {} attractors, {} saddles\n",
                c.total, c.attractors, c.saddles
            ));
        }
        if let Some(n) = self.minimal_attractors {
            s.push_str(&format!("minimal attractors    {n}\n"));
        }
        if let Some(t) = &self.attractor_topology {
            s.push_str(&format!("attractor topology    {t}\n"));
        }
        if let Some(c) = self.amplitude_law {
            s.push_str(&format!("amplitude law         y* = {c} * sqrt|Tc - T|\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

fn check_marginal<T: Scalar>(name: &'static str, value: T, b3: T) -> Result<()> {
    if value.abs() < T::lit(MARGINAL) * b3 {
        return Err(Error::Marginal { name, value: value.as_f64() });
    }
    Ok(())
}

/// Census read off the classification tables, with `sigma1 > sigma2` selecting the
/// minimal attractors for `m = 3`.
fn tabulated_census<T: Scalar>(m: usize, disc: &Discriminants<T>) -> Result<(Census, TransitionType, Option<usize>)> {
    let b3 = disc.cubic;
    let zero = T::zero();
    let governing = disc.governing(m);
    check_marginal(["B1", "B2", "B3"][m - 1], governing, b3)?;
    let type_one = governing > zero;
    let none = SideCensus::default();
    let census = match (m, type_one) {
        (1, true) => Census { below: SideCensus { total: 2, attractors: 2, saddles: 0 }, above: none },
        (1, false) => Census { below: none, above: SideCensus::saddles(2) },
        (2, true) => Census { below: SideCensus { total: 8, attractors: 4, saddles: 4 }, above: none },
        (2, false) => {
            check_marginal("B1", disc.b1, b3)?;
            if disc.b1 > zero {
                Census { below: SideCensus::saddles(4), above: SideCensus::saddles(4) }
            } else {
                Census { below: none, above: SideCensus::saddles(8) }
            }
        }
        (_, true) => {
            let minimal = if disc.sigma1 > disc.sigma2 { 8 } else { 6 };
            Census { below: SideCensus { total: 26, attractors: minimal, saddles: 26 - minimal }, above: none }
        }
        (_, false) => {
            check_marginal("B2", disc.b2, b3)?;
            let above = if disc.b2 > zero {
                8
            } else {
                check_marginal("B1", disc.b1, b3)?;
                if disc.b1 > zero {
                    20
                } else {
                    26
                }
            };
            Census { below: SideCensus::saddles(26 - above), above: SideCensus::saddles(above) }
        }
    };
    let ty = if type_one { TransitionType::TypeI } else { TransitionType::TypeII };
    let minimal = type_one.then_some(census.below.attractors);
    Ok((census, ty, minimal))
}

pub fn classify_transition<T: Scalar>(p: &PhysicalParams<T>, d: &DomainSpec<T>) -> Result<TransitionReport<T>> {
    let disc = p.discriminants(d)?;
    let m = d.multiplicity();
    let (census, transition_type, mut minimal_attractors) = tabulated_census(m, &disc)?;
    let side = match (census.below.total > 0, census.above.total > 0) {
        (true, true) => BifurcationSide::Both,
        (true, false) => BifurcationSide::Below,
        _ => BifurcationSide::Above,
    };
    let mut notes = Vec::new();
    let sigmas_tied = (disc.sigma1 - disc.sigma2).abs() <= T::lit(MARGINAL) * disc.cubic;
    if m >= 2 && transition_type == TransitionType::TypeI && sigmas_tied {
        minimal_attractors = None;
        notes.push(
            "sigma1 = sigma2 at Tc: the bifurcated set is a sphere of equilibria, singular points not enumerated"
                .into(),
        );
    }
    if m == 3 && transition_type == TransitionType::TypeI {
        let threshold = T::lit(22.0 / 9.0) * disc.quadratic_shift;
        notes.push(format!(
            "minimal-attractor threshold 22 L^2 b2^2 / (9 alpha pi^2) = {threshold} vs b3 = {}",
            disc.cubic
        ));
        if p.alpha() != T::one() {
            notes.push(
                "alpha != 1: the threshold is taken with alpha in the denominator, as in every B_i; \
                 the form without alpha would compare b3 against a different value"
                    .into(),
            );
        }
    }
    if transition_type == TransitionType::TypeII {
        notes.push("saddles are counted in the full system; in the reduced system some appear as repellers".into());
    }
    let amplitude_law =
        (m == 1).then(|| (T::lit(4.0) * p.gas_constant() / (T::lit(3.0) * disc.b1.abs() * p.mixing_factor())).sqrt());
    let attractor_topology = (m >= 2 && transition_type == TransitionType::TypeI).then(|| format!("S^{}", m - 1));
    Ok(TransitionReport {
        schema_version: SCHEMA_VERSION,
        tc: disc.critical_temperature,
        m,
        b: disc.as_array(),
        sigma: (disc.sigma1, disc.sigma2),
        transition_type,
        side,
        census,
        amplitude_law,
        attractor_topology,
        minimal_attractors,
        notes,
    })
}

/// `sqrt(4 R |T_c - T| / (3 |B1| ubar (1 - ubar)))` for a single critical mode.
pub fn bifurcated_amplitude<T: Scalar>(p: &PhysicalParams<T>, d: &DomainSpec<T>, temperature: T) -> Result<T> {
    if d.multiplicity() != 1 {
        return Err(crate::error::invalid("domain", "the amplitude law needs a single critical mode"));
    }
    let disc = p.discriminants(d)?;
    check_marginal("B1", disc.b1, disc.cubic)?;
    let tc = disc.critical_temperature;
    let gap = tc - temperature;
    if gap != T::zero() && (gap > T::zero()) != (disc.b1 > T::zero()) {
        let reason = if disc.b1 > T::zero() { "Type-I bifurcates below Tc" } else { "Type-II bifurcates above Tc" };
        return Err(Error::WrongSide { temperature: temperature.as_f64(), reason: reason.into() });
    }
    Ok((T::lit(4.0) * p.gas_constant() * gap.abs() / (T::lit(3.0) * disc.b1.abs() * p.mixing_factor())).sqrt())
}

/// Census re-derived from the reduced system and compared against the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusCheck {
    pub expected: Census,
    pub observed: Census,
    pub degenerate: usize,
    pub mismatches: Vec<String>,
}

impl CensusCheck {
    pub fn matches(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Enumerates equilibria at `T_c -/+ |T - T_c|` with `sigma` frozen at `T_c`.
pub fn census_check<T: Scalar>(
    report: &TransitionReport<T>,
    p: &PhysicalParams<T>,
    d: &DomainSpec<T>,
    temperature: T,
) -> Result<CensusCheck> {
    let tc = report.tc;
    let mut delta = (temperature - tc).abs();
    if delta == T::zero() {
        delta = T::lit(1e-3) * tc;
    }
    let mut degenerate = 0;
    let mut side = |t: T| -> Result<SideCensus> {
        let eq = enumerate_equilibria(p, d, t, SigmaMode::Critical)?;
        let mut c = SideCensus { total: eq.points.len(), ..Default::default() };
        for q in &eq.points {
            match q.kind {
                EquilibriumKind::Attractor => c.attractors += 1,
                EquilibriumKind::Degenerate => degenerate += 1,
                _ => c.saddles += 1,
            }
        }
        degenerate += eq.singular_patterns.len();
        Ok(c)
    };
    let observed = Census { below: side(tc - delta)?, above: side(tc + delta)? };
    let expected = report.census;
    let mut mismatches = Vec::new();
    for (name, e, o) in [("T < Tc", expected.below, observed.below), ("T > Tc", expected.above, observed.above)] {
        if e != o {
            mismatches.push(format!("{name}: expected {e:?}, found {o:?}"));
        }
    }
    if degenerate > 0 && report.minimal_attractors.is_some() {
        mismatches.push(format!("{degenerate} degenerate equilibria where the table expects regular ones"));
    }
    Ok(CensusCheck { expected, observed, degenerate, mismatches })
}
