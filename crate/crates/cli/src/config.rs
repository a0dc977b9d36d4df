//! TOML run configuration: flat physical keys at the top level, one table per subcommand.

use std::fmt;
use std::path::{Path, PathBuf};

use ch_onsager::manifold::SigmaMode;
use ch_onsager::params::{DomainCase, DomainSpec, MobilityProfile, MobilitySpec, PhysicalParams};
use ch_onsager::simulator::{Model, Scheme};
use ch_onsager::Error;
use serde::Deserialize;

/// Configuration problem, located at a line of the source file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "R")]
    gas_constant: f64,
    gamma: f64,
    alpha: f64,
    ubar: f64,
    #[serde(rename = "T")]
    temperature: Option<f64>,
    epsilon: Option<f64>,
    #[serde(rename = "H0")]
    h0: Option<f64>,
    #[serde(rename = "H1")]
    h1: Option<f64>,
    #[serde(rename = "H2")]
    h2: Option<f64>,
    #[serde(rename = "L1")]
    l1: f64,
    #[serde(rename = "L2")]
    l2: f64,
    #[serde(rename = "L3")]
    l3: f64,
    profile: Option<RawProfile>,
    #[serde(rename = "H_min")]
    h_min: Option<f64>,
    tie_tolerance: Option<f64>,
    case: Option<RawCase>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    reduce: ReduceSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    validate: ValidateSection,
}

/// `profile = [c0, c1, ...]` is a polynomial in `u - ubar`;
/// `profile = { table = [[u, H], ...] }` is piecewise linear.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawProfile {
    Polynomial(Vec<f64>),
    Table { table: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawCase {
    Distinct,
    TwoEqual,
    AllEqual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Imex1,
    Imex2,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Imex1 => Scheme::Imex1,
            SchemeName::Imex2 => Scheme::Imex2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Truncated,
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaName {
    Ambient,
    Critical,
}

impl From<SigmaName> for SigmaMode {
    fn from(s: SigmaName) -> Self {
        match s {
            SigmaName::Ambient => SigmaMode::Ambient,
            SigmaName::Critical => SigmaMode::Critical,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub t_end: f64,
    pub dt: f64,
    pub modes: [usize; 3],
    pub scheme: SchemeName,
    pub model: Option<ModelName>,
    /// Diagnostics row every this many steps.
    pub record_every: usize,
    pub amplitude: f64,
    pub band: u32,
    pub steady_tol: Option<f64>,
    pub stab_biharmonic: f64,
    pub stab_laplacian: f64,
    pub snapshot: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            dt: 1e-2,
            modes: [16, 16, 16],
            scheme: SchemeName::Imex1,
            model: None,
            record_every: 10,
            amplitude: 1e-3,
            band: 4,
            steady_tol: None,
            stab_biharmonic: 0.0,
            stab_laplacian: 0.0,
            snapshot: true,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceSection {
    pub y0: Option<Vec<f64>>,
    /// Defaults to `0.01 / |beta|`.
    pub dt: Option<f64>,
    /// Defaults to ten relaxation times `10 / |beta|`.
    pub t_end: Option<f64>,
    pub sigma: Option<SigmaName>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Relative offsets `T = T_c (1 - eps)`.
    pub epsilons: Option<Vec<f64>>,
    /// Absolute offsets `T = T_c - d`.
    pub offsets: Option<Vec<f64>>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
    pub modes: [usize; 3],
    pub scheme: SchemeName,
    pub model: Option<ModelName>,
    pub dt_scale: f64,
    pub max_steps: usize,
    pub steady_tol: f64,
    pub amplitude: f64,
    pub band: u32,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: None,
            offsets: None,
            eps_min: 0.01,
            eps_max: 0.08,
            points: 8,
            modes: [16, 16, 16],
            scheme: SchemeName::Imex1,
            model: None,
            dt_scale: 0.2,
            max_steps: 5000,
            steady_tol: 1e-10,
            amplitude: 1e-3,
            band: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub epsilon: f64,
    pub modes: [usize; 3],
    pub dt: f64,
    pub scheme: SchemeName,
    pub model: Option<ModelName>,
    pub initial_fraction: f64,
    pub direction: Option<Vec<f64>>,
    /// In relaxation times `1 / beta`.
    pub horizon: f64,
    pub substeps: usize,
    pub sigma: SigmaName,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            modes: [32, 16, 8],
            dt: 0.1,
            scheme: SchemeName::Imex2,
            model: None,
            initial_fraction: 0.25,
            direction: None,
            horizon: 1.0,
            substeps: 4,
            sigma: SigmaName::Ambient,
        }
    }
}

/// Temperature request shared by `simulate` and `reduce`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperatureSpec {
    Absolute(f64),
    Relative(f64),
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: PhysicalParams<f64>,
    pub domain: DomainSpec<f64>,
    pub temperature: Option<TemperatureSpec>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub simulate: SimulateSection,
    pub reduce: ReduceSection,
    pub sweep: SweepSection,
    pub validate: ValidateSection,
    source: Source,
}

#[derive(Debug, Clone)]
struct Source {
    path: PathBuf,
    text: String,
}

impl Source {
    fn error(&self, line: Option<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError { path: self.path.clone(), line, message: message.into() }
    }

    /// Line of `key = ...` inside the given table (`None` for the top level).
    fn locate(&self, section: Option<&str>, key: &str) -> Option<usize> {
        let mut current: Option<String> = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.trim().to_string());
                continue;
            }
            let Some((lhs, _)) = line.split_once('=') else { continue };
            if lhs.trim() == key && current.as_deref() == section {
                return Some(i + 1);
            }
        }
        None
    }

    /// Error for `key`, read from `section` when the key belongs to that table.
    fn at(&self, section: Option<&str>, key: &str, message: impl fmt::Display) -> ConfigError {
        match section.filter(|s| section_keys(s).contains(&key)) {
            Some(s) => match self.locate(Some(s), key) {
                Some(line) => self.error(Some(line), format!("`{s}.{key}`: {message}")),
                None => self.error(None, format!("`{s}.{key}` (default): {message}")),
            },
            None => self.error(self.locate(None, key), format!("`{key}`: {message}")),
        }
    }
}

fn section_keys(section: &str) -> &'static [&'static str] {
    match section {
        "simulate" => &[
            "t_end",
            "dt",
            "modes",
            "scheme",
            "model",
            "record_every",
            "amplitude",
            "band",
            "steady_tol",
            "stab_biharmonic",
            "stab_laplacian",
            "snapshot",
        ],
        "reduce" => &["y0", "dt", "t_end", "sigma"],
        "sweep" => &[
            "epsilons",
            "offsets",
            "eps_min",
            "eps_max",
            "points",
            "modes",
            "scheme",
            "model",
            "dt_scale",
            "max_steps",
            "steady_tol",
            "amplitude",
            "band",
        ],
        "validate" => &[
            "epsilon",
            "modes",
            "dt",
            "scheme",
            "model",
            "initial_fraction",
            "direction",
            "horizon",
            "substeps",
            "sigma",
        ],
        _ => &[],
    }
}

/// Key in the file that an error from the core library refers to.
fn key_of(e: &Error) -> Option<&'static str> {
    match e {
        Error::InvalidParameter { name, .. } => Some(match *name {
            "H1/H2" => "H1",
            "u" => "ubar",
            "y" => "y0",
            "stabilization" => "stab_biharmonic",
            n => n,
        }),
        Error::InvalidDomain(_) | Error::AmbiguousCriticalSet(_) => Some("L1"),
        Error::NoSupercriticalRegime { .. } => Some("gamma"),
        _ => None,
    }
}

/// Whether a library error is a problem with the inputs rather than the numerics.
pub fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter { .. }
            | Error::InvalidDomain(_)
            | Error::AmbiguousCriticalSet(_)
            | Error::NoSupercriticalRegime { .. }
            | Error::Config(_)
    )
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let source = Source { path: path.to_path_buf(), text: text.to_string() };
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            source.error(line, e.message().trim().to_string())
        })?;
        Self::build(raw, source)
    }

    fn build(raw: RawConfig, source: Source) -> Result<Self, ConfigError> {
        let lib = |e: Error| match key_of(&e) {
            Some(key) => source.at(None, key, &e),
            None => source.error(None, e.to_string()),
        };
        let mobility = match raw.profile {
            Some(profile) => {
                if let Some(key) =
                    [("H0", raw.h0), ("H1", raw.h1), ("H2", raw.h2)].iter().find_map(|(k, v)| v.map(|_| *k))
                {
                    return Err(source.at(None, key, "Taylor data is derived from `profile`; give one or the other"));
                }
                let profile = match profile {
                    RawProfile::Polynomial(coeffs) => MobilityProfile::polynomial(raw.ubar, coeffs),
                    RawProfile::Table { table } => {
                        MobilityProfile::table(table.into_iter().map(|[u, h]| (u, h)).collect())
                    }
                }
                .map_err(lib)?;
                MobilitySpec::from_profile(profile, raw.ubar, raw.h_min.unwrap_or(1e-6)).map_err(lib)?
            }
            None => {
                let h0 = raw.h0.ok_or_else(|| source.error(None, "missing field `H0` (or give `profile`)"))?;
                if raw.h_min.is_some_and(|m| !(h0 >= m)) {
                    return Err(source.at(None, "H0", format!("H0 = {h0} is below H_min")));
                }
                MobilitySpec::taylor(h0, raw.h1.unwrap_or(0.0), raw.h2.unwrap_or(0.0)).map_err(lib)?
            }
        };
        let params = PhysicalParams::new(raw.gas_constant, raw.gamma, raw.alpha, raw.ubar, mobility).map_err(lib)?;
        let lengths = [raw.l1, raw.l2, raw.l3];
        let tol = raw.tie_tolerance.unwrap_or(DomainSpec::<f64>::DEFAULT_TIE_TOLERANCE);
        let domain = match raw.case {
            Some(case) => {
                let case = match case {
                    RawCase::Distinct => DomainCase::Distinct,
                    RawCase::TwoEqual => DomainCase::TwoEqual,
                    RawCase::AllEqual => DomainCase::AllEqual,
                };
                DomainSpec::with_case(lengths, case, tol).map_err(|e| source.at(None, "case", e))?
            }
            None => DomainSpec::with_tolerance(lengths, tol).map_err(lib)?,
        };
        let temperature = match (raw.temperature, raw.epsilon) {
            (Some(_), Some(_)) => return Err(source.at(None, "epsilon", "give either `T` or `epsilon`, not both")),
            (Some(t), None) => Some(TemperatureSpec::Absolute(t)),
            (None, Some(e)) => Some(TemperatureSpec::Relative(e)),
            (None, None) => None,
        };
        let sweep = raw.sweep;
        if sweep.epsilons.is_some() && sweep.offsets.is_some() {
            return Err(source.at(Some("sweep"), "offsets", "give either `epsilons` or `offsets`, not both"));
        }
        Ok(Self {
            params,
            domain,
            temperature,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            seed: raw.seed.unwrap_or(0),
            simulate: raw.simulate,
            reduce: raw.reduce,
            sweep,
            validate: raw.validate,
            source,
        })
    }

    /// Locates a library error raised while running a subcommand.
    pub fn input_error(&self, section: &str, e: &Error) -> ConfigError {
        match key_of(e) {
            Some(key) => self.source.at(Some(section), key, e),
            None => self.source.error(None, e.to_string()),
        }
    }

    pub fn missing(&self, key: &str, why: &str) -> ConfigError {
        self.source.error(None, format!("missing field `{key}`: {why}"))
    }

    pub fn invalid(&self, section: Option<&str>, key: &str, message: impl fmt::Display) -> ConfigError {
        self.source.at(section, key, message)
    }

    /// `model` for a section: the divergence form whenever a full profile is given.
    pub fn model(&self, requested: Option<ModelName>) -> Model {
        match requested {
            Some(ModelName::Truncated) => Model::Truncated,
            Some(ModelName::Divergence) => Model::Divergence,
            None if self.params.mobility().profile().is_some() => Model::Divergence,
            None => Model::Truncated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str =
        "R = 1.0\ngamma = 1.0\nalpha = 1.0\nubar = 0.5\nH0 = 1.0\nL1 = 3.141592653589793\nL2 = 2.0\nL3 = 1.0\n";

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("run.toml"))
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.domain.multiplicity(), 1);
        assert_eq!(c.seed, 0);
        assert_eq!(c.temperature, None);
        assert_eq!(c.simulate.modes, [16, 16, 16]);
    }

    #[test]
    fn missing_key_is_named() {
        let text = BASE.replace("ubar = 0.5\n", "");
        let e = parse(&text).unwrap_err();
        assert!(e.message.contains("ubar"), "{e}");
    }

    #[test]
    fn unknown_key_is_rejected_with_its_line() {
        let text = format!("{BASE}[simulate]\nsteps = 3\n");
        let e = parse(&text).unwrap_err();
        assert!(e.message.contains("steps"), "{e}");
        assert_eq!(e.line, Some(10));
    }

    #[test]
    fn invalid_value_points_at_its_line() {
        let e = parse(&BASE.replace("ubar = 0.5", "ubar = 1.5")).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("ubar"), "{e}");
    }

    #[test]
    fn profile_excludes_taylor_data() {
        let e = parse(&format!("{BASE}profile = [1.0, 0.5]\n")).unwrap_err();
        assert_eq!(e.line, Some(5));
        let ok = parse(&format!("{}profile = [1.0, 0.5]\nH_min = 0.2\n", BASE.replace("H0 = 1.0\n", ""))).unwrap();
        assert_eq!(ok.params.mobility().h1(), 0.5);
        assert_eq!(ok.model(None), Model::Divergence);
    }

    #[test]
    fn table_profile_parses() {
        let text = format!("{}profile = {{ table = [[0.0, 1.0], [1.0, 2.0]] }}\n", BASE.replace("H0 = 1.0\n", ""));
        let c = parse(&text).unwrap();
        assert!((c.params.mobility().h0() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn explicit_case_must_match_lengths() {
        assert!(parse(&format!("{BASE}case = \"all_equal\"\n")).is_err());
        assert!(parse(&format!("{BASE}case = \"distinct\"\n")).is_ok());
    }

    #[test]
    fn temperature_and_epsilon_are_exclusive() {
        assert!(parse(&format!("{BASE}T = 0.2\nepsilon = 0.1\n")).is_err());
        let c = parse(&format!("{BASE}epsilon = 0.1\n")).unwrap();
        assert_eq!(c.temperature, Some(TemperatureSpec::Relative(0.1)));
    }

    #[test]
    fn section_errors_do_not_borrow_top_level_lines() {
        let c = parse(&format!("{BASE}epsilon = 0.1\n[validate]\ndt = 0.5\n")).unwrap();
        let e = Error::InvalidParameter { name: "epsilon", reason: "bad".into() };
        let located = c.input_error("validate", &e);
        assert_eq!(located.line, None);
        assert!(located.message.contains("validate.epsilon"), "{located}");
        let dt = c.input_error("validate", &Error::InvalidParameter { name: "dt", reason: "bad".into() });
        assert_eq!(dt.line, Some(11));
        let gamma = c.input_error("validate", &Error::InvalidParameter { name: "gamma", reason: "bad".into() });
        assert_eq!(gamma.line, Some(2));
    }
}
