//! Experiment descriptions parsed from TOML config files.
//!
//! The schema is strict: unknown keys fail the parse, and each command
//! rejects tables and fields it does not consume, so a typo can never
//! silently fall back to a default. Parsed tables are mirrors with optional
//! fields; building the core types routes through their constructors, which
//! enforce the actual invariants (atom normalization, scale restrictions,
//! query bounds).

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::chain::ChainConfig;
use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::EstimatorKind;
use crate::structure::LcdQuery;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Estimate,
    Spectrum,
    Pair,
    Least,
    Tail,
    Lcd,
    Smallball,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Spectrum => "spectrum",
            Command::Pair => "pair",
            Command::Least => "least",
            Command::Tail => "tail",
            Command::Lcd => "lcd",
            Command::Smallball => "smallball",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Top-level config file. Which fields are required depends on the command;
/// [`ExperimentConfig::validated`] checks both presence and absence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lcd: Option<LcdTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smallball: Option<SmallBallTable>,
    /// Number of leading exponents for `spectrum` (default: the dimension).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Deviation statistic for `tail`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<EstimatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Gaussian,
    Rademacher,
    UniformSym,
    TwoPoint,
    ShiftCocycle,
    SymplecticWigner,
}

/// Flat ensemble description. Family-specific parameters are optional here
/// and checked against the named family when the ensemble is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleTable {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(
        default,
        rename = "subgaussian_K",
        skip_serializing_if = "Option::is_none"
    )]
    pub subgaussian_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos_coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin_coeffs: Option<Vec<f64>>,
}

impl EnsembleTable {
    pub fn build(&self) -> Result<EnsembleSpec> {
        let need_n = || {
            self.n.ok_or_else(|| {
                Error::Config(format!("ensemble.n is required for family {:?}", self.family))
            })
        };
        let forbid = |value_absent: bool, key: &str| {
            if value_absent {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "ensemble.{key} is not used by family {}",
                    match self.family {
                        FamilyName::Gaussian => "gaussian",
                        FamilyName::Rademacher => "rademacher",
                        FamilyName::UniformSym => "uniform_sym",
                        FamilyName::TwoPoint => "two_point",
                        FamilyName::ShiftCocycle => "shift_cocycle",
                        FamilyName::SymplecticWigner => "symplectic_wigner",
                    }
                )))
            }
        };
        let forbid_two_point = || -> Result<()> {
            forbid(self.p.is_none(), "p")?;
            forbid(self.a.is_none(), "a")?;
            forbid(self.b.is_none(), "b")
        };
        let forbid_shift = || -> Result<()> {
            forbid(self.omega.is_none(), "omega")?;
            forbid(self.x0.is_none(), "x0")?;
            forbid(self.cos_coeffs.is_none(), "cos_coeffs")?;
            forbid(self.sin_coeffs.is_none(), "sin_coeffs")
        };
        let require = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("ensemble.{key} is required here")))
        };
        let mut spec = match self.family {
            FamilyName::Gaussian => {
                forbid_two_point()?;
                forbid_shift()?;
                forbid(self.lambda.is_none(), "lambda")?;
                forbid(self.energy.is_none(), "energy")?;
                EnsembleSpec::gaussian(need_n()?)?
            }
            FamilyName::Rademacher => {
                forbid_two_point()?;
                forbid_shift()?;
                forbid(self.lambda.is_none(), "lambda")?;
                forbid(self.energy.is_none(), "energy")?;
                EnsembleSpec::rademacher(need_n()?)?
            }
            FamilyName::UniformSym => {
                forbid_two_point()?;
                forbid_shift()?;
                forbid(self.lambda.is_none(), "lambda")?;
                forbid(self.energy.is_none(), "energy")?;
                EnsembleSpec::uniform_sym(need_n()?)?
            }
            FamilyName::TwoPoint => {
                forbid_shift()?;
                forbid(self.lambda.is_none(), "lambda")?;
                forbid(self.energy.is_none(), "energy")?;
                EnsembleSpec::two_point(
                    need_n()?,
                    require(self.p, "p")?,
                    require(self.a, "a")?,
                    require(self.b, "b")?,
                )?
            }
            FamilyName::ShiftCocycle => {
                forbid_two_point()?;
                forbid(self.lambda.is_none(), "lambda")?;
                if let Some(n) = self.n {
                    if n != 2 {
                        return Err(Error::Config(format!(
                            "shift_cocycle is always 2-dimensional, got n = {n}"
                        )));
                    }
                }
                EnsembleSpec::shift_cocycle(crate::ensembles::ShiftParams {
                    energy: require(self.energy, "energy")?,
                    omega: require(self.omega, "omega")?,
                    x0: require(self.x0, "x0")?,
                    cos_coeffs: self.cos_coeffs.clone().unwrap_or_default(),
                    sin_coeffs: self.sin_coeffs.clone().unwrap_or_default(),
                })?
            }
            FamilyName::SymplecticWigner => {
                forbid_two_point()?;
                forbid_shift()?;
                EnsembleSpec::symplectic_wigner(
                    need_n()?,
                    require(self.lambda, "lambda")?,
                    require(self.energy, "energy")?,
                )?
            }
        };
        if let Some(scale) = self.scale {
            spec = spec.with_scale(scale)?;
        }
        if let Some(k) = self.subgaussian_k {
            spec = spec.with_subgaussian_k(k)?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainTable {
    #[serde(rename = "N")]
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renorm_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_increments: Option<bool>,
    /// Start vector for `estimate` and `pair` (default: first axis).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Second start vector for `pair` (default: second axis).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
}

impl ChainTable {
    pub fn build(&self, ensemble: EnsembleSpec) -> Result<ChainConfig> {
        let mut cfg = ChainConfig::new(ensemble, self.n_steps, self.seed);
        if let Some(s) = self.stream_id {
            cfg = cfg.with_stream(s);
        }
        if let Some(r) = self.renorm_every {
            cfg = cfg.with_renorm_every(r);
        }
        if let Some(rec) = self.record_increments {
            cfg = cfg.recording_increments(rec);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// iid standard normal coordinates, normalized to the unit sphere.
    GaussianUnit,
    /// (1, ..., 1)/sqrt(n).
    Ones,
    /// First coordinate axis.
    Axis,
}

/// Deterministic vector source for diagnostics that take a direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<DVector<f64>> {
        if self.n == 0 {
            return Err(Error::Config("generator.n must be >= 1".into()));
        }
        Ok(match self.kind {
            GeneratorKind::GaussianUnit => {
                let mut rng = RngStream::new(self.seed.unwrap_or(0), 0).rng();
                let v = DVector::from_iterator(
                    self.n,
                    (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)),
                );
                let norm = v.norm();
                if norm == 0.0 {
                    return Err(Error::Internal("degenerate gaussian direction draw".into()));
                }
                v / norm
            }
            GeneratorKind::Ones => DVector::from_element(self.n, 1.0 / (self.n as f64).sqrt()),
            GeneratorKind::Axis => {
                let mut v = DVector::zeros(self.n);
                v[0] = 1.0;
                v
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcdTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    pub gamma: f64,
    pub kappa: f64,
    pub theta_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    /// Present: compute the joint LCD of x and this vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_with: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_grid: Option<usize>,
}

impl LcdTable {
    pub fn query(&self) -> Result<LcdQuery> {
        let q = LcdQuery::new(self.gamma, self.kappa, self.theta_max)?;
        match self.grid_step {
            Some(step) => q.with_grid_step(step),
            None => Ok(q),
        }
    }

    pub fn vector(&self) -> Result<DVector<f64>> {
        resolve_vector(&self.x, &self.generator, "lcd")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallBallTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SmallBallTable {
    pub fn vector(&self) -> Result<DVector<f64>> {
        resolve_vector(&self.x, &self.generator, "smallball")
    }
}

fn resolve_vector(
    literal: &Option<Vec<f64>>,
    generator: &Option<GeneratorSpec>,
    table: &str,
) -> Result<DVector<f64>> {
    match (literal, generator) {
        (Some(v), None) => Ok(DVector::from_column_slice(v)),
        (None, Some(g)) => g.generate(),
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "{table}.x and {table}.generator are mutually exclusive"
        ))),
        (None, None) => Err(Error::Config(format!(
            "{table} needs either x or generator"
        ))),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Checks the config against the command actually invoked: the optional
    /// `command` key must agree, required tables must be present, and tables
    /// or fields the command never reads must be absent.
    pub fn validated(mut self, command: Command) -> Result<Self> {
        if let Some(declared) = self.command {
            if declared != command {
                return Err(Error::Config(format!(
                    "config declares command \"{}\" but \"{}\" was invoked",
                    declared.name(),
                    command.name()
                )));
            }
        }
        self.command = Some(command);
        let forbid = |absent: bool, key: &str| {
            if absent {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{key} is not used by command {}",
                    command.name()
                )))
            }
        };
        let require_chain = || {
            self.chain
                .as_ref()
                .ok_or_else(|| Error::Config(format!("[chain] is required for {}", command.name())))
        };
        let require_ensemble = || {
            self.ensemble.as_ref().ok_or_else(|| {
                Error::Config(format!("[ensemble] is required for {}", command.name()))
            })
        };
        match command {
            Command::Estimate | Command::Least => {
                require_ensemble()?;
                let chain = require_chain()?;
                if command == Command::Least {
                    forbid(chain.x0.is_none(), "chain.x0")?;
                }
                forbid(chain.y0.is_none(), "chain.y0")?;
                forbid(self.lcd.is_none(), "[lcd]")?;
                forbid(self.smallball.is_none(), "[smallball]")?;
                forbid(self.k.is_none(), "k")?;
                forbid(self.kind.is_none(), "kind")?;
                forbid(self.t_grid.is_none(), "t_grid")?;
                forbid(self.trials.is_none(), "trials")?;
            }
            Command::Pair => {
                require_ensemble()?;
                require_chain()?;
                forbid(self.lcd.is_none(), "[lcd]")?;
                forbid(self.smallball.is_none(), "[smallball]")?;
                forbid(self.k.is_none(), "k")?;
                forbid(self.kind.is_none(), "kind")?;
                forbid(self.t_grid.is_none(), "t_grid")?;
                forbid(self.trials.is_none(), "trials")?;
            }
            Command::Spectrum => {
                require_ensemble()?;
                let chain = require_chain()?;
                forbid(chain.x0.is_none(), "chain.x0")?;
                forbid(chain.y0.is_none(), "chain.y0")?;
                forbid(self.lcd.is_none(), "[lcd]")?;
                forbid(self.smallball.is_none(), "[smallball]")?;
                forbid(self.kind.is_none(), "kind")?;
                forbid(self.t_grid.is_none(), "t_grid")?;
                forbid(self.trials.is_none(), "trials")?;
            }
            Command::Tail => {
                require_ensemble()?;
                let chain = require_chain()?;
                forbid(chain.x0.is_none(), "chain.x0")?;
                forbid(chain.y0.is_none(), "chain.y0")?;
                forbid(self.lcd.is_none(), "[lcd]")?;
                forbid(self.smallball.is_none(), "[smallball]")?;
                forbid(self.k.is_none(), "k")?;
                if self.kind.is_none() {
                    return Err(Error::Config("kind is required for tail".into()));
                }
                if self.t_grid.is_none() {
                    return Err(Error::Config("t_grid is required for tail".into()));
                }
                if self.trials.is_none() {
                    return Err(Error::Config("trials is required for tail".into()));
                }
            }
            Command::Lcd => {
                if self.lcd.is_none() {
                    return Err(Error::Config("[lcd] is required for lcd".into()));
                }
                forbid(self.ensemble.is_none(), "[ensemble]")?;
                forbid(self.chain.is_none(), "[chain]")?;
                forbid(self.smallball.is_none(), "[smallball]")?;
                forbid(self.k.is_none(), "k")?;
                forbid(self.kind.is_none(), "kind")?;
                forbid(self.t_grid.is_none(), "t_grid")?;
                forbid(self.trials.is_none(), "trials")?;
            }
            Command::Smallball => {
                require_ensemble()?;
                if self.smallball.is_none() {
                    return Err(Error::Config("[smallball] is required for smallball".into()));
                }
                if self.trials.is_none() {
                    return Err(Error::Config("trials is required for smallball".into()));
                }
                forbid(self.chain.is_none(), "[chain]")?;
                forbid(self.lcd.is_none(), "[lcd]")?;
                forbid(self.k.is_none(), "k")?;
                forbid(self.kind.is_none(), "kind")?;
                forbid(self.t_grid.is_none(), "t_grid")?;
            }
            Command::Validate => {
                forbid(self.ensemble.is_none(), "[ensemble]")?;
                forbid(self.chain.is_none(), "[chain]")?;
                forbid(self.lcd.is_none(), "[lcd]")?;
                forbid(self.smallball.is_none(), "[smallball]")?;
                forbid(self.k.is_none(), "k")?;
                forbid(self.kind.is_none(), "kind")?;
                forbid(self.t_grid.is_none(), "t_grid")?;
                forbid(self.trials.is_none(), "trials")?;
            }
        }
        Ok(self)
    }

    /// Applies command-line overrides. The seed lands on whichever component
    /// owns randomness for the command: the chain, the small-ball trials, or
    /// the LCD input generator.
    pub fn with_overrides(
        mut self,
        seed: Option<u64>,
        workers: Option<usize>,
        out: Option<PathBuf>,
    ) -> Self {
        if let Some(s) = seed {
            if let Some(chain) = self.chain.as_mut() {
                chain.seed = s;
            }
            if let Some(sb) = self.smallball.as_mut() {
                sb.seed = Some(s);
            }
            if let Some(lcd) = self.lcd.as_mut() {
                if let Some(g) = lcd.generator.as_mut() {
                    g.seed = Some(s);
                }
            }
        }
        if let Some(w) = workers {
            self.workers = Some(w);
        }
        if let Some(path) = out {
            self.output_path = Some(path);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::Family;

    #[test]
    fn parses_a_spectrum_config() {
        let text = r#"
            command = "spectrum"
            k = 10

            [ensemble]
            family = "gaussian"
            n = 10

            [chain]
            N = 100000
            seed = 42
        "#;
        let cfg = ExperimentConfig::from_toml_str(text)
            .unwrap()
            .validated(Command::Spectrum)
            .unwrap();
        assert_eq!(cfg.k, Some(10));
        let spec = cfg.ensemble.as_ref().unwrap().build().unwrap();
        assert_eq!(spec.family, Family::Gaussian);
        assert_eq!(spec.n, 10);
        let chain = cfg.chain.as_ref().unwrap().build(spec).unwrap();
        assert_eq!(chain.n_steps, 100_000);
        assert_eq!(chain.seed, 42);
        assert_eq!(chain.renorm_every, 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            comand = "spectrum"
        "#;
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))));
        let nested = r#"
            [ensemble]
            family = "gaussian"
            n = 10
            sigma = 0.5
        "#;
        assert!(matches!(ExperimentConfig::from_toml_str(nested), Err(Error::Config(_))));
    }

    #[test]
    fn command_mismatch_is_a_config_error() {
        let text = r#"
            command = "estimate"

            [ensemble]
            family = "gaussian"
            n = 4

            [chain]
            N = 10
            seed = 0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(cfg.clone().validated(Command::Spectrum).is_err());
        assert!(cfg.validated(Command::Estimate).is_ok());
    }

    #[test]
    fn fields_of_other_commands_are_rejected() {
        let text = r#"
            command = "estimate"
            t_grid = [0.1]

            [ensemble]
            family = "gaussian"
            n = 4

            [chain]
            N = 10
            seed = 0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let err = cfg.validated(Command::Estimate).unwrap_err();
        assert!(err.to_string().contains("t_grid"));
    }

    #[test]
    fn family_parameters_are_cross_checked() {
        let stray = EnsembleTable {
            family: FamilyName::Gaussian,
            n: Some(4),
            scale: None,
            subgaussian_k: None,
            p: None,
            a: None,
            b: None,
            lambda: Some(0.1),
            energy: None,
            omega: None,
            x0: None,
            cos_coeffs: None,
            sin_coeffs: None,
        };
        assert!(stray.build().is_err());
        let two_point = EnsembleTable { family: FamilyName::TwoPoint, lambda: None, ..stray.clone() };
        assert!(two_point.build().is_err());
        let complete = EnsembleTable {
            p: Some(0.5),
            a: Some(-1.0),
            b: Some(1.0),
            ..two_point
        };
        let spec = complete.build().unwrap();
        assert_eq!(spec.family.name(), "two_point");
    }

    #[test]
    fn shift_cocycle_table_builds_the_structured_family() {
        let text = r#"
            [ensemble]
            family = "shift_cocycle"
            energy = 0.5
            omega = 0.6180339887498949
            x0 = 0.0
            cos_coeffs = [2.0]

            [chain]
            N = 100
            seed = 1
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let spec = cfg.ensemble.unwrap().build().unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.family.name(), "shift_cocycle");
    }

    #[test]
    fn generator_vectors_are_deterministic_and_unit() {
        let g = GeneratorSpec { kind: GeneratorKind::GaussianUnit, n: 8, seed: Some(5) };
        let a = g.generate().unwrap();
        let b = g.generate().unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        let ones = GeneratorSpec { kind: GeneratorKind::Ones, n: 4, seed: None };
        assert_eq!(ones.generate().unwrap()[2], 0.5);
        let axis = GeneratorSpec { kind: GeneratorKind::Axis, n: 3, seed: None };
        assert_eq!(axis.generate().unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn lcd_table_resolves_exactly_one_vector_source() {
        let both = LcdTable {
            x: Some(vec![1.0, 0.0]),
            generator: Some(GeneratorSpec { kind: GeneratorKind::Axis, n: 2, seed: None }),
            gamma: 0.5,
            kappa: 1.0,
            theta_max: 10.0,
            grid_step: None,
            joint_with: None,
            angle_grid: None,
        };
        assert!(both.vector().is_err());
        let neither = LcdTable { x: None, generator: None, ..both.clone() };
        assert!(neither.vector().is_err());
        let literal = LcdTable { generator: None, ..both };
        assert_eq!(literal.vector().unwrap().len(), 2);
        assert!(literal.query().is_ok());
    }

    #[test]
    fn seed_override_lands_on_the_owning_component() {
        let text = r#"
            [ensemble]
            family = "gaussian"
            n = 4

            [chain]
            N = 10
            seed = 7
        "#;
        let cfg = ExperimentConfig::from_toml_str(text)
            .unwrap()
            .with_overrides(Some(99), Some(2), Some(PathBuf::from("out.csv")));
        assert_eq!(cfg.chain.as_ref().unwrap().seed, 99);
        assert_eq!(cfg.workers, Some(2));
        assert_eq!(cfg.output_path.as_deref(), Some(Path::new("out.csv")));
    }
}
