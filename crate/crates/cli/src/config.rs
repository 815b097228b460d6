//! Run configuration: one struct per command, shared by the argument parser
//! and by `--config` files. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

mod defaults {
    pub fn max_degree() -> u64 {
        1 << 12
    }
    pub fn depth() -> usize {
        12
    }
    pub fn samples() -> usize {
        20_000
    }
    pub fn epsilon() -> f64 {
        0.05
    }
    pub fn horizon() -> usize {
        40
    }
    pub fn precision() -> f64 {
        1e-9
    }
    pub fn res() -> usize {
        512
    }
    pub fn extent() -> f64 {
        8.0
    }
    pub fn iters() -> usize {
        40
    }
    pub fn tol() -> f64 {
        0.05
    }
    pub fn ruelle_depth() -> usize {
        10
    }
    pub fn ruelle_samples() -> usize {
        1 << 20
    }
    pub fn fixtures() -> std::path::PathBuf {
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures").into()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    /// Where the JSON report goes; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Check one relation between two maps.
    Relations(RelationsArgs),
    /// Classify a family of polynomials (common iterates and embedding data).
    Classify(ClassifyArgs),
    /// Symmetry-group structure of a family.
    Structure(StructureArgs),
    /// Invariance defect of spherical averages on the Levin semigroup.
    Theta(ThetaArgs),
    /// Sample the measure of maximal entropy into a CSV cloud.
    Measure(MeasureArgs),
    /// Compare two clouds, or run the equal-measure cross-check on two maps.
    MeasureCompare(CompareArgs),
    /// Count forward-orbit intersections.
    Dip(DipArgs),
    /// Ruelle transfer operator experiments on a grid.
    Ruelle(RuelleArgs),
    /// Run the acceptance criteria on the fixture corpus.
    Corpus(CorpusArgs),
    /// Re-check every witness in a report.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Relations(_) => "relations",
            Command::Classify(_) => "classify",
            Command::Structure(_) => "structure",
            Command::Theta(_) => "theta",
            Command::Measure(_) => "measure",
            Command::MeasureCompare(_) => "measure-compare",
            Command::Dip(_) => "dip",
            Command::Ruelle(_) => "ruelle",
            Command::Corpus(_) => "corpus",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Levin,
    Commute,
    CommonIterate,
    Exceptional,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RelationsArgs {
    #[arg(long)]
    pub maps: PathBuf,
    #[arg(long, value_enum)]
    pub check: Check,
    #[arg(long, default_value_t = defaults::max_degree())]
    #[serde(default = "defaults::max_degree")]
    pub max_degree: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub maps: PathBuf,
    /// Degree bound for the common-iterate search.
    #[arg(long, default_value_t = defaults::max_degree())]
    #[serde(default = "defaults::max_degree")]
    pub budget: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StructureArgs {
    #[arg(long)]
    pub maps: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThetaArgs {
    /// Number of generators.
    #[arg(long)]
    pub m: usize,
    /// Ball radius.
    #[arg(long)]
    pub n: usize,
    /// `{"values": [[...], ...]}`, one row of exact rationals per generator.
    #[arg(long)]
    pub phi: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasureArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, default_value_t = defaults::depth())]
    #[serde(default = "defaults::depth")]
    pub depth: usize,
    #[arg(long, default_value_t = defaults::samples())]
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    /// Start point `re,im` (floats); uniform in |z| <= 2 when absent.
    #[arg(long)]
    #[serde(default)]
    pub z0: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// 512x512 density raster over [-2, 2]^2 (binary PGM).
    #[arg(long)]
    #[serde(default)]
    pub heatmap: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CompareArgs {
    #[arg(long, requires = "b", conflicts_with = "maps")]
    #[serde(default)]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    #[serde(default)]
    pub b: Option<PathBuf>,
    /// Two maps: sample both and cross-check against the Levin search.
    #[arg(long)]
    #[serde(default)]
    pub maps: Option<PathBuf>,
    #[arg(long, default_value_t = defaults::depth())]
    #[serde(default = "defaults::depth")]
    pub depth: usize,
    #[arg(long, default_value_t = defaults::samples())]
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[arg(long, default_value_t = defaults::epsilon())]
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[arg(long, default_value_t = defaults::max_degree())]
    #[serde(default = "defaults::max_degree")]
    pub max_degree: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitModeArg {
    Exact,
    Float,
    Exponent,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DipArgs {
    #[arg(long)]
    pub maps: PathBuf,
    /// Exact start point `re,im` with rational parts, e.g. `2/1,0/1`, or `inf`.
    #[arg(long)]
    pub z0: String,
    #[arg(long, default_value_t = defaults::horizon())]
    #[serde(default = "defaults::horizon")]
    pub horizon: usize,
    #[arg(long)]
    #[serde(default)]
    pub threshold: Option<u64>,
    /// Orbit arithmetic; chosen automatically when absent.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub mode: Option<OrbitModeArg>,
    #[arg(long, default_value_t = defaults::precision())]
    #[serde(default = "defaults::precision")]
    pub precision: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RuelleMode {
    Apply,
    Cesaro,
    Fixedpoint,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDensity {
    /// Gaussian bump at 0.5+0.5i.
    Bump,
    /// Backward-orbit raster times the fitted invariant twist.
    Twisted,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RuelleArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, value_enum)]
    pub mode: RuelleMode,
    #[arg(long, default_value_t = defaults::res())]
    #[serde(default = "defaults::res")]
    pub res: usize,
    /// Half-width of the square chart.
    #[arg(long, default_value_t = defaults::extent())]
    #[serde(default = "defaults::extent")]
    pub extent: f64,
    #[arg(long, default_value_t = defaults::iters())]
    #[serde(default = "defaults::iters")]
    pub iters: usize,
    #[arg(long, default_value_t = defaults::tol())]
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    /// Initial density; `twisted` for fixedpoint, `bump` otherwise.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub init: Option<InitialDensity>,
    #[arg(long, default_value_t = defaults::ruelle_depth())]
    #[serde(default = "defaults::ruelle_depth")]
    pub depth: usize,
    #[arg(long, default_value_t = defaults::ruelle_samples())]
    #[serde(default = "defaults::ruelle_samples")]
    pub samples: usize,
    /// Raster of |output| (binary PGM); the report is also written next to
    /// it with a `.json` extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Filter {
    All,
    Symbolic,
    Numeric,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CorpusArgs {
    #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))]
    #[serde(default = "defaults::fixtures")]
    pub fixtures: PathBuf,
    #[arg(long, value_enum, default_value_t = Filter::All)]
    #[serde(default = "all")]
    pub filter: Filter,
    /// CSV table destination; stdout when absent.
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn all() -> Filter {
    Filter::All
}

#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    pub report: PathBuf,
}

fn positive(name: &str, v: u64) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Config(format!("{name} must be positive")));
    }
    Ok(())
}

fn positive_real(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Config(format!("{name} must be a positive number, got {v}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = crate::io::read_text(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match &self.command {
            Command::Relations(a) => positive("max_degree", a.max_degree),
            Command::Classify(a) => positive("budget", a.budget),
            Command::Structure(_) | Command::Verify(_) | Command::Corpus(_) => Ok(()),
            Command::Theta(a) => {
                positive("m", a.m as u64)?;
                positive("n", a.n as u64)
            }
            Command::Measure(a) => {
                positive("depth", a.depth as u64)?;
                positive("samples", a.samples as u64)
            }
            Command::MeasureCompare(a) => {
                if a.maps.is_none() && (a.a.is_none() || a.b.is_none()) {
                    return Err(CliError::Config("measure-compare needs --a and --b, or --maps".into()));
                }
                if a.maps.is_some() && (a.a.is_some() || a.b.is_some()) {
                    return Err(CliError::Config("--maps cannot be combined with --a/--b".into()));
                }
                positive("depth", a.depth as u64)?;
                positive("samples", a.samples as u64)?;
                positive("max_degree", a.max_degree)?;
                positive_real("epsilon", a.epsilon)
            }
            Command::Dip(a) => {
                positive("horizon", a.horizon as u64)?;
                if let Some(t) = a.threshold {
                    positive("threshold", t)?;
                }
                positive_real("precision", a.precision)
            }
            Command::Ruelle(a) => {
                positive("res", a.res as u64)?;
                positive("iters", a.iters as u64)?;
                positive("depth", a.depth as u64)?;
                positive("samples", a.samples as u64)?;
                positive_real("extent", a.extent)?;
                positive_real("tol", a.tol)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_defaults_apply() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"command": {"name": "measure", "args": {"map": "z2.json", "out": "c.csv", "depth": 9}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 0);
        let Command::Measure(m) = &cfg.command else { panic!() };
        assert_eq!((m.depth, m.samples), (9, 20_000));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"command": {"name": "measure", "args": {"map": "z2.json", "out": "c.csv", "dpeth": 9}}}"#,
            r#"{"command": {"name": "structure", "args": {"maps": "m.json"}}, "sede": 1}"#,
            r#"{"command": {"name": "nonsense", "args": {}}}"#,
        ] {
            assert!(serde_json::from_str::<RunConfig>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn budgets_must_be_positive() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"command": {"name": "dip", "args": {"maps": "m.json", "z0": "2", "horizon": 0}}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
