//! Manifest-driven experiments. A manifest names a command and carries its
//! parameters as JSON; every omitted parameter takes the documented default,
//! and the report embeds the fully resolved manifest so that re-running it
//! reproduces the outputs.

mod params;
mod runners;

pub use params::{
    CriteriaCase, CriteriaParams, DuhamelCheck, Example4Params, FamilySpec, GlobalBoundCheck, KernelVerifyParams,
    OdeParams, PdeParams, PdeSweepParams, PhiParams, RefinementCheck, SlopeCheck, SweepCell, SweepParams,
};
pub use runners::{agreement, label, Agreement};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// File name of the JSON report written next to the CSV outputs.
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Criteria,
    Ode,
    Pde,
    Example4,
    DichotomySweep,
    KernelVerify,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Criteria,
        Command::Ode,
        Command::Pde,
        Command::Example4,
        Command::DichotomySweep,
        Command::KernelVerify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Criteria => "criteria",
            Command::Ode => "ode",
            Command::Pde => "pde",
            Command::Example4 => "example4",
            Command::DichotomySweep => "dichotomy-sweep",
            Command::KernelVerify => "kernel-verify",
        }
    }

    /// The default parameter object, with every field spelled out.
    pub fn default_parameters(&self) -> Value {
        let v = match self {
            Command::Criteria => serde_json::to_value(CriteriaParams::default()),
            Command::Ode => serde_json::to_value(OdeParams::default()),
            Command::Pde => serde_json::to_value(PdeParams::default()),
            Command::Example4 => serde_json::to_value(Example4Params::default()),
            Command::DichotomySweep => serde_json::to_value(SweepParams::default()),
            Command::KernelVerify => serde_json::to_value(KernelVerifyParams::default()),
        };
        v.expect("default parameters serialize")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Manifest(format!("unknown command '{s}'")))
    }
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub command: Command,
    #[serde(default = "empty_object")]
    pub parameters: Value,
    /// Recorded for reproducibility; none of the current runners sample
    /// randomly.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentManifest {
    pub fn new(command: Command) -> Self {
        ExperimentManifest {
            command,
            parameters: empty_object(),
            seed: 0,
            output_dir: None,
        }
    }

    pub fn with_parameters<P: Serialize>(command: Command, params: &P) -> Result<Self> {
        Ok(ExperimentManifest {
            parameters: serde_json::to_value(params)?,
            ..ExperimentManifest::new(command)
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }

    /// Parses the parameters against the command's schema and returns the
    /// manifest with every default filled in.
    pub fn resolved(&self) -> Result<ExperimentManifest> {
        let parameters = match self.command {
            Command::Criteria => resolve::<CriteriaParams>(&self.parameters)?,
            Command::Ode => resolve::<OdeParams>(&self.parameters)?,
            Command::Pde => resolve::<PdeParams>(&self.parameters)?,
            Command::Example4 => resolve::<Example4Params>(&self.parameters)?,
            Command::DichotomySweep => resolve::<SweepParams>(&self.parameters)?,
            Command::KernelVerify => resolve::<KernelVerifyParams>(&self.parameters)?,
        };
        Ok(ExperimentManifest {
            parameters,
            ..self.clone()
        })
    }

    /// Schema check without running anything.
    pub fn validate(&self) -> Result<()> {
        let m = self.resolved()?;
        match m.command {
            Command::Criteria => parse::<CriteriaParams>(&m.parameters)?.validate(),
            Command::Ode => parse::<OdeParams>(&m.parameters)?.validate(),
            Command::Pde => parse::<PdeParams>(&m.parameters)?.validate(),
            Command::Example4 => parse::<Example4Params>(&m.parameters)?.validate(),
            Command::DichotomySweep => parse::<SweepParams>(&m.parameters)?.validate(),
            Command::KernelVerify => parse::<KernelVerifyParams>(&m.parameters)?.validate(),
        }
    }
}

fn parse<T: DeserializeOwned + Default>(v: &Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::Manifest(format!("parameters: {e}")))
}

fn resolve<T: DeserializeOwned + Serialize + Default>(v: &Value) -> Result<Value> {
    Ok(serde_json::to_value(parse::<T>(v)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: ExperimentManifest,
    pub checks: Vec<Check>,
    /// Output files, relative to the output directory.
    pub files: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// A finished run: the report and the CSV tables, not yet written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<OutputFile>,
}

impl Outcome {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_str())
    }

    /// Writes every output file and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents)?;
            written.push(path);
        }
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&self.report)? + "\n")?;
        written.push(path);
        Ok(written)
    }
}

/// Collects named checks while a runner executes.
#[derive(Debug, Default)]
pub(crate) struct Checks(Vec<Check>);

impl Checks {
    pub(crate) fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        let c = Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        };
        if c.passed {
            log::debug!("pass {}: {}", c.name, c.detail);
        } else {
            log::info!("fail {}: {}", c.name, c.detail);
        }
        self.0.push(c);
    }

    /// Records a failed check for `Err` and returns the value for `Ok`.
    pub(crate) fn ok<T>(&mut self, name: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(name, false, e.to_string());
                None
            }
        }
    }
}

/// Runs the manifest. Module errors inside a run become failed checks so
/// that partial results are kept; only schema errors are returned as `Err`.
pub fn run(manifest: &ExperimentManifest) -> Result<Outcome> {
    let manifest = manifest.resolved()?;
    manifest.validate()?;
    let mut checks = Checks::default();
    let mut files = Vec::new();
    let p = &manifest.parameters;
    log::info!("running {}", manifest.command);
    match manifest.command {
        Command::Criteria => runners::criteria(&parse(p)?, &mut checks, &mut files),
        Command::Ode => runners::ode(&parse(p)?, &mut checks, &mut files),
        Command::Pde => runners::pde(&parse(p)?, &mut checks, &mut files),
        Command::Example4 => runners::example4(&parse(p)?, &mut checks, &mut files),
        Command::DichotomySweep => runners::sweep(&parse(p)?, &mut checks, &mut files),
        Command::KernelVerify => runners::kernel_verify(&parse(p)?, &mut checks, &mut files),
    }
    let report = Report {
        manifest,
        checks: checks.0,
        files: files.iter().map(|f: &OutputFile| f.name.clone()).collect(),
    };
    Ok(Outcome { report, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert!("sweep".parse::<Command>().is_err());
    }

    #[test]
    fn defaults_resolve_and_validate() {
        for c in Command::ALL {
            let m = ExperimentManifest::new(c);
            let r = m.resolved().unwrap();
            assert_eq!(r.parameters, c.default_parameters());
            r.validate().unwrap();
            // resolving is idempotent
            assert_eq!(r.resolved().unwrap(), r);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let m = ExperimentManifest::from_json(r#"{"command": "ode", "parameters": {"alpha": 2, "bogus": 1}}"#).unwrap();
        assert!(matches!(m.validate(), Err(Error::Manifest(_))));
        assert!(ExperimentManifest::from_json(r#"{"command": "ode", "extra": 1}"#).is_err());
        assert!(ExperimentManifest::from_json(r#"{"command": "nope"}"#).is_err());
    }

    #[test]
    fn partial_parameters_keep_other_defaults() {
        let m = ExperimentManifest::from_json(r#"{"command": "ode", "parameters": {"alpha": 1.0}}"#).unwrap();
        let r = m.resolved().unwrap();
        let p: OdeParams = serde_json::from_value(r.parameters).unwrap();
        assert_eq!(p.alpha, 1.0);
        assert_eq!(p.budget, crate::ode::OdeBudget::default());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let m = ExperimentManifest::from_json(
            r#"{"command": "ode", "parameters": {"sample": {"x0": [1, 10], "t0": [1]}}}"#,
        )
        .unwrap();
        assert!(m.validate().is_err());
        let m = ExperimentManifest::from_json(r#"{"command": "criteria", "parameters": {"cases": [{"f": {"kind": "power", "p": 0.5}, "alpha": 2, "n": 1}]}}"#).unwrap();
        assert!(m.validate().is_err());
    }
}
