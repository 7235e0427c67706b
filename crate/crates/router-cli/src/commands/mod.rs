//! Command implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;
use crate::format::Precision;
use crate::scenario::Scenario;

pub mod analyze;
pub mod ideal;
pub mod reproduce;
pub mod simulate;
pub mod sweep;

pub struct CmdContext {
    pub precision: Precision,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

impl CmdContext {
    /// Chosen output format, defaulting per command.
    pub fn format_or(&self, default: &str) -> String {
        self.format.clone().unwrap_or_else(|| default.to_string())
    }

    /// Fill unset format/path from the scenario's outputs section; explicit
    /// flags win.
    pub fn with_scenario_outputs(&self, scenario: &Scenario) -> CmdContext {
        CmdContext {
            precision: self.precision,
            format: self
                .format
                .clone()
                .or_else(|| scenario.outputs.format.clone()),
            out: self
                .out
                .clone()
                .or_else(|| scenario.outputs.path.as_ref().map(PathBuf::from)),
        }
    }

    /// Write the rendered output to the `--out` path or stdout.
    pub fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, text)?;
                Ok(())
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read scenario {path:?}: {e}")))?;
    Scenario::from_json(&text).map_err(|e| CliError::validation(e.to_string()))
}
