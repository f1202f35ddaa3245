//! Run configuration files (TOML).
//!
//! Every key is optional. Omitted keys take their defaults, and unknown keys
//! are rejected. The top-level `seed` always wins over `pnm.seed`.

use std::fs;
use std::path::{Path, PathBuf};

use gangs::baseline::GanConfig;
use gangs::eval::EvalConfig;
use gangs::gang::GangSection;
use gangs::synth::MixtureSpec;
use gangs::{GangSpec, PnmConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// File name of the fully resolved configuration written into each run
/// directory.
pub const RESOLVED_CONFIG: &str = "resolved-config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Pnm,
    Gan,
    SolveMatrix,
    PnmMatrix,
    Eval,
    SampleData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: MixtureSpec,
    pub gang: GangSection,
    pub pnm: PnmConfig,
    pub gan: GanConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Pnm,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            data: MixtureSpec::default(),
            gang: GangSection::default(),
            pnm: PnmConfig::default(),
            gan: GanConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", origin.display())))?;
        cfg.resolved()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Syncs derived fields and validates every section.
    pub fn resolved(mut self) -> Result<Self, CliError> {
        self.pnm.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let named = |section: &str, e: gangs::Error| CliError::Config(format!("[{section}] {e}"));
        self.pnm.validate().map_err(|e| named("pnm", e))?;
        self.gan.validate().map_err(|e| named("gan", e))?;
        self.eval.validate().map_err(|e| named("eval", e))?;
        self.spec()?;
        Ok(())
    }

    pub fn spec(&self) -> Result<GangSpec, CliError> {
        self.gang.build(&self.data).map_err(|e| CliError::Config(format!("[gang]/[data] {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Writes the resolved configuration into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(RESOLVED_CONFIG);
        fs::write(&path, self.to_toml()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
