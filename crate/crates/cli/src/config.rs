//! The JSON run configuration. Every section has defaults, so `{}` is a
//! valid config describing the reference 32-mode device.

use std::path::{Path, PathBuf};

use ccbs_core::evolution::{Device, Integrator, PropagationOptions, DEFAULT_INPUTS, DEFAULT_MAX_POWER};
use ccbs_core::footprint::{default_mode_range, FootprintParams};
use ccbs_core::interference::Statistics;
use ccbs_core::lattice::{build_lattice, CouplingModel, HeaterBank, LatticeSpec};
use ccbs_core::reconstruction::{ReconstructionOptions, ScanSettings};
use ccbs_core::rng::{derive_seed, Stream};
use ccbs_core::validation::{BranchScoring, TestKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub lattice: LatticeSpec,
    pub coupling: CouplingModel,
    pub heaters: HeaterConfig,
    pub propagation: PropagationConfig,
    /// Unitary file written by `simulate`; when set it replaces propagation.
    pub unitary: Option<PathBuf>,
    /// Input modes fed with one photon each (four for the SPDC source).
    pub inputs: Vec<usize>,
    pub source: SourceConfig,
    pub statistics: Statistics,
    /// Output modes without a detector. Unset: the last mode for a fixed
    /// source, none for the SPDC source.
    pub discard_outputs: Option<Vec<usize>>,
    pub collision_free: bool,
    pub events: usize,
    /// Samples file written by `sample`; when unset `validate` draws its own.
    pub samples: Option<PathBuf>,
    pub validation: ValidationConfig,
    pub reconstruction: ReconstructionConfig,
    pub haar: HaarConfig,
    pub footprint: FootprintConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lattice: LatticeSpec::default(),
            coupling: CouplingModel::default(),
            heaters: HeaterConfig::default(),
            propagation: PropagationConfig::default(),
            unitary: None,
            inputs: DEFAULT_INPUTS[..3].to_vec(),
            source: SourceConfig::Fixed,
            statistics: Statistics::Indistinguishable,
            discard_outputs: None,
            collision_free: true,
            events: 300,
            samples: None,
            validation: ValidationConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            haar: HaarConfig::default(),
            footprint: FootprintConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeaterConfig {
    /// Explicit power per heater, mW.
    pub powers: Option<Vec<f64>>,
    /// Draw powers uniformly from `[0, max_power)` mW instead.
    pub max_power: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub n_steps: usize,
    pub integrator: Integrator,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        let d = PropagationOptions::default();
        Self { n_steps: d.n_steps, integrator: d.integrator }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceConfig {
    #[default]
    Fixed,
    /// Four-photon SPDC mixture with pair-rate ratio `r`.
    Spdc { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub test: TestKind,
    pub ensemble: usize,
    pub scoring: BranchScoring,
    /// Divide slopes by the slope of a distinguishable stream on the true circuit.
    pub normalize: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { test: TestKind::Distinguishable, ensemble: 200, scoring: BranchScoring::Marginalized, normalize: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomData {
    /// Exact plateaus and visibilities.
    Exact,
    /// Poisson noise at `plateau_counts` per plateau.
    Poisson,
    /// Simulated delay scans fitted dip by dip.
    #[default]
    DipScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ReconstructionConfig {
    pub data: HomData,
    /// Pairs of rows (indices into `inputs`) that were interfered; unset
    /// pairs every row with row 0.
    pub input_pairs: Option<Vec<(usize, usize)>>,
    pub scan: ScanSettings,
    pub options: ReconstructionOptions,
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HaarConfig {
    /// Column pairs drawn for the Haar similarity distribution.
    pub similarity_pairs: usize,
    /// Heater settings in the device ensemble.
    pub device_ensemble: usize,
    pub max_power: f64,
}

impl Default for HaarConfig {
    fn default() -> Self {
        Self { similarity_pairs: 10_000, device_ensemble: 20, max_power: DEFAULT_MAX_POWER }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FootprintConfig {
    #[serde(flatten)]
    pub params: FootprintParams,
    pub modes: Vec<usize>,
}

impl Default for FootprintConfig {
    fn default() -> Self {
        Self { params: FootprintParams::default(), modes: default_mode_range() }
    }
}

impl RunConfig {
    /// Reads `path` (or defaults when `None`); relative file references are
    /// resolved against the config's directory.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.unitary, &mut cfg.samples].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        PropagationOptions {
            n_steps: self.propagation.n_steps,
            integrator: self.propagation.integrator,
            ..PropagationOptions::default()
        }
    }

    /// The configured device; heater powers come from `heaters.powers`,
    /// else are drawn from the heater stream, else are all off.
    pub fn device(&self) -> Result<Device, CliError> {
        self.coupling.validate()?;
        let layout = build_lattice(&self.lattice)?;
        let mut bank = HeaterBank::device(&layout)?;
        let mut dev = Device { layout, model: self.coupling, bank: bank.clone() };
        let powers = match (&self.heaters.powers, self.heaters.max_power) {
            (Some(_), Some(_)) => return Err(CliError::Config("set heaters.powers or heaters.max_power, not both".into())),
            (Some(p), None) => p.clone(),
            (None, Some(max)) => {
                if !(max >= 0.0) {
                    return Err(CliError::Config(format!("heaters.max_power must be >= 0, got {max}")));
                }
                dev.random_powers(max, derive_seed(self.seed, Stream::Heaters))
            }
            (None, None) => vec![0.0; bank.heaters.len()],
        };
        bank = bank.with_powers(powers)?;
        dev.bank = bank;
        Ok(dev)
    }

    /// Detected output modes of an `m`-mode circuit.
    pub fn outputs(&self, m: usize) -> Result<Vec<usize>, CliError> {
        let discard = match &self.discard_outputs {
            Some(d) => d.clone(),
            None => match self.source {
                SourceConfig::Fixed => vec![m - 1],
                SourceConfig::Spdc { .. } => vec![],
            },
        };
        if let Some(bad) = discard.iter().find(|&&k| k >= m) {
            return Err(CliError::Config(format!("discarded output {bad} outside {m} modes")));
        }
        Ok((0..m).filter(|k| !discard.contains(k)).collect())
    }

    pub fn check_inputs(&self, m: usize) -> Result<(), CliError> {
        if self.inputs.is_empty() {
            return Err(CliError::Config("inputs must list at least one mode".into()));
        }
        if let Some(bad) = self.inputs.iter().find(|&&k| k >= m) {
            return Err(CliError::Config(format!("input mode {bad} outside {m} modes")));
        }
        Ok(())
    }
}
