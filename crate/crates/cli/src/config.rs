//! Experiment configuration: a single TOML document per run.
//!
//! Every numeric field is validated against the library preconditions
//! before any computation starts, and the raw config bytes are hashed into
//! the outputs so a result file can always be traced to its exact input.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pqlab_core::dynamics::{AccuracyBudget, Envelope, PulseSpec};
use pqlab_core::protocols::NoiseSpec;
use pqlab_core::{Axis, LatticeSpec};

use crate::error_msg;
use anyhow::{bail, Context, Result};

/// Supported config schema; bumped on breaking layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub classify: ClassifySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    InitSweep,
    ManipSweep,
    SplittingScan,
    SpectrumFlow,
    Classify,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub n: usize,
    #[serde(default = "one")]
    pub j_x: f64,
    #[serde(default = "one")]
    pub j_y: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Ramp times for init sweeps; a single entry also serves spectrum-flow.
    #[serde(default)]
    pub tau_values: Vec<f64>,
    /// Evolution window as a multiple of tau.
    #[serde(default = "five")]
    pub t_final_factor: f64,
    /// Number of (t, error) samples kept per run.
    #[serde(default)]
    pub trace_samples: usize,
    /// Spectrum-flow sample times; defaults to a uniform grid.
    #[serde(default)]
    pub sample_count: usize,
}

fn five() -> f64 {
    5.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(default = "axis_y")]
    pub axis: String,
    /// Drive strengths to sweep; ignored when target_angle is set.
    #[serde(default)]
    pub g_values: Vec<f64>,
    /// Calibrate g_max to this rotation angle (radians) before sweeping noise.
    #[serde(default)]
    pub target_angle: Option<f64>,
    /// Pulse duration in units of 1/gap.
    #[serde(default = "default_duration")]
    pub duration_over_gap: f64,
    #[serde(default = "envelope_sin2")]
    pub envelope: String,
    /// Skew power for the skewed_sin2 envelope.
    #[serde(default = "skew_power")]
    pub envelope_power: f64,
}

fn axis_y() -> String {
    "Y".into()
}

fn default_duration() -> f64 {
    150.0
}

fn envelope_sin2() -> String {
    "sin2".into()
}

fn skew_power() -> f64 {
    1.5
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            axis: axis_y(),
            g_values: Vec::new(),
            target_angle: None,
            duration_over_gap: default_duration(),
            envelope: envelope_sin2(),
            envelope_power: skew_power(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "none_kind")]
    pub kind: String,
    #[serde(default)]
    pub axis: Option<String>,
    #[serde(default)]
    pub amplitude: f64,
    /// Amplitude grid for noise sweeps; overrides `amplitude`.
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub epsilon: f64,
}

fn none_kind() -> String {
    "none".into()
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kind: none_kind(),
            axis: None,
            amplitude: 0.0,
            amplitudes: Vec::new(),
            epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Splitting-scan perturbation axis.
    #[serde(default)]
    pub axis: Option<String>,
    /// Splitting-scan amplitudes.
    #[serde(default)]
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Fixed integrator step; 0 = derive from the accuracy budgets.
    #[serde(default)]
    pub dt: f64,
    /// RK4 phase-error budget over a run.
    #[serde(default = "phase_budget")]
    pub phase_budget: f64,
    /// Worker threads; 0 = all cores (or the THREADS env override).
    #[serde(default)]
    pub threads: usize,
}

fn phase_budget() -> f64 {
    1e-9
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seeds: Vec::new(),
            dt: 0.0,
            phase_budget: phase_budget(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    #[serde(default)]
    pub strings: Vec<String>,
    /// Optional (manipulation, noise) axis pair for scaling predictions.
    #[serde(default)]
    pub manip_axis: Option<String>,
    #[serde(default)]
    pub noise_axis: Option<String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).context("unparseable config")?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            );
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.lattice.n, self.lattice.j_x, self.lattice.j_y).map_err(error_msg)
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        let axis = |field: &Option<String>| -> Result<Axis> {
            field
                .as_deref()
                .ok_or_else(|| anyhow::anyhow!("noise.axis required for directional noise"))?
                .parse()
                .map_err(error_msg)
        };
        let spec = match self.noise.kind.as_str() {
            "none" => NoiseSpec::None,
            "directional" => NoiseSpec::Directional {
                axis: axis(&self.noise.axis)?,
                amplitude: self.noise.amplitude,
            },
            "random_orientation" => NoiseSpec::RandomOrientation {
                amplitude: self.noise.amplitude,
                seed: 0,
            },
            "coupling_fluctuation" => NoiseSpec::CouplingFluctuation {
                epsilon: self.noise.epsilon,
                seed: 0,
            },
            other => bail!("unknown noise kind `{other}`"),
        };
        spec.validate().map_err(error_msg)?;
        Ok(spec)
    }

    pub fn pulse(&self, gap: f64) -> Result<PulseSpec> {
        let axis: Axis = self.pulse.axis.parse().map_err(error_msg)?;
        let envelope = match self.pulse.envelope.as_str() {
            "sin2" => Envelope::SinSquared,
            "skewed_sin2" => Envelope::SkewedSinSquared {
                power: self.pulse.envelope_power,
            },
            other => bail!("unknown envelope `{other}`"),
        };
        let g_seed = self
            .pulse
            .g_values
            .iter()
            .cloned()
            .fold(f64::NAN, f64::max);
        let g_max = if g_seed.is_nan() { 0.05 * gap } else { g_seed };
        PulseSpec::new(axis, g_max, self.pulse.duration_over_gap / gap, envelope)
            .map_err(error_msg)
    }

    pub fn budget(&self) -> AccuracyBudget {
        AccuracyBudget {
            phase_error: self.run.phase_budget,
            ..AccuracyBudget::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let _ = self.lattice()?;
        let _ = self.noise()?;
        match self.kind {
            ExperimentKind::InitSweep => {
                if self.schedule.tau_values.is_empty() {
                    bail!("init_sweep needs schedule.tau_values");
                }
                for &tau in &self.schedule.tau_values {
                    if !(tau > 0.0) {
                        bail!("schedule.tau_values must be positive, got {tau}");
                    }
                }
                if !(self.schedule.t_final_factor > 0.0) {
                    bail!("schedule.t_final_factor must be positive");
                }
            }
            ExperimentKind::ManipSweep => {
                if self.pulse.g_values.is_empty() && self.pulse.target_angle.is_none() {
                    bail!("manip_sweep needs pulse.g_values or pulse.target_angle");
                }
                if let Some(angle) = self.pulse.target_angle {
                    if !(angle > 0.0 && angle < std::f64::consts::FRAC_PI_2) {
                        bail!("pulse.target_angle must lie in (0, pi/2), got {angle}");
                    }
                }
                for &g in &self.pulse.g_values {
                    if !(g > 0.0) {
                        bail!("pulse.g_values must be positive, got {g}");
                    }
                }
                if !(self.pulse.duration_over_gap > 0.0) {
                    bail!("pulse.duration_over_gap must be positive");
                }
            }
            ExperimentKind::SplittingScan => {
                if self.scan.amplitudes.is_empty() {
                    bail!("splitting_scan needs scan.amplitudes");
                }
                if self.scan.axis.is_none() {
                    bail!("splitting_scan needs scan.axis");
                }
            }
            ExperimentKind::SpectrumFlow => {
                if self.schedule.tau_values.len() != 1 {
                    bail!("spectrum_flow needs exactly one schedule.tau_values entry");
                }
            }
            ExperimentKind::Classify => {
                if self.classify.strings.is_empty() {
                    bail!("classify needs classify.strings");
                }
            }
        }
        if self.run.dt < 0.0 {
            bail!("run.dt must be nonnegative");
        }
        if !(self.run.phase_budget > 0.0) {
            bail!("run.phase_budget must be positive");
        }
        Ok(())
    }
}

/// SHA-256 of the raw config text, hex-encoded.
pub fn config_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
