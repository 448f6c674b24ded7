//! Experiment description files (JSON, versioned by `schema_version`).

use std::path::{Path, PathBuf};

use irsradar_core::scene::{IrsConfig, Point, SceneConfig, DEFAULT_WAVELENGTH, SPEED_OF_LIGHT};
use irsradar_core::UberConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsSpec {
    pub position: [f64; 2],
    pub n_elements: usize,
    /// Element spacing in meters; half a wavelength when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub radar_position: [f64; 2],
    pub target_position: [f64; 2],
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar_spacing: Option<f64>,
    pub n_samples: usize,
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
    #[serde(default)]
    pub irs_list: Vec<IrsSpec>,
    #[serde(default = "default_sampling_interval")]
    pub sampling_interval: f64,
    #[serde(default = "default_speed")]
    pub speed_of_light: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UberSpec {
    #[serde(default = "default_outer")]
    pub outer_iterations: usize,
    #[serde(default = "default_inner")]
    pub inner_iterations: usize,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_waveform_steps")]
    pub waveform_steps: usize,
}

impl Default for UberSpec {
    fn default() -> Self {
        Self {
            outer_iterations: default_outer(),
            inner_iterations: default_inner(),
            penalty: default_penalty(),
            waveform_steps: default_waveform_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Final bound for every noise variance; `irs_counts` adds rows for
    /// prefixes of the IRS list (all platforms when omitted).
    Sigma {
        sigma2: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        irs_counts: Option<Vec<usize>>,
    },
    /// Final bound for each IRS-count prefix at the scene noise variance.
    IrsCount { irs_counts: Vec<usize> },
    /// Bound after every outer iteration at the scene noise variance.
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub scene: SceneSpec,
    #[serde(default)]
    pub uber: UberSpec,
    pub sweep: SweepSpec,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Fill the `wall_time_ms` column. Off by default so output is reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}
fn default_noise() -> f64 {
    0.1
}
fn default_sampling_interval() -> f64 {
    1e-6
}
fn default_speed() -> f64 {
    SPEED_OF_LIGHT
}
fn default_outer() -> usize {
    50
}
fn default_inner() -> usize {
    20
}
fn default_penalty() -> f64 {
    0.1
}
fn default_waveform_steps() -> usize {
    1
}
fn default_seeds() -> usize {
    1
}

/// Logarithmic grid of `points` values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

impl ExperimentSpec {
    /// The three-IRS benchmark with a σ² sweep over `[0.01, 10]` comparing
    /// one platform against all three.
    pub fn fig1() -> Self {
        let irs_list = [[500.0, 500.0], [500.0, -800.0], [300.0, 1300.0]]
            .into_iter()
            .map(|position| IrsSpec {
                position,
                n_elements: 8,
                spacing: None,
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            scene: SceneSpec {
                radar_position: [0.0, 0.0],
                target_position: [5000.0, 5000.0],
                wavelength: DEFAULT_WAVELENGTH,
                n_tx: 8,
                n_rx: 8,
                radar_spacing: None,
                n_samples: 16,
                noise_variance: 0.1,
                irs_list,
                sampling_interval: default_sampling_interval(),
                speed_of_light: SPEED_OF_LIGHT,
            },
            uber: UberSpec::default(),
            sweep: SweepSpec::Sigma {
                sigma2: log_grid(0.01, 10.0, 7),
                irs_counts: Some(vec![1, 3]),
            },
            n_seeds: 20,
            base_seed: 1,
            record_timing: false,
            output_path: None,
        }
    }

    /// [`ExperimentSpec::fig1`] as an iteration trace at σ² = 0.1.
    pub fn fig1_trace() -> Self {
        Self {
            sweep: SweepSpec::Trace,
            ..Self::fig1()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| SpecError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(move |i| self.base_seed.wrapping_add(i))
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let invalid = |msg: String| Err(SpecError::Invalid(msg));
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.scene.irs_list.is_empty() {
            return invalid("scene.irs_list must contain at least one IRS".into());
        }
        if self.n_seeds == 0 {
            return invalid("n_seeds must be at least 1".into());
        }
        if self.scene.noise_variance.is_nan() || self.scene.noise_variance <= 0.0 {
            return invalid(format!(
                "scene.noise_variance must be positive, got {}",
                self.scene.noise_variance
            ));
        }
        let n_irs = self.scene.irs_list.len();
        let check_counts = |counts: &[usize]| -> Result<(), SpecError> {
            if counts.is_empty() {
                return Err(SpecError::Invalid(
                    "sweep.irs_counts must be nonempty".into(),
                ));
            }
            if let Some(bad) = counts.iter().find(|&&m| m == 0 || m > n_irs) {
                return Err(SpecError::Invalid(format!(
                    "sweep.irs_counts entry {bad} must be between 1 and {n_irs}"
                )));
            }
            Ok(())
        };
        match &self.sweep {
            SweepSpec::Sigma { sigma2, irs_counts } => {
                if sigma2.is_empty() {
                    return invalid("sweep.sigma2 must be nonempty".into());
                }
                if let Some(bad) = sigma2.iter().find(|s| !s.is_finite() || **s <= 0.0) {
                    return invalid(format!("sweep.sigma2 entry {bad} must be positive"));
                }
                if let Some(counts) = irs_counts {
                    check_counts(counts)?;
                }
            }
            SweepSpec::IrsCount { irs_counts } => check_counts(irs_counts)?,
            SweepSpec::Trace => {}
        }
        self.scene_config()
            .validate()
            .map_err(|e| SpecError::Invalid(e.to_string()))?;
        self.uber_config()
            .validate()
            .map_err(|e| SpecError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Core scene with spacing defaults applied (half a wavelength).
    pub fn scene_config(&self) -> SceneConfig {
        let s = &self.scene;
        let half = s.wavelength / 2.0;
        SceneConfig {
            radar_position: Point::new(s.radar_position[0], s.radar_position[1]),
            target_position: Point::new(s.target_position[0], s.target_position[1]),
            wavelength: s.wavelength,
            n_tx: s.n_tx,
            n_rx: s.n_rx,
            radar_spacing: s.radar_spacing.unwrap_or(half),
            n_samples: s.n_samples,
            irs: s
                .irs_list
                .iter()
                .map(|p| IrsConfig {
                    position: Point::new(p.position[0], p.position[1]),
                    n_elements: p.n_elements,
                    spacing: p.spacing.unwrap_or(half),
                })
                .collect(),
            noise_variance: s.noise_variance,
            seed: self.base_seed,
            sampling_interval: s.sampling_interval,
            speed_of_light: s.speed_of_light,
        }
    }

    pub fn uber_config(&self) -> UberConfig {
        UberConfig {
            outer_iterations: self.uber.outer_iterations,
            inner_iterations: self.uber.inner_iterations,
            penalty: self.uber.penalty,
            waveform_steps: self.uber.waveform_steps,
        }
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentSpec::from_json(&text)
}
