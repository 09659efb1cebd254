//! Run-configuration file: a TOML document with a schema version, mirrored
//! onto the library types.
//!
//! All physical quantities are in units of the cavity frequency
//! (`omega_c = 1`). See `configs/fig1.cfg` for a complete annotated example.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use stirap_core::dynamics::{ModelVariant, PulsePair, SystemParams};
use stirap_core::hilbert::{QubitState, StateLabel};
use stirap_core::propagator::IntegratorOpts;
use stirap_core::sweep::{
    AxisParam, KappaRule, SweepAxis, SweepSpec, TauRule, WidthRule,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Field-level configuration problems; every entry names the offending field.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemSection,
    pub pulses: PulsesSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateSection>,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// "rwa" or "full_rabi".
    pub variant: String,
    #[serde(default = "default_omega_c")]
    pub omega_c: f64,
    #[serde(default)]
    pub delta_p: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub kappa: f64,
    /// Use -i kappa/2 on the photon term instead of the literal -i kappa.
    #[serde(default)]
    pub loss_halving: bool,
}

fn default_omega_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulsesSection {
    pub g_peak: f64,
    /// Gaussian width T.
    pub width: f64,
    /// Pulse delay; defaults to `tau_over_width * width`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_tau_over_width")]
    pub tau_over_width: f64,
    /// Protocol window; defaults to (-tau - 3 width, tau + 3 width).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

fn default_tau_over_width() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSection {
    pub amplitudes: Vec<AmplitudeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeEntry {
    pub n: usize,
    /// "g" or "e".
    pub q2: String,
    /// "g" or "e".
    pub q1: String,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Output times per trajectory.
    #[serde(default = "default_n_out")]
    pub n_out: usize,
}

fn default_n_max() -> usize {
    8
}
fn default_rtol() -> f64 {
    IntegratorOpts::default().rtol
}
fn default_atol() -> f64 {
    IntegratorOpts::default().atol
}
fn default_n_out() -> usize {
    601
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            n_max: default_n_max(),
            rtol: default_rtol(),
            atol: default_atol(),
            n_out: default_n_out(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: AxisSection,
    pub axis2: AxisSection,
    /// Hold gT constant: derive T = iso_gt / g_peak at every point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso_gt: Option<f64>,
    /// (g, kappa) pairs, linearly interpolated in g and clamped at the ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_table: Option<Vec<(f64, f64)>>,
    /// Output times per grid point (peak-leakage resolution); defaults to
    /// a coarser grid than single runs.
    #[serde(default = "default_sweep_n_out")]
    pub n_out: usize,
}

fn default_sweep_n_out() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    /// One of: g_peak, T, delta, delta_p, kappa.
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(default = "default_start_nmax")]
    pub start_nmax: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_start_nmax() -> usize {
    4
}
fn default_rel_tol() -> f64 {
    1e-6
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self {
            start_nmax: default_start_nmax(),
            rel_tol: default_rel_tol(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigErrors(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        if !matches!(self.system.variant.as_str(), "rwa" | "full_rabi") {
            errs.push(format!(
                "system.variant: must be \"rwa\" or \"full_rabi\", got {:?}",
                self.system.variant
            ));
        }
        if self.system.kappa < 0.0 {
            errs.push(format!(
                "system.kappa: must be non-negative, got {}",
                self.system.kappa
            ));
        }
        if !self.pulses.width.is_finite() || self.pulses.width <= 0.0 {
            errs.push(format!(
                "pulses.width: must be positive, got {}",
                self.pulses.width
            ));
        }
        if !self.pulses.g_peak.is_finite() || self.pulses.g_peak < 0.0 {
            errs.push(format!(
                "pulses.g_peak: must be non-negative, got {}",
                self.pulses.g_peak
            ));
        }
        let tau = self.tau();
        if !tau.is_finite() || tau <= 0.0 {
            errs.push(format!("pulses.tau: must be positive, got {tau}"));
        }
        match (self.pulses.t_start, self.pulses.t_end) {
            (Some(a), Some(b)) if a >= b => {
                errs.push(format!("pulses.t_start/t_end: empty window ({a}, {b})"));
            }
            (Some(_), None) | (None, Some(_)) => {
                errs.push("pulses.t_start/t_end: set both or neither".to_string());
            }
            _ => {}
        }
        if self.numerics.n_max < 1 {
            errs.push(format!(
                "numerics.n_max: must be at least 1, got {}",
                self.numerics.n_max
            ));
        }
        if self.numerics.n_out < 2 {
            errs.push(format!(
                "numerics.n_out: must be at least 2, got {}",
                self.numerics.n_out
            ));
        }
        if let Some(init) = &self.initial_state {
            if init.amplitudes.is_empty() {
                errs.push("initial_state.amplitudes: must not be empty".to_string());
            }
            for (k, a) in init.amplitudes.iter().enumerate() {
                for (field, value) in [("q2", &a.q2), ("q1", &a.q1)] {
                    if !matches!(value.as_str(), "g" | "e") {
                        errs.push(format!(
                            "initial_state.amplitudes[{k}].{field}: must be \"g\" or \"e\", got {value:?}"
                        ));
                    }
                }
                if a.n > self.numerics.n_max {
                    errs.push(format!(
                        "initial_state.amplitudes[{k}].n: {} exceeds numerics.n_max = {}",
                        a.n, self.numerics.n_max
                    ));
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            for (name, axis) in [("axis1", &sweep.axis1), ("axis2", &sweep.axis2)] {
                if AxisParam::from_name(&axis.param).is_none() {
                    errs.push(format!(
                        "sweep.{name}.param: unknown parameter {:?} (expected g_peak, T, delta, delta_p, or kappa)",
                        axis.param
                    ));
                }
                if axis.n_points < 2 {
                    errs.push(format!(
                        "sweep.{name}.n_points: must be at least 2, got {}",
                        axis.n_points
                    ));
                }
                if !axis.min.is_finite() || !axis.max.is_finite() || axis.min > axis.max {
                    errs.push(format!("sweep.{name}: min > max"));
                }
            }
            if sweep.axis1.param == sweep.axis2.param {
                errs.push("sweep.axis2.param: must differ from axis1".to_string());
            }
            if let Some(table) = &sweep.kappa_table {
                if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    errs.push("sweep.kappa_table: g values must be strictly increasing".to_string());
                }
                if table.iter().any(|(_, k)| *k < 0.0) {
                    errs.push("sweep.kappa_table: kappa values must be non-negative".to_string());
                }
            }
            if sweep.n_out < 2 {
                errs.push(format!(
                    "sweep.n_out: must be at least 2, got {}",
                    sweep.n_out
                ));
            }
        }
        if let Some(conv) = &self.converge {
            if conv.start_nmax < 1 {
                errs.push(format!(
                    "converge.start_nmax: must be at least 1, got {}",
                    conv.start_nmax
                ));
            }
            if !conv.rel_tol.is_finite() || conv.rel_tol <= 0.0 {
                errs.push(format!(
                    "converge.rel_tol: must be positive, got {}",
                    conv.rel_tol
                ));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    pub fn tau(&self) -> f64 {
        self.pulses
            .tau
            .unwrap_or(self.pulses.tau_over_width * self.pulses.width)
    }

    pub fn variant(&self) -> ModelVariant {
        match self.system.variant.as_str() {
            "rwa" => ModelVariant::Rwa,
            _ => ModelVariant::FullRabi,
        }
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            omega_c: self.system.omega_c,
            delta_p: self.system.delta_p,
            delta: self.system.delta,
            kappa: self.system.kappa,
            variant: self.variant(),
            loss_halving: self.system.loss_halving,
        }
    }

    pub fn pulse_pair(&self) -> Result<PulsePair, ConfigErrors> {
        let tau = self.tau();
        let result = match (self.pulses.t_start, self.pulses.t_end) {
            (Some(a), Some(b)) => PulsePair::new(self.pulses.g_peak, self.pulses.width, tau, (a, b)),
            _ => PulsePair::with_default_span(self.pulses.g_peak, self.pulses.width, tau),
        };
        result.map_err(|e| ConfigErrors(vec![format!("pulses: {e}")]))
    }

    pub fn integrator_opts(&self) -> IntegratorOpts {
        IntegratorOpts {
            rtol: self.numerics.rtol,
            atol: self.numerics.atol,
            ..Default::default()
        }
    }

    /// Initial state as (label, amplitude) pairs; `|0ge>` when the section is
    /// absent. The vector is normalized downstream; a warning is logged if
    /// the stated amplitudes are off unity by more than 1e-8.
    pub fn initial_amplitudes(&self) -> Vec<(StateLabel, Complex64)> {
        let Some(init) = &self.initial_state else {
            return vec![(
                StateLabel::new(0, QubitState::Ground, QubitState::Excited),
                Complex64::new(1.0, 0.0),
            )];
        };
        let conv = |s: &str| {
            if s == "e" {
                QubitState::Excited
            } else {
                QubitState::Ground
            }
        };
        let amps: Vec<(StateLabel, Complex64)> = init
            .amplitudes
            .iter()
            .map(|a| {
                (
                    StateLabel::new(a.n, conv(&a.q2), conv(&a.q1)),
                    Complex64::new(a.re, a.im),
                )
            })
            .collect();
        let norm_sq: f64 = amps.iter().map(|(_, z)| z.norm_sqr()).sum();
        if (norm_sq.sqrt() - 1.0).abs() > 1e-8 {
            log::warn!(
                "initial_state amplitudes have norm {:.12}; normalizing to 1",
                norm_sq.sqrt()
            );
        }
        amps
    }

    /// Assemble the sweep description; requires the `[sweep]` section.
    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigErrors> {
        let Some(sweep) = &self.sweep else {
            return Err(ConfigErrors(vec![
                "sweep: section required for the sweep command".to_string(),
            ]));
        };
        let axis = |a: &AxisSection| SweepAxis {
            param: AxisParam::from_name(&a.param).expect("validated"),
            min: a.min,
            max: a.max,
            n_points: a.n_points,
        };
        let spec = SweepSpec {
            axis1: axis(&sweep.axis1),
            axis2: axis(&sweep.axis2),
            base_params: self.system_params(),
            base_g_peak: self.pulses.g_peak,
            base_width: self.pulses.width,
            psi0: self.initial_amplitudes(),
            n_max: self.numerics.n_max,
            tau_rule: match self.pulses.tau {
                Some(tau) => TauRule::Fixed(tau),
                None => TauRule::FractionOfWidth(self.pulses.tau_over_width),
            },
            width_rule: match sweep.iso_gt {
                Some(a) => WidthRule::IsoGt(a),
                None => WidthRule::Base,
            },
            kappa_rule: match &sweep.kappa_table {
                Some(t) => KappaRule::Table(t.clone()),
                None => KappaRule::Base,
            },
            integrator: self.integrator_opts(),
            n_out: sweep.n_out,
        };
        spec.validate()
            .map_err(|e| ConfigErrors(vec![format!("sweep: {e}")]))?;
        Ok(spec)
    }
}
