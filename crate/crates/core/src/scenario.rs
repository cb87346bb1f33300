//! Scenario files, figure presets and the long-format results table.
//!
//! A scenario is a flat TOML document. Powers and noise are given in dBm and
//! converted to watts once, here. Layers are merged in order: defaults,
//! preset, scenario file, `--set key=value` overrides. Unknown keys are
//! rejected.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PathLossParams;
use crate::metrics::{dbm_to_watts, FrameConfig, LinkBudget, RateTargets};
use crate::montecarlo::{
    run_scenario, run_sweep, Estimate, ScenarioConfig, SchemeEstimate, SweepPoint, SweepSpec,
};
use crate::schemes::{AlgorithmSettings, SchemeKind};

/// How UE positions are drawn; recorded in run metadata.
pub const UE_SAMPLING: &str =
    "coordinate-uniform in (rho, theta, phi); theta bounds recomputed per draw from rho so z stays in [z_min, z_max]";

pub const PRESETS: [&str; 5] = ["fig-a", "fig-b", "fig-c", "fig-d", "fig-e"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    UrllcOutage,
    EmbbOutage,
    EmbbSe,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::UrllcOutage, Metric::EmbbOutage, Metric::EmbbSe];

    pub fn name(self) -> &'static str {
        match self {
            Metric::UrllcOutage => "urllc_outage",
            Metric::EmbbOutage => "embb_outage",
            Metric::EmbbSe => "embb_se",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("metrics", format!("unknown metric `{s}`")))
    }

    fn select(self, e: &SchemeEstimate) -> &Estimate {
        match self {
            Metric::UrllcOutage => &e.urllc_outage,
            Metric::EmbbOutage => &e.embb_outage,
            Metric::EmbbSe => &e.embb_se,
        }
    }

    fn is_proportion(self) -> bool {
        !matches!(self, Metric::EmbbSe)
    }
}

/// Flat scenario document. Every field has the baseline default, so an empty
/// file describes the baseline deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub num_elements: usize,
    /// Meters.
    pub wavelength: f64,
    pub path_loss_exponent: f64,
    pub ref_gain: f64,
    /// Meters.
    pub ref_distance: f64,
    /// Meters; the far-field distance of the RIS when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_min: Option<f64>,
    pub rho_max: f64,
    /// Radians.
    pub phi_min: f64,
    pub phi_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embb_radius: Option<f64>,
    pub p_embb_dbm: f64,
    pub p_urllc_dbm: f64,
    pub noise_dbm: f64,
    pub frame_minislots: u32,
    pub urllc_minislots: u32,
    pub preamble_minislots: u32,
    pub switching_minislots: u32,
    /// Seconds.
    pub minislot_duration: f64,
    /// Hertz.
    pub bandwidth: f64,
    pub symbols_per_minislot: u32,
    /// Seconds.
    pub processing_delay: f64,
    pub r_embb: f64,
    pub r_urllc: f64,
    pub schemes: Vec<String>,
    pub miss_rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub in_tolerance: f64,
    pub in_max_iterations: usize,
    pub urllc_occurred: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<String>,
    pub sweep_values: Vec<f64>,
    pub metrics: Vec<String>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let c = ScenarioConfig::default();
        Self {
            num_elements: c.num_elements,
            wavelength: c.wavelength,
            path_loss_exponent: c.path_loss.exponent,
            ref_gain: c.path_loss.ref_gain,
            ref_distance: c.path_loss.ref_distance,
            rho_min: c.rho_min,
            rho_max: c.rho_max,
            phi_min: c.phi_min,
            phi_max: c.phi_max,
            z_min: c.z_min,
            z_max: c.z_max,
            bs_distance: c.bs_distance,
            embb_radius: c.embb_radius,
            p_embb_dbm: 23.0,
            p_urllc_dbm: 23.0,
            noise_dbm: -90.0,
            frame_minislots: c.frame.total,
            urllc_minislots: c.frame.urllc,
            preamble_minislots: c.frame.preamble,
            switching_minislots: c.frame.switching,
            minislot_duration: c.frame.slot_duration,
            bandwidth: c.frame.bandwidth,
            symbols_per_minislot: c.frame.symbols_per_slot,
            processing_delay: c.frame.processing_delay,
            r_embb: c.targets.embb,
            r_urllc: c.targets.urllc,
            schemes: c.schemes.iter().map(|k| k.name().to_string()).collect(),
            miss_rate: c.miss_rate,
            trials: c.trials,
            seed: c.seed,
            in_tolerance: c.algorithms.in_tolerance,
            in_max_iterations: c.algorithms.in_max_iterations,
            urllc_occurred: c.urllc_occurred,
            sweep_param: None,
            sweep_values: vec![],
            metrics: Metric::ALL.iter().map(|m| m.name().to_string()).collect(),
        }
    }
}

/// Fully resolved run: scenario, optional sweep and emitted metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub file: ScenarioFile,
    pub config: ScenarioConfig,
    pub sweep: Option<SweepSpec>,
    pub metrics: Vec<Metric>,
}

impl ScenarioFile {
    pub fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(offending_key(&e), e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are always serializable")
    }

    /// Converts to simulator types and validates everything, sweep grid included.
    pub fn resolve(&self) -> Result<Resolved> {
        let schemes = self
            .schemes
            .iter()
            .map(|s| s.parse::<SchemeKind>())
            .collect::<Result<Vec<_>>>()?;
        let metrics = self
            .metrics
            .iter()
            .map(|s| Metric::parse(s))
            .collect::<Result<Vec<_>>>()?;
        if metrics.is_empty() {
            return Err(Error::config("metrics", "at least one metric is required"));
        }
        let config = ScenarioConfig {
            num_elements: self.num_elements,
            wavelength: self.wavelength,
            path_loss: PathLossParams {
                ref_gain: self.ref_gain,
                ref_distance: self.ref_distance,
                exponent: self.path_loss_exponent,
            },
            rho_min: self.rho_min,
            rho_max: self.rho_max,
            phi_min: self.phi_min,
            phi_max: self.phi_max,
            z_min: self.z_min,
            z_max: self.z_max,
            bs_distance: self.bs_distance,
            embb_radius: self.embb_radius,
            budget: LinkBudget {
                p_embb: dbm_to_watts(self.p_embb_dbm),
                p_urllc: dbm_to_watts(self.p_urllc_dbm),
                noise: dbm_to_watts(self.noise_dbm),
            },
            frame: FrameConfig {
                total: self.frame_minislots,
                urllc: self.urllc_minislots,
                preamble: self.preamble_minislots,
                switching: self.switching_minislots,
                slot_duration: self.minislot_duration,
                bandwidth: self.bandwidth,
                symbols_per_slot: self.symbols_per_minislot,
                processing_delay: self.processing_delay,
            },
            targets: RateTargets {
                embb: self.r_embb,
                urllc: self.r_urllc,
            },
            schemes,
            miss_rate: self.miss_rate,
            trials: self.trials,
            seed: self.seed,
            algorithms: AlgorithmSettings {
                in_tolerance: self.in_tolerance,
                in_max_iterations: self.in_max_iterations,
            },
            urllc_occurred: self.urllc_occurred,
        };
        let sweep = match &self.sweep_param {
            Some(name) => Some(SweepSpec {
                param: name.parse()?,
                values: self.sweep_values.clone(),
            }),
            None if !self.sweep_values.is_empty() => {
                return Err(Error::config(
                    "sweep_param",
                    "sweep_values given without a sweep parameter",
                ))
            }
            None => None,
        };
        match &sweep {
            Some(spec) => spec.validate(&config)?,
            None => config.validate()?,
        }
        Ok(Resolved {
            file: self.clone(),
            config,
            sweep,
            metrics,
        })
    }
}

fn offending_key(e: &toml::de::Error) -> String {
    let msg = e.message();
    // serde reports unknown or mistyped fields with the name in backticks
    msg.split('`').nth(1).unwrap_or("scenario").to_string()
}

/// Parses a scenario document into a table of keys.
pub fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::config("scenario", e.message().to_string()))
}

/// Parses one `key=value` override. Values are TOML literals; anything that
/// does not parse as one is taken as a bare string.
pub fn parse_override(arg: &str) -> Result<(String, toml::Value)> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| Error::config(arg, "override must have the form key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.contains('.') {
        return Err(Error::config(
            key,
            "override keys must be plain scenario keys",
        ));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

/// Overlays `top` on `base`, key by key.
pub fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        base.insert(k, v);
    }
}

/// Overrides defining each figure preset. Grids span the ranges of the
/// corresponding figure panels; exact axis points are approximations.
pub fn preset_table(name: &str) -> Result<toml::Table> {
    let text = match name {
        // URLLC outage vs target SE
        "fig-a" => {
            r#"
            sweep_param = "r_urllc"
            sweep_values = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
            metrics = ["urllc_outage"]
            "#
        }
        // URLLC outage vs p_e / p_u at p_u = 23 dBm
        "fig-b" => {
            r#"
            p_urllc_dbm = 23.0
            sweep_param = "power_ratio_db"
            sweep_values = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
            metrics = ["urllc_outage"]
            "#
        }
        // URLLC outage vs miss-detection rate
        "fig-c" => {
            r#"
            sweep_param = "miss_rate"
            sweep_values = [0.0, 0.001, 0.01, 0.1, 1.0]
            metrics = ["urllc_outage"]
            "#
        }
        // URLLC outage vs RIS size with the region and BS pinned at 18 m
        "fig-d" => {
            r#"
            rho_min = 18.0
            bs_distance = 18.0
            sweep_param = "num_elements"
            sweep_values = [36.0, 64.0, 100.0, 196.0]
            metrics = ["urllc_outage"]
            "#
        }
        // eMBB SE vs transmit power at the cell edge
        "fig-e" => {
            r#"
            embb_radius = 100.0
            schemes = ["missed_preamble"]
            sweep_param = "p_embb_dbm"
            sweep_values = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
            metrics = ["embb_se"]
            "#
        }
        other => {
            return Err(Error::config(
                "preset",
                format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                ),
            ))
        }
    };
    parse_table(text)
}

/// Scenario and sweep of a figure preset.
pub fn preset(name: &str) -> Result<(ScenarioConfig, SweepSpec)> {
    let resolved = ScenarioFile::from_table(preset_table(name)?)?.resolve()?;
    let sweep = resolved.sweep.expect("every preset defines a sweep");
    Ok((resolved.config, sweep))
}

/// Builds a resolved scenario from the layered inputs.
pub fn resolve_layers(
    preset: Option<&str>,
    file: Option<&str>,
    overrides: &[String],
) -> Result<Resolved> {
    let mut table = toml::Table::new();
    if let Some(name) = preset {
        merge(&mut table, preset_table(name)?);
    }
    if let Some(text) = file {
        merge(&mut table, parse_table(text)?);
    }
    for arg in overrides {
        let (k, v) = parse_override(arg)?;
        table.insert(k, v);
    }
    ScenarioFile::from_table(table)?.resolve()
}

/// One line of the long-format results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub scheme: String,
    pub metric: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub seed: u64,
    pub in_convergence_rate: Option<f64>,
    pub in_mean_iterations: Option<f64>,
    pub pr_mean_relative_residual: Option<f64>,
    pub trial_errors: u64,
}

pub const CSV_HEADER: [&str; 13] = [
    "sweep_param",
    "sweep_value",
    "scheme",
    "metric",
    "estimate",
    "ci_low",
    "ci_high",
    "n",
    "seed",
    "in_convergence_rate",
    "in_mean_iterations",
    "pr_mean_relative_residual",
    "trial_errors",
];

/// Result of executing a resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub points: Vec<SweepPoint>,
    pub rows: Vec<ResultRow>,
    /// Human-readable notes, e.g. estimates whose interval reaches zero.
    pub warnings: Vec<String>,
}

pub fn execute(resolved: &Resolved, workers: usize) -> Result<RunOutput> {
    let points = match &resolved.sweep {
        Some(spec) => run_sweep(spec, &resolved.config, workers)?,
        None => vec![SweepPoint {
            value: f64::NAN,
            estimates: run_scenario(&resolved.config, workers)?,
        }],
    };
    let param = resolved
        .sweep
        .as_ref()
        .map_or("none".to_string(), |s| s.param.name().to_string());
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for point in &points {
        let value = resolved.sweep.as_ref().map(|_| point.value);
        for est in &point.estimates {
            for &metric in &resolved.metrics {
                let e = metric.select(est);
                if metric.is_proportion() && e.ci_low <= 0.0 {
                    warnings.push(format!(
                        "{} of {} at {}={}: interval [{}, {}] includes 0; more trials needed to resolve this floor",
                        metric.name(),
                        est.scheme,
                        param,
                        value.map_or("-".to_string(), |v| v.to_string()),
                        e.ci_low,
                        e.ci_high
                    ));
                }
                let d = &est.diagnostics;
                rows.push(ResultRow {
                    sweep_param: param.clone(),
                    sweep_value: value,
                    scheme: est.scheme.name().to_string(),
                    metric: metric.name().to_string(),
                    estimate: e.value,
                    ci_low: e.ci_low,
                    ci_high: e.ci_high,
                    n: e.n,
                    seed: resolved.config.seed,
                    in_convergence_rate: d.nulling_convergence_rate(),
                    in_mean_iterations: d.nulling_mean_iterations(),
                    pr_mean_relative_residual: d.partition_mean_relative_residual(),
                    trial_errors: d.trial_errors,
                });
            }
        }
    }
    Ok(RunOutput {
        points,
        rows,
        warnings,
    })
}

/// Writes the rows as CSV with the fixed header.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> std::io::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()
}

/// Sidecar written next to the CSV; `scenario_toml` re-runs the experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub trials: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub ue_sampling: String,
    pub scenario_toml: String,
    pub warnings: Vec<String>,
}

impl RunMetadata {
    pub fn new(
        resolved: &Resolved,
        preset: Option<&str>,
        workers: usize,
        wall_time_seconds: f64,
        warnings: Vec<String>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            preset: preset.map(str::to_string),
            seed: resolved.config.seed,
            trials: resolved.config.trials,
            workers,
            wall_time_seconds,
            ue_sampling: UE_SAMPLING.to_string(),
            scenario_toml: resolved.file.to_toml(),
            warnings,
        }
    }
}
