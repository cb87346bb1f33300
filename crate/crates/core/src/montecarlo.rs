//! Seeded Monte-Carlo batches, estimators and parameter sweeps.
//!
//! Trials are split into fixed-size chunks by index. Each chunk accumulates
//! sequentially and chunks are merged in index order, so the floating-point
//! sums (and therefore every reported number) are identical for any worker
//! count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, bs_position, far_field_distance, ChannelRealization, Deployment, PathLossParams,
    RisGeometry, UeRegion,
};
use crate::metrics::{dbm_to_watts, watts_to_dbm, FrameConfig, LinkBudget, RateTargets};
use crate::schemes::{
    AlgorithmSettings, DetectionModel, Diagnostics, SchemeKind, TrialContext, TrialParams,
};
use crate::streams::{Purpose, TrialStreams};

/// Trials per accumulation chunk. Part of the numeric contract: changing it
/// changes the summation order of the SE estimates.
const CHUNK: u64 = 512;

/// Normal quantile for 95% intervals.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_elements: usize,
    pub wavelength: f64,
    pub path_loss: PathLossParams,
    /// Lower radial bound of the UE region; the RIS far-field distance when unset.
    pub rho_min: Option<f64>,
    pub rho_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// BS distance from the RIS center; the far-field distance when unset.
    pub bs_distance: Option<f64>,
    /// Fixed radial distance of the eMBB UE (angles still sampled).
    pub embb_radius: Option<f64>,
    pub budget: LinkBudget,
    pub frame: FrameConfig,
    pub targets: RateTargets,
    pub schemes: Vec<SchemeKind>,
    pub miss_rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub algorithms: AlgorithmSettings,
    pub urllc_occurred: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let region = UeRegion::default();
        Self {
            num_elements: 100,
            wavelength: 0.1,
            path_loss: PathLossParams::default(),
            rho_min: None,
            rho_max: region.rho_max,
            phi_min: region.phi_min,
            phi_max: region.phi_max,
            z_min: region.z_min,
            z_max: region.z_max,
            bs_distance: None,
            embb_radius: None,
            budget: LinkBudget::default(),
            frame: FrameConfig::default(),
            targets: RateTargets {
                embb: 1.0,
                urllc: 4.0,
            },
            schemes: SchemeKind::ALL.to_vec(),
            miss_rate: 0.0,
            trials: 100_000,
            seed: 0,
            algorithms: AlgorithmSettings::default(),
            urllc_occurred: true,
        }
    }
}

impl ScenarioConfig {
    pub fn far_field_distance(&self) -> f64 {
        far_field_distance(self.num_elements, self.wavelength)
    }

    pub fn region(&self) -> UeRegion {
        UeRegion {
            rho_min: self.rho_min.unwrap_or_else(|| self.far_field_distance()),
            rho_max: self.rho_max,
            phi_min: self.phi_min,
            phi_max: self.phi_max,
            z_min: self.z_min,
            z_max: self.z_max,
        }
    }

    pub fn geometry(&self) -> Result<RisGeometry> {
        RisGeometry::new(self.num_elements, self.wavelength)
    }

    pub fn bs_distance(&self) -> f64 {
        self.bs_distance
            .unwrap_or_else(|| self.far_field_distance())
    }

    pub fn trial_params(&self) -> Result<TrialParams> {
        Ok(TrialParams {
            budget: self.budget,
            frame: self.frame,
            targets: self.targets,
            detection: DetectionModel::new(self.miss_rate)?,
            algorithms: self.algorithms,
            urllc_occurred: self.urllc_occurred,
        })
    }

    /// Rejects inconsistent configurations before any trial runs.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "at least one scheme is required"));
        }
        let geometry = self
            .geometry()
            .map_err(|e| Error::config("num_elements", e.to_string()))?;
        self.path_loss.validate()?;
        self.region()
            .validate_for(&geometry)
            .map_err(|e| Error::config("rho_min", e.to_string()))?;
        let rho_f = geometry.far_field_distance();
        let bs = self.bs_distance();
        if !(bs.is_finite() && bs > 0.0) || bs < rho_f {
            return Err(Error::config(
                "bs_distance",
                format!(
                    "BS distance {bs} must be positive and outside the far-field distance {rho_f}"
                ),
            ));
        }
        if let Some(r) = self.embb_radius {
            let region = self.region();
            if !(r.is_finite() && r >= rho_f && r > region.z_min.abs() && r > region.z_max.abs()) {
                return Err(Error::config(
                    "embb_radius",
                    format!(
                        "radius {r} must exceed the far-field distance and the vertical bounds"
                    ),
                ));
            }
        }
        self.budget.validate()?;
        self.frame.validate()?;
        self.targets.validate()?;
        DetectionModel::new(self.miss_rate)?;
        self.algorithms.validate()?;
        Ok(())
    }

    pub fn deployment(&self) -> Result<Deployment> {
        Deployment::new(
            self.geometry()?,
            self.path_loss,
            bs_position(self.bs_distance()),
        )
    }
}

/// Point estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub n: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn std_error(&self) -> f64 {
        (self.value * (1.0 - self.value) / self.n as f64).sqrt()
    }
}

/// Wilson score interval at 95%.
pub fn estimate_proportion(successes: u64, n: u64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::config("n", "sample count must be positive"));
    }
    if successes > n {
        return Err(Error::config("successes", "cannot exceed the sample count"));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Ok(Estimate {
        value: p,
        n,
        ci_low: (center - half).max(0.0).min(p),
        ci_high: (center + half).min(1.0).max(p),
    })
}

/// Sample mean with a normal-approximation 95% interval.
pub fn estimate_mean(sum: f64, sum_sq: f64, n: u64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::config("n", "sample count must be positive"));
    }
    let nf = n as f64;
    let mean = sum / nf;
    let half = if n > 1 {
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Z_95 * (var / nf).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        value: mean,
        n,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

/// Algorithm health over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchDiagnostics {
    pub nulling_runs: u64,
    pub nulling_converged: u64,
    pub nulling_iterations: u64,
    pub partition_runs: u64,
    pub partition_relative_residual_sum: f64,
    /// Trials that failed and were excluded from the estimates.
    pub trial_errors: u64,
}

impl BatchDiagnostics {
    pub fn nulling_convergence_rate(&self) -> Option<f64> {
        (self.nulling_runs > 0).then(|| self.nulling_converged as f64 / self.nulling_runs as f64)
    }

    pub fn nulling_mean_iterations(&self) -> Option<f64> {
        (self.nulling_runs > 0).then(|| self.nulling_iterations as f64 / self.nulling_runs as f64)
    }

    pub fn partition_mean_relative_residual(&self) -> Option<f64> {
        (self.partition_runs > 0)
            .then(|| self.partition_relative_residual_sum / self.partition_runs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeEstimate {
    pub scheme: SchemeKind,
    pub urllc_outage: Estimate,
    pub embb_outage: Estimate,
    pub embb_se: Estimate,
    pub diagnostics: BatchDiagnostics,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    n: u64,
    urllc_outages: u64,
    embb_outages: u64,
    se_sum: f64,
    se_sum_sq: f64,
    diag: BatchDiagnostics,
}

impl Accumulator {
    fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        self.urllc_outages += other.urllc_outages;
        self.embb_outages += other.embb_outages;
        self.se_sum += other.se_sum;
        self.se_sum_sq += other.se_sum_sq;
        let d = &mut self.diag;
        let o = &other.diag;
        d.nulling_runs += o.nulling_runs;
        d.nulling_converged += o.nulling_converged;
        d.nulling_iterations += o.nulling_iterations;
        d.partition_runs += o.partition_runs;
        d.partition_relative_residual_sum += o.partition_relative_residual_sum;
        d.trial_errors += o.trial_errors;
    }
}

/// Draws both UE positions of a trial and synthesizes its channels.
pub fn sample_channels(
    config: &ScenarioConfig,
    deployment: &Deployment,
    streams: &TrialStreams,
) -> Result<ChannelRealization> {
    let region = config.region();
    let mut rng = streams.rng(Purpose::EmbbPlacement);
    let embb = match config.embb_radius {
        Some(r) => geometry::sample_at_radius(&region, r, &mut rng)?,
        None => geometry::sample_ue_position(&region, &mut rng)?,
    };
    let urllc = geometry::sample_ue_position(&region, &mut streams.rng(Purpose::UrllcPlacement))?;
    deployment.realize(&embb, &urllc)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// Runs every configured scheme on the same sampled channels of each trial.
/// `workers == 0` lets the thread pool pick.
pub fn run_scenario(config: &ScenarioConfig, workers: usize) -> Result<Vec<SchemeEstimate>> {
    config.validate()?;
    let deployment = config.deployment()?;
    run_scenario_with(config, workers, |streams| {
        sample_channels(config, &deployment, streams)
    })
}

/// As [`run_scenario`], with channels supplied by `source` for each trial.
/// Only the link, frame, target, detection and algorithm fields of `config`
/// are validated.
pub fn run_scenario_with<F>(
    config: &ScenarioConfig,
    workers: usize,
    source: F,
) -> Result<Vec<SchemeEstimate>>
where
    F: Fn(&TrialStreams) -> Result<ChannelRealization> + Sync,
{
    if config.trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    if config.schemes.is_empty() {
        return Err(Error::config("schemes", "at least one scheme is required"));
    }
    config.budget.validate()?;
    config.frame.validate()?;
    config.targets.validate()?;
    config.algorithms.validate()?;
    let params = config.trial_params()?;
    let schemes = &config.schemes;

    let run_chunk = |chunk: u64| -> Vec<Accumulator> {
        let mut acc = vec![Accumulator::default(); schemes.len()];
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(config.trials);
        for trial in start..end {
            let streams = TrialStreams::new(config.seed, trial);
            let Ok(channels) = source(&streams) else {
                acc.iter_mut().for_each(|a| a.diag.trial_errors += 1);
                continue;
            };
            let Ok(context) = TrialContext::new(&channels, &params, streams) else {
                acc.iter_mut().for_each(|a| a.diag.trial_errors += 1);
                continue;
            };
            for (a, &scheme) in acc.iter_mut().zip(schemes) {
                match context.evaluate(scheme) {
                    Ok(out) => {
                        a.n += 1;
                        a.urllc_outages += out.outage_urllc as u64;
                        a.embb_outages += out.outage_embb as u64;
                        a.se_sum += out.mi_embb;
                        a.se_sum_sq += out.mi_embb * out.mi_embb;
                        match out.diagnostics {
                            Diagnostics::Nulling {
                                iterations,
                                converged,
                                ..
                            } => {
                                a.diag.nulling_runs += 1;
                                a.diag.nulling_converged += converged as u64;
                                a.diag.nulling_iterations += iterations as u64;
                            }
                            Diagnostics::PhasorRotation {
                                relative_residual, ..
                            } => {
                                a.diag.partition_runs += 1;
                                a.diag.partition_relative_residual_sum += relative_residual;
                            }
                            Diagnostics::None => {}
                        }
                    }
                    Err(_) => a.diag.trial_errors += 1,
                }
            }
        }
        acc
    };

    let chunks = config.trials.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<Accumulator>> =
        build_pool(workers)?.install(|| (0..chunks).into_par_iter().map(run_chunk).collect());

    let mut totals = vec![Accumulator::default(); schemes.len()];
    for chunk in &per_chunk {
        for (t, a) in totals.iter_mut().zip(chunk) {
            t.merge(a);
        }
    }

    schemes
        .iter()
        .zip(&totals)
        .map(|(&scheme, t)| {
            if t.n == 0 {
                return Err(Error::config(
                    "trials",
                    format!("every trial failed for scheme {scheme}"),
                ));
            }
            Ok(SchemeEstimate {
                scheme,
                urllc_outage: estimate_proportion(t.urllc_outages, t.n)?,
                embb_outage: estimate_proportion(t.embb_outages, t.n)?,
                embb_se: estimate_mean(t.se_sum, t.se_sum_sq, t.n)?,
                diagnostics: t.diag,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// URLLC target spectral efficiency, bits/s/Hz.
    RUrllc,
    /// `p_e / p_u` in dB with `p_u` held fixed.
    PowerRatioDb,
    MissRate,
    NumElements,
    /// eMBB transmit power in dBm.
    PEmbbDbm,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::RUrllc,
        SweepParam::PowerRatioDb,
        SweepParam::MissRate,
        SweepParam::NumElements,
        SweepParam::PEmbbDbm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::RUrllc => "r_urllc",
            SweepParam::PowerRatioDb => "power_ratio_db",
            SweepParam::MissRate => "miss_rate",
            SweepParam::NumElements => "num_elements",
            SweepParam::PEmbbDbm => "p_embb_dbm",
        }
    }

    /// Returns `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut config = base.clone();
        if !value.is_finite() {
            return Err(Error::config(
                "sweep_values",
                format!("non-finite value {value}"),
            ));
        }
        match self {
            SweepParam::RUrllc => config.targets.urllc = value,
            SweepParam::PowerRatioDb => {
                let p_u_dbm = watts_to_dbm(config.budget.p_urllc);
                config.budget.p_embb = dbm_to_watts(p_u_dbm + value);
            }
            SweepParam::MissRate => config.miss_rate = value,
            SweepParam::NumElements => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config(
                        "sweep_values",
                        format!("element count {value} is not a positive integer"),
                    ));
                }
                config.num_elements = value as usize;
            }
            SweepParam::PEmbbDbm => config.budget.p_embb = dbm_to_watts(value),
        }
        Ok(config)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("sweep_param", format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self, base: &ScenarioConfig) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep_values", "grid must be nonempty"));
        }
        for &v in &self.values {
            self.param.apply(base, v)?.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub estimates: Vec<SchemeEstimate>,
}

impl SweepPoint {
    pub fn get(&self, scheme: SchemeKind) -> Option<&SchemeEstimate> {
        self.estimates.iter().find(|e| e.scheme == scheme)
    }
}

/// One scenario run per grid value, all sharing the master seed so trial `i`
/// sees the same placements at every grid point.
pub fn run_sweep(
    spec: &SweepSpec,
    base: &ScenarioConfig,
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    spec.validate(base)?;
    spec.values
        .iter()
        .map(|&value| {
            let config = spec.param.apply(base, value)?;
            Ok(SweepPoint {
                value,
                estimates: run_scenario(&config, workers)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn wilson_examples() {
        let e = estimate_proportion(0, 100).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.ci_low, 0.0);
        assert!((e.ci_high - 0.0370).abs() < 5e-5, "{}", e.ci_high);
        let e = estimate_proportion(50, 100).unwrap();
        assert!(((e.ci_low + e.ci_high) / 2.0 - 0.5).abs() < 1e-15);
        let e = estimate_proportion(100, 100).unwrap();
        assert_eq!(e.ci_high, 1.0);
        assert!((e.ci_low - 0.9630).abs() < 5e-5);
        assert!(estimate_proportion(1, 0).is_err());
        assert!(estimate_proportion(3, 2).is_err());
    }

    #[test]
    fn mean_estimate() {
        let e = estimate_mean(6.0, 14.0, 3).unwrap();
        assert_eq!(e.value, 2.0);
        // sample variance 1 -> half width z / sqrt(3)
        assert!((e.ci_high - 2.0 - Z_95 / 3f64.sqrt()).abs() < 1e-12);
        let e = estimate_mean(5.0, 25.0, 1).unwrap();
        assert_eq!((e.ci_low, e.ci_high), (5.0, 5.0));
    }

    #[test]
    fn zero_trials_rejected() {
        let config = ScenarioConfig {
            trials: 0,
            ..ScenarioConfig::default()
        };
        assert!(
            matches!(run_scenario(&config, 1), Err(Error::Config { key, .. }) if key == "trials")
        );
    }

    #[test]
    fn near_field_region_rejected() {
        let config = ScenarioConfig {
            rho_min: Some(3.5),
            ..ScenarioConfig::default()
        };
        assert!(matches!(config.validate(), Err(Error::Config { key, .. }) if key == "rho_min"));
    }

    #[test]
    fn degenerate_urllc_channels_force_outage() {
        let config = ScenarioConfig {
            trials: 200,
            ..ScenarioConfig::default()
        };
        let out = run_scenario_with(&config, 1, |s| {
            let phase = s.trial as f64;
            let g_e = (0..4)
                .map(|i| Complex64::from_polar(1e-5, phase + i as f64))
                .collect();
            ChannelRealization::from_cascaded(g_e, vec![Complex64::new(0.0, 0.0); 4])
        })
        .unwrap();
        for e in out {
            assert_eq!(e.urllc_outage.value, 1.0, "{}", e.scheme);
        }
    }

    #[test]
    fn failing_trials_are_counted() {
        let config = ScenarioConfig {
            trials: 10,
            schemes: vec![SchemeKind::MissedPreamble],
            ..ScenarioConfig::default()
        };
        let out = run_scenario_with(&config, 1, |s| {
            if s.trial % 2 == 0 {
                Err(Error::SingularGeometry { element: 0 })
            } else {
                ChannelRealization::from_cascaded(
                    vec![Complex64::new(1e-5, 0.0)],
                    vec![Complex64::new(1e-5, 0.0)],
                )
            }
        })
        .unwrap();
        assert_eq!(out[0].diagnostics.trial_errors, 5);
        assert_eq!(out[0].urllc_outage.n, 5);
    }

    #[test]
    fn sweep_param_application() {
        let base = ScenarioConfig::default();
        let c = SweepParam::PowerRatioDb.apply(&base, 10.0).unwrap();
        assert!((c.budget.p_embb / c.budget.p_urllc - 10.0).abs() < 1e-12);
        assert!(SweepParam::NumElements.apply(&base, 2.5).is_err());
        assert_eq!(
            SweepParam::NumElements
                .apply(&base, 64.0)
                .unwrap()
                .num_elements,
            64
        );
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        let spec = SweepSpec {
            param: SweepParam::MissRate,
            values: vec![],
        };
        assert!(spec.validate(&base).is_err());
    }
}
