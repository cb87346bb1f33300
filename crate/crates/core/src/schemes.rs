//! Per-trial semantics of each multiplexing scheme.
//!
//! A scheme decides which RIS configuration serves the URLLC TTI and whether
//! the eMBB UE keeps transmitting during it. Detection misses fall back to
//! the missed-preamble behaviour: the RIS stays on the eMBB-oriented
//! configuration and the eMBB UE stays active.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ChannelRealization;
use crate::metrics::{self, FrameConfig, LinkBudget, RateTargets};
use crate::ris::{self, ProjectionSettings, RisConfiguration};
use crate::streams::{Purpose, TrialStreams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Phasors-rotation URLLC configuration.
    ProposedPr,
    /// Alternating-projection interference nulling.
    ProposedIn,
    /// Uniform random phases.
    RandomConfig,
    /// The RIS never detects the preamble and keeps the eMBB configuration.
    MissedPreamble,
    /// The BS interrupts eMBB; the RIS keeps the eMBB configuration.
    PreemptivePuncturing,
    /// Coherent beamforming towards the URLLC UE (needs URLLC CSI).
    GenieUrllcMax,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::ProposedPr,
        SchemeKind::ProposedIn,
        SchemeKind::RandomConfig,
        SchemeKind::MissedPreamble,
        SchemeKind::PreemptivePuncturing,
        SchemeKind::GenieUrllcMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::ProposedPr => "proposed_pr",
            SchemeKind::ProposedIn => "proposed_in",
            SchemeKind::RandomConfig => "random_config",
            SchemeKind::MissedPreamble => "missed_preamble",
            SchemeKind::PreemptivePuncturing => "preemptive_puncturing",
            SchemeKind::GenieUrllcMax => "genie_urllc_max",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("schemes", format!("unknown scheme `{s}`")))
    }
}

/// Miss-detection rate of the URLLC preamble detector (or, for puncturing,
/// the failure rate of the scheduling request).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub miss_rate: f64,
}

impl DetectionModel {
    pub fn new(miss_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&miss_rate) {
            return Err(Error::config("miss_rate", "must lie in [0, 1]"));
        }
        Ok(Self { miss_rate })
    }
}

/// Frozen per-trial algorithm settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSettings {
    pub in_tolerance: f64,
    pub in_max_iterations: usize,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        Self {
            in_tolerance: 1e-6,
            in_max_iterations: 1000,
        }
    }
}

impl AlgorithmSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.in_tolerance.is_finite() && self.in_tolerance > 0.0) {
            return Err(Error::config("in_tolerance", "must be positive"));
        }
        if self.in_max_iterations == 0 {
            return Err(Error::config("in_max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Algorithm-specific side information of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Diagnostics {
    None,
    PhasorRotation {
        split: usize,
        /// `|g_e^H psi|`.
        residual: f64,
        /// Residual over `||g_e||_2`.
        relative_residual: f64,
    },
    Nulling {
        residual: f64,
        relative_residual: f64,
        iterations: usize,
        converged: bool,
        degenerate_elements: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub mi_embb: f64,
    pub mi_urllc: f64,
    pub sinr_urllc: f64,
    /// `p_e |g_e^H psi|^2` seen by the URLLC UE, zero when eMBB is silent.
    pub interference: f64,
    pub outage_embb: bool,
    pub outage_urllc: bool,
    pub detection_hit: bool,
    pub diagnostics: Diagnostics,
}

impl TrialOutcome {
    /// Field-for-field equality ignoring diagnostics.
    pub fn same_link_outcome(&self, other: &TrialOutcome) -> bool {
        self.mi_embb.to_bits() == other.mi_embb.to_bits()
            && self.mi_urllc.to_bits() == other.mi_urllc.to_bits()
            && self.sinr_urllc.to_bits() == other.sinr_urllc.to_bits()
            && self.interference.to_bits() == other.interference.to_bits()
            && self.outage_embb == other.outage_embb
            && self.outage_urllc == other.outage_urllc
            && self.detection_hit == other.detection_hit
    }
}

/// Everything a trial needs besides channels and randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub budget: LinkBudget,
    pub frame: FrameConfig,
    pub targets: RateTargets,
    pub detection: DetectionModel,
    pub algorithms: AlgorithmSettings,
    /// Whether a URLLC TTI erased eMBB mini-slots in this frame.
    pub urllc_occurred: bool,
}

/// Configuration serving the URLLC TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct UrllcPolicy {
    pub configuration: RisConfiguration,
    pub embb_active: bool,
    pub diagnostics: Diagnostics,
}

/// URLLC-TTI policy of `scheme` when the RIS (or BS) did detect the traffic.
pub fn urllc_policy(
    scheme: SchemeKind,
    channels: &ChannelRealization,
    algorithms: &AlgorithmSettings,
    streams: &TrialStreams,
) -> Result<UrllcPolicy> {
    let g_e = &channels.g_embb;
    let g_norm = g_e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let policy = match scheme {
        SchemeKind::ProposedPr => {
            let (configuration, partition) = ris::phasor_rotation(g_e);
            UrllcPolicy {
                configuration,
                embb_active: true,
                diagnostics: Diagnostics::PhasorRotation {
                    split: partition.split,
                    residual: partition.residual,
                    relative_residual: partition.residual / g_norm,
                },
            }
        }
        SchemeKind::ProposedIn => {
            let initial =
                ris::random_configuration(g_e.len(), &mut streams.rng(Purpose::NullingStart));
            let settings = ProjectionSettings::new(
                algorithms.in_tolerance,
                algorithms.in_max_iterations,
                initial,
            );
            let out = ris::interference_nulling(g_e, &settings)?;
            UrllcPolicy {
                diagnostics: Diagnostics::Nulling {
                    residual: out.residual,
                    relative_residual: out.residual / g_norm,
                    iterations: out.iterations,
                    converged: out.converged,
                    degenerate_elements: out.degenerate_elements,
                },
                configuration: out.configuration,
                embb_active: true,
            }
        }
        SchemeKind::RandomConfig => UrllcPolicy {
            configuration: ris::random_configuration(
                g_e.len(),
                &mut streams.rng(Purpose::RandomConfiguration),
            ),
            embb_active: true,
            diagnostics: Diagnostics::None,
        },
        SchemeKind::MissedPreamble => UrllcPolicy {
            configuration: ris::coherent_beamformer(g_e),
            embb_active: true,
            diagnostics: Diagnostics::None,
        },
        SchemeKind::PreemptivePuncturing => UrllcPolicy {
            configuration: ris::coherent_beamformer(g_e),
            embb_active: false,
            diagnostics: Diagnostics::None,
        },
        SchemeKind::GenieUrllcMax => UrllcPolicy {
            configuration: ris::coherent_beamformer(&channels.g_urllc),
            embb_active: true,
            diagnostics: Diagnostics::None,
        },
    };
    Ok(policy)
}

/// Whether the URLLC traffic was detected in this trial. Missed preamble
/// never detects; every other scheme hits with probability `1 - miss_rate`.
/// All schemes of a trial read the same uniform draw.
pub fn apply_detection(
    scheme: SchemeKind,
    detection: &DetectionModel,
    streams: &TrialStreams,
) -> bool {
    if scheme == SchemeKind::MissedPreamble {
        return false;
    }
    let u: f64 = streams.rng(Purpose::Detection).random();
    u >= detection.miss_rate
}

/// Per-trial quantities shared by every scheme: the eMBB-oriented
/// configuration and the eMBB outcome.
#[derive(Debug, Clone)]
pub struct TrialContext<'a> {
    channels: &'a ChannelRealization,
    params: &'a TrialParams,
    streams: TrialStreams,
    embb_config: Vec<Complex64>,
    mi_embb: f64,
}

impl<'a> TrialContext<'a> {
    pub fn new(
        channels: &'a ChannelRealization,
        params: &'a TrialParams,
        streams: TrialStreams,
    ) -> Result<Self> {
        let n = channels.num_elements();
        if channels.g_urllc.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: channels.g_urllc.len(),
            });
        }
        let embb_config = ris::coherent_beamformer(&channels.g_embb).coefficients();
        let mi_embb = metrics::embb_mutual_info(
            &channels.g_embb,
            &params.budget,
            &params.frame,
            params.urllc_occurred,
        );
        Ok(Self {
            channels,
            params,
            streams,
            embb_config,
            mi_embb,
        })
    }

    pub fn evaluate(&self, scheme: SchemeKind) -> Result<TrialOutcome> {
        let hit = apply_detection(scheme, &self.params.detection, &self.streams);
        let (psi, embb_active, diagnostics) = match scheme {
            // the eMBB-oriented configuration is already at hand
            SchemeKind::MissedPreamble => (self.embb_config.clone(), true, Diagnostics::None),
            _ => {
                let policy = urllc_policy(
                    scheme,
                    self.channels,
                    &self.params.algorithms,
                    &self.streams,
                )?;
                if hit {
                    (
                        policy.configuration.coefficients(),
                        policy.embb_active,
                        policy.diagnostics,
                    )
                } else {
                    (self.embb_config.clone(), true, policy.diagnostics)
                }
            }
        };

        let budget = &self.params.budget;
        let signal = metrics::gain_of(&self.channels.g_urllc, &psi);
        let interference = if embb_active {
            budget.p_embb * metrics::gain_of(&self.channels.g_embb, &psi)
        } else {
            0.0
        };
        let sinr_urllc = budget.p_urllc * signal / (interference + budget.noise);
        let mi_urllc = (1.0 + sinr_urllc).log2();
        Ok(TrialOutcome {
            mi_embb: self.mi_embb,
            mi_urllc,
            sinr_urllc,
            interference,
            outage_embb: metrics::outage(self.mi_embb, self.params.targets.embb),
            outage_urllc: metrics::outage(mi_urllc, self.params.targets.urllc),
            detection_hit: hit,
            diagnostics,
        })
    }
}

/// Evaluates one scheme on one channel realization.
pub fn evaluate_trial(
    scheme: SchemeKind,
    channels: &ChannelRealization,
    params: &TrialParams,
    streams: TrialStreams,
) -> Result<TrialOutcome> {
    TrialContext::new(channels, params, streams)?.evaluate(scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PathLossParams;
    use crate::geometry::{
        bs_position, far_field_distance, sample_ue_position, Deployment, RisGeometry, UeRegion,
    };

    fn params(miss_rate: f64) -> TrialParams {
        TrialParams {
            budget: LinkBudget::default(),
            frame: FrameConfig::default(),
            targets: RateTargets {
                embb: 1.0,
                urllc: 1.0,
            },
            detection: DetectionModel::new(miss_rate).unwrap(),
            algorithms: AlgorithmSettings::default(),
            urllc_occurred: true,
        }
    }

    fn channels(seed: u64) -> ChannelRealization {
        let geometry = RisGeometry::new(100, 0.1).unwrap();
        let dep = Deployment::new(
            geometry,
            PathLossParams::default(),
            bs_position(far_field_distance(100, 0.1)),
        )
        .unwrap();
        let streams = TrialStreams::new(seed, 0);
        let region = UeRegion::default();
        let e = sample_ue_position(&region, &mut streams.rng(Purpose::EmbbPlacement)).unwrap();
        let u = sample_ue_position(&region, &mut streams.rng(Purpose::UrllcPlacement)).unwrap();
        dep.realize(&e, &u).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("nope".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn detection_bounds() {
        let s = TrialStreams::new(1, 1);
        assert!(apply_detection(
            SchemeKind::ProposedIn,
            &DetectionModel::new(0.0).unwrap(),
            &s
        ));
        assert!(!apply_detection(
            SchemeKind::ProposedIn,
            &DetectionModel::new(1.0).unwrap(),
            &s
        ));
        assert!(!apply_detection(
            SchemeKind::MissedPreamble,
            &DetectionModel::new(0.0).unwrap(),
            &s
        ));
        assert!(DetectionModel::new(1.5).is_err());
    }

    #[test]
    fn missed_preamble_uses_embb_configuration() {
        let ch = channels(3);
        let policy = urllc_policy(
            SchemeKind::MissedPreamble,
            &ch,
            &AlgorithmSettings::default(),
            &TrialStreams::new(3, 0),
        )
        .unwrap();
        assert_eq!(policy.configuration, ris::coherent_beamformer(&ch.g_embb));
        assert!(policy.embb_active);
    }

    #[test]
    fn puncturing_is_interference_free() {
        let ch = channels(4);
        let p = params(0.0);
        let out = evaluate_trial(
            SchemeKind::PreemptivePuncturing,
            &ch,
            &p,
            TrialStreams::new(4, 0),
        )
        .unwrap();
        assert_eq!(out.interference, 0.0);
        let psi = ris::coherent_beamformer(&ch.g_embb);
        let expected =
            p.budget.p_urllc * metrics::effective_gain(&ch.g_urllc, &psi).unwrap() / p.budget.noise;
        assert!((out.sinr_urllc - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn genie_on_unit_channels_reaches_n_squared() {
        let n = 100;
        let g_u: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 0.37 * i as f64))
            .collect();
        let g_e: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 1.1 * i as f64))
            .collect();
        let ch = ChannelRealization::from_cascaded(g_e, g_u).unwrap();
        let policy = urllc_policy(
            SchemeKind::GenieUrllcMax,
            &ch,
            &AlgorithmSettings::default(),
            &TrialStreams::new(0, 0),
        )
        .unwrap();
        let gain = metrics::effective_gain(&ch.g_urllc, &policy.configuration).unwrap();
        assert!((gain - (n * n) as f64).abs() < 1e-8);
    }

    #[test]
    fn converged_nulling_leaves_noise_limited_sinr() {
        let ch = channels(5);
        let p = params(0.0);
        let out = evaluate_trial(SchemeKind::ProposedIn, &ch, &p, TrialStreams::new(5, 0)).unwrap();
        let Diagnostics::Nulling { converged, .. } = out.diagnostics else {
            panic!("expected nulling diagnostics");
        };
        assert!(converged);
        let g_energy: f64 = ch.g_embb.iter().map(|c| c.norm_sqr()).sum();
        let bound = p.budget.p_embb * p.algorithms.in_tolerance.powi(2) * g_energy;
        assert!(out.interference <= bound);
        let noise_limited = out.sinr_urllc * (out.interference + p.budget.noise) / p.budget.noise;
        let rel = (out.sinr_urllc - noise_limited).abs() / noise_limited;
        assert!(rel <= bound / p.budget.noise, "{rel}");
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn full_miss_matches_missed_preamble() {
        let ch = channels(6);
        let p = params(1.0);
        let s = TrialStreams::new(6, 0);
        let reference = evaluate_trial(SchemeKind::MissedPreamble, &ch, &p, s).unwrap();
        for k in SchemeKind::ALL {
            let out = evaluate_trial(k, &ch, &p, s).unwrap();
            assert!(out.same_link_outcome(&reference), "{k}");
        }
    }

    #[test]
    fn tiny_target_never_outages() {
        let ch = channels(7);
        let mut p = params(0.0);
        p.targets.urllc = 1e-12;
        for k in SchemeKind::ALL {
            let out = evaluate_trial(k, &ch, &p, TrialStreams::new(7, 0)).unwrap();
            assert!(out.sinr_urllc > 0.0 && !out.outage_urllc);
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let ch = channels(8);
        let p = params(0.3);
        for k in SchemeKind::ALL {
            let a = evaluate_trial(k, &ch, &p, TrialStreams::new(8, 11)).unwrap();
            let b = evaluate_trial(k, &ch, &p, TrialStreams::new(8, 11)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn embb_outcome_independent_of_scheme() {
        let ch = channels(9);
        let p = params(0.0);
        let s = TrialStreams::new(9, 0);
        let base = evaluate_trial(SchemeKind::ProposedPr, &ch, &p, s).unwrap();
        for k in SchemeKind::ALL {
            let out = evaluate_trial(k, &ch, &p, s).unwrap();
            assert_eq!(out.mi_embb.to_bits(), base.mi_embb.to_bits());
            assert_eq!(out.outage_embb, base.outage_embb);
        }
    }
}
