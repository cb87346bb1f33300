//! SNR/SINR, per-mini-slot mutual information, outage and latency.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ris::{inner, RisConfiguration};

/// `10^((dBm - 30) / 10)` watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Transmit and noise powers, all linear (watts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub p_embb: f64,
    pub p_urllc: f64,
    pub noise: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            p_embb: dbm_to_watts(23.0),
            p_urllc: dbm_to_watts(23.0),
            noise: dbm_to_watts(-90.0),
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("p_embb_dbm", self.p_embb),
            ("p_urllc_dbm", self.p_urllc),
            ("noise_dbm", self.noise),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "power must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Uplink frame layout in mini-slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Mini-slots per frame.
    pub total: u32,
    /// URLLC TTI length.
    pub urllc: u32,
    /// Preamble length.
    pub preamble: u32,
    /// RIS switching time.
    pub switching: u32,
    /// Mini-slot duration in seconds.
    pub slot_duration: f64,
    /// Bandwidth in hertz.
    pub bandwidth: f64,
    /// Symbols per mini-slot; carried for completeness.
    pub symbols_per_slot: u32,
    /// Preamble processing delay at the RIS, seconds.
    pub processing_delay: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            total: 20,
            urllc: 2,
            preamble: 1,
            switching: 1,
            slot_duration: 0.125e-3,
            bandwidth: 1.0e6,
            symbols_per_slot: 2,
            processing_delay: 0.0,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total == 0 {
            return Err(Error::config("frame_minislots", "must be positive"));
        }
        if self.urllc == 0 || self.urllc > self.total {
            return Err(Error::config(
                "urllc_minislots",
                format!("must lie in [1, {}]", self.total),
            ));
        }
        if self.preamble == 0 {
            return Err(Error::config("preamble_minislots", "must be positive"));
        }
        if self.switching == 0 {
            return Err(Error::config("switching_minislots", "must be positive"));
        }
        if self.erased_slots() > self.total {
            return Err(Error::config(
                "frame_minislots",
                format!(
                    "preamble + 2 * switching + URLLC TTI = {} exceeds the frame",
                    self.erased_slots()
                ),
            ));
        }
        if !(self.slot_duration.is_finite() && self.slot_duration > 0.0) {
            return Err(Error::config("minislot_duration", "must be positive"));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::config("bandwidth", "must be positive"));
        }
        if self.symbols_per_slot == 0 {
            return Err(Error::config("symbols_per_minislot", "must be positive"));
        }
        if !(self.processing_delay.is_finite() && self.processing_delay >= 0.0) {
            return Err(Error::config("processing_delay", "must be nonnegative"));
        }
        Ok(())
    }

    /// eMBB mini-slots lost to the preamble, two RIS switches and the URLLC TTI.
    pub fn erased_slots(&self) -> u32 {
        self.preamble + 2 * self.switching + self.urllc
    }
}

/// Target spectral efficiencies per mini-slot, bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTargets {
    pub embb: f64,
    pub urllc: f64,
}

impl RateTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.embb.is_finite() && self.embb > 0.0) {
            return Err(Error::config("r_embb", "must be positive"));
        }
        if !(self.urllc.is_finite() && self.urllc > 0.0) {
            return Err(Error::config("r_urllc", "must be positive"));
        }
        Ok(())
    }
}

/// `|g^H psi|^2`.
pub fn effective_gain(g: &[Complex64], config: &RisConfiguration) -> Result<f64> {
    if g.len() != config.len() {
        return Err(Error::LengthMismatch {
            expected: g.len(),
            actual: config.len(),
        });
    }
    Ok(gain_of(g, &config.coefficients()))
}

pub(crate) fn gain_of(g: &[Complex64], psi: &[Complex64]) -> f64 {
    inner(g, psi).norm_sqr()
}

pub fn embb_snr(
    g_embb: &[Complex64],
    config: &RisConfiguration,
    budget: &LinkBudget,
) -> Result<f64> {
    Ok(budget.p_embb * effective_gain(g_embb, config)? / budget.noise)
}

/// SINR of the URLLC UE. With `embb_active == false` the eMBB interference
/// term is dropped, as in preemptive puncturing.
pub fn urllc_sinr(
    g_urllc: &[Complex64],
    g_embb: &[Complex64],
    config: &RisConfiguration,
    budget: &LinkBudget,
    embb_active: bool,
) -> Result<f64> {
    let signal = effective_gain(g_urllc, config)?;
    let interference = if embb_active {
        effective_gain(g_embb, config)?
    } else {
        0.0
    };
    Ok(sinr_from_gains(signal, interference, budget, embb_active))
}

pub(crate) fn sinr_from_gains(
    signal: f64,
    interference: f64,
    budget: &LinkBudget,
    embb_active: bool,
) -> f64 {
    let denom = if embb_active {
        budget.p_embb * interference + budget.noise
    } else {
        budget.noise
    };
    budget.p_urllc * signal / denom
}

/// Fraction of eMBB mini-slots erased by the preamble, switching and URLLC TTI.
pub fn xi_fraction(frame: &FrameConfig) -> f64 {
    frame.erased_slots() as f64 / frame.total as f64
}

/// eMBB mutual information per mini-slot under the coherent beamformer,
/// `(1 - xi) log2(1 + p_e (sum |g_n|)^2 / sigma^2)`. The pre-log is 1 when
/// no URLLC TTI occurred in the frame.
pub fn embb_mutual_info(
    g_embb: &[Complex64],
    budget: &LinkBudget,
    frame: &FrameConfig,
    urllc_occurred: bool,
) -> f64 {
    let amplitude: f64 = g_embb.iter().map(|c| c.norm()).sum();
    let snr = budget.p_embb * amplitude * amplitude / budget.noise;
    prelog(frame, urllc_occurred) * (1.0 + snr).log2()
}

pub(crate) fn prelog(frame: &FrameConfig, urllc_occurred: bool) -> f64 {
    if urllc_occurred {
        1.0 - xi_fraction(frame)
    } else {
        1.0
    }
}

/// URLLC mutual information per mini-slot. Block fading makes every
/// mini-slot of the TTI identical, so this is also the TTI average.
pub fn urllc_mutual_info(
    g_urllc: &[Complex64],
    g_embb: &[Complex64],
    config: &RisConfiguration,
    budget: &LinkBudget,
    embb_active: bool,
) -> Result<f64> {
    Ok((1.0 + urllc_sinr(g_urllc, g_embb, config, budget, embb_active)?).log2())
}

/// Outage iff `mutual_info < target` (strict).
pub fn outage(mutual_info: f64, target: f64) -> bool {
    mutual_info < target
}

/// `(M_p + M_u + M_s) T_m + D_proc`.
pub fn urllc_latency(frame: &FrameConfig) -> f64 {
    let slots = frame.preamble + frame.urllc + frame.switching;
    slots as f64 * frame.slot_duration + frame.processing_delay
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ris::coherent_beamformer;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn frame(total: u32, preamble: u32, switching: u32, urllc: u32) -> FrameConfig {
        FrameConfig {
            total,
            preamble,
            switching,
            urllc,
            ..FrameConfig::default()
        }
    }

    #[test]
    fn gain_examples() {
        let one = RisConfiguration::from_phases([0.0]);
        assert_eq!(effective_gain(&[c(1.0, 0.0)], &one).unwrap(), 1.0);
        let cancel = RisConfiguration::from_phases([0.0, std::f64::consts::PI]);
        assert!(effective_gain(&[c(1.0, 0.0), c(1.0, 0.0)], &cancel).unwrap() < 1e-30);
        assert!(matches!(
            effective_gain(&[c(1.0, 0.0)], &cancel),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(-90.0) - 1e-12).abs() < 1e-27);
        assert!((watts_to_dbm(dbm_to_watts(23.0)) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn embb_snr_examples() {
        let budget = LinkBudget {
            p_embb: 2.0,
            p_urllc: 1.0,
            noise: 1e-3,
        };
        // |g^H psi|^2 = noise / p_e
        let g = [c((1e-3f64 / 2.0).sqrt(), 0.0)];
        let cfg = RisConfiguration::from_phases([0.0]);
        assert!((embb_snr(&g, &cfg, &budget).unwrap() - 1.0).abs() < 1e-12);

        let budget = LinkBudget::default();
        let g = [c(1e-4, 0.0)];
        let snr = embb_snr(&g, &cfg, &budget).unwrap();
        assert!((snr - 10f64.powf(11.3) * 1e-8).abs() / snr < 1e-12);
        assert!((snr - 1995.26).abs() < 0.01);
    }

    #[test]
    fn sinr_examples() {
        let budget = LinkBudget {
            p_embb: 1.0,
            p_urllc: 1.0,
            noise: 0.5,
        };
        let cfg = RisConfiguration::from_phases([0.0, 0.0]);
        // eMBB gain 0.5 -> interference = noise; URLLC gain 1 -> 2 * noise
        let g_e = [c(0.5f64.sqrt() / 2.0, 0.0), c(0.5f64.sqrt() / 2.0, 0.0)];
        let g_u = [c(0.5, 0.0), c(0.5, 0.0)];
        let s = urllc_sinr(&g_u, &g_e, &cfg, &budget, true).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let s = urllc_sinr(&g_u, &g_e, &cfg, &budget, false).unwrap();
        assert!((s - 2.0).abs() < 1e-12);

        let null = [c(1.0, 0.0), c(-1.0, 0.0)];
        let s = urllc_sinr(&g_u, &null, &cfg, &budget, true).unwrap();
        assert_eq!(s, budget.p_urllc * 1.0 / budget.noise);
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi_fraction(&frame(10, 1, 1, 2)), 0.5);
        assert_eq!(xi_fraction(&frame(100, 1, 1, 2)), 0.05);
        assert_eq!(xi_fraction(&frame(5, 1, 1, 2)), 1.0);
    }

    #[test]
    fn frame_validation() {
        assert!(frame(4, 1, 1, 2).validate().is_err());
        assert!(frame(5, 1, 1, 2).validate().is_ok());
        assert!(frame(10, 1, 1, 0).validate().is_err());
        assert!(FrameConfig::default().validate().is_ok());
    }

    #[test]
    fn embb_mutual_info_examples() {
        let budget = LinkBudget {
            p_embb: 3.0,
            p_urllc: 1.0,
            noise: 1.0,
        };
        let g = [c(0.5, 0.0), c(0.0, -0.5)];
        let f = frame(10, 1, 1, 2);
        assert!((embb_mutual_info(&g, &budget, &f, true) - 1.0).abs() < 1e-15);
        assert!((embb_mutual_info(&g, &budget, &f, false) - 2.0).abs() < 1e-15);

        let cfg = coherent_beamformer(&g);
        let snr = embb_snr(&g, &cfg, &budget).unwrap();
        assert!((snr - 3.0).abs() < 1e-12);
    }

    #[test]
    fn urllc_mutual_info_examples() {
        let budget = LinkBudget {
            p_embb: 1.0,
            p_urllc: 1.0,
            noise: 1.0,
        };
        let cfg = RisConfiguration::from_phases([0.0]);
        let mi = urllc_mutual_info(&[c(1.0, 0.0)], &[c(0.0, 0.0)], &cfg, &budget, true).unwrap();
        assert!((mi - 1.0).abs() < 1e-15);
        let mi = urllc_mutual_info(&[c(0.0, 0.0)], &[c(1.0, 0.0)], &cfg, &budget, true).unwrap();
        assert_eq!(mi, 0.0);
    }

    #[test]
    fn outage_is_strict() {
        assert!(!outage(0.5, 0.5));
        assert!(outage(0.0, 0.1));
        assert!(!outage(1.0, 0.999));
    }

    #[test]
    fn latency_examples() {
        let t = 0.125e-3;
        let mut f = FrameConfig {
            slot_duration: t,
            ..frame(20, 1, 1, 2)
        };
        assert!((urllc_latency(&f) - 4.0 * t).abs() < 1e-18);
        let base = urllc_latency(&f);
        f.processing_delay = 3e-5;
        assert!((urllc_latency(&f) - base - 3e-5).abs() < 1e-18);
        let f = FrameConfig {
            slot_duration: t,
            ..frame(20, 1, 1, 1)
        };
        assert!((urllc_latency(&f) - 0.375e-3).abs() < 1e-18);
    }
}
