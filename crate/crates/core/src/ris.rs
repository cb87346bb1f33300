//! RIS reflection-coefficient configurations.
//!
//! A configuration stores phases `theta_n` in `[0, 2pi)`; the reflection
//! coefficients `psi_n = exp(-j theta_n)` are derived, so the unit-modulus
//! constraint holds by construction.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest element count accepted by [`brute_force_partition`].
pub const BRUTE_FORCE_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct RisConfiguration {
    phases: Vec<f64>,
}

impl RisConfiguration {
    /// Wraps arbitrary phases into `[0, 2pi)`.
    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
        }
    }

    /// Reads phases back from nonzero coefficients, `theta = -arg(psi)`.
    pub fn from_coefficients(coefficients: &[Complex64]) -> Self {
        Self::from_phases(coefficients.iter().map(|c| -c.arg()))
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&t| Complex64::from_polar(1.0, -t))
            .collect()
    }
}

fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// `g^H psi = sum_n conj(g_n) psi_n`.
pub fn inner(g: &[Complex64], psi: &[Complex64]) -> Complex64 {
    g.iter().zip(psi).map(|(a, b)| a.conj() * b).sum()
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Coherent passive beamformer, `theta_n = -arg(g_n)`. Zero entries get phase 0.
pub fn coherent_beamformer(g: &[Complex64]) -> RisConfiguration {
    RisConfiguration::from_phases(
        g.iter()
            .map(|c| if c.norm_sqr() > 0.0 { -c.arg() } else { 0.0 }),
    )
}

/// Number of entries whose phase is undefined (zero modulus).
pub fn zero_entries(g: &[Complex64]) -> usize {
    g.iter().filter(|c| c.norm_sqr() == 0.0).count()
}

/// Split of the elements into an in-phase set and an antiphase set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    /// Elements whose reflected phasor keeps angle 0.
    pub in_phase: Vec<usize>,
    /// Elements rotated by pi.
    pub antiphase: Vec<usize>,
    /// Size of the in-phase set.
    pub split: usize,
    /// `|sum_{in_phase} A_n - sum_{antiphase} A_n|`.
    pub residual: f64,
}

/// Phasors-rotation heuristic.
///
/// Sorts the cascaded amplitudes ascending and picks the prefix split that
/// best balances the two sums (smallest split on ties). The shortest phasors
/// stay in phase and the rest are rotated by pi. The returned residual is the
/// achieved `|g^H psi|`.
pub fn phasor_rotation(g: &[Complex64]) -> (RisConfiguration, PartitionResult) {
    let n = g.len();
    let amplitudes: Vec<f64> = g.iter().map(|c| c.norm()).collect();
    if n == 0 {
        let config = RisConfiguration::from_phases([]);
        let partition = PartitionResult {
            in_phase: vec![],
            antiphase: vec![],
            split: 0,
            residual: 0.0,
        };
        return (config, partition);
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable, so equal amplitudes keep index order
    order.sort_by(|&a, &b| amplitudes[a].total_cmp(&amplitudes[b]));

    let total: f64 = order.iter().map(|&i| amplitudes[i]).sum();
    let mut prefix = 0.0;
    let mut best_split = 1;
    let mut best_gap = f64::INFINITY;
    for (k, &i) in order.iter().enumerate() {
        prefix += amplitudes[i];
        let gap = (2.0 * prefix - total).abs();
        if gap < best_gap {
            best_gap = gap;
            best_split = k + 1;
        }
    }

    let mut in_phase: Vec<usize> = order[..best_split].to_vec();
    let mut antiphase: Vec<usize> = order[best_split..].to_vec();
    let mut phases = vec![0.0; n];
    for &i in &in_phase {
        phases[i] = if amplitudes[i] > 0.0 {
            -g[i].arg()
        } else {
            0.0
        };
    }
    for &i in &antiphase {
        phases[i] = if amplitudes[i] > 0.0 {
            PI - g[i].arg()
        } else {
            0.0
        };
    }
    in_phase.sort_unstable();
    antiphase.sort_unstable();

    let config = RisConfiguration::from_phases(phases);
    let residual = inner(g, &config.coefficients()).norm();
    let partition = PartitionResult {
        in_phase,
        antiphase,
        split: best_split,
        residual,
    };
    (config, partition)
}

/// Exhaustive minimum of `|sum_{N0} A_n - sum_{Npi} A_n|` over all `2^N`
/// assignments. Ties resolve to the smallest antiphase bitmask.
pub fn brute_force_partition(g: &[Complex64]) -> Result<PartitionResult> {
    let n = g.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManyElements {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let amplitudes: Vec<f64> = g.iter().map(|c| c.norm()).collect();
    let total: f64 = amplitudes.iter().sum();

    // subset sums of the low and high halves, combined per mask
    let low_bits = n / 2;
    let subset_sums = |amps: &[f64]| -> Vec<f64> {
        let mut sums = vec![0.0; 1 << amps.len()];
        for mask in 1..sums.len() {
            let bit = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + amps[bit];
        }
        sums
    };
    let low = subset_sums(&amplitudes[..low_bits]);
    let high = subset_sums(&amplitudes[low_bits..]);

    let mut best_mask = 0usize;
    let mut best = f64::INFINITY;
    for (h, &hs) in high.iter().enumerate() {
        for (l, &ls) in low.iter().enumerate() {
            let gap = (total - 2.0 * (hs + ls)).abs();
            if gap < best {
                best = gap;
                best_mask = (h << low_bits) | l;
            }
        }
    }

    let (antiphase, in_phase): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| best_mask >> i & 1 == 1);
    let residual = (in_phase.iter().map(|&i| amplitudes[i]).sum::<f64>()
        - antiphase.iter().map(|&i| amplitudes[i]).sum::<f64>())
    .abs();
    Ok(PartitionResult {
        split: in_phase.len(),
        in_phase,
        antiphase,
        residual,
    })
}

/// Stopping rule and starting point for interference nulling.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSettings {
    /// Stop once `|g^H psi| <= tolerance * ||g||_2`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial: RisConfiguration,
}

impl ProjectionSettings {
    pub fn new(tolerance: f64, max_iterations: usize, initial: RisConfiguration) -> Self {
        Self {
            tolerance,
            max_iterations,
            initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub configuration: RisConfiguration,
    /// Achieved `|g^H psi|`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Elements whose hyperplane projection landed on zero at some iteration
    /// and kept their previous phase.
    pub degenerate_elements: usize,
}

/// Orthogonal projection of `psi` onto the hyperplane `{x : g^H x = 0}`.
pub fn project_onto_null_hyperplane(g: &[Complex64], psi: &[Complex64]) -> Vec<Complex64> {
    let energy = norm_sqr(g);
    let coeff = inner(g, psi) / energy;
    psi.iter().zip(g).map(|(p, gn)| p - coeff * gn).collect()
}

/// Elementwise projection onto the unit-modulus torus. Zero entries keep the
/// matching entry of `previous`; returns how many did.
pub fn project_onto_unit_modulus(
    projected: &[Complex64],
    previous: &[Complex64],
    out: &mut [Complex64],
) -> usize {
    let mut degenerate = 0;
    for ((o, p), prev) in out.iter_mut().zip(projected).zip(previous) {
        let m = p.norm();
        if m > 0.0 {
            *o = p / m;
        } else {
            *o = *prev;
            degenerate += 1;
        }
    }
    degenerate
}

/// Alternating projections between `{g^H psi = 0}` and `{|psi_n| = 1}`.
///
/// Non-convergence is reported through `converged`, never as an error.
pub fn interference_nulling(
    g: &[Complex64],
    settings: &ProjectionSettings,
) -> Result<ProjectionOutcome> {
    let n = g.len();
    if settings.initial.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: settings.initial.len(),
        });
    }
    let g_norm = norm_sqr(g).sqrt();
    if !(g_norm > 0.0) {
        return Err(Error::config("g_embb", "channel must be nonzero"));
    }
    if !(settings.tolerance > 0.0) {
        return Err(Error::config("in_tolerance", "must be positive"));
    }
    if settings.max_iterations == 0 {
        return Err(Error::config("in_max_iterations", "must be at least 1"));
    }

    let threshold = settings.tolerance * g_norm;
    let mut psi = settings.initial.coefficients();
    let mut next = psi.clone();
    let mut residual = inner(g, &psi).norm();
    let mut iterations = 0;
    let mut degenerate = 0;
    while residual > threshold && iterations < settings.max_iterations {
        let projected = project_onto_null_hyperplane(g, &psi);
        degenerate += project_onto_unit_modulus(&projected, &psi, &mut next);
        std::mem::swap(&mut psi, &mut next);
        residual = inner(g, &psi).norm();
        iterations += 1;
    }

    let configuration = RisConfiguration::from_coefficients(&psi);
    let residual = inner(g, &configuration.coefficients()).norm();
    Ok(ProjectionOutcome {
        converged: residual <= threshold,
        configuration,
        residual,
        iterations,
        degenerate_elements: degenerate,
    })
}

/// I.i.d. uniform phases on `[0, 2pi)`.
pub fn random_configuration<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RisConfiguration {
    RisConfiguration::from_phases((0..n).map(|_| TAU * rng.random::<f64>()))
}
