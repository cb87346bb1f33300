//! Deployment geometry and line-of-sight channel synthesis.
//!
//! The RIS is a square half-wavelength UPA lying in the yz-plane and facing
//! +x. Nodes are placed in spherical coordinates `(rho, theta, phi)` with
//! `theta` the polar angle from +z and `phi` the azimuth from +x.

use std::f64::consts::{PI, SQRT_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Cartesian point from spherical coordinates (polar angle from +z).
    pub fn from_spherical(rho: f64, theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            x: rho * st * cp,
            y: rho * st * sp,
            z: rho * ct,
        }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.distance(&Position::ORIGIN)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// `lambda * (sqrt(N) - 1)^2 / 2`, the far-field distance of an `N`-element RIS.
pub fn far_field_distance(num_elements: usize, wavelength: f64) -> f64 {
    let side = (num_elements as f64).sqrt();
    wavelength * (side - 1.0) * (side - 1.0) / 2.0
}

/// BS location `[rho_f / sqrt(2), rho_f / sqrt(2), 0]`.
pub fn bs_position(distance: f64) -> Position {
    Position::new(distance / SQRT_2, distance / SQRT_2, 0.0)
}

/// Square half-wavelength RIS centered at the origin of the yz-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RisGeometry {
    num_elements: usize,
    side: usize,
    wavelength: f64,
    positions: Vec<Position>,
}

impl RisGeometry {
    pub fn new(num_elements: usize, wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive and finite, got {wavelength}"
            )));
        }
        let side = integer_sqrt(num_elements).ok_or_else(|| {
            Error::InvalidGeometry(format!(
                "element count {num_elements} is not a positive perfect square"
            ))
        })?;
        let positions = grid_positions(side, wavelength / 2.0);
        Ok(Self {
            num_elements,
            side,
            wavelength,
            positions,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    /// Elements per row of the square array.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn spacing(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn far_field_distance(&self) -> f64 {
        far_field_distance(self.num_elements, self.wavelength)
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    /// Row-major index of the active element: the exact center for odd sides,
    /// otherwise the first of the four elements closest to the origin.
    pub fn active_element(&self) -> usize {
        let k = self.side;
        let center = if k % 2 == 1 { k / 2 } else { k / 2 - 1 };
        center * k + center
    }
}

fn integer_sqrt(n: usize) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let mut k = (n as f64).sqrt().round() as usize;
    while k * k > n {
        k -= 1;
    }
    while (k + 1) * (k + 1) <= n {
        k += 1;
    }
    (k * k == n).then_some(k)
}

fn grid_positions(side: usize, spacing: f64) -> Vec<Position> {
    let offset = (side as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            let y = (col as f64 - offset) * spacing;
            let z = (offset - row as f64) * spacing;
            out.push(Position::new(0.0, y, z));
        }
    }
    out
}

/// Positions of every element in row-major order (top row first).
pub fn element_positions(geometry: &RisGeometry) -> Vec<Position> {
    geometry.positions.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeRegion {
    pub rho_min: f64,
    pub rho_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for UeRegion {
    /// Baseline region for the 100-element RIS at `lambda = 0.1 m`.
    fn default() -> Self {
        Self {
            rho_min: far_field_distance(100, 0.1),
            rho_max: 100.0,
            phi_min: 3.0 * PI / 2.0,
            phi_max: TAU,
            z_min: -3.0,
            z_max: 3.0,
        }
    }
}

impl UeRegion {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rho_min,
            self.rho_max,
            self.phi_min,
            self.phi_max,
            self.z_min,
            self.z_max,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRegion("bounds must be finite".into()));
        }
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho_max) {
            return Err(Error::InvalidRegion(format!(
                "radial bounds [{}, {}] must satisfy 0 < min <= max",
                self.rho_min, self.rho_max
            )));
        }
        if self.phi_min > self.phi_max {
            return Err(Error::InvalidRegion(format!(
                "azimuth bounds [{}, {}] are not ordered",
                self.phi_min, self.phi_max
            )));
        }
        if self.z_min > self.z_max {
            return Err(Error::InvalidRegion(format!(
                "vertical bounds [{}, {}] are not ordered",
                self.z_min, self.z_max
            )));
        }
        if self.z_min.abs() >= self.rho_min || self.z_max.abs() >= self.rho_min {
            return Err(Error::InvalidRegion(format!(
                "vertical bounds [{}, {}] must lie strictly inside the minimum radius {}",
                self.z_min, self.z_max, self.rho_min
            )));
        }
        Ok(())
    }

    /// Checks the region against the far field of `geometry`.
    pub fn validate_for(&self, geometry: &RisGeometry) -> Result<()> {
        self.validate()?;
        let rho_f = geometry.far_field_distance();
        if self.rho_min < rho_f {
            return Err(Error::InvalidRegion(format!(
                "minimum radius {} lies inside the far-field distance {rho_f} of the RIS",
                self.rho_min
            )));
        }
        Ok(())
    }

    /// Polar-angle interval keeping `z = rho cos(theta)` within the vertical bounds.
    pub fn polar_bounds(&self, rho: f64) -> Result<(f64, f64)> {
        let lo = self.z_min / rho;
        let hi = self.z_max / rho;
        if lo > 1.0 || hi < -1.0 || lo > hi {
            return Err(Error::InvalidRegion(format!(
                "no polar angle keeps z in [{}, {}] at radius {rho}",
                self.z_min, self.z_max
            )));
        }
        Ok((hi.min(1.0).acos(), lo.max(-1.0).acos()))
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws a UE position uniformly in each spherical coordinate. The polar
/// interval is recomputed from the drawn radius.
pub fn sample_ue_position<R: Rng + ?Sized>(region: &UeRegion, rng: &mut R) -> Result<Position> {
    let rho = uniform(rng, region.rho_min, region.rho_max);
    sample_at_radius(region, rho, rng)
}

/// Same as [`sample_ue_position`] with the radial distance held fixed.
pub fn sample_at_radius<R: Rng + ?Sized>(
    region: &UeRegion,
    rho: f64,
    rng: &mut R,
) -> Result<Position> {
    let (theta_min, theta_max) = region.polar_bounds(rho)?;
    let theta = uniform(rng, theta_min, theta_max);
    let phi = uniform(rng, region.phi_min, region.phi_max);
    let mut p = Position::from_spherical(rho, theta, phi);
    // acos/cos round trip can leave z a few ulps outside the bounds
    p.z = p.z.clamp(region.z_min, region.z_max);
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// Reference gain `gamma_0`.
    pub ref_gain: f64,
    /// Reference distance `d_0` in meters.
    pub ref_distance: f64,
    /// Path-loss exponent `beta`.
    pub exponent: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            ref_gain: 1.0,
            ref_distance: 1.0,
            exponent: 3.67,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.ref_gain) {
            return Err(Error::config("ref_gain", "must be positive"));
        }
        if !ok(self.ref_distance) {
            return Err(Error::config("ref_distance", "must be positive"));
        }
        if !ok(self.exponent) {
            return Err(Error::config("path_loss_exponent", "must be positive"));
        }
        Ok(())
    }

    /// Amplitude `sqrt(gamma_0) (d_0 / d)^(beta / 2)` at distance `d`.
    pub fn amplitude(&self, distance: f64) -> f64 {
        self.ref_gain.sqrt() * (self.ref_distance / distance).powf(self.exponent / 2.0)
    }
}

/// Per-element spherical-wave LoS channel between `node` and every RIS element:
/// `sqrt(gamma_0) (d_0/d_n)^(beta/2) exp(-j 2 pi d_n / lambda)`.
pub fn los_channel(
    node: &Position,
    geometry: &RisGeometry,
    path_loss: &PathLossParams,
) -> Result<Vec<Complex64>> {
    let k = TAU / geometry.wavelength;
    geometry
        .positions
        .iter()
        .enumerate()
        .map(|(n, element)| {
            let d = node.distance(element);
            if !(d > 0.0) {
                return Err(Error::SingularGeometry { element: n });
            }
            Ok(Complex64::from_polar(path_loss.amplitude(d), -k * d))
        })
        .collect()
}

/// Cascaded BS-RIS-UE channel, the elementwise product `diag(h_bs) h_ue`.
pub fn cascaded_channel(h_bs: &[Complex64], h_ue: &[Complex64]) -> Result<Vec<Complex64>> {
    if h_bs.len() != h_ue.len() {
        return Err(Error::LengthMismatch {
            expected: h_bs.len(),
            actual: h_ue.len(),
        });
    }
    Ok(h_bs.iter().zip(h_ue).map(|(a, b)| a * b).collect())
}

/// Channels of one frame. Block fading: constant over the whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_bs: Vec<Complex64>,
    pub h_embb: Vec<Complex64>,
    pub h_urllc: Vec<Complex64>,
    pub g_embb: Vec<Complex64>,
    pub g_urllc: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn new(
        h_bs: Vec<Complex64>,
        h_embb: Vec<Complex64>,
        h_urllc: Vec<Complex64>,
    ) -> Result<Self> {
        let g_embb = cascaded_channel(&h_bs, &h_embb)?;
        let g_urllc = cascaded_channel(&h_bs, &h_urllc)?;
        Ok(Self {
            h_bs,
            h_embb,
            h_urllc,
            g_embb,
            g_urllc,
        })
    }

    /// Realization given directly by cascaded channels, with an all-ones BS link.
    pub fn from_cascaded(g_embb: Vec<Complex64>, g_urllc: Vec<Complex64>) -> Result<Self> {
        let ones = vec![Complex64::new(1.0, 0.0); g_embb.len()];
        Self::new(ones, g_embb, g_urllc)
    }

    pub fn num_elements(&self) -> usize {
        self.g_embb.len()
    }
}

/// Fixed part of a deployment: RIS, path loss, and the BS with its channel.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub geometry: RisGeometry,
    pub path_loss: PathLossParams,
    pub bs: Position,
    h_bs: Vec<Complex64>,
}

impl Deployment {
    pub fn new(geometry: RisGeometry, path_loss: PathLossParams, bs: Position) -> Result<Self> {
        path_loss.validate()?;
        let h_bs = los_channel(&bs, &geometry, &path_loss)?;
        Ok(Self {
            geometry,
            path_loss,
            bs,
            h_bs,
        })
    }

    pub fn h_bs(&self) -> &[Complex64] {
        &self.h_bs
    }

    pub fn realize(&self, embb: &Position, urllc: &Position) -> Result<ChannelRealization> {
        let h_embb = los_channel(embb, &self.geometry, &self.path_loss)?;
        let h_urllc = los_channel(urllc, &self.geometry, &self.path_loss)?;
        ChannelRealization::new(self.h_bs.clone(), h_embb, h_urllc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_element_at_origin() {
        let g = RisGeometry::new(1, 0.1).unwrap();
        assert_eq!(element_positions(&g), vec![Position::ORIGIN]);
        assert_eq!(g.active_element(), 0);
    }

    #[test]
    fn four_element_grid() {
        let g = RisGeometry::new(4, 0.1).unwrap();
        let pos = element_positions(&g);
        assert_eq!(pos.len(), 4);
        for p in &pos {
            assert_eq!(p.x, 0.0);
            assert!(close(p.y.abs(), 0.025, 1e-15));
            assert!(close(p.z.abs(), 0.025, 1e-15));
        }
        // all four sign combinations present
        let mut signs: Vec<(bool, bool)> = pos.iter().map(|p| (p.y > 0.0, p.z > 0.0)).collect();
        signs.sort();
        signs.dedup();
        assert_eq!(signs.len(), 4);
    }

    #[test]
    fn hundred_element_extremes_and_spacing() {
        let g = RisGeometry::new(100, 0.1).unwrap();
        let pos = g.positions();
        let max_y = pos.iter().map(|p| p.y).fold(f64::MIN, f64::max);
        let min_z = pos.iter().map(|p| p.z).fold(f64::MAX, f64::min);
        assert!(close(max_y, 0.225, 1e-12));
        assert!(close(min_z, -0.225, 1e-12));
        // row-major neighbours are half a wavelength apart
        assert!(close(pos[0].distance(&pos[1]), 0.05, 1e-12));
        assert!(close(pos[0].distance(&pos[10]), 0.05, 1e-12));
        let cy: f64 = pos.iter().map(|p| p.y).sum();
        let cz: f64 = pos.iter().map(|p| p.z).sum();
        assert!(cy.abs() < 1e-12 && cz.abs() < 1e-12);
        assert_eq!(g.active_element(), 44);
        assert_eq!(RisGeometry::new(9, 0.1).unwrap().active_element(), 4);
    }

    #[test]
    fn rejects_non_square_counts() {
        for n in [0, 2, 3, 5, 99, 101] {
            assert!(matches!(
                RisGeometry::new(n, 0.1),
                Err(Error::InvalidGeometry(_))
            ));
        }
        assert!(RisGeometry::new(4, 0.0).is_err());
    }

    #[test]
    fn far_field_values() {
        assert!(close(far_field_distance(100, 0.1), 4.05, 1e-12));
        assert_eq!(far_field_distance(1, 0.1), 0.0);
        assert!(close(far_field_distance(400, 0.1), 18.05, 1e-12));
    }

    #[test]
    fn bs_positions() {
        let p = bs_position(4.05);
        assert!(close(p.x, 2.863782463805, 1e-9) && p.x == p.y && p.z == 0.0);
        let p = bs_position(SQRT_2);
        assert!(close(p.x, 1.0, 1e-15) && close(p.y, 1.0, 1e-15));
        let p = bs_position(18.05);
        assert!(close(p.x, 12.763277400417, 1e-9));
    }

    #[test]
    fn default_region_draws_stay_in_bounds() {
        let region = UeRegion::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let p = sample_ue_position(&region, &mut rng).unwrap();
            assert!(p.x >= 0.0 && p.y <= 1e-12, "{p:?}");
            assert!((-3.0..=3.0).contains(&p.z));
            let r = p.norm();
            assert!(r >= region.rho_min - 1e-9 && r <= region.rho_max + 1e-9);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let region = UeRegion::default();
        let a = sample_ue_position(&region, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_ue_position(&region, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn region_validation() {
        let mut r = UeRegion::default();
        r.z_min = 5.0;
        assert!(r.validate().is_err());
        let mut r = UeRegion::default();
        r.rho_min = 2.0;
        assert!(r.validate().is_err(), "z bounds exceed radius");
        let r = UeRegion {
            rho_min: 3.5,
            ..UeRegion::default()
        };
        let g = RisGeometry::new(100, 0.1).unwrap();
        assert!(r.validate().is_ok());
        assert!(matches!(r.validate_for(&g), Err(Error::InvalidRegion(_))));
        let high = UeRegion {
            z_min: 2.0,
            z_max: 3.0,
            ..UeRegion::default()
        };
        assert!(high.polar_bounds(1.0).is_err());
        let (lo, hi) = UeRegion::default().polar_bounds(0.5).unwrap();
        assert_eq!((lo, hi), (0.0, PI));
    }

    #[test]
    fn reference_distance_gives_unit_magnitude() {
        let g = RisGeometry::new(1, 0.1).unwrap();
        let h = los_channel(
            &Position::new(1.0, 0.0, 0.0),
            &g,
            &PathLossParams::default(),
        )
        .unwrap();
        assert!(close(h[0].norm(), 1.0, 1e-15));
    }

    #[test]
    fn doubling_distance_scales_power() {
        let g = RisGeometry::new(1, 0.1).unwrap();
        let pl = PathLossParams::default();
        let a = los_channel(&Position::new(3.0, 0.0, 0.0), &g, &pl).unwrap()[0];
        let b = los_channel(&Position::new(6.0, 0.0, 0.0), &g, &pl).unwrap()[0];
        let ratio = b.norm_sqr() / a.norm_sqr();
        assert!(close(ratio, 2f64.powf(-3.67), 1e-12));
        assert!(close(ratio, 0.0786, 1e-4));
    }

    #[test]
    fn channel_phase_matches_scalar_formula() {
        let g = RisGeometry::new(16, 0.1).unwrap();
        let node = Position::new(7.3, -2.1, 0.4);
        let h = los_channel(&node, &g, &PathLossParams::default()).unwrap();
        for (n, e) in g.positions().iter().enumerate() {
            let d =
                ((node.x - e.x).powi(2) + (node.y - e.y).powi(2) + (node.z - e.z).powi(2)).sqrt();
            let expected = (-TAU * d / 0.1).rem_euclid(TAU);
            let got = h[n].arg().rem_euclid(TAU);
            let diff = (got - expected).abs();
            assert!(diff.min(TAU - diff) < 1e-9);
            assert!(close(h[n].norm(), d.powf(-3.67 / 2.0), 1e-15));
        }
    }

    #[test]
    fn zero_distance_is_singular() {
        let g = RisGeometry::new(1, 0.1).unwrap();
        let err = los_channel(&Position::ORIGIN, &g, &PathLossParams::default()).unwrap_err();
        assert_eq!(err, Error::SingularGeometry { element: 0 });
    }

    #[test]
    fn cascaded_examples() {
        let j = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(cascaded_channel(&[j, one], &[one, j]).unwrap(), vec![j, j]);
        let h = vec![Complex64::new(0.3, -0.2), Complex64::new(-1.0, 2.0)];
        assert_eq!(cascaded_channel(&[one, one], &h).unwrap(), h);
        assert_eq!(
            cascaded_channel(&[one], &h),
            Err(Error::LengthMismatch {
                expected: 1,
                actual: 2
            })
        );
    }
}
