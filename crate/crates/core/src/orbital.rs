//! Circular-orbit kinematics, ground-station visibility and contact plans.
//!
//! All positions are expressed in an Earth-centred inertial frame whose x axis
//! points at the Greenwich meridian at t = 0. The ground station rotates with
//! the Earth at [`EarthConstants::omega`]; satellites follow ideal two-body
//! circular orbits.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Coarse scan steps above this may silently skip short passes.
pub const MAX_COARSE_STEP_S: f64 = 10.0;

/// Bracket width at which rise/set bisection stops.
pub const REFINE_TOLERANCE_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthConstants {
    /// Mean Earth radius in meters.
    pub radius: f64,
    /// Geocentric gravitational constant in m^3/s^2.
    pub mu: f64,
    /// Sidereal rotation rate in rad/s.
    pub omega: f64,
    /// Speed of light in m/s.
    pub light_speed: f64,
}

pub const EARTH: EarthConstants = EarthConstants {
    radius: 6371e3,
    mu: 3.98e14,
    omega: 7.2921159e-5,
    light_speed: 299_792_458.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// One circular orbital plane holding `satellite_count` uniformly phased satellites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    /// Altitude above the mean Earth radius, meters.
    pub altitude: f64,
    pub inclination: f64,
    pub raan: f64,
    /// Argument of latitude of satellite 0 at t = 0.
    pub initial_arg_latitude: f64,
    pub satellite_count: usize,
}

impl OrbitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude > 0.0) {
            return Err(Error::invalid("orbit altitude (m)", self.altitude));
        }
        if !(0.0..=PI).contains(&self.inclination) {
            return Err(Error::invalid("orbit inclination (rad)", self.inclination));
        }
        if self.satellite_count == 0 {
            return Err(Error::invalid("satellites per orbit", 0.0));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        EARTH.radius + self.altitude
    }

    pub fn period(&self) -> f64 {
        // validated orbits always have positive altitude
        orbital_period(self.altitude).unwrap_or(f64::NAN)
    }

    /// ECI position of satellite `sat_index` of this plane at time `t`.
    pub fn position_eci(&self, sat_index: usize, t: f64) -> Result<Vec3> {
        if sat_index >= self.satellite_count {
            return Err(Error::SatelliteIndex {
                index: sat_index,
                count: self.satellite_count,
            });
        }
        let period = orbital_period(self.altitude)?;
        let u = self.initial_arg_latitude
            + TAU * sat_index as f64 / self.satellite_count as f64
            + TAU * t / period;
        let r = self.radius();
        let (su, cu) = u.sin_cos();
        let (si, ci) = self.inclination.sin_cos();
        let (so, co) = self.raan.sin_cos();
        Ok(Vec3::new(
            r * (co * cu - so * su * ci),
            r * (so * cu + co * su * ci),
            r * su * si,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStation {
    pub latitude: f64,
    pub longitude: f64,
    pub min_elevation: f64,
}

impl GroundStation {
    pub fn validate(&self) -> Result<()> {
        if !(self.latitude.abs() <= FRAC_PI_2) {
            return Err(Error::invalid("ground station latitude (rad)", self.latitude));
        }
        if !(0.0..FRAC_PI_2).contains(&self.min_elevation) {
            return Err(Error::invalid("minimum elevation (rad)", self.min_elevation));
        }
        if !self.longitude.is_finite() {
            return Err(Error::invalid("ground station longitude (rad)", self.longitude));
        }
        Ok(())
    }
}

/// Period of a circular orbit at altitude `altitude` (meters).
///
/// Altitude zero is accepted and gives the grazing surface orbit.
pub fn orbital_period(altitude: f64) -> Result<f64> {
    if !(altitude >= 0.0) || !altitude.is_finite() {
        return Err(Error::invalid("altitude (m)", altitude));
    }
    let r = EARTH.radius + altitude;
    let speed = (EARTH.mu / r).sqrt();
    Ok(TAU * r / speed)
}

pub fn satellite_position_eci(orbit: &OrbitSpec, sat_index: usize, t: f64) -> Result<Vec3> {
    orbit.position_eci(sat_index, t)
}

pub fn ground_station_position_eci(gs: &GroundStation, t: f64) -> Vec3 {
    let lon = gs.longitude + EARTH.omega * t;
    let (slat, clat) = gs.latitude.sin_cos();
    let (slon, clon) = lon.sin_cos();
    Vec3::new(
        EARTH.radius * clat * clon,
        EARTH.radius * clat * slon,
        EARTH.radius * slat,
    )
}

/// Elevation of `sat_pos` above the local horizontal plane at `gs_pos`.
pub fn elevation_angle(sat_pos: Vec3, gs_pos: Vec3) -> Result<f64> {
    let los = sat_pos - gs_pos;
    if los.norm() == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    let angle = gs_pos.cross(los).norm().atan2(gs_pos.dot(los));
    Ok(FRAC_PI_2 - angle)
}

pub fn is_visible(sat_pos: Vec3, gs: &GroundStation, gs_pos: Vec3) -> Result<bool> {
    Ok(elevation_angle(sat_pos, gs_pos)? >= gs.min_elevation)
}

pub fn slant_range(sat_pos: Vec3, gs_pos: Vec3) -> f64 {
    (sat_pos - gs_pos).norm()
}

/// A satellite of the constellation, addressed by its orbit and slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Satellite {
    pub orbit: OrbitSpec,
    pub slot: usize,
}

impl Satellite {
    pub fn position(&self, t: f64) -> Vec3 {
        // slot < satellite_count by construction in `flatten`
        self.orbit
            .position_eci(self.slot, t)
            .expect("satellite slot within orbit")
    }

    /// Elevation margin over the mask; non-negative while visible.
    fn margin(&self, gs: &GroundStation, t: f64) -> f64 {
        let gs_pos = ground_station_position_eci(gs, t);
        elevation_angle(self.position(t), gs_pos).map_or(f64::NEG_INFINITY, |e| e - gs.min_elevation)
    }

    pub fn is_visible_at(&self, gs: &GroundStation, t: f64) -> bool {
        self.margin(gs, t) >= 0.0
    }

    pub fn range_at(&self, gs: &GroundStation, t: f64) -> f64 {
        slant_range(self.position(t), ground_station_position_eci(gs, t))
    }
}

/// Expands orbit planes into satellites, numbered in plane order then slot order.
pub fn flatten(orbits: &[OrbitSpec]) -> Vec<Satellite> {
    orbits
        .iter()
        .flat_map(|o| (0..o.satellite_count).map(move |slot| Satellite { orbit: *o, slot }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pass {
    pub rise: f64,
    pub set: f64,
    /// Longest slant range over the pass; used for the pass's link budget.
    pub max_distance: f64,
}

impl Pass {
    pub fn duration(&self) -> f64 {
        self.set - self.rise
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.rise && t <= self.set
    }
}

/// Rise/set instants of every satellite over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPlan {
    pub horizon: f64,
    pub satellites: Vec<Vec<Pass>>,
}

impl ContactPlan {
    pub fn passes(&self, satellite: usize) -> &[Pass] {
        &self.satellites[satellite]
    }

    pub fn satellite_count(&self) -> usize {
        self.satellites.len()
    }

    pub fn pass_count(&self) -> usize {
        self.satellites.iter().map(Vec::len).sum()
    }

    pub fn longest_pass(&self) -> f64 {
        self.satellites
            .iter()
            .flatten()
            .map(Pass::duration)
            .fold(0.0, f64::max)
    }

    /// Off-time gaps between successive passes of one satellite.
    pub fn gaps(&self, satellite: usize) -> Vec<f64> {
        self.satellites[satellite]
            .windows(2)
            .map(|w| w[1].rise - w[0].set)
            .collect()
    }
}

/// Largest slant range over `[pass.rise, pass.set]`, sampled at 1 s or finer.
pub fn max_pass_distance(rise: f64, set: f64, satellite: &Satellite, gs: &GroundStation) -> f64 {
    let steps = ((set - rise) / 1.0).ceil().max(1.0) as usize;
    let dt = (set - rise) / steps as f64;
    (0..=steps)
        .map(|i| {
            let t = if i == steps { set } else { rise + dt * i as f64 };
            satellite.range_at(gs, t)
        })
        .fold(0.0, f64::max)
}

/// Shrinks `[off, on]` (or `[on, off]`) around the visibility boundary and
/// returns the end that is still visible.
fn refine(sat: &Satellite, gs: &GroundStation, mut visible_t: f64, mut hidden_t: f64) -> f64 {
    while (visible_t - hidden_t).abs() > REFINE_TOLERANCE_S {
        let mid = 0.5 * (visible_t + hidden_t);
        if sat.is_visible_at(gs, mid) {
            visible_t = mid;
        } else {
            hidden_t = mid;
        }
    }
    visible_t
}

fn satellite_passes(
    sat_id: usize,
    sat: &Satellite,
    gs: &GroundStation,
    horizon: f64,
    step: f64,
) -> Result<Vec<Pass>> {
    let samples = (horizon / step).ceil() as usize;
    let time_at = |i: usize| if i >= samples { horizon } else { step * i as f64 };

    if sat.is_visible_at(gs, 0.0) {
        return Err(Error::EndpointInPass { satellite: sat_id, time: 0.0 });
    }
    if sat.is_visible_at(gs, horizon) {
        return Err(Error::EndpointInPass { satellite: sat_id, time: horizon });
    }

    let mut passes = Vec::new();
    let mut rise = None;
    let mut prev_t = 0.0;
    for i in 1..=samples {
        let t = time_at(i);
        let visible = sat.is_visible_at(gs, t);
        match (rise, visible) {
            (None, true) => rise = Some(refine(sat, gs, t, prev_t)),
            (Some(r), false) => {
                let set = refine(sat, gs, prev_t, t);
                passes.push(Pass {
                    rise: r,
                    set,
                    max_distance: max_pass_distance(r, set, sat, gs),
                });
                rise = None;
            }
            _ => {}
        }
        prev_t = t;
    }
    Ok(passes)
}

/// Scans `[0, horizon]` at `coarse_step` and refines every visibility edge by bisection.
pub fn compute_contact_plan(
    orbits: &[OrbitSpec],
    gs: &GroundStation,
    horizon: f64,
    coarse_step: f64,
) -> Result<ContactPlan> {
    if !(coarse_step > 0.0) {
        return Err(Error::invalid("coarse step (s)", coarse_step));
    }
    if coarse_step > MAX_COARSE_STEP_S {
        return Err(Error::CoarseStepTooLarge(coarse_step));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("horizon (s)", horizon));
    }
    gs.validate()?;
    for o in orbits {
        o.validate()?;
    }
    let satellites = flatten(orbits)
        .iter()
        .enumerate()
        .map(|(id, sat)| satellite_passes(id, sat, gs, horizon, coarse_step))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContactPlan { horizon, satellites })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    fn equatorial(h: f64) -> OrbitSpec {
        OrbitSpec {
            altitude: h,
            inclination: 0.0,
            raan: 0.0,
            initial_arg_latitude: 0.0,
            satellite_count: 1,
        }
    }

    #[test]
    fn period_closed_form() {
        // hand evaluation: r = 6.871e6 m gives v = 7610.83 m/s, r = 8.371e6 m gives v = 6895.30 m/s
        assert!((orbital_period(500e3).unwrap() - 5672.42).abs() < 1.0);
        assert!((orbital_period(2000e3).unwrap() - 7627.89).abs() < 1.0);
        let surface = TAU * EARTH.radius / (EARTH.mu / EARTH.radius).sqrt();
        assert_relative_eq!(orbital_period(0.0).unwrap(), surface, max_relative = 1e-15);
        assert!(orbital_period(-1.0).is_err());
    }

    #[test]
    fn frame_conventions() {
        let p = equatorial(500e3).position_eci(0, 0.0).unwrap();
        assert_relative_eq!(p.x, EARTH.radius + 500e3);
        assert_eq!((p.y, p.z), (0.0, 0.0));

        let gs = GroundStation { latitude: 0.0, longitude: 0.0, min_elevation: 0.0 };
        let g = ground_station_position_eci(&gs, 0.0);
        assert_eq!(g, Vec3::new(EARTH.radius, 0.0, 0.0));
        let day = ground_station_position_eci(&gs, TAU / EARTH.omega);
        assert!((day - g).norm() / EARTH.radius < 1e-6);
    }

    #[test]
    fn satellite_index_out_of_range() {
        assert!(matches!(
            equatorial(500e3).position_eci(1, 0.0),
            Err(Error::SatelliteIndex { index: 1, count: 1 })
        ));
    }

    #[test]
    fn elevation_cases() {
        let gs_pos = Vec3::new(EARTH.radius, 0.0, 0.0);
        let zenith = gs_pos * 1.1;
        assert_relative_eq!(elevation_angle(zenith, gs_pos).unwrap(), FRAC_PI_2, epsilon = 1e-12);
        let horizon = gs_pos + Vec3::new(0.0, 1e6, 0.0);
        assert!(elevation_angle(horizon, gs_pos).unwrap().abs() < 1e-12);
        let antipodal = gs_pos * -1.1;
        assert!(elevation_angle(antipodal, gs_pos).unwrap() < 0.0);
        assert_eq!(elevation_angle(gs_pos, gs_pos), Err(Error::CoincidentPositions));
    }

    #[test]
    fn visibility_boundary_is_inclusive() {
        let gs_pos = Vec3::new(EARTH.radius, 0.0, 0.0);
        let sat = gs_pos * 1.1;
        let exact = elevation_angle(sat, gs_pos).unwrap();
        let gs = GroundStation { latitude: 0.0, longitude: 0.0, min_elevation: exact.min(1.5) };
        assert!(is_visible(sat, &gs, gs_pos).unwrap());
        let gs10 = GroundStation { min_elevation: deg(10.0), ..gs };
        assert!(!is_visible(gs_pos * -1.1, &gs10, gs_pos).unwrap());

        // elevation exactly equal to the mask
        let tilted = gs_pos + Vec3::new(deg(30.0).sin(), deg(30.0).cos(), 0.0) * 1e6;
        let e = elevation_angle(tilted, gs_pos).unwrap();
        let mask = GroundStation { min_elevation: e, ..gs };
        assert!(is_visible(tilted, &mask, gs_pos).unwrap());
    }

    #[test]
    fn slant_range_cases() {
        let gs_pos = Vec3::new(EARTH.radius, 0.0, 0.0);
        let h = 500e3;
        assert_relative_eq!(slant_range(gs_pos * ((EARTH.radius + h) / EARTH.radius), gs_pos), h, max_relative = 1e-12);
        assert_eq!(slant_range(gs_pos, gs_pos), 0.0);
        let r = EARTH.radius + h;
        let side = (r * r - EARTH.radius * EARTH.radius).sqrt();
        let at_horizon = gs_pos + Vec3::new(0.0, side, 0.0);
        assert_relative_eq!(slant_range(at_horizon, gs_pos), side, max_relative = 1e-12);
        assert_relative_eq!(at_horizon.norm(), r, max_relative = 1e-12);
    }

    #[test]
    fn polar_station_never_sees_equatorial_orbit() {
        let gs = GroundStation { latitude: FRAC_PI_2, longitude: 0.0, min_elevation: deg(10.0) };
        let plan = compute_contact_plan(&[equatorial(500e3)], &gs, 86_400.0, 10.0).unwrap();
        assert_eq!(plan.pass_count(), 0);
    }

    #[test]
    fn coarse_step_is_validated() {
        let gs = GroundStation { latitude: 0.9, longitude: 0.1, min_elevation: deg(10.0) };
        assert_eq!(
            compute_contact_plan(&[], &gs, 100.0, 11.0),
            Err(Error::CoarseStepTooLarge(11.0))
        );
        assert!(compute_contact_plan(&[], &gs, 100.0, 0.0).is_err());
    }

    #[test]
    fn endpoint_inside_pass_is_rejected() {
        // satellite starts directly over an equatorial station
        let gs = GroundStation { latitude: 0.0, longitude: 0.0, min_elevation: deg(10.0) };
        let err = compute_contact_plan(&[equatorial(500e3)], &gs, 3600.0, 10.0).unwrap_err();
        assert_eq!(err, Error::EndpointInPass { satellite: 0, time: 0.0 });
    }

    #[test]
    fn max_distance_at_mask_matches_closed_form() {
        // equatorial orbit over an equatorial station, starting on the far side
        let gs = GroundStation { latitude: 0.0, longitude: 0.0, min_elevation: deg(10.0) };
        let orbit = OrbitSpec { initial_arg_latitude: PI, ..equatorial(500e3) };
        let plan = compute_contact_plan(&[orbit], &gs, 20_000.0, 5.0).unwrap();
        let pass = plan.passes(0)[0];
        let (re, h, a) = (EARTH.radius, 500e3, deg(10.0));
        let expected = re * ((((re + h) / re).powi(2) - a.cos().powi(2)).sqrt() - a.sin());
        assert!((expected - 1.69e6).abs() < 0.01e6);
        assert_relative_eq!(pass.max_distance, expected, max_relative = 1e-3);

        let sat = flatten(&[orbit])[0];
        let mid = sat.range_at(&gs, 0.5 * (pass.rise + pass.set));
        assert!(pass.max_distance >= mid);
        let (dr, ds) = (sat.range_at(&gs, pass.rise), sat.range_at(&gs, pass.set));
        assert_relative_eq!(dr, ds, max_relative = 1e-3);
    }

    proptest! {
        #[test]
        fn circular_orbit_norm_and_period(
            h in 300e3..2500e3f64,
            inc in 0.0..PI,
            raan in 0.0..TAU,
            phase in 0.0..TAU,
            t in 0.0..200_000.0f64,
        ) {
            let orbit = OrbitSpec { altitude: h, inclination: inc, raan, initial_arg_latitude: phase, satellite_count: 3 };
            let p = orbit.position_eci(2, t).unwrap();
            prop_assert!((p.norm() / orbit.radius() - 1.0).abs() < 1e-6);
            let q = orbit.position_eci(2, t + orbit.period()).unwrap();
            prop_assert!((q - p).norm() / orbit.radius() < 1e-6);
        }

        #[test]
        fn ground_station_on_surface(lat in -FRAC_PI_2..FRAC_PI_2, lon in -PI..PI, t in 0.0..1e6f64) {
            let gs = GroundStation { latitude: lat, longitude: lon, min_elevation: 0.1 };
            let g = ground_station_position_eci(&gs, t);
            prop_assert!((g.norm() - EARTH.radius).abs() / EARTH.radius < 1e-12);
        }
    }
}
