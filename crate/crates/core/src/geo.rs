//! Spherical-Earth geometry shared by the grid, orbit and population modules.

use core::ops::{Add, Mul, Sub};

use libm::{asin, atan2, cos, sin, sqrt};
use serde::{Deserialize, Serialize};

pub const DEG: f64 = core::f64::consts::PI / 180.0;

/// Geodetic latitude/longitude on a spherical Earth, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl LatLon {
    pub const fn new(lat_deg: f64, lon_deg: f64) -> Self {
        Self { lat_deg, lon_deg }
    }

    /// Unit vector from the Earth's centre through this point (Earth-fixed frame).
    pub fn unit(&self) -> Vec3 {
        let (lat, lon) = (self.lat_deg * DEG, self.lon_deg * DEG);
        Vec3::new(cos(lat) * cos(lon), cos(lat) * sin(lon), sin(lat))
    }

    pub fn to_ecef(&self, radius_km: f64) -> Vec3 {
        self.unit() * radius_km
    }

    pub fn from_vector(v: Vec3) -> Self {
        let r = v.norm();
        Self {
            lat_deg: asin((v.z / r).clamp(-1.0, 1.0)) / DEG,
            lon_deg: atan2(v.y, v.x) / DEG,
        }
    }

    /// Earth-central angle to `other`, radians (haversine form).
    pub fn central_angle(&self, other: &LatLon) -> f64 {
        let (p1, p2) = (self.lat_deg * DEG, other.lat_deg * DEG);
        let dlat = p2 - p1;
        let dlon = (other.lon_deg - self.lon_deg) * DEG;
        let a = sin(dlat / 2.0) * sin(dlat / 2.0) + cos(p1) * cos(p2) * sin(dlon / 2.0) * sin(dlon / 2.0);
        2.0 * asin(sqrt(a.clamp(0.0, 1.0)))
    }

    /// Point reached by travelling `angle_rad` of arc along initial `bearing_deg`.
    pub fn destination(&self, bearing_deg: f64, angle_rad: f64) -> LatLon {
        let (lat1, lon1) = (self.lat_deg * DEG, self.lon_deg * DEG);
        let brg = bearing_deg * DEG;
        let lat2 = asin(sin(lat1) * cos(angle_rad) + cos(lat1) * sin(angle_rad) * cos(brg));
        let lon2 = lon1 + atan2(sin(brg) * sin(angle_rad) * cos(lat1), cos(angle_rad) - sin(lat1) * sin(lat2));
        LatLon {
            lat_deg: lat2 / DEG,
            lon_deg: wrap_lon(lon2 / DEG),
        }
    }
}

/// Wraps a longitude into [-180, 180).
pub fn wrap_lon(lon_deg: f64) -> f64 {
    let mut l = libm::fmod(lon_deg + 180.0, 360.0);
    if l < 0.0 {
        l += 360.0;
    }
    l - 180.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, o: &Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.dot(self))
    }

    pub fn normalized(&self) -> Vec3 {
        *self * (1.0 / self.norm())
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
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Local east-north-up basis at a ground point.
#[derive(Debug, Clone, Copy)]
pub struct Enu {
    pub east: Vec3,
    pub north: Vec3,
    pub up: Vec3,
}

impl Enu {
    pub fn at(p: &LatLon) -> Self {
        let (lat, lon) = (p.lat_deg * DEG, p.lon_deg * DEG);
        Enu {
            east: Vec3::new(-sin(lon), cos(lon), 0.0),
            north: Vec3::new(-sin(lat) * cos(lon), -sin(lat) * sin(lon), cos(lat)),
            up: Vec3::new(cos(lat) * cos(lon), cos(lat) * sin(lon), sin(lat)),
        }
    }

    /// Components of an Earth-fixed vector in this local frame.
    pub fn project(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.dot(&self.east), v.dot(&self.north), v.dot(&self.up))
    }
}

/// Unit vector in a local ENU frame for the given azimuth (from north, clockwise) and elevation.
pub fn enu_direction(azimuth_deg: f64, elevation_deg: f64) -> Vec3 {
    let (az, el) = (azimuth_deg * DEG, elevation_deg * DEG);
    Vec3::new(sin(az) * cos(el), cos(az) * cos(el), sin(el))
}

/// Earth-central angle between a ground point and the edge of the region from
/// which a satellite at `altitude_km` appears at or above `elevation_deg`.
pub fn coverage_half_angle(earth_radius_km: f64, altitude_km: f64, elevation_deg: f64) -> f64 {
    let e = elevation_deg * DEG;
    libm::acos(earth_radius_km * cos(e) / (earth_radius_km + altitude_km)) - e
}

/// Slant range from a ground observer to a satellite at `altitude_km` seen at `elevation_deg`.
pub fn slant_range(earth_radius_km: f64, altitude_km: f64, elevation_deg: f64) -> f64 {
    let s = sin(elevation_deg * DEG);
    let r = earth_radius_km;
    -r * s + sqrt(r * r * s * s + 2.0 * r * altitude_km + altitude_km * altitude_km)
}
