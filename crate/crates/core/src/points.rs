//! Cox device processes on the streets and Palm-style rooting.

use std::fmt::{self, Write as _};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::street::{StreetGraph, StreetId, StreetPoint};

pub type DeviceId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Susceptible,
    Knight,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Susceptible => "susceptible",
            Role::Knight => "knight",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: DeviceId,
    pub position: StreetPoint,
    pub role: Role,
}

/// Devices and white knights on one street graph. Ids equal positions in
/// `devices`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    pub devices: Vec<Device>,
    pub lambda: f64,
    pub lambda_w: f64,
    pub root: Option<DeviceId>,
    /// Plane position of the root; subtracting it gives root-centred
    /// coordinates.
    pub origin: Point,
}

/// Poisson number of uniform points on every street, streets in id order.
pub fn sample_cox<R: Rng + ?Sized>(
    g: &StreetGraph,
    intensity: f64,
    rng: &mut R,
) -> Result<Vec<StreetPoint>> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::invalid(
            "intensity",
            format!("must be non-negative, got {intensity}"),
        ));
    }
    let mut out = Vec::new();
    if intensity == 0.0 {
        return Ok(out);
    }
    for (i, s) in g.streets().iter().enumerate() {
        let mean = intensity * s.length;
        let n = Poisson::new(mean)
            .map_err(|e| Error::invalid("intensity", e.to_string()))?
            .sample(rng) as usize;
        for _ in 0..n {
            out.push(StreetPoint::new(
                StreetId(i as u32),
                rng.random::<f64>() * s.length,
            ));
        }
    }
    Ok(out)
}

impl PointConfig {
    /// Susceptible devices from `device_rng` followed by knights from
    /// `knight_rng`.
    pub fn sample<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        g: &StreetGraph,
        lambda: f64,
        lambda_w: f64,
        device_rng: &mut R1,
        knight_rng: &mut R2,
    ) -> Result<Self> {
        let devices = sample_cox(g, lambda, device_rng)?;
        let knights = sample_cox(g, lambda_w, knight_rng)?;
        Ok(Self::from_positions(&devices, &knights, lambda, lambda_w))
    }

    pub fn from_positions(
        devices: &[StreetPoint],
        knights: &[StreetPoint],
        lambda: f64,
        lambda_w: f64,
    ) -> Self {
        let all = devices
            .iter()
            .map(|&p| (p, Role::Susceptible))
            .chain(knights.iter().map(|&p| (p, Role::Knight)))
            .enumerate()
            .map(|(i, (position, role))| Device {
                id: i as DeviceId,
                position,
                role,
            })
            .collect();
        PointConfig {
            devices: all,
            lambda,
            lambda_w,
            root: None,
            origin: Point::ORIGIN,
        }
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn device(&self, id: DeviceId) -> Result<&Device> {
        self.devices
            .get(id as usize)
            .ok_or(Error::UnknownDevice(id))
    }

    pub fn roles(&self) -> Vec<Role> {
        self.devices.iter().map(|d| d.role).collect()
    }

    pub fn knight_count(&self) -> usize {
        self.devices
            .iter()
            .filter(|d| d.role == Role::Knight)
            .count()
    }

    /// Plane position in the original window coordinates.
    pub fn plane_position(&self, g: &StreetGraph, id: DeviceId) -> Point {
        g.position(self.devices[id as usize].position)
    }

    /// Position relative to the root.
    pub fn centred_position(&self, g: &StreetGraph, id: DeviceId) -> Point {
        self.plane_position(g, id) - self.origin
    }

    /// CSV with columns `id,role,street_id,offset,x,y`; plane coordinates
    /// are root-centred.
    pub fn to_csv(&self, g: &StreetGraph) -> String {
        let mut out = String::from("id,role,street_id,offset,x,y\n");
        for d in &self.devices {
            let p = self.centred_position(g, d.id);
            let _ = writeln!(
                out,
                "{},{},{},{:.12e},{:.12e},{:.12e}",
                d.id, d.role, d.position.street.0, d.position.offset, p.x, p.y
            );
        }
        out
    }
}

/// Select the susceptible device nearest to the centre of `window` among
/// those inside the inner window (the concentric square of half the side)
/// as the root, and record its position as the new origin. Equidistant
/// candidates resolve to the lower id.
pub fn root_typical(config: &PointConfig, g: &StreetGraph, window: &Window) -> Result<PointConfig> {
    let inner = window.scaled(0.5);
    let center = window.center();
    let mut best: Option<(f64, DeviceId, Point)> = None;
    for d in &config.devices {
        if d.role != Role::Susceptible {
            continue;
        }
        let p = g.position(d.position);
        if !inner.contains(p, 0.0) {
            continue;
        }
        let dist = p.distance(center);
        if best.is_none_or(|(b, _, _)| dist < b) {
            best = Some((dist, d.id, p));
        }
    }
    let (_, id, p) =
        best.ok_or_else(|| Error::Resample("no susceptible device in the inner window".into()))?;
    Ok(PointConfig {
        root: Some(id),
        origin: p,
        ..config.clone()
    })
}
