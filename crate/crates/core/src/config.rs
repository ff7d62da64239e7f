//! Scenario description: every model parameter of one experiment, read from
//! and written to TOML.
//!
//! Keys that are left out of a file take their defaults when the file is
//! parsed, and the parsed [`Scenario`] always holds every value explicitly,
//! so writing it back produces a complete, self-describing file.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::epidemic::TimeDistribution;
use crate::error::{Error, Result};
use crate::geometry::Window;
use crate::mobility::{SpeedDistribution, UniformBall};
use crate::street::{closed_form_parameter, default_buffer, GeneratorTag, StreetModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Moving devices with contact intervals.
    #[default]
    Dynamic,
    /// Independent process on the connectivity graph.
    Static,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Dynamic => "dynamic",
            Engine::Static => "static",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreetParams {
    pub generator: GeneratorTag,
    /// Target street length per unit area.
    #[serde(default = "one")]
    pub intensity: f64,
    /// Seed intensity of a tessellation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Line spacing of a grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default = "default_window_side")]
    pub window_side: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub lambda: f64,
    #[serde(default)]
    pub lambda_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityParams {
    #[serde(default = "default_speed")]
    pub speed: SpeedDistribution,
    #[serde(default = "default_kernel_radius")]
    pub kernel_radius: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            speed: default_speed(),
            kernel_radius: default_kernel_radius(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    #[serde(default = "one")]
    pub r: f64,
    /// Minimal contact duration for an edge of the connectivity graph.
    #[serde(default = "default_rho")]
    pub rho: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            r: 1.0,
            rho: default_rho(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicParams {
    #[serde(default = "default_infection")]
    pub infection: TimeDistribution,
    #[serde(default = "default_patch")]
    pub patch: TimeDistribution,
    /// Speed-up of infection times in the static engine.
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_sim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach_radius: Option<f64>,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        EpidemicParams {
            infection: default_infection(),
            patch: default_patch(),
            b: 1.0,
            t_sim: None,
            reach_radius: None,
        }
    }
}

/// One experiment. After [`Scenario::resolve`] every optional value that
/// applies to the chosen generator is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: Engine,
    pub streets: StreetParams,
    pub devices: DeviceParams,
    #[serde(default)]
    pub mobility: MobilityParams,
    #[serde(default)]
    pub contact: ContactParams,
    #[serde(default)]
    pub epidemic: EpidemicParams,
}

fn one() -> f64 {
    1.0
}

fn default_window_side() -> f64 {
    20.0
}

fn default_speed() -> SpeedDistribution {
    SpeedDistribution::Dirac { v: 1.0 }
}

fn default_kernel_radius() -> f64 {
    2.0
}

fn default_rho() -> f64 {
    0.5
}

fn default_infection() -> TimeDistribution {
    TimeDistribution::Dirac { tau: 1.0 }
}

fn default_patch() -> TimeDistribution {
    TimeDistribution::Dirac { tau: 2.0 }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

fn keyed(key: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::InvalidParameter { reason, .. } => Error::config(key, reason),
        other => Error::config(key, other.to_string()),
    })
}

impl Scenario {
    /// Minimal scenario with every other value at its default.
    pub fn new(generator: GeneratorTag, lambda: f64) -> Result<Self> {
        Scenario {
            seed: 0,
            engine: Engine::Dynamic,
            streets: StreetParams {
                generator,
                intensity: 1.0,
                gamma: None,
                spacing: None,
                window_side: default_window_side(),
                buffer: None,
            },
            devices: DeviceParams {
                lambda,
                lambda_w: 0.0,
            },
            mobility: MobilityParams::default(),
            contact: ContactParams::default(),
            epidemic: EpidemicParams::default(),
        }
        .resolve()
    }

    /// Check every constraint, then fill in the derived defaults.
    pub fn resolve(mut self) -> Result<Self> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", "must be below 2^63"));
        }
        let st = &mut self.streets;
        positive("streets.intensity", st.intensity)?;
        positive("streets.window_side", st.window_side)?;
        match st.generator {
            GeneratorTag::Pvt | GeneratorTag::Pdt => {
                if st.spacing.is_some() {
                    return Err(Error::config(
                        "streets.spacing",
                        format!("does not apply to {}", st.generator),
                    ));
                }
                let gamma = match st.gamma {
                    Some(g) => g,
                    None => closed_form_parameter(st.generator, st.intensity)?,
                };
                positive("streets.gamma", gamma)?;
                st.gamma = Some(gamma);
            }
            GeneratorTag::Manhattan => {
                if st.gamma.is_some() {
                    return Err(Error::config(
                        "streets.gamma",
                        "does not apply to manhattan",
                    ));
                }
                let spacing = match st.spacing {
                    Some(s) => s,
                    None => closed_form_parameter(st.generator, st.intensity)?,
                };
                positive("streets.spacing", spacing)?;
                st.spacing = Some(spacing);
            }
            GeneratorTag::Fixture => {
                return Err(Error::config(
                    "streets.generator",
                    "expected one of pvt, pdt, manhattan",
                ));
            }
        }
        non_negative("devices.lambda", self.devices.lambda)?;
        non_negative("devices.lambda_w", self.devices.lambda_w)?;
        keyed("mobility.speed", self.mobility.speed.validate())?;
        positive("mobility.kernel_radius", self.mobility.kernel_radius)?;
        positive("contact.r", self.contact.r)?;
        non_negative("contact.rho", self.contact.rho)?;
        keyed(
            "epidemic.infection",
            self.epidemic.infection.validate("infection"),
        )?;
        keyed("epidemic.patch", self.epidemic.patch.validate("patch"))?;
        positive("epidemic.b", self.epidemic.b)?;

        let st = &mut self.streets;
        let buffer = match (st.buffer, st.generator) {
            (Some(b), _) => b,
            (None, GeneratorTag::Manhattan) => 0.0,
            (None, _) => default_buffer(st.gamma.expect("set above"), self.mobility.kernel_radius),
        };
        non_negative("streets.buffer", buffer)?;
        st.buffer = Some(buffer);

        let ep = &mut self.epidemic;
        let t_sim = match ep.t_sim {
            Some(t) => t,
            None => {
                let scale = if ep.infection.min() > 0.0 {
                    ep.infection.min()
                } else {
                    ep.infection.mean()
                };
                20.0 * scale
            }
        };
        positive("epidemic.t_sim", t_sim)?;
        ep.t_sim = Some(t_sim);
        let reach = ep.reach_radius.unwrap_or(0.4 * self.streets.window_side);
        positive("epidemic.reach_radius", reach)?;
        ep.reach_radius = Some(reach);
        Ok(self)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
        let raw: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().message().trim().to_string())
        })?;
        raw.resolve()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Complete TOML rendering; parsing it gives back `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes to TOML")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes to JSON");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn window(&self) -> Window {
        Window::centered(self.streets.window_side)
    }

    pub fn street_model(&self) -> StreetModel {
        match self.streets.generator {
            GeneratorTag::Pvt => StreetModel::Pvt {
                gamma: self.streets.gamma.expect("resolved"),
            },
            GeneratorTag::Pdt => StreetModel::Pdt {
                gamma: self.streets.gamma.expect("resolved"),
            },
            _ => StreetModel::Manhattan {
                spacing: self.streets.spacing.expect("resolved"),
            },
        }
    }

    pub fn buffer(&self) -> f64 {
        self.streets.buffer.unwrap_or(0.0)
    }

    pub fn kernel(&self) -> Result<UniformBall> {
        UniformBall::new(self.mobility.kernel_radius)
    }

    pub fn t_sim(&self) -> f64 {
        self.epidemic.t_sim.expect("resolved")
    }

    pub fn reach_radius(&self) -> f64 {
        self.epidemic.reach_radius.expect("resolved")
    }
}
