//! Reference vehicles and their JSON representation.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;
use crate::model::{Cant, DroneSpec};

/// Serialized form of a [`DroneSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRecord {
    pub name: String,
    pub mass_kg: f64,
    pub propeller_diameter_m: f64,
    pub motor_distance_m: f64,
    #[serde(default = "default_propellers")]
    pub n_propellers: u32,
    #[serde(default = "default_cant")]
    pub cant: Cant,
}

fn default_propellers() -> u32 {
    4
}

fn default_cant() -> Cant {
    Cant::Uncanted
}

impl From<&DroneSpec> for PresetRecord {
    fn from(d: &DroneSpec) -> Self {
        PresetRecord {
            name: d.name.clone(),
            mass_kg: d.mass,
            propeller_diameter_m: d.propeller_diameter(),
            motor_distance_m: d.motor_distance,
            n_propellers: d.n_propellers,
            cant: d.cant,
        }
    }
}

impl TryFrom<PresetRecord> for DroneSpec {
    type Error = ModelError;

    fn try_from(r: PresetRecord) -> Result<Self, Self::Error> {
        DroneSpec::new(
            r.name,
            r.mass_kg,
            r.propeller_diameter_m / 2.0,
            r.n_propellers,
            r.motor_distance_m,
            r.cant,
        )
    }
}

impl Serialize for DroneSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PresetRecord::from(self).serialize(serializer)
    }
}

/// Accepts either a preset name or a full record.
impl<'de> Deserialize<'de> for DroneSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Preset(String),
            Inline(PresetRecord),
        }
        let spec = match Repr::deserialize(deserializer)? {
            Repr::Preset(name) => find(&name),
            Repr::Inline(record) => DroneSpec::try_from(record),
        };
        spec.map_err(serde::de::Error::custom)
    }
}

const TABLE: [(&str, f64, Cant, f64, f64); 6] = [
    // name, mass kg, cant, propeller diameter m, motor distance m
    ("Kolibri", 0.230, Cant::Uncanted, 0.0737, 0.118),
    ("Offboard 1", 0.572, Cant::Uncanted, 0.1295, 0.266),
    ("Offboard 2", 1.207, Cant::Uncanted, 0.1295, 0.266),
    ("Matrice 300", 6.300, Cant::Uncanted, 0.5334, 0.894),
    ("Mavic 3E", 0.958, Cant::Inward, 0.2388, 0.385),
    ("Elios 3", 2.398, Cant::Outward, 0.1270, 0.275),
];

/// Published induced velocities of the reference vehicles, m/s, in preset order.
pub const REFERENCE_INDUCED_VELOCITY: [f64; 6] = [7.41, 6.66, 9.66, 5.36, 4.67, 13.89];

pub fn all() -> Vec<DroneSpec> {
    TABLE
        .iter()
        .map(|&(name, mass, cant, diameter, l)| DroneSpec {
            name: name.to_string(),
            mass,
            propeller_radius: diameter / 2.0,
            n_propellers: 4,
            motor_distance: l,
            cant,
        })
        .collect()
}

fn canonical(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Looks a preset up by name, ignoring case, spaces, dashes and underscores.
pub fn find(name: &str) -> Result<DroneSpec, ModelError> {
    let key = canonical(name);
    all()
        .into_iter()
        .find(|d| canonical(&d.name) == key)
        .ok_or_else(|| ModelError::UnknownPreset(name.to_string()))
}

/// Stable identifier used for fixture file names, e.g. `offboard_1`.
pub fn slug(name: &str) -> String {
    name.split_whitespace()
        .map(|w| w.to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}
