use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::{build_graph, extend_with_supersink, ExtendedGraph, NetworkError};

pub const DEFAULT_LENGTH_M: f64 = 300.0;
pub const DEFAULT_CAPACITY_VEH: u32 = 40;
pub const DEFAULT_SAT_FLOW_VPH: f64 = 1800.0;
/// 300 m at 30 km/h.
pub const DEFAULT_FF_TIME_S: f64 = 36.0;

/// On-disk network document: `{"links": [...], "movements": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkFile {
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub movements: Vec<MovementSpec>,
}

impl NetworkFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn build(&self) -> Result<ExtendedGraph, NetworkError> {
        extend_with_supersink(build_graph(&self.links, &self.movements)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinkSpec {
    #[serde(deserialize_with = "name_or_number")]
    pub id: String,
    #[serde(default = "default_length")]
    pub length_m: f64,
    #[serde(default = "default_capacity")]
    pub capacity_veh: u32,
    #[serde(default = "default_sat_flow")]
    pub sat_flow_vph: f64,
    #[serde(default = "default_ff_time")]
    pub ff_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit: Option<bool>,
}

impl LinkSpec {
    /// A link with default physical parameters and inferred flags.
    pub fn named(id: &str) -> Self {
        Self {
            id: id.to_string(),
            length_m: DEFAULT_LENGTH_M,
            capacity_veh: DEFAULT_CAPACITY_VEH,
            sat_flow_vph: DEFAULT_SAT_FLOW_VPH,
            ff_time_s: DEFAULT_FF_TIME_S,
            entry: None,
            exit: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MovementSpec {
    #[serde(deserialize_with = "name_or_number")]
    pub from: String,
    #[serde(deserialize_with = "name_or_number")]
    pub to: String,
    pub ratio: f64,
}

impl MovementSpec {
    pub fn new(from: &str, to: &str, ratio: f64) -> Self {
        Self { from: from.to_string(), to: to.to_string(), ratio }
    }
}

fn default_length() -> f64 {
    DEFAULT_LENGTH_M
}
fn default_capacity() -> u32 {
    DEFAULT_CAPACITY_VEH
}
fn default_sat_flow() -> f64 {
    DEFAULT_SAT_FLOW_VPH
}
fn default_ff_time() -> f64 {
    DEFAULT_FF_TIME_S
}

fn name_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(u64),
        Str(String),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Num(n) => n.to_string(),
        Raw::Str(s) => s,
    })
}
