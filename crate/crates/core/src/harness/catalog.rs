use std::path::Path;

use super::HarnessError;
use crate::network::NetworkFile;
use crate::sim::{Scenario, ScenarioFile, SimError};

const NETWORKS: &[(&str, &str)] = &[
    ("net1x2.network.json", include_str!("../../scenarios/net1x2.network.json")),
    ("net1x3.network.json", include_str!("../../scenarios/net1x3.network.json")),
];

const SCENARIOS: &[(&str, &str)] = &[
    ("net1x2-heavy", include_str!("../../scenarios/net1x2-heavy.json")),
    ("net1x2-slight", include_str!("../../scenarios/net1x2-slight.json")),
    ("net1x2-under", include_str!("../../scenarios/net1x2-under.json")),
    ("net1x3-heavy", include_str!("../../scenarios/net1x3-heavy.json")),
    ("net1x3-slight", include_str!("../../scenarios/net1x3-slight.json")),
    ("net1x3-under", include_str!("../../scenarios/net1x3-under.json")),
    ("net1x3sb-heavy", include_str!("../../scenarios/net1x3sb-heavy.json")),
    ("net1x3sb-slight", include_str!("../../scenarios/net1x3sb-slight.json")),
    ("net1x3sb-under", include_str!("../../scenarios/net1x3sb-under.json")),
];

pub fn scenario_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

/// The parsed document of a catalog scenario, for callers that want to
/// tweak it before compiling.
pub fn catalog_file(name: &str) -> Result<ScenarioFile, HarnessError> {
    let (_, text) = SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))?;
    Ok(serde_json::from_str(text)?)
}

/// Compiles a scenario document whose network path names a catalog network.
pub fn compile_catalog_file(file: &ScenarioFile) -> Result<Scenario, HarnessError> {
    Ok(Scenario::compile(file, |rel| {
        let (_, text) = NETWORKS
            .iter()
            .find(|(n, _)| *n == rel)
            .ok_or_else(|| SimError::InvalidScenario(format!("no catalog network `{rel}`")))?;
        Ok(serde_json::from_str::<NetworkFile>(text)?)
    })?)
}

pub fn load_scenario(name: &str) -> Result<Scenario, HarnessError> {
    compile_catalog_file(&catalog_file(name)?)
}

/// An existing file path wins; otherwise the argument is a catalog name.
pub fn load_scenario_or_path(arg: &str) -> Result<Scenario, HarnessError> {
    if Path::new(arg).is_file() {
        Ok(Scenario::from_path(arg)?)
    } else {
        load_scenario(arg)
    }
}
