//! Scenarios shipped with the library.

use super::scenario::{parse_scenario, ScenarioConfig};

pub const EXAMPLE_B: &str = include_str!("../../scenarios/example_b.toml");
pub const PRIORITY_RACE: &str = include_str!("../../scenarios/priority_race.toml");
pub const EMPTY: &str = include_str!("../../scenarios/empty.toml");

pub const NAMES: [&str; 3] = ["example_b", "priority_race", "empty"];

pub fn bundled_text(name: &str) -> Option<&'static str> {
    match name {
        "example_b" => Some(EXAMPLE_B),
        "priority_race" => Some(PRIORITY_RACE),
        "empty" => Some(EMPTY),
        _ => None,
    }
}

pub fn bundled(name: &str) -> Option<ScenarioConfig> {
    bundled_text(name).map(|text| parse_scenario(text, name).expect("bundled scenarios are valid"))
}

pub fn example_b() -> ScenarioConfig {
    bundled("example_b").expect("bundled")
}
