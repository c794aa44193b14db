//! Seeded random scenarios for load and property testing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{BaselineConfig, RevokedList, ScenarioConfig, ScenarioFile, VehicleEntry};
use crate::engine::ChannelModel;
use crate::revocation::{CertificateId, ClusterId};
use crate::topology::{build_grid, random_road_itinerary, GridSpec};

#[derive(Clone, Debug)]
pub struct GeneratorLimits {
    pub max_side: usize,
    pub max_vehicles: usize,
    pub max_adversaries: usize,
    pub t_end_s: f64,
    pub c2c_per_vehicle: usize,
}

impl Default for GeneratorLimits {
    fn default() -> Self {
        GeneratorLimits {
            max_side: 3,
            max_vehicles: 50,
            max_adversaries: 10,
            t_end_s: 600.0,
            c2c_per_vehicle: 3,
        }
    }
}

pub fn random_scenario(seed: u64) -> ScenarioConfig {
    random_scenario_with(seed, &GeneratorLimits::default())
}

pub fn random_scenario_with(seed: u64, limits: &GeneratorLimits) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=limits.max_side);
    let cols = rng.random_range(1..=limits.max_side);
    let mut spec = GridSpec::uniform(rows, cols, 2000.0, 1);
    spec.interior_rsus = 1;
    let grid = build_grid(&spec).expect("generated grid is valid");
    let clusters: Vec<ClusterId> = grid.cluster_ids().collect();

    let n = rng.random_range(1..=limits.max_vehicles);
    let adversaries = rng.random_range(0..=limits.max_adversaries.min(n));
    let mut ids: Vec<String> = (0..n).map(|i| format!("V{}", i + 1)).collect();
    ids.shuffle(&mut rng);

    let mut vehicles = Vec::with_capacity(n);
    let mut revoked: Vec<RevokedList> = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let start = clusters[rng.random_range(0..clusters.len())];
        let cert = CertificateId::new(id).expect("generated ids are valid");
        let it = random_road_itinerary(&grid, cert, start, limits.t_end_s, &mut rng);
        if i < adversaries {
            match revoked.iter_mut().find(|l| l.cluster == start.0) {
                Some(l) => l.certs.push(id.clone()),
                None => revoked.push(RevokedList { cluster: start.0, certs: vec![id.clone()] }),
            }
        }
        let mut events = Vec::new();
        if n > 1 {
            for _ in 0..rng.random_range(0..=limits.c2c_per_vehicle) {
                let t = rng.random_range(1..limits.t_end_s.max(2.0) as u64);
                let target = loop {
                    let j = rng.random_range(0..n);
                    if j != i {
                        break &ids[j];
                    }
                };
                events.push((t, format!("{t} c2c {target} hello")));
            }
        }
        events.sort();
        vehicles.push(VehicleEntry {
            id: id.clone(),
            waypoints: it.waypoints.iter().map(|w| [w.t_s, w.pos.x, w.pos.y]).collect(),
            events: events.into_iter().map(|(_, e)| e).collect(),
        });
    }
    revoked.sort_by_key(|l| l.cluster);

    let file = ScenarioFile {
        name: format!("random-{seed}"),
        seed,
        t_end_s: limits.t_end_s,
        broadcast_period_s: 60.0,
        entry_size_bytes: 100,
        header_bytes: 16,
        grid: spec,
        channel: ChannelModel::default(),
        message_sizes: Default::default(),
        baseline: BaselineConfig::default(),
        revoked,
        vehicles,
    };
    ScenarioConfig::from_file(file).expect("generated scenario is valid")
}
