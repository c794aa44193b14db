use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{ClusterGrid, GreyAreaRegion, Location, Point};
use super::TopologyError;
use crate::revocation::{CertificateId, ClusterId, RsuId};
use crate::time::SimTime;

/// Urban speed cap, about 50 km/h.
pub const MAX_SPEED_MPS: f64 = 14.0;

const SPEED_SLACK: f64 = 1e-9;
const PARAM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub pos: Point,
}

impl Waypoint {
    pub fn new(t_s: f64, x: f64, y: f64) -> Self {
        Waypoint {
            t_s,
            pos: Point::new(x, y),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptedAction {
    C2c { target: CertificateId, payload: String },
    SafetyReport { body: String },
    GreyAreaRequest { cluster: ClusterId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub at: SimTime,
    pub action: ScriptedAction,
}

impl FromStr for ScriptedEvent {
    type Err = String;

    /// `<t_s> c2c <target> <payload...>`, `<t_s> safety <body...>` or
    /// `<t_s> grey-request <cluster>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let t: f64 = parts
            .next()
            .ok_or("empty event")?
            .parse()
            .map_err(|_| format!("bad event time in {s:?}"))?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(format!("bad event time in {s:?}"));
        }
        let verb = parts.next().ok_or_else(|| format!("missing event kind in {s:?}"))?;
        let rest: Vec<&str> = parts.collect();
        let action = match verb {
            "c2c" => {
                let (target, payload) = rest
                    .split_first()
                    .ok_or_else(|| format!("c2c needs a target in {s:?}"))?;
                ScriptedAction::C2c {
                    target: CertificateId::new(*target).map_err(|e| e.to_string())?,
                    payload: payload.join(" "),
                }
            }
            "safety" => ScriptedAction::SafetyReport { body: rest.join(" ") },
            "grey-request" => match rest.as_slice() {
                [c] => ScriptedAction::GreyAreaRequest {
                    cluster: ClusterId(c.parse().map_err(|_| format!("bad cluster in {s:?}"))?),
                },
                _ => return Err(format!("grey-request takes one cluster in {s:?}")),
            },
            other => return Err(format!("unknown event kind {other:?}")),
        };
        Ok(ScriptedEvent {
            at: SimTime::from_secs_f64(t),
            action,
        })
    }
}

impl fmt::Display for ScriptedEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.at.as_secs_f64();
        match &self.action {
            ScriptedAction::C2c { target, payload } => write!(f, "{t} c2c {target} {payload}"),
            ScriptedAction::SafetyReport { body } => write!(f, "{t} safety {body}"),
            ScriptedAction::GreyAreaRequest { cluster } => write!(f, "{t} grey-request {cluster}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleItinerary {
    pub vehicle: CertificateId,
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub script: Vec<ScriptedEvent>,
}

impl VehicleItinerary {
    pub fn validate(&self, grid: &ClusterGrid) -> Result<(), TopologyError> {
        let bad = |reason: String| TopologyError::BadItinerary {
            vehicle: self.vehicle.to_string(),
            reason,
        };
        if self.waypoints.is_empty() {
            return Err(bad("no waypoints".into()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !w.t_s.is_finite() || w.t_s < 0.0 {
                return Err(bad(format!("waypoint {i} has a bad time")));
            }
            if !grid.contains(w.pos) {
                return Err(bad(format!("waypoint {i} ({}, {}) lies outside the grid", w.pos.x, w.pos.y)));
            }
        }
        for (i, pair) in self.waypoints.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if b.t_s <= a.t_s {
                return Err(bad(format!("waypoint {} time does not increase", i + 1)));
            }
            let speed = a.pos.distance(b.pos) / (b.t_s - a.t_s);
            if speed > MAX_SPEED_MPS + SPEED_SLACK {
                return Err(bad(format!("leg {i} needs {speed:.2} m/s, above {MAX_SPEED_MPS}")));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    /// Piecewise-linear position; clamps before the first and after the last
    /// waypoint.
    pub fn position_at(&self, t: SimTime) -> Point {
        let t = t.as_secs_f64();
        let w = &self.waypoints;
        if t <= w[0].t_s {
            return w[0].pos;
        }
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.t_s {
                let s = (t - a.t_s) / (b.t_s - a.t_s);
                return lerp(a.pos, b.pos, s);
            }
        }
        w[w.len() - 1].pos
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MobilityEvent {
    BorderCrossing {
        vehicle: CertificateId,
        from: ClusterId,
        to: ClusterId,
        rsu: RsuId,
    },
    EnterGreyArea {
        vehicle: CertificateId,
        region: GreyAreaRegion,
    },
    LeaveGreyArea {
        vehicle: CertificateId,
        cluster: ClusterId,
    },
    Scripted {
        vehicle: CertificateId,
        action: ScriptedAction,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub at: SimTime,
    pub event: MobilityEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub at: SimTime,
    pub cluster: ClusterId,
    pub rsu: RsuId,
}

/// Where the vehicle first announces itself. None when it starts in a grey
/// area; it then joins on its first LeaveGreyArea.
pub fn initial_arrival(grid: &ClusterGrid, itinerary: &VehicleItinerary) -> Option<Arrival> {
    let start = itinerary.start();
    match grid.locate(start.pos).ok()? {
        Location::Cluster(cluster) => Some(Arrival {
            at: SimTime::from_secs_f64(start.t_s),
            cluster,
            rsu: grid.nearest_rsu(cluster, start.pos)?.id.clone(),
        }),
        Location::GreyArea(_) => None,
    }
}

fn lerp(a: Point, b: Point, s: f64) -> Point {
    Point::new(a.x + (b.x - a.x) * s, a.y + (b.y - a.y) * s)
}

#[derive(Clone, Copy, PartialEq)]
struct Status {
    cell: ClusterId,
    covered: bool,
}

fn status_at(grid: &ClusterGrid, p: Point) -> Status {
    let cell = grid.owner_of(p).expect("validated itinerary stays in the grid");
    Status {
        cell,
        covered: grid.covers(cell, p),
    }
}

/// Parameters in (lo, hi) where the segment meets the coverage circle of `c`.
fn circle_roots(grid: &ClusterGrid, c: ClusterId, a: Point, b: Point, lo: f64, hi: f64) -> Vec<f64> {
    let center = grid.cluster(c).expect("known cluster").center();
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (fx, fy) = (a.x - center.x, a.y - center.y);
    let qa = dx * dx + dy * dy;
    let qb = 2.0 * (dx * fx + dy * fy);
    let qc = fx * fx + fy * fy - grid.coverage_radius_m * grid.coverage_radius_m;
    let disc = qb * qb - 4.0 * qa * qc;
    if qa == 0.0 || disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
        .into_iter()
        .filter(|s| *s > lo + PARAM_EPS && *s < hi - PARAM_EPS)
        .collect()
}

fn line_params(a: f64, b: f64, side: f64, count: usize) -> impl Iterator<Item = f64> {
    (1..count).filter_map(move |k| {
        let line = k as f64 * side;
        if a == b {
            return None;
        }
        let s = (line - a) / (b - a);
        (s > PARAM_EPS && s < 1.0 - PARAM_EPS).then_some(s)
    })
}

fn push_transition(
    grid: &ClusterGrid,
    vehicle: &CertificateId,
    at: SimTime,
    pos: Point,
    mid: Point,
    prev: Status,
    next: Status,
    out: &mut Vec<TimedEvent>,
) {
    if prev.covered && !next.covered {
        if let Ok(Location::GreyArea(region)) = grid.locate(mid) {
            out.push(TimedEvent {
                at,
                event: MobilityEvent::EnterGreyArea {
                    vehicle: vehicle.clone(),
                    region,
                },
            });
        }
    }
    if prev.cell != next.cell {
        let hops = if grid.are_adjacent(prev.cell, next.cell) {
            vec![(prev.cell, next.cell)]
        } else {
            // exact corner pass: go through the lower-numbered shared neighbor
            let via = grid
                .neighbors(prev.cell)
                .intersection(&grid.neighbors(next.cell))
                .copied()
                .min();
            match via {
                Some(v) => vec![(prev.cell, v), (v, next.cell)],
                None => Vec::new(),
            }
        };
        for (from, to) in hops {
            if let Some(guard) = grid.guard_rsu(to, from, pos) {
                out.push(TimedEvent {
                    at,
                    event: MobilityEvent::BorderCrossing {
                        vehicle: vehicle.clone(),
                        from,
                        to,
                        rsu: guard.id.clone(),
                    },
                });
            }
        }
    }
    if !prev.covered && next.covered {
        out.push(TimedEvent {
            at,
            event: MobilityEvent::LeaveGreyArea {
                vehicle: vehicle.clone(),
                cluster: next.cell,
            },
        });
    }
}

/// Movement and scripted events with `from <= at < to`, in time order.
pub fn advance(
    grid: &ClusterGrid,
    itinerary: &VehicleItinerary,
    from: SimTime,
    to: SimTime,
) -> Result<Vec<TimedEvent>, TopologyError> {
    itinerary.validate(grid)?;
    let vehicle = &itinerary.vehicle;
    let mut out = Vec::new();
    let mut status = status_at(grid, itinerary.start().pos);

    for pair in itinerary.waypoints.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.pos == b.pos {
            continue;
        }
        let mut coarse = vec![0.0, 1.0];
        coarse.extend(line_params(a.pos.x, b.pos.x, grid.cluster_side_m, grid.cols));
        coarse.extend(line_params(a.pos.y, b.pos.y, grid.cluster_side_m, grid.rows));
        coarse.sort_by(f64::total_cmp);
        coarse.dedup_by(|x, y| (*x - *y).abs() <= PARAM_EPS);

        let mut fine = coarse.clone();
        for w in coarse.windows(2) {
            let cell = status_at(grid, lerp(a.pos, b.pos, (w[0] + w[1]) / 2.0)).cell;
            fine.extend(circle_roots(grid, cell, a.pos, b.pos, w[0], w[1]));
        }
        fine.sort_by(f64::total_cmp);
        fine.dedup_by(|x, y| (*x - *y).abs() <= PARAM_EPS);

        for w in fine.windows(2) {
            let mid = lerp(a.pos, b.pos, (w[0] + w[1]) / 2.0);
            let next = status_at(grid, mid);
            if next != status {
                let at = SimTime::from_secs_f64(a.t_s + w[0] * (b.t_s - a.t_s));
                let pos = lerp(a.pos, b.pos, w[0]);
                push_transition(grid, vehicle, at, pos, mid, status, next, &mut out);
                status = next;
            }
        }
    }

    out.extend(itinerary.script.iter().map(|s| TimedEvent {
        at: s.at,
        event: MobilityEvent::Scripted {
            vehicle: vehicle.clone(),
            action: s.action.clone(),
        },
    }));
    out.sort_by_key(|e| e.at);
    out.retain(|e| e.at >= from && e.at < to);
    Ok(out)
}

/// Random drive along the road network joining cluster centers: legs between
/// neighboring centers at 8 to 14 m/s with short stops in between.
pub fn random_road_itinerary<R: Rng>(
    grid: &ClusterGrid,
    vehicle: CertificateId,
    start: ClusterId,
    t_end_s: f64,
    rng: &mut R,
) -> VehicleItinerary {
    let mut here = start;
    let mut t = 0.0;
    let mut pos = grid.cluster(start).expect("known start cluster").center();
    let mut waypoints = vec![Waypoint { t_s: t, pos }];
    loop {
        let dwell = rng.random_range(5.0..60.0);
        t += dwell;
        if t >= t_end_s {
            break;
        }
        waypoints.push(Waypoint { t_s: t, pos });
        let options: Vec<ClusterId> = grid.neighbors(here).into_iter().collect();
        if options.is_empty() {
            break;
        }
        let next = options[rng.random_range(0..options.len())];
        let target = grid.cluster(next).expect("neighbor exists").center();
        let speed = rng.random_range(8.0..MAX_SPEED_MPS);
        t += pos.distance(target) / speed;
        here = next;
        pos = target;
        waypoints.push(Waypoint { t_s: t, pos });
        if t >= t_end_s {
            break;
        }
    }
    VehicleItinerary {
        vehicle,
        waypoints,
        script: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::grid::{build_grid, GridSpec};

    fn cid(s: &str) -> CertificateId {
        CertificateId::new(s).unwrap()
    }

    fn example_grid() -> ClusterGrid {
        let mut spec = GridSpec::uniform(2, 3, 2000.0, 1);
        spec.labels = Some(vec![vec![2, 1, 5], vec![3, 6, 4]]);
        spec.rsu_names.insert("1>6".into(), "RSU4".into());
        build_grid(&spec).unwrap()
    }

    fn itinerary(v: &str, pts: &[(f64, f64, f64)]) -> VehicleItinerary {
        VehicleItinerary {
            vehicle: cid(v),
            waypoints: pts.iter().map(|&(t, x, y)| Waypoint::new(t, x, y)).collect(),
            script: Vec::new(),
        }
    }

    #[test]
    fn southbound_crossing_hits_rsu4() {
        let g = example_grid();
        let it = itinerary("V25", &[(30.0, 3000.0, 2700.0), (150.0, 3000.0, 1500.0)]);
        let events = advance(&g, &it, SimTime::ZERO, SimTime::from_secs(1000)).unwrap();
        assert_eq!(
            events,
            vec![TimedEvent {
                at: SimTime::from_secs(100),
                event: MobilityEvent::BorderCrossing {
                    vehicle: cid("V25"),
                    from: ClusterId(6),
                    to: ClusterId(1),
                    rsu: RsuId::new("RSU4"),
                },
            }]
        );
    }

    #[test]
    fn window_is_half_open() {
        let g = example_grid();
        let it = itinerary("V25", &[(30.0, 3000.0, 2700.0), (150.0, 3000.0, 1500.0)]);
        assert_eq!(advance(&g, &it, SimTime::ZERO, SimTime::from_secs(100)).unwrap().len(), 0);
        assert_eq!(advance(&g, &it, SimTime::from_secs(100), SimTime::from_secs(101)).unwrap().len(), 1);
    }

    #[test]
    fn parked_vehicle_is_silent() {
        let g = example_grid();
        let it = itinerary("V1", &[(0.0, 3000.0, 1000.0), (500.0, 3000.0, 1000.0)]);
        assert!(advance(&g, &it, SimTime::ZERO, SimTime::from_secs(600)).unwrap().is_empty());
    }

    #[test]
    fn diagonal_through_a_corner_makes_two_crossings() {
        let g = build_grid(&GridSpec::uniform(2, 2, 2000.0, 1)).unwrap();
        // 1 (SW) to 4 (NE) through the shared corner at (2000, 2000)
        let it = itinerary("V1", &[(0.0, 1000.0, 1000.0), (300.0, 3000.0, 3000.0)]);
        let events = advance(&g, &it, SimTime::ZERO, SimTime::from_secs(400)).unwrap();
        let crossings: Vec<(ClusterId, ClusterId)> = events
            .iter()
            .filter_map(|e| match &e.event {
                MobilityEvent::BorderCrossing { from, to, .. } => Some((*from, *to)),
                _ => None,
            })
            .collect();
        assert_eq!(crossings, vec![(ClusterId(1), ClusterId(2)), (ClusterId(2), ClusterId(4))]);
        let times: Vec<SimTime> = events.iter().map(|e| e.at).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        // it also passes through grey corners on the way
        assert!(events.iter().any(|e| matches!(e.event, MobilityEvent::EnterGreyArea { .. })));
        assert!(matches!(events.last().unwrap().event, MobilityEvent::LeaveGreyArea { cluster: ClusterId(4), .. }));
    }

    #[test]
    fn off_center_crossing_through_grey_corner() {
        let g = build_grid(&GridSpec::uniform(1, 2, 2000.0, 1)).unwrap();
        let it = itinerary("V2", &[(0.0, 1000.0, 200.0), (200.0, 3000.0, 200.0)]);
        let events = advance(&g, &it, SimTime::ZERO, SimTime::from_secs(300)).unwrap();
        let kinds: Vec<&str> = events
            .iter()
            .map(|e| match e.event {
                MobilityEvent::EnterGreyArea { .. } => "enter",
                MobilityEvent::LeaveGreyArea { .. } => "leave",
                MobilityEvent::BorderCrossing { .. } => "cross",
                MobilityEvent::Scripted { .. } => "script",
            })
            .collect();
        assert_eq!(kinds, vec!["enter", "cross", "leave"]);
        // chord of the 1000 m circle at 800 m off-center: half-width 600 m
        assert_eq!(events[0].at, SimTime::from_secs(60));
        assert_eq!(events[1].at, SimTime::from_secs(100));
        assert_eq!(events[2].at, SimTime::from_secs(140));
    }

    #[test]
    fn validation() {
        let g = example_grid();
        let fast = itinerary("V1", &[(0.0, 1000.0, 1000.0), (10.0, 1500.0, 1000.0)]);
        assert!(matches!(fast.validate(&g), Err(TopologyError::BadItinerary { .. })));
        let outside = itinerary("V1", &[(0.0, -5.0, 1000.0)]);
        assert!(outside.validate(&g).is_err());
        let backwards = itinerary("V1", &[(10.0, 1000.0, 1000.0), (10.0, 1000.0, 1000.0)]);
        assert!(backwards.validate(&g).is_err());
    }

    #[test]
    fn scripted_events_parse() {
        let e: ScriptedEvent = "150 c2c V41 hello there".parse().unwrap();
        assert_eq!(e.at, SimTime::from_secs(150));
        assert_eq!(
            e.action,
            ScriptedAction::C2c { target: cid("V41"), payload: "hello there".into() }
        );
        let g: ScriptedEvent = "220.5 grey-request 5".parse().unwrap();
        assert_eq!(g.action, ScriptedAction::GreyAreaRequest { cluster: ClusterId(5) });
        assert!("x c2c V1".parse::<ScriptedEvent>().is_err());
        assert!("1 fly".parse::<ScriptedEvent>().is_err());
        assert_eq!(e.to_string().parse::<ScriptedEvent>().unwrap(), e);
    }

    #[test]
    fn arrival_uses_nearest_local_rsu() {
        let g = example_grid();
        let it = itinerary("V25", &[(30.0, 3000.0, 2700.0)]);
        let a = initial_arrival(&g, &it).unwrap();
        assert_eq!(a.cluster, ClusterId(6));
        assert_eq!(a.at, SimTime::from_secs(30));
        let grey = itinerary("V9", &[(0.0, 3900.0, 1900.0)]);
        assert!(initial_arrival(&g, &grey).is_none());
    }

    #[test]
    fn random_itineraries_are_valid() {
        use rand::SeedableRng;
        let g = build_grid(&GridSpec::uniform(3, 3, 2000.0, 1)).unwrap();
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let it = random_road_itinerary(&g, cid("V1"), ClusterId(5), 600.0, &mut rng);
            it.validate(&g).unwrap();
        }
    }
}
