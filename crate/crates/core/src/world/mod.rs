//! World geometry and state: RSU/vehicle specs, coverage membership, mobility
//! traces and synthetic routes, dwell-time computation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

mod routes;
mod traces;

pub use routes::{synth_route, RouteConfig};
pub use traces::{load_traces, write_traces, GeoBounds};

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RsuId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl std::fmt::Display for RsuId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rsu{}", self.0)
    }
}

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Static description of one road-side unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RsuSpec {
    pub id: RsuId,
    pub position: Position,
    /// Radius of the coverage disk, meters.
    pub coverage_radius_m: f64,
    /// Wireless uplink spectrum, Hz.
    pub uplink_bandwidth_hz: f64,
    /// Wireless downlink spectrum, Hz.
    pub downlink_bandwidth_hz: f64,
    /// GPU capacity, cycles/second.
    pub gpu_capacity_cps: f64,
    /// Workload cap, cycles.
    pub max_workload_cycles: f64,
    /// Backhaul to peer RSUs, bits/second. Symmetric by default.
    pub migration_bandwidth_to: BTreeMap<RsuId, f64>,
    /// Backhaul to the cloud, bits/second.
    pub cloud_uplink_bps: f64,
    /// Receiver noise power, watts.
    pub noise_power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleMode {
    /// Sparse deployment: the only pre-migration option is the next RSU ahead.
    Remote,
    /// Dense deployment: any RSU within the candidate radius is an option.
    Urban,
}

/// Static description of one vehicle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub id: VehicleId,
    pub transmit_power_w: f64,
    /// Compute demand per task bit, cycles/bit.
    pub cycles_per_bit: f64,
    pub mode: VehicleMode,
}

/// One timestamped position sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_s: f64,
    pub position: Position,
}

/// Ordered position history of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityTrace {
    pub vehicle_id: VehicleId,
    pub samples: Vec<TraceSample>,
}

impl MobilityTrace {
    /// Timestamps must be strictly increasing.
    pub fn validate(&self) -> crate::Result<()> {
        for w in self.samples.windows(2) {
            if w[1].t_s <= w[0].t_s {
                return Err(crate::Error::validation(format!(
                    "trace for {} has non-increasing timestamps ({} then {})",
                    self.vehicle_id, w[0].t_s, w[1].t_s
                )));
            }
        }
        Ok(())
    }
}

/// Mutable snapshot of the world at one time slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub slot: u32,
    pub vehicle_positions: BTreeMap<VehicleId, Position>,
    /// Queued work per RSU, cycles.
    pub rsu_workloads: BTreeMap<RsuId, f64>,
    pub serving: BTreeMap<VehicleId, RsuId>,
}

/// Euclidean distance, meters.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// The RSU serving a position: nearest whose coverage disk contains it, or the
/// globally nearest when none covers it. Ties go to the smallest id.
pub fn serving_rsu(p: Position, rsus: &[RsuSpec]) -> RsuId {
    assert!(!rsus.is_empty(), "serving_rsu needs at least one RSU");
    let mut best_covering: Option<(f64, RsuId)> = None;
    let mut best_any: Option<(f64, RsuId)> = None;
    for r in rsus {
        let d = distance(p, r.position);
        let key = (d, r.id);
        if d <= r.coverage_radius_m && best_covering.map_or(true, |b| key < b) {
            best_covering = Some(key);
        }
        if best_any.map_or(true, |b| key < b) {
            best_any = Some(key);
        }
    }
    best_covering.or(best_any).unwrap().1
}

/// Pre-migration candidates for a vehicle.
///
/// Urban mode returns every RSU within `r_cand` of the position except the
/// serving one, ascending by id. Remote mode returns the single nearest
/// non-serving RSU strictly ahead of the heading, or nothing when the vehicle
/// is stationary or nothing lies ahead. An empty list is legal.
pub fn candidate_rsus(
    p: Position,
    heading: (f64, f64),
    serving: RsuId,
    mode: VehicleMode,
    r_cand: f64,
    rsus: &[RsuSpec],
) -> Vec<RsuId> {
    match mode {
        VehicleMode::Urban => {
            let mut ids: Vec<RsuId> = rsus
                .iter()
                .filter(|r| r.id != serving && distance(p, r.position) <= r_cand)
                .map(|r| r.id)
                .collect();
            ids.sort();
            ids
        }
        VehicleMode::Remote => {
            let norm = heading.0.hypot(heading.1);
            if norm == 0.0 {
                return Vec::new();
            }
            let (ux, uy) = (heading.0 / norm, heading.1 / norm);
            let mut best: Option<(f64, RsuId)> = None;
            for r in rsus {
                if r.id == serving {
                    continue;
                }
                let proj = (r.position.x - p.x) * ux + (r.position.y - p.y) * uy;
                if proj <= 0.0 {
                    continue;
                }
                let key = (distance(p, r.position), r.id);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
            best.map(|(_, id)| vec![id]).unwrap_or_default()
        }
    }
}

/// Time until the vehicle exits the RSU's coverage disk along its current
/// heading, seconds. Outside coverage: 0. Stationary inside: `t_dur_max`.
pub fn dwell_time(p: Position, velocity: (f64, f64), rsu: &RsuSpec, t_dur_max: f64) -> f64 {
    let dx = p.x - rsu.position.x;
    let dy = p.y - rsu.position.y;
    let dist2 = dx * dx + dy * dy;
    let r = rsu.coverage_radius_m;
    if dist2 > r * r {
        return 0.0;
    }
    let speed = velocity.0.hypot(velocity.1);
    if speed == 0.0 {
        return t_dur_max;
    }
    let (ux, uy) = (velocity.0 / speed, velocity.1 / speed);
    let proj = dx * ux + dy * uy;
    // Exit chord length from the quadratic |p + s*u - c| = r.
    let disc = (proj * proj + r * r - dist2).max(0.0);
    let exit_dist = -proj + disc.sqrt();
    exit_dist.max(0.0) / speed
}

/// Per-slot velocity from consecutive positions. Slot 0 uses the first forward
/// difference; later slots use the backward difference.
pub fn slot_velocity(positions: &[Position], slot: usize, dt: f64) -> (f64, f64) {
    if positions.len() < 2 || dt <= 0.0 {
        return (0.0, 0.0);
    }
    let (a, b) = if slot == 0 {
        (positions[0], positions[1])
    } else {
        let i = slot.min(positions.len() - 1);
        (positions[i - 1], positions[i])
    };
    ((b.x - a.x) / dt, (b.y - a.y) / dt)
}
