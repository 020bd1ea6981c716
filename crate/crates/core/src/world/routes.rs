//! Synthetic constant-speed routes along road polylines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MobilityTrace, Position, TraceSample, VehicleId};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteConfig {
    /// Road geometry; consecutive points are straight segments.
    pub polyline: Vec<Position>,
    pub speed_mps: f64,
    /// Number of slots to sample (one position per slot).
    pub slots: usize,
    pub slot_duration_s: f64,
    /// Arc-length offset of the start point, meters.
    pub start_offset_m: f64,
    /// Extra seeded uniform offset in [0, jitter), meters. Zero keeps the
    /// trace independent of the seed.
    pub start_jitter_m: f64,
}

fn polyline_length(points: &[Position]) -> f64 {
    points
        .windows(2)
        .map(|w| super::distance(w[0], w[1]))
        .sum()
}

/// Position at arc length `s` along the polyline, clamped to the endpoints.
fn point_at(points: &[Position], s: f64) -> Position {
    if s <= 0.0 {
        return points[0];
    }
    let mut remaining = s;
    for w in points.windows(2) {
        let seg = super::distance(w[0], w[1]);
        if remaining <= seg && seg > 0.0 {
            let f = remaining / seg;
            return Position::new(
                w[0].x + f * (w[1].x - w[0].x),
                w[0].y + f * (w[1].y - w[0].y),
            );
        }
        remaining -= seg;
    }
    *points.last().unwrap()
}

/// Deterministic-for-seed trace moving along the polyline at constant speed,
/// one sample per slot. Vehicles park at the end of the road.
pub fn synth_route(cfg: &RouteConfig, vehicle_id: VehicleId, seed: u64) -> Result<MobilityTrace> {
    if cfg.polyline.len() < 2 || polyline_length(&cfg.polyline) == 0.0 {
        return Err(Error::config("route polyline has zero length"));
    }
    if cfg.slot_duration_s <= 0.0 {
        return Err(Error::config("slot duration must be positive"));
    }
    let jitter = if cfg.start_jitter_m > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.gen_range(0.0..cfg.start_jitter_m)
    } else {
        0.0
    };
    let start = cfg.start_offset_m + jitter;
    let samples = (0..cfg.slots)
        .map(|i| {
            let t = i as f64 * cfg.slot_duration_s;
            TraceSample {
                t_s: t,
                position: point_at(&cfg.polyline, start + cfg.speed_mps * t),
            }
        })
        .collect();
    Ok(MobilityTrace { vehicle_id, samples })
}
