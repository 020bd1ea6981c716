//! Mobility-trace CSV ingestion.
//!
//! Format: header `vehicle_id,timestamp,lat,lon`, UTF-8, `.` decimal
//! separator, one sample per row. Rows may be interleaved across vehicles and
//! unordered in time; each vehicle's samples are sorted on load. Duplicate
//! timestamps within a vehicle are rejected.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use super::{MobilityTrace, Position, TraceSample, VehicleId};
use crate::{Error, Result};

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Reference bounds for the equirectangular lat/lon → meters mapping.
///
/// The projection is anchored at (`lat_min`, `lon_min`) and uses the
/// mid-latitude cosine for the longitude scale, which is accurate at the
/// few-kilometer extents this simulator works with.
#[derive(Debug, Clone, Copy, serde::Serialize, Deserialize)]
pub struct GeoBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoBounds {
    fn meters_per_deg(&self) -> (f64, f64) {
        let lat_mid = 0.5 * (self.lat_min + self.lat_max);
        let per_deg_lat = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let per_deg_lon = per_deg_lat * lat_mid.to_radians().cos();
        (per_deg_lat, per_deg_lon)
    }

    pub fn project(&self, lat: f64, lon: f64) -> Position {
        let (k_lat, k_lon) = self.meters_per_deg();
        Position::new((lon - self.lon_min) * k_lon, (lat - self.lat_min) * k_lat)
    }

    pub fn unproject(&self, p: Position) -> (f64, f64) {
        let (k_lat, k_lon) = self.meters_per_deg();
        (self.lat_min + p.y / k_lat, self.lon_min + p.x / k_lon)
    }

    /// Planar extent of the bounds, meters.
    pub fn extent_m(&self) -> (f64, f64) {
        let corner = self.project(self.lat_max, self.lon_max);
        (corner.x, corner.y)
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    vehicle_id: u32,
    timestamp: f64,
    lat: f64,
    lon: f64,
}

/// Parse traces from CSV, one [`MobilityTrace`] per distinct vehicle id.
pub fn load_traces<R: Read>(reader: R, geo: &GeoBounds) -> Result<Vec<MobilityTrace>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut grouped: BTreeMap<VehicleId, Vec<TraceSample>> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        // Header is line 1, first data row line 2.
        let line = i + 2;
        let row = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if !row.timestamp.is_finite() || !row.lat.is_finite() || !row.lon.is_finite() {
            return Err(Error::Parse {
                line,
                msg: "non-finite field".into(),
            });
        }
        grouped
            .entry(VehicleId(row.vehicle_id))
            .or_default()
            .push(TraceSample {
                t_s: row.timestamp,
                position: geo.project(row.lat, row.lon),
            });
    }
    let mut traces = Vec::with_capacity(grouped.len());
    for (vehicle_id, mut samples) in grouped {
        samples.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
        let trace = MobilityTrace { vehicle_id, samples };
        trace.validate()?;
        traces.push(trace);
    }
    Ok(traces)
}

/// Inverse of [`load_traces`]: emit the same CSV grammar.
pub fn write_traces<W: Write>(traces: &[MobilityTrace], geo: &GeoBounds, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["vehicle_id", "timestamp", "lat", "lon"])?;
    for t in traces {
        for s in &t.samples {
            let (lat, lon) = geo.unproject(s.position);
            wtr.write_record([
                t.vehicle_id.0.to_string(),
                format!("{}", s.t_s),
                format!("{lat}"),
                format!("{lon}"),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geo() -> GeoBounds {
        GeoBounds {
            lat_min: 22.5312,
            lat_max: 22.6,
            lon_min: 114.0439,
            lon_max: 114.0681,
        }
    }

    #[test]
    fn minimal_two_row_parse() {
        let csv = "vehicle_id,timestamp,lat,lon\n7,0.0,22.54,114.05\n7,1.0,22.541,114.051\n";
        let traces = load_traces(csv.as_bytes(), &geo()).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].vehicle_id, VehicleId(7));
        assert_eq!(traces[0].samples.len(), 2);
        assert!(traces[0].samples[1].position.x > traces[0].samples[0].position.x);
    }

    #[test]
    fn interleaved_vehicles_group_and_sort() {
        let csv = "vehicle_id,timestamp,lat,lon\n\
                   1,2.0,22.55,114.05\n\
                   2,0.0,22.56,114.06\n\
                   1,0.0,22.54,114.05\n\
                   2,1.0,22.561,114.061\n\
                   1,1.0,22.545,114.05\n";
        let traces = load_traces(csv.as_bytes(), &geo()).unwrap();
        assert_eq!(traces.len(), 2);
        // Independent oracle: group rows by id and sort timestamps by hand.
        let expected: Vec<(u32, Vec<f64>)> = vec![(1, vec![0.0, 1.0, 2.0]), (2, vec![0.0, 1.0])];
        for ((id, times), trace) in expected.iter().zip(&traces) {
            assert_eq!(trace.vehicle_id, VehicleId(*id));
            let got: Vec<f64> = trace.samples.iter().map(|s| s.t_s).collect();
            assert_eq!(&got, times);
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "vehicle_id,timestamp,lat,lon\n1,0.0,22.54,114.05\n1,1.0,22.54,not-a-number\n";
        let err = load_traces(csv.as_bytes(), &geo()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_timestamps_rejected_with_vehicle() {
        let csv = "vehicle_id,timestamp,lat,lon\n9,1.0,22.54,114.05\n9,1.0,22.55,114.05\n";
        let err = load_traces(csv.as_bytes(), &geo()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("v9"), "error should name the vehicle: {msg}");
    }

    #[test]
    fn projection_is_locally_metric() {
        let g = geo();
        let a = g.project(22.5312, 114.0439);
        assert!(a.x.abs() < 1e-9 && a.y.abs() < 1e-9);
        // One milli-degree of latitude is ~111 m.
        let b = g.project(22.5322, 114.0439);
        assert!((b.y - 111.19).abs() < 1.0, "got {}", b.y);
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            times in proptest::collection::vec(0u32..10_000, 2..30),
            lat0 in 22.54f64..22.59,
            lon0 in 114.045f64..114.067,
        ) {
            let g = geo();
            let mut ts: Vec<f64> = times.iter().map(|t| *t as f64).collect();
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            prop_assume!(ts.len() >= 2);
            let samples: Vec<TraceSample> = ts
                .iter()
                .enumerate()
                .map(|(i, t)| TraceSample {
                    t_s: *t,
                    position: g.project(lat0 + 1e-5 * i as f64, lon0 + 1e-5 * i as f64),
                })
                .collect();
            let trace = MobilityTrace { vehicle_id: VehicleId(3), samples };
            let mut buf = Vec::new();
            write_traces(std::slice::from_ref(&trace), &g, &mut buf).unwrap();
            let back = load_traces(buf.as_slice(), &g).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(back[0].samples.len(), trace.samples.len());
            for (a, b) in back[0].samples.iter().zip(&trace.samples) {
                prop_assert_eq!(a.t_s, b.t_s);
                prop_assert!((a.position.x - b.position.x).abs() < 1e-6);
                prop_assert!((a.position.y - b.position.y).abs() < 1e-6);
            }
        }
    }
}
