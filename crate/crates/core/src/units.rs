//! Unit-suffixed quantity parsing.
//!
//! Config files carry explicit unit suffixes ("16 MB", "800 Mbps", "20 GHz",
//! "0.5 Gcycles/MB"). Internally everything is SI base units: bits,
//! bits/second, hertz, cycles, cycles/second, cycles/bit, watts. Byte-derived
//! units are decimal (1 MB = 8e6 bits), matching how link budgets are quoted.

use crate::{Error, Result};

fn split(s: &str) -> Result<(f64, &str)> {
    let s = s.trim();
    let idx = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
        .unwrap_or(s.len());
    // Guard against exponents swallowing the unit ("1e-13 W" splits at the space).
    let (num, unit) = s.split_at(idx);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("bad numeric value in quantity {s:?}")))?;
    Ok((value, unit.trim()))
}

fn scaled(s: &str, table: &[(&str, f64)], what: &str) -> Result<f64> {
    let (value, unit) = split(s)?;
    for (name, factor) in table {
        if unit.eq_ignore_ascii_case(name) {
            return Ok(value * factor);
        }
    }
    Err(Error::config(format!(
        "unknown {what} unit {unit:?} in {s:?} (expected one of {:?})",
        table.iter().map(|(n, _)| *n).collect::<Vec<_>>()
    )))
}

/// Data size in bits. Accepts "bit"/"bits" and decimal bytes "B"/"KB"/"MB"/"GB".
pub fn size_bits(s: &str) -> Result<f64> {
    scaled(
        s,
        &[
            ("bit", 1.0),
            ("bits", 1.0),
            ("B", 8.0),
            ("KB", 8e3),
            ("MB", 8e6),
            ("GB", 8e9),
        ],
        "size",
    )
}

/// Link rate in bits/second. Accepts "bps" multiples and byte rates "MB/s" etc.
pub fn rate_bps(s: &str) -> Result<f64> {
    scaled(
        s,
        &[
            ("bps", 1.0),
            ("Kbps", 1e3),
            ("Mbps", 1e6),
            ("Gbps", 1e9),
            ("B/s", 8.0),
            ("KB/s", 8e3),
            ("MB/s", 8e6),
            ("GB/s", 8e9),
        ],
        "rate",
    )
}

/// Spectrum bandwidth or carrier frequency in hertz.
pub fn freq_hz(s: &str) -> Result<f64> {
    scaled(
        s,
        &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
        "frequency",
    )
}

/// Compute capacity in cycles/second. Quoted in Hz multiples ("20 GHz").
pub fn cycle_rate(s: &str) -> Result<f64> {
    freq_hz(s)
}

/// Workload in cycles.
pub fn cycles(s: &str) -> Result<f64> {
    scaled(
        s,
        &[
            ("cycles", 1.0),
            ("Kcycles", 1e3),
            ("Mcycles", 1e6),
            ("Gcycles", 1e9),
        ],
        "workload",
    )
}

/// Per-data compute demand in cycles/bit. "0.5 Gcycles/MB" = 62.5 cycles/bit.
pub fn cycles_per_bit(s: &str) -> Result<f64> {
    scaled(
        s,
        &[
            ("cycles/bit", 1.0),
            ("cycles/B", 1.0 / 8.0),
            ("Kcycles/KB", 1e3 / 8e3),
            ("Mcycles/MB", 1e6 / 8e6),
            ("Gcycles/MB", 1e9 / 8e6),
            ("Gcycles/GB", 1e9 / 8e9),
        ],
        "compute demand",
    )
}

/// Transmit or noise power in watts.
pub fn power_w(s: &str) -> Result<f64> {
    scaled(s, &[("W", 1.0), ("mW", 1e-3), ("uW", 1e-6)], "power")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(size_bits("16 MB").unwrap(), 16.0 * 8e6);
        assert_eq!(size_bits("128 bits").unwrap(), 128.0);
        assert_eq!(size_bits("1 GB").unwrap(), 8e9);
    }

    #[test]
    fn rates_and_freqs() {
        assert_eq!(rate_bps("800 Mbps").unwrap(), 8e8);
        assert_eq!(rate_bps("80 MB/s").unwrap(), 6.4e8);
        assert_eq!(freq_hz("2 GHz").unwrap(), 2e9);
        assert_eq!(freq_hz("400 MHz").unwrap(), 4e8);
    }

    #[test]
    fn compute_demand() {
        // 0.5 Gcycles per decimal megabyte is 62.5 cycles per bit.
        assert_eq!(cycles_per_bit("0.5 Gcycles/MB").unwrap(), 62.5);
        assert_eq!(cycles("300 Gcycles").unwrap(), 3e11);
    }

    #[test]
    fn power_and_exponents() {
        assert_eq!(power_w("0.5 W").unwrap(), 0.5);
        assert_eq!(power_w("1e-13 W").unwrap(), 1e-13);
        assert_eq!(power_w("3 mW").unwrap(), 3e-3);
    }

    #[test]
    fn rejects_unknown_unit() {
        assert!(size_bits("5 furlongs").is_err());
        assert!(freq_hz("abc").is_err());
    }
}
