//! Carbon-intensity traces: CSV ingestion, zero-order-hold resampling onto the
//! slot grid, and seeded synthetic diurnal profiles for three stand-in regions.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw (timestamp, intensity) samples as read from a provider export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCiSeries {
    /// Seconds since the Unix epoch, strictly increasing.
    pub timestamps: Vec<i64>,
    /// gCO₂eq/kWh, non-negative.
    pub values: Vec<f64>,
}

impl RawCiSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::domain(format!("{} timestamps for {} values", timestamps.len(), values.len())));
        }
        if timestamps.is_empty() {
            return Err(Error::domain("empty series"));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!("timestamps not strictly increasing at sample {}", i + 1)));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("intensity must be finite and non-negative, got {v}")));
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Median spacing between samples (seconds); 0 for a single sample.
    pub fn median_step(&self) -> i64 {
        let mut steps: Vec<i64> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        if steps.is_empty() {
            return 0;
        }
        steps.sort_unstable();
        steps[steps.len() / 2]
    }
}

/// Per-slot carbon intensity ξ(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonTrace {
    pub xi: Vec<f64>,
    pub slot_duration: f64,
    pub region_label: String,
}

impl CarbonTrace {
    pub fn new(xi: Vec<f64>, slot_duration: f64, region_label: impl Into<String>) -> Result<Self> {
        if let Some(v) = xi.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("intensity must be finite and non-negative, got {v}")));
        }
        if !(slot_duration > 0.0) {
            return Err(Error::domain(format!("slot duration must be positive, got {slot_duration}")));
        }
        Ok(Self { xi, slot_duration, region_label: region_label.into() })
    }

    pub fn constant(xi: f64, horizon: usize, slot_duration: f64) -> Self {
        Self { xi: vec![xi; horizon], slot_duration, region_label: format!("constant_{xi}") }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.xi.is_empty() {
            return 0.0;
        }
        self.xi.iter().sum::<f64>() / self.xi.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.xi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.xi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes `timestamp,carbon_intensity` rows readable by [`load_ci_csv`].
    pub fn write_csv<W: Write>(&self, w: W, start_epoch: i64) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["timestamp", "carbon_intensity"])?;
        for (k, x) in self.xi.iter().enumerate() {
            let ts = start_epoch + (k as f64 * self.slot_duration).round() as i64;
            let stamp = DateTime::<Utc>::from_timestamp(ts, 0)
                .ok_or_else(|| Error::domain(format!("timestamp {ts} out of range")))?
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
            out.write_record([stamp, format!("{x}")])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, start_epoch: i64) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, start_epoch)
    }
}

/// Parses RFC 3339, naive ISO-8601 (taken as UTC) or integer epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    s.parse::<i64>().ok()
}

/// Reads `(timestamp, intensity)` rows. A first row that does not parse is
/// treated as a header; blank lines are skipped.
pub fn read_ci_csv<R: Read>(r: R) -> Result<RawCiSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r);
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line, message };
        if rec.len() < 2 {
            return Err(parse_err(format!("expected 2 fields, found {}", rec.len())));
        }
        let ts = parse_timestamp(&rec[0]);
        let val = rec[1].parse::<f64>();
        if first && ts.is_none() && val.is_err() {
            first = false;
            continue;
        }
        first = false;
        let ts = ts.ok_or_else(|| parse_err(format!("bad timestamp {:?}", &rec[0])))?;
        let val = val.map_err(|_| parse_err(format!("bad intensity {:?}", &rec[1])))?;
        if !(val >= 0.0) || !val.is_finite() {
            return Err(parse_err(format!("intensity must be non-negative, got {val}")));
        }
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(parse_err(format!("timestamp {ts} does not follow {prev}")));
            }
        }
        timestamps.push(ts);
        values.push(val);
    }
    if values.is_empty() {
        return Err(Error::Parse { line: 0, message: "no data rows".into() });
    }
    RawCiSeries::new(timestamps, values)
}

pub fn load_ci_csv(path: &Path) -> Result<RawCiSeries> {
    read_ci_csv(std::fs::File::open(path)?)
}

/// Zero-order hold: slot k takes the latest sample at or before
/// `start + k·slot_duration`. Gaps wider than twice the median sample
/// spacing, or a series that ends before the horizon, are rejected.
pub fn resample_to_slots(series: &RawCiSeries, slot_duration: f64, horizon: usize, start: i64) -> Result<CarbonTrace> {
    if !(slot_duration > 0.0) {
        return Err(Error::domain(format!("slot duration must be positive, got {slot_duration}")));
    }
    let ts = &series.timestamps;
    let end = start as f64 + horizon as f64 * slot_duration;
    let step = series.median_step().max(1);
    if ts[0] > start {
        return Err(Error::CoverageGap { from: start, to: ts[0] });
    }
    // A sample is taken to cover one median step past its timestamp.
    let last_cover = ts[ts.len() - 1] + if ts.len() > 1 { step } else { slot_duration.ceil() as i64 };
    if (last_cover as f64) < end {
        return Err(Error::CoverageGap { from: last_cover, to: end.ceil() as i64 });
    }
    for w in ts.windows(2) {
        let overlaps = (w[1] as f64) > start as f64 && (w[0] as f64) < end;
        if overlaps && w[1] - w[0] > 2 * step {
            return Err(Error::CoverageGap { from: w[0] + step, to: w[1] });
        }
    }
    let mut xi = Vec::with_capacity(horizon);
    let mut j = 0usize;
    for k in 0..horizon {
        let t = start as f64 + k as f64 * slot_duration;
        while j + 1 < ts.len() && (ts[j + 1] as f64) <= t {
            j += 1;
        }
        xi.push(series.values[j]);
    }
    CarbonTrace::new(xi, slot_duration, "csv")
}

/// Stand-in regional profiles ordered by mean intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Low,
    Medium,
    High,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Low, Region::Medium, Region::High];

    pub fn label(self) -> &'static str {
        match self {
            Region::Low => "low",
            Region::Medium => "medium",
            Region::High => "high",
        }
    }

    pub fn profile(self) -> DiurnalProfile {
        let base = match self {
            Region::Low => 30.0,
            Region::Medium => 90.0,
            Region::High => 210.0,
        };
        DiurnalProfile { base, amplitude: 2.0 * base, phase: -PI, noise_sd: 0.01 * base }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Region::Low),
            "medium" | "med" => Ok(Region::Medium),
            "high" => Ok(Region::High),
            other => Err(Error::domain(format!("unknown region {other:?} (expected low, medium or high)"))),
        }
    }
}

/// ξ(t) = base + amplitude·(1 + sin(2π·t·τ/86400 + phase))/2 + N(0, noise_sd²),
/// clamped at zero. `amplitude = 2·base` gives a 3:1 daily swing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiurnalProfile {
    pub base: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub noise_sd: f64,
}

impl DiurnalProfile {
    pub fn generate(&self, horizon: usize, slot_duration: f64, seed: u64, label: &str) -> Result<CarbonTrace> {
        if !(self.base >= 0.0) || !(self.amplitude >= 0.0) || !(self.noise_sd >= 0.0) {
            return Err(Error::domain("profile parameters must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise_sd).map_err(|e| Error::domain(e.to_string()))?;
        let xi = (0..horizon)
            .map(|t| {
                let day = t as f64 * slot_duration / 86_400.0;
                let v = self.base + self.amplitude * (1.0 + (2.0 * PI * day + self.phase).sin()) / 2.0;
                let eps = if self.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                (v + eps).max(0.0)
            })
            .collect();
        CarbonTrace::new(xi, slot_duration, label)
    }
}

pub fn synthetic_trace(region: Region, horizon: usize, slot_duration: f64, seed: u64) -> Result<CarbonTrace> {
    region.profile().generate(horizon, slot_duration, seed, region.label())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly(n: usize, f: impl Fn(usize) -> f64) -> String {
        let mut s = String::from("datetime,carbon_intensity\n");
        for h in 0..n {
            s += &format!("2024-03-01T{:02}:00:00Z,{}\n", h % 24, f(h));
        }
        s
    }

    #[test]
    fn loads_hourly_rows() {
        let raw = read_ci_csv(hourly(24, |h| 100.0 + h as f64).as_bytes()).unwrap();
        assert_eq!(raw.len(), 24);
        assert_eq!(raw.median_step(), 3600);
    }

    #[test]
    fn header_is_optional_and_blank_lines_skipped() {
        let raw = read_ci_csv("2024-03-01 00:00:00,5\n\n2024-03-01 01:00:00,6\n".as_bytes()).unwrap();
        assert_eq!(raw.values, vec![5.0, 6.0]);
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let err = read_ci_csv("ts,v\n2024-03-01T00:00:00Z,5\n2024-03-01T01:00:00Z,-1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_ci_csv("2024-03-01T01:00:00Z,5\n2024-03-01T00:00:00Z,6\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = read_ci_csv("2024-03-01T01:00:00Z,5\nnot a time,6\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(read_ci_csv("".as_bytes()).is_err());
        assert!(read_ci_csv("ts,v\n".as_bytes()).is_err());
    }

    #[test]
    fn hold_repeats_hourly_values() {
        let raw = read_ci_csv(hourly(24, |h| h as f64).as_bytes()).unwrap();
        let tr = resample_to_slots(&raw, 300.0, 288, raw.timestamps[0]).unwrap();
        assert_eq!(tr.len(), 288);
        for (k, x) in tr.xi.iter().enumerate() {
            assert_eq!(*x, (k / 12) as f64);
        }
        assert!(tr.min() >= 0.0 && tr.max() <= 23.0);
    }

    #[test]
    fn constant_series_gives_constant_trace() {
        let raw = read_ci_csv(hourly(24, |_| 42.0).as_bytes()).unwrap();
        let tr = resample_to_slots(&raw, 300.0, 100, raw.timestamps[0]).unwrap();
        assert!(tr.xi.iter().all(|&x| x == 42.0));
    }

    #[test]
    fn short_series_and_gaps_rejected() {
        let raw = read_ci_csv(hourly(12, |_| 1.0).as_bytes()).unwrap();
        assert!(matches!(resample_to_slots(&raw, 300.0, 288, raw.timestamps[0]), Err(Error::CoverageGap { .. })));
        let t0 = raw.timestamps[0];
        let gappy = RawCiSeries::new(vec![t0, t0 + 3600, t0 + 7200, t0 + 6 * 3600, t0 + 7 * 3600], vec![1.0; 5]).unwrap();
        assert!(matches!(resample_to_slots(&gappy, 300.0, 60, t0), Err(Error::CoverageGap { .. })));
        assert!(matches!(resample_to_slots(&raw, 300.0, 10, t0 - 1), Err(Error::CoverageGap { .. })));
    }

    #[test]
    fn synthetic_swing_is_three_to_one() {
        for r in Region::ALL {
            let tr = synthetic_trace(r, 288, 300.0, 7).unwrap();
            let ratio = tr.max() / tr.min();
            assert!((2.7..=3.3).contains(&ratio), "{r}: {ratio}");
            assert!(tr.xi.iter().all(|&x| x >= 0.0));
        }
        let means: Vec<f64> = Region::ALL.iter().map(|&r| synthetic_trace(r, 288, 300.0, 7).unwrap().mean()).collect();
        assert!(means[0] < means[1] && means[1] < means[2]);
    }

    #[test]
    fn synthetic_is_periodic_and_deterministic() {
        let a = synthetic_trace(Region::Medium, 576, 300.0, 1).unwrap();
        assert_eq!(a, synthetic_trace(Region::Medium, 576, 300.0, 1).unwrap());
        let sd = Region::Medium.profile().noise_sd;
        for k in 0..288 {
            assert!((a.xi[k] - a.xi[k + 288]).abs() < 10.0 * sd);
        }
    }

    #[test]
    fn flat_profile_is_constant() {
        let p = DiurnalProfile { base: 55.0, amplitude: 0.0, phase: 0.0, noise_sd: 0.0 };
        let tr = p.generate(50, 300.0, 3, "flat").unwrap();
        assert!(tr.xi.iter().all(|&x| x == 55.0));
    }

    #[test]
    fn export_round_trips() {
        let tr = synthetic_trace(Region::Low, 48, 300.0, 2).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, 1_700_000_000).unwrap();
        let raw = read_ci_csv(buf.as_slice()).unwrap();
        let back = resample_to_slots(&raw, 300.0, 48, 1_700_000_000).unwrap();
        assert_eq!(back.xi, tr.xi);
    }
}
