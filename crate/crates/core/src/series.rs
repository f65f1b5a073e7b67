//! Hourly consumption series, scaling, and sliding windows.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

impl TimeSeries {
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        values: Vec<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), got: timestamps.len() });
        }
        if let Some(l) = &labels {
            if l.len() != values.len() {
                return Err(Error::DimensionMismatch { expected: values.len(), got: l.len() });
            }
            if let Some(bad) = l.iter().position(|&x| x > 1) {
                return Err(Error::InvalidInput(format!("label at {bad} is not 0 or 1")));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { timestamps, values, labels })
    }

    /// Builds a gapless hourly series starting at `start`.
    pub fn hourly(start: NaiveDateTime, values: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        let timestamps = (0..values.len())
            .map(|i| start + chrono::Duration::hours(i as i64))
            .collect();
        Self::new(timestamps, values, labels)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Per-point labels, all zero when the series is unlabeled.
    pub fn labels_or_zero(&self) -> Vec<u8> {
        self.labels.clone().unwrap_or_else(|| vec![0; self.len()])
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().filter(|&&x| x == 1).count())
    }

    /// Splits at `index` into `[0, index)` and `[index, len)`.
    pub fn split_at(&self, index: usize) -> (TimeSeries, TimeSeries) {
        let index = index.min(self.len());
        let head = TimeSeries {
            timestamps: self.timestamps[..index].to_vec(),
            values: self.values[..index].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..index].to_vec()),
        };
        let tail = TimeSeries {
            timestamps: self.timestamps[index..].to_vec(),
            values: self.values[index..].to_vec(),
            labels: self.labels.as_ref().map(|l| l[index..].to_vec()),
        };
        (head, tail)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.labels.is_some() {
            w.write_record(["timestamp", "value", "label"])?;
        } else {
            w.write_record(["timestamp", "value"])?;
        }
        for i in 0..self.len() {
            let ts = self.timestamps[i].format(TIMESTAMP_FORMAT).to_string();
            let v = format_value(self.values[i]);
            match &self.labels {
                Some(l) => w.write_record([ts, v, l[i].to_string()])?,
                None => w.write_record([ts, v])?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }
}

pub(crate) fn format_value(v: f64) -> String {
    // Shortest round-trip representation.
    format!("{v}")
}

/// Column names expected in an input CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp: String,
    pub value: String,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { timestamp: "timestamp".into(), value: "value".into(), label: "label".into() }
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn is_missing(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na")
}

/// Reads `timestamp,value[,label]` rows. Rows with a missing value are dropped.
pub fn read_csv<R: Read>(input: R, schema: &CsvSchema) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let ts_col = col(&schema.timestamp)
        .ok_or_else(|| Error::Parse { row: 1, message: format!("missing column `{}`", schema.timestamp) })?;
    let val_col = col(&schema.value)
        .ok_or_else(|| Error::Parse { row: 1, message: format!("missing column `{}`", schema.value) })?;
    let label_col = col(&schema.label);

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let raw_value = field(val_col);
        if is_missing(raw_value) {
            continue;
        }
        let ts = parse_timestamp(field(ts_col)).ok_or_else(|| Error::Parse {
            row,
            message: format!("malformed timestamp `{}`", field(ts_col)),
        })?;
        let value: f64 = raw_value.trim().parse().map_err(|_| Error::Parse {
            row,
            message: format!("non-numeric value `{raw_value}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse { row, message: format!("non-finite value `{raw_value}`") });
        }
        if let (Some(c), Some(l)) = (label_col, labels.as_mut()) {
            let label = match field(c).trim() {
                "0" | "" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse { row, message: format!("label `{other}` is not 0 or 1") })
                }
            };
            l.push(label);
        }
        timestamps.push(ts);
        values.push(value);
    }
    TimeSeries::new(timestamps, values, labels).map_err(|e| match e {
        Error::InvalidInput(m) => Error::Parse { row: 0, message: m },
        other => other,
    })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeries> {
    read_csv(File::open(path)?, schema)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    MinMax,
    Log,
}

impl std::fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MinMax => "minmax",
            Self::Log => "log",
        })
    }
}

impl std::str::FromStr for ScalerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Self::MinMax),
            "log" => Ok(Self::Log),
            _ => Err(Error::Config(format!("unknown scaler `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalerSpec {
    MinMax { min: f64, max: f64 },
    /// `log1p`, stateless.
    Log,
}

impl ScalerSpec {
    /// Fits on the normal partition; the result is reused unchanged on anomalous data.
    pub fn fit(ts: &TimeSeries, kind: ScalerKind) -> Result<Self> {
        if ts.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        match kind {
            ScalerKind::MinMax => {
                let min = ts.values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = ts.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max <= min {
                    return Err(Error::Degenerate(format!("constant series ({min}) cannot be min-max scaled")));
                }
                Ok(Self::MinMax { min, max })
            }
            ScalerKind::Log => {
                if let Some(i) = ts.values.iter().position(|&v| v <= -1.0) {
                    return Err(Error::InvalidInput(format!("log scaling needs values > -1 (index {i})")));
                }
                Ok(Self::Log)
            }
        }
    }

    /// No clamping: out-of-range values map outside `[0, 1]`.
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Self::MinMax { min, max } => (x - min) / (max - min),
            Self::Log => x.ln_1p(),
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        match *self {
            Self::MinMax { min, max } => y * (max - min) + min,
            Self::Log => y.exp_m1(),
        }
    }

    pub fn transform(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        if matches!(self, Self::Log) {
            if let Some(i) = ts.values.iter().position(|&v| v <= -1.0) {
                return Err(Error::InvalidInput(format!("log scaling needs values > -1 (index {i})")));
            }
        }
        Ok(TimeSeries {
            timestamps: ts.timestamps.clone(),
            values: ts.values.iter().map(|&v| self.apply(v)).collect(),
            labels: ts.labels.clone(),
        })
    }
}

/// How a window's ground-truth label is derived from its points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelRule {
    #[default]
    Any,
    Last,
    Majority,
}

impl std::fmt::Display for LabelRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Any => "any",
            Self::Last => "last",
            Self::Majority => "majority",
        })
    }
}

impl std::str::FromStr for LabelRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "any" => Ok(Self::Any),
            "last" => Ok(Self::Last),
            "majority" => Ok(Self::Majority),
            _ => Err(Error::Config(format!("unknown label rule `{s}`"))),
        }
    }
}

impl LabelRule {
    fn apply(self, labels: &[u8]) -> u8 {
        match self {
            Self::Any => labels.iter().any(|&l| l == 1) as u8,
            Self::Last => labels.last().copied().unwrap_or(0),
            Self::Majority => (2 * labels.iter().filter(|&&l| l == 1).count() > labels.len()) as u8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub width: usize,
    pub step: usize,
    pub label_rule: LabelRule,
    /// Windows spanning a timestamp jump larger than this many hours are skipped.
    pub max_gap_hours: Option<i64>,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self { width: 6, step: 1, label_rule: LabelRule::Any, max_gap_hours: Some(6) }
    }
}

/// Scaler and windowing fitted on the normal partition, reused on test data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub scaler: ScalerSpec,
    pub window: WindowParams,
}

impl Preprocessing {
    pub fn windows(&self, ts: &TimeSeries) -> Result<WindowSet> {
        make_windows(&self.scaler.transform(ts)?, &self.window)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(serde_json::to_writer_pretty(std::io::BufWriter::new(File::create(path)?), self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    pub width: usize,
    pub windows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub origin: Vec<usize>,
}

/// Number of windows for a gapless series of length `n`.
pub fn window_count(n: usize, width: usize, step: usize) -> usize {
    if width == 0 || step == 0 || n < width {
        0
    } else {
        (n - width) / step + 1
    }
}

pub fn make_windows(ts: &TimeSeries, params: &WindowParams) -> Result<WindowSet> {
    let (w, s) = (params.width, params.step);
    if w == 0 || s == 0 {
        return Err(Error::InvalidInput("window width and step must be positive".into()));
    }
    if ts.len() < w {
        return Err(Error::InsufficientData { needed: w, got: ts.len() });
    }
    let point_labels = ts.labels_or_zero();
    let mut set = WindowSet { width: w, windows: Vec::new(), labels: Vec::new(), origin: Vec::new() };
    let mut start = 0;
    while start + w <= ts.len() {
        let end = start + w;
        let straddles = params.max_gap_hours.is_some_and(|max| {
            ts.timestamps[start..end]
                .windows(2)
                .any(|p| (p[1] - p[0]).num_hours() > max)
        });
        if !straddles {
            set.windows.push(ts.values[start..end].to_vec());
            set.labels.push(params.label_rule.apply(&point_labels[start..end]));
            set.origin.push(start);
        }
        start += s;
    }
    if set.windows.is_empty() {
        return Err(Error::InsufficientData { needed: w, got: 0 });
    }
    Ok(set)
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Keeps every `stride`-th window; used to cap training-set size.
    pub fn subsample(&self, stride: usize) -> WindowSet {
        let stride = stride.max(1);
        let idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        WindowSet {
            width: self.width,
            windows: idx.iter().map(|&i| self.windows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            origin: idx.iter().map(|&i| self.origin[i]).collect(),
        }
    }

    /// CSV with columns `origin_index,w0..w{W-1},label`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["origin_index".to_string()];
        header.extend((0..self.width).map(|i| format!("w{i}")));
        header.push("label".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.origin[i].to_string()];
            rec.extend(self.windows[i].iter().map(|&v| format_value(v)));
            rec.push(self.labels[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "origin_index" || &headers[headers.len() - 1] != "label" {
            return Err(Error::Parse { row: 1, message: "expected origin_index,w0..,label header".into() });
        }
        let width = headers.len() - 2;
        let mut set = WindowSet { width, windows: Vec::new(), labels: Vec::new(), origin: Vec::new() };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let num = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Parse { row, message: format!("bad number `{s}`") })
            };
            set.origin.push(num(&rec[0])? as usize);
            set.windows.push((1..=width).map(|c| num(&rec[c])).collect::<Result<_>>()?);
            set.labels.push(num(&rec[width + 1])? as u8);
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn start() -> NaiveDateTime {
        parse_timestamp("2019-01-01T00:00:00").unwrap()
    }

    fn series(values: Vec<f64>, labels: Option<Vec<u8>>) -> TimeSeries {
        TimeSeries::hourly(start(), values, labels).unwrap()
    }

    #[test]
    fn parses_well_formed_rows() {
        let csv = "timestamp,value\n2019-01-01T00:00:00,1.5\n2019-01-01T01:00:00,2\n2019-01-01T02:00:00,3\n";
        let ts = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.values, vec![1.5, 2.0, 3.0]);
        assert!(ts.labels.is_none());
    }

    #[test]
    fn drops_rows_with_missing_value() {
        let mut csv = String::from("timestamp,value,label\n");
        for h in 0..10 {
            let v = if h == 4 { String::new() } else { h.to_string() };
            csv.push_str(&format!("2019-01-01 {h:02}:00:00,{v},0\n"));
        }
        let ts = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ts.len(), 9);
        assert_eq!(ts.labels.unwrap().len(), 9);
    }

    #[test]
    fn malformed_timestamp_reports_row() {
        let csv = "timestamp,value\n2019-01-01T00:00:00,1\nyesterday,2\n";
        match read_csv(csv.as_bytes(), &CsvSchema::default()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_value_is_parse_error() {
        let csv = "timestamp,value\n2019-01-01T00:00:00,abc\n";
        assert!(matches!(read_csv(csv.as_bytes(), &CsvSchema::default()), Err(Error::Parse { row: 2, .. })));
    }

    #[test]
    fn minmax_midpoint_and_no_clamping() {
        let spec = ScalerSpec::fit(&series(vec![2.0, 4.0, 6.0], None), ScalerKind::MinMax).unwrap();
        assert_eq!(spec, ScalerSpec::MinMax { min: 2.0, max: 6.0 });
        assert_eq!(spec.apply(4.0), 0.5);
        let wide = ScalerSpec::MinMax { min: 0.0, max: 10.0 };
        assert!((wide.apply(12.0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn log_scaler_is_log1p() {
        let spec = ScalerSpec::fit(&series(vec![0.0], None), ScalerKind::Log).unwrap();
        assert_eq!(spec.apply(0.0), 0.0);
        assert!((spec.apply(std::f64::consts::E - 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate_under_minmax() {
        let r = ScalerSpec::fit(&series(vec![3.0; 5], None), ScalerKind::MinMax);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn window_counts() {
        let p = WindowParams::default();
        assert_eq!(make_windows(&series(vec![0.0; 10], None), &p).unwrap().len(), 5);
        assert_eq!(make_windows(&series(vec![0.0; 6], None), &p).unwrap().len(), 1);
        assert!(matches!(
            make_windows(&series(vec![0.0; 5], None), &p),
            Err(Error::InsufficientData { needed: 6, got: 5 })
        ));
    }

    #[test]
    fn any_rule_marks_every_covering_window() {
        let mut labels = vec![0u8; 10];
        labels[3] = 1;
        let ws = make_windows(&series(vec![0.0; 10], Some(labels.clone())), &WindowParams::default()).unwrap();
        assert_eq!(ws.labels, vec![1, 1, 1, 1, 0]);
        let last = WindowParams { label_rule: LabelRule::Last, ..Default::default() };
        let ws = make_windows(&series(vec![0.0; 10], Some(labels)), &last).unwrap();
        assert_eq!(ws.labels, vec![0, 0, 0, 0, 0]);
    }

    #[test]
    fn gap_guard_skips_straddling_windows() {
        let mut ts: Vec<NaiveDateTime> = (0..12).map(|h| start() + chrono::Duration::hours(h)).collect();
        for t in ts.iter_mut().skip(6) {
            *t += chrono::Duration::hours(10);
        }
        let s = TimeSeries::new(ts, vec![1.0; 12], None).unwrap();
        let ws = make_windows(&s, &WindowParams::default()).unwrap();
        assert_eq!(ws.origin, vec![0, 6]);
        let unguarded = WindowParams { max_gap_hours: None, ..Default::default() };
        assert_eq!(make_windows(&s, &unguarded).unwrap().len(), 7);
    }

    #[test]
    fn window_csv_round_trip() {
        let ws = make_windows(&series((0..8).map(f64::from).collect(), None), &WindowParams::default()).unwrap();
        let mut buf = Vec::new();
        ws.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("origin_index,w0,w1,w2,w3,w4,w5,label\n"));
        assert_eq!(WindowSet::read_csv(buf.as_slice()).unwrap(), ws);
    }

    proptest! {
        #[test]
        fn minmax_invert_is_identity(min in -1e3f64..1e3, span in 1e-3f64..1e3, t in 0.0f64..1.0) {
            let spec = ScalerSpec::MinMax { min, max: min + span };
            let x = min + t * span;
            prop_assert!((spec.invert(spec.apply(x)) - x).abs() <= 1e-12 * (1.0 + x.abs()));
        }

        #[test]
        fn window_count_formula(n in 1usize..200, w in 1usize..20, s in 1usize..7) {
            prop_assume!(n >= w);
            let p = WindowParams { width: w, step: s, ..Default::default() };
            let ws = make_windows(&series(vec![0.0; n], None), &p).unwrap();
            prop_assert_eq!(ws.len(), (n - w) / s + 1);
            prop_assert!(ws.origin.windows(2).all(|o| o[1] - o[0] == s));
            prop_assert!(ws.windows.iter().all(|v| v.len() == w));
        }

        #[test]
        fn isolated_anomaly_covers_exactly_width_windows(n in 30usize..80, pos in 0usize..80) {
            prop_assume!(pos < n);
            let mut labels = vec![0u8; n];
            labels[pos] = 1;
            let ws = make_windows(&series(vec![0.0; n], Some(labels)), &WindowParams::default()).unwrap();
            let covering = ws.origin.iter().filter(|&&o| o <= pos && pos < o + 6).count();
            prop_assert_eq!(ws.anomaly_count(), covering);
            prop_assert_eq!(covering, 6.min(pos + 1).min(n - pos).min(ws.len()));
        }
    }
}
