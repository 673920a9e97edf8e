//! Event catalogs: loading from delimited text, validation and selection.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::error::{Error, Result};

/// A single located seismic event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub id: u64,
    /// Degrees east, negative west.
    pub lon: f64,
    /// Degrees north, negative south.
    pub lat: f64,
    /// Kilometres; unused by the planar method.
    pub depth: Option<f64>,
    pub magnitude: f64,
    pub time: DateTime<Utc>,
}

impl Event {
    fn validate(&self) -> std::result::Result<(), String> {
        if !self.lon.is_finite() || !(-180.0..=180.0).contains(&self.lon) {
            return Err(format!("lon={} outside [-180, 180]", self.lon));
        }
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(format!("lat={} outside [-90, 90]", self.lat));
        }
        if !self.magnitude.is_finite() {
            return Err(format!("magnitude={} is not finite", self.magnitude));
        }
        if let Some(d) = self.depth {
            if !d.is_finite() {
                return Err(format!("depth={d} is not finite"));
            }
        }
        Ok(())
    }
}

/// An ordered collection of events with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventCatalog {
    pub events: Vec<Event>,
    pub provenance: String,
}

impl EventCatalog {
    pub fn new(events: Vec<Event>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(events.len());
        for e in &events {
            e.validate()
                .map_err(|m| Error::InvalidInput(format!("event {}: {m}", e.id)))?;
            if !seen.insert(e.id) {
                return Err(Error::InvalidInput(format!("duplicate event id {}", e.id)));
            }
        }
        Ok(Self {
            events,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event locations as `(lon, lat)` pairs in catalog order.
    pub fn locations(&self) -> Vec<[f64; 2]> {
        self.events.iter().map(|e| [e.lon, e.lat]).collect()
    }

    /// Writes the catalog in the canonical `id,lon,lat,depth,mag,time` layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["id", "lon", "lat", "depth", "mag", "time"])
            .map_err(wrap)?;
        for e in &self.events {
            w.write_record([
                e.id.to_string(),
                e.lon.to_string(),
                e.lat.to_string(),
                e.depth.map(|d| d.to_string()).unwrap_or_default(),
                e.magnitude.to_string(),
                format_time(&e.time),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(())
    }
}

pub fn format_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Parses an ISO-8601 timestamp. Strings without an offset are read as UTC;
/// a bare date means midnight UTC.
pub fn parse_time(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    Err(format!("unparseable time {s:?}"))
}

/// Maps catalog fields onto input columns, by header name or 0-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnMap {
    pub lon: String,
    pub lat: String,
    pub mag: String,
    pub time: String,
    pub id: Option<String>,
    pub depth: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            lon: "lon".into(),
            lat: "lat".into(),
            mag: "mag".into(),
            time: "time".into(),
            id: Some("id".into()),
            depth: Some("depth".into()),
        }
    }
}

impl FromStr for ColumnMap {
    type Err = Error;

    /// Parses `lon=<col>,lat=<col>,mag=<col>,time=<col>[,id=<col>][,depth=<col>]`.
    /// Unlisted optional fields keep their default column names.
    fn from_str(s: &str) -> Result<Self> {
        let mut map = ColumnMap::default();
        let mut required = [false; 4];
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, col) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("bad column mapping {part:?}")))?;
            let col = col.trim().to_string();
            match key.trim() {
                "lon" => (map.lon, required[0]) = (col, true),
                "lat" => (map.lat, required[1]) = (col, true),
                "mag" => (map.mag, required[2]) = (col, true),
                "time" => (map.time, required[3]) = (col, true),
                "id" => map.id = Some(col),
                "depth" => map.depth = Some(col),
                other => {
                    return Err(Error::InvalidInput(format!("unknown mapping key {other:?}")))
                }
            }
        }
        if required.iter().any(|r| !r) {
            return Err(Error::InvalidInput(
                "column mapping must name lon, lat, mag and time".into(),
            ));
        }
        Ok(map)
    }
}

/// What to do with a row that fails to parse or validate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RowPolicy {
    #[default]
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    /// 1-based line number in the input, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub catalog: EventCatalog,
    pub rejected: Vec<RejectedRow>,
}

fn resolve_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    if let Some(i) = headers.iter().position(|h| h.trim() == name) {
        return Ok(i);
    }
    name.parse::<usize>()
        .ok()
        .filter(|&i| i < headers.len())
        .ok_or_else(|| Error::InvalidInput(format!("no column named {name:?}")))
}

fn optional_column(headers: &csv::StringRecord, name: &Option<String>) -> Option<usize> {
    name.as_deref().and_then(|n| resolve_column(headers, n).ok())
}

/// Loads a delimited catalog file with a header row.
pub fn load_catalog(path: &Path, map: &ColumnMap, policy: RowPolicy) -> Result<LoadReport> {
    let mut file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut text = String::new();
    file.read_to_string(&mut text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut report = read_catalog(text.as_bytes(), map, policy)?;
    report.catalog.provenance = path.display().to_string();
    Ok(report)
}

/// Reads a catalog from any reader; see [`load_catalog`].
pub fn read_catalog<R: Read>(reader: R, map: &ColumnMap, policy: RowPolicy) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let lon = resolve_column(&headers, &map.lon)?;
    let lat = resolve_column(&headers, &map.lat)?;
    let mag = resolve_column(&headers, &map.mag)?;
    let time = resolve_column(&headers, &map.time)?;
    let id_col = optional_column(&headers, &map.id);
    let depth_col = optional_column(&headers, &map.depth);

    let mut events = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in rdr.records().enumerate() {
        let line = record
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map(|p| p.line() as usize)
            .unwrap_or(row + 2);
        let parsed = record
            .map_err(|e| e.to_string())
            .and_then(|r| parse_row(&r, row, [lon, lat, mag, time], id_col, depth_col))
            .and_then(|e| {
                if seen.insert(e.id) {
                    Ok(e)
                } else {
                    Err(format!("duplicate event id {}", e.id))
                }
            });
        match parsed {
            Ok(e) => events.push(e),
            Err(reason) => match policy {
                RowPolicy::Fail => return Err(Error::Parse { line, message: reason }),
                RowPolicy::Skip => {
                    log::warn!("skipping line {line}: {reason}");
                    rejected.push(RejectedRow { line, reason });
                }
            },
        }
    }
    Ok(LoadReport {
        catalog: EventCatalog {
            events,
            provenance: String::new(),
        },
        rejected,
    })
}

fn parse_row(
    r: &csv::StringRecord,
    row: usize,
    [lon, lat, mag, time]: [usize; 4],
    id_col: Option<usize>,
    depth_col: Option<usize>,
) -> std::result::Result<Event, String> {
    let field = |i: usize, name: &str| -> std::result::Result<&str, String> {
        match r.get(i) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(format!("missing {name}")),
        }
    };
    let number = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = field(i, name)?;
        raw.parse::<f64>()
            .map_err(|_| format!("{name}={raw:?} is not a number"))
    };
    let id = match id_col {
        Some(i) => {
            let raw = field(i, "id")?;
            raw.parse::<u64>()
                .map_err(|_| format!("id={raw:?} is not a non-negative integer"))?
        }
        None => row as u64 + 1,
    };
    let depth = match depth_col.and_then(|i| r.get(i)).filter(|v| !v.is_empty()) {
        Some(raw) => Some(
            raw.parse::<f64>()
                .map_err(|_| format!("depth={raw:?} is not a number"))?,
        ),
        None => None,
    };
    let event = Event {
        id,
        lon: number(lon, "lon")?,
        lat: number(lat, "lat")?,
        depth,
        magnitude: number(mag, "mag")?,
        time: parse_time(field(time, "time")?)?,
    };
    event.validate()?;
    Ok(event)
}

/// Geographic, magnitude and time bounds, all inclusive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionWindow {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub mag_min: f64,
    pub t_start: Option<DateTime<Utc>>,
    pub t_end: Option<DateTime<Utc>>,
}

impl Default for SelectionWindow {
    fn default() -> Self {
        Self {
            lon_min: -180.0,
            lon_max: 180.0,
            lat_min: -90.0,
            lat_max: 90.0,
            mag_min: f64::NEG_INFINITY,
            t_start: None,
            t_end: None,
        }
    }
}

impl SelectionWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.lon_min < self.lon_max) {
            return Err(Error::InvalidInput(format!(
                "lon_min {} must be below lon_max {}",
                self.lon_min, self.lon_max
            )));
        }
        if !(self.lat_min < self.lat_max) {
            return Err(Error::InvalidInput(format!(
                "lat_min {} must be below lat_max {}",
                self.lat_min, self.lat_max
            )));
        }
        if self.mag_min.is_nan() {
            return Err(Error::InvalidInput("mag_min is NaN".into()));
        }
        if let (Some(a), Some(b)) = (self.t_start, self.t_end) {
            if a >= b {
                return Err(Error::InvalidInput(format!(
                    "start {} must precede end {}",
                    format_time(&a),
                    format_time(&b)
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, e: &Event) -> bool {
        (self.lon_min..=self.lon_max).contains(&e.lon)
            && (self.lat_min..=self.lat_max).contains(&e.lat)
            && e.magnitude >= self.mag_min
            && self.t_start.is_none_or(|t| e.time >= t)
            && self.t_end.is_none_or(|t| e.time <= t)
    }
}

/// Keeps the events inside `window`, preserving order and ids.
pub fn filter_catalog(catalog: &EventCatalog, window: &SelectionWindow) -> Result<EventCatalog> {
    window.validate()?;
    Ok(filter_by(catalog, |e| window.contains(e)))
}

/// Keeps the events satisfying an arbitrary predicate.
pub fn filter_by(catalog: &EventCatalog, keep: impl Fn(&Event) -> bool) -> EventCatalog {
    EventCatalog {
        events: catalog.events.iter().filter(|e| keep(e)).cloned().collect(),
        provenance: catalog.provenance.clone(),
    }
}
