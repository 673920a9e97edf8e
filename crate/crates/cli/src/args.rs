use std::path::PathBuf;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use npcluster::agreement::ExpectationMode;
use npcluster::catalog::{parse_time, ColumnMap, SelectionWindow};
use npcluster::cluster::{AllocationPolicy, ClusterOptions};

#[derive(Debug, Parser, Serialize)]
#[command(name = "npcluster", version, about = "Nonparametric density clustering of event catalogs")]
pub struct Cli {
    /// Worker thread ceiling (default: available parallelism). Does not change outputs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Generate a seeded synthetic catalog, slip field and trench.
    Synth(SynthArgs),
    /// Cluster a catalog and write the partition, cluster tree and mode function.
    Cluster(ClusterCmd),
    /// Evaluate the kernel density of a catalog on a regular grid.
    Density(DensityArgs),
    /// Density-based silhouette of a partition file.
    Dbs(DbsArgs),
    /// Kruskal-Wallis and pairwise rank-sum tests of a value across groups.
    Anova(AnovaArgs),
    /// Agreement indexes between two labelings of the same events.
    Agree(AgreeArgs),
    /// Day-over-day consistency of clusterings of a growing catalog.
    Temporal(TemporalArgs),
    /// Relate slip to event density, per cluster.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CatalogArgs {
    /// Delimited event catalog with a header row.
    #[arg(long)]
    pub catalog: PathBuf,
    /// Column mapping: lon=<col>,lat=<col>,mag=<col>,time=<col>[,id=<col>][,depth=<col>]; columns by name or 0-based index.
    #[arg(long, default_value = "lon=lon,lat=lat,mag=mag,time=time")]
    #[serde(serialize_with = "as_debug")]
    pub map: ColumnMap,
    /// Spatial window lonmin,lonmax,latmin,latmax (inclusive).
    #[arg(long, value_parser = parse_bbox)]
    pub bbox: Option<[f64; 4]>,
    /// Minimum magnitude (inclusive).
    #[arg(long)]
    pub min_mag: Option<f64>,
    /// Earliest origin time, ISO-8601 UTC (inclusive).
    #[arg(long, value_parser = parse_datetime)]
    pub from: Option<DateTime<Utc>>,
    /// Latest origin time, ISO-8601 UTC (inclusive).
    #[arg(long, value_parser = parse_datetime)]
    pub to: Option<DateTime<Utc>>,
    /// Drop malformed rows (listed in rejected.csv) instead of failing.
    #[arg(long)]
    pub skip_bad_rows: bool,
}

impl CatalogArgs {
    pub fn window(&self) -> SelectionWindow {
        let mut w = SelectionWindow::default();
        if let Some(b) = self.bbox {
            (w.lon_min, w.lon_max, w.lat_min, w.lat_max) = (b[0], b[1], b[2], b[3]);
        }
        if let Some(m) = self.min_mag {
            w.mag_min = m;
        }
        w.t_start = self.from;
        w.t_end = self.to;
        w
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    /// Number of density quantiles used as level-set thresholds.
    #[arg(long, default_value_t = 99)]
    pub alpha_levels: usize,
    /// Allocation of non-core events: static, seq or batch.
    #[arg(long = "alloc", default_value = "batch", value_parser = AllocationPolicy::from_str)]
    #[serde(serialize_with = "as_debug")]
    pub policy: AllocationPolicy,
    /// Cores smaller than this are dropped.
    #[arg(long, default_value_t = 3)]
    pub min_core: usize,
    /// Multiplier on the normal-reference bandwidths.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
}

impl ClusterArgs {
    pub fn options(&self) -> ClusterOptions {
        ClusterOptions {
            alpha_levels: self.alpha_levels,
            policy: self.policy,
            min_core: self.min_core,
            bandwidth_scale: self.bandwidth_scale,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Number of Gaussian blobs.
    #[arg(long, default_value_t = 5)]
    pub blobs: usize,
    /// Total number of events (blobs filled round-robin).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Blob standard deviation in degrees.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Distance between neighbouring blob centres in units of sigma.
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    /// Mixture centre lon,lat.
    #[arg(long, default_value = "-72.5,-36.0", value_parser = parse_pair)]
    pub center: [f64; 2],
    /// Length of the arrival period in days.
    #[arg(long, default_value_t = 60)]
    pub days: u32,
    /// First day of the arrival period.
    #[arg(long, default_value = "2010-02-27")]
    pub start: NaiveDate,
    /// Blobs (1-based, comma-separated) carrying slip patches; default 1,4 where present.
    #[arg(long, value_delimiter = ',', conflicts_with = "no_patches")]
    pub patches: Option<Vec<usize>>,
    /// Emit an all-zero slip field.
    #[arg(long)]
    pub no_patches: bool,
    /// Slip patch width in units of sigma.
    #[arg(long, default_value_t = 1.5)]
    pub patch_width: f64,
    /// Slip lattice spacing in degrees.
    #[arg(long, default_value_t = 0.02)]
    pub slip_spacing: f64,
    /// Magnitude of completeness; magnitudes are exponential above it.
    #[arg(long, default_value_t = 1.5)]
    pub mag_min: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterCmd {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    /// Grid size NX,NY.
    #[arg(long, default_value = "100,100", value_parser = parse_grid)]
    pub grid: [usize; 2],
    /// Grid extent lonmin,lonmax,latmin,latmax; default is the event extent padded by three bandwidths.
    #[arg(long, value_parser = parse_bbox)]
    pub grid_bbox: Option<[f64; 4]>,
    /// Multiplier on the normal-reference bandwidths.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DbsArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Partition file with id, lon, lat, label and core columns (as written by `cluster`).
    #[arg(long)]
    pub partition: PathBuf,
    /// Estimate per-cluster densities from core members only.
    #[arg(long)]
    pub dbs_on_cores: bool,
    /// Multiplier on the normal-reference bandwidths.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AnovaArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Delimited table holding the grouping and value columns.
    #[arg(long)]
    pub input: PathBuf,
    /// Grouping column.
    #[arg(long, default_value = "cluster")]
    pub by: String,
    /// Value column.
    #[arg(long, default_value = "slip")]
    pub value: String,
    /// Family-wise significance level for the pairwise tests.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HaMode {
    Standard,
    Paper,
}

impl From<HaMode> for ExpectationMode {
    fn from(m: HaMode) -> Self {
        match m {
            HaMode::Standard => ExpectationMode::Standard,
            HaMode::Paper => ExpectationMode::Paper,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct AgreeArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Forecast labels (id and label columns).
    #[arg(long)]
    pub a: PathBuf,
    /// Observed labels (id and label columns).
    #[arg(long)]
    pub b: PathBuf,
    /// Label column in both files.
    #[arg(long, default_value = "label")]
    pub label_col: String,
    /// Expected-index convention for the adjusted Rand index.
    #[arg(long, value_enum, default_value = "standard")]
    pub ha_mode: HaMode,
}

#[derive(Debug, Args, Serialize)]
pub struct TemporalArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    /// First day compared with its predecessor (day 0 holds the origin).
    #[arg(long, default_value_t = 1)]
    pub start_day: i64,
    /// Number of consecutive days compared.
    #[arg(long, default_value_t = 30)]
    pub days: usize,
    /// Date whose midnight UTC starts day 0; default is the first event's date.
    #[arg(long)]
    pub origin: Option<NaiveDate>,
    /// Expected-index convention for the adjusted Rand index.
    #[arg(long, value_enum, default_value = "standard")]
    pub ha_mode: HaMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelateMode {
    Grid,
    Events,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    /// Slip lattice: lon,lat,slip rows with a header.
    #[arg(long)]
    pub slip: PathBuf,
    /// Trench trace: one lon,lat vertex per line.
    #[arg(long)]
    pub trench: PathBuf,
    /// Evaluate on a masked grid or at the events.
    #[arg(long, value_enum, default_value = "events")]
    pub mode: CorrelateMode,
    /// Grid size NX,NY (grid mode).
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<[usize; 2]>,
    /// Grid extent lonmin,lonmax,latmin,latmax (grid mode); default is the slip lattice extent.
    #[arg(long, value_parser = parse_bbox)]
    pub grid_bbox: Option<[f64; 4]>,
    /// Mask polygons, blank-line separated (grid mode).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Offset k in ln(k + slip).
    #[arg(long, default_value_t = 0.01)]
    pub log_offset: f64,
}

fn as_debug<S: serde::Serializer, T: std::fmt::Debug>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:?}"))
}

fn floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{p:?} is not a finite number"))
        })
        .collect()
}

fn parse_bbox(s: &str) -> Result<[f64; 4], String> {
    let v = floats(s)?;
    match v[..] {
        [a, b, c, d] if a < b && c < d => Ok([a, b, c, d]),
        [_, _, _, _] => Err("expected lonmin < lonmax and latmin < latmax".into()),
        _ => Err("expected lonmin,lonmax,latmin,latmax".into()),
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    match floats(s)?[..] {
        [a, b] => Ok([a, b]),
        _ => Err("expected two comma-separated numbers".into()),
    }
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts[..] {
        [a, b] => {
            let nx = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
            let ny = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
            if nx < 2 || ny < 2 {
                return Err("grid needs at least 2 nodes per axis".into());
            }
            Ok([nx, ny])
        }
        _ => Err("expected NX,NY".into()),
    }
}

fn parse_datetime(s: &str) -> Result<DateTime<Utc>, String> {
    parse_time(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_bbox("-75.5,-69,-40,-32").unwrap(), [-75.5, -69.0, -40.0, -32.0]);
        assert!(parse_bbox("1,0,0,1").is_err());
        assert!(parse_bbox("1,2,3").is_err());
        assert_eq!(parse_grid("10,20").unwrap(), [10, 20]);
        assert!(parse_grid("1,20").is_err());
        assert_eq!(parse_pair("1.5,-2").unwrap(), [1.5, -2.0]);
    }

    #[test]
    fn patches_conflict() {
        let r = Cli::try_parse_from(["npcluster", "synth", "--out", "x", "--patches", "1", "--no-patches"]);
        assert!(r.is_err());
    }
}
