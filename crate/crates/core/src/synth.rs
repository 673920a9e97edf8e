//! Seeded synthetic catalogs: Gaussian blobs with Poisson arrivals, slip
//! patches over chosen blobs and a straight trench to the west.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::Serialize;

use crate::catalog::{Event, EventCatalog};
use crate::correlate::{SlipField, TrenchLine};
use crate::error::{Error, Result};

/// Peak slip of successive patches in metres; later patches use the last.
pub const PATCH_PEAKS: [f64; 3] = [16.6, 11.9, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub blobs: usize,
    pub n: usize,
    pub seed: u64,
    /// Blob standard deviation in degrees.
    pub sigma: f64,
    /// Distance between neighbouring blob centres, in units of `sigma`.
    pub separation: f64,
    /// Centre of the mixture, `(lon, lat)`.
    pub center: [f64; 2],
    pub days: u32,
    pub start: NaiveDate,
    /// 0-based blobs carrying a slip patch.
    pub slip_patches: Vec<usize>,
    /// Patch width in units of `sigma`.
    pub patch_width: f64,
    /// Slip lattice spacing in degrees.
    pub slip_spacing: f64,
    /// Minimum magnitude; magnitudes follow an exponential law above it.
    pub mag_min: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            blobs: 5,
            n: 1000,
            seed: 0,
            sigma: 0.1,
            separation: 10.0,
            center: [-72.5, -36.0],
            days: 60,
            start: NaiveDate::from_ymd_opt(2010, 2, 27).expect("valid date"),
            slip_patches: vec![0, 3],
            patch_width: 1.5,
            slip_spacing: 0.02,
            mag_min: 1.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blobs == 0 {
            return Err(Error::InvalidInput("need at least one blob".into()));
        }
        if self.n < self.blobs {
            return Err(Error::InvalidInput(format!("n = {} is below the blob count {}", self.n, self.blobs)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma {} must be positive", self.sigma)));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidInput(format!("separation {} must be non-negative", self.separation)));
        }
        if !(self.patch_width > 0.0 && self.slip_spacing > 0.0) {
            return Err(Error::InvalidInput("patch width and slip spacing must be positive".into()));
        }
        if self.days == 0 {
            return Err(Error::InvalidInput("days must be positive".into()));
        }
        if let Some(&b) = self.slip_patches.iter().find(|&&b| b >= self.blobs) {
            return Err(Error::InvalidInput(format!("slip patch on blob {b} but only {} blobs", self.blobs)));
        }
        if !self.mag_min.is_finite() {
            return Err(Error::InvalidInput("mag_min must be finite".into()));
        }
        Ok(())
    }

    /// Blob centres: a single blob at the centre, otherwise the vertices of
    /// a regular polygon whose side is `separation * sigma`.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let k = self.blobs;
        if k == 1 {
            return vec![self.center];
        }
        let side = self.separation * self.sigma;
        let radius = side / (2.0 * (std::f64::consts::PI / k as f64).sin());
        (0..k)
            .map(|i| {
                let angle = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                [self.center[0] + radius * angle.cos(), self.center[1] + radius * angle.sin()]
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub catalog: EventCatalog,
    /// Planted blob of each catalog event, in catalog order.
    pub labels: Vec<usize>,
    pub slip: SlipField<f64>,
    pub trench: TrenchLine,
    pub centers: Vec<[f64; 2]>,
}

/// Generates a catalog of exactly `n` events, blobs filled round-robin.
/// Within each blob arrivals are uniform over the period, i.e. a Poisson
/// process conditioned on its count. Events are sorted by time and numbered
/// from 1.
pub fn synth(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centers = config.centers();
    let normal = Normal::new(0.0, config.sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let magnitude = Exp::new(std::f64::consts::LN_10).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let origin = config.start.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
    let period = i64::from(config.days) * 86_400;

    let mut drafts = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let blob = i % config.blobs;
        let c = centers[blob];
        let lon = c[0] + normal.sample(&mut rng);
        let lat = c[1] + normal.sample(&mut rng);
        let mag = ((config.mag_min + magnitude.sample(&mut rng)) * 10.0).round() / 10.0;
        let depth = (rng.random_range(5.0..40.0_f64) * 10.0).round() / 10.0;
        let offset = rng.random_range(0..period);
        drafts.push((offset, blob, lon, lat, mag, depth));
    }
    drafts.sort_by_key(|d| d.0);

    let mut events = Vec::with_capacity(config.n);
    let mut labels = Vec::with_capacity(config.n);
    for (id, (offset, blob, lon, lat, mag, depth)) in drafts.into_iter().enumerate() {
        events.push(Event {
            id: id as u64 + 1,
            lon,
            lat,
            depth: Some(depth),
            magnitude: mag,
            time: origin + Duration::seconds(offset),
        });
        labels.push(blob);
    }
    let catalog = EventCatalog::new(events, format!("synthetic seed={}", config.seed))?;
    let slip = slip_field(config, &centers)?;
    let trench = trench_line(config, &centers)?;
    Ok(SynthOutput { catalog, labels, slip, trench, centers })
}

/// Truncated Gaussian bumps centred on the patch blobs, exactly zero beyond
/// three widths. Peaks are pinned to lattice nodes.
fn slip_field(config: &SynthConfig, centers: &[[f64; 2]]) -> Result<SlipField<f64>> {
    let margin = 6.0 * config.sigma.max(config.patch_width * config.sigma);
    let (lon0, lon1, lat0, lat1) = bounds(centers, margin);
    let h = config.slip_spacing;
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let start = (lo / h).floor() as i64;
        let end = (hi / h).ceil() as i64;
        (start..=end).map(|k| k as f64 * h).collect()
    };
    let lons = axis(lon0, lon1);
    let lats = axis(lat0, lat1);
    let snap = |v: f64| (v / h).round() * h;
    let width = config.patch_width * config.sigma;
    let patches: Vec<([f64; 2], f64)> = config
        .slip_patches
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let peak = PATCH_PEAKS[k.min(PATCH_PEAKS.len() - 1)];
            ([snap(centers[b][0]), snap(centers[b][1])], peak)
        })
        .collect();
    let mut slip = Vec::with_capacity(lons.len() * lats.len());
    for &lat in &lats {
        for &lon in &lons {
            let value = patches
                .iter()
                .map(|&(c, peak)| {
                    let r2 = ((lon - c[0]).powi(2) + (lat - c[1]).powi(2)) / (width * width);
                    if r2 > 9.0 {
                        0.0
                    } else {
                        peak * (-0.5 * r2).exp()
                    }
                })
                .fold(0.0, f64::max);
            slip.push(Some(value));
        }
    }
    SlipField::new(lons, lats, slip)
}

/// Meridian eight sigmas west of the westernmost blob edge.
fn trench_line(config: &SynthConfig, centers: &[[f64; 2]]) -> Result<TrenchLine> {
    let (lon0, _, lat0, lat1) = bounds(centers, 8.0 * config.sigma);
    TrenchLine::new(vec![[lon0, lat0], [lon0, lat1]])
}

fn bounds(centers: &[[f64; 2]], margin: f64) -> (f64, f64, f64, f64) {
    let lon = centers.iter().map(|c| c[0]);
    let lat = centers.iter().map(|c| c[1]);
    (
        lon.clone().fold(f64::INFINITY, f64::min) - margin,
        lon.fold(f64::NEG_INFINITY, f64::max) + margin,
        lat.clone().fold(f64::INFINITY, f64::min) - margin,
        lat.fold(f64::NEG_INFINITY, f64::max) + margin,
    )
}
