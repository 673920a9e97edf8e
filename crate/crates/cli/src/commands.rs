use std::collections::BTreeMap;

use ndarray::Array2;
use serde::Serialize;

use npcluster::agreement::{
    agreement_scores, compact_labels, contingency, match_labels, temporal_consistency, TemporalOptions,
};
use npcluster::catalog::{filter_catalog, format_time, load_catalog, EventCatalog, RowPolicy};
use npcluster::cluster::{cluster_models, pdf_cluster_locations, ClusterResult};
use npcluster::correlate::{
    build_masked_grid, cluster_slip_summary, cluster_spearman, load_polylines, load_slip, scatter_table,
    trench_distance, Polygon, SampleStatus, TrenchLine,
};
use npcluster::diagnostics::dbs_from_groups;
use npcluster::kde::{lattice, normal_reference_bandwidth, DensityModel};
use npcluster::stats::{bonferroni, format_p_value, kruskal_wallis, pairwise_wilcoxon_matrix, GroupedSamples};
use npcluster::synth::SynthConfig;
use npcluster::Error;

use crate::args::{
    AgreeArgs, AnovaArgs, CatalogArgs, Cli, ClusterCmd, CorrelateArgs, CorrelateMode, DbsArgs, DensityArgs,
    SynthArgs, TemporalArgs,
};
use crate::output::{num, opt, CliError, CliResult, InputTable, OutDir};

#[derive(Serialize)]
struct Selection {
    loaded: usize,
    rejected: usize,
    selected: usize,
}

fn load(args: &CatalogArgs, out: &OutDir) -> CliResult<(EventCatalog, Selection)> {
    let policy = if args.skip_bad_rows { RowPolicy::Skip } else { RowPolicy::Fail };
    let report = load_catalog(&args.catalog, &args.map, policy)?;
    if args.skip_bad_rows {
        out.table(
            "rejected.csv",
            &["line", "reason"],
            report.rejected.iter().map(|r| vec![r.line.to_string(), r.reason.clone()]),
        )?;
    }
    let catalog = filter_catalog(&report.catalog, &args.window())?;
    let selection = Selection {
        loaded: report.catalog.len(),
        rejected: report.rejected.len(),
        selected: catalog.len(),
    };
    log::info!("selected {} of {} events", selection.selected, selection.loaded);
    Ok((catalog, selection))
}

fn locations_matrix(points: &[[f64; 2]]) -> Array2<f64> {
    Array2::from_shape_vec((points.len(), 2), points.iter().flatten().copied().collect()).expect("n x 2 shape")
}

pub fn synth(cli: &Cli, a: &SynthArgs) -> CliResult {
    let patches = if a.no_patches {
        Vec::new()
    } else {
        match &a.patches {
            Some(list) => list
                .iter()
                .map(|&b| {
                    b.checked_sub(1)
                        .ok_or_else(|| CliError::Usage("patch blobs are numbered from 1".into()))
                })
                .collect::<CliResult<_>>()?,
            None => [0, 3].into_iter().filter(|&b| b < a.blobs).collect(),
        }
    };
    let config = SynthConfig {
        blobs: a.blobs,
        n: a.n,
        seed: a.seed,
        sigma: a.sigma,
        separation: a.separation,
        center: a.center,
        days: a.days,
        start: a.start,
        slip_patches: patches,
        patch_width: a.patch_width,
        slip_spacing: a.slip_spacing,
        mag_min: a.mag_min,
    };
    let result = npcluster::synth::synth(&config)?;
    let out = OutDir::create(&a.out.out)?;
    out.with_writer("catalog.csv", |w| {
        result.catalog.write_csv(w).map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    out.table(
        "labels.csv",
        &["id", "label"],
        result
            .catalog
            .events
            .iter()
            .zip(&result.labels)
            .map(|(e, l)| vec![e.id.to_string(), (l + 1).to_string()]),
    )?;
    out.table(
        "centers.csv",
        &["blob", "lon", "lat"],
        result.centers.iter().enumerate().map(|(i, c)| vec![(i + 1).to_string(), num(c[0]), num(c[1])]),
    )?;
    out.with_writer("slip.csv", |w| result.slip.write_csv(w))?;
    out.with_writer("trench.txt", |w| {
        use std::io::Write;
        result.trench.vertices().iter().try_for_each(|v| writeln!(w, "{},{}", v[0], v[1]))
    })?;
    out.config(cli, &config)
}

#[derive(Serialize)]
struct ClusterSummary {
    selection: Selection,
    bandwidths: Vec<f64>,
    mode_count: usize,
    cluster_count: usize,
    sizes: Vec<usize>,
    allocation_ties: usize,
}

pub fn cluster(cli: &Cli, a: &ClusterCmd) -> CliResult {
    let out = OutDir::create(&a.out.out)?;
    let (catalog, selection) = load(&a.catalog, &out)?;
    let r = pdf_cluster_locations(&catalog.locations(), &a.cluster.options())?;
    write_partition(&out, &catalog, &r)?;
    out.table(
        "tree.csv",
        &["node", "parent", "level", "alpha", "size"],
        r.tree.nodes.iter().map(|n| {
            vec![
                n.id.to_string(),
                opt(n.parent),
                n.level.to_string(),
                num(n.alpha),
                n.members.len().to_string(),
            ]
        }),
    )?;
    out.table(
        "mode_function.csv",
        &["alpha", "p", "m"],
        r.mode_function.points.iter().map(|p| vec![num(p.alpha), num(p.p), p.m.to_string()]),
    )?;
    out.table(
        "cores.csv",
        &["cluster", "leaf", "alpha", "size"],
        r.cores.iter().enumerate().map(|(c, core)| {
            vec![(c + 1).to_string(), core.leaf.to_string(), num(core.alpha), core.members.len().to_string()]
        }),
    )?;
    let ids: Vec<u64> = catalog.events.iter().map(|e| e.id).collect();
    out.table(
        "edges.csv",
        &["id_a", "id_b"],
        r.graph.edges().iter().map(|&(u, v)| {
            vec![ids[r.graph.representative(u)].to_string(), ids[r.graph.representative(v)].to_string()]
        }),
    )?;
    let summary = ClusterSummary {
        selection,
        bandwidths: r.model.bandwidths().as_slice().to_vec(),
        mode_count: r.mode_function.mode_count(),
        cluster_count: r.partition.cluster_count,
        sizes: r.partition.sizes(),
        allocation_ties: r.partition.ties.len(),
    };
    out.config(cli, &summary)
}

fn write_partition(out: &OutDir, catalog: &EventCatalog, r: &ClusterResult<f64>) -> CliResult {
    out.table(
        "partition.csv",
        &["id", "lon", "lat", "time", "label", "core", "density", "log_density"],
        catalog.events.iter().enumerate().map(|(i, e)| {
            vec![
                e.id.to_string(),
                num(e.lon),
                num(e.lat),
                format_time(&e.time),
                (r.partition.labels[i] + 1).to_string(),
                u8::from(r.partition.core[i]).to_string(),
                num(r.densities[i]),
                num(r.log_densities[i]),
            ]
        }),
    )
}

#[derive(Serialize)]
struct DensitySummary {
    selection: Selection,
    bandwidths: Vec<f64>,
    grid_bbox: [f64; 4],
}

pub fn density(cli: &Cli, a: &DensityArgs) -> CliResult {
    let out = OutDir::create(&a.out.out)?;
    let (catalog, selection) = load(&a.catalog, &out)?;
    let sample = locations_matrix(&catalog.locations());
    let bandwidths = normal_reference_bandwidth(sample.view())?.scaled(a.bandwidth_scale)?;
    let h = bandwidths.as_slice().to_vec();
    let bbox = match a.grid_bbox {
        Some(b) => b,
        None => {
            let extent = |col: usize| {
                let c = sample.column(col);
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo - 3.0 * h[col], hi + 3.0 * h[col])
            };
            let ((x0, x1), (y0, y1)) = (extent(0), extent(1));
            [x0, x1, y0, y1]
        }
    };
    let model = DensityModel::new(sample, bandwidths)?;
    let surface = model.evaluate(lattice(bbox, a.grid[0], a.grid[1]).view())?;
    out.table(
        "density.csv",
        &["lon", "lat", "f", "log_f"],
        surface.query_points.outer_iter().enumerate().map(|(i, q)| {
            vec![num(q[0]), num(q[1]), num(surface.values[i]), num(surface.log_values[i])]
        }),
    )?;
    out.config(cli, &DensitySummary { selection, bandwidths: h, grid_bbox: bbox })
}

#[derive(Serialize)]
struct DbsSummary {
    events: usize,
    clusters: Vec<i64>,
    bandwidths: Vec<f64>,
    mean_dbs: f64,
}

pub fn dbs(cli: &Cli, a: &DbsArgs) -> CliResult {
    let table = InputTable::read(&a.partition)?;
    let (id_c, lon_c, lat_c, label_c) =
        (table.column("id")?, table.column("lon")?, table.column("lat")?, table.column("label")?);
    let n = table.rows.len();
    let ids: Vec<String> = table.rows.iter().map(|r| r[id_c].to_string()).collect();
    let lon = table.floats(lon_c)?;
    let lat = table.floats(lat_c)?;
    let points = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { lon[i] } else { lat[i] });
    let raw: Vec<i64> = (0..n).map(|r| table.parse(r, label_c)).collect::<CliResult<_>>()?;
    let (labels, originals) = compact_labels(&raw);
    let mut groups = vec![Vec::new(); originals.len()];
    if a.dbs_on_cores {
        let core_c = table.column("core")?;
        for i in 0..n {
            if table.parse::<u8>(i, core_c)? == 1 {
                groups[labels[i]].push(i);
            }
        }
    } else {
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
    }
    if let Some(c) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::InvalidInput(format!("cluster {} has no core members", originals[c])).into());
    }
    let bandwidths = normal_reference_bandwidth(points.view())?.scaled(a.bandwidth_scale)?;
    let report = dbs_from_groups(points.view(), &labels, &groups, &bandwidths)?;

    let out = OutDir::create(&a.out.out)?;
    out.table(
        "dbs.csv",
        &["id", "cluster", "runner_up", "posterior", "runner_up_posterior", "log_ratio", "dbs"],
        report.events.iter().enumerate().map(|(i, e)| {
            vec![
                ids[i].clone(),
                originals[e.cluster].to_string(),
                originals[e.runner_up].to_string(),
                num(e.posterior),
                num(e.runner_up_posterior),
                num(e.log_ratio),
                num(e.dbs),
            ]
        }),
    )?;
    let silhouette = report.silhouette();
    out.table(
        "silhouette.csv",
        &["cluster", "rank", "id", "dbs"],
        silhouette.iter().enumerate().flat_map(|(c, rows)| {
            let ids = &ids;
            let originals = &originals;
            rows.iter().enumerate().map(move |(rank, &(i, d))| {
                vec![originals[c].to_string(), (rank + 1).to_string(), ids[i].clone(), num(d)]
            })
        }),
    )?;
    out.table(
        "dbs_summary.csv",
        &["cluster", "n", "mean_dbs", "negative"],
        silhouette.iter().enumerate().map(|(c, rows)| {
            vec![
                originals[c].to_string(),
                rows.len().to_string(),
                num(report.cluster_means[c]),
                rows.iter().filter(|r| r.1 < 0.0).count().to_string(),
            ]
        }),
    )?;
    let summary = DbsSummary {
        events: n,
        clusters: originals.clone(),
        bandwidths: bandwidths.as_slice().to_vec(),
        mean_dbs: report.mean,
    };
    out.config(cli, &summary)
}

/// Sorts group keys numerically when all are integers, lexically otherwise.
fn sorted_keys(keys: impl Iterator<Item = String>) -> Vec<String> {
    let mut keys: Vec<String> = keys.collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    if keys.iter().all(|k| k.parse::<i64>().is_ok()) {
        keys.sort_by_key(|k| k.parse::<i64>().expect("checked"));
    }
    keys
}

#[derive(Serialize)]
struct AnovaSummary {
    groups: Vec<String>,
    sizes: Vec<usize>,
    bonferroni_threshold: f64,
}

pub fn anova(cli: &Cli, a: &AnovaArgs) -> CliResult {
    let table = InputTable::read(&a.input)?;
    let (by, value) = (table.column(&a.by)?, table.column(&a.value)?);
    let values = table.floats(value)?;
    let keys = sorted_keys(table.rows.iter().map(|r| r[by].to_string()));
    let index: BTreeMap<&str, usize> = keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let mut groups = vec![Vec::new(); keys.len()];
    for (r, v) in table.rows.iter().zip(values) {
        groups[index[&r[by]]].push(v);
    }
    let samples = GroupedSamples::new(groups)?;
    let kw = kruskal_wallis(&samples)?;
    let matrix = pairwise_wilcoxon_matrix(&samples)?;
    let upper = matrix.upper();
    let bonf = bonferroni(&upper, a.alpha)?;

    let out = OutDir::create(&a.out.out)?;
    let n: usize = kw.sizes.iter().sum();
    out.table(
        "kruskal.csv",
        &["statistic", "df", "p_value", "p_display", "groups", "n", "tie_correction", "method"],
        [vec![
            num(kw.statistic),
            opt(kw.df.map(num)),
            num(kw.p_value),
            format_p_value(kw.p_value),
            keys.len().to_string(),
            n.to_string(),
            kw.tie_correction_applied.to_string(),
            format!("{:?}", kw.method),
        ]],
    )?;
    let mut header = vec![a.by.as_str()];
    header.extend(keys.iter().map(String::as_str));
    out.table(
        "pairwise.csv",
        &header,
        matrix.values.iter().enumerate().map(|(i, row)| {
            let mut cells = vec![keys[i].clone()];
            cells.extend(row.iter().map(|p| p.map(format_p_value).unwrap_or_else(|| "-".into())));
            cells
        }),
    )?;
    let pairs: Vec<(usize, usize)> = (0..keys.len()).flat_map(|i| (i + 1..keys.len()).map(move |j| (i, j))).collect();
    out.table(
        "pairwise_long.csv",
        &["a", "b", "p_value", "p_display", "threshold", "significant"],
        pairs.iter().enumerate().map(|(k, &(i, j))| {
            vec![
                keys[i].clone(),
                keys[j].clone(),
                num(upper[k]),
                format_p_value(upper[k]),
                num(bonf.threshold),
                bonf.significant[k].to_string(),
            ]
        }),
    )?;
    let summary = AnovaSummary { groups: keys, sizes: kw.sizes, bonferroni_threshold: bonf.threshold };
    out.config(cli, &summary)
}

fn read_labels(path: &std::path::Path, label_col: &str) -> CliResult<BTreeMap<String, i64>> {
    let table = InputTable::read(path)?;
    let (id, label) = (table.column("id")?, table.column(label_col)?);
    let mut map = BTreeMap::new();
    for r in 0..table.rows.len() {
        let key = table.rows[r][id].to_string();
        let value: i64 = table.parse(r, label)?;
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Parse { line: r + 2, message: format!("duplicate id {key}") }.into());
        }
    }
    Ok(map)
}

#[derive(Serialize)]
struct AgreeSummary {
    n_common: usize,
    forecast_labels: Vec<i64>,
    observed_labels: Vec<i64>,
}

pub fn agree(cli: &Cli, a: &AgreeArgs) -> CliResult {
    let forecast = read_labels(&a.a, &a.label_col)?;
    let observed = read_labels(&a.b, &a.label_col)?;
    let common: Vec<&String> = forecast.keys().filter(|k| observed.contains_key(*k)).collect();
    if common.is_empty() {
        return Err(Error::InvalidInput("the label files share no ids".into()).into());
    }
    let (f, f_orig) = compact_labels(&common.iter().map(|k| forecast[*k]).collect::<Vec<_>>());
    let (o, o_orig) = compact_labels(&common.iter().map(|k| observed[*k]).collect::<Vec<_>>());
    let table = contingency(&f, &o)?;
    if table.rows() != table.cols() {
        return Err(Error::InvalidInput(format!(
            "cluster counts differ: {} forecast vs {} observed",
            table.rows(),
            table.cols()
        ))
        .into());
    }
    let scores = agreement_scores(&table, a.ha_mode.into())?;
    let map = match_labels(&table)?;

    let out = OutDir::create(&a.out.out)?;
    out.table(
        "agree.csv",
        &["n_common", "k", "nss", "hss", "hk", "ha"],
        [vec![
            common.len().to_string(),
            table.rows().to_string(),
            num(scores.nss),
            num(scores.hss),
            num(scores.hk),
            num(scores.ha),
        ]],
    )?;
    out.table(
        "matching.csv",
        &["forecast", "observed", "count"],
        map.iter()
            .enumerate()
            .map(|(i, &j)| vec![f_orig[i].to_string(), o_orig[j].to_string(), table.counts()[i][j].to_string()]),
    )?;
    let mut header = vec!["forecast".to_string()];
    header.extend(o_orig.iter().map(|l| l.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.table(
        "contingency.csv",
        &header,
        table.counts().iter().enumerate().map(|(i, row)| {
            let mut cells = vec![f_orig[i].to_string()];
            cells.extend(row.iter().map(|c| c.to_string()));
            cells
        }),
    )?;
    let summary = AgreeSummary { n_common: common.len(), forecast_labels: f_orig, observed_labels: o_orig };
    out.config(cli, &summary)
}

pub fn temporal(cli: &Cli, a: &TemporalArgs) -> CliResult {
    let out = OutDir::create(&a.out.out)?;
    let (catalog, selection) = load(&a.catalog, &out)?;
    let options = TemporalOptions {
        cluster: a.cluster.options(),
        start_day: a.start_day,
        days: a.days,
        origin: a.origin,
        mode: a.ha_mode.into(),
    };
    let days = temporal_consistency(&catalog, &options)?;
    out.table(
        "temporal.csv",
        &["day", "n_common", "k", "nss", "hss", "hk", "ha", "skipped", "reason"],
        days.iter().map(|d| {
            let s = d.scores;
            vec![
                d.day.to_string(),
                d.n_common.to_string(),
                d.clusters.to_string(),
                opt(s.map(|s| num(s.nss))),
                opt(s.map(|s| num(s.hss))),
                opt(s.map(|s| num(s.hk))),
                opt(s.map(|s| num(s.ha))),
                u8::from(d.skipped.is_some()).to_string(),
                d.skipped.clone().unwrap_or_default(),
            ]
        }),
    )?;
    out.config(cli, &selection)
}

#[derive(Serialize)]
struct CorrelateSummary {
    selection: Selection,
    cluster_count: usize,
    points: usize,
    grid_candidates: Option<usize>,
    grid_bbox: Option<[f64; 4]>,
}

fn status_name(s: SampleStatus) -> &'static str {
    match s {
        SampleStatus::Inside => "inside",
        SampleStatus::OutOfDomain => "out_of_domain",
        SampleStatus::NoData => "nodata",
    }
}

pub fn correlate(cli: &Cli, a: &CorrelateArgs) -> CliResult {
    if a.mode == CorrelateMode::Events && (a.grid.is_some() || a.grid_bbox.is_some() || a.mask.is_some()) {
        return Err(CliError::Usage("--grid, --grid-bbox and --mask require --mode grid".into()));
    }
    let field = load_slip::<f64>(&a.slip)?;
    let mut lines = load_polylines(&a.trench)?;
    if lines.len() != 1 {
        return Err(Error::InvalidInput(format!("trench file holds {} polylines, expected 1", lines.len())).into());
    }
    let trench = TrenchLine::new(lines.remove(0))?;
    let out = OutDir::create(&a.out.out)?;
    let (catalog, selection) = load(&a.catalog, &out)?;
    let locations = catalog.locations();
    let r = pdf_cluster_locations(&locations, &a.cluster.options())?;

    let (points, labels, grid_candidates, grid_bbox) = match a.mode {
        CorrelateMode::Events => (locations.clone(), r.partition.labels.clone(), None, None),
        CorrelateMode::Grid => {
            let [nx, ny] = a.grid.unwrap_or([100, 100]);
            let lons = field.lons();
            let lats = field.lats();
            let bbox = a.grid_bbox.unwrap_or([lons[0], lons[lons.len() - 1], lats[0], lats[lats.len() - 1]]);
            let polygons = match &a.mask {
                Some(path) => load_polylines(path)?.into_iter().map(Polygon::new).collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            let grid = build_masked_grid(bbox, nx, ny, polygons)?;
            let labels = grid_labels(&locations, &r, &grid.points)?;
            let candidates = grid.candidate_count();
            (grid.points, labels, Some(candidates), Some(bbox))
        }
    };
    let rows = scatter_table(&points, &field, &r.model, Some(&labels), a.log_offset)?;
    out.table(
        "scatter.csv",
        &["lon", "lat", "slip", "log_slip", "log_density", "status", "cluster"],
        rows.iter().map(|row| {
            vec![
                num(row.lon),
                num(row.lat),
                num(row.slip),
                num(row.log_slip),
                num(row.log_density),
                status_name(row.status).to_string(),
                opt(row.cluster.map(|c| c + 1)),
            ]
        }),
    )?;
    out.table(
        "spearman.csv",
        &["cluster", "rho", "n"],
        cluster_spearman(&rows)?.into_iter().map(|(c, rho, n)| vec![(c + 1).to_string(), num(rho), n.to_string()]),
    )?;

    let event_slip: Vec<f64> = field.interpolate(&locations).iter().map(|s| s.value).collect();
    let distances = trench_distance(&locations, &trench);
    let summary = cluster_slip_summary(&r.partition.labels, &event_slip, &distances)?;
    out.table(
        "summary.csv",
        &["cluster", "n", "mean", "min", "max", "sd", "dist_min", "dist_max", "dist_mean"],
        summary.iter().map(|s| {
            vec![
                (s.cluster + 1).to_string(),
                s.n.to_string(),
                num(s.mean),
                num(s.min),
                num(s.max),
                opt(s.sd.map(num)),
                num(s.dist_min),
                num(s.dist_max),
                num(s.dist_mean),
            ]
        }),
    )?;
    let resolved = CorrelateSummary {
        selection,
        cluster_count: r.partition.cluster_count,
        points: points.len(),
        grid_candidates,
        grid_bbox,
    };
    out.config(cli, &resolved)
}

/// Labels grid points by the cluster whose density estimate is largest there.
fn grid_labels(locations: &[[f64; 2]], r: &ClusterResult<f64>, grid: &[[f64; 2]]) -> CliResult<Vec<usize>> {
    let sample = locations_matrix(locations);
    let groups: Vec<Vec<usize>> = (0..r.partition.cluster_count).map(|c| r.partition.members(c)).collect();
    let models = cluster_models(sample.view(), &groups, r.model.bandwidths())?;
    let queries = locations_matrix(grid);
    let surfaces: Vec<Vec<f64>> = models
        .iter()
        .map(|m| m.evaluate(queries.view()).map(|s| s.log_values.to_vec()))
        .collect::<Result<_, _>>()?;
    Ok((0..grid.len())
        .map(|i| {
            let mut best = 0;
            for (c, s) in surfaces.iter().enumerate().skip(1) {
                if s[i] > surfaces[best][i] {
                    best = c;
                }
            }
            best
        })
        .collect())
}
