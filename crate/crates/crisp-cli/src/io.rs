//! File formats: point CSVs, grid files, region JSON, assignment CSVs.

use std::path::Path;

use crisp_core::{from_lat_lon, Disc, GeoGrid, LabeledDataset, RegionEstimate, UnitVector};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Parsed input sample plus an optional truth column.
pub struct PointsFile {
    pub dataset: LabeledDataset<f64>,
    pub labels: Option<Vec<usize>>,
}

/// Reads `x1..xd,y[,label]` (or `lat,lon,y[,label]` with `geo`).
pub fn read_points_csv(path: &Path, geo: bool) -> Result<PointsFile, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::bad_input(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::bad_input(format!("bad header: {e}")))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();

    let label_col = headers.iter().position(|h| h == "label");
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Failure::bad_input("input needs a `y` column"))?;

    let coord_cols: Vec<usize> = if geo {
        let lat = headers
            .iter()
            .position(|h| h == "lat")
            .ok_or_else(|| Failure::bad_input("--geo input needs `lat` and `lon` columns"))?;
        let lon = headers
            .iter()
            .position(|h| h == "lon")
            .ok_or_else(|| Failure::bad_input("--geo input needs `lat` and `lon` columns"))?;
        vec![lat, lon]
    } else {
        let mut cols = Vec::new();
        for d in 1.. {
            match headers.iter().position(|h| *h == format!("x{d}")) {
                Some(c) => cols.push(c),
                None => break,
            }
        }
        if cols.len() < 2 {
            return Err(Failure::bad_input(
                "input needs coordinate columns x1..xd (d >= 2)",
            ));
        }
        cols
    };

    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Failure::bad_input(format!("row {}: {e}", row_idx + 2)))?;
        let field = |col: usize| -> Result<f64, Failure> {
            record
                .get(col)
                .ok_or_else(|| Failure::bad_input(format!("row {}: missing field", row_idx + 2)))?
                .parse::<f64>()
                .map_err(|e| Failure::bad_input(format!("row {}: {e}", row_idx + 2)))
        };
        let point = if geo {
            let (lat, lon) = (field(coord_cols[0])?, field(coord_cols[1])?);
            from_lat_lon(lat, lon)
                .map_err(|e| Failure::bad_input(format!("row {}: {e}", row_idx + 2)))?
        } else {
            let coords = coord_cols
                .iter()
                .map(|&c| field(c))
                .collect::<Result<Vec<f64>, _>>()?;
            UnitVector::new_normalized(coords)
                .map_err(|e| Failure::bad_input(format!("row {}: {e}", row_idx + 2)))?
        };
        points.push(point);
        values.push(field(y_col)?);
        if let Some(col) = label_col {
            labels.push(field(col)? as usize);
        }
    }
    let dataset = LabeledDataset::new(points, values)
        .map_err(|e| Failure::bad_input(format!("invalid sample: {e}")))?;
    Ok(PointsFile {
        dataset,
        labels: label_col.map(|_| labels),
    })
}

pub fn write_points_csv(
    path: &Path,
    points: &[UnitVector<f64>],
    values: &[f64],
) -> Result<(), Failure> {
    let dim = points.first().map_or(0, |p| p.dim());
    let mut out = String::new();
    for d in 1..=dim {
        out.push_str(&format!("x{d},"));
    }
    out.push_str("y\n");
    for (p, v) in points.iter().zip(values) {
        for c in p.coords() {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{v}\n"));
    }
    std::fs::write(path, out)
        .map_err(|e| Failure::bad_input(format!("cannot write {}: {e}", path.display())))
}

/// Sidecar schema for dense-matrix grid files.
#[derive(Deserialize)]
struct GridSidecar {
    lat_edges: Vec<f64>,
    lon_edges: Vec<f64>,
}

/// Loads a grid either from `lat,lon,value` CSV (missing = empty field) or
/// from a dense matrix file (rows = latitudes) whose `<file>.json` sidecar
/// provides the cell edges.
pub fn read_grid(path: &Path) -> Result<GeoGrid<f64>, Failure> {
    if path.extension().is_some_and(|e| e == "csv") {
        read_grid_csv(path)
    } else {
        read_grid_matrix(path)
    }
}

fn read_grid_csv(path: &Path) -> Result<GeoGrid<f64>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::bad_input(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::bad_input(format!("bad header: {e}")))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let col = |name: &str| -> Result<usize, Failure> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::bad_input(format!("grid needs a `{name}` column")))
    };
    let (lat_c, lon_c, val_c) = (col("lat")?, col("lon")?, col("value")?);

    let mut cells: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Failure::bad_input(format!("row {}: {e}", row_idx + 2)))?;
        let parse = |col: usize| -> Result<f64, Failure> {
            record
                .get(col)
                .ok_or_else(|| Failure::bad_input(format!("row {}: missing field", row_idx + 2)))?
                .parse::<f64>()
                .map_err(|e| Failure::bad_input(format!("row {}: {e}", row_idx + 2)))
        };
        let value = match record.get(val_c) {
            Some("") | None => None,
            Some(_) => Some(parse(val_c)?),
        };
        cells.push((parse(lat_c)?, parse(lon_c)?, value));
    }
    if cells.is_empty() {
        return Err(Failure::bad_input("grid file holds no cells"));
    }
    let mut lats: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let mut lons: Vec<f64> = cells.iter().map(|c| c.1).collect();
    lats.sort_by(f64::total_cmp);
    lats.dedup();
    lons.sort_by(f64::total_cmp);
    lons.dedup();
    let mut values = vec![None; lats.len() * lons.len()];
    for (lat, lon, value) in cells {
        let r = lats.partition_point(|&x| x < lat);
        let c = lons.partition_point(|&x| x < lon);
        values[r * lons.len() + c] = value;
    }
    GeoGrid::new(lats, lons, values).map_err(|e| Failure::bad_input(format!("bad grid: {e}")))
}

fn read_grid_matrix(path: &Path) -> Result<GeoGrid<f64>, Failure> {
    let sidecar_path = path.with_extension(format!(
        "{}.json",
        path.extension().and_then(|e| e.to_str()).unwrap_or("dat")
    ));
    let sidecar: GridSidecar = serde_json::from_str(
        &std::fs::read_to_string(&sidecar_path).map_err(|e| {
            Failure::bad_input(format!("cannot read sidecar {}: {e}", sidecar_path.display()))
        })?,
    )
    .map_err(|e| Failure::bad_input(format!("bad sidecar: {e}")))?;
    let centers = |edges: &[f64]| -> Vec<f64> {
        edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    };
    let lats = centers(&sidecar.lat_edges);
    let lons = centers(&sidecar.lon_edges);
    let body = std::fs::read_to_string(path)
        .map_err(|e| Failure::bad_input(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(lats.len() * lons.len());
    for line in body.lines().filter(|l| !l.trim().is_empty()) {
        for token in line.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
            if token.eq_ignore_ascii_case("nan") {
                values.push(None);
            } else {
                values.push(Some(token.parse::<f64>().map_err(|e| {
                    Failure::bad_input(format!("bad grid value `{token}`: {e}"))
                })?));
            }
        }
    }
    GeoGrid::new(lats, lons, values).map_err(|e| Failure::bad_input(format!("bad grid: {e}")))
}

#[derive(Serialize, Deserialize)]
pub struct DiscJson {
    pub center: Vec<f64>,
    pub radius_rad: f64,
    pub cos_threshold: f64,
}

impl DiscJson {
    pub fn from_disc(disc: &Disc<f64>) -> Self {
        Self {
            center: disc.center().coords().to_vec(),
            radius_rad: disc.radius(),
            cos_threshold: disc.cos_threshold(),
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct RegionJson {
    pub center: Vec<f64>,
    pub radius_rad: f64,
    pub cos_threshold: f64,
    pub cusum: f64,
    pub rss: Option<f64>,
    pub n_inside: usize,
    pub outer: Option<DiscJson>,
}

impl RegionJson {
    pub fn from_estimate(est: &RegionEstimate<f64>) -> Self {
        Self {
            center: est.disc.center().coords().to_vec(),
            radius_rad: est.disc.radius(),
            cos_threshold: est.disc.cos_threshold(),
            cusum: est.statistic,
            rss: est.rss,
            n_inside: est.member_indices.len(),
            outer: est.outer_disc.as_ref().map(DiscJson::from_disc),
        }
    }
}

/// Per-point region assignment (0 = background).
pub fn write_assignments_csv(
    path: &Path,
    n: usize,
    regions: &[RegionEstimate<f64>],
) -> Result<(), Failure> {
    let mut assignment = vec![0usize; n];
    for (k, region) in regions.iter().enumerate() {
        for &i in &region.member_indices {
            assignment[i] = k + 1;
        }
    }
    let mut out = String::from("index,region\n");
    for (i, r) in assignment.iter().enumerate() {
        out.push_str(&format!("{i},{r}\n"));
    }
    std::fs::write(path, out)
        .map_err(|e| Failure::bad_input(format!("cannot write {}: {e}", path.display())))
}
