//! Real-data pipeline: snapping sampled sphere locations to a geographic
//! grid, minimum-spanning-tree neighbourhoods, and a robust MAD scale
//! estimate used to standardize the responses.

use crate::error::{CrispError, Result};
use crate::scalar::Scalar;
use crate::sphere::{geodesic, LabeledDataset, UnitVector};

/// Regular latitude-longitude grid of cell-center values, with optional
/// secondary grid used to fill missing cells (e.g. sea-surface values where
/// land values are absent).
#[derive(Clone, Debug)]
pub struct GeoGrid<T> {
    lat_centers: Vec<T>,
    lon_centers: Vec<T>,
    /// Row-major `[lat][lon]`; `None` marks missing cells.
    values: Vec<Option<T>>,
    fill: Option<Box<GeoGrid<T>>>,
}

impl<T: Scalar> GeoGrid<T> {
    pub fn new(lat_centers: Vec<T>, lon_centers: Vec<T>, values: Vec<Option<T>>) -> Result<Self> {
        if lat_centers.is_empty() || lon_centers.is_empty() {
            return Err(CrispError::invalid("grid axes must be nonempty"));
        }
        if !lat_centers.windows(2).all(|w| w[0] < w[1])
            || !lon_centers.windows(2).all(|w| w[0] < w[1])
        {
            return Err(CrispError::invalid("grid axes must be strictly increasing"));
        }
        if values.len() != lat_centers.len() * lon_centers.len() {
            return Err(CrispError::invalid(format!(
                "{} cells expected, got {}",
                lat_centers.len() * lon_centers.len(),
                values.len()
            )));
        }
        Ok(Self {
            lat_centers,
            lon_centers,
            values,
            fill: None,
        })
    }

    /// Attaches a secondary grid consulted where this grid is missing.
    pub fn with_fill(mut self, fill: GeoGrid<T>) -> Self {
        self.fill = Some(Box::new(fill));
        self
    }

    pub fn rows(&self) -> usize {
        self.lat_centers.len()
    }

    pub fn cols(&self) -> usize {
        self.lon_centers.len()
    }

    fn value_at(&self, row: usize, col: usize) -> Option<T> {
        self.values[row * self.cols() + col]
    }

    /// Nearest cell in latitude/longitude; boundary ties break toward the
    /// smaller index.
    fn nearest_cell(&self, lat: T, lon: T) -> (usize, usize) {
        let row = nearest_index(&self.lat_centers, lat, false);
        let col = nearest_index(&self.lon_centers, lon, true);
        (row, col)
    }

    /// Value at the nearest cell, consulting the fill grid when missing.
    pub fn lookup(&self, lat: T, lon: T) -> Option<T> {
        let (row, col) = self.nearest_cell(lat, lon);
        self.value_at(row, col)
            .or_else(|| self.fill.as_ref().and_then(|g| g.lookup(lat, lon)))
    }
}

fn nearest_index<T: Scalar>(centers: &[T], target: T, circular_degrees: bool) -> usize {
    let dist = |c: T| -> T {
        let raw = (c - target).abs();
        if circular_degrees {
            let wrap = T::from_f64_lossy(360.0) - raw;
            raw.min(wrap)
        } else {
            raw
        }
    };
    let mut best = 0usize;
    let mut best_dist = dist(centers[0]);
    for (i, &c) in centers.iter().enumerate().skip(1) {
        let d = dist(c);
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Latitude/longitude of a point on the 2-sphere, in degrees.
pub fn to_lat_lon<T: Scalar>(point: &UnitVector<T>) -> Result<(T, T)> {
    if point.dim() != 3 {
        return Err(CrispError::Unsupported(
            "geographic coordinates need d = 3".into(),
        ));
    }
    let deg = T::from_f64_lossy(180.0) / T::pi();
    let c = point.coords();
    let lat = c[2].min(T::one()).max(-T::one()).asin() * deg;
    let lon = c[1].atan2(c[0]) * deg;
    Ok((lat, lon))
}

/// Point on the 2-sphere from latitude/longitude in degrees.
pub fn from_lat_lon<T: Scalar>(lat: T, lon: T) -> Result<UnitVector<T>> {
    let rad = T::pi() / T::from_f64_lossy(180.0);
    let (lat, lon) = (lat * rad, lon * rad);
    UnitVector::new_normalized(vec![
        lat.cos() * lon.cos(),
        lat.cos() * lon.sin(),
        lat.sin(),
    ])
}

/// Maps each point to its nearest grid cell and returns the cell value;
/// `None` where both the primary and fill grids are missing (such points
/// are dropped by callers, with a warning at the interface layer).
pub fn snap_to_grid<T: Scalar>(points: &[UnitVector<T>], grid: &GeoGrid<T>) -> Result<Vec<Option<T>>> {
    points
        .iter()
        .map(|p| {
            let (lat, lon) = to_lat_lon(p)?;
            Ok(grid.lookup(lat, lon))
        })
        .collect()
}

/// Minimum spanning tree of the sample under geodesic distance, plus the
/// neighbour lists induced by short edges.
#[derive(Clone, Debug)]
pub struct NeighborGraph<T> {
    /// `(i, j, length)` for the n-1 tree edges.
    pub mst_edges: Vec<(usize, usize, T)>,
    /// Mean MST edge length; edges at most this long define neighbours.
    pub d_max: T,
    pub neighbor_lists: Vec<Vec<usize>>,
}

/// Dense Prim construction, O(n^2) distance evaluations.
pub fn build_mst<T: Scalar>(points: &[UnitVector<T>]) -> Result<NeighborGraph<T>> {
    let n = points.len();
    if n < 2 {
        return Err(CrispError::invalid("spanning tree needs at least 2 points"));
    }
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![T::infinity(); n];
    let mut best_from = vec![0usize; n];
    in_tree[0] = true;
    for i in 1..n {
        best_dist[i] = geodesic(&points[0], &points[i])?;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_dist = T::infinity();
        for i in 0..n {
            if !in_tree[i] && best_dist[i] < next_dist {
                next = i;
                next_dist = best_dist[i];
            }
        }
        debug_assert!(next != usize::MAX);
        in_tree[next] = true;
        edges.push((best_from[next].min(next), best_from[next].max(next), next_dist));
        for i in 0..n {
            if !in_tree[i] {
                let d = geodesic(&points[next], &points[i])?;
                if d < best_dist[i] {
                    best_dist[i] = d;
                    best_from[i] = next;
                }
            }
        }
    }
    let d_max = edges.iter().map(|&(_, _, w)| w).sum::<T>() / T::from_usize_lossy(edges.len());
    let mut neighbor_lists = vec![Vec::new(); n];
    for &(i, j, w) in &edges {
        if w <= d_max {
            neighbor_lists[i].push(j);
            neighbor_lists[j].push(i);
        }
    }
    for list in &mut neighbor_lists {
        list.sort_unstable();
    }
    Ok(NeighborGraph {
        mst_edges: edges,
        d_max,
        neighbor_lists,
    })
}

fn median<T: Scalar>(values: &mut [T]) -> T {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * T::half()
    }
}

/// Gaussian-consistency factor for the median absolute deviation.
const MAD_CONSTANT: f64 = 1.4826;

/// Robust scale estimate: each response is compared to the local mean over
/// `{i} ∪ N(i)`, the residual is variance-corrected by `sqrt(m/(m-1))` with
/// `m = |N(i)| + 1`, and the scale is `1.4826 * median(|residual|)`
/// (residuals are mean-zero under a locally constant mean, so no median
/// centering is applied). Points without neighbours are skipped.
pub fn robust_scale<T: Scalar>(values: &[T], graph: &NeighborGraph<T>) -> Result<T> {
    if values.len() != graph.neighbor_lists.len() {
        return Err(CrispError::invalid(
            "value count does not match the neighbour graph",
        ));
    }
    let mut residuals: Vec<T> = Vec::with_capacity(values.len());
    for (i, neighbors) in graph.neighbor_lists.iter().enumerate() {
        let m = neighbors.len() + 1;
        if m == 1 {
            continue;
        }
        let mut sum = values[i];
        for &j in neighbors {
            sum += values[j];
        }
        let m_t = T::from_usize_lossy(m);
        let local_mean = sum / m_t;
        let correction = (m_t / (m_t - T::one())).sqrt();
        residuals.push((correction * (values[i] - local_mean)).abs());
    }
    if residuals.is_empty() {
        return Err(CrispError::DegenerateData(
            "every point is isolated; no residuals available".into(),
        ));
    }
    let sigma = T::from_f64_lossy(MAD_CONSTANT) * median(&mut residuals);
    if sigma <= T::zero() {
        return Err(CrispError::DegenerateData(
            "robust scale estimate is zero".into(),
        ));
    }
    Ok(sigma)
}

/// Divides all responses by the scale estimate; locations are unchanged.
pub fn standardize<T: Scalar>(ds: &LabeledDataset<T>, sigma: T) -> Result<LabeledDataset<T>> {
    // Negated so a NaN scale is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(sigma > T::zero()) {
        return Err(CrispError::invalid("scale must be positive"));
    }
    ds.with_values(ds.values().iter().map(|v| *v / sigma).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{draw_standard_normal, stream_rng};
    use crate::sphere::sample_uniform_sphere;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn uniform_points(n: usize, seed: u64) -> Vec<UnitVector<f64>> {
        let mut rng = stream_rng(seed, 40);
        (0..n).map(|_| sample_uniform_sphere(&mut rng, 3)).collect()
    }

    fn latitude_grid(step: f64) -> GeoGrid<f64> {
        let lats: Vec<f64> = {
            let mut v = vec![];
            let mut lat = -90.0 + step / 2.0;
            while lat < 90.0 {
                v.push(lat);
                lat += step;
            }
            v
        };
        let lons: Vec<f64> = {
            let mut v = vec![];
            let mut lon = -180.0 + step / 2.0;
            while lon < 180.0 {
                v.push(lon);
                lon += step;
            }
            v
        };
        let mut values = Vec::new();
        for &lat in &lats {
            for _ in &lons {
                values.push(Some(lat));
            }
        }
        GeoGrid::new(lats, lons, values).unwrap()
    }

    #[test]
    fn snap_returns_cell_values_near_truth() {
        let grid = latitude_grid(2.0);
        let points = uniform_points(500, 1);
        let snapped = snap_to_grid(&points, &grid).unwrap();
        for (p, v) in points.iter().zip(&snapped) {
            let (lat, _) = to_lat_lon(p).unwrap();
            let got = v.expect("full grid has no missing cells");
            assert!((got - lat).abs() <= 2.0, "lat {lat} snapped to {got}");
        }
    }

    #[test]
    fn snap_exact_center_and_fill_grid() {
        let grid = GeoGrid::new(
            vec![-1.0, 1.0],
            vec![-1.0, 1.0],
            vec![Some(10.0), None, Some(30.0), Some(40.0)],
        )
        .unwrap();
        // Missing cell (-1, 1) falls back to the secondary grid.
        let fill = GeoGrid::new(
            vec![-1.0, 1.0],
            vec![-1.0, 1.0],
            vec![Some(-10.0), Some(-20.0), Some(-30.0), Some(-40.0)],
        )
        .unwrap();
        // Without the fill grid the missing cell yields nothing and the
        // point is dropped downstream.
        assert_eq!(grid.lookup(-1.0, 1.0), None);
        let grid = grid.with_fill(fill);
        assert_eq!(grid.lookup(-1.0, -1.0), Some(10.0));
        assert_eq!(grid.lookup(-1.0, 1.0), Some(-20.0));
        // Boundary tie (lat 0 equally near both rows) goes to the smaller
        // index.
        assert_eq!(grid.lookup(0.0, -1.0), Some(10.0));
    }

    #[test]
    fn lat_lon_round_trip() {
        // asin amplifies rounding near the poles; 1e-6 rad is far below the
        // grid resolutions this feeds.
        let points = uniform_points(100, 2);
        for p in &points {
            let (lat, lon) = to_lat_lon(p).unwrap();
            let q = from_lat_lon(lat, lon).unwrap();
            assert!(geodesic(p, &q).unwrap() < 1e-6);
        }
    }

    #[test]
    fn mst_two_points_and_collinear_triple() {
        let a = from_lat_lon(0.0, 0.0).unwrap();
        let b = from_lat_lon(0.0, 10.0).unwrap();
        let g = build_mst(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(g.mst_edges.len(), 1);
        assert_relative_eq!(g.d_max, g.mst_edges[0].2);
        // The single edge equals d_max, so each point is the other's
        // neighbour.
        assert_eq!(g.neighbor_lists[0], vec![1]);
        assert_eq!(g.neighbor_lists[1], vec![0]);

        // Three points on a great circle spaced 0.1 and 0.5 apart: the tree
        // keeps both short edges; only the 0.1 edge is within
        // d_max = 0.3.
        let deg = 180.0 / std::f64::consts::PI;
        let p0 = from_lat_lon(0.0, 0.0).unwrap();
        let p1 = from_lat_lon(0.0, 0.1 * deg).unwrap();
        let p2 = from_lat_lon(0.0, 0.6 * deg).unwrap();
        let g = build_mst(&[p0, p1, p2]).unwrap();
        let mut lengths: Vec<f64> = g.mst_edges.iter().map(|e| e.2).collect();
        lengths.sort_by(f64::total_cmp);
        assert_relative_eq!(lengths[0], 0.1, epsilon = 1e-9);
        assert_relative_eq!(lengths[1], 0.5, epsilon = 1e-9);
        assert_relative_eq!(g.d_max, 0.3, epsilon = 1e-9);
        assert_eq!(g.neighbor_lists[0], vec![1]);
        assert_eq!(g.neighbor_lists[1], vec![0]);
        assert!(g.neighbor_lists[2].is_empty());
    }

    #[test]
    fn mst_total_length_beats_random_spanning_trees() {
        let points = uniform_points(40, 3);
        let g = build_mst(&points).unwrap();
        let mst_total: f64 = g.mst_edges.iter().map(|e| e.2).sum();
        let mut rng = stream_rng(3, 41);
        for _ in 0..100 {
            // Random spanning tree: attach each node (in random order) to a
            // random earlier node.
            let mut order: Vec<usize> = (0..points.len()).collect();
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let mut total = 0.0;
            for (pos, &node) in order.iter().enumerate().skip(1) {
                let anchor = order[rng.random_range(0..pos)];
                total += geodesic(&points[node], &points[anchor]).unwrap();
            }
            assert!(mst_total <= total + 1e-9);
        }
    }

    #[test]
    fn mst_is_invariant_to_relabeling() {
        let points = uniform_points(30, 4);
        let g = build_mst(&points).unwrap();
        let mut perm: Vec<usize> = (0..points.len()).collect();
        perm.reverse();
        let relabeled: Vec<UnitVector<f64>> =
            perm.iter().map(|&i| points[i].clone()).collect();
        let g2 = build_mst(&relabeled).unwrap();
        let mut edges1: Vec<(usize, usize)> =
            g.mst_edges.iter().map(|&(i, j, _)| (i, j)).collect();
        // Map second tree's edges back through the permutation.
        let mut edges2: Vec<(usize, usize)> = g2
            .mst_edges
            .iter()
            .map(|&(i, j, _)| {
                let (a, b) = (perm[i], perm[j]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges1.sort_unstable();
        edges2.sort_unstable();
        assert_eq!(edges1, edges2);
    }

    #[test]
    fn robust_scale_recovers_noise_level() {
        let mut ratios = Vec::new();
        for rep in 0..5 {
            let points = uniform_points(2000, 100 + rep);
            let mut rng = stream_rng(200 + rep, 0);
            let sigma = 1.7;
            let values: Vec<f64> = (0..points.len())
                .map(|_| sigma * draw_standard_normal::<f64, _>(&mut rng))
                .collect();
            let graph = build_mst(&points).unwrap();
            let est = robust_scale(&values, &graph).unwrap();
            ratios.push(est / sigma);
        }
        for r in &ratios {
            assert!((0.9..=1.1).contains(r), "ratio {r}");
        }
    }

    #[test]
    fn robust_scale_resists_strong_mean_shift() {
        use crate::sphere::Disc;
        for rep in 0..5 {
            let points = uniform_points(800, 300 + rep);
            let mut rng = stream_rng(400 + rep, 0);
            // Shift of 10 sigma over roughly 20% of the sphere
            // (cap with cos radius 0.6).
            let region = Disc::new(UnitVector::basis(3, 2), 0.6).unwrap();
            let values: Vec<f64> = points
                .iter()
                .map(|p| {
                    let shift = if region.contains(p).unwrap() { 10.0 } else { 0.0 };
                    shift + draw_standard_normal::<f64, _>(&mut rng)
                })
                .collect();
            let graph = build_mst(&points).unwrap();
            let est = robust_scale(&values, &graph).unwrap();
            assert!((0.9..=1.2).contains(&est), "estimate {est}");
        }
    }

    #[test]
    fn robust_scale_degenerate_inputs() {
        let points = uniform_points(50, 5);
        let graph = build_mst(&points).unwrap();
        assert!(matches!(
            robust_scale(&vec![2.5; 50], &graph),
            Err(CrispError::DegenerateData(_))
        ));
    }

    #[test]
    fn robust_scale_equivariances_are_exact() {
        // Power-of-two scaling and integer-valued data with an integer
        // shift keep every intermediate exactly representable, so these
        // identities hold to the last bit; generic inputs are covered by
        // the relative check below.
        let points = uniform_points(300, 6);
        let mut rng = stream_rng(7, 0);
        let ints: Vec<f64> = (0..300)
            .map(|_| rng.random_range(-50i64..=50) as f64)
            .collect();
        let graph = build_mst(&points).unwrap();
        let base_int = robust_scale(&ints, &graph).unwrap();
        let scaled_int: Vec<f64> = ints.iter().map(|v| -4.0 * v).collect();
        assert_eq!(robust_scale(&scaled_int, &graph).unwrap(), 4.0 * base_int);
        let shifted_int: Vec<f64> = ints.iter().map(|v| v + 256.0).collect();
        assert_eq!(robust_scale(&shifted_int, &graph).unwrap(), base_int);

        let values: Vec<f64> = (0..300).map(|_| draw_standard_normal(&mut rng)).collect();
        let base = robust_scale(&values, &graph).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| -3.0 * v).collect();
        let scaled_est = robust_scale(&scaled, &graph).unwrap();
        assert!((scaled_est - 3.0 * base).abs() <= 1e-12 * base);
        let shifted: Vec<f64> = values.iter().map(|v| v + 42.0).collect();
        let shifted_est = robust_scale(&shifted, &graph).unwrap();
        assert!((shifted_est - base).abs() <= 1e-12 * base);
    }

    #[test]
    fn standardize_divides_values() {
        let points = uniform_points(10, 8);
        let ds = LabeledDataset::new(points, (0..10).map(|i| i as f64).collect()).unwrap();
        let out = standardize(&ds, 2.0).unwrap();
        assert_relative_eq!(out.value(4), 2.0);
        let identity = standardize(&ds, 1.0).unwrap();
        assert_eq!(identity.values(), ds.values());
        assert!(standardize(&ds, 0.0).is_err());
    }

    #[test]
    fn standardization_is_idempotent_up_to_noise() {
        let points = uniform_points(800, 9);
        let mut rng = stream_rng(10, 0);
        let values: Vec<f64> = (0..800)
            .map(|_| 3.0 * draw_standard_normal::<f64, _>(&mut rng))
            .collect();
        let graph = build_mst(&points).unwrap();
        let ds = LabeledDataset::new(points, values).unwrap();
        let sigma1 = robust_scale(ds.values(), &graph).unwrap();
        let once = standardize(&ds, sigma1).unwrap();
        let sigma2 = robust_scale(once.values(), &graph).unwrap();
        assert!((0.9..=1.1).contains(&sigma2), "second-pass scale {sigma2}");
    }
}
