//! Great-circle distances and a uniform-grid index for radius and k-nearest
//! queries over a fixed set of places.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// IUGG mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

const M_PER_DEG_LAT: f64 = EARTH_RADIUS_M * PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("grid cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
}

/// A WGS-84 coordinate in degrees. Always finite and in range.
#[derive(Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
            Ok(GeoPoint { lat, lon })
        } else {
            Err(GeoError::InvalidCoordinate { lat, lon })
        }
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl fmt::Debug for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// Haversine great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp * 0.5).sin().powi(2) + p1.cos() * p2.cos() * (dl * 0.5).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.min(1.0).sqrt().asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

/// Uniform lat/lon grid over a dense set of points (`id` = position in the
/// slice passed to [`GridIndex::build`]). Immutable once built.
///
/// Cells are sized in meters at the mean latitude of the indexed points.
/// Queries derive their cell window from the query latitude, so results are
/// exact everywhere; the cell size only affects speed.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size_m: f64,
    cell_lat_deg: f64,
    cell_lon_deg: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
    points: Vec<GeoPoint>,
    bounds: Option<BoundingBox>,
}

impl GridIndex {
    pub fn build(points: &[GeoPoint], cell_size_m: f64) -> Result<Self, GeoError> {
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(GeoError::InvalidCellSize(cell_size_m));
        }
        let mean_lat =
            if points.is_empty() { 0.0 } else { points.iter().map(|p| p.lat).sum::<f64>() / points.len() as f64 };
        let cell_lat_deg = cell_size_m / M_PER_DEG_LAT;
        let cell_lon_deg = (cell_size_m / (M_PER_DEG_LAT * mean_lat.to_radians().cos().max(1e-6))).min(360.0);

        let mut index = GridIndex {
            cell_size_m,
            cell_lat_deg,
            cell_lon_deg,
            buckets: HashMap::new(),
            points: points.to_vec(),
            bounds: None,
        };
        let mut bounds: Option<BoundingBox> = None;
        for (id, p) in points.iter().enumerate() {
            let cell = index.cell_of(p.lat, p.lon);
            index.buckets.entry(cell).or_default().push(id as u32);
            bounds = Some(match bounds {
                None => BoundingBox { min_lat: p.lat, max_lat: p.lat, min_lon: p.lon, max_lon: p.lon },
                Some(b) => BoundingBox {
                    min_lat: b.min_lat.min(p.lat),
                    max_lat: b.max_lat.max(p.lat),
                    min_lon: b.min_lon.min(p.lon),
                    max_lon: b.max_lon.max(p.lon),
                },
            });
        }
        index.bounds = bounds;
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn bounds(&self) -> Option<BoundingBox> {
        self.bounds
    }

    pub fn point(&self, id: u32) -> GeoPoint {
        self.points[id as usize]
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Iterates bucket contents; used by tests to check the one-bucket-per-point invariant.
    pub fn buckets(&self) -> impl Iterator<Item = (&(i64, i64), &[u32])> {
        self.buckets.iter().map(|(k, v)| (k, v.as_slice()))
    }

    #[inline]
    fn cell_of(&self, lat: f64, lon: f64) -> (i64, i64) {
        ((lat / self.cell_lat_deg).floor() as i64, (lon / self.cell_lon_deg).floor() as i64)
    }

    /// Calls `visit` with every id that could lie within `radius_m` of `q`.
    /// Superset of the true answer; callers filter by distance.
    fn for_each_candidate(&self, q: GeoPoint, radius_m: f64, mut visit: impl FnMut(u32)) {
        let slack = 1.0 + 1e-9;
        let lat_span = radius_m / M_PER_DEG_LAT * slack + 1e-12;
        let far_lat = (q.lat.abs() + lat_span).min(90.0);
        let half_angle = (radius_m / (2.0 * EARTH_RADIUS_M)).min(PI / 2.0);
        let cos_far = far_lat.to_radians().cos();
        let ratio = half_angle.sin() / cos_far;

        let full_scan = |visit: &mut dyn FnMut(u32)| {
            for id in 0..self.points.len() as u32 {
                visit(id);
            }
        };
        if far_lat >= 90.0 || ratio.is_nan() || ratio >= 1.0 {
            return full_scan(&mut visit);
        }
        let lon_span = (2.0 * ratio.asin()).to_degrees() * slack + 1e-12;
        if q.lon - lon_span < -180.0 || q.lon + lon_span > 180.0 {
            return full_scan(&mut visit);
        }
        let (r0, c0) = self.cell_of(q.lat - lat_span, q.lon - lon_span);
        let (r1, c1) = self.cell_of(q.lat + lat_span, q.lon + lon_span);
        let n_cells = (r1 - r0 + 1).saturating_mul(c1 - c0 + 1);
        if n_cells as usize > self.buckets.len() {
            for (&(r, c), ids) in &self.buckets {
                if (r0..=r1).contains(&r) && (c0..=c1).contains(&c) {
                    ids.iter().for_each(|&id| visit(id));
                }
            }
            return;
        }
        for r in r0..=r1 {
            for c in c0..=c1 {
                if let Some(ids) = self.buckets.get(&(r, c)) {
                    ids.iter().for_each(|&id| visit(id));
                }
            }
        }
    }

    /// All indexed points within `radius_m` of `q`, unordered.
    pub fn within(&self, q: GeoPoint, radius_m: f64) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        self.for_each_candidate(q, radius_m, |id| {
            let d = haversine_m(q, self.points[id as usize]);
            if d <= radius_m {
                out.push((id, d));
            }
        });
        out
    }

    /// Closest point within `radius_m`; equal distances resolve to the smaller id.
    pub fn nearest_within(&self, q: GeoPoint, radius_m: f64) -> Option<(u32, f64)> {
        let mut best: Option<(u32, f64)> = None;
        self.for_each_candidate(q, radius_m, |id| {
            let d = haversine_m(q, self.points[id as usize]);
            if d <= radius_m && better(id, d, best) {
                best = Some((id, d));
            }
        });
        best
    }

    /// The `k` closest points to `q`, optionally skipping one id, ordered by
    /// (distance, id).
    pub fn k_nearest(&self, q: GeoPoint, k: usize, exclude: Option<u32>) -> Vec<(u32, f64)> {
        let available = self.points.len() - exclude.map_or(0, |e| usize::from((e as usize) < self.points.len()));
        let k = k.min(available);
        if k == 0 {
            return Vec::new();
        }
        let mut radius = self.cell_size_m;
        loop {
            let mut found = self.within(q, radius);
            found.retain(|&(id, _)| Some(id) != exclude);
            if found.len() >= k || radius >= PI * EARTH_RADIUS_M {
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                found.truncate(k);
                return found;
            }
            radius *= 2.0;
        }
    }
}

#[inline]
fn better(id: u32, d: f64, best: Option<(u32, f64)>) -> bool {
    match best {
        None => true,
        Some((bid, bd)) => d < bd || (d == bd && id < bid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(90.0, 180.0).is_ok());
    }

    #[test]
    fn haversine_identity_and_antipode() {
        let a = p(40.7, -73.9);
        assert_eq!(haversine_m(a, a), 0.0);
        let d = haversine_m(p(0.0, 0.0), p(0.0, 180.0));
        assert!((d - PI * EARTH_RADIUS_M).abs() < 1e-6);
        assert!((d - 20_015_114.0).abs() < 1.0);
    }

    #[test]
    fn haversine_matches_reference_calculator() {
        // Reference value from an independent haversine evaluation (R = 6371008.8 m).
        let expected = 1067.6056978763934;
        let d = haversine_m(p(40.7580, -73.9855), p(40.7484, -73.9857));
        assert!((d - expected).abs() / expected < 1e-3, "{d}");
    }

    #[test]
    fn nearest_at_exact_coordinates() {
        let pts = vec![p(40.75, -73.99), p(40.76, -73.98), p(40.70, -74.0)];
        let idx = GridIndex::build(&pts, 200.0).unwrap();
        assert_eq!(idx.nearest_within(pts[1], 200.0), Some((1, 0.0)));
        assert_eq!(idx.nearest_within(p(41.5, -73.0), 200.0), None);
    }

    #[test]
    fn empty_index_returns_none() {
        let idx = GridIndex::build(&[], 200.0).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.nearest_within(p(0.0, 0.0), 1e6), None);
        assert!(idx.k_nearest(p(0.0, 0.0), 3, None).is_empty());
    }

    #[test]
    fn tie_resolves_to_smaller_id() {
        let pts = vec![p(0.0, 0.001), p(0.0, -0.001)];
        let idx = GridIndex::build(&pts, 200.0).unwrap();
        let (id, _) = idx.nearest_within(p(0.0, 0.0), 500.0).unwrap();
        assert_eq!(id, 0);
        let pts = vec![p(0.0, -0.001), p(0.0, 0.001)];
        let idx = GridIndex::build(&pts, 200.0).unwrap();
        assert_eq!(idx.nearest_within(p(0.0, 0.0), 500.0).unwrap().0, 0);
    }

    #[test]
    fn every_point_in_exactly_one_bucket() {
        let pts: Vec<_> = (0..500).map(|i| p(40.0 + (i % 37) as f64 * 1e-3, -74.0 + (i % 91) as f64 * 1e-3)).collect();
        let idx = GridIndex::build(&pts, 200.0).unwrap();
        let mut seen = vec![0u32; pts.len()];
        for (_, ids) in idx.buckets() {
            for &id in ids {
                seen[id as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn polar_and_antimeridian_queries_fall_back_to_scan() {
        let pts = vec![p(89.9999, 10.0), p(0.0, 179.9999), p(0.0, -179.9999)];
        let idx = GridIndex::build(&pts, 200.0).unwrap();
        assert_eq!(idx.nearest_within(p(90.0, -170.0), 50.0).map(|r| r.0), Some(0));
        let (id, d) = idx.nearest_within(p(0.0, 179.99995), 50.0).unwrap();
        assert_eq!(id, 1);
        assert!(d < 50.0);
        let (id, _) = idx.nearest_within(p(0.0, -179.99995), 12.0).unwrap();
        assert_eq!(id, 2);
    }
}
