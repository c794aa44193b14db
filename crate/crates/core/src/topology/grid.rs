use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::TopologyError;
use crate::revocation::{ClusterId, RsuId};

/// Numerical slack for points sitting exactly on a coverage circle.
const COVERAGE_EPS_M: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCell {
    pub id: ClusterId,
    pub row: usize,
    pub col: usize,
    pub bbox: BoundingBox,
    pub rsus: Vec<RsuId>,
}

impl ClusterCell {
    pub fn center(&self) -> Point {
        self.bbox.center()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RsuRole {
    /// Guards entries into its own cluster from `faces`.
    BorderGuard { faces: ClusterId },
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsuPlacement {
    pub id: RsuId,
    pub cluster: ClusterId,
    pub position: Point,
    pub role: RsuRole,
}

impl RsuPlacement {
    pub fn faces(&self) -> Option<ClusterId> {
        match self.role {
            RsuRole::BorderGuard { faces } => Some(faces),
            RsuRole::Interior => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Corner {
    SouthWest,
    SouthEast,
    NorthWest,
    NorthEast,
}

/// A corner of a cluster's square lying outside its LCA's coverage disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GreyAreaRegion {
    pub cluster: ClusterId,
    pub corner: Corner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Cluster(ClusterId),
    GreyArea(GreyAreaRegion),
}

fn default_side() -> f64 {
    2000.0
}
fn default_one() -> usize {
    1
}
fn default_radius() -> f64 {
    1000.0
}

/// Layout parameters. `labels` assigns cluster ids row by row (row 0 is the
/// southern row); by default clusters are numbered 1.. in row-major order.
/// `rsu_names` renames generated RSUs: keys are `"<owner>><faced>"`,
/// `"<owner>><faced>#<k>"` for the k-th guard on a border, or `"<owner>:i<k>"`
/// for interior units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_side")]
    pub cluster_side_m: f64,
    #[serde(default = "default_one")]
    pub rsus_per_border: usize,
    #[serde(default)]
    pub interior_rsus: usize,
    #[serde(default = "default_radius")]
    pub coverage_radius_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rsu_names: BTreeMap<String, String>,
}

impl GridSpec {
    pub fn uniform(rows: usize, cols: usize, cluster_side_m: f64, rsus_per_border: usize) -> Self {
        GridSpec {
            rows,
            cols,
            cluster_side_m,
            rsus_per_border,
            interior_rsus: 0,
            coverage_radius_m: default_radius(),
            labels: None,
            rsu_names: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterGrid {
    pub rows: usize,
    pub cols: usize,
    pub cluster_side_m: f64,
    pub coverage_radius_m: f64,
    cells: Vec<ClusterCell>,
    by_id: BTreeMap<ClusterId, usize>,
    rsus: BTreeMap<RsuId, RsuPlacement>,
}

pub fn build_grid(spec: &GridSpec) -> Result<ClusterGrid, TopologyError> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(TopologyError::BadDimensions("rows and cols must be at least 1".into()));
    }
    if !(spec.cluster_side_m > 0.0) {
        return Err(TopologyError::BadDimensions("cluster_side_m must be positive".into()));
    }
    if !(spec.coverage_radius_m > 0.0) {
        return Err(TopologyError::BadDimensions("coverage_radius_m must be positive".into()));
    }
    if spec.rsus_per_border == 0 && spec.rows * spec.cols > 1 {
        return Err(TopologyError::BadDimensions(
            "every shared border needs at least one guard RSU".into(),
        ));
    }
    let side = spec.cluster_side_m;

    let label_of = |r: usize, c: usize| -> Result<ClusterId, TopologyError> {
        match &spec.labels {
            None => Ok(ClusterId((r * spec.cols + c + 1) as u32)),
            Some(rows) => rows
                .get(r)
                .and_then(|row| row.get(c))
                .map(|l| ClusterId(*l))
                .ok_or_else(|| TopologyError::BadDimensions(format!("labels missing for row {r} col {c}"))),
        }
    };
    if let Some(rows) = &spec.labels {
        if rows.len() != spec.rows || rows.iter().any(|r| r.len() != spec.cols) {
            return Err(TopologyError::BadDimensions("labels must be rows x cols".into()));
        }
    }

    let mut cells = Vec::with_capacity(spec.rows * spec.cols);
    let mut by_id = BTreeMap::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let id = label_of(r, c)?;
            if by_id.insert(id, cells.len()).is_some() {
                return Err(TopologyError::BadDimensions(format!("duplicate cluster label {id}")));
            }
            cells.push(ClusterCell {
                id,
                row: r,
                col: c,
                bbox: BoundingBox {
                    min: Point::new(c as f64 * side, r as f64 * side),
                    max: Point::new((c + 1) as f64 * side, (r + 1) as f64 * side),
                },
                rsus: Vec::new(),
            });
        }
    }

    // (key, placement) in generation order
    let mut generated: Vec<(String, RsuPlacement)> = Vec::new();
    let n = spec.rsus_per_border;
    for idx in 0..cells.len() {
        let (r, c) = (cells[idx].row, cells[idx].col);
        let owner = cells[idx].id;
        let mut edges: Vec<(usize, Point, Point)> = Vec::new();
        let bb = cells[idx].bbox;
        if r > 0 {
            edges.push(((r - 1) * spec.cols + c, bb.min, Point::new(bb.max.x, bb.min.y)));
        }
        if c > 0 {
            edges.push((r * spec.cols + c - 1, bb.min, Point::new(bb.min.x, bb.max.y)));
        }
        if c + 1 < spec.cols {
            edges.push((r * spec.cols + c + 1, Point::new(bb.max.x, bb.min.y), bb.max));
        }
        if r + 1 < spec.rows {
            edges.push(((r + 1) * spec.cols + c, Point::new(bb.min.x, bb.max.y), bb.max));
        }
        for (other, a, b) in edges {
            let faced = cells[other].id;
            for k in 0..n {
                let f = (k + 1) as f64 / (n + 1) as f64;
                let position = Point::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f);
                let (key, name) = if n == 1 {
                    (format!("{owner}>{faced}"), format!("RSU{owner}-{faced}"))
                } else {
                    (format!("{owner}>{faced}#{k}"), format!("RSU{owner}-{faced}.{k}"))
                };
                generated.push((
                    key,
                    RsuPlacement {
                        id: RsuId::new(name),
                        cluster: owner,
                        position,
                        role: RsuRole::BorderGuard { faces: faced },
                    },
                ));
            }
        }
        for k in 0..spec.interior_rsus {
            let f = (k + 1) as f64 / (spec.interior_rsus + 1) as f64;
            let position = Point::new(bb.min.x + side * f, bb.center().y);
            generated.push((
                format!("{owner}:i{k}"),
                RsuPlacement {
                    id: RsuId::new(format!("RSU{owner}-i{k}")),
                    cluster: owner,
                    position,
                    role: RsuRole::Interior,
                },
            ));
        }
    }

    let mut unused: BTreeSet<&String> = spec.rsu_names.keys().collect();
    let mut rsus = BTreeMap::new();
    for (key, mut placement) in generated {
        if let Some(name) = spec.rsu_names.get(&key) {
            unused.remove(&key);
            placement.id = RsuId::new(name.clone());
        }
        let cell = by_id[&placement.cluster];
        cells[cell].rsus.push(placement.id.clone());
        if rsus.insert(placement.id.clone(), placement).is_some() {
            return Err(TopologyError::BadDimensions(format!("duplicate RSU name for key {key}")));
        }
    }
    if let Some(key) = unused.into_iter().next() {
        return Err(TopologyError::BadDimensions(format!("rsu_names key {key:?} matches no RSU")));
    }

    Ok(ClusterGrid {
        rows: spec.rows,
        cols: spec.cols,
        cluster_side_m: side,
        coverage_radius_m: spec.coverage_radius_m,
        cells,
        by_id,
        rsus,
    })
}

impl ClusterGrid {
    pub fn width(&self) -> f64 {
        self.cols as f64 * self.cluster_side_m
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.cluster_side_m
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width() && p.y <= self.height()
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ClusterCell> {
        self.by_id.values().map(|&i| &self.cells[i])
    }

    pub fn cluster_ids(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.by_id.keys().copied()
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&ClusterCell> {
        self.by_id.get(&id).map(|&i| &self.cells[i])
    }

    pub fn rsus(&self) -> impl Iterator<Item = &RsuPlacement> {
        self.rsus.values()
    }

    pub fn rsu(&self, id: &RsuId) -> Option<&RsuPlacement> {
        self.rsus.get(id)
    }

    fn cell_at(&self, r: usize, c: usize) -> &ClusterCell {
        &self.cells[r * self.cols + c]
    }

    /// Clusters sharing an edge with `id`.
    pub fn neighbors(&self, id: ClusterId) -> BTreeSet<ClusterId> {
        let Some(cell) = self.cluster(id) else {
            return BTreeSet::new();
        };
        let (r, c) = (cell.row, cell.col);
        let mut out = BTreeSet::new();
        if r > 0 {
            out.insert(self.cell_at(r - 1, c).id);
        }
        if r + 1 < self.rows {
            out.insert(self.cell_at(r + 1, c).id);
        }
        if c > 0 {
            out.insert(self.cell_at(r, c - 1).id);
        }
        if c + 1 < self.cols {
            out.insert(self.cell_at(r, c + 1).id);
        }
        out
    }

    pub fn are_adjacent(&self, a: ClusterId, b: ClusterId) -> bool {
        self.neighbors(a).contains(&b)
    }

    fn index_candidates(v: f64, side: f64, count: usize) -> Vec<usize> {
        let q = v / side;
        let k = q.floor();
        if q == k && k > 0.0 && (k as usize) < count {
            vec![k as usize - 1, k as usize]
        } else {
            vec![(k as usize).min(count - 1)]
        }
    }

    /// Owning cluster by bounding box; points on a shared edge or corner go to
    /// the lowest cluster id touching them.
    pub fn owner_of(&self, p: Point) -> Option<ClusterId> {
        if !self.contains(p) {
            return None;
        }
        let cols = Self::index_candidates(p.x, self.cluster_side_m, self.cols);
        let rows = Self::index_candidates(p.y, self.cluster_side_m, self.rows);
        rows.iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.cell_at(r, c).id)
            .min()
    }

    pub fn covers(&self, cluster: ClusterId, p: Point) -> bool {
        self.cluster(cluster)
            .is_some_and(|cell| cell.center().distance(p) <= self.coverage_radius_m + COVERAGE_EPS_M)
    }

    pub fn locate(&self, p: Point) -> Result<Location, TopologyError> {
        let owner = self.owner_of(p).ok_or(TopologyError::OutOfBounds { x: p.x, y: p.y })?;
        if self.covers(owner, p) {
            return Ok(Location::Cluster(owner));
        }
        let center = self.cluster(owner).expect("owner exists").center();
        let corner = match (p.x >= center.x, p.y >= center.y) {
            (false, false) => Corner::SouthWest,
            (true, false) => Corner::SouthEast,
            (false, true) => Corner::NorthWest,
            (true, true) => Corner::NorthEast,
        };
        Ok(Location::GreyArea(GreyAreaRegion {
            cluster: owner,
            corner,
        }))
    }

    /// The clusters whose squares touch a grey region: its owner plus the
    /// neighbors across the two edges meeting at that corner.
    pub fn region_clusters(&self, region: GreyAreaRegion) -> BTreeSet<ClusterId> {
        let mut out = BTreeSet::from([region.cluster]);
        let Some(cell) = self.cluster(region.cluster) else {
            return out;
        };
        let (r, c) = (cell.row as isize, cell.col as isize);
        let (dr, dc) = match region.corner {
            Corner::SouthWest => (-1, -1),
            Corner::SouthEast => (-1, 1),
            Corner::NorthWest => (1, -1),
            Corner::NorthEast => (1, 1),
        };
        for (rr, cc) in [(r + dr, c), (r, c + dc), (r + dr, c + dc)] {
            if rr >= 0 && cc >= 0 && (rr as usize) < self.rows && (cc as usize) < self.cols {
                out.insert(self.cell_at(rr as usize, cc as usize).id);
            }
        }
        out
    }

    /// Guard of `owner` facing `faced` closest to `near`.
    pub fn guard_rsu(&self, owner: ClusterId, faced: ClusterId, near: Point) -> Option<&RsuPlacement> {
        self.rsus
            .values()
            .filter(|p| p.cluster == owner && p.faces() == Some(faced))
            .min_by(|a, b| a.position.distance(near).total_cmp(&b.position.distance(near)))
    }

    pub fn nearest_rsu(&self, cluster: ClusterId, near: Point) -> Option<&RsuPlacement> {
        self.rsus
            .values()
            .filter(|p| p.cluster == cluster)
            .min_by(|a, b| a.position.distance(near).total_cmp(&b.position.distance(near)))
    }

    pub fn nearest_rsu_anywhere(&self, near: Point) -> Option<&RsuPlacement> {
        self.rsus
            .values()
            .min_by(|a, b| a.position.distance(near).total_cmp(&b.position.distance(near)))
    }

    pub fn rsus_of(&self, cluster: ClusterId) -> BTreeSet<RsuId> {
        self.rsus
            .values()
            .filter(|p| p.cluster == cluster)
            .map(|p| p.id.clone())
            .collect()
    }

    /// RSUs in other clusters that hold this cluster's list in their NCCL.
    pub fn rsus_facing(&self, cluster: ClusterId) -> BTreeSet<RsuId> {
        self.rsus
            .values()
            .filter(|p| p.faces() == Some(cluster))
            .map(|p| p.id.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize) -> ClusterGrid {
        build_grid(&GridSpec::uniform(rows, cols, 2000.0, 1)).unwrap()
    }

    #[test]
    fn one_by_two_has_a_guard_each_side() {
        let g = grid(1, 2);
        assert_eq!(g.clusters().count(), 2);
        assert!(g.are_adjacent(ClusterId(1), ClusterId(2)));
        let guards: Vec<_> = g.rsus().filter(|r| r.faces().is_some()).collect();
        assert_eq!(guards.len(), 2);
        assert_eq!(g.rsus_facing(ClusterId(1)).len(), 1);
        assert_eq!(g.rsus_facing(ClusterId(2)).len(), 1);
        assert_eq!(guards[0].position, Point::new(2000.0, 1000.0));
    }

    #[test]
    fn interior_cluster_of_three_by_three() {
        let g = grid(3, 3);
        assert_eq!(g.neighbors(ClusterId(5)).len(), 4);
        assert_eq!(g.neighbors(ClusterId(1)).len(), 2);
        assert_eq!(g.rsus_of(ClusterId(5)).len(), 4);
    }

    #[test]
    fn half_diagonal_exceeds_coverage() {
        let g = grid(1, 1);
        let center = g.cluster(ClusterId(1)).unwrap().center();
        let far = (0..=20)
            .flat_map(|i| (0..=20).map(move |j| Point::new(i as f64 * 100.0, j as f64 * 100.0)))
            .map(|p| p.distance(center))
            .fold(0.0, f64::max);
        assert!((far - 1000.0 * 2f64.sqrt()).abs() < 1e-9);
        assert!(far < 1415.0);
        assert!(far > g.coverage_radius_m);
    }

    #[test]
    fn locate_cases() {
        let g = grid(1, 2);
        assert_eq!(g.locate(Point::new(1000.0, 1000.0)).unwrap(), Location::Cluster(ClusterId(1)));
        assert_eq!(
            g.locate(Point::new(0.0, 0.0)).unwrap(),
            Location::GreyArea(GreyAreaRegion { cluster: ClusterId(1), corner: Corner::SouthWest })
        );
        // shared-edge midpoint: 1000 m from both centers, lower id owns it
        assert_eq!(g.locate(Point::new(2000.0, 1000.0)).unwrap(), Location::Cluster(ClusterId(1)));
        assert!(matches!(
            g.locate(Point::new(5000.0, 0.0)),
            Err(TopologyError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn labels_and_renames() {
        let mut spec = GridSpec::uniform(2, 3, 2000.0, 1);
        spec.labels = Some(vec![vec![2, 1, 5], vec![3, 6, 4]]);
        spec.rsu_names.insert("1>6".into(), "RSU4".into());
        let g = build_grid(&spec).unwrap();
        assert_eq!(g.neighbors(ClusterId(1)), BTreeSet::from([ClusterId(2), ClusterId(5), ClusterId(6)]));
        let rsu4 = g.rsu(&RsuId::new("RSU4")).unwrap();
        assert_eq!(rsu4.cluster, ClusterId(1));
        assert_eq!(rsu4.faces(), Some(ClusterId(6)));
        assert_eq!(rsu4.position, Point::new(3000.0, 2000.0));

        spec.rsu_names.insert("1>4".into(), "X".into());
        assert!(build_grid(&spec).is_err());
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(build_grid(&GridSpec::uniform(0, 2, 2000.0, 1)).is_err());
        assert!(build_grid(&GridSpec::uniform(1, 2, 2000.0, 0)).is_err());
        assert!(build_grid(&GridSpec::uniform(1, 1, 2000.0, 0)).is_ok());
    }

    #[test]
    fn grey_region_touches_corner_neighbors() {
        let g = grid(3, 3);
        let region = GreyAreaRegion { cluster: ClusterId(5), corner: Corner::NorthEast };
        assert_eq!(
            g.region_clusters(region),
            BTreeSet::from([ClusterId(5), ClusterId(6), ClusterId(8), ClusterId(9)])
        );
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn locate_is_total_and_partitions(x in 0.0f64..6000.0, y in 0.0f64..6000.0) {
            let g = build_grid(&GridSpec::uniform(3, 3, 2000.0, 1)).unwrap();
            let p = Point::new(x, y);
            let loc = g.locate(p).unwrap();
            prop_assert_eq!(loc, g.locate(p).unwrap());
            let covering: Vec<ClusterId> = g.cluster_ids().filter(|c| g.covers(*c, p)).collect();
            match loc {
                Location::Cluster(c) => prop_assert!(covering.contains(&c)),
                Location::GreyArea(region) => prop_assert!(!g.covers(region.cluster, p)),
            }
        }
    }
}
