//! Rook contiguity weights.
//!
//! A [`SpatialWeights`] stores, for each of `n` areas, its ascending list of
//! neighbours and the matching weights. Weights are either binary (1.0 per
//! neighbour) or row standardized (1 / degree), and nothing else: the JSON
//! reader rejects any other weighting so the spectrum used by the SAR
//! likelihood always matches the stored rows.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Grid step used to snap polygon vertices before matching shared edges.
const COORD_QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "WeightsFile", into = "WeightsFile")]
pub struct SpatialWeights {
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
    standardized: bool,
    eigenvalues: OnceLock<Vec<f64>>,
}

/// On-disk layout: `{n, neighbors, weights, standardized}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightsFile {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
    standardized: bool,
}

impl PartialEq for SpatialWeights {
    fn eq(&self, other: &Self) -> bool {
        self.neighbors == other.neighbors
            && self.weights == other.weights
            && self.standardized == other.standardized
    }
}

/// Outcome of reading an adjacency list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyReport {
    /// Number of reciprocal edges that were missing and had to be added.
    pub repaired_edges: usize,
}

impl SpatialWeights {
    /// Builds weights from raw neighbour lists.
    ///
    /// Lists are sorted and deduplicated; any edge listed in one direction
    /// only is mirrored. Returns the weights and the count of mirrored edges.
    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>, standardize: bool) -> Result<(Self, usize)> {
        let n = neighbors.len();
        if n == 0 {
            return Err(Error::InvalidParameter("weights need at least one area".into()));
        }
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if j >= n {
                    return Err(Error::InvalidParameter(format!(
                        "area {i} lists neighbour {j}, outside 0..{n}"
                    )));
                }
                if j == i {
                    return Err(Error::InvalidParameter(format!("area {i} lists itself as a neighbour")));
                }
            }
        }
        for list in neighbors.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }

        let mut missing = Vec::new();
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if neighbors[j].binary_search(&i).is_err() {
                    missing.push((j, i));
                }
            }
        }
        let repaired = missing.len();
        for (i, j) in missing {
            neighbors[i].push(j);
        }
        for list in neighbors.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }

        let weights = row_weights(&neighbors, standardize);
        Ok((
            Self { neighbors, weights, standardized: standardize, eigenvalues: OnceLock::new() },
            repaired,
        ))
    }

    /// Row-standardized rook contiguity on a `rows x cols` grid, areas
    /// numbered row-major.
    pub fn lattice_rook(rows: usize, cols: usize) -> Result<Self> {
        let n = rows.checked_mul(cols).ok_or(Error::InvalidDimension { rows, cols })?;
        if rows == 0 || cols == 0 || n < 2 {
            return Err(Error::InvalidDimension { rows, cols });
        }
        let mut neighbors = vec![Vec::with_capacity(4); n];
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if r > 0 {
                    neighbors[i].push(i - cols);
                }
                if c > 0 {
                    neighbors[i].push(i - 1);
                }
                if c + 1 < cols {
                    neighbors[i].push(i + 1);
                }
                if r + 1 < rows {
                    neighbors[i].push(i + cols);
                }
            }
        }
        let weights = row_weights(&neighbors, true);
        Ok(Self { neighbors, weights, standardized: true, eigenvalues: OnceLock::new() })
    }

    /// Square lattice with `n` areas; `n` must be a perfect square.
    pub fn square_lattice(n: usize) -> Result<Self> {
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n {
            return Err(Error::InvalidParameter(format!("{n} areas do not form a square lattice")));
        }
        Self::lattice_rook(side, side)
    }

    /// Parses the adjacency text format: one `id: neighbour neighbour ...`
    /// line per area, `#` starts a comment. Ids must cover `0..n` exactly.
    pub fn from_adjacency_str(content: &str) -> Result<(Self, AdjacencyReport)> {
        let mut rows: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for (idx, raw) in content.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, tail) = line.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `<id>: <neighbour ids>`".into(),
            })?;
            let id = parse_id(head.trim(), line_no)?;
            let mut list = Vec::new();
            for tok in tail.split_whitespace() {
                let j = parse_id(tok, line_no)?;
                if j == id {
                    return Err(Error::Parse { line: line_no, message: format!("area {id} lists itself") });
                }
                list.push(j);
            }
            rows.push((line_no, id, list));
        }
        if rows.is_empty() {
            return Err(Error::Parse { line: 0, message: "empty adjacency file".into() });
        }

        let n = rows.len();
        let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; n];
        for (line_no, id, list) in rows {
            if id >= n {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("id {id} is not consecutive: {n} areas need ids 0..{}", n - 1),
                });
            }
            if neighbors[id].is_some() {
                return Err(Error::Parse { line: line_no, message: format!("duplicate id {id}") });
            }
            if let Some(&bad) = list.iter().find(|&&j| j >= n) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("neighbour {bad} does not name an area (ids 0..{})", n - 1),
                });
            }
            neighbors[id] = Some(list);
        }
        // n distinct ids all below n: every slot is filled
        let neighbors: Vec<Vec<usize>> = neighbors.into_iter().map(Option::unwrap_or_default).collect();
        let (w, repaired_edges) = Self::from_neighbors(neighbors, true)?;
        Ok((w, AdjacencyReport { repaired_edges }))
    }

    /// Renders the adjacency text format read by [`Self::from_adjacency_str`].
    pub fn to_adjacency_string(&self) -> String {
        let mut out = String::new();
        for (i, list) in self.neighbors.iter().enumerate() {
            let _ = write!(out, "{i}:");
            for j in list {
                let _ = write!(out, " {j}");
            }
            out.push('\n');
        }
        out
    }

    /// Rook contiguity between the polygons of a GeoJSON FeatureCollection.
    ///
    /// Two features are neighbours when they share at least one boundary
    /// segment; touching at a single vertex does not count. Vertices are
    /// snapped to a 1e-9 grid before matching. Feature order gives area order.
    pub fn from_geojson(content: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(content).map_err(|e| Error::Ingest(format!("malformed JSON: {e}")))?;
        if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(Error::Ingest("top-level object is not a FeatureCollection".into()));
        }
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Ingest("FeatureCollection has no `features` array".into()))?;
        if features.len() < 2 {
            return Err(Error::Ingest(format!("need at least 2 features, found {}", features.len())));
        }

        type Point = (i64, i64);
        let mut owners: HashMap<(Point, Point), Vec<usize>> = HashMap::new();
        for (index, feature) in features.iter().enumerate() {
            let geometry = feature
                .get("geometry")
                .filter(|g| !g.is_null())
                .ok_or_else(|| Error::Ingest(format!("feature {index} has no geometry")))?;
            for ring in polygon_rings(geometry, index)? {
                for pair in ring.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    if a == b {
                        continue;
                    }
                    let key = if a < b { (a, b) } else { (b, a) };
                    let entry = owners.entry(key).or_default();
                    if entry.last() != Some(&index) {
                        entry.push(index);
                    }
                }
            }
        }

        let mut neighbors = vec![Vec::new(); features.len()];
        for areas in owners.values() {
            for &i in areas {
                for &j in areas {
                    if i != j {
                        neighbors[i].push(j);
                    }
                }
            }
        }
        Ok(Self::from_neighbors(neighbors, true)?.0)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn weights_row(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Largest row sum of W (1 for standardized weights with no islands).
    pub fn max_row_sum(&self) -> f64 {
        self.weights.iter().map(|row| row.iter().sum::<f64>()).fold(0.0, f64::max)
    }

    /// Same graph with the other weighting scheme.
    pub fn with_standardization(&self, standardize: bool) -> Self {
        Self {
            neighbors: self.neighbors.clone(),
            weights: row_weights(&self.neighbors, standardize),
            standardized: standardize,
            eigenvalues: OnceLock::new(),
        }
    }

    /// Breadth-first check that the graph has exactly one component.
    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        reached == n
    }

    /// Spatial lag `W y`.
    pub fn lag(&self, y: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .zip(&self.weights)
            .map(|(nb, w)| nb.iter().zip(w).map(|(&j, &wij)| wij * y[j]).sum())
            .collect()
    }

    /// Dense copy of W.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, (nb, w)) in self.neighbors.iter().zip(&self.weights).enumerate() {
            for (&j, &wij) in nb.iter().zip(w) {
                m[(i, j)] = wij;
            }
        }
        m
    }

    /// Eigenvalues of W, ascending. Computed once and cached; concurrent
    /// first calls may both compute, and the first stored result wins.
    ///
    /// Row-standardized W = D⁻¹A is similar to the symmetric D^-1/2 A D^-1/2,
    /// so the spectrum is real and a symmetric solver applies.
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.get_or_init(|| {
            let n = self.n();
            let degree: Vec<f64> = self.neighbors.iter().map(|nb| nb.len() as f64).collect();
            let mut s = DMatrix::zeros(n, n);
            for (i, nb) in self.neighbors.iter().enumerate() {
                for &j in nb {
                    s[(i, j)] = if self.standardized { 1.0 / (degree[i] * degree[j]).sqrt() } else { 1.0 };
                }
            }
            let mut values: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
            values.sort_by(f64::total_cmp);
            values
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        for (i, (nb, w)) in self.neighbors.iter().zip(&self.weights).enumerate() {
            if nb.len() != w.len() {
                return Err(Error::InvalidParameter(format!("area {i}: neighbours and weights differ in length")));
            }
            if nb.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidParameter(format!("area {i}: neighbours not strictly ascending")));
            }
            for &j in nb {
                if j >= n || j == i {
                    return Err(Error::InvalidParameter(format!("area {i}: invalid neighbour {j}")));
                }
                if self.neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidParameter(format!("edge {i}-{j} is not symmetric")));
                }
            }
            let expected = if self.standardized { 1.0 / nb.len() as f64 } else { 1.0 };
            if w.iter().any(|&x| (x - expected).abs() > ROW_SUM_TOLERANCE) {
                return Err(Error::InvalidParameter(format!(
                    "area {i}: weights must all equal {expected} ({} weighting)",
                    if self.standardized { "row-standardized" } else { "binary" }
                )));
            }
        }
        Ok(())
    }
}

impl TryFrom<WeightsFile> for SpatialWeights {
    type Error = Error;

    fn try_from(file: WeightsFile) -> Result<Self> {
        if file.neighbors.len() != file.n || file.weights.len() != file.n || file.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "n = {} but {} neighbour rows and {} weight rows",
                file.n,
                file.neighbors.len(),
                file.weights.len()
            )));
        }
        let w = Self {
            neighbors: file.neighbors,
            weights: file.weights,
            standardized: file.standardized,
            eigenvalues: OnceLock::new(),
        };
        w.validate()?;
        Ok(w)
    }
}

impl From<SpatialWeights> for WeightsFile {
    fn from(w: SpatialWeights) -> Self {
        Self { n: w.n(), neighbors: w.neighbors, weights: w.weights, standardized: w.standardized }
    }
}

fn row_weights(neighbors: &[Vec<usize>], standardize: bool) -> Vec<Vec<f64>> {
    neighbors
        .iter()
        .map(|nb| {
            let value = if standardize { 1.0 / nb.len() as f64 } else { 1.0 };
            vec![value; nb.len()]
        })
        .collect()
}

fn parse_id(token: &str, line: usize) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| Error::Parse { line, message: format!("`{token}` is not a non-negative integer id") })
}

fn polygon_rings(geometry: &Value, index: usize) -> Result<Vec<Vec<(i64, i64)>>> {
    let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Ingest(format!("feature {index}: geometry has no coordinates")))?;
    let polygons: Vec<&Value> = match kind {
        "Polygon" => vec![geometry.get("coordinates").unwrap()],
        "MultiPolygon" => coords.iter().collect(),
        other => {
            return Err(Error::Ingest(format!("feature {index}: unsupported geometry type `{other}`")));
        }
    };

    let mut rings = Vec::new();
    for polygon in polygons {
        let polygon = polygon
            .as_array()
            .ok_or_else(|| Error::Ingest(format!("feature {index}: polygon is not an array of rings")))?;
        for ring in polygon {
            let ring = ring
                .as_array()
                .ok_or_else(|| Error::Ingest(format!("feature {index}: ring is not an array")))?;
            if ring.len() < 4 {
                return Err(Error::Ingest(format!("feature {index}: ring has fewer than 4 positions")));
            }
            let mut points = Vec::with_capacity(ring.len());
            for pos in ring {
                let xy = pos.as_array().filter(|a| a.len() >= 2).ok_or_else(|| {
                    Error::Ingest(format!("feature {index}: position is not an [x, y] array"))
                })?;
                let (Some(x), Some(y)) = (xy[0].as_f64(), xy[1].as_f64()) else {
                    return Err(Error::Ingest(format!("feature {index}: non-numeric coordinate")));
                };
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::Ingest(format!("feature {index}: non-finite coordinate")));
                }
                points.push(((x / COORD_QUANTUM).round() as i64, (y / COORD_QUANTUM).round() as i64));
            }
            rings.push(points);
        }
    }
    Ok(rings)
}
