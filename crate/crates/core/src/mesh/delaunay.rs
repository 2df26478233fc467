use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{incircle, orient2d, Point};
use crate::rng::Seed;

/// Corners of the unit square, always the first four mesh vertices.
pub const CORNERS: [Point; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

/// A triangulation of the unit square. Triangles are counterclockwise vertex
/// index triples; the four domain corners are vertices `0..4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Validates indices and orientation; used when loading meshes from disk.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)) {
                return Err(Error::parse("vertices", format!("vertex {i} outside the unit square")));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::parse("triangles", format!("triangle {t} references vertex {bad}")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            if orient2d(a, b, c) != Ordering::Greater {
                return Err(Error::parse("triangles", format!("triangle {t} is not counterclockwise")));
            }
        }
        Ok(TriMesh { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mesh serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: TriMesh = serde_json::from_str(s).map_err(|e| Error::parse("mesh", e.to_string()))?;
        TriMesh::new(raw.vertices, raw.triangles)
    }
}

/// Incremental Bowyer–Watson triangulation of the unit square.
///
/// Starts from the two triangles spanned by the corners (diagonal
/// `(0,0)–(1,1)`) and inserts points one at a time. All inserted points lie in
/// the closed square, so no super-triangle is needed.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    seen: HashSet<[u64; 2]>,
}

impl Default for Triangulation {
    fn default() -> Self {
        Self::new()
    }
}

impl Triangulation {
    pub fn new() -> Self {
        Triangulation {
            vertices: CORNERS.to_vec(),
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            seen: CORNERS.iter().map(|p| key(*p)).collect(),
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Inserts `p`; returns `false` (and changes nothing) for duplicates.
    pub fn insert(&mut self, p: Point) -> Result<bool> {
        if !p.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)) {
            return Err(Error::invalid(format!("point {p:?} outside the unit square")));
        }
        if !self.seen.insert(key(p)) {
            return Ok(false);
        }
        let idx = self.vertices.len();
        self.vertices.push(p);

        let mut bad = vec![false; self.triangles.len()];
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| self.vertices[v]);
            if incircle(a, b, c, p) == Ordering::Greater {
                bad[t] = true;
                edges.extend([(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]);
            }
        }
        debug_assert!(!edges.is_empty(), "point in the square must break some circumcircle");

        let directed: HashSet<(usize, usize)> = edges.iter().copied().collect();
        let mut kept: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .zip(&bad)
            .filter(|(_, &b)| !b)
            .map(|(t, _)| *t)
            .collect();
        for &(a, b) in &edges {
            if directed.contains(&(b, a)) {
                continue;
            }
            // p on a hull edge: the fan skips that edge.
            match orient2d(self.vertices[a], self.vertices[b], p) {
                Ordering::Greater => kept.push([a, b, idx]),
                Ordering::Equal => {}
                Ordering::Less => unreachable!("cavity is star-shaped around the new point"),
            }
        }
        self.triangles = kept;
        Ok(true)
    }

    pub fn to_mesh(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
        }
    }
}

fn key(p: Point) -> [u64; 2] {
    // +0.0 and -0.0 are the same point
    [(p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()]
}

/// Delaunay triangulation of `points` plus the four square corners.
/// Duplicates (including corners passed explicitly) are ignored.
pub fn delaunay_triangulate(points: &[Point]) -> Result<TriMesh> {
    let mut tri = Triangulation::new();
    for &p in points {
        tri.insert(p)?;
    }
    Ok(tri.to_mesh())
}

/// Homogeneous Poisson process on the unit square with mean count `intensity`.
pub fn sample_poisson_points(intensity: f64, seed: Seed) -> Result<Vec<Point>> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::invalid(format!("intensity must be positive, got {intensity}")));
    }
    let mut rng = seed.rng();
    let poisson = Poisson::new(intensity).map_err(|e| Error::invalid(e.to_string()))?;
    let count = poisson.sample(&mut rng) as usize;
    Ok((0..count).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect())
}

/// Random Delaunay mesh with exactly `k` triangles.
///
/// Starts from a Poisson sample of intensity `k/2` (an interior point adds two
/// triangles, the bare square has two), then removes the most recently
/// inserted point while there are too many triangles and inserts uniform
/// interior points while there are too few. Triangle counts of interior-only
/// meshes are even, so an odd `k` finishes with one point on a random side of
/// the square, which adds a single triangle.
pub fn mesh_with_k_triangles(k: usize, seed: Seed) -> Result<TriMesh> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 triangles, got {k}")));
    }
    let mut points = sample_poisson_points(k as f64 / 2.0, seed.child(0))?;
    let mut rng = seed.child(1).rng();
    let mut tri = Triangulation::new();
    for &p in &points {
        tri.insert(p)?;
    }
    for _ in 0..100 * k + 100 {
        let count = tri.triangle_count();
        if count == k {
            return Ok(tri.to_mesh());
        }
        if count > k {
            points.pop();
            tri = Triangulation::new();
            for &p in &points {
                tri.insert(p)?;
            }
        } else {
            let p = if k - count == 1 {
                let t: f64 = rng.random_range(0.0..1.0);
                match rng.random_range(0..4) {
                    0 => [t, 0.0],
                    1 => [1.0, t],
                    2 => [t, 1.0],
                    _ => [0.0, t],
                }
            } else {
                [rng.random::<f64>(), rng.random::<f64>()]
            };
            if tri.insert(p)? {
                points.push(p);
            }
        }
    }
    Err(Error::invalid(format!("could not reach {k} triangles")))
}
