use std::cmp::Ordering;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::geometry::orient2d;
use crate::grid::{Grid, Image};
use crate::mesh::TriMesh;

/// Orthonormal basis of images that are constant on each mesh triangle.
///
/// Column `k` is the indicator of the pixels of one triangle divided by the
/// square root of its pixel count, so the coefficients of an image are
/// `sqrt(count_k) * mean_k` and `Bᵀ B = I`. Triangles that contain no pixel
/// centre get no column.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    mesh: Arc<TriMesh>,
    grid: Grid,
    pixel_triangle: Vec<u32>,
    pixel_column: Vec<u32>,
    column_triangle: Vec<usize>,
    counts: Vec<usize>,
    scale: Vec<f64>,
}

/// Assigns every pixel centre to a triangle. Centres on a shared edge or
/// vertex go to the lowest-index incident triangle.
pub fn rasterize(mesh: &TriMesh, grid: Grid) -> Result<SubspaceBasis> {
    rasterize_shared(Arc::new(mesh.clone()), grid)
}

pub(crate) fn rasterize_shared(mesh: Arc<TriMesh>, grid: Grid) -> Result<SubspaceBasis> {
    const UNSET: u32 = u32::MAX;
    let side = grid.side();
    let s = side as f64;
    let mut pixel_triangle = vec![UNSET; grid.len()];

    let pixel_range = |lo: f64, hi: f64| -> Option<(usize, usize)> {
        // pixel centres c_j = (j + 0.5)/s with lo <= c_j <= hi
        let first = (lo * s - 0.5).ceil().max(0.0);
        let last = (hi * s - 0.5).floor().min(s - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    };

    for t in 0..mesh.len() {
        let [a, b, c] = mesh.triangle_points(t);
        let (xlo, xhi) = (a[0].min(b[0]).min(c[0]), a[0].max(b[0]).max(c[0]));
        let (ylo, yhi) = (a[1].min(b[1]).min(c[1]), a[1].max(b[1]).max(c[1]));
        let (Some((c0, c1)), Some((r0, r1))) = (pixel_range(xlo, xhi), pixel_range(ylo, yhi)) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let idx = grid.index(row, col);
                if pixel_triangle[idx] != UNSET {
                    continue;
                }
                let p = grid.center(idx);
                if orient2d(a, b, p) != Ordering::Less
                    && orient2d(b, c, p) != Ordering::Less
                    && orient2d(c, a, p) != Ordering::Less
                {
                    pixel_triangle[idx] = t as u32;
                }
            }
        }
    }
    if let Some(idx) = pixel_triangle.iter().position(|&t| t == UNSET) {
        return Err(Error::invalid(format!(
            "mesh does not cover pixel {idx} at {:?}",
            grid.center(idx)
        )));
    }

    let mut tri_count = vec![0usize; mesh.len()];
    for &t in &pixel_triangle {
        tri_count[t as usize] += 1;
    }
    let mut tri_column = vec![UNSET; mesh.len()];
    let mut column_triangle = Vec::new();
    let mut counts = Vec::new();
    for (t, &n) in tri_count.iter().enumerate() {
        if n > 0 {
            tri_column[t] = column_triangle.len() as u32;
            column_triangle.push(t);
            counts.push(n);
        }
    }
    let pixel_column = pixel_triangle.iter().map(|&t| tri_column[t as usize]).collect();
    let scale = counts.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect();
    Ok(SubspaceBasis {
        mesh,
        grid,
        pixel_triangle,
        pixel_column,
        column_triangle,
        counts,
        scale,
    })
}

impl SubspaceBasis {
    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Number of columns `K`.
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Triangle index of every pixel.
    pub fn assignment(&self) -> &[u32] {
        &self.pixel_triangle
    }

    /// Column index of every pixel.
    pub fn pixel_columns(&self) -> &[u32] {
        &self.pixel_column
    }

    pub fn column_triangle(&self, k: usize) -> usize {
        self.column_triangle[k]
    }

    /// Pixel count of column `k`.
    pub fn count(&self, k: usize) -> usize {
        self.counts[k]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Column `k` as a dense image.
    pub fn column(&self, k: usize) -> Image {
        let mut v = vec![0.0; self.grid.len()];
        for (p, &c) in self.pixel_column.iter().enumerate() {
            if c as usize == k {
                v[p] = self.scale[k];
            }
        }
        Image::new(self.grid, v).expect("finite column")
    }

    /// `Bᵀ x`.
    pub fn coeffs(&self, img: &Image) -> Result<Vec<f64>> {
        img.ensure_grid(self.grid)?;
        let mut q = vec![0.0; self.dim()];
        self.coeffs_into(img.values(), &mut q);
        Ok(q)
    }

    /// `B q`.
    pub fn synthesize(&self, q: &[f64]) -> Result<Image> {
        check_len("coefficient vector", self.dim(), q.len())?;
        let mut out = vec![0.0; self.grid.len()];
        self.synthesize_add(q, &mut out);
        Image::new(self.grid, out)
    }

    /// Orthogonal projection `B Bᵀ x`: every triangle gets its pixel mean.
    pub fn project(&self, img: &Image) -> Result<Image> {
        let q = self.coeffs(img)?;
        self.synthesize(&q)
    }

    /// Per-column pixel means of `x`.
    pub fn means(&self, x: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim()];
        for (&c, &v) in self.pixel_column.iter().zip(x) {
            sums[c as usize] += v;
        }
        sums.iter().zip(&self.counts).map(|(s, &n)| s / n as f64).collect()
    }

    pub(crate) fn coeffs_into(&self, x: &[f64], q: &mut [f64]) {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (&c, &v) in self.pixel_column.iter().zip(x) {
            q[c as usize] += v;
        }
        for (v, s) in q.iter_mut().zip(&self.scale) {
            *v *= s;
        }
    }

    pub(crate) fn synthesize_add(&self, q: &[f64], out: &mut [f64]) {
        for (o, &c) in out.iter_mut().zip(&self.pixel_column) {
            *o += q[c as usize] * self.scale[c as usize];
        }
    }

    /// Stable identifier of the (mesh, grid) pair.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.grid.side().to_le_bytes());
        for v in self.mesh.vertices() {
            h.update(v[0].to_le_bytes());
            h.update(v[1].to_le_bytes());
        }
        for t in self.mesh.triangles() {
            for &i in t {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..16])
    }
}

/// Side-by-side stack `B = [B₁ … B_Λ]` of bases on one grid.
#[derive(Debug, Clone)]
pub struct StackedBasis {
    grid: Grid,
    bases: Vec<SubspaceBasis>,
    offsets: Vec<usize>,
}

impl StackedBasis {
    pub fn new(bases: Vec<SubspaceBasis>) -> Result<Self> {
        let grid = bases
            .first()
            .ok_or_else(|| Error::invalid("a stacked basis needs at least one subspace"))?
            .grid();
        let mut offsets = Vec::with_capacity(bases.len() + 1);
        offsets.push(0);
        for b in &bases {
            if b.grid() != grid {
                return Err(Error::DimensionMismatch {
                    context: "stacked basis grid",
                    expected: grid.side(),
                    found: b.grid().side(),
                });
            }
            offsets.push(offsets.last().unwrap() + b.dim());
        }
        Ok(StackedBasis { grid, bases, offsets })
    }

    pub fn from_meshes(meshes: &[TriMesh], grid: Grid) -> Result<Self> {
        let bases = meshes
            .iter()
            .map(|m| rasterize(m, grid))
            .collect::<Result<Vec<_>>>()?;
        StackedBasis::new(bases)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn bases(&self) -> &[SubspaceBasis] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// Total column count `ΣK_λ`.
    pub fn total_columns(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Column range of subspace `lambda` inside stacked vectors.
    pub fn range(&self, lambda: usize) -> std::ops::Range<usize> {
        self.offsets[lambda]..self.offsets[lambda + 1]
    }

    /// Stacked `Bᵀ x`.
    pub fn coeffs(&self, img: &Image) -> Result<Vec<f64>> {
        img.ensure_grid(self.grid)?;
        let mut q = vec![0.0; self.total_columns()];
        self.apply_t(img.values(), &mut q);
        Ok(q)
    }

    /// Concatenates per-subspace coefficient vectors.
    pub fn stack(&self, parts: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_len("subspace count", self.len(), parts.len())?;
        let mut q = Vec::with_capacity(self.total_columns());
        for (b, p) in self.bases.iter().zip(parts) {
            check_len("coefficient vector", b.dim(), p.len())?;
            q.extend_from_slice(p);
        }
        Ok(q)
    }

    /// `q = Bᵀ x` (pixels to stacked coefficients).
    pub fn apply_t(&self, x: &[f64], q: &mut [f64]) {
        for (l, b) in self.bases.iter().enumerate() {
            b.coeffs_into(x, &mut q[self.range(l)]);
        }
    }

    /// `x = B q` (stacked coefficients to pixels).
    pub fn apply(&self, q: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (l, b) in self.bases.iter().enumerate() {
            b.synthesize_add(&q[self.range(l)], x);
        }
    }
}
