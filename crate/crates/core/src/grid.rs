//! Uniform pivot grid over the reference bounding box.
//!
//! Every cell carries a pivot at its centroid together with the exact
//! distances from that pivot to its `k_max` nearest reference points. The
//! distances are stored as `f32`, rounded toward +inf so that
//! `dist(q, p) + v_p[k]` stays an upper bound on the k-th NN distance of `q`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{BBox, Dataset};
use crate::error::{Error, Result};
use crate::spatial::KdTree;

/// Default refusal threshold for the stored pivot vectors: 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u128 = 4 << 30;

const MAGIC: &[u8; 4] = b"PVGD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PivotGrid {
    bbox: BBox,
    cells: usize,
    k_max: usize,
    /// `cells^dim * k_max` distances; cell-major, first dimension slowest.
    vectors: Vec<f32>,
}

/// A located pivot: its cell, centroid and stored distance vector.
#[derive(Debug, Clone, Copy)]
pub struct Pivot<'a> {
    pub cell: usize,
    pub knn_distances: &'a [f32],
}

/// Smallest `f32` that is `>= x`.
pub fn f32_at_least(x: f64) -> f32 {
    let f = x as f32;
    if (f as f64) < x {
        f.next_up()
    } else {
        f
    }
}

/// Bytes needed to hold the pivot vectors, or `None` on overflow.
pub fn required_bytes(dim: usize, cells: usize, k_max: usize) -> Option<u128> {
    let mut n: u128 = 1;
    for _ in 0..dim {
        n = n.checked_mul(cells as u128)?;
    }
    n.checked_mul(k_max as u128)?.checked_mul(4)
}

impl PivotGrid {
    /// Builds the grid with the default memory budget.
    pub fn build(data: &Dataset, tree: &KdTree, cells: usize, k_max: usize) -> Result<Self> {
        PivotGrid::build_with_budget(data, tree, cells, k_max, DEFAULT_MEMORY_BUDGET)
    }

    pub fn build_with_budget(data: &Dataset, tree: &KdTree, cells: usize, k_max: usize, budget: u128) -> Result<Self> {
        if cells == 0 {
            return Err(Error::invalid("grid needs at least one cell per dimension"));
        }
        if k_max == 0 || k_max > data.len() {
            return Err(Error::KOutOfRange { k: k_max, max: data.len() });
        }
        if tree.len() != data.len() || tree.dim() != data.dim() {
            return Err(Error::invalid("kd-tree was not built over this dataset"));
        }
        let dim = data.dim();
        let required = required_bytes(dim, cells, k_max).unwrap_or(u128::MAX);
        if required > budget {
            return Err(Error::MemoryBudget { required, budget });
        }
        let n_cells = cells.pow(dim as u32);
        let mut grid = PivotGrid { bbox: data.bbox().clone(), cells, k_max, vectors: vec![0.0; n_cells * k_max] };
        let (bbox, cells) = (grid.bbox.clone(), grid.cells);
        grid.vectors.par_chunks_mut(k_max).enumerate().try_for_each(|(cell, out)| -> Result<()> {
            let p = centroid_of(&bbox, cells, cell);
            let nl = tree.knn(&p, k_max)?;
            for (o, nb) in out.iter_mut().zip(&nl.0) {
                *o = f32_at_least(nb.distance);
            }
            Ok(())
        })?;
        Ok(grid)
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    /// Cells per dimension.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn pivot_count(&self) -> usize {
        self.vectors.len() / self.k_max
    }

    /// Per-dimension cell coordinates of a linear cell id.
    pub fn cell_coords(&self, cell: usize) -> Vec<usize> {
        coords_of(self.dim(), self.cells, cell)
    }

    /// Pivot location (centroid) of a cell.
    pub fn centroid(&self, cell: usize) -> Vec<f64> {
        centroid_of(&self.bbox, self.cells, cell)
    }

    /// Stored distance vector of a cell's pivot.
    pub fn vector(&self, cell: usize) -> &[f32] {
        &self.vectors[cell * self.k_max..(cell + 1) * self.k_max]
    }

    /// Cell containing `q`: right-open per-dimension intervals, the last cell
    /// closed, out-of-box coordinates clamped to the boundary cell.
    pub fn cell_of(&self, q: &[f64]) -> Result<usize> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: q.len() });
        }
        let mut cell = 0usize;
        for (j, &x) in q.iter().enumerate() {
            cell = cell * self.cells + axis_cell(x, self.bbox.min[j], self.bbox.max[j], self.cells);
        }
        Ok(cell)
    }

    /// Pivot of the cell containing `q`.
    pub fn locate(&self, q: &[f64]) -> Result<Pivot<'_>> {
        let cell = self.cell_of(q)?;
        Ok(Pivot { cell, knn_distances: self.vector(cell) })
    }

    /// `dist(q, p)` for the pivot `p` of `q`'s cell, plus that pivot.
    pub fn locate_with_distance(&self, q: &[f64]) -> Result<(Pivot<'_>, f64)> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: q.len() });
        }
        let mut cell = 0usize;
        let mut d2 = 0.0;
        for (j, &x) in q.iter().enumerate() {
            let (lo, hi) = (self.bbox.min[j], self.bbox.max[j]);
            let i = axis_cell(x, lo, hi, self.cells);
            cell = cell * self.cells + i;
            let diff = x - axis_centroid(lo, hi, self.cells, i);
            d2 += diff * diff;
        }
        let pivot = Pivot { cell, knn_distances: self.vector(cell) };
        Ok((pivot, d2.sqrt()))
    }

    /// Triangle-inequality bound `dist(q, p) + dist(p, x_p^k)`.
    pub fn pivot_bound(&self, q: &[f64], k: usize) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::KOutOfRange { k, max: self.k_max });
        }
        let (pivot, dqp) = self.locate_with_distance(q)?;
        Ok(dqp + pivot.knn_distances[k - 1] as f64)
    }

    /// Bound for every `k` in `1..=k_max` from one lookup.
    pub fn pivot_bounds(&self, q: &[f64]) -> Result<Vec<f64>> {
        let (pivot, dqp) = self.locate_with_distance(q)?;
        Ok(pivot.knn_distances.iter().map(|&v| dqp + v as f64).collect())
    }

    /// Writes the versioned little-endian grid file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.cells as u32).to_le_bytes())?;
        w.write_all(&(self.k_max as u32).to_le_bytes())?;
        for j in 0..self.dim() {
            w.write_all(&self.bbox.min[j].to_le_bytes())?;
            w.write_all(&self.bbox.max[j].to_le_bytes())?;
        }
        for v in &self.vectors {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        PivotGrid::read_from(&mut BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let io = |e| Error::io("<grid>", e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a pivot grid file".into()));
        }
        let version = read_u32(r).map_err(io)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported grid version {version}")));
        }
        let dim = read_u32(r).map_err(io)? as usize;
        let cells = read_u32(r).map_err(io)? as usize;
        let k_max = read_u32(r).map_err(io)? as usize;
        if dim == 0 || cells == 0 || k_max == 0 {
            return Err(Error::Format("zero grid dimension".into()));
        }
        let mut min = Vec::with_capacity(dim);
        let mut max = Vec::with_capacity(dim);
        for _ in 0..dim {
            min.push(read_f64(r).map_err(io)?);
            max.push(read_f64(r).map_err(io)?);
        }
        let bbox = BBox::new(min, max).map_err(|e| Error::Format(e.to_string()))?;
        let count = required_bytes(dim, cells, k_max)
            .and_then(|b| usize::try_from(b / 4).ok())
            .ok_or_else(|| Error::Format("grid size overflows".into()))?;
        let mut bytes = vec![0u8; count * 4];
        r.read_exact(&mut bytes).map_err(io)?;
        let vectors = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        Ok(PivotGrid { bbox, cells, k_max, vectors })
    }
}

fn coords_of(dim: usize, cells: usize, mut cell: usize) -> Vec<usize> {
    let mut out = vec![0; dim];
    for j in (0..dim).rev() {
        out[j] = cell % cells;
        cell /= cells;
    }
    out
}

fn centroid_of(bbox: &BBox, cells: usize, cell: usize) -> Vec<f64> {
    coords_of(bbox.dim(), cells, cell)
        .iter()
        .enumerate()
        .map(|(j, &i)| axis_centroid(bbox.min[j], bbox.max[j], cells, i))
        .collect()
}

#[inline]
fn axis_centroid(lo: f64, hi: f64, cells: usize, i: usize) -> f64 {
    lo + (i as f64 + 0.5) * (hi - lo) / cells as f64
}

#[inline]
fn axis_cell(x: f64, lo: f64, hi: f64, cells: usize) -> usize {
    let width = hi - lo;
    if width <= 0.0 || x.is_nan() {
        return 0;
    }
    let t = ((x - lo) * cells as f64 / width).floor();
    if t <= 0.0 {
        0
    } else if t >= (cells - 1) as f64 {
        cells - 1
    } else {
        t as usize
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
