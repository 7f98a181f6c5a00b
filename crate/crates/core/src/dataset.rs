//! Point sets, CSV ingestion, query partitioning and synthetic data.
//!
//! Coordinates are stored row-major in one flat `Vec<f64>`; a point is a
//! `&[f64]` slice of length `dim`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Deterministic RNG used everywhere a seed is accepted.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for a named sub-stream (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Axis-aligned box, one closed `[min, max]` range per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch { expected: min.len(), got: max.len() });
        }
        if min.is_empty() {
            return Err(Error::invalid("bounding box needs at least one dimension"));
        }
        for (j, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("dimension {j}: non-finite range")));
            }
            if lo > hi {
                return Err(Error::invalid(format!("dimension {j}: inverted range ({lo}, {hi})")));
            }
        }
        Ok(BBox { min, max })
    }

    /// The same `[lo, hi]` range in every one of `dim` dimensions.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BBox::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(j, &x)| self.min[j] <= x && x <= self.max[j])
    }

    fn of_coords(dim: usize, coords: &[f64]) -> Self {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks_exact(dim) {
            for j in 0..dim {
                min[j] = min[j].min(p[j]);
                max[j] = max[j].max(p[j]);
            }
        }
        BBox { min, max }
    }
}

/// A non-empty set of finite `dim`-dimensional points with its tight bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
    bbox: BBox,
}

impl Dataset {
    /// Builds a dataset from row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if coords.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into {dim}-dimensional points",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("point {} has a non-finite coordinate", pos / dim)));
        }
        let bbox = BBox::of_coords(dim, &coords);
        Ok(Dataset { dim, coords, bbox })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyDataset)?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Dataset::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Dataset::new(self.dim, coords)
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }

    /// Appends the points of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Dataset::new(self.dim, coords)
    }

    pub fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// Skip the first row.
    pub has_header: bool,
    /// Silently drop rows with empty, non-numeric or non-finite cells.
    pub drop_invalid: bool,
}

/// Reads one point per row of comma-separated decimal numbers.
pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, opts: CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut dim = None;
    let mut coords = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io("<csv>", source),
            kind => Error::Parse { row: row + 1, message: format!("{kind:?}") },
        })?;
        if !more {
            break;
        }
        row += 1;
        if row == 1 && opts.has_header {
            continue;
        }
        let width = record.len();
        let expected = *dim.get_or_insert(width);
        if width != expected {
            return Err(Error::Parse { row, message: format!("expected {expected} columns, found {width}") });
        }
        let start = coords.len();
        let mut bad = None;
        for (col, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => coords.push(v),
                Ok(_) => {
                    bad = Some(format!("column {}: non-finite value {cell:?}", col + 1));
                    break;
                }
                Err(_) if cell.is_empty() => {
                    bad = Some(format!("column {}: missing value", col + 1));
                    break;
                }
                Err(_) => {
                    bad = Some(format!("column {}: non-numeric value {cell:?}", col + 1));
                    break;
                }
            }
        }
        if let Some(message) = bad {
            if opts.drop_invalid {
                coords.truncate(start);
                continue;
            }
            return Err(Error::Parse { row, message });
        }
    }
    match dim {
        None => Err(Error::EmptyDataset),
        Some(_) if coords.is_empty() => Err(Error::EmptyDataset),
        Some(d) => Dataset::new(d, coords),
    }
}

/// Writes points as CSV using the shortest round-trip decimal form, so
/// reloading reproduces every coordinate bit-exactly.
pub fn write_csv<P: AsRef<[f64]>>(path: impl AsRef<Path>, points: &[P]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_points(&mut w, points).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_points<W: Write, P: AsRef<[f64]>>(w: &mut W, points: &[P]) -> std::io::Result<()> {
    for p in points {
        let mut first = true;
        for x in p.as_ref() {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{x}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reference set plus disjoint training and test queries drawn from one source.
#[derive(Debug, Clone)]
pub struct Partition {
    pub reference_set: Dataset,
    pub train_queries: Vec<Vec<f64>>,
    pub test_queries: Vec<Vec<f64>>,
    /// Source indices of `reference_set`, ascending.
    pub reference_idx: Vec<usize>,
    /// Source indices of the training queries, in sampling order.
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Samples `n_train + n_test` source points without replacement; the rest
/// becomes the reference set, in source order.
pub fn partition(data: &Dataset, n_train: usize, n_test: usize, seed: u64) -> Result<Partition> {
    let n = data.len();
    let taken = n_train.checked_add(n_test).ok_or_else(|| Error::invalid("query counts overflow"))?;
    if taken >= n {
        return Err(Error::invalid(format!("n_train + n_test = {taken} must be smaller than the dataset size {n}")));
    }
    let mut rng = seeded_rng(seed);
    let sampled = index::sample(&mut rng, n, taken).into_vec();
    let train_idx = sampled[..n_train].to_vec();
    let test_idx = sampled[n_train..].to_vec();
    let mut used = vec![false; n];
    for &i in &sampled {
        used[i] = true;
    }
    let reference_idx: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
    Ok(Partition {
        reference_set: data.subset(&reference_idx)?,
        train_queries: train_idx.iter().map(|&i| data.point(i).to_vec()).collect(),
        test_queries: test_idx.iter().map(|&i| data.point(i).to_vec()).collect(),
        reference_idx,
        train_idx,
        test_idx,
    })
}

/// `count` points drawn i.i.d. uniformly from `bbox`.
pub fn augment_uniform(bbox: &BBox, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let bbox = BBox::new(bbox.min.clone(), bbox.max.clone())?;
    let mut rng = seeded_rng(seed);
    let points = (0..count)
        .map(|_| {
            (0..bbox.dim())
                .map(|j| {
                    let u: f64 = rng.random();
                    (bbox.min[j] + u * bbox.width(j)).clamp(bbox.min[j], bbox.max[j])
                })
                .collect()
        })
        .collect();
    Ok(points)
}

/// Random-walk clusters: each cluster starts at a uniform location in
/// `start_box` and every further point is the previous one plus an isotropic
/// Gaussian step with standard deviation `step_scale`.
///
/// Points are emitted cluster by cluster, so point `i` belongs to cluster
/// `i / points_per_cluster`.
pub fn gen_random_walk_clusters(
    n_clusters: usize,
    points_per_cluster: usize,
    step_scale: f64,
    start_box: &BBox,
    seed: u64,
) -> Result<Dataset> {
    if n_clusters == 0 || points_per_cluster == 0 {
        return Err(Error::invalid("cluster and point counts must be positive"));
    }
    if !(step_scale.is_finite() && step_scale >= 0.0) {
        return Err(Error::invalid(format!("step scale {step_scale} must be >= 0")));
    }
    let dim = start_box.dim();
    let starts = augment_uniform(start_box, n_clusters, derive_seed(seed, 1))?;
    let mut rng = seeded_rng(derive_seed(seed, 2));
    let step = Normal::new(0.0, step_scale).map_err(|e| Error::invalid(e.to_string()))?;
    let mut coords = Vec::with_capacity(n_clusters * points_per_cluster * dim);
    for start in starts {
        let mut pos = start;
        coords.extend_from_slice(&pos);
        for _ in 1..points_per_cluster {
            for x in pos.iter_mut() {
                *x += step.sample(&mut rng);
            }
            coords.extend_from_slice(&pos);
        }
    }
    Dataset::new(dim, coords)
}

/// Cluster id of each point produced by [`gen_random_walk_clusters`].
pub fn random_walk_labels(n_clusters: usize, points_per_cluster: usize) -> Vec<usize> {
    (0..n_clusters * points_per_cluster).map(|i| i / points_per_cluster).collect()
}

/// Equal-weight isotropic Gaussian mixture. Component centers are uniform in
/// `centers_box`, per-component standard deviations uniform in `std_range`.
/// Returns the points and the component each was drawn from.
pub fn gen_gaussian_mixture(
    n_points: usize,
    n_components: usize,
    centers_box: &BBox,
    std_range: (f64, f64),
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if n_points == 0 || n_components == 0 {
        return Err(Error::invalid("point and component counts must be positive"));
    }
    let (lo, hi) = std_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::invalid(format!("bad std range ({lo}, {hi})")));
    }
    let centers = augment_uniform(centers_box, n_components, derive_seed(seed, 1))?;
    let mut rng = seeded_rng(derive_seed(seed, 2));
    let stds: Vec<f64> = (0..n_components).map(|_| rng.random_range(lo..=hi)).collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let dim = centers_box.dim();
    let mut coords = Vec::with_capacity(n_points * dim);
    let mut labels = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let c = rng.random_range(0..n_components);
        for j in 0..dim {
            let z: f64 = unit.sample(&mut rng);
            coords.push(centers[c][j] + stds[c] * z);
        }
        labels.push(c);
    }
    Ok((Dataset::new(dim, coords)?, labels))
}

/// Appends `count` points drawn uniformly from `region`, keeping only those
/// farther than `min_gap` from every point of `data`. Returns the extended
/// set and the indices of the planted points.
pub fn plant_outliers(
    data: &Dataset,
    count: usize,
    region: &BBox,
    min_gap: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if region.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: region.dim() });
    }
    if !(min_gap.is_finite() && min_gap >= 0.0) {
        return Err(Error::invalid(format!("min gap {min_gap} must be >= 0")));
    }
    let tree = crate::spatial::KdTree::build(data)?;
    let mut rng = seeded_rng(seed);
    let mut coords = data.coords().to_vec();
    let mut planted = Vec::with_capacity(count);
    let mut tries = 0usize;
    while planted.len() < count {
        tries += 1;
        if tries > 1000 * (count + 1) {
            return Err(Error::invalid("region has too little room for the requested outliers"));
        }
        let p: Vec<f64> = (0..region.dim()).map(|j| region.min[j] + rng.random::<f64>() * region.width(j)).collect();
        if tree.knn(&p, 1)?.0[0].distance > min_gap {
            planted.push(coords.len() / data.dim());
            coords.extend_from_slice(&p);
        }
    }
    Ok((Dataset::new(data.dim(), coords)?, planted))
}
