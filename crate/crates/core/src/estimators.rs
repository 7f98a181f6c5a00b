//! k-NN distance estimators: the pivot bound, QueryNet, PivNet and
//! PivNet-itr, plus the exact oracle behind the same trait.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use crate::grid::PivotGrid;
use crate::nn::{read_u32, Mlp, PackedMlp};
use crate::spatial::KdTree;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Pivot,
    QueryNet,
    PivNet,
    PivNetItr,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Pivot, Kind::QueryNet, Kind::PivNet, Kind::PivNetItr];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Pivot => "pivot",
            Kind::QueryNet => "querynet",
            Kind::PivNet => "pivnet",
            Kind::PivNetItr => "pivnet-itr",
        }
    }

    pub fn needs_model(self) -> bool {
        self != Kind::Pivot
    }

    pub fn needs_grid(self) -> bool {
        self != Kind::QueryNet
    }

    /// Network input width, `None` for the pivot kind.
    pub fn input_size(self, dim: usize, k_max: usize) -> Option<usize> {
        match self {
            Kind::Pivot => None,
            Kind::QueryNet => Some(dim),
            Kind::PivNet => Some(dim + 1 + k_max),
            Kind::PivNetItr => Some(dim + 3),
        }
    }

    /// Network output width, `None` for the pivot kind.
    pub fn output_size(self, k_max: usize) -> Option<usize> {
        match self {
            Kind::Pivot => None,
            Kind::QueryNet | Kind::PivNet => Some(k_max),
            Kind::PivNetItr => Some(1),
        }
    }

    fn tag(self) -> u8 {
        match self {
            Kind::Pivot => 0,
            Kind::QueryNet => 1,
            Kind::PivNet => 2,
            Kind::PivNetItr => 3,
        }
    }

    fn from_tag(t: u8) -> Option<Kind> {
        Kind::ALL.get(t as usize).copied()
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pivot" => Ok(Kind::Pivot),
            "querynet" => Ok(Kind::QueryNet),
            "pivnet" => Ok(Kind::PivNet),
            "pivnet-itr" | "pivnetitr" | "pivnet_itr" => Ok(Kind::PivNetItr),
            other => Err(Error::invalid(format!("unknown estimator kind '{other}'"))),
        }
    }
}

/// Appends the raw feature vector of `q` for `kind` to `out`.
///
/// Layouts: QueryNet `[q]`, PivNet `[q, dist(q,p), v_p]`, PivNet-itr
/// `[q, k, dist(q,p), dist(p, x_p^k)]`.
pub fn write_features(
    kind: Kind,
    q: &[f64],
    grid: Option<&PivotGrid>,
    k: Option<usize>,
    out: &mut Vec<f64>,
) -> Result<()> {
    if kind == Kind::PivNetItr && k.is_none() {
        return Err(Error::invalid("pivnet-itr features need k"));
    }
    if kind != Kind::PivNetItr && k.is_some() {
        return Err(Error::invalid(format!("{kind} features do not take k")));
    }
    match kind {
        Kind::Pivot => Err(Error::invalid("the pivot estimator has no features")),
        Kind::QueryNet => {
            if let Some(g) = grid {
                if g.dim() != q.len() {
                    return Err(Error::DimensionMismatch { expected: g.dim(), got: q.len() });
                }
            }
            out.extend_from_slice(q);
            Ok(())
        }
        Kind::PivNet | Kind::PivNetItr => {
            let grid = grid.ok_or_else(|| Error::invalid(format!("{kind} features need a pivot grid")))?;
            let (pivot, dqp) = grid.locate_with_distance(q)?;
            out.extend_from_slice(q);
            if let Some(k) = k {
                if k == 0 || k > grid.k_max() {
                    return Err(Error::KOutOfRange { k, max: grid.k_max() });
                }
                out.push(k as f64);
                out.push(dqp);
                out.push(pivot.knn_distances[k - 1] as f64);
            } else {
                out.push(dqp);
                out.extend(pivot.knn_distances.iter().map(|&v| v as f64));
            }
            Ok(())
        }
    }
}

/// Raw feature vector of `q` for `kind`.
pub fn assemble_features(kind: Kind, q: &[f64], grid: Option<&PivotGrid>, k: Option<usize>) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    write_features(kind, q, grid, k, &mut out)?;
    Ok(out)
}

/// Min-max input scaling and max-target scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub input_offset: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub target_offset: f64,
    pub target_scale: f64,
}

/// Fits per-feature min-max scaling to `[0, 1]` and divides targets by the
/// largest target. Constant features map to 0 with scale 1.
pub fn fit_normalization(inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<Normalization> {
    if inputs.nrows() == 0 || targets.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut input_offset = Vec::with_capacity(inputs.ncols());
    let mut input_scale = Vec::with_capacity(inputs.ncols());
    for col in inputs.columns() {
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        input_offset.push(lo);
        input_scale.push(if hi > lo { hi - lo } else { 1.0 });
    }
    let max = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let target_scale = if max > 0.0 && max.is_finite() { max } else { 1.0 };
    Ok(Normalization { input_offset, input_scale, target_offset: 0.0, target_scale })
}

impl Normalization {
    pub fn input_len(&self) -> usize {
        self.input_offset.len()
    }

    pub fn normalize_input(&self, j: usize, x: f64) -> f64 {
        (x - self.input_offset[j]) / self.input_scale[j]
    }

    pub fn denormalize_input(&self, j: usize, z: f64) -> f64 {
        z * self.input_scale[j] + self.input_offset[j]
    }

    pub fn normalize_target(&self, y: f64) -> f64 {
        (y - self.target_offset) / self.target_scale
    }

    pub fn denormalize_target(&self, z: f64) -> f64 {
        z * self.target_scale + self.target_offset
    }

    pub fn inputs_f32(&self, raw: ArrayView2<f64>) -> Array2<f32> {
        Array2::from_shape_fn(raw.dim(), |(i, j)| self.normalize_input(j, raw[[i, j]]) as f32)
    }

    pub fn targets_f32(&self, raw: ArrayView2<f64>) -> Array2<f32> {
        raw.mapv(|y| self.normalize_target(y) as f32)
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.input_len() as u32).to_le_bytes())?;
        for v in self.input_offset.iter().chain(&self.input_scale) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.target_offset.to_le_bytes())?;
        w.write_all(&self.target_scale.to_le_bytes())
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let n = read_u32(r)? as usize;
        if n > 1 << 20 {
            return Err(Error::Format("implausible feature count".into()));
        }
        let input_offset = (0..n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let input_scale = (0..n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let target_offset = read_f64(r)?;
        let target_scale = read_f64(r)?;
        let norm = Normalization { input_offset, input_scale, target_offset, target_scale };
        norm.validate()?;
        Ok(norm)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.input_offset.iter().all(|v| v.is_finite())
            && self.input_scale.iter().all(|&v| v > 0.0 && v.is_finite())
            && self.target_offset.is_finite()
            && self.target_scale > 0.0
            && self.target_scale.is_finite()
            && self.input_offset.len() == self.input_scale.len();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("normalization scales must be finite and positive"))
        }
    }
}

/// Anything that yields k-NN distance vectors for query points.
pub trait DistanceSource: Sync {
    fn dim(&self) -> usize;
    fn k_max(&self) -> usize;
    fn label(&self) -> String;

    /// Distances for `k = 1..=k_max`.
    fn distances(&self, q: &[f64]) -> Result<Vec<f64>>;

    /// Distance for a single `k`.
    fn kth(&self, q: &[f64], k: usize) -> Result<f64> {
        if k == 0 || k > self.k_max() {
            return Err(Error::KOutOfRange { k, max: self.k_max() });
        }
        Ok(self.distances(q)?[k - 1])
    }
}

/// Exact distances from a kd-tree.
///
/// With `exclude_self` the query is taken to be a member of the indexed set
/// and its nearest entry (itself, at distance zero) is dropped.
#[derive(Clone, Copy, Debug)]
pub struct ExactOracle<'a> {
    pub tree: &'a KdTree,
    pub k_max: usize,
    pub exclude_self: bool,
}

impl<'a> ExactOracle<'a> {
    pub fn new(tree: &'a KdTree, k_max: usize) -> Self {
        ExactOracle { tree, k_max, exclude_self: false }
    }

    pub fn members(tree: &'a KdTree, k_max: usize) -> Self {
        ExactOracle { tree, k_max, exclude_self: true }
    }
}

impl DistanceSource for ExactOracle<'_> {
    fn dim(&self) -> usize {
        self.tree.dim()
    }

    fn k_max(&self) -> usize {
        self.k_max
    }

    fn label(&self) -> String {
        "exact".into()
    }

    fn distances(&self, q: &[f64]) -> Result<Vec<f64>> {
        let skip = usize::from(self.exclude_self);
        let list = self.tree.knn(q, self.k_max + skip)?;
        Ok(list.0[skip..].iter().map(|n| n.distance).collect())
    }

    fn kth(&self, q: &[f64], k: usize) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::KOutOfRange { k, max: self.k_max });
        }
        let list = self.tree.knn(q, k + usize::from(self.exclude_self))?;
        Ok(list.last().expect("k >= 1").distance)
    }
}

/// Reusable buffers for allocation-free inference.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    raw: Vec<f64>,
    input: Vec<f32>,
    scratch: Vec<f32>,
    output: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct Estimator {
    kind: Kind,
    dim: usize,
    k_max: usize,
    model: Option<Mlp<f32>>,
    packed: Option<PackedMlp>,
    norm: Option<Normalization>,
    grid: Option<Arc<PivotGrid>>,
    isotonic: bool,
}

impl Estimator {
    /// The triangle-inequality estimator over a pivot grid.
    pub fn pivot(grid: Arc<PivotGrid>) -> Self {
        Estimator {
            kind: Kind::Pivot,
            dim: grid.dim(),
            k_max: grid.k_max(),
            model: None,
            packed: None,
            norm: None,
            grid: Some(grid),
            isotonic: false,
        }
    }

    /// A network estimator; shapes are checked against `kind`.
    pub fn network(
        kind: Kind,
        dim: usize,
        k_max: usize,
        model: Mlp<f32>,
        norm: Normalization,
        grid: Option<Arc<PivotGrid>>,
    ) -> Result<Self> {
        let (Some(n_in), Some(n_out)) = (kind.input_size(dim, k_max), kind.output_size(k_max)) else {
            return Err(Error::invalid("the pivot estimator has no network"));
        };
        if model.input_size() != n_in || norm.input_len() != n_in {
            return Err(Error::DimensionMismatch { expected: n_in, got: model.input_size() });
        }
        if model.output_size() != n_out {
            return Err(Error::DimensionMismatch { expected: n_out, got: model.output_size() });
        }
        norm.validate()?;
        match (&grid, kind.needs_grid()) {
            (None, true) => return Err(Error::invalid(format!("{kind} needs a pivot grid"))),
            (Some(_), false) => return Err(Error::invalid(format!("{kind} takes no pivot grid"))),
            _ => {}
        }
        if let Some(g) = &grid {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: g.dim() });
            }
            if g.k_max() != k_max {
                return Err(Error::invalid(format!("grid k_max {} differs from estimator k_max {k_max}", g.k_max())));
            }
        }
        let packed = Some(PackedMlp::new(&model));
        Ok(Estimator { kind, dim, k_max, model: Some(model), packed, norm: Some(norm), grid, isotonic: false })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn model(&self) -> Option<&Mlp<f32>> {
        self.model.as_ref()
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.norm.as_ref()
    }

    pub fn grid(&self) -> Option<&Arc<PivotGrid>> {
        self.grid.as_ref()
    }

    pub fn isotonic(&self) -> bool {
        self.isotonic
    }

    /// Applies a running maximum over k to every output vector.
    pub fn set_isotonic(&mut self, on: bool) {
        self.isotonic = on;
    }

    /// Estimated distances for `k = 1..=k_max`.
    pub fn estimate(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.k_max);
        self.estimate_into(q, &mut Workspace::default(), &mut out)?;
        Ok(out)
    }

    pub fn estimate_into(&self, q: &[f64], ws: &mut Workspace, out: &mut Vec<f64>) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        out.clear();
        match self.kind {
            Kind::Pivot => {
                let grid = self.grid.as_deref().expect("pivot estimator has a grid");
                let (pivot, dqp) = grid.locate_with_distance(q)?;
                out.extend(pivot.knn_distances.iter().map(|&v| dqp + v as f64));
            }
            Kind::QueryNet | Kind::PivNet => {
                self.run(q, None, ws)?;
                let norm = self.norm.as_ref().unwrap();
                out.extend(ws.output.iter().map(|&z| norm.denormalize_target(z as f64).max(0.0)));
            }
            Kind::PivNetItr => {
                for k in 1..=self.k_max {
                    out.push(self.itr_pass(q, k, ws)?);
                }
            }
        }
        if self.isotonic {
            running_max(out);
        }
        Ok(())
    }

    fn itr_pass(&self, q: &[f64], k: usize, ws: &mut Workspace) -> Result<f64> {
        self.run(q, Some(k), ws)?;
        let norm = self.norm.as_ref().unwrap();
        Ok(norm.denormalize_target(ws.output[0] as f64).max(0.0))
    }

    fn run(&self, q: &[f64], k: Option<usize>, ws: &mut Workspace) -> Result<()> {
        let (model, norm) = (self.packed.as_ref().unwrap(), self.norm.as_ref().unwrap());
        ws.raw.clear();
        write_features(self.kind, q, self.grid.as_deref(), k, &mut ws.raw)?;
        ws.input.clear();
        ws.input.extend(ws.raw.iter().enumerate().map(|(j, &x)| norm.normalize_input(j, x) as f32));
        model.forward_into(&ws.input, &mut ws.scratch, &mut ws.output);
        Ok(())
    }

    /// Estimate for a single `k`; one network pass for every kind.
    pub fn estimate_k(&self, q: &[f64], k: usize) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::KOutOfRange { k, max: self.k_max });
        }
        if self.kind == Kind::PivNetItr && !self.isotonic {
            if q.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
            }
            return self.itr_pass(q, k, &mut Workspace::default());
        }
        Ok(self.estimate(q)?[k - 1])
    }

    /// Writes the estimator. `grid_file` is recorded with its SHA-256 and is
    /// resolved relative to the estimator file's directory on load when
    /// relative.
    pub fn save(&self, path: impl AsRef<Path>, grid_file: Option<&Path>) -> Result<()> {
        let path = path.as_ref();
        let grid_ref = match (self.kind.needs_grid(), grid_file) {
            (false, _) => None,
            (true, None) => return Err(Error::invalid(format!("{} estimators must reference a grid file", self.kind))),
            (true, Some(g)) => {
                let resolved = resolve(path, g);
                Some((g.to_string_lossy().into_owned(), sha256_file(&resolved)?))
            }
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w, grid_ref.as_ref().map(|(p, h)| (p.as_str(), h.as_str())))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    fn write_to<W: Write>(&self, w: &mut W, grid_ref: Option<(&str, &str)>) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.tag(), u8::from(self.isotonic)])?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.k_max as u32).to_le_bytes())?;
        if let (Some(model), Some(norm)) = (&self.model, &self.norm) {
            norm.write_to(w)?;
            model.write_to(&mut *w)?;
        }
        if let Some((p, hash)) = grid_ref {
            w.write_all(&(p.len() as u32).to_le_bytes())?;
            w.write_all(p.as_bytes())?;
            w.write_all(hash.as_bytes())?;
        }
        Ok(())
    }

    /// Loads an estimator and its grid, verifying the grid checksum.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("{} is not an estimator file", path.display())));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported estimator version {version}")));
        }
        let mut tags = [0u8; 2];
        r.read_exact(&mut tags).map_err(|e| Error::io(path, e))?;
        let kind =
            Kind::from_tag(tags[0]).ok_or_else(|| Error::Format(format!("unknown estimator tag {}", tags[0])))?;
        let isotonic = tags[1] != 0;
        let dim = read_u32(&mut r)? as usize;
        let k_max = read_u32(&mut r)? as usize;
        let net = if kind.needs_model() {
            let norm = Normalization::read_from(&mut r)?;
            let model = Mlp::<f32>::read_from(&mut r)?;
            Some((model, norm))
        } else {
            None
        };
        let grid = if kind.needs_grid() {
            let len = read_u32(&mut r)? as usize;
            if len > 1 << 16 {
                return Err(Error::Format("implausible grid path length".into()));
            }
            let mut buf = vec![0u8; len + 64];
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            let hash = String::from_utf8(buf.split_off(len)).map_err(|_| Error::Format("bad checksum".into()))?;
            let rel = String::from_utf8(buf).map_err(|_| Error::Format("bad grid path".into()))?;
            let grid_path = resolve(path, Path::new(&rel));
            let found = sha256_file(&grid_path)?;
            if found != hash {
                return Err(Error::Checksum { path: grid_path, expected: hash, found });
            }
            Some(Arc::new(PivotGrid::load(&grid_path)?))
        } else {
            None
        };
        let mut est = match (kind, net) {
            (Kind::Pivot, _) => {
                let g = grid.expect("pivot needs grid");
                if g.dim() != dim || g.k_max() != k_max {
                    return Err(Error::Format("grid does not match estimator header".into()));
                }
                Estimator::pivot(g)
            }
            (_, Some((model, norm))) => {
                Estimator::network(kind, dim, k_max, model, norm, grid).map_err(|e| Error::Format(e.to_string()))?
            }
            _ => unreachable!(),
        };
        est.isotonic = isotonic;
        Ok(est)
    }
}

impl DistanceSource for Estimator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn k_max(&self) -> usize {
        self.k_max
    }

    fn label(&self) -> String {
        self.kind.name().into()
    }

    fn distances(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.estimate(q)
    }

    fn kth(&self, q: &[f64], k: usize) -> Result<f64> {
        self.estimate_k(q, k)
    }
}

const MAGIC: &[u8; 4] = b"PVES";
const VERSION: u32 = 1;

fn running_max(v: &mut [f64]) {
    let mut m = f64::NEG_INFINITY;
    for x in v {
        m = m.max(*x);
        *x = m;
    }
}

fn resolve(base_file: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_file.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated data: {e}")))?;
    Ok(f64::from_le_bytes(b))
}

/// Lower-case hex SHA-256 of a file's contents.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
