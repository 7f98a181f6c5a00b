//! Training corpora (queries plus exact k-NN distance vectors) and the
//! per-kind training driver.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::{augment_uniform, derive_seed, seeded_rng, Partition};
use crate::estimators::{
    fit_normalization, write_features, DistanceSource, Estimator, ExactOracle, Kind, Normalization,
};
use crate::grid::PivotGrid;
use crate::nn::{read_u32, train, Mlp, Samples, TrainConfig, TrainHistory};
use crate::spatial::KdTree;
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 3] = [128, 128, 32];

/// Share of corpus queries used for gradient steps; the rest validates.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Queries with their exact k-NN distance vectors and a train/validation split.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingCorpus {
    dim: usize,
    k_max: usize,
    queries: Vec<f64>,
    ground_truth: Vec<f64>,
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
}

/// Training queries plus `n_augment` uniform points from the grid's box, with
/// exact distances against the partition's reference set.
pub fn build_corpus(
    part: &Partition,
    grid: &PivotGrid,
    tree: &KdTree,
    n_augment: usize,
    seed: u64,
) -> Result<TrainingCorpus> {
    if tree.len() != part.reference_set.len() {
        return Err(Error::invalid("kd-tree was not built over the reference set"));
    }
    let mut queries = part.train_queries.clone();
    queries.extend(augment_uniform(grid.bbox(), n_augment, derive_seed(seed, 1))?);
    TrainingCorpus::from_queries(&queries, tree, grid.k_max(), derive_seed(seed, 2))
}

impl TrainingCorpus {
    /// Computes ground truth for `queries` and splits them 80/20.
    pub fn from_queries(queries: &[Vec<f64>], tree: &KdTree, k_max: usize, split_seed: u64) -> Result<Self> {
        if k_max == 0 || k_max > tree.len() {
            return Err(Error::KOutOfRange { k: k_max, max: tree.len() });
        }
        Self::from_source(queries, &ExactOracle::new(tree, k_max), split_seed)
    }

    /// Like [`TrainingCorpus::from_queries`] with ground truth taken from any
    /// exact source, e.g. a self-excluding oracle when the queries are points
    /// of the reference set.
    pub fn from_source<S: DistanceSource + ?Sized>(queries: &[Vec<f64>], source: &S, split_seed: u64) -> Result<Self> {
        let (dim, k_max) = (source.dim(), source.k_max());
        if let Some(q) = queries.iter().find(|q| q.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: q.len() });
        }
        let truth: Vec<Vec<f64>> = queries.par_iter().map(|q| source.distances(q)).collect::<Result<_>>()?;
        let n = queries.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded_rng(split_seed));
        let n_train = (n as f64 * TRAIN_FRACTION).round() as usize;
        let mut train_idx = order[..n_train].to_vec();
        let mut valid_idx = order[n_train..].to_vec();
        train_idx.sort_unstable();
        valid_idx.sort_unstable();
        Ok(TrainingCorpus { dim, k_max, queries: queries.concat(), ground_truth: truth.concat(), train_idx, valid_idx })
    }

    pub fn len(&self) -> usize {
        self.ground_truth.len() / self.k_max
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn query(&self, i: usize) -> &[f64] {
        &self.queries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn truth(&self, i: usize) -> &[f64] {
        &self.ground_truth[i * self.k_max..(i + 1) * self.k_max]
    }

    pub fn queries(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.queries.chunks_exact(self.dim)
    }

    /// Raw features and targets for the given queries. PivNet-itr expands
    /// every query into `k_max` rows, one per k.
    pub fn feature_rows(
        &self,
        kind: Kind,
        grid: Option<&PivotGrid>,
        idx: &[usize],
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let n_in = kind
            .input_size(self.dim, self.k_max)
            .ok_or_else(|| Error::invalid("the pivot estimator is not trained"))?;
        let itr = kind == Kind::PivNetItr;
        let rows = if itr { idx.len() * self.k_max } else { idx.len() };
        let n_out = if itr { 1 } else { self.k_max };
        let mut x = Vec::with_capacity(rows * n_in);
        let mut y = Vec::with_capacity(rows * n_out);
        for &i in idx {
            if itr {
                for k in 1..=self.k_max {
                    write_features(kind, self.query(i), grid, Some(k), &mut x)?;
                    y.push(self.truth(i)[k - 1]);
                }
            } else {
                write_features(kind, self.query(i), grid, None, &mut x)?;
                y.extend_from_slice(self.truth(i));
            }
        }
        let x = Array2::from_shape_vec((rows, n_in), x).map_err(|e| Error::invalid(e.to_string()))?;
        let y = Array2::from_shape_vec((rows, n_out), y).map_err(|e| Error::invalid(e.to_string()))?;
        Ok((x, y))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(CORPUS_MAGIC)?;
        for v in [CORPUS_VERSION, self.dim as u32, self.k_max as u32, self.len() as u32, self.train_idx.len() as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.queries.iter().chain(&self.ground_truth) {
            w.write_all(&v.to_le_bytes())?;
        }
        for &i in self.train_idx.iter().chain(&self.valid_idx) {
            w.write_all(&(i as u32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::Format(format!("truncated corpus: {e}")))?;
        if &magic != CORPUS_MAGIC {
            return Err(Error::Format("not a corpus file".into()));
        }
        let version = read_u32(r)?;
        if version != CORPUS_VERSION {
            return Err(Error::Format(format!("unsupported corpus version {version}")));
        }
        let dim = read_u32(r)? as usize;
        let k_max = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let n_train = read_u32(r)? as usize;
        if dim == 0 || k_max == 0 || n_train > n {
            return Err(Error::Format("corrupt corpus header".into()));
        }
        let mut read_vals = |count: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; count * 8];
            r.read_exact(&mut bytes).map_err(|e| Error::Format(format!("truncated corpus: {e}")))?;
            Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        };
        let queries = read_vals(n * dim)?;
        let ground_truth = read_vals(n * k_max)?;
        let mut idx = Vec::with_capacity(n);
        for _ in 0..n {
            let i = read_u32(r)? as usize;
            if i >= n {
                return Err(Error::Format("corpus split index out of range".into()));
            }
            idx.push(i);
        }
        let valid_idx = idx.split_off(n_train);
        Ok(TrainingCorpus { dim, k_max, queries, ground_truth, train_idx: idx, valid_idx })
    }
}

const CORPUS_MAGIC: &[u8; 4] = b"PVCP";
const CORPUS_VERSION: u32 = 1;

/// Network shape and optimiser settings for one estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { hidden: DEFAULT_HIDDEN.to_vec(), train: TrainConfig::default() }
    }
}

/// Losses of a finished run; `*_l1` values are in normalised target units,
/// `valid_mae` in distance units.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub kind: Kind,
    pub epochs: usize,
    pub best_epoch: usize,
    pub final_train_l1: f64,
    pub best_valid_l1: f64,
    pub valid_mae: f64,
    pub history: TrainHistory,
}

/// Layer sizes of the network for `kind`.
pub fn layer_sizes(kind: Kind, dim: usize, k_max: usize, hidden: &[usize]) -> Result<Vec<usize>> {
    let (Some(n_in), Some(n_out)) = (kind.input_size(dim, k_max), kind.output_size(k_max)) else {
        return Err(Error::invalid("the pivot estimator has no network"));
    };
    let mut sizes = vec![n_in];
    sizes.extend_from_slice(hidden);
    sizes.push(n_out);
    Ok(sizes)
}

/// Trains the estimator of `kind` on `corpus`. The pivot kind needs no
/// training and is returned directly.
pub fn train_estimator(
    kind: Kind,
    corpus: &TrainingCorpus,
    grid: Option<Arc<PivotGrid>>,
    cfg: &EstimatorConfig,
) -> Result<(Estimator, Option<TrainReport>)> {
    let grid = if kind.needs_grid() {
        let g = grid.ok_or_else(|| Error::invalid(format!("{kind} needs a pivot grid")))?;
        if g.k_max() != corpus.k_max() || g.dim() != corpus.dim() {
            return Err(Error::invalid("grid does not match the corpus"));
        }
        Some(g)
    } else {
        None
    };
    if kind == Kind::Pivot {
        return Ok((Estimator::pivot(grid.unwrap()), None));
    }
    if corpus.train_idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (tx, ty) = corpus.feature_rows(kind, grid.as_deref(), &corpus.train_idx)?;
    let (vx, vy) = corpus.feature_rows(kind, grid.as_deref(), &corpus.valid_idx)?;
    let norm: Normalization = fit_normalization(tx.view(), ty.view())?;
    let (tx, ty) = (norm.inputs_f32(tx.view()), norm.targets_f32(ty.view()));
    let (vx, vy) = (norm.inputs_f32(vx.view()), norm.targets_f32(vy.view()));

    let sizes = layer_sizes(kind, corpus.dim(), corpus.k_max(), &cfg.hidden)?;
    let model = Mlp::<f32>::init(&sizes, derive_seed(cfg.train.seed, 1))?;
    let train_cfg = TrainConfig { seed: derive_seed(cfg.train.seed, 2), ..cfg.train.clone() };
    let (model, history) =
        train(&model, Samples::new(tx.view(), ty.view()), Samples::new(vx.view(), vy.view()), &train_cfg)?;

    let report = TrainReport {
        kind,
        epochs: history.train_loss.len(),
        best_epoch: history.best_epoch,
        final_train_l1: *history.train_loss.last().unwrap_or(&f64::NAN),
        best_valid_l1: history.best_loss,
        valid_mae: history.best_loss * norm.target_scale,
        history,
    };
    let est = Estimator::network(kind, corpus.dim(), corpus.k_max(), model, norm, grid)?;
    Ok((est, Some(report)))
}
