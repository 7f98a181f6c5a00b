//! Uses of k-NN distance estimates: density grids, distance-based outlier
//! detection, threshold-seeded k-NN search and density-peaks clustering.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::{distance, BBox, Dataset};
use crate::estimators::DistanceSource;
use crate::spatial::{KdTree, NeighborList};
use crate::{Error, Result};

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = V_{d-2} * 2π / d
    let (mut even, mut odd) = (1.0, 2.0);
    for i in 2..=d {
        if i % 2 == 0 {
            even *= 2.0 * PI / i as f64;
        } else {
            odd *= 2.0 * PI / i as f64;
        }
    }
    if d % 2 == 0 {
        even
    } else {
        odd
    }
}

/// k-NN density estimate from the first `k` entries of `dv`:
/// `(1 / (n V_d)) * (Σ j^{d/2} / Σ dist_j^d)^{d/2}`.
///
/// Returns `+∞` when one of the used distances is zero.
pub fn knn_density(dv: &[f64], k: usize, n: usize, d: usize) -> Result<f64> {
    if k == 0 || k > dv.len() {
        return Err(Error::KOutOfRange { k, max: dv.len() });
    }
    if n == 0 || d == 0 {
        return Err(Error::invalid("dataset size and dimension must be positive"));
    }
    let half = d as f64 / 2.0;
    let used = &dv[..k];
    if used.iter().any(|&x| x == 0.0) {
        return Ok(f64::INFINITY);
    }
    let num: f64 = (1..=k).map(|j| (j as f64).powf(half)).sum();
    let den: f64 = used.iter().map(|x| x.powi(d as i32)).sum();
    Ok((num / den).powf(half) / (n as f64 * unit_ball_volume(d)))
}

/// Percentiles separating the four contour bins.
pub const CONTOUR_PERCENTILES: [f64; 3] = [20.0, 60.0, 90.0];

#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub width: usize,
    pub height: usize,
    pub bbox: BBox,
    /// Row-major with `y` slowest.
    pub values: Vec<f64>,
    pub thresholds: [f64; 3],
    pub bins: Vec<u8>,
}

/// Nearest-rank percentile of already sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Density at every pixel centroid of a `width × height` split of `bbox`.
/// `n` is the size of the set the distances refer to.
pub fn density_grid<S: DistanceSource + ?Sized>(
    source: &S,
    bbox: &BBox,
    width: usize,
    height: usize,
    k: usize,
    n: usize,
) -> Result<DensityGrid> {
    if bbox.dim() != 2 || source.dim() != 2 {
        return Err(Error::invalid("density grids need 2-dimensional data"));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    if k == 0 || k > source.k_max() {
        return Err(Error::KOutOfRange { k, max: source.k_max() });
    }
    let values: Vec<f64> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let q = pixel_centroid(bbox, width, height, i % width, i / width);
            let dv = source.distances(&q)?;
            knn_density(&dv, k, n, 2)
        })
        .collect::<Result<_>>()?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let thresholds = CONTOUR_PERCENTILES.map(|p| percentile(&sorted, p));
    let bins = values.iter().map(|&v| contour_bin(v, &thresholds)).collect();
    Ok(DensityGrid { width, height, bbox: bbox.clone(), values, thresholds, bins })
}

pub fn pixel_centroid(bbox: &BBox, width: usize, height: usize, px: usize, py: usize) -> [f64; 2] {
    [
        bbox.min[0] + (px as f64 + 0.5) * bbox.width(0) / width as f64,
        bbox.min[1] + (py as f64 + 0.5) * bbox.width(1) / height as f64,
    ]
}

fn contour_bin(v: f64, t: &[f64; 3]) -> u8 {
    if v == f64::INFINITY {
        return 3;
    }
    t.iter().filter(|&&th| v > th).count() as u8
}

impl DensityGrid {
    /// Share of pixels whose bin matches `other`.
    pub fn agreement(&self, other: &DensityGrid) -> Result<f64> {
        if self.bins.len() != other.bins.len() {
            return Err(Error::DimensionMismatch { expected: self.bins.len(), got: other.bins.len() });
        }
        let same = self.bins.iter().zip(&other.bins).filter(|(a, b)| a == b).count();
        Ok(same as f64 / self.bins.len() as f64)
    }

    /// `pixel_x,pixel_y,density,bin` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pixel_x,pixel_y,density,bin\n");
        for (i, (v, b)) in self.values.iter().zip(&self.bins).enumerate() {
            let _ = writeln!(s, "{},{},{},{}", i % self.width, i / self.width, v, b);
        }
        s
    }

    /// Binary PPM heatmap of the contour bins, north up.
    pub fn to_ppm(&self) -> Vec<u8> {
        const PALETTE: [[u8; 3]; 4] = [[255, 255, 204], [161, 218, 180], [65, 182, 196], [37, 52, 148]];
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                out.extend_from_slice(&PALETTE[self.bins[y * self.width + x] as usize]);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DodParams {
    /// Flag points with fewer than `k` others within `r`.
    Radius { r: f64, k: usize },
    /// The `n` points with the largest k-th NN distance.
    TopN { n: usize, k: usize },
}

/// Distance-based outliers of `data`. `source` must treat its queries as
/// members of `data`, so the k-th neighbor excludes the point itself.
///
/// Radius results are ascending indices; top-N results are ordered by
/// decreasing k-th NN distance, ties to the lower index.
pub fn detect_outliers<S: DistanceSource + ?Sized>(
    data: &Dataset,
    source: &S,
    params: DodParams,
) -> Result<Vec<usize>> {
    let k = match params {
        DodParams::Radius { r, k } => {
            if !(r > 0.0) {
                return Err(Error::invalid("radius must be positive"));
            }
            k
        }
        DodParams::TopN { n, k } => {
            if n == 0 || n > data.len() {
                return Err(Error::invalid(format!("outlier count {n} must lie in 1..={}", data.len())));
            }
            k
        }
    };
    if k == 0 {
        return Err(Error::KOutOfRange { k, max: source.k_max() });
    }
    let kth = kth_distances(data, source, k)?;
    Ok(match params {
        DodParams::Radius { r, .. } => (0..data.len()).filter(|&i| kth[i] > r).collect(),
        DodParams::TopN { n, .. } => {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.sort_by(|&a, &b| kth[b].total_cmp(&kth[a]).then(a.cmp(&b)));
            order.truncate(n);
            order
        }
    })
}

/// k-th NN distance of every point of `data` according to `source`.
pub fn kth_distances<S: DistanceSource + ?Sized>(data: &Dataset, source: &S, k: usize) -> Result<Vec<f64>> {
    if data.dim() != source.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), got: data.dim() });
    }
    (0..data.len()).into_par_iter().map(|i| source.kth(data.point(i), k)).collect()
}

/// Exact k-NN search seeded with the estimated k-th NN distance as the
/// initial pruning radius. May return fewer than `k` neighbors when the
/// estimate is too small.
pub fn aknn_search<S: DistanceSource + ?Sized>(tree: &KdTree, source: &S, q: &[f64], k: usize) -> Result<NeighborList> {
    let tau = source.kth(q, k)?;
    tree.knn_seeded(q, k, tau)
}

/// Share of `exact` neighbors present in `found`.
pub fn recall(found: &NeighborList, exact: &NeighborList) -> f64 {
    if exact.is_empty() {
        return 1.0;
    }
    let exact_idx: std::collections::HashSet<usize> = exact.0.iter().map(|n| n.index).collect();
    found.0.iter().filter(|n| exact_idx.contains(&n.index)).count() as f64 / exact.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpcResult {
    /// Number of other points within `d_cut`.
    pub rho: Vec<usize>,
    pub delta: Vec<f64>,
    /// Nearest denser point; `None` only for the density peak.
    pub dependent: Vec<Option<usize>>,
    /// Cluster id, `None` for noise.
    pub labels: Vec<Option<usize>>,
    /// Center point of each cluster id.
    pub centers: Vec<usize>,
}

impl DpcResult {
    /// Labels with noise mapped to `usize::MAX`, for agreement scores.
    pub fn flat_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect()
    }

    /// `index,rho,delta,dependent,label` rows; noise and missing links are
    /// written as -1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,rho,delta,dependent,label\n");
        for i in 0..self.rho.len() {
            let dep = self.dependent[i].map_or("-1".to_string(), |d| d.to_string());
            let lab = self.labels[i].map_or("-1".to_string(), |l| l.to_string());
            let _ = writeln!(s, "{i},{},{},{dep},{lab}", self.rho[i], self.delta[i]);
        }
        s
    }

    pub fn decision_graph_csv(&self) -> String {
        let mut s = String::from("rho,delta\n");
        for (r, d) in self.rho.iter().zip(&self.delta) {
            let _ = writeln!(s, "{r},{d}");
        }
        s
    }
}

/// Position of every point in decreasing-density order, ties to the lower
/// index.
pub fn density_rank(rho: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[b].cmp(&rho[a]).then(a.cmp(&b)));
    let mut rank = vec![0; rho.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }
    rank
}

/// Density-peaks clustering.
pub fn dpc_cluster(data: &Dataset, tree: &KdTree, d_cut: f64, rho_min: usize, delta_min: f64) -> Result<DpcResult> {
    if !(d_cut > 0.0) {
        return Err(Error::invalid("d_cut must be positive"));
    }
    if rho_min == 0 {
        return Err(Error::invalid("rho_min must be at least 1"));
    }
    if tree.len() != data.len() {
        return Err(Error::invalid("kd-tree does not index the dataset"));
    }
    let n = data.len();
    let rho: Vec<usize> =
        (0..n).into_par_iter().map(|i| tree.range_count(data.point(i), d_cut).map(|c| c - 1)).collect::<Result<_>>()?;
    let rank = density_rank(&rho);
    let filter = tree.rank_filter(&rank)?;
    let links: Vec<Option<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| Ok(tree.nearest_ranked_below(data.point(i), &filter, rank[i])?.map(|nb| (nb.index, nb.distance))))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| rank[i]);
    let peak = order[0];
    let peak_delta = data.points().map(|p| distance(data.point(peak), p)).fold(0.0, f64::max);

    let dependent: Vec<Option<usize>> = links.iter().map(|l| l.map(|(j, _)| j)).collect();
    let delta: Vec<f64> = links.iter().map(|l| l.map_or(peak_delta, |(_, d)| d)).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut centers = Vec::new();
    for &i in &order {
        if rho[i] < rho_min {
            continue;
        }
        if delta[i] >= delta_min {
            labels[i] = Some(centers.len());
            centers.push(i);
        } else if let Some(j) = dependent[i] {
            labels[i] = labels[j];
        }
    }
    if centers.is_empty() && rho[peak] >= rho_min {
        let max_delta = delta.iter().cloned().fold(0.0, f64::max);
        return Err(Error::NoCenters { delta_min, max_delta });
    }
    Ok(DpcResult { rho, delta, dependent, labels, centers })
}

/// `m`-th largest estimated `rho_min`-NN distance over `data`.
pub fn estimate_dcut<S: DistanceSource + ?Sized>(source: &S, data: &Dataset, rho_min: usize, m: usize) -> Result<f64> {
    if m == 0 || m > data.len() {
        return Err(Error::invalid(format!("m = {m} must lie in 1..={}", data.len())));
    }
    let mut kth = kth_distances(data, source, rho_min)?;
    kth.sort_by(|a, b| b.total_cmp(a));
    Ok(kth[m - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{derive_seed, seeded_rng};
    use crate::estimators::ExactOracle;
    use rand::Rng;

    fn random_data(n: usize, d: usize, scale: f64, seed: u64) -> Dataset {
        let mut rng = seeded_rng(seed);
        let coords = (0..n * d).map(|_| rng.random_range(0.0..scale)).collect();
        Dataset::new(d, coords).unwrap()
    }

    /// Sum over j of dist_j^d, taken term by term without powi.
    fn density_oracle(dv: &[f64], k: usize, n: usize, d: usize) -> f64 {
        let vd = match d {
            1 => 2.0,
            2 => PI,
            3 => 4.0 * PI / 3.0,
            _ => unreachable!(),
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 1..=k {
            num += (j as f64).sqrt().powi(d as i32);
            let mut p = 1.0;
            for _ in 0..d {
                p *= dv[j - 1];
            }
            den += p;
        }
        (num / den).sqrt().powi(d as i32) / (n as f64 * vd)
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-12);
    }

    #[test]
    fn density_examples() {
        let v = knn_density(&[1.0], 1, 100, 2).unwrap();
        assert!((v - 1.0 / (100.0 * PI)).abs() < 1e-15);
        assert!((v - 0.003_183_1).abs() < 1e-7);
        assert_eq!(knn_density(&[0.0, 1.0], 2, 10, 2).unwrap(), f64::INFINITY);
        assert!(knn_density(&[1.0], 2, 10, 2).is_err());
    }

    #[test]
    fn density_homogeneity() {
        // the estimator as written scales with s^(-d*d/2), which is s^-d only for d = 2
        let dv = [0.4, 0.9, 1.3, 2.0];
        for d in 1..=3 {
            for s in [0.5, 2.0, 3.0] {
                let scaled: Vec<f64> = dv.iter().map(|x| x * s).collect();
                let ratio = knn_density(&scaled, 4, 50, d).unwrap() / knn_density(&dv, 4, 50, d).unwrap();
                let expect = s.powf(-((d * d) as f64) / 2.0);
                assert!((ratio / expect - 1.0).abs() < 1e-12, "d={d} s={s}");
            }
        }
        let a = knn_density(&dv, 3, 50, 2).unwrap();
        let b = knn_density(&dv.map(|x| 2.0 * x), 3, 50, 2).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn density_matches_oracle() {
        let mut rng = seeded_rng(5);
        for trial in 0..50 {
            let d = 1 + trial % 3;
            let mut dv: Vec<f64> = (0..10).map(|_| rng.random_range(0.01..5.0)).collect();
            dv.sort_by(f64::total_cmp);
            let k = 1 + trial % 10;
            let ours = knn_density(&dv, k, 1234, d).unwrap();
            let oracle = density_oracle(&dv, k, 1234, d);
            assert!((ours / oracle - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_grid() {
        let data = Dataset::from_points(&[[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]).unwrap();
        let tree = KdTree::build(&data).unwrap();
        let bbox = BBox::cube(2, 0.0, 1.0).unwrap();
        let g = density_grid(&ExactOracle::new(&tree, 3), &bbox, 2, 2, 3, 4).unwrap();
        assert!(g.values.iter().all(|&v| v == f64::INFINITY));
        let bbox = BBox::cube(2, -0.5, 1.5).unwrap();
        let g = density_grid(&ExactOracle::new(&tree, 3), &bbox, 2, 2, 3, 4).unwrap();
        assert!(g.values.iter().all(|&v| v == g.values[0] && v.is_finite()));
    }

    #[test]
    fn uniform_lattice_lands_in_one_bin() {
        // pixel centroids at lattice-cell centres see identical neighborhoods
        let pts: Vec<[f64; 2]> = (0..30).flat_map(|i| (0..30).map(move |j| [i as f64, j as f64])).collect();
        let data = Dataset::from_points(&pts).unwrap();
        let tree = KdTree::build(&data).unwrap();
        let bbox = BBox::cube(2, 10.0, 20.0).unwrap();
        let g = density_grid(&ExactOracle::new(&tree, 8), &bbox, 10, 10, 8, data.len()).unwrap();
        let lo = *g.bins.iter().min().unwrap();
        let hi = *g.bins.iter().max().unwrap();
        assert!(hi - lo <= 1);
    }

    #[test]
    fn grid_bins_follow_percentiles() {
        let data = random_data(300, 2, 10.0, 1);
        let tree = KdTree::build(&data).unwrap();
        let g = density_grid(&ExactOracle::new(&tree, 5), data.bbox(), 20, 20, 5, 300).unwrap();
        let count = |b| g.bins.iter().filter(|&&x| x == b).count();
        assert_eq!(count(0), 80);
        assert_eq!(count(3), 40);
        assert_eq!(count(1) + count(2), 280);
        assert_eq!(g.agreement(&g).unwrap(), 1.0);
        assert!(g.to_csv().starts_with("pixel_x,pixel_y,density,bin\n0,0,"));
        assert_eq!(g.to_ppm().len(), "P6\n20 20\n255\n".len() + 20 * 20 * 3);
        let d3 = random_data(10, 3, 1.0, 2);
        let t3 = KdTree::build(&d3).unwrap();
        assert!(density_grid(&ExactOracle::new(&t3, 2), d3.bbox(), 2, 2, 1, 10).is_err());
    }

    fn brute_kth_excl(data: &Dataset, i: usize, k: usize) -> f64 {
        let mut d: Vec<f64> =
            (0..data.len()).filter(|&j| j != i).map(|j| distance(data.point(i), data.point(j))).collect();
        d.sort_by(f64::total_cmp);
        d[k - 1]
    }

    #[test]
    fn dod_simple_cases() {
        let mut pts: Vec<[f64; 2]> = (0..20).map(|i| [(i % 5) as f64 * 0.1, (i / 5) as f64 * 0.1]).collect();
        pts.push([50.0, 50.0]);
        let data = Dataset::from_points(&pts).unwrap();
        let tree = KdTree::build(&data).unwrap();
        let oracle = ExactOracle::members(&tree, 5);
        assert_eq!(detect_outliers(&data, &oracle, DodParams::TopN { n: 1, k: 1 }).unwrap(), vec![20]);
        assert!(detect_outliers(&data, &oracle, DodParams::Radius { r: 1000.0, k: 3 }).unwrap().is_empty());
        assert!(detect_outliers(&data, &oracle, DodParams::TopN { n: 22, k: 1 }).is_err());
    }

    #[test]
    fn dod_matches_brute_force() {
        for seed in 0..5 {
            let data = random_data(300, 2, 10.0, seed);
            let tree = KdTree::build(&data).unwrap();
            let oracle = ExactOracle::members(&tree, 10);
            let (r, k) = (0.9, 5);
            // Definition form: fewer than k other points within r
            let expect: Vec<usize> = (0..data.len())
                .filter(|&i| {
                    (0..data.len()).filter(|&j| j != i && distance(data.point(i), data.point(j)) <= r).count() < k
                })
                .collect();
            assert_eq!(detect_outliers(&data, &oracle, DodParams::Radius { r, k }).unwrap(), expect);
            let mut by_kth: Vec<(f64, usize)> = (0..data.len()).map(|i| (brute_kth_excl(&data, i, k), i)).collect();
            by_kth.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let top: Vec<usize> = by_kth.iter().take(15).map(|x| x.1).collect();
            assert_eq!(detect_outliers(&data, &oracle, DodParams::TopN { n: 15, k }).unwrap(), top);
        }
    }

    #[test]
    fn aknn_with_exact_threshold() {
        let data = random_data(500, 3, 1.0, 3);
        let tree = KdTree::build(&data).unwrap();
        let oracle = ExactOracle::new(&tree, 20);
        let mut rng = seeded_rng(derive_seed(3, 1));
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let exact = tree.knn(&q, 20).unwrap();
            let found = aknn_search(&tree, &oracle, &q, 20).unwrap();
            assert_eq!(found, exact);
            assert_eq!(recall(&found, &exact), 1.0);
        }
    }

    #[test]
    fn aknn_zero_threshold_is_error() {
        struct Zero;
        impl DistanceSource for Zero {
            fn dim(&self) -> usize {
                2
            }
            fn k_max(&self) -> usize {
                5
            }
            fn label(&self) -> String {
                "zero".into()
            }
            fn distances(&self, _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![0.0; 5])
            }
        }
        let data = random_data(50, 2, 1.0, 4);
        let tree = KdTree::build(&data).unwrap();
        assert!(aknn_search(&tree, &Zero, &[0.5, 0.5], 3).is_err());
    }

    fn brute_dpc(
        data: &Dataset,
        d_cut: f64,
        rho_min: usize,
        delta_min: f64,
    ) -> (Vec<usize>, Vec<f64>, Vec<Option<usize>>) {
        let n = data.len();
        let dist = |i: usize, j: usize| distance(data.point(i), data.point(j));
        let rho: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| j != i && dist(i, j) <= d_cut).count()).collect();
        let denser = |j: usize, i: usize| rho[j] > rho[i] || (rho[j] == rho[i] && j < i);
        let mut delta = vec![0.0; n];
        let mut dep = vec![None; n];
        for i in 0..n {
            let mut best: Option<(f64, usize)> = None;
            for j in 0..n {
                if denser(j, i) {
                    let d = dist(i, j);
                    if best.is_none_or(|(bd, bj)| d < bd || (d == bd && j < bj)) {
                        best = Some((d, j));
                    }
                }
            }
            match best {
                Some((d, j)) => {
                    delta[i] = d;
                    dep[i] = Some(j);
                }
                None => delta[i] = (0..n).map(|j| dist(i, j)).fold(0.0, f64::max),
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| rho[b].cmp(&rho[a]).then(a.cmp(&b)));
        let mut labels = vec![None; n];
        let mut next = 0;
        for &i in &order {
            if rho[i] < rho_min {
                continue;
            }
            if delta[i] >= delta_min {
                labels[i] = Some(next);
                next += 1;
            } else {
                labels[i] = labels[dep[i].unwrap()];
            }
        }
        (rho, delta, labels)
    }

    #[test]
    fn dpc_matches_brute_force() {
        for seed in 0..10 {
            let mut rng = seeded_rng(seed);
            let pts: Vec<[f64; 2]> = (0..40)
                .map(|i| {
                    let c = if i % 2 == 0 { 0.0 } else { 5.0 };
                    [c + rng.random_range(0.0..2.0), c + rng.random_range(0.0..2.0)]
                })
                .collect();
            let data = Dataset::from_points(&pts).unwrap();
            let tree = KdTree::with_leaf_size(&data, 4).unwrap();
            let (rho, delta, labels) = brute_dpc(&data, 1.0, 2, 2.5);
            let got = dpc_cluster(&data, &tree, 1.0, 2, 2.5).unwrap();
            assert_eq!(got.rho, rho);
            assert_eq!(got.delta, delta);
            assert_eq!(got.labels, labels);
            for (i, l) in got.labels.iter().enumerate() {
                assert_eq!(l.is_none(), got.rho[i] < 2);
            }
        }
    }

    #[test]
    fn dpc_two_blobs() {
        let mut rng = seeded_rng(11);
        let mut pts = Vec::new();
        for c in [[0.0, 0.0], [20.0, 20.0]] {
            for _ in 0..50 {
                pts.push([c[0] + rng.random_range(-1.0..1.0), c[1] + rng.random_range(-1.0..1.0)]);
            }
        }
        let data = Dataset::from_points(&pts).unwrap();
        let tree = KdTree::build(&data).unwrap();
        let r = dpc_cluster(&data, &tree, 0.8, 1, 5.0).unwrap();
        assert_eq!(r.centers.len(), 2);
        let truth: Vec<usize> = (0..100).map(|i| i / 50).collect();
        let non_noise: Vec<usize> = (0..100).filter(|&i| r.labels[i].is_some()).collect();
        assert!(non_noise.len() > 90);
        for &i in &non_noise {
            assert_eq!(r.labels[i], r.labels[non_noise.iter().copied().find(|&j| truth[j] == truth[i]).unwrap()]);
        }
        assert_ne!(r.labels[0], r.labels[99]);
        // every chain of dependents ends at a center
        for &i in &non_noise {
            let mut cur = i;
            let mut steps = 0;
            while !r.centers.contains(&cur) {
                cur = r.dependent[cur].unwrap();
                steps += 1;
                assert!(steps <= 100);
            }
        }
    }

    #[test]
    fn dpc_degenerate_cases() {
        let data = Dataset::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0]]).unwrap();
        let tree = KdTree::build(&data).unwrap();
        let r = dpc_cluster(&data, &tree, 0.5, 1, 0.1).unwrap();
        assert!(r.rho.iter().all(|&v| v == 0));
        assert!(r.labels.iter().all(Option::is_none));
        assert!(matches!(dpc_cluster(&data, &tree, 1.5, 1, 100.0), Err(Error::NoCenters { .. })));
        assert!(dpc_cluster(&data, &tree, 0.0, 1, 1.0).is_err());
    }

    #[test]
    fn dcut_order_statistic() {
        let data = random_data(200, 2, 10.0, 7);
        let tree = KdTree::build(&data).unwrap();
        let oracle = ExactOracle::members(&tree, 10);
        let mut kth: Vec<f64> = (0..200).map(|i| brute_kth_excl(&data, i, 10)).collect();
        kth.sort_by(|a, b| b.total_cmp(a));
        for m in [1, 7, 200] {
            assert_eq!(estimate_dcut(&oracle, &data, 10, m).unwrap(), kth[m - 1]);
        }
        assert!(estimate_dcut(&oracle, &data, 11, 1).is_err());
        assert!(estimate_dcut(&oracle, &data, 10, 0).is_err());
    }
}
