//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNMET` are reported but do not fail the run;
//! the README explains each of them. Any other FAIL panics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use pivnet::applications::{
    aknn_search, density_grid, detect_outliers, dpc_cluster, estimate_dcut, recall, DodParams, DpcResult,
};
use pivnet::dataset::{
    augment_uniform, derive_seed, gen_gaussian_mixture, gen_random_walk_clusters, partition, plant_outliers,
    random_walk_labels, seeded_rng, BBox, Dataset, Partition,
};
use pivnet::estimators::{
    assemble_features, fit_normalization, DistanceSource, Estimator, ExactOracle, Kind, Workspace,
};
use pivnet::evaluation::{adjusted_rand_index, error_report, mean, median, precision_recall};
use pivnet::grid::PivotGrid;
use pivnet::nn::{grad_check, Mlp};
use pivnet::spatial::KdTree;
use pivnet::trainer::{build_corpus, layer_sizes, train_estimator, EstimatorConfig, DEFAULT_HIDDEN};
use rand::Rng;

// Pinned tolerances.
const C1_INSTANCES: usize = 100;
const C1_SECONDS: f64 = 10.0;
const C2_PROBES: usize = 10_000;
const C3_CONFIGS: usize = 20;
const C3_MAX_REL: f64 = 1e-4;
const C3_SECONDS: f64 = 30.0;
const C4_SEEDS: u64 = 5;
const C4_MIN_WINS: usize = 4;
const C4_MINUTES: f64 = 15.0;
const C5_MAX_PIVNET_GROWTH: f64 = 1.5;
const C5_MIN_TREE_GROWTH: f64 = 1.05;
const C6_MIN_RATIO: f64 = 10.0;
const C7_MIN_AGREEMENT: f64 = 0.85;
const C8_MIN_PR: f64 = 0.8;
const C9_MIN_AVG_RECALL: f64 = 0.8;
const C10_MAX_DEVIATION: f64 = 0.15;
const C10_MIN_ARI: f64 = 0.9;

/// Criteria expected to fail; see the README.
const KNOWN_UNMET: &[u32] = &[9, 10];

// Desk-scale mixture setup: 61k source points, 10k + 1k sampled queries,
// |X| = 50k.
const MIX_POINTS: usize = 61_000;
const MIX_COMPONENTS: usize = 8;
const N_TRAIN: usize = 10_000;
const N_TEST: usize = 1_000;
const CELLS: usize = 256;
const K_MAX: usize = 50;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

struct Mixture {
    part: Partition,
    tree: KdTree,
    grid: Arc<PivotGrid>,
    /// Sampled test queries first, then augmented ones.
    test: Vec<Vec<f64>>,
    exact: Vec<Vec<f64>>,
    pivnet: Estimator,
    querynet: Estimator,
}

fn mixture_data(seed: u64) -> Dataset {
    let bbox = BBox::cube(2, 0.0, 100.0).unwrap();
    gen_gaussian_mixture(MIX_POINTS, MIX_COMPONENTS, &bbox, (2.0, 8.0), seed).unwrap().0
}

fn setup(data: &Dataset, seed: u64) -> Mixture {
    let part = partition(data, N_TRAIN, N_TEST, derive_seed(seed, 10)).unwrap();
    let tree = KdTree::build(&part.reference_set).unwrap();
    let grid = Arc::new(PivotGrid::build(&part.reference_set, &tree, CELLS, K_MAX).unwrap());
    let corpus = build_corpus(&part, &grid, &tree, N_TRAIN, derive_seed(seed, 11)).unwrap();
    let mut cfg = EstimatorConfig::default();
    cfg.train.seed = seed;
    let (pivnet, _) = train_estimator(Kind::PivNet, &corpus, Some(grid.clone()), &cfg).unwrap();
    let (querynet, _) = train_estimator(Kind::QueryNet, &corpus, None, &cfg).unwrap();
    let mut test = part.test_queries.clone();
    test.extend(augment_uniform(grid.bbox(), N_TEST, derive_seed(seed, 12)).unwrap());
    let exact = test.iter().map(|q| scan(&part.reference_set, q, K_MAX).1).collect();
    Mixture { part, tree, grid, test, exact, pivnet, querynet }
}

/// Independent brute-force k-NN: (indices, distances), ties to the lower index.
fn scan(data: &Dataset, q: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    let mut all: Vec<(f64, usize)> = data
        .points()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    (all.iter().map(|a| a.1).collect(), all.iter().map(|a| a.0.sqrt()).collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn c1() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded_rng(101);
    let mut mismatches = 0;
    for _ in 0..C1_INSTANCES {
        let n = rng.random_range(1..=500);
        let d = rng.random_range(1..=5);
        let k = rng.random_range(1..=50usize).min(n);
        // Integer grids give plenty of exact ties.
        let lattice = rng.random_bool(0.3);
        let coords: Vec<f64> = (0..n * d)
            .map(|_| if lattice { rng.random_range(0..6) as f64 } else { rng.random_range(-10.0..10.0) })
            .collect();
        let data = Dataset::new(d, coords).unwrap();
        let tree = KdTree::build(&data).unwrap();
        for _ in 0..10 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-11.0..11.0)).collect();
            let got = tree.knn(&q, k).unwrap();
            let want = scan(&data, &q, k);
            if got.indices() != want.0 || got.distances() != want.1 {
                mismatches += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        pass: mismatches == 0 && secs < C1_SECONDS,
        detail: format!("{mismatches} mismatching queries over {C1_INSTANCES} instances, {secs:.2} s"),
    }
}

fn c2(m: &Mixture) -> Outcome {
    let mut rng = seeded_rng(202);
    let mut violations = 0;
    for i in 0..C2_PROBES {
        let qi = i % m.test.len();
        let k = rng.random_range(1..=K_MAX);
        if m.grid.pivot_bound(&m.test[qi], k).unwrap() < m.exact[qi][k - 1] {
            violations += 1;
        }
    }
    Outcome {
        id: 2,
        pass: violations == 0,
        detail: format!("{violations} of {C2_PROBES} probes below the exact distance"),
    }
}

fn c3() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded_rng(303);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for c in 0..C3_CONFIGS {
        let depth = rng.random_range(1..=4);
        let mut sizes = vec![rng.random_range(1..=6)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..=8));
        }
        let net: Mlp<f64> = Mlp::init(&sizes, 1000 + c as u64).unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = grad_check(&net, &x, &y, 1e-6).unwrap();
        worst = worst.max(g.max_rel_error);
        checked += g.checked;
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 3,
        pass: worst < C3_MAX_REL && checked > 0 && secs < C3_SECONDS,
        detail: format!("max relative error {worst:.2e} over {checked} parameters, {secs:.2} s"),
    }
}

fn c4(runs: &[(u64, f64, f64, f64)], minutes: f64) -> Outcome {
    let wins = runs.iter().filter(|r| r.1 < r.2 && r.1 < r.3).count();
    let lines: Vec<String> =
        runs.iter().map(|r| format!("seed {}: pivnet {:.4} pivot {:.4} querynet {:.4}", r.0, r.1, r.2, r.3)).collect();
    Outcome {
        id: 4,
        pass: wins >= C4_MIN_WINS && minutes <= C4_MINUTES,
        detail: format!(
            "pivnet best in {wins}/{} seeds, setup and training {minutes:.1} min; {}",
            runs.len(),
            lines.join("; ")
        ),
    }
}

/// Untrained network of the default shape with normalisation fitted on the
/// grid's own features; latency does not depend on the weights.
fn shaped_estimator(kind: Kind, grid: &Arc<PivotGrid>, queries: &[Vec<f64>]) -> Estimator {
    let sizes = layer_sizes(kind, grid.dim(), grid.k_max(), &DEFAULT_HIDDEN).unwrap();
    let model = Mlp::init(&sizes, 5).unwrap();
    let k = (kind == Kind::PivNetItr).then_some(1);
    let rows: Vec<f64> = queries.iter().flat_map(|q| assemble_features(kind, q, Some(grid), k).unwrap()).collect();
    let inputs = ndarray::Array2::from_shape_vec((queries.len(), sizes[0]), rows).unwrap();
    let targets = ndarray::Array2::from_elem((queries.len(), *sizes.last().unwrap()), 1.0);
    let norm = fit_normalization(inputs.view(), targets.view()).unwrap();
    Estimator::network(kind, grid.dim(), grid.k_max(), model, norm, Some(grid.clone())).unwrap()
}

fn mean_latency_us(queries: &[Vec<f64>], iters: usize, mut probe: impl FnMut(&[f64])) -> f64 {
    for q in queries.iter().take(200) {
        probe(q);
    }
    let t = Instant::now();
    for i in 0..iters {
        probe(&queries[i % queries.len()]);
    }
    t.elapsed().as_secs_f64() * 1e6 / iters as f64
}

fn c5() -> Outcome {
    let bbox = BBox::cube(2, 0.0, 100.0).unwrap();
    let big = gen_gaussian_mixture(1_000_000, MIX_COMPONENTS, &bbox, (2.0, 8.0), 505).unwrap().0;
    let small = big.subset(&(0..100_000).collect::<Vec<_>>()).unwrap();
    let queries = augment_uniform(&bbox, 10_000, 506).unwrap();
    let setups: Vec<(KdTree, Estimator)> = [&small, &big]
        .iter()
        .map(|x| {
            let tree = KdTree::build(x).unwrap();
            let grid = Arc::new(PivotGrid::build(x, &tree, CELLS, K_MAX).unwrap());
            let est = shaped_estimator(Kind::PivNet, &grid, &queries[..1000]);
            (tree, est)
        })
        .collect();
    // Interleaved rounds, best round per configuration, to damp machine noise.
    let mut best = [[f64::INFINITY; 2]; 2];
    for _ in 0..5 {
        for (s, (tree, est)) in setups.iter().enumerate() {
            let (mut ws, mut out) = (Workspace::default(), Vec::new());
            let p = mean_latency_us(&queries, 20_000, |q| est.estimate_into(q, &mut ws, &mut out).unwrap());
            let e = mean_latency_us(&queries, 20_000, |q| drop(std::hint::black_box(tree.knn(q, K_MAX).unwrap())));
            best[0][s] = best[0][s].min(p);
            best[1][s] = best[1][s].min(e);
        }
    }
    let piv_growth = best[0][1] / best[0][0];
    let tree_growth = best[1][1] / best[1][0];
    Outcome {
        id: 5,
        pass: piv_growth < C5_MAX_PIVNET_GROWTH && tree_growth > C5_MIN_TREE_GROWTH && best[0][1] < best[1][1],
        detail: format!(
            "pivnet {:.2} -> {:.2} us (x{piv_growth:.2}), kd-tree {:.2} -> {:.2} us (x{tree_growth:.2}) for |X| 1e5 -> 1e6",
            best[0][0], best[0][1], best[1][0], best[1][1]
        ),
    }
}

fn c6(m: &Mixture) -> Outcome {
    let queries = &m.test;
    let itr = shaped_estimator(Kind::PivNetItr, &m.grid, &queries[..1000]);
    let (mut ws, mut out) = (Workspace::default(), Vec::new());
    let mut best = [f64::INFINITY; 2];
    for _ in 0..3 {
        best[0] =
            best[0].min(mean_latency_us(queries, 10_000, |q| m.pivnet.estimate_into(q, &mut ws, &mut out).unwrap()));
        best[1] = best[1].min(mean_latency_us(queries, 1_000, |q| itr.estimate_into(q, &mut ws, &mut out).unwrap()));
    }
    let ratio = best[1] / best[0];
    Outcome {
        id: 6,
        pass: ratio >= C6_MIN_RATIO,
        detail: format!("pivnet {:.2} us, pivnet-itr {:.2} us, ratio {ratio:.1}", best[0], best[1]),
    }
}

fn c7(m: &Mixture) -> Outcome {
    let x = &m.part.reference_set;
    let exact = ExactOracle::new(&m.tree, K_MAX);
    let want = density_grid(&exact, x.bbox(), 200, 200, 50, x.len()).unwrap();
    let got = density_grid(&m.pivnet, x.bbox(), 200, 200, 50, x.len()).unwrap();
    let agreement = got.agreement(&want).unwrap();
    Outcome {
        id: 7,
        pass: agreement >= C7_MIN_AGREEMENT,
        detail: format!("{:.2}% of 40000 pixels share a bin", agreement * 100.0),
    }
}

/// O(n²) self-excluded k-th NN distance of every point.
fn brute_kth(data: &Dataset, k: usize) -> Vec<f64> {
    (0..data.len())
        .map(|i| {
            let mut d: Vec<f64> =
                (0..data.len()).filter(|&j| j != i).map(|j| dist(data.point(i), data.point(j))).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

fn brute_dod(kth: &[f64], params: DodParams) -> Vec<usize> {
    match params {
        DodParams::Radius { r, .. } => (0..kth.len()).filter(|&i| kth[i] > r).collect(),
        DodParams::TopN { n, .. } => {
            let mut order: Vec<usize> = (0..kth.len()).collect();
            order.sort_by(|&a, &b| kth[b].total_cmp(&kth[a]).then(a.cmp(&b)));
            order.truncate(n);
            order
        }
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

fn c8() -> Outcome {
    let seed = 808;
    let base = mixture_data(seed);
    let region = BBox::cube(2, -50.0, 150.0).unwrap();
    let (data, _) = plant_outliers(&base, 100, &region, 15.0, derive_seed(seed, 50)).unwrap();
    let m = setup(&data, seed);
    let x = &m.part.reference_set;
    let exact = ExactOracle::members(&m.tree, K_MAX);
    let mut kth: Vec<f64> = (0..x.len()).map(|i| exact.kth(x.point(i), 50).unwrap()).collect();
    kth.sort_by(|a, b| b.total_cmp(a));
    let r = (kth[99] + kth[100]) / 2.0;
    let mut scores = Vec::new();
    let mut pass = true;
    for (name, params) in [("top-n", DodParams::TopN { n: 100, k: 50 }), ("radius", DodParams::Radius { r, k: 50 })] {
        let truth = detect_outliers(x, &exact, params).unwrap();
        let got = detect_outliers(x, &m.pivnet, params).unwrap();
        let pr = precision_recall(&got, &truth);
        pass &= pr.precision >= C8_MIN_PR && pr.recall >= C8_MIN_PR;
        scores.push(format!("{name} P {:.3} R {:.3}", pr.precision, pr.recall));
    }
    // Brute-force equivalence on small instances.
    let mut rng = seeded_rng(809);
    let mut mismatches = 0;
    for t in 0..20 {
        let n = rng.random_range(60..=500);
        let d = rng.random_range(1..=3);
        let small = Dataset::new(d, (0..n * d).map(|_| rng.random_range(0.0..10.0)).collect()).unwrap();
        let tree = KdTree::build(&small).unwrap();
        let k = rng.random_range(1..=20);
        let oracle = ExactOracle::members(&tree, k);
        let bk = brute_kth(&small, k);
        let r = bk[t % n];
        for params in [DodParams::TopN { n: 1 + t % 30, k }, DodParams::Radius { r, k }] {
            if sorted(detect_outliers(&small, &oracle, params).unwrap()) != sorted(brute_dod(&bk, params)) {
                mismatches += 1;
            }
        }
    }
    pass &= mismatches == 0;
    Outcome {
        id: 8,
        pass,
        detail: format!("{} (r = {r:.3}); brute-force mismatches {mismatches}/40", scores.join(", ")),
    }
}

fn c9(m: &Mixture) -> Outcome {
    let queries = &m.part.test_queries;
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [25, 50] {
        let mut est_recall = Vec::new();
        let mut oracle_recall = Vec::new();
        let oracle = ExactOracle::new(&m.tree, K_MAX);
        for q in queries {
            let exact = m.tree.knn(q, k).unwrap();
            est_recall.push(recall(&aknn_search(&m.tree, &m.pivnet, q, k).unwrap(), &exact));
            oracle_recall.push(recall(&aknn_search(&m.tree, &oracle, q, k).unwrap(), &exact));
        }
        let (avg, med) = (mean(&est_recall), median(&est_recall));
        let full = est_recall.iter().filter(|&&r| r == 1.0).count();
        let oracle_ok = oracle_recall.iter().all(|&r| r == 1.0);
        pass &= med == 1.0 && avg >= C9_MIN_AVG_RECALL && oracle_ok;
        parts.push(format!(
            "k={k}: median {med:.3} average {avg:.3} full recall {full}/{} oracle exact {oracle_ok}",
            queries.len()
        ));
    }
    Outcome { id: 9, pass, detail: parts.join("; ") }
}

/// O(n²) density-peaks clustering with the library's conventions.
fn brute_dpc(data: &Dataset, d_cut: f64, rho_min: usize, delta_min: f64) -> DpcResult {
    let n = data.len();
    let d = |i: usize, j: usize| dist(data.point(i), data.point(j));
    let rho: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| j != i && d(i, j) <= d_cut).count()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rho[b].cmp(&rho[a]).then(a.cmp(&b)));
    let mut delta = vec![0.0; n];
    let mut dependent = vec![None; n];
    for (pos, &i) in order.iter().enumerate() {
        if pos == 0 {
            delta[i] = (0..n).map(|j| d(i, j)).fold(0.0, f64::max);
            continue;
        }
        let (j, dj) = order[..pos].iter().map(|&j| (j, d(i, j))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        delta[i] = dj;
        dependent[i] = Some(j);
    }
    let mut labels = vec![None; n];
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
    DpcResult { rho, delta, dependent, labels, centers }
}

fn c10() -> Outcome {
    let seed = 0;
    let (d_cut, rho_min, delta_min) = (200.0, 50, 5000.0);
    let start = BBox::cube(2, 0.0, 20_000.0).unwrap();
    let data = gen_random_walk_clusters(8, 25_000, 20.0, &start, seed).unwrap();
    let tree = KdTree::build(&data).unwrap();
    let orig = dpc_cluster(&data, &tree, d_cut, rho_min, delta_min).unwrap();
    let m = orig.labels.iter().filter(|l| l.is_none()).count();

    let part = partition(&data, N_TRAIN, N_TEST, derive_seed(seed, 10)).unwrap();
    let xt = KdTree::build(&part.reference_set).unwrap();
    let grid = Arc::new(PivotGrid::build(&part.reference_set, &xt, CELLS, K_MAX).unwrap());
    let corpus = build_corpus(&part, &grid, &xt, N_TRAIN, derive_seed(seed, 11)).unwrap();
    let (pivnet, _) = train_estimator(Kind::PivNet, &corpus, Some(grid), &EstimatorConfig::default()).unwrap();
    let est = estimate_dcut(&pivnet, &data, rho_min, m).unwrap();
    let rep = dpc_cluster(&data, &tree, est, rho_min, delta_min).unwrap();
    let ari = adjusted_rand_index(&rep.flat_labels(), &orig.flat_labels()).unwrap();
    let walk_ari = adjusted_rand_index(&orig.flat_labels(), &random_walk_labels(8, 25_000)).unwrap();
    let deviation = (est - d_cut).abs() / d_cut;
    let exact_dcut = estimate_dcut(&ExactOracle::members(&tree, K_MAX), &data, rho_min, m).unwrap();

    let mut rng = seeded_rng(1010);
    let mut mismatches = 0;
    for t in 0..30 {
        let n = rng.random_range(2..=40);
        let small = Dataset::new(2, (0..2 * n).map(|_| rng.random_range(0.0..10.0)).collect()).unwrap();
        let tree = KdTree::build(&small).unwrap();
        let (dc, rm, dm) = (rng.random_range(0.5..4.0), 1 + t % 4, rng.random_range(0.5..3.0));
        let want = brute_dpc(&small, dc, rm, dm);
        match dpc_cluster(&small, &tree, dc, rm, dm) {
            Ok(got) if got == want => {}
            Err(pivnet::Error::NoCenters { .. }) if want.centers.is_empty() => {}
            _ => mismatches += 1,
        }
    }
    Outcome {
        id: 10,
        pass: deviation <= C10_MAX_DEVIATION && ari >= C10_MIN_ARI && mismatches == 0,
        detail: format!(
            "m = {m}, exact-oracle d_cut {exact_dcut:.2}, estimated d_cut {est:.2} (deviation {:.1}%), ARI {ari:.4}, \
             clusters {} vs {} (original vs generator walks ARI {walk_ari:.3}); brute-force mismatches {mismatches}/30",
            deviation * 100.0,
            rep.centers.len(),
            orig.centers.len()
        ),
    }
}

fn pivnet_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_pivnet"))
        .args(args)
        .current_dir(dir)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "pivnet {args:?} failed: {status}");
}

/// Every report file under `root` with its contents.
fn reports(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c11() -> Outcome {
    let pipeline: &[&[&str]] = &[
        &["gen", "--data", "mix.csv", "--n", "6000", "--outliers", "20", "--seed", "3"],
        &["prep", "--data", "mix.csv", "--n-train", "1000", "--n-test", "200", "--cells", "64", "--seed", "3"],
        &["train", "--kind", "pivnet", "--epochs", "20", "--seed", "3"],
        &["train", "--kind", "querynet", "--epochs", "20", "--seed", "3"],
        &["eval", "--estimator", "pivnet"],
        &["eval", "--estimator", "pivot"],
        &["eval", "--estimator", "exact"],
        &["density", "--width", "60", "--height", "60"],
        &["dod", "--top-n", "20"],
        &["aknn", "--ks", "10,25"],
        &[
            "gen",
            "--data",
            "walk.csv",
            "--generator",
            "walk",
            "--n",
            "4000",
            "--clusters",
            "4",
            "--box-hi",
            "2000",
            "--step",
            "5",
        ],
        &["dpc", "--data", "walk.csv", "--d-cut", "20", "--rho-min", "20", "--delta-min", "300"],
    ];
    let runs: Vec<BTreeMap<PathBuf, Vec<u8>>> = (0..2)
        .map(|_| {
            let tmp = tempfile::tempdir().unwrap();
            for args in pipeline {
                pivnet_cli(tmp.path(), args);
            }
            reports(tmp.path())
        })
        .collect();
    let differing: Vec<String> = runs[0]
        .iter()
        .filter(|(p, bytes)| runs[1].get(*p) != Some(bytes))
        .map(|(p, _)| p.display().to_string())
        .collect();
    let same_files = runs[0].keys().eq(runs[1].keys());
    Outcome {
        id: 11,
        pass: differing.is_empty() && same_files && runs[0].len() > 20,
        detail: format!("{} files compared across two runs, differing: {:?}", runs[0].len(), differing),
    }
}

fn report(o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let note = if !o.pass && KNOWN_UNMET.contains(&o.id) { " [known unmet, see README]" } else { "" };
    println!("criterion {:>2}: {status}{note} | {}", o.id, o.detail);
}

fn main() {
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        report(&o);
        outcomes.push(o);
    };
    run(c1());
    run(c3());

    let t = Instant::now();
    let mut mixtures = Vec::new();
    let mut runs = Vec::new();
    for seed in 0..C4_SEEDS {
        let m = setup(&mixture_data(seed), seed);
        let qs: Vec<&[f64]> = m.test.iter().map(|q| &q[..]).collect();
        let ex: Vec<&[f64]> = m.exact.iter().map(|q| &q[..]).collect();
        let avg = |s: &dyn DistanceSource| error_report(&qs, &ex, s).unwrap().avg_mae;
        runs.push((seed, avg(&m.pivnet), avg(&Estimator::pivot(m.grid.clone())), avg(&m.querynet)));
        if seed == 0 {
            mixtures.push(m);
        }
    }
    let training_minutes = t.elapsed().as_secs_f64() / 60.0;
    let m0 = &mixtures[0];
    run(c2(m0));
    run(c4(&runs, training_minutes));
    run(c5());
    run(c6(m0));
    run(c7(m0));
    run(c8());
    run(c9(m0));
    run(c10());
    run(c11());

    outcomes.sort_by_key(|o| o.id);
    println!("summary:");
    for o in &outcomes {
        report(o);
    }
    let unexpected: Vec<u32> =
        outcomes.iter().filter(|o| !o.pass && !KNOWN_UNMET.contains(&o.id)).map(|o| o.id).collect();
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
