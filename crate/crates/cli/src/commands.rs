use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use pivnet::applications::{
    aknn_search, density_grid, detect_outliers, dpc_cluster, estimate_dcut, kth_distances, recall, DodParams,
};
use pivnet::dataset::{
    augment_uniform, derive_seed, gen_gaussian_mixture, gen_random_walk_clusters, load_csv, partition, plant_outliers,
    write_csv, BBox, CsvOptions, Dataset,
};
use pivnet::estimators::{sha256_file, DistanceSource, Estimator, ExactOracle, Kind, Workspace};
use pivnet::evaluation::{
    adjusted_rand_index, bench, csv_table, error_report, mean, median, precision_recall, text_table, SUMMARY_HEADER,
};
use pivnet::grid::PivotGrid;
use pivnet::nn::TrainConfig;
use pivnet::spatial::KdTree;
use pivnet::trainer::{build_corpus, train_estimator, EstimatorConfig, TrainingCorpus};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{Cli, CliError, CliResult, Command, Opts, Report};

const MANIFEST: &str = "manifest.json";
const REFERENCE: &str = "reference.csv";
const GRID: &str = "grid.pvg";
const TRAIN_CORPUS: &str = "train_corpus.bin";
const TEST_CORPUS: &str = "test_corpus.bin";

pub(crate) fn dispatch(cli: &Cli) -> CliResult<Report> {
    let o = &cli.opts;
    match cli.command {
        Command::Gen => gen(o),
        Command::Prep => prep(o),
        Command::Train => train(o),
        Command::Eval => eval(o),
        Command::Density => density(o),
        Command::Dod => dod(o),
        Command::Aknn => aknn(o),
        Command::Dpc => dpc(o),
        Command::Bench => bench_cmd(o),
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Manifest {
    pub format: u32,
    pub seed: u64,
    pub dim: usize,
    pub k_max: usize,
    pub cells: usize,
    pub n_source: usize,
    pub n_reference: usize,
    pub n_train: usize,
    pub n_augment: usize,
    pub n_test: usize,
    pub test_augment: usize,
    /// File name to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn mkdir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Creates `dir` and writes the config echo for `cmd` into it.
fn output_dir(o: &Opts, cmd: Command, dir: PathBuf) -> CliResult<PathBuf> {
    mkdir(&dir)?;
    write(&dir.join(format!("{}.config.txt", cmd.name())), o.echo(cmd))?;
    Ok(dir)
}

fn report_dir(o: &Opts, cmd: Command) -> CliResult<PathBuf> {
    output_dir(o, cmd, o.dir.join(cmd.name()))
}

fn data_path(o: &Opts) -> CliResult<&Path> {
    o.data.as_deref().ok_or_else(|| CliError::validation("--data is required"))
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::validation(format!("bad {what} entry '{t}'"))))
        .collect()
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn gen(o: &Opts) -> CliResult<Report> {
    let path = data_path(o)?;
    let bbox = BBox::cube(o.dim, o.box_lo, o.box_hi)?;
    let data = match o.generator.as_str() {
        "mixture" => gen_gaussian_mixture(o.n, o.clusters, &bbox, (o.std_lo, o.std_hi), o.seed)?.0,
        "walk" => {
            if o.clusters == 0 || o.n % o.clusters != 0 {
                return Err(CliError::validation("--n must be a positive multiple of --clusters for walk data"));
            }
            gen_random_walk_clusters(o.clusters, o.n / o.clusters, o.step, &bbox, o.seed)?
        }
        "uniform" => Dataset::from_points(&augment_uniform(&bbox, o.n, o.seed)?)?,
        other => return Err(CliError::validation(format!("unknown generator '{other}'"))),
    };
    let (data, planted) = if o.outliers > 0 {
        let half = (o.box_hi - o.box_lo) / 2.0;
        let region = BBox::cube(o.dim, o.box_lo - half, o.box_hi + half)?;
        plant_outliers(&data, o.outliers, &region, o.outlier_gap, derive_seed(o.seed, 7))?
    } else {
        (data, Vec::new())
    };
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    output_dir(o, Command::Gen, parent.to_path_buf())?;
    write_csv(path, &data.to_points())?;
    Ok(Report {
        text: format!("wrote {} points ({} planted outliers) to {}\n", data.len(), planted.len(), path.display()),
        json: json!({ "points": data.len(), "dim": data.dim(), "planted": planted }),
    })
}

fn prep(o: &Opts) -> CliResult<Report> {
    let data = load_csv(data_path(o)?, CsvOptions::default())?;
    let part = partition(&data, o.n_train, o.n_test, derive_seed(o.seed, 1))?;
    let x = &part.reference_set;
    let tree = KdTree::build(x)?;
    let budget = u128::from(o.budget_mb) << 20;
    let grid = PivotGrid::build_with_budget(x, &tree, o.cells, o.k_max, budget)?;
    let n_augment = o.n_augment.unwrap_or(o.n_train);
    let test_augment = o.test_augment.unwrap_or(o.n_test);
    let train = build_corpus(&part, &grid, &tree, n_augment, derive_seed(o.seed, 2))?;
    let mut test_q = part.test_queries.clone();
    test_q.extend(augment_uniform(grid.bbox(), test_augment, derive_seed(o.seed, 3))?);
    let test = TrainingCorpus::from_queries(&test_q, &tree, o.k_max, derive_seed(o.seed, 4))?;

    let dir = output_dir(o, Command::Prep, o.dir.clone())?;
    write_csv(dir.join(REFERENCE), &x.to_points())?;
    grid.save(dir.join(GRID))?;
    train.save(dir.join(TRAIN_CORPUS))?;
    test.save(dir.join(TEST_CORPUS))?;
    let mut artifacts = BTreeMap::new();
    for name in [REFERENCE, GRID, TRAIN_CORPUS, TEST_CORPUS] {
        artifacts.insert(name.to_string(), sha256_file(dir.join(name))?);
    }
    let manifest = Manifest {
        format: 1,
        seed: o.seed,
        dim: data.dim(),
        k_max: o.k_max,
        cells: o.cells,
        n_source: data.len(),
        n_reference: x.len(),
        n_train: o.n_train,
        n_augment,
        n_test: o.n_test,
        test_augment,
        artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest json") + "\n";
    write(&dir.join(MANIFEST), &text)?;
    Ok(Report {
        text: format!(
            "reference {} points, {} training and {} test queries, grid {}^{}\n",
            x.len(),
            train.len(),
            test.len(),
            o.cells,
            data.dim()
        ),
        json: serde_json::to_value(&manifest).expect("manifest json"),
    })
}

/// A prepared artifact directory.
struct Prep {
    dir: PathBuf,
    manifest: Manifest,
}

impl Prep {
    fn open(dir: &Path) -> CliResult<Prep> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::io(&path, format!("bad manifest: {e}")))?;
        Ok(Prep { dir: dir.to_path_buf(), manifest })
    }

    /// Path of a manifest artifact after checking its checksum.
    fn artifact(&self, name: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let expected = self
            .manifest
            .artifacts
            .get(name)
            .ok_or_else(|| CliError::io(&self.dir.join(MANIFEST), format!("no entry for {name}")))?;
        let found = sha256_file(&path)?;
        if &found != expected {
            return Err(pivnet::Error::Checksum { path, expected: expected.clone(), found }.into());
        }
        Ok(path)
    }

    fn reference(&self) -> CliResult<Dataset> {
        Ok(load_csv(self.artifact(REFERENCE)?, CsvOptions::default())?)
    }

    fn grid(&self) -> CliResult<Arc<PivotGrid>> {
        Ok(Arc::new(PivotGrid::load(self.artifact(GRID)?)?))
    }

    fn corpus(&self, name: &str) -> CliResult<TrainingCorpus> {
        Ok(TrainingCorpus::load(self.artifact(name)?)?)
    }

    fn model_path(&self, kind: Kind) -> PathBuf {
        self.dir.join(format!("{}.pve", kind.name()))
    }

    /// Estimator by name; `exact` uses `tree`, self-excluding when `members`.
    fn source<'a>(&self, o: &Opts, tree: &'a KdTree, members: bool) -> CliResult<Box<dyn DistanceSource + 'a>> {
        let k_max = self.manifest.k_max;
        if o.estimator == "exact" {
            return Ok(Box::new(if members {
                ExactOracle::members(tree, k_max)
            } else {
                ExactOracle::new(tree, k_max)
            }));
        }
        let kind = Kind::from_str(&o.estimator)?;
        let mut est = match kind {
            Kind::Pivot => Estimator::pivot(self.grid()?),
            _ => {
                let path = self.model_path(kind);
                if !path.exists() {
                    return Err(CliError::io(&path, format!("missing model, run `pivnet train --kind {kind}` first")));
                }
                Estimator::load(path)?
            }
        };
        if o.isotonic {
            est.set_isotonic(true);
        }
        Ok(Box::new(est))
    }

    fn sampled_test_queries(&self, test: &TrainingCorpus) -> Vec<Vec<f64>> {
        test.queries().take(self.manifest.n_test).map(<[f64]>::to_vec).collect()
    }
}

fn train(o: &Opts) -> CliResult<Report> {
    let prep = Prep::open(&o.dir)?;
    let kind = Kind::from_str(&o.kind)?;
    if kind == Kind::Pivot {
        return Err(CliError::validation("the pivot estimator has nothing to train"));
    }
    let hidden = parse_list(&o.hidden, "--hidden")?;
    let cfg = EstimatorConfig {
        hidden,
        train: TrainConfig {
            learning_rate: o.lr,
            momentum: o.momentum,
            lr_decay: o.lr_decay,
            warmup_epochs: o.warmup,
            batch_size: o.batch,
            max_epochs: o.epochs,
            patience: o.patience,
            seed: o.seed,
        },
    };
    cfg.train.validate()?;
    let corpus = prep.corpus(TRAIN_CORPUS)?;
    let grid = if kind.needs_grid() { Some(prep.grid()?) } else { None };
    let (est, report) = train_estimator(kind, &corpus, grid, &cfg)?;
    let report = report.expect("network kinds report training");
    est.save(prep.model_path(kind), kind.needs_grid().then_some(Path::new(GRID)))?;

    let out = report_dir(o, Command::Train)?;
    let mut hist = String::from("epoch,train_l1,valid_l1\n");
    for (e, (t, v)) in report.history.train_loss.iter().zip(&report.history.valid_loss).enumerate() {
        let _ = writeln!(hist, "{e},{t},{v}");
    }
    write(&out.join(format!("{}_history.csv", kind.name())), hist)?;
    let header = ["kind", "epochs", "best_epoch", "final_train_l1", "best_valid_l1", "valid_mae"];
    let rows = vec![vec![
        kind.name().to_string(),
        report.epochs.to_string(),
        report.best_epoch.to_string(),
        f(report.final_train_l1),
        f(report.best_valid_l1),
        f(report.valid_mae),
    ]];
    write(&out.join(format!("{}_summary.csv", kind.name())), csv_table(&header, &rows))?;
    Ok(Report {
        text: text_table(&header, &rows),
        json: json!({
            "kind": kind.name(),
            "epochs": report.epochs,
            "best_epoch": report.best_epoch,
            "final_train_l1": report.final_train_l1,
            "best_valid_l1": report.best_valid_l1,
            "valid_mae": report.valid_mae,
        }),
    })
}

fn eval(o: &Opts) -> CliResult<Report> {
    let prep = Prep::open(&o.dir)?;
    let test = prep.corpus(TEST_CORPUS)?;
    let x = prep.reference()?;
    let tree = KdTree::build(&x)?;
    let source = prep.source(o, &tree, false)?;
    let n = test.len();
    let split = prep.manifest.n_test.min(n);
    let queries: Vec<&[f64]> = (0..n).map(|i| test.query(i)).collect();
    let exact: Vec<&[f64]> = (0..n).map(|i| test.truth(i)).collect();
    let full = error_report(&queries, &exact, source.as_ref())?;

    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for (set, lo, hi) in [("all", 0, n), ("sampled", 0, split), ("augmented", split, n)] {
        if lo == hi {
            continue;
        }
        let maes = &full.per_query_mae[lo..hi];
        let mapes: Vec<f64> = full.per_query_mape[lo..hi].iter().flatten().copied().collect();
        let (am, mm, ap, mp) =
            (mean(maes), median(maes), mean(&mapes), if mapes.is_empty() { f64::NAN } else { median(&mapes) });
        rows.push(vec![o.estimator.clone(), set.to_string(), f(am), f(mm), f(ap), f(mp)]);
        json_rows.push(json!({ "set": set, "avg_mae": am, "median_mae": mm, "avg_mape": ap, "median_mape": mp }));
    }
    let header = ["estimator", "queries", SUMMARY_HEADER[1], SUMMARY_HEADER[2], SUMMARY_HEADER[3], SUMMARY_HEADER[4]];
    let out = report_dir(o, Command::Eval)?;
    write(&out.join(format!("{}_per_query.csv", o.estimator)), full.to_csv())?;
    write(&out.join(format!("{}_summary.csv", o.estimator)), csv_table(&header, &rows))?;
    let bucket_rows: Vec<Vec<String>> =
        full.buckets.iter().map(|b| vec![format!("{}-{}", b.k_lo, b.k_hi), f(b.mae)]).collect();
    write(&out.join(format!("{}_by_k.csv", o.estimator)), csv_table(&["k", "mae"], &bucket_rows))?;
    Ok(Report {
        text: text_table(&header, &rows),
        json: json!({ "estimator": o.estimator, "summary": json_rows, "mape_excluded": full.mape_excluded }),
    })
}

fn density(o: &Opts) -> CliResult<Report> {
    let prep = Prep::open(&o.dir)?;
    let x = prep.reference()?;
    if x.dim() != 2 {
        return Err(CliError::validation("density grids need 2-dimensional data"));
    }
    let tree = KdTree::build(&x)?;
    let source = prep.source(o, &tree, false)?;
    let grid = density_grid(source.as_ref(), x.bbox(), o.width, o.height, o.k, x.len())?;
    let agreement = if o.estimator == "exact" {
        1.0
    } else {
        let exact = ExactOracle::new(&tree, prep.manifest.k_max);
        grid.agreement(&density_grid(&exact, x.bbox(), o.width, o.height, o.k, x.len())?)?
    };
    let out = report_dir(o, Command::Density)?;
    write(&out.join(format!("{}.csv", o.estimator)), grid.to_csv())?;
    write(&out.join(format!("{}.ppm", o.estimator)), grid.to_ppm())?;
    let header = ["estimator", "t20", "t60", "t90", "agreement_with_exact"];
    let rows = vec![vec![
        o.estimator.clone(),
        format!("{:e}", grid.thresholds[0]),
        format!("{:e}", grid.thresholds[1]),
        format!("{:e}", grid.thresholds[2]),
        f(agreement),
    ]];
    write(&out.join(format!("{}_summary.csv", o.estimator)), csv_table(&header, &rows))?;
    Ok(Report {
        text: text_table(&header, &rows),
        json: json!({ "estimator": o.estimator, "thresholds": grid.thresholds, "agreement": agreement }),
    })
}

fn dod(o: &Opts) -> CliResult<Report> {
    let prep = Prep::open(&o.dir)?;
    let x = prep.reference()?;
    let tree = KdTree::build(&x)?;
    if o.top_n == 0 || o.top_n >= x.len() {
        return Err(CliError::validation(format!("--top-n must lie in 1..{}", x.len())));
    }
    let exact = ExactOracle::members(&tree, prep.manifest.k_max);
    let mut kth = kth_distances(&x, &exact, o.k)?;
    kth.sort_by(|a, b| b.total_cmp(a));
    let r = (kth[o.top_n - 1] + kth[o.top_n]) / 2.0;
    let source = prep.source(o, &tree, true)?;

    let variants = [("top-n", DodParams::TopN { n: o.top_n, k: o.k }), ("radius", DodParams::Radius { r, k: o.k })];
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut listing = String::from("variant,index\n");
    for (name, params) in variants {
        let truth = detect_outliers(&x, &exact, params)?;
        let got = detect_outliers(&x, source.as_ref(), params)?;
        let pr = precision_recall(&got, &truth);
        for i in &got {
            let _ = writeln!(listing, "{name},{i}");
        }
        rows.push(vec![
            name.to_string(),
            truth.len().to_string(),
            got.len().to_string(),
            f(pr.precision),
            f(pr.recall),
        ]);
        json_rows.push(json!({
            "variant": name, "exact": truth.len(), "detected": got.len(),
            "precision": pr.precision, "recall": pr.recall,
        }));
    }
    let header = ["variant", "exact", "detected", "precision", "recall"];
    let out = report_dir(o, Command::Dod)?;
    write(&out.join(format!("{}_outliers.csv", o.estimator)), listing)?;
    write(&out.join(format!("{}_summary.csv", o.estimator)), csv_table(&header, &rows))?;
    Ok(Report {
        text: format!("r = {r}\n{}", text_table(&header, &rows)),
        json: json!({ "estimator": o.estimator, "k": o.k, "n": o.top_n, "r": r, "variants": json_rows }),
    })
}

fn aknn(o: &Opts) -> CliResult<Report> {
    let prep = Prep::open(&o.dir)?;
    let ks = parse_list(&o.ks, "--ks")?;
    let x = prep.reference()?;
    let tree = KdTree::build(&x)?;
    let source = prep.source(o, &tree, false)?;
    let mut queries = prep.sampled_test_queries(&prep.corpus(TEST_CORPUS)?);
    if let Some(n) = o.queries {
        queries.truncate(n);
    }
    if queries.is_empty() {
        return Err(CliError::validation("no sampled test queries"));
    }
    let mut per_query = String::from("query,k,found,recall\n");
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for &k in &ks {
        let mut recalls = Vec::with_capacity(queries.len());
        for (i, q) in queries.iter().enumerate() {
            let found = aknn_search(&tree, source.as_ref(), q, k)?;
            let r = recall(&found, &tree.knn(q, k)?);
            let _ = writeln!(per_query, "{i},{k},{},{r}", found.len());
            recalls.push(r);
        }
        let exact_share = recalls.iter().filter(|&&r| r == 1.0).count() as f64 / recalls.len() as f64;
        let (avg, med) = (mean(&recalls), median(&recalls));
        let mut row = vec![k.to_string(), f(avg), f(med), f(exact_share)];
        let mut jr = json!({ "k": k, "avg_recall": avg, "median_recall": med, "full_recall_share": exact_share });
        if o.timing {
            let n = queries.len();
            let exact_t = bench(|i| drop(tree.knn(&queries[i % n], k)), n.min(100), n)?;
            let seeded_t = bench(|i| drop(aknn_search(&tree, source.as_ref(), &queries[i % n], k)), n.min(100), n)?;
            row.push(format!("{:.2}", exact_t.mean_us));
            row.push(format!("{:.2}", seeded_t.mean_us));
            jr["exact_us"] = json!(exact_t.mean_us);
            jr["seeded_us"] = json!(seeded_t.mean_us);
        }
        rows.push(row);
        json_rows.push(jr);
    }
    let mut header = vec!["k", "avg_recall", "median_recall", "full_recall_share"];
    let out = report_dir(o, Command::Aknn)?;
    write(&out.join(format!("{}_per_query.csv", o.estimator)), per_query)?;
    let plain: Vec<Vec<String>> = rows.iter().map(|r| r[..4].to_vec()).collect();
    write(&out.join(format!("{}_summary.csv", o.estimator)), csv_table(&header, &plain))?;
    if o.timing {
        header.extend(["exact_us", "seeded_us"]);
    }
    Ok(Report {
        text: text_table(&header, &rows),
        json: json!({ "estimator": o.estimator, "queries": queries.len(), "results": json_rows }),
    })
}

fn dpc(o: &Opts) -> CliResult<Report> {
    let data = load_csv(data_path(o)?, CsvOptions::default())?;
    let tree = KdTree::build(&data)?;
    let orig = dpc_cluster(&data, &tree, o.d_cut, o.rho_min, o.delta_min)?;
    let noise = orig.labels.iter().filter(|l| l.is_none()).count();
    let out = report_dir(o, Command::Dpc)?;
    write(&out.join("dpc.csv"), orig.to_csv())?;
    write(&out.join("decision_graph.csv"), orig.decision_graph_csv())?;
    let mut text = format!("d_cut {}: {} clusters, {} noise points\n", o.d_cut, orig.centers.len(), noise);
    let mut json = json!({ "d_cut": o.d_cut, "clusters": orig.centers.len(), "noise": noise });
    if o.reverse {
        if noise == 0 {
            return Err(CliError::validation("reverse engineering needs at least one noise point"));
        }
        let prep = Prep::open(&o.dir)?;
        let source = prep.source(o, &tree, true)?;
        let est = estimate_dcut(source.as_ref(), &data, o.rho_min, noise)?;
        let rep = dpc_cluster(&data, &tree, est, o.rho_min, o.delta_min)?;
        let ari = adjusted_rand_index(&rep.flat_labels(), &orig.flat_labels())?;
        let deviation = (est - o.d_cut).abs() / o.d_cut;
        write(&out.join(format!("reverse_{}.csv", o.estimator)), rep.to_csv())?;
        write(&out.join(format!("reverse_{}_decision_graph.csv", o.estimator)), rep.decision_graph_csv())?;
        let header = ["estimator", "m", "estimated_d_cut", "relative_deviation", "clusters", "ari"];
        let rows = vec![vec![
            o.estimator.clone(),
            noise.to_string(),
            f(est),
            f(deviation),
            rep.centers.len().to_string(),
            f(ari),
        ]];
        write(&out.join(format!("reverse_{}_summary.csv", o.estimator)), csv_table(&header, &rows))?;
        text.push_str(&text_table(&header, &rows));
        json["reverse"] = json!({
            "estimator": o.estimator, "estimated_d_cut": est, "relative_deviation": deviation,
            "clusters": rep.centers.len(), "ari": ari,
        });
    }
    Ok(Report { text, json })
}

/// Latencies vary run to run, so bench writes only its config echo.
fn bench_cmd(o: &Opts) -> CliResult<Report> {
    let prep = Prep::open(&o.dir)?;
    let x = prep.reference()?;
    let tree = KdTree::build(&x)?;
    let test = prep.corpus(TEST_CORPUS)?;
    let queries: Vec<Vec<f64>> = test.queries().map(<[f64]>::to_vec).collect();
    if queries.is_empty() {
        return Err(CliError::validation("no test queries"));
    }
    let n = queries.len();
    let k_max = prep.manifest.k_max;
    let warm = o.iters.min(100);
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut push = |name: &str, s: pivnet::evaluation::LatencyStats| {
        rows.push(vec![name.to_string(), format!("{:.3}", s.mean_us), format!("{:.3}", s.median_us)]);
        json_rows.push(json!({ "estimator": name, "mean_us": s.mean_us, "median_us": s.median_us }));
    };
    push("kd-tree", bench(|i| drop(tree.knn(&queries[i % n], k_max)), warm, o.iters)?);
    let mut estimators = vec![Estimator::pivot(prep.grid()?)];
    for kind in [Kind::QueryNet, Kind::PivNet, Kind::PivNetItr] {
        let path = prep.model_path(kind);
        if path.exists() {
            estimators.push(Estimator::load(path)?);
        }
    }
    let (mut ws, mut out) = (Workspace::default(), Vec::new());
    for est in &estimators {
        let mut failed = None;
        let stats = bench(
            |i| {
                if let Err(e) = est.estimate_into(&queries[i % n], &mut ws, &mut out) {
                    failed = Some(e);
                }
            },
            warm,
            o.iters,
        )?;
        if let Some(e) = failed {
            return Err(e.into());
        }
        push(est.kind().name(), stats);
    }
    report_dir(o, Command::Bench)?;
    let header = ["estimator", "mean_us", "median_us"];
    Ok(Report { text: text_table(&header, &rows), json: json!({ "iters": o.iters, "results": json_rows }) })
}
