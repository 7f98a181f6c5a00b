//! Accuracy metrics, detection metrics, clustering agreement and latency
//! measurement.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::estimators::DistanceSource;
use crate::{Error, Result};

/// Width of the k ranges used for per-bucket MAE.
pub const BUCKET_WIDTH: usize = 10;

fn check_len(exact: &[f64], est: &[f64]) -> Result<()> {
    if exact.len() != est.len() {
        return Err(Error::DimensionMismatch { expected: exact.len(), got: est.len() });
    }
    if exact.is_empty() {
        return Err(Error::invalid("empty distance vectors"));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn mae(exact: &[f64], est: &[f64]) -> Result<f64> {
    check_len(exact, est)?;
    Ok(exact.iter().zip(est).map(|(a, b)| (a - b).abs()).sum::<f64>() / exact.len() as f64)
}

/// Mean of `|exact - est| / exact` over entries with `exact > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mape {
    pub value: f64,
    /// Entries skipped because the exact distance is zero.
    pub excluded: usize,
}

pub fn mape(exact: &[f64], est: &[f64]) -> Result<Mape> {
    check_len(exact, est)?;
    let (mut sum, mut used) = (0.0, 0usize);
    for (&a, &b) in exact.iter().zip(est) {
        if a > 0.0 {
            sum += (a - b).abs() / a;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::invalid("every exact distance is zero"));
    }
    Ok(Mape { value: sum / used as f64, excluded: exact.len() - used })
}

/// Lower-middle element of the sorted values.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketMae {
    /// Inclusive k range.
    pub k_lo: usize,
    pub k_hi: usize,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub label: String,
    pub per_query_mae: Vec<f64>,
    /// `None` for queries whose exact vector is all zeros.
    pub per_query_mape: Vec<Option<f64>>,
    /// Zero-distance entries left out of MAPE, summed over queries.
    pub mape_excluded: usize,
    pub avg_mae: f64,
    pub median_mae: f64,
    pub avg_mape: f64,
    pub median_mape: f64,
    pub buckets: Vec<BucketMae>,
}

/// Compares `source` against exact vectors for every query.
pub fn error_report<S: DistanceSource + ?Sized>(
    queries: &[&[f64]],
    exact: &[&[f64]],
    source: &S,
) -> Result<ErrorReport> {
    if queries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if queries.len() != exact.len() {
        return Err(Error::DimensionMismatch { expected: queries.len(), got: exact.len() });
    }
    let k_max = source.k_max();
    let estimates: Vec<Vec<f64>> = queries.par_iter().map(|q| source.distances(q)).collect::<Result<_>>()?;
    let mut per_query_mae = Vec::with_capacity(queries.len());
    let mut per_query_mape = Vec::with_capacity(queries.len());
    let mut mape_excluded = 0;
    let n_buckets = k_max.div_ceil(BUCKET_WIDTH);
    let mut bucket_sum = vec![0.0; n_buckets];
    for (ex, est) in exact.iter().zip(&estimates) {
        if ex.len() != k_max {
            return Err(Error::DimensionMismatch { expected: k_max, got: ex.len() });
        }
        per_query_mae.push(mae(ex, est)?);
        match mape(ex, est) {
            Ok(m) => {
                mape_excluded += m.excluded;
                per_query_mape.push(Some(m.value));
            }
            Err(_) => {
                mape_excluded += ex.len();
                per_query_mape.push(None);
            }
        }
        for (k, (a, b)) in ex.iter().zip(est).enumerate() {
            bucket_sum[k / BUCKET_WIDTH] += (a - b).abs();
        }
    }
    let buckets = (0..n_buckets)
        .map(|b| {
            let (k_lo, k_hi) = (b * BUCKET_WIDTH + 1, ((b + 1) * BUCKET_WIDTH).min(k_max));
            let count = (k_hi - k_lo + 1) * queries.len();
            BucketMae { k_lo, k_hi, mae: bucket_sum[b] / count as f64 }
        })
        .collect();
    let mapes: Vec<f64> = per_query_mape.iter().flatten().copied().collect();
    Ok(ErrorReport {
        label: source.label(),
        avg_mae: mean(&per_query_mae),
        median_mae: median(&per_query_mae),
        avg_mape: mean(&mapes),
        median_mape: median(&mapes),
        per_query_mae,
        per_query_mape,
        mape_excluded,
        buckets,
    })
}

impl ErrorReport {
    /// Per-query rows: `query,mae,mape`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("query,mae,mape\n");
        for (i, (m, p)) in self.per_query_mae.iter().zip(&self.per_query_mape).enumerate() {
            let p = p.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{i},{m},{p}");
        }
        s
    }

    pub fn summary_rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.label.clone(),
            format!("{:.6}", self.avg_mae),
            format!("{:.6}", self.median_mae),
            format!("{:.6}", self.avg_mape),
            format!("{:.6}", self.median_mape),
        ]]
    }
}

pub const SUMMARY_HEADER: [&str; 5] = ["estimator", "avg_mae", "median_mae", "avg_mape", "median_mape"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// Set when a ratio had a zero denominator and was filled by convention.
    pub undefined: bool,
}

/// Precision and recall of `detected` against `truth`. An empty detection
/// scores precision 1 if `truth` is also empty and 0 otherwise; an empty
/// `truth` scores recall 1.
pub fn precision_recall(detected: &[usize], truth: &[usize]) -> PrecisionRecall {
    let truth_set: std::collections::HashSet<usize> = truth.iter().copied().collect();
    let det_set: std::collections::HashSet<usize> = detected.iter().copied().collect();
    let tp = det_set.intersection(&truth_set).count() as f64;
    let mut undefined = false;
    let precision = if det_set.is_empty() {
        undefined = true;
        if truth_set.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        tp / det_set.len() as f64
    };
    let recall = if truth_set.is_empty() {
        undefined = true;
        1.0
    } else {
        tp / truth_set.len() as f64
    };
    PrecisionRecall { precision, recall, undefined }
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let c2 = |v: u64| (v as f64) * (v as f64 - 1.0) / 2.0;
    let index: f64 = joint.values().map(|&v| c2(v)).sum();
    let sa: f64 = rows.values().map(|&v| c2(v)).sum();
    let sb: f64 = cols.values().map(|&v| c2(v)).sum();
    let total = c2(n as u64);
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        // both labelings are trivial (all one cluster or all singletons)
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencyStats {
    pub iters: usize,
    pub mean_us: f64,
    pub median_us: f64,
}

/// Times `probe(i)` for `i = 0..iters` after `warmup` untimed calls.
pub fn bench<F: FnMut(usize)>(mut probe: F, warmup: usize, iters: usize) -> Result<LatencyStats> {
    if iters == 0 {
        return Err(Error::invalid("bench needs at least one iteration"));
    }
    for i in 0..warmup {
        probe(i);
    }
    let mut samples = Vec::with_capacity(iters);
    for i in 0..iters {
        let t = Instant::now();
        probe(i);
        samples.push(t.elapsed().as_secs_f64() * 1e6);
    }
    Ok(LatencyStats { iters, mean_us: mean(&samples), median_us: median(&samples) })
}

/// Left-aligned text table with a header rule.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Comma-separated rows with a header line.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::l1_loss;

    struct Fixed(Vec<f64>);

    impl DistanceSource for Fixed {
        fn dim(&self) -> usize {
            1
        }
        fn k_max(&self) -> usize {
            self.0.len()
        }
        fn label(&self) -> String {
            "fixed".into()
        }
        fn distances(&self, _q: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 3.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 3.0]).unwrap(), 0.5);
        assert_eq!(mae(&[2.0, 3.0], &[1.0, 3.0]).unwrap(), 0.5);
        let (a, b) = ([0.3, 1.7, 2.2], [0.1, 2.0, 2.0]);
        assert_eq!(mae(&a, &b).unwrap(), l1_loss(&a, &b).unwrap());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[2.0, 4.0], &[2.0, 4.0]).unwrap().value, 0.0);
        assert_eq!(mape(&[2.0], &[3.0]).unwrap().value, 0.5);
        let a = mape(&[1.5, 2.5, 4.0], &[1.0, 3.0, 5.0]).unwrap().value;
        let b = mape(&[15.0, 25.0, 40.0], &[10.0, 30.0, 50.0]).unwrap().value;
        assert!((a - b).abs() < 1e-12);
        let m = mape(&[0.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!((m.value, m.excluded), (0.5, 1));
        assert!(mape(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn median_is_lower_middle() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
    }

    #[test]
    fn report_single_query_and_buckets() {
        let exact: Vec<f64> = (1..=25).map(|k| k as f64).collect();
        let src = Fixed(exact.iter().map(|v| v + 1.0).collect());
        let q = [0.0];
        let r = error_report(&[&q], &[&exact], &src).unwrap();
        assert_eq!(r.avg_mae, r.median_mae);
        assert_eq!(r.avg_mae, 1.0);
        assert_eq!(r.avg_mape, r.median_mape);
        assert_eq!(r.buckets.len(), 3);
        assert_eq!((r.buckets[0].k_lo, r.buckets[0].k_hi), (1, 10));
        assert_eq!((r.buckets[2].k_lo, r.buckets[2].k_hi), (21, 25));
        assert!(r.buckets.iter().all(|b| b.mae == 1.0));
    }

    #[test]
    fn report_bucket_counts_components() {
        let exact = vec![1.0; 20];
        let mut est = vec![1.0; 20];
        est[0] = 11.0;
        let r = error_report(&[&[0.0][..]], &[&exact], &Fixed(est)).unwrap();
        assert_eq!(r.buckets[0].mae, 1.0);
        assert_eq!(r.buckets[1].mae, 0.0);
    }

    #[test]
    fn report_is_permutation_invariant() {
        struct Echo;
        impl DistanceSource for Echo {
            fn dim(&self) -> usize {
                1
            }
            fn k_max(&self) -> usize {
                2
            }
            fn label(&self) -> String {
                "echo".into()
            }
            fn distances(&self, q: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![q[0], q[0] * 2.0])
            }
        }
        let qs = [[1.0], [2.0], [5.0]];
        let ex = [[1.5, 2.0], [2.0, 3.0], [4.0, 11.0]];
        let fwd = error_report(
            &qs.iter().map(|q| &q[..]).collect::<Vec<_>>(),
            &ex.iter().map(|e| &e[..]).collect::<Vec<_>>(),
            &Echo,
        )
        .unwrap();
        let rev = error_report(
            &qs.iter().rev().map(|q| &q[..]).collect::<Vec<_>>(),
            &ex.iter().rev().map(|e| &e[..]).collect::<Vec<_>>(),
            &Echo,
        )
        .unwrap();
        assert!((fwd.avg_mae - rev.avg_mae).abs() < 1e-12);
        assert_eq!(fwd.median_mae, rev.median_mae);
        assert_eq!(fwd.median_mape, rev.median_mape);
    }

    #[test]
    fn precision_recall_examples() {
        let truth: Vec<usize> = (0..10).collect();
        assert_eq!(precision_recall(&truth, &truth), PrecisionRecall { precision: 1.0, recall: 1.0, undefined: false });
        let pr = precision_recall(&[20, 21], &truth);
        assert_eq!((pr.precision, pr.recall), (0.0, 0.0));
        let pr = precision_recall(&truth[..8], &truth);
        assert_eq!((pr.precision, pr.recall), (1.0, 0.8));
        let pr = precision_recall(&[], &[]);
        assert!(pr.undefined && pr.precision == 1.0);
        let pr = precision_recall(&[], &truth);
        assert!(pr.undefined && pr.precision == 0.0);
    }

    #[test]
    fn ari_known_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 9, 9]).unwrap(), 1.0);
        // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert!((v - 0.571_428_571_4).abs() < 1e-9);
        // sklearn: adjusted_rand_score([0,0,0,1,1,1],[0,0,1,1,2,2]) = 0.2424242424
        let v = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((v - 0.242_424_242_4).abs() < 1e-9);
        assert!(adjusted_rand_index(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn bench_counts_iterations() {
        let mut calls = 0;
        let s = bench(|_| calls += 1, 3, 10).unwrap();
        assert_eq!(calls, 13);
        assert_eq!(s.iters, 10);
        assert!(s.mean_us >= 0.0);
        assert!(bench(|_| {}, 0, 0).is_err());
    }

    #[test]
    fn tables() {
        let rows = vec![vec!["pivnet".to_string(), "0.1".to_string()]];
        assert_eq!(csv_table(&["a", "b"], &rows), "a,b\npivnet,0.1\n");
        assert_eq!(text_table(&["a", "b"], &rows), "a       b\n------  ---\npivnet  0.1\n");
    }
}
