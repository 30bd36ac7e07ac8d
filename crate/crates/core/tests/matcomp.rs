use std::io::Write;
use std::path::PathBuf;

use fwopt::eigen::dense_eig;
use fwopt::fw::Objective;
use fwopt::linalg::{DenseMat, SymmetricOperator};
use fwopt::matcomp::*;
use fwopt::matrix::PsdCache;
use fwopt::rng::{self, gaussian_vec, FwRng};
use fwopt::transforms::{factor_bound, nuclear_norm_oracle, BlockEmbedding};
use fwopt::FwError;
use rand::Rng;

fn write_fixture(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn movielens_100k() -> Option<PathBuf> {
    let path = std::env::var_os("MOVIELENS_100K")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data"));
    path.exists().then_some(path)
}

fn random_ratings(r: &mut FwRng, m: usize, n: usize, density: f64) -> Vec<Rating> {
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if r.random_bool(density) {
                out.push((i as u32, j as u32, r.random_range(1..=5) as f64));
            }
        }
    }
    out
}

#[test]
fn loads_a_three_line_tab_file() {
    let f = write_fixture("7\t10\t4\t881250949\n3\t10\t2.5\t891717742\n7\t2\t1\t878887116\n");
    let ds = load_movielens(f.path(), DataFormat::Tab100k).unwrap();
    assert_eq!((ds.m, ds.n), (2, 2));
    // Users 3, 7 and items 2, 10 map to 0, 1 in id order.
    assert_eq!(ds.train, vec![(1, 1, 4.0), (0, 1, 2.5), (1, 0, 1.0)]);
    assert!(ds.test.is_empty());
}

#[test]
fn loads_the_double_colon_format() {
    let f = write_fixture("1::1193::5::978300760\n1::661::3::978302109\n\n2::1193::4::978298413\n");
    let ds = load_movielens(f.path(), DataFormat::Dat1m).unwrap();
    assert_eq!((ds.m, ds.n, ds.train.len()), (2, 2, 3));
    assert_eq!(ds.train[2], (1, 1, 4.0));
    assert_eq!("dat_1m".parse::<DataFormat>().unwrap(), DataFormat::Dat1m);
    assert!("csv".parse::<DataFormat>().is_err());
}

#[test]
fn loader_errors() {
    let empty = write_fixture("");
    assert!(load_movielens(empty.path(), DataFormat::Tab100k).is_err());
    let bad = write_fixture("1\t2\t3\t4\n1\t2\tx\t4\n");
    match load_movielens(bad.path(), DataFormat::Tab100k) {
        Err(FwError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    let short = write_fixture("1\t2\t3\t4\n\n1\t3\t4\n");
    match load_movielens(short.path(), DataFormat::Tab100k) {
        Err(FwError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let dup = write_fixture("1\t2\t3\t4\n1\t2\t5\t4\n");
    assert!(matches!(load_movielens(dup.path(), DataFormat::Tab100k), Err(FwError::Parse { line: 2, .. })));
    assert!(load_movielens(std::path::Path::new("/nonexistent/u.data"), DataFormat::Tab100k).is_err());
}

#[test]
fn movielens_100k_counts_and_split() {
    let Some(path) = movielens_100k() else {
        eprintln!("MovieLens 100k not found, skipping");
        return;
    };
    let ds = load_movielens(&path, DataFormat::Tab100k).unwrap();
    assert_eq!((ds.train.len(), ds.m, ds.n), (100_000, 943, 1682));
    let split = split_train_test(&ds, SplitPolicy::RandomFraction { rho: 0.5, seed: 1 }).unwrap();
    assert!(split.train.len().abs_diff(50_000) <= 1 && split.test.len().abs_diff(50_000) <= 1);
    assert_eq!(split.train.len() + split.test.len(), 100_000);
    split.validate().unwrap();
}

#[test]
fn split_policies() {
    let mut r = rng::seeded(1);
    let ds = RatingDataset::new(12, 9, random_ratings(&mut r, 12, 9, 0.4), vec![]).unwrap();
    let all = split_train_test(&ds, SplitPolicy::RandomFraction { rho: 1.0, seed: 3 }).unwrap();
    assert!(all.test.is_empty());
    assert_eq!(all.train.len(), ds.train.len());
    assert!(split_train_test(&ds, SplitPolicy::RandomFraction { rho: 1.5, seed: 3 }).is_err());

    let held = split_train_test(&ds, SplitPolicy::PerUserHoldout { r: 2, seed: 4 }).unwrap();
    held.validate().unwrap();
    for u in 0..12u32 {
        let total = ds.train.iter().filter(|e| e.0 == u).count();
        let test = held.test.iter().filter(|e| e.0 == u).count();
        assert_eq!(test, if total >= 3 { 2 } else { 0 }, "user {u} with {total}");
    }
    let mut joined: Vec<Rating> = held.train.iter().chain(&held.test).copied().collect();
    joined.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut orig = ds.train.clone();
    orig.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    assert_eq!(joined, orig);
}

#[test]
fn dataset_validation() {
    assert!(RatingDataset::new(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)], vec![]).is_err());
    assert!(RatingDataset::new(2, 2, vec![(2, 0, 1.0)], vec![]).is_err());
    assert!(RatingDataset::new(2, 2, vec![(0, 0, 1.0)], vec![(0, 0, 1.0)]).is_ok());
}

#[test]
fn normalization_examples() {
    let constant = RatingDataset::new(3, 3, vec![(0, 0, 4.0), (1, 2, 4.0), (2, 1, 4.0), (0, 2, 4.0)], vec![(1, 1, 4.0)]).unwrap();
    let (nds, _) = normalize_means(&constant);
    assert!(nds.train.iter().chain(&nds.test).all(|e| e.2 == 0.0));

    // User means: u0 = (5 + 3) / 2 = 4, u1 = (1 + 2 + 4) / 3 = 7/3.
    // Item means: i0 = (5 + 1) / 2 = 3, i1 = 2, i2 = (3 + 4) / 2 = 3.5.
    let train = vec![(0, 0, 5.0), (0, 2, 3.0), (1, 0, 1.0), (1, 1, 2.0), (1, 2, 4.0)];
    let ds = RatingDataset::new(3, 4, train, vec![(2, 3, 3.0)]).unwrap();
    let (nds, norm) = normalize_means(&ds);
    assert_eq!(norm.global, 3.0);
    assert_eq!(norm.user_means[0], 4.0);
    assert!((norm.user_means[1] - 7.0 / 3.0).abs() < 1e-15);
    assert_eq!(norm.user_means[2], 3.0);
    assert_eq!(norm.item_means, vec![3.0, 2.0, 3.5, 3.0]);
    assert_eq!(nds.train[0].2, 5.0 - 3.5);
    assert_eq!(nds.test[0].2, 0.0);
    for (a, b) in ds.train.iter().zip(&nds.train) {
        assert!((norm.denormalize(b.0, b.1, b.2) - a.2).abs() <= 1e-15);
    }
}

#[test]
fn metrics_examples() {
    let ratings: Vec<Rating> = vec![(0, 0, 1.0), (0, 1, 3.0), (1, 0, 5.0)];
    assert_eq!(metrics(&[1.0, 3.0, 5.0], &ratings), (0.0, 0.0));
    let (rmse, nmae) = metrics(&[2.0, 4.0, 6.0], &ratings);
    assert!((rmse - 1.0).abs() < 1e-15 && (nmae - 0.25).abs() < 1e-15);
    let (rmse, nmae) = metrics(&[0.0, 3.0, 5.0], &ratings);
    assert!((rmse - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!((nmae - 1.0 / 12.0).abs() < 1e-15);
    assert_eq!(zero_baseline(&[(0, 0, 2.0)]), (2.0, 0.5));
}

#[test]
fn squared_loss_value_and_gradient() {
    let mut r = rng::seeded(2);
    let train: Vec<Rating> = (0..5).flat_map(|i| (0..4).map(move |j| (i, j, 1.0))).collect();
    let obj = SquaredLoss::new(5, 4, &train, 3.0);
    let zero = PredictionStore::zeros(5, 4, &train, &[]);
    assert_eq!(obj.value(&zero), train.len() as f64 / 2.0);
    assert_eq!(obj.curvature_bound(), Some(9.0));

    let train = random_ratings(&mut r, 5, 4, 0.6);
    let obj = SquaredLoss::new(5, 4, &train, 3.0);
    let emb = BlockEmbedding::new(5, 4);
    for _ in 0..10 {
        let mut x = PredictionStore::zeros(5, 4, &train, &[]);
        x.values = gaussian_vec(&mut r, train.len());
        let d = gaussian_vec(&mut r, train.len());
        let h = 1e-6;
        let shifted = |s: f64| {
            let mut y = x.clone();
            y.values.iter_mut().zip(&d).for_each(|(v, dv)| *v += s * dv);
            obj.value(&y)
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        // The direction as a symmetric matrix carries D in both off-diagonal blocks.
        let dz = DenseMat::from_fn(5, 4, |i, j| {
            train.iter().zip(&d).find(|(e, _)| e.0 as usize == i && e.1 as usize == j).map_or(0.0, |(_, v)| *v)
        });
        let g = obj.gradient(&x);
        let analytic = g.to_dense().frob_inner(&emb.embed(&dz, 1.0));
        assert!((fd - analytic).abs() <= 1e-6 * (1.0 + fd.abs()), "{fd} {analytic}");
        let mut dstore = x.clone();
        dstore.values = d.clone();
        assert!((dstore.inner(&g) - analytic).abs() <= 1e-10 * (1.0 + analytic.abs()));
    }
}

#[test]
fn squared_loss_gradient_spectrum_is_symmetric() {
    let mut r = rng::seeded(3);
    let train = random_ratings(&mut r, 7, 5, 0.5);
    let obj = SquaredLoss::new(7, 5, &train, 2.0);
    let mut x = PredictionStore::zeros(7, 5, &train, &[]);
    x.values = gaussian_vec(&mut r, train.len());
    let e = dense_eig(&obj.gradient(&x).to_dense());
    for (a, b) in e.values.iter().zip(e.values.iter().rev()) {
        assert!((a + b).abs() <= 1e-12);
    }
}

#[test]
fn closed_form_alpha_examples() {
    let mut r = rng::seeded(4);
    let (m, n, t) = (4, 3, 2.0);
    let v = rng::unit_sphere(&mut r, m + n);
    let pairs: Vec<(u32, u32)> = (0..m as u32).flat_map(|i| (0..n as u32).map(move |j| (i, j))).collect();
    // Ratings equal to the atom's entries: the full step is exact.
    let ratings: Vec<Rating> = pairs.iter().map(|&(i, j)| (i, j, t * v[i as usize] * v[m + j as usize])).collect();
    let mut store = PredictionStore::zeros(m, n, &ratings, &[]);
    store.values = gaussian_vec(&mut r, ratings.len());
    assert!((closed_form_alpha_raw(&store, &ratings, &v, t).unwrap() - 1.0).abs() <= 1e-12);
    assert!((closed_form_alpha(&store, &ratings, &v, t) - 1.0).abs() <= 1e-12);

    // The store already equals the atom: no direction.
    let at_atom = store.rank_one_like(t, &v);
    assert_eq!(closed_form_alpha_raw(&at_atom, &ratings, &v, t), None);
    assert_eq!(closed_form_alpha(&at_atom, &ratings, &v, t), 0.0);
}

/// Bisection on the sign of `phi'(a) = sum (x_a - y)(s - x)` over `[0, 1]`.
fn bisect_alpha(store: &PredictionStore, ratings: &[Rating], v: &[f64], t: f64) -> f64 {
    let s: Vec<f64> = ratings.iter().map(|e| store.rank_one_entry(t, v, e.0, e.1)).collect();
    let x = store.train_values();
    let slope = |a: f64| -> f64 {
        ratings.iter().enumerate().map(|(k, e)| ((1.0 - a) * x[k] + a * s[k] - e.2) * (s[k] - x[k])).sum()
    };
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    if slope(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn closed_form_alpha_matches_bisection() {
    let mut r = rng::seeded(5);
    for _ in 0..100 {
        let (m, n) = (r.random_range(2..8), r.random_range(2..8));
        let ratings = random_ratings(&mut r, m, n, 0.7);
        if ratings.is_empty() {
            continue;
        }
        let t = r.random_range(1.0..20.0);
        let mut store = PredictionStore::zeros(m, n, &ratings, &[]);
        store.values = ratings.iter().map(|e| e.2 + rng::gaussian(&mut r)).collect();
        let v = rng::unit_sphere(&mut r, m + n);
        let closed = closed_form_alpha(&store, &ratings, &v, t);
        let bis = bisect_alpha(&store, &ratings, &v, t);
        assert!((closed - bis).abs() <= 1e-8, "{closed} {bis}");
    }
}

fn planted(r: &mut FwRng, m: usize, n: usize, rank: usize) -> DenseMat {
    let u = DenseMat::from_rows(m, rank, gaussian_vec(r, m * rank));
    let w = DenseMat::from_rows(n, rank, gaussian_vec(r, n * rank));
    fwopt::transforms::mul_transposed(&u, &w)
}

fn dataset_from(z: &DenseMat, r: &mut FwRng, train_fraction: f64) -> RatingDataset {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..z.rows {
        for j in 0..z.cols {
            let e = (i as u32, j as u32, z.get(i, j));
            if r.random_bool(train_fraction) {
                train.push(e);
            } else {
                test.push(e);
            }
        }
    }
    RatingDataset::new(z.rows, z.cols, train, test).unwrap()
}

#[test]
fn store_tracks_factors_and_budget() {
    let mut r = rng::seeded(6);
    let z = planted(&mut r, 15, 12, 3);
    let ds = dataset_from(&z, &mut r, 0.6);
    let t = nuclear_norm_oracle(&z);
    for grad_averaging in [false, true] {
        for steps in [10, 20, 30, 40] {
            let cfg = CompletionConfig { grad_averaging, ..CompletionConfig::normalized(t, steps) };
            let out = complete(&ds, &cfg).unwrap();
            assert!(out.store.max_factor_error(&out.l, &out.r) <= 1e-8);
            assert!(factor_bound(&out.l, &out.r) <= t / 2.0 + 1e-6);
            assert_eq!(out.history.len(), steps + 1);
            assert_eq!(out.ledger.k, steps);
        }
    }
}

#[test]
fn train_loss_is_monotone_under_line_search() {
    let mut r = rng::seeded(7);
    let z = planted(&mut r, 20, 16, 2);
    let ds = dataset_from(&z, &mut r, 0.5);
    let out = complete(&ds, &CompletionConfig::normalized(nuclear_norm_oracle(&z), 60)).unwrap();
    for w in out.trace.rows.windows(2) {
        assert!(w[1].f <= w[0].f * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0].f, w[1].f);
    }
    for w in out.history.windows(2) {
        assert!(w[1].train_rmse <= w[0].train_rmse * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn planted_rank_two_is_recovered() {
    let mut r = rng::seeded(8);
    let z = planted(&mut r, 20, 15, 2);
    let t = 2.0 * nuclear_norm_oracle(&z);
    let ds = RatingDataset::new(20, 15, dataset_from(&z, &mut r, 1.0).train, vec![]).unwrap();
    assert_eq!(ds.train.len(), 300);
    let out = complete(&ds, &CompletionConfig::normalized(t, 200)).unwrap();
    let best = out.history.iter().map(|h| h.train_rmse).fold(f64::INFINITY, f64::min);
    assert!(best <= 0.05, "best train RMSE {best}, final {}", out.final_metrics.train_rmse);
}

#[test]
fn tiny_budget_predicts_zero() {
    let mut r = rng::seeded(9);
    let z = planted(&mut r, 10, 8, 2);
    let ds = dataset_from(&z, &mut r, 0.5);
    let out = complete(&ds, &CompletionConfig::normalized(1e-9, 10)).unwrap();
    assert!(out.store.values.iter().all(|x| x.abs() <= 1e-9));
    let rms = (ds.test.iter().map(|e| e.2 * e.2).sum::<f64>() / ds.test.len() as f64).sqrt();
    assert!((out.final_metrics.test_rmse - rms).abs() <= 1e-8);
    assert_eq!(zero_baseline(&ds.test).0, rms);
}

#[test]
fn cold_start_predictions_are_zero() {
    // User 2 and item 2 appear only in test.
    let train = vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 4.0)];
    let test = vec![(2, 0, 5.0), (0, 2, 1.0), (1, 1, 4.0)];
    let ds = RatingDataset::new(3, 3, train, test).unwrap();
    let out = complete(&ds, &CompletionConfig::normalized(10.0, 5)).unwrap();
    let preds = test_predictions(&ds, &out.store);
    assert_eq!(preds[0], 0.0);
    assert_eq!(preds[1], 0.0);
    assert!(preds[2] != 0.0);
}

#[test]
fn complete_rejects_bad_input() {
    let ds = RatingDataset::new(2, 2, vec![(0, 0, 1.0)], vec![]).unwrap();
    assert!(complete(&ds, &CompletionConfig::normalized(0.0, 5)).is_err());
    let empty = RatingDataset { m: 2, n: 2, train: vec![], test: vec![] };
    assert!(complete(&empty, &CompletionConfig::normalized(1.0, 5)).is_err());
}
