use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{FwError, Result};
use crate::rng;

/// `(user, item, rating)` with dense 0-based indices.
pub type Rating = (u32, u32, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    pub m: usize,
    pub n: usize,
    pub train: Vec<Rating>,
    pub test: Vec<Rating>,
}

impl RatingDataset {
    pub fn new(m: usize, n: usize, train: Vec<Rating>, test: Vec<Rating>) -> Result<Self> {
        let ds = Self { m, n, train, test };
        ds.validate()?;
        Ok(ds)
    }

    /// Indices in range, finite ratings, no repeated pair within a split.
    pub fn validate(&self) -> Result<()> {
        for (name, split) in [("train", &self.train), ("test", &self.test)] {
            let mut seen = HashSet::with_capacity(split.len());
            for &(i, j, y) in split {
                if i as usize >= self.m || j as usize >= self.n {
                    return Err(FwError::InvalidInput(format!("{name} entry ({i}, {j}) outside {}x{}", self.m, self.n)));
                }
                if !y.is_finite() {
                    return Err(FwError::InvalidInput(format!("{name} entry ({i}, {j}) is not finite")));
                }
                if !seen.insert((i, j)) {
                    return Err(FwError::InvalidInput(format!("{name} repeats entry ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Both splits, train first.
    pub fn all(&self) -> impl Iterator<Item = &Rating> {
        self.train.iter().chain(&self.test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// `u.data`: `user \t item \t rating \t timestamp`
    Tab100k,
    /// `ratings.dat`: `user::item::rating::timestamp`
    Dat1m,
}

impl FromStr for DataFormat {
    type Err = FwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tab_100k" | "tab" | "100k" => Ok(DataFormat::Tab100k),
            "dat_1m" | "dat" | "1m" => Ok(DataFormat::Dat1m),
            other => Err(FwError::InvalidInput(format!("unknown data format `{other}`"))),
        }
    }
}

/// Reads a MovieLens ratings file into the train split.
///
/// Raw ids are mapped to dense indices in increasing id order. Lines are
/// streamed; blank lines are skipped.
pub fn load_movielens(path: &Path, format: DataFormat) -> Result<RatingDataset> {
    let reader = BufReader::new(File::open(path)?);
    let display = path.display().to_string();
    let mut raw = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = match format {
            DataFormat::Tab100k => line.split('\t').collect(),
            DataFormat::Dat1m => line.split("::").collect(),
        };
        let parse_err = |msg: String| FwError::Parse { path: display.clone(), line: idx + 1, msg };
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let user: u64 = fields[0].trim().parse().map_err(|e| parse_err(format!("user id: {e}")))?;
        let item: u64 = fields[1].trim().parse().map_err(|e| parse_err(format!("item id: {e}")))?;
        let rating: f64 = fields[2].trim().parse().map_err(|e| parse_err(format!("rating: {e}")))?;
        fields[3].trim().parse::<u64>().map_err(|e| parse_err(format!("timestamp: {e}")))?;
        if !rating.is_finite() {
            return Err(parse_err("rating is not finite".into()));
        }
        raw.push((user, item, rating, idx + 1));
    }
    if raw.is_empty() {
        return Err(FwError::Parse { path: display, line: 0, msg: "no ratings".into() });
    }
    let users = dense_ids(raw.iter().map(|r| r.0));
    let items = dense_ids(raw.iter().map(|r| r.1));
    let mut seen = HashSet::with_capacity(raw.len());
    let mut train = Vec::with_capacity(raw.len());
    for (u, it, y, line) in raw {
        let (i, j) = (users[&u], items[&it]);
        if !seen.insert((i, j)) {
            return Err(FwError::Parse { path: display, line, msg: format!("duplicate rating for user {u}, item {it}") });
        }
        train.push((i, j, y));
    }
    Ok(RatingDataset { m: users.len(), n: items.len(), train, test: Vec::new() })
}

fn dense_ids(ids: impl Iterator<Item = u64>) -> BTreeMap<u64, u32> {
    let mut map: BTreeMap<u64, u32> = ids.map(|id| (id, 0)).collect();
    for (k, v) in map.values_mut().enumerate() {
        *v = k as u32;
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitPolicy {
    /// A uniformly random `rho` fraction (rounded) goes to train.
    RandomFraction { rho: f64, seed: u64 },
    /// `r` random ratings of each user with more than `r` ratings go to test.
    PerUserHoldout { r: usize, seed: u64 },
}

/// Re-splits all ratings of `ds` according to `policy`.
pub fn split_train_test(ds: &RatingDataset, policy: SplitPolicy) -> Result<RatingDataset> {
    let all: Vec<Rating> = ds.all().copied().collect();
    let (train, test) = match policy {
        SplitPolicy::RandomFraction { rho, seed } => {
            if !(0.0..=1.0).contains(&rho) {
                return Err(FwError::InvalidInput(format!("train fraction must lie in [0, 1], got {rho}")));
            }
            let mut order: Vec<usize> = (0..all.len()).collect();
            order.shuffle(&mut rng::seeded(seed));
            let cut = (rho * all.len() as f64).round() as usize;
            let mut train_idx = order[..cut].to_vec();
            let mut test_idx = order[cut..].to_vec();
            train_idx.sort_unstable();
            test_idx.sort_unstable();
            (train_idx.into_iter().map(|k| all[k]).collect(), test_idx.into_iter().map(|k| all[k]).collect())
        }
        SplitPolicy::PerUserHoldout { r, seed } => {
            let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); ds.m];
            for (k, e) in all.iter().enumerate() {
                by_user[e.0 as usize].push(k);
            }
            let mut rng = rng::seeded(seed);
            let mut is_test = vec![false; all.len()];
            for list in &mut by_user {
                if list.len() > r {
                    list.shuffle(&mut rng);
                    for &k in &list[..r] {
                        is_test[k] = true;
                    }
                }
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (k, e) in all.into_iter().enumerate() {
                if is_test[k] {
                    test.push(e);
                } else {
                    train.push(e);
                }
            }
            (train, test)
        }
    };
    Ok(RatingDataset { m: ds.m, n: ds.n, train, test })
}

/// Offsets `(mu_i + mu_j) / 2` from train-only user and item means; a user
/// or item without training ratings gets the global mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub global: f64,
    pub user_means: Vec<f64>,
    pub item_means: Vec<f64>,
}

impl Normalizer {
    pub fn fit(ds: &RatingDataset) -> Self {
        let global = if ds.train.is_empty() {
            0.0
        } else {
            ds.train.iter().map(|e| e.2).sum::<f64>() / ds.train.len() as f64
        };
        let means = |len: usize, key: &dyn Fn(&Rating) -> usize| {
            let mut sum = vec![0.0; len];
            let mut count = vec![0usize; len];
            for e in &ds.train {
                sum[key(e)] += e.2;
                count[key(e)] += 1;
            }
            sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { global }).collect::<Vec<f64>>()
        };
        Self { global, user_means: means(ds.m, &|e| e.0 as usize), item_means: means(ds.n, &|e| e.1 as usize) }
    }

    pub fn offset(&self, i: u32, j: u32) -> f64 {
        0.5 * (self.user_means[i as usize] + self.item_means[j as usize])
    }

    pub fn normalize(&self, e: Rating) -> Rating {
        (e.0, e.1, e.2 - self.offset(e.0, e.1))
    }

    pub fn denormalize(&self, i: u32, j: u32, x: f64) -> f64 {
        x + self.offset(i, j)
    }
}

/// Subtracts the mean offsets from both splits. Errors measured on the
/// normalized scale equal those on the raw scale.
pub fn normalize_means(ds: &RatingDataset) -> (RatingDataset, Normalizer) {
    let norm = Normalizer::fit(ds);
    let out = RatingDataset {
        m: ds.m,
        n: ds.n,
        train: ds.train.iter().map(|&e| norm.normalize(e)).collect(),
        test: ds.test.iter().map(|&e| norm.normalize(e)).collect(),
    };
    (out, norm)
}

/// Root mean squared error and mean absolute error over `1..=5` scaled by
/// `1/4`, of `predictions` against the ratings they are aligned with.
pub fn metrics(predictions: &[f64], ratings: &[Rating]) -> (f64, f64) {
    assert_eq!(predictions.len(), ratings.len());
    if ratings.is_empty() {
        return (0.0, 0.0);
    }
    let n = ratings.len() as f64;
    let (mut sq, mut abs) = (0.0, 0.0);
    for (p, e) in predictions.iter().zip(ratings) {
        let d = p - e.2;
        sq += d * d;
        abs += d.abs();
    }
    ((sq / n).sqrt(), abs / n / 4.0)
}
