use super::data::{metrics, normalize_means, Normalizer, Rating, RatingDataset};
use super::store::{PredictionStore, SquaredLoss};
use crate::eigen::StartVector;
use crate::error::{FwError, Result};
use crate::fw::{IterateLedger, LmoMode, RunTrace};
use crate::linalg::DenseMat;
use crate::matrix::{hazan_run_observed, HazanOptions, HazanStart, PowerBudget, RankOne, ShiftPolicy, Spectahedron};
use crate::transforms::{extract_factorization, BlockEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Ratings as-is, start at the uniform atom.
    Table1,
    /// Ratings minus mean offsets, start at `Z = 0`.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompletionStart {
    /// `t u u^T` with `u` uniform: every prediction starts at `t / (m + n)`.
    Uniform,
    /// `t e_1 e_1^T`, whose `Z` block is zero.
    Zero,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionConfig {
    pub t: f64,
    pub steps: usize,
    pub gap_tol: Option<f64>,
    pub line_search: bool,
    pub grad_averaging: bool,
    pub budget: PowerBudget,
    pub shift: ShiftPolicy,
    pub start: CompletionStart,
    pub power_start: StartVector,
    pub warm_start: bool,
    pub seed: u64,
    pub timing: bool,
}

impl CompletionConfig {
    /// MovieLens 100k protocol: `t = 9975`, 15 steps with line search,
    /// `ceil(0.2 k) + 3` power iterations at step `k`, diagonal shift of
    /// half the previous eigenvalue, each power run started from the
    /// previous eigenvector.
    pub fn table1() -> Self {
        Self {
            t: 9975.0,
            steps: 15,
            gap_tol: None,
            line_search: true,
            grad_averaging: false,
            budget: PowerBudget::Linear { slope: 0.2, offset: 3 },
            shift: ShiftPolicy::HalfPrevious,
            start: CompletionStart::Uniform,
            power_start: StartVector::Uniform,
            warm_start: true,
            seed: 0,
            timing: false,
        }
    }

    /// Same solver settings from `Z = 0`, meant for mean-normalized data.
    pub fn normalized(t: f64, steps: usize) -> Self {
        Self { t, steps, start: CompletionStart::Zero, ..Self::table1() }
    }

    pub fn for_preset(preset: Preset) -> Self {
        match preset {
            Preset::Table1 => Self::table1(),
            Preset::Normalized => Self::normalized(9975.0, 15),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub k: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub test_nmae: f64,
}

#[derive(Debug, Clone)]
pub struct CompletionOutcome {
    pub store: PredictionStore,
    pub ledger: IterateLedger<RankOne>,
    pub l: DenseMat,
    pub r: DenseMat,
    /// Metrics at every iterate, `k = 0` being the start.
    pub history: Vec<StepMetrics>,
    pub trace: RunTrace,
    pub matvecs: u64,
    pub f: f64,
    pub gap: f64,
    pub final_metrics: StepMetrics,
}

/// Test predictions on the scale the store lives on; pairs whose user or
/// item has no training rating get zero.
pub fn test_predictions(ds: &RatingDataset, store: &PredictionStore) -> Vec<f64> {
    let (users, items) = seen(ds);
    ds.test
        .iter()
        .zip(store.test_values())
        .map(|(e, &x)| if users[e.0 as usize] && items[e.1 as usize] { x } else { 0.0 })
        .collect()
}

fn seen(ds: &RatingDataset) -> (Vec<bool>, Vec<bool>) {
    let mut users = vec![false; ds.m];
    let mut items = vec![false; ds.n];
    for e in &ds.train {
        users[e.0 as usize] = true;
        items[e.1 as usize] = true;
    }
    (users, items)
}

fn step_metrics(k: usize, ds: &RatingDataset, mask: &(Vec<bool>, Vec<bool>), store: &PredictionStore) -> StepMetrics {
    let (train_rmse, _) = metrics(store.train_values(), &ds.train);
    let preds: Vec<f64> = ds
        .test
        .iter()
        .zip(store.test_values())
        .map(|(e, &x)| if mask.0[e.0 as usize] && mask.1[e.1 as usize] { x } else { 0.0 })
        .collect();
    let (test_rmse, test_nmae) = metrics(&preds, &ds.test);
    StepMetrics { k, train_rmse, test_rmse, test_nmae }
}

/// Runs the spectahedron solver on the squared loss over the training
/// entries of `ds` and reads off factors and metrics.
pub fn complete(ds: &RatingDataset, cfg: &CompletionConfig) -> Result<CompletionOutcome> {
    ds.validate()?;
    if !(cfg.t > 0.0) || !cfg.t.is_finite() {
        return Err(FwError::InvalidInput(format!("t must be positive, got {}", cfg.t)));
    }
    if ds.train.is_empty() {
        return Err(FwError::InvalidInput("no training ratings".into()));
    }
    let emb = BlockEmbedding::new(ds.m, ds.n);
    let total = emb.total();
    let proto = PredictionStore::zeros(ds.m, ds.n, &ds.train, &ds.test);
    let mut domain = Spectahedron::with_cache(total, cfg.t, proto);
    domain.eig.start = cfg.power_start.clone();
    let objective = SquaredLoss::new(ds.m, ds.n, &ds.train, cfg.t);
    let start = match cfg.start {
        CompletionStart::Uniform => HazanStart::Given(vec![1.0; total]),
        CompletionStart::Zero => HazanStart::FirstBasis,
        CompletionStart::Random => HazanStart::Random,
    };
    let opts = HazanOptions {
        max_iters: cfg.steps,
        gap_tol: cfg.gap_tol,
        line_search: cfg.line_search,
        grad_averaging: cfg.grad_averaging,
        lmo_mode: LmoMode::Approx,
        budget: cfg.budget,
        shift: cfg.shift,
        start,
        warm_start: cfg.warm_start,
        seed: cfg.seed,
        timing: cfg.timing,
    };
    let mask = seen(ds);
    let mut history = Vec::with_capacity(cfg.steps + 1);
    let mut observe = |k: usize, x: &PredictionStore| history.push(step_metrics(k, ds, &mask, x));
    let res = hazan_run_observed(&objective, &domain, &opts, Some(&mut observe))?;
    let (l, r) = extract_factorization(&res.ledger, emb, cfg.t)?;
    let final_metrics = step_metrics(res.trace.rows.len() - 1, ds, &mask, &res.point);
    Ok(CompletionOutcome {
        matvecs: res.trace.total_matvecs(),
        store: res.point,
        ledger: res.ledger,
        l,
        r,
        history,
        trace: res.trace,
        f: res.f,
        gap: res.gap,
        final_metrics,
    })
}

/// [`complete`] after the preprocessing of `preset`; also returns the
/// normalizer when one was applied.
pub fn complete_preset(ds: &RatingDataset, preset: Preset, cfg: &CompletionConfig) -> Result<(CompletionOutcome, Option<Normalizer>)> {
    match preset {
        Preset::Table1 => Ok((complete(ds, cfg)?, None)),
        Preset::Normalized => {
            let (nds, norm) = normalize_means(ds);
            Ok((complete(&nds, cfg)?, Some(norm)))
        }
    }
}

/// Metrics of predicting zero on the given ratings.
pub fn zero_baseline(ratings: &[Rating]) -> (f64, f64) {
    metrics(&vec![0.0; ratings.len()], ratings)
}
