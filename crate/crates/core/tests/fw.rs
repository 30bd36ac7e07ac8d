use fwopt::fw::*;
use fwopt::linalg::{dot, DenseMat, DenseSym};
use fwopt::matrix::{RankOne, Spectahedron, SquaredFrobenius};
use fwopt::rng::{self, gaussian_vec, FwRng};
use fwopt::vector::*;
use fwopt::FwError;
use proptest::prelude::*;
use rand::Rng;

fn run(
    obj: &(impl Objective<Vec<f64>, Vec<f64>> + ?Sized),
    dom: &Simplex,
    schedule: StepSchedule,
    iters: usize,
) -> FwResult<Simplex> {
    fw_run(obj, dom, Start::Atom(0), &FwOptions::new(schedule, Stop::iters(iters))).unwrap()
}

/// `log sum exp(x_i + b_i)`, with no closed-form line search.
struct LogSumExp {
    b: Vec<f64>,
}

impl Objective<Vec<f64>, Vec<f64>> for LogSumExp {
    fn value(&self, x: &Vec<f64>) -> f64 {
        let m = x.iter().zip(&self.b).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
        m + x.iter().zip(&self.b).map(|(a, b)| (a + b - m).exp()).sum::<f64>().ln()
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        let e: Vec<f64> = x.iter().zip(&self.b).map(|(a, b)| (a + b).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }
}

struct Broken;

impl Objective<Vec<f64>, Vec<f64>> for Broken {
    fn value(&self, x: &Vec<f64>) -> f64 {
        if x[0] < 1.0 {
            f64::NAN
        } else {
            0.0
        }
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        vec![-1.0; x.len()].into_iter().enumerate().map(|(i, v)| if i == 1 { -2.0 } else { v }).collect()
    }
}

#[test]
fn hand_trace_squared_norm_on_three_simplex() {
    let res = run(&SquaredNorm::new(), &Simplex::new(3), StepSchedule::Harmonic, 2);
    let rows = &res.trace.rows;
    assert_eq!(rows[0].alpha, 1.0);
    assert_eq!(rows[1].f, 1.0);
    assert!((rows[1].alpha - 2.0 / 3.0).abs() < 1e-15);
    assert!((rows[2].f - 5.0 / 9.0).abs() < 1e-15);
    assert_eq!(rows[2].alpha, 0.0);
    let ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    assert_eq!(ks, vec![0, 1, 2]);
}

#[test]
fn linear_objective_solved_in_one_step() {
    let mut rng = rng::seeded(4);
    for n in [1, 3, 10] {
        let c = gaussian_vec(&mut rng, n);
        let cmin = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let res = run(&Linear { c }, &Simplex::new(n), StepSchedule::Harmonic, 1);
        assert_eq!(res.f, cmin);
        assert_eq!(res.gap, 0.0);
    }
    let dom = L1Ball::new(4, 2.0);
    let c = vec![0.5, -3.0, 1.0, 2.0];
    let res = fw_run(&Linear { c }, &dom, Start::Origin, &FwOptions::new(StepSchedule::Harmonic, Stop::iters(1))).unwrap();
    assert_eq!(res.f, -6.0);
    assert_eq!(res.gap, 0.0);
}

#[test]
fn primal_rate_on_ten_simplex() {
    let res = run(&SquaredNorm::new(), &Simplex::new(10), StepSchedule::Harmonic, 300);
    for r in &res.trace.rows[1..] {
        assert!(r.f - 0.1 <= 8.0 / (r.k as f64 + 2.0), "k = {}", r.k);
    }
}

#[test]
fn duality_gap_examples() {
    let dom = Simplex::new(2);
    assert_eq!(duality_gap(&dom, &vec![1.0, 0.0], &vec![2.0, 0.0]).unwrap(), 2.0);
    let c = vec![3.0, -1.0];
    assert_eq!(duality_gap(&dom, &vec![0.0, 1.0], &c).unwrap(), 0.0);
    let mut rng = rng::seeded(8);
    for k in 1..6 {
        let x = random_sparse_simplex_point(&mut rng, 6, k);
        let g = SquaredNorm::new().gradient(&x);
        assert!(duality_gap(&Simplex::new(6), &x, &g).unwrap() >= 2.0 / k as f64 - 1e-12);
    }
}

#[test]
fn certified_run_on_four_simplex() {
    let obj = SquaredNorm::with_curvature(2.0);
    let run = gap_certified_run(&obj, &Simplex::new(4), Start::Atom(0), 0.5, LmoMode::Exact, 0).unwrap();
    assert_eq!(run.budget_k, 16);
    assert!(run.result.certified);
    assert!(run.result.certified_gap() <= 0.5);
    assert!(run.result.trace.rows.len() <= 34);
}

#[test]
fn certified_run_on_linear_objective() {
    let obj = Linear { c: vec![2.0, 1.0, 3.0] };
    let run = gap_certified_run(&obj, &Simplex::new(3), Start::Atom(0), 1e-6, LmoMode::Exact, 0).unwrap();
    assert!(run.result.certified);
    assert_eq!(run.result.trace.rows.len(), 2);
}

#[test]
fn certified_run_on_spectahedron_approx() {
    let obj = SquaredFrobenius { curvature: Some(2.0) };
    let dom = Spectahedron::dense(6, 1.0);
    let run = gap_certified_run(&obj, &dom, Start::Atom(RankOne::basis(6, 0)), 0.4, LmoMode::Approx, 3).unwrap();
    assert_eq!(run.budget_k, 40);
    assert!(run.result.certified);
    assert!(run.result.trace.rows.last().unwrap().k <= 81);
}

#[test]
fn certified_run_needs_curvature() {
    let err = gap_certified_run(&SquaredNorm::new(), &Simplex::new(3), Start::Atom(0), 0.1, LmoMode::Exact, 0);
    assert!(matches!(err, Err(FwError::InvalidInput(_))));
    let opts = FwOptions::new(StepSchedule::Harmonic, Stop::iters(3)).approx();
    assert!(fw_run(&SquaredNorm::new(), &Simplex::new(3), Start::Atom(0), &opts).is_err());
}

#[test]
fn line_search_examples() {
    let dom = Simplex::new(2);
    let x = vec![1.0, 0.0];
    assert_eq!(line_search_alpha(&SquaredNorm::new(), &dom, &x, &1, 0).unwrap(), 0.5);
    assert_eq!(line_search_alpha(&SquaredNorm::new(), &dom, &x, &0, 0).unwrap(), 0.0);
}

#[test]
fn line_search_bisection_without_closed_form() {
    let mut rng = rng::seeded(12);
    let n = 5;
    let dom = Simplex::new(n);
    for _ in 0..20 {
        let obj = LogSumExp { b: gaussian_vec(&mut rng, n) };
        let x = rng::simplex_point(&mut rng, n);
        let s = rng.random_range(0..n);
        let a = line_search_alpha(&obj, &dom, &x, &s, 3).unwrap();
        assert!((0.0..=1.0).contains(&a));
        let phi = |alpha: f64| {
            let mut p = x.clone();
            dom.blend(&mut p, alpha, &s);
            obj.value(&p)
        };
        let grid = (0..=1000).map(|i| phi(i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        assert!(phi(a) <= grid + 1e-12);
    }
}

#[test]
fn curvature_examples() {
    assert_eq!(curvature_from_hessian(2.0, Simplex::new(7).diameter_sq()), 2.0);
    assert_eq!(curvature_from_hessian(0.0, 5.0), 0.0);
    assert_eq!(curvature_from_hessian(1.0, Spectahedron::dense(4, 1.0).diameter_sq()), 1.0);
}

#[test]
fn non_finite_objective_aborts() {
    let res = run_err(&Broken);
    assert!(matches!(res, Some(FwError::NonFinite { .. })), "{res:?}");
}

fn run_err(obj: &Broken) -> Option<FwError> {
    fw_run(obj, &Simplex::new(3), Start::Atom(0), &FwOptions::new(StepSchedule::Harmonic, Stop::iters(5))).err()
}

fn uniform_sampler(n: usize) -> impl Fn(&Vec<f64>, &mut FwRng) -> usize + Sync {
    move |_g: &Vec<f64>, rng: &mut FwRng| rng.random_range(0..n)
}

#[test]
fn randomized_oracle_hit_rate() {
    let n = 8;
    let dom = Simplex::new(n);
    let sampler = uniform_sampler(n);
    let mut rng = rng::seeded(5);
    let g = gaussian_vec(&mut rng, n);
    let best = simplex_lmo(&g);
    let trials = 4000;
    let hits = (0..trials).filter(|_| randomized_lmo(&dom, &g, &sampler, &mut rng).atom == best).count();
    let p = 1.0 / n as f64;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    assert!(hits as f64 / trials as f64 >= p - 3.0 * sigma);

    let one = Simplex::new(1);
    let s1 = uniform_sampler(1);
    for _ in 0..10 {
        assert_eq!(randomized_lmo(&one, &vec![0.3], &s1, &mut rng).atom, 0);
    }
}

#[test]
fn randomized_run_requires_line_search() {
    let dom = Simplex::new(3);
    let sampler = uniform_sampler(3);
    let opts = FwOptions::new(StepSchedule::Harmonic, Stop::iters(3));
    assert!(fw_run_randomized(&SquaredNorm::new(), &dom, Start::Atom(0), &opts, &sampler).is_err());
}

#[test]
fn randomized_run_within_five_times_deterministic() {
    let n = 5;
    let dom = Simplex::new(n);
    let target = 1.0 / n as f64 + 0.1;
    let first_hit = |res: &FwResult<Simplex>| res.trace.rows.iter().position(|r| r.f <= target);
    let opts = FwOptions::new(StepSchedule::LineSearch, Stop::iters(400));
    let det = first_hit(&fw_run(&SquaredNorm::new(), &dom, Start::Atom(0), &opts).unwrap()).unwrap();
    let sampler = uniform_sampler(n);
    let mut counts: Vec<usize> = (0..20)
        .map(|seed| {
            let res = fw_run_randomized(&SquaredNorm::new(), &dom, Start::Atom(0), &opts.clone().seed(seed), &sampler).unwrap();
            first_hit(&res).unwrap_or(usize::MAX)
        })
        .collect();
    counts.sort_unstable();
    let median = counts[10];
    assert!(median <= 5 * det, "median {median}, deterministic {det}");
}

#[test]
fn randomized_failures_never_increase_f() {
    let dom = Simplex::new(6);
    let sampler = uniform_sampler(6);
    let opts = FwOptions::new(StepSchedule::LineSearch, Stop::iters(60)).seed(9);
    let res = fw_run_randomized(&SquaredNorm::new(), &dom, Start::Atom(0), &opts, &sampler).unwrap();
    assert_eq!(res.trace.seed, Some(9));
    for w in res.trace.rows.windows(2) {
        assert!(w[1].f <= w[0].f + 1e-15);
    }
}

#[test]
fn trace_csv_round_trip() {
    let res = run(&SquaredNorm::new(), &Simplex::new(4), StepSchedule::Harmonic, 10);
    let csv = res.trace.to_csv_string();
    assert!(csv.starts_with("k,f,gap,alpha,atom,matvecs,millis\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    res.trace.save(&path).unwrap();
    let back = RunTrace::read_csv(&path).unwrap();
    assert_eq!(back.rows.len(), res.trace.rows.len());
    for (a, b) in back.rows.iter().zip(&res.trace.rows) {
        assert_eq!((a.k, a.f, a.gap, a.alpha, &a.atom), (b.k, b.f, b.gap, b.alpha, &b.atom));
    }
}

#[test]
fn stop_hook_ends_run() {
    let dom = Simplex::new(5);
    let opts = FwOptions::new(StepSchedule::Harmonic, Stop::iters(100));
    let hooks = Hooks::<Simplex> { stop: Some(Box::new(|k, _x, _f, _g| k == 7)), ..Default::default() };
    let res = fw_run_with(&SquaredNorm::new(), &dom, Start::Atom(0), &opts, hooks).unwrap();
    assert_eq!(res.trace.rows.len(), 8);
}

fn random_ls(rng: &mut FwRng, rows: usize, n: usize) -> LeastSquares {
    LeastSquares::new(DenseMat::from_rows(rows, n, gaussian_vec(rng, rows * n)), gaussian_vec(rng, rows))
}

fn fd_error(obj: &impl Objective<Vec<f64>, Vec<f64>>, x: &[f64], rng: &mut FwRng) -> f64 {
    let mut d = gaussian_vec(rng, x.len());
    let nd = fwopt::linalg::norm2(&d);
    d.iter_mut().for_each(|v| *v /= nd);
    let h = 1e-5;
    let at = |s: f64| obj.value(&x.iter().zip(&d).map(|(a, b)| a + s * b).collect());
    ((at(h) - at(-h)) / (2.0 * h) - dot(&obj.gradient(&x.to_vec()), &d)).abs()
}

fn convexity_gap(obj: &impl Objective<Vec<f64>, Vec<f64>>, x: &[f64], y: &[f64], lam: f64) -> f64 {
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
    obj.value(&z) - lam * obj.value(&x.to_vec()) - (1.0 - lam) * obj.value(&y.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builtin_objectives_pass_gradient_and_convexity_checks(seed in 0u64..100_000, n in 2usize..8, lam in 0.0f64..1.0) {
        let mut rng = rng::seeded(seed);
        let x = rng::simplex_point(&mut rng, n);
        let y = rng::simplex_point(&mut rng, n);
        let q = {
            let b = DenseMat::from_rows(n, n, gaussian_vec(&mut rng, n * n));
            b.gram()
        };
        let quad = Quadratic::new(q, gaussian_vec(&mut rng, n));
        let ls = random_ls(&mut rng, n + 1, n);
        let shifted = ShiftedSquares::new(gaussian_vec(&mut rng, n));
        prop_assert!(fd_error(&SquaredNorm::new(), &x, &mut rng) <= 1e-5);
        prop_assert!(fd_error(&quad, &x, &mut rng) <= 1e-5);
        prop_assert!(fd_error(&ls, &x, &mut rng) <= 1e-5);
        prop_assert!(fd_error(&shifted, &x, &mut rng) <= 1e-5);
        prop_assert!(convexity_gap(&SquaredNorm::new(), &x, &y, lam) <= 1e-9);
        prop_assert!(convexity_gap(&quad, &x, &y, lam) <= 1e-9);
        prop_assert!(convexity_gap(&ls, &x, &y, lam) <= 1e-9);
        prop_assert!(convexity_gap(&shifted, &x, &y, lam) <= 1e-9);
    }

    #[test]
    fn step_lemma_and_weak_duality(seed in 0u64..100_000, n in 2usize..30, alpha in 0.0f64..=1.0) {
        let mut rng = rng::seeded(seed);
        let x = rng::simplex_point(&mut rng, n);
        let f = SquaredNorm::new();
        let g = f.gradient(&x);
        let dom = Simplex::new(n);
        let s = simplex_lmo(&g);
        let gap = simplex_gap(&x, &g);
        let mut y = x.clone();
        dom.blend(&mut y, alpha, &s);
        prop_assert!(f.value(&y) <= f.value(&x) - alpha * gap + alpha * alpha * 2.0 + 1e-12);
        prop_assert!(gap >= f.value(&x) - 1.0 / n as f64 - 1e-12);
        prop_assert!((gap - duality_gap(&dom, &x, &g).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn line_search_dominates_fixed_step(seed in 0u64..100_000, n in 2usize..10, k in 0usize..50) {
        let mut rng = rng::seeded(seed);
        let obj = random_ls(&mut rng, n + 2, n);
        let dom = Simplex::new(n);
        let x = rng::simplex_point(&mut rng, n);
        let s = simplex_lmo(&obj.gradient(&x));
        let a = line_search_alpha(&obj, &dom, &x, &s, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let step = |alpha: f64| {
            let mut p = x.clone();
            dom.blend(&mut p, alpha, &s);
            obj.value(&p)
        };
        for grid in [0.0, 2.0 / (k as f64 + 2.0), 1.0] {
            prop_assert!(step(a) <= step(grid) + 1e-12);
        }
    }

    #[test]
    fn schedules_stay_in_unit_interval(k in 0usize..100_000, big_k in 0usize..1000) {
        for s in [StepSchedule::Harmonic, StepSchedule::FixedAfter(big_k), StepSchedule::LineSearch] {
            let a = s.alpha(k);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn ledger_matches_iterate_on_vector_domains(seed in 0u64..100_000, n in 2usize..12, iters in 1usize..80, ls in any::<bool>()) {
        let mut rng = rng::seeded(seed);
        let obj = random_ls(&mut rng, n, n);
        let schedule = if ls { StepSchedule::LineSearch } else { StepSchedule::Harmonic };
        let opts = FwOptions::new(schedule, Stop::iters(iters));

        let sx = Simplex::new(n);
        let r = fw_run(&obj, &sx, Start::Atom(0), &opts).unwrap();
        prop_assert!(sx.contains(&r.point));
        prop_assert!((r.ledger.weight_sum() - 1.0).abs() <= 1e-12);
        prop_assert!(r.ledger.weights().all(|w| w >= 0.0));
        prop_assert!(r.ledger.verify(&sx, &r.point) <= 1e-10);
        prop_assert!(r.point.iter().filter(|v| **v != 0.0).count() <= iters + 1);

        let l1 = L1Ball::new(n, 1.5);
        let r = fw_run(&obj, &l1, Start::Origin, &opts).unwrap();
        prop_assert!(l1.contains(&r.point));
        prop_assert!((r.ledger.weight_sum() - 1.0).abs() <= 1e-12);
        prop_assert!(r.ledger.verify(&l1, &r.point) <= 1e-10);
        prop_assert!(r.point.iter().filter(|v| **v != 0.0).count() <= iters);

        let cube = Cube::new(n);
        let r = fw_run(&obj, &cube, Start::Origin, &opts).unwrap();
        prop_assert!(cube.contains(&r.point));
        prop_assert!((r.ledger.weight_sum() - 1.0).abs() <= 1e-12);
        prop_assert!(r.ledger.verify(&cube, &r.point) <= 1e-10);
        prop_assert!(r.ledger.len() <= iters + 1);

        for w in r.trace.rows.windows(2) {
            prop_assert!(w[1].k == w[0].k + 1);
        }
    }

    #[test]
    fn weak_duality_on_random_runs(seed in 0u64..100_000, n in 2usize..40) {
        let res = run(&SquaredNorm::new(), &Simplex::new(n), StepSchedule::Harmonic, 50 + (seed % 50) as usize);
        prop_assert!(res.trace.weak_duality_violations(1.0 / n as f64, 1e-12).is_empty());
    }
}

#[test]
fn dense_sym_ledger_reconstruction() {
    let dom = Spectahedron::dense(5, 2.0);
    let obj = SquaredFrobenius { curvature: Some(8.0) };
    let opts = FwOptions::new(StepSchedule::LineSearch, Stop::iters(30)).approx().seed(2);
    let r = fw_run(&obj, &dom, Start::Atom(RankOne::basis(5, 0)), &opts).unwrap();
    assert!(dom.contains(&r.point));
    assert!(r.ledger.verify(&dom, &r.point) <= 1e-10);
    let _: &DenseSym = &r.point;
}
