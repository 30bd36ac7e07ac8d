use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use fwopt::eigen::{dense_eig, spectral_norm, EigOptions};
use fwopt::fw::*;
use fwopt::linalg::{dot, DenseMat, DenseSym, SparseSym, SymOp};
use fwopt::matcomp::*;
use fwopt::matrix::*;
use fwopt::rng::{self, gaussian, gaussian_vec, FwRng};
use fwopt::sdp::*;
use fwopt::transforms::*;
use fwopt::vector::*;
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn simplex_run(n: usize, iters: usize) -> FwResult<Simplex> {
    let opts = FwOptions::new(StepSchedule::Harmonic, Stop::iters(iters));
    fw_run(&SquaredNorm::with_curvature(2.0), &Simplex::new(n), Start::Atom(0), &opts).unwrap()
}

fn convergence_envelope() -> Check {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for n in [5, 50, 500] {
        let res = simplex_run(n, 1000);
        ensure(res.trace.rows.len() == 1001, || format!("n={n}: {} rows", res.trace.rows.len()))?;
        for row in &res.trace.rows {
            let excess = row.f - 1.0 / n as f64 - 8.0 / (row.k as f64 + 2.0);
            worst = worst.max(excess);
            ensure(excess <= 0.0, || format!("n={n} k={}: f={}", row.k, row.f))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("max(f - 1/n - 8/(k+2)) = {worst:.3e}, {secs:.3}s"))
}

fn certificate() -> Check {
    let mut parts = Vec::new();
    for n in [5, 50, 500] {
        for eps in [0.5, 0.1, 0.02] {
            let obj = SquaredNorm::with_curvature(2.0);
            let run = gap_certified_run(&obj, &Simplex::new(n), Start::Atom(0), eps, LmoMode::Exact, 0).unwrap();
            let iters = run.result.trace.rows.len() - 1;
            let limit = 2 * (8.0 / eps).ceil() as usize + 1;
            let gap = run.result.certified_gap();
            ensure(run.result.certified && gap <= eps, || format!("n={n} eps={eps}: gap {gap}"))?;
            ensure(iters <= limit, || format!("n={n} eps={eps}: {iters} > {limit} iterations"))?;
            parts.push(format!("{iters}/{limit}"));
        }
    }
    Ok(format!("iterations used/allowed {}", parts.join(" ")))
}

fn sparsity_lower_bound() -> Check {
    let mut rng = rng::seeded(3);
    for k in 1..=20 {
        let r = sparse_lowerbound_suite(50, k, 1000, &mut rng);
        ensure(r.passes(), || format!("k={k}: {r:?}"))?;
    }
    Ok("k=1..20 at n=50, 1000 samples each".into())
}

fn cube_brute(c: &[f64]) -> f64 {
    let n = c.len();
    (0..1u32 << n)
        .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { c[i] } else { -c[i] }).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn sparse_brute(g: &DenseSym) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..g.n {
        for j in i + 1..g.n {
            best = best.min(g.get(i, i) + g.get(j, j) + 2.0 * g.get(i, j));
            best = best.min(g.get(i, i) + g.get(j, j) - 2.0 * g.get(i, j));
        }
    }
    best
}

fn lmo_equivalence() -> Check {
    let mut rng = rng::seeded(4);
    for trial in 0..1000 {
        let n = rng.random_range(1..=10);
        let t = rng.random_range(0.1..5.0);
        let c = gaussian_vec(&mut rng, n);
        let simplex_min = c.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(c[simplex_lmo(&c)] == simplex_min, || format!("simplex trial {trial}"))?;
        let l1_min = c.iter().flat_map(|&v| [t * v, -t * v]).fold(f64::INFINITY, f64::min);
        let a = l1_lmo(&c);
        ensure(t * a.sign * c[a.index] == l1_min, || format!("l1 trial {trial}"))?;
        ensure(dot(&cube_lmo(&c), &c) == cube_brute(&c), || format!("cube trial {trial}"))?;
        let m = rng.random_range(2..=8);
        let g = DenseSym::from_rows(m, &gaussian_vec(&mut rng, m * m));
        let (_, v) = sparsepsd_lmo(&g, SparseMode::Both).unwrap();
        ensure(v == sparse_brute(&g), || format!("sparse PSD trial {trial}"))?;
    }
    let mut hits = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=100);
        let g = DenseSym::from_rows(n, &gaussian_vec(&mut rng, n * n));
        let e = dense_eig(&g);
        let eps = 0.05 * e.max().abs().max(e.min().abs());
        let lin = spect_lmo(&SymOp::Dense(g), eps, 1.0, &EigOptions::default(), 0, &mut rng).unwrap();
        if lin.value <= e.min() + eps {
            hits += 1;
        }
    }
    ensure(hits >= 950, || format!("spectahedron {hits}/1000 within tolerance"))?;
    Ok(format!("4x1000 exact matches, spectahedron {hits}/1000"))
}

fn rank_lower_bound() -> Check {
    let n = 12;
    let mut rng = rng::seeded(5);
    for k in 1..=n {
        let r = spect_lowrank_lowerbound_suite(n, k, 200, &mut rng);
        ensure(r.passes(), || format!("k={k}: {r:?}"))?;
    }
    let dom = Spectahedron::dense(n, 1.0);
    let obj = SquaredFrobenius { curvature: Some(2.0) };
    let mut checked = 0;
    for mode in [LmoMode::Exact, LmoMode::Approx] {
        let mut bad = None;
        let mut observe = |k: usize, x: &DenseSym| {
            checked += 1;
            let rank = dense_eig(x).values.iter().filter(|l| l.abs() > 1e-10).count();
            let f = x.frob_norm_sq();
            if (rank > k + 1 || f > 1.0 / n as f64 + 16.0 / (k as f64 + 2.0)) && bad.is_none() {
                bad = Some(format!("{mode:?} k={k}: rank {rank}, f {f}"));
            }
        };
        let opts = HazanOptions { max_iters: 60, lmo_mode: mode, seed: 5, ..HazanOptions::default() };
        hazan_run_observed(&obj, &dom, &opts, Some(&mut observe)).unwrap();
        if let Some(b) = bad {
            return Err(b);
        }
    }
    Ok(format!("rank suites k=1..12, {checked} Hazan iterates checked"))
}

fn norm_equivalence() -> Check {
    let mut rng = rng::seeded(6);
    let mut nuc = [0usize; 2];
    while nuc[0] + nuc[1] < 200 {
        let (m, n) = (rng.random_range(1..=5), rng.random_range(1..=4));
        let z = DenseMat::from_rows(m, n, gaussian_vec(&mut rng, m * n));
        let norm = nuclear_norm_oracle(&z);
        let t = 2.0 * norm * rng.random_range(0.5..1.5);
        if (norm - t / 2.0).abs() <= 1e-8 {
            continue;
        }
        let got = nuclear_sdp_feasible(&z, t);
        ensure(got == Some(norm <= t / 2.0), || format!("nuclear {m}x{n}: norm {norm}, t {t}, got {got:?}"))?;
        nuc[(got == Some(true)) as usize] += 1;
    }
    let mut max = [0usize; 2];
    while max[0] + max[1] < 200 {
        let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let z = DenseMat::from_rows(m, n, gaussian_vec(&mut rng, m * n));
        let norm = max_norm_oracle(&z).value();
        let t = norm * rng.random_range(0.7..1.3);
        if (norm - t).abs() <= 1e-3 * t {
            continue;
        }
        let got = maxnorm_sdp_feasible(&z, t);
        ensure(got == Some(norm <= t), || format!("max-norm {m}x{n}: norm {norm}, t {t}, got {got:?}"))?;
        max[(got == Some(true)) as usize] += 1;
    }
    Ok(format!("nuclear feasible/infeasible {}/{}, max-norm {}/{}", nuc[1], nuc[0], max[1], max[0]))
}

fn movielens_path() -> PathBuf {
    std::env::var_os("MOVIELENS_100K")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data"))
}

fn movielens() -> Check {
    let path = movielens_path();
    ensure(path.exists(), || format!("{} missing (run scripts/fetch_movielens.sh)", path.display()))?;
    let start = Instant::now();
    let raw = load_movielens(&path, DataFormat::Tab100k).map_err(|e| e.to_string())?;
    let ds = split_train_test(&raw, SplitPolicy::RandomFraction { rho: 0.5, seed: 0 }).map_err(|e| e.to_string())?;
    let out = complete(&ds, &CompletionConfig::table1()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let nmae = out.final_metrics.test_nmae;
    let detail = format!("NMAE {nmae:.4}, {} matvecs, {secs:.1}s", out.matvecs);
    ensure((0.195..=0.215).contains(&nmae), || detail.clone())?;
    ensure(out.matvecs <= 99, || detail.clone())?;
    ensure(secs < 60.0, || detail.clone())?;
    Ok(detail)
}

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

fn line_search_consistency() -> Check {
    let mut rng = rng::seeded(8);
    let mut worst: f64 = 0.0;
    let mut states = 0;
    while states < 100 {
        let (m, n) = (rng.random_range(2..8), rng.random_range(2..8));
        let mut ratings = Vec::new();
        for i in 0..m as u32 {
            for j in 0..n as u32 {
                if rng.random::<f64>() < 0.7 {
                    ratings.push((i, j, rng.random_range(1..=5) as f64));
                }
            }
        }
        if ratings.is_empty() {
            continue;
        }
        let t = rng.random_range(1.0..20.0);
        let mut store = PredictionStore::zeros(m, n, &ratings, &[]);
        store.values = ratings.iter().map(|e| e.2 + gaussian(&mut rng)).collect();
        let v = rng::unit_sphere(&mut rng, m + n);
        let diff = (closed_form_alpha(&store, &ratings, &v, t) - bisect_alpha(&store, &ratings, &v, t)).abs();
        worst = worst.max(diff);
        states += 1;
    }
    ensure(worst <= 1e-8, || format!("max difference {worst:.3e}"))?;
    Ok(format!("max |closed - bisection| = {worst:.3e} over 100 states"))
}

fn random_constraint(rng: &mut FwRng, n: usize) -> SparseSym {
    let mut a = DenseSym::zeros(n);
    for i in 0..n {
        for j in i..n {
            a.set(i, j, gaussian(rng));
        }
    }
    let norm = spectral_norm(&a);
    SparseSym::from_dense(&a.scaled(1.0 / norm))
}

fn planted_sdp(seed: u64, n: usize, m: usize) -> FeasibilitySdp {
    let mut rng = rng::seeded(seed);
    let mut x0 = DenseSym::zeros(n);
    for w in rng::simplex_point(&mut rng, n) {
        x0.add_scaled(1.0, &DenseSym::rank_one(&rng::unit_sphere(&mut rng, n), w));
    }
    let cons = (0..m)
        .map(|_| {
            let a = random_constraint(&mut rng, n);
            let b = a.frob_inner_dense(&x0) + 0.1;
            (a, b)
        })
        .collect();
    FeasibilitySdp::new(n, cons, 1.0).unwrap()
}

fn sdp_feasibility() -> Check {
    let eps = 0.05;
    let budget = eig_budget(5, 1.0, eps, 20.0);
    let mut most = 0;
    for seed in 0..10 {
        let sdp = planted_sdp(seed, 10, 5);
        let sol = solve_eps_feasible(&sdp, eps, &SdpOptions { seed, ..Default::default() }).unwrap();
        ensure(sol.status == SdpStatus::Feasible && sol.max_violation <= eps, || {
            format!("seed {seed}: {:?}, violation {}", sol.status, sol.max_violation)
        })?;
        ensure(sol.eig_calls <= budget, || format!("seed {seed}: {} > {budget} eigen calls", sol.eig_calls))?;
        most = most.max(sol.eig_calls);
    }
    let bad = FeasibilitySdp::new(3, vec![(SparseSym::identity(3).scaled(-1.0), -2.0)], 1.0).unwrap();
    let sol = solve_eps_feasible(&bad, eps, &SdpOptions::default()).unwrap();
    ensure(sol.status == SdpStatus::Infeasible && sol.lower_bound > eps, || {
        format!("trace-deficient: {:?}, lower bound {}", sol.status, sol.lower_bound)
    })?;
    Ok(format!("10 planted solved with <= {most}/{budget} eigen calls, infeasible bound {:.3}", sol.lower_bound))
}

fn project_simplex(y: &[f64], t: f64) -> Vec<f64> {
    let mut s = y.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let (mut acc, mut theta) = (0.0, 0.0);
    for (i, v) in s.iter().enumerate() {
        acc += v;
        let th = (acc - t) / (i + 1) as f64;
        if v - th > 0.0 {
            theta = th;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

fn weak_duality() -> Check {
    const TOL: f64 = 1e-9;
    let mut traces: Vec<(String, RunTrace, f64)> = Vec::new();
    for n in [5, 50, 500] {
        traces.push((format!("simplex n={n}"), simplex_run(n, 1000).trace, 1.0 / n as f64));
        for eps in [0.5, 0.1, 0.02] {
            let obj = SquaredNorm::with_curvature(2.0);
            let run = gap_certified_run(&obj, &Simplex::new(n), Start::Atom(0), eps, LmoMode::Exact, 0).unwrap();
            traces.push((format!("certified n={n} eps={eps}"), run.result.trace, 1.0 / n as f64));
        }
    }
    let n = 12;
    let dom = Spectahedron::dense(n, 1.0);
    for mode in [LmoMode::Exact, LmoMode::Approx] {
        let opts = HazanOptions { max_iters: 60, lmo_mode: mode, seed: 10, ..HazanOptions::default() };
        let res = hazan_run(&SquaredFrobenius { curvature: Some(2.0) }, &dom, &opts).unwrap();
        traces.push((format!("hazan {mode:?}"), res.trace, 1.0 / n as f64));
    }
    let mut rng = rng::seeded(10);
    for trial in 0..5 {
        let x0 = DenseSym::from_rows(n, &gaussian_vec(&mut rng, n * n));
        let e = dense_eig(&x0);
        let w = project_simplex(&e.values, 1.0);
        let f_star: f64 = e.values.iter().zip(&w).map(|(l, p)| (l - p).powi(2)).sum();
        let obj = FrobeniusDistance { x0, curvature: Some(curvature_from_hessian(2.0, dom.diameter_sq())) };
        let opts = HazanOptions { max_iters: 100, seed: trial, ..HazanOptions::default() };
        traces.push((format!("distance {trial}"), hazan_run(&obj, &dom, &opts).unwrap().trace, f_star));
    }
    let box_dom = BoundedDiag::new(3, 1.0);
    let vs: Vec<Vec<f64>> = (0..3).map(|_| rng::unit_sphere(&mut rng, 3).iter().map(|x| 0.8 * x).collect()).collect();
    let x0 = DenseSym::from_fn(3, |i, j| dot(&vs[i], &vs[j]));
    let obj = FrobeniusDistance { x0, curvature: Some(curvature_from_hessian(2.0, box_dom.diameter_sq())) };
    traces.push(("max-diag distance".into(), maxdiag_run(&obj, &box_dom, 1e-3, 200, 2).unwrap().trace, 0.0));

    let mut rows = 0;
    for (name, trace, f_star) in &traces {
        rows += trace.rows.len();
        let bad = trace.weak_duality_violations(*f_star, TOL);
        ensure(bad.is_empty(), || format!("{name}: {} violations, first at k={}", bad.len(), trace.rows[bad[0]].k))?;
    }
    Ok(format!("{} runs, {rows} iterates, zero violations", traces.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("convergence envelope on the simplex", convergence_envelope),
        ("certified duality gap within budget", certificate),
        ("sparsity lower bound", sparsity_lower_bound),
        ("LMO brute-force equivalence", lmo_equivalence),
        ("rank lower bound and Hazan rank growth", rank_lower_bound),
        ("nuclear and max-norm characterizations", norm_equivalence),
        ("MovieLens 100k reproduction", movielens),
        ("line-search consistency", line_search_consistency),
        ("SDP feasibility", sdp_feasibility),
        ("weak duality on every iterate", weak_duality),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
