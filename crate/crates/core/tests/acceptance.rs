//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

use std::time::{Duration, Instant};

use infopriv::filters::evaluate_filter;
use infopriv::multiletter::{multiletter_evaluate, product_distribution};
use infopriv::perfect::{g0, is_weakly_independent, DEFAULT_RANK_TOL};
use infopriv::private_info::{
    c_x_oracle, common_info_bundle, decompose, distinct_posteriors, dpi_check, exact_generation_check,
    DEFAULT_POSTERIOR_TOL,
};
use infopriv::prob::{binary_entropy, conditional_min_entropy, entropy, mutual_information};
use infopriv::rate::{g_eps_curve, g_eps_deterministic, g_eps_oracle, g_eps_solve, SolveOptions};
use infopriv::{JointDistribution, Kernel, Pmf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Flat Dirichlet sample, bounded away from zero so joints are fully supported.
fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-3f64..1.0).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn random_joint(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> JointDistribution {
    let v = simplex(rng, nx * ny);
    JointDistribution::from_rows(v.chunks(ny).map(<[f64]>::to_vec).collect()).unwrap()
}

/// `P(x, y) = P(y) P(x|y)` where two values of `y` share a posterior.
fn duplicated_posterior_joint(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> JointDistribution {
    let py = simplex(rng, ny);
    let mut post: Vec<Vec<f64>> = (0..ny).map(|_| simplex(rng, nx)).collect();
    let a = rng.gen_range(0..ny);
    let mut b = rng.gen_range(0..ny - 1);
    if b >= a {
        b += 1;
    }
    post[b] = post[a].clone();
    joint_from_posteriors(&py, &post)
}

fn joint_from_posteriors(py: &[f64], post: &[Vec<f64>]) -> JointDistribution {
    let nx = post[0].len();
    let rows = (0..nx)
        .map(|x| py.iter().zip(post).map(|(p, q)| p * q[x]).collect())
        .collect();
    JointDistribution::from_rows(rows).unwrap()
}

fn product_joint(px: &[f64], py: &[f64]) -> JointDistribution {
    JointDistribution::from_rows(px.iter().map(|a| py.iter().map(|b| a * b).collect()).collect()).unwrap()
}

fn bec(p: f64, delta: f64) -> JointDistribution {
    JointDistribution::from_rows(vec![
        vec![p * delta, p * (1.0 - delta), 0.0],
        vec![(1.0 - p) * delta, 0.0, (1.0 - p) * (1.0 - delta)],
    ])
    .unwrap()
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.1} s exceeds {limit_s} s", elapsed.as_secs_f64())
    })
}

// 1. Dependent 2x2 joints have no useful perfectly private filter.
fn binary_dependent_g0_is_zero() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 200 {
        let j = random_joint(&mut rng, 2, 2);
        if mutual_information(&j) < 1e-6 {
            continue;
        }
        n += 1;
        let p = g0(&j, 3).map_err(|e| e.to_string())?;
        let leak = evaluate_filter(&j, &p.filter).map_err(|e| e.to_string())?.leakage;
        ensure(leak <= 1e-9, || format!("filter leaks {leak} bits"))?;
        worst = worst.max(p.utility);
    }
    ensure(worst <= 1e-9, || format!("max g0 = {worst:e}"))?;
    within(t.elapsed(), 10.0)?;
    Ok(format!("200 joints, max g0 = {worst:.1e} bits"))
}

// 2. Erasure channels: g0 = h(delta), D_X = 0, C_X = H(Y).
fn erasure_channel_example() -> Check {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for p in [0.3, 0.5] {
        for k in 1..=9 {
            let delta = k as f64 / 10.0;
            let j = bec(p, delta);
            let g = g0(&j, 4).map_err(|e| e.to_string())?.utility;
            worst = worst.max((g - binary_entropy(delta)).abs());
            let d = decompose(&j);
            ensure(d.d_x == 0.0, || format!("p={p}, delta={delta}: D_X = {:e}", d.d_x))?;
            ensure(d.c_x == entropy(&j.p_y()), || format!("p={p}, delta={delta}: C_X != H(Y)"))?;
            ensure(distinct_posteriors(&j, DEFAULT_POSTERIOR_TOL), || {
                format!("p={p}, delta={delta}: posteriors not distinct")
            })?;
        }
    }
    ensure(worst <= 1e-6, || format!("max |g0 - h(delta)| = {worst:e}"))?;
    within(t.elapsed(), 5.0)?;
    Ok(format!("18 instances, max |g0 - h(delta)| = {worst:.1e}"))
}

// 3. Binary Y: g0 is either 0 or H(Y), the latter exactly under independence.
fn binary_y_dichotomy() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut indep = 0;
    for i in 0..200 {
        let nx = 2 + i % 3;
        let independent = i % 4 == 0;
        let j = if independent {
            product_joint(&simplex(&mut rng, nx), &simplex(&mut rng, 2))
        } else {
            random_joint(&mut rng, nx, 2)
        };
        let g = g0(&j, 3).map_err(|e| e.to_string())?.utility;
        let hy = entropy(&j.p_y());
        let at_zero = g.abs() <= 1e-9;
        let at_top = (g - hy).abs() <= 1e-9;
        ensure(at_zero || at_top, || format!("instance {i}: g0 = {g} not in {{0, {hy}}}"))?;
        ensure(at_top == independent, || {
            format!("instance {i}: g0 = {g}, H(Y) = {hy}, independent = {independent}")
        })?;
        indep += independent as usize;
    }
    Ok(format!("200 joints ({indep} independent), all in {{0, H(Y)}}"))
}

// 4. g0 > 0 exactly for weakly independent joints.
fn weak_independence_equivalence() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut wi = 0;
    for i in 0..300 {
        let nx = rng.gen_range(2..=4);
        let ny = rng.gen_range(2..=4);
        let j = if i % 3 == 0 {
            duplicated_posterior_joint(&mut rng, nx, ny)
        } else {
            random_joint(&mut rng, nx, ny)
        };
        let rep = is_weakly_independent(&j, DEFAULT_RANK_TOL);
        let g = g0(&j, j.ny() + 1).map_err(|e| e.to_string())?.utility;
        ensure((g > 1e-6) == rep.weakly_independent, || {
            format!("instance {i} ({nx}x{ny}): g0 = {g}, weakly independent = {}", rep.weakly_independent)
        })?;
        wi += rep.weakly_independent as usize;
    }
    Ok(format!(
        "300 joints ({wi} weakly independent), 0 disagreements, {:.1} s",
        t.elapsed().as_secs_f64()
    ))
}

// 5. Union-find statistic equals the exhaustive partition search.
fn sufficient_statistic_oracle() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut merged = 0;
    for i in 0..200 {
        let nx = rng.gen_range(2..=4);
        let ny = rng.gen_range(2..=5);
        let j = if i % 2 == 0 {
            duplicated_posterior_joint(&mut rng, nx, ny)
        } else {
            random_joint(&mut rng, nx, ny)
        };
        let d = decompose(&j);
        let (c, part) = c_x_oracle(&j).map_err(|e| e.to_string())?;
        ensure(d.statistic.blocks == part.blocks, || {
            format!("instance {i}: partition {:?} vs oracle {:?}", d.statistic.blocks, part.blocks)
        })?;
        ensure(d.c_x == c, || format!("instance {i}: C_X = {} vs oracle {c}", d.c_x))?;
        merged += (part.len() < j.ny()) as usize;
    }
    within(t.elapsed(), 30.0)?;
    Ok(format!("200 joints ({merged} with merged posteriors), identical partitions"))
}

// 6. Duplicate posteriors strictly lower C_X; distinct ones give C_X = H(Y).
fn duplicate_posteriors_both_directions() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut min_gap = f64::INFINITY;
    let mut max_dev: f64 = 0.0;
    for i in 0..50 {
        let nx = rng.gen_range(2..=4);
        let ny = rng.gen_range(2..=5);
        let py = simplex(&mut rng, ny);
        let mut post: Vec<Vec<f64>> = (0..ny).map(|_| simplex(&mut rng, nx)).collect();
        post[ny - 1] = post[0].clone();
        let j = joint_from_posteriors(&py, &post);
        let hy = entropy(&j.p_y());
        let gap = hy - decompose(&j).c_x;
        ensure(gap > 1e-6, || format!("instance {i}: duplicate kept C_X = H(Y)"))?;
        min_gap = min_gap.min(gap);

        // move the copy by 1e-3 along a zero-sum direction
        post[ny - 1][0] += 1e-3;
        post[ny - 1][1] -= 1e-3;
        let j = joint_from_posteriors(&py, &post);
        let dev = (decompose(&j).c_x - entropy(&j.p_y())).abs();
        ensure(dev <= 1e-9, || format!("instance {i}: perturbed |C_X - H(Y)| = {dev:e}"))?;
        max_dev = max_dev.max(dev);
    }
    Ok(format!("50 pairs, min H(Y) - C_X = {min_gap:.3e}, max perturbed deviation = {max_dev:.1e}"))
}

// 7. I <= C_W <= G <= C_X <= H(Y) and GK <= I.
fn common_information_chain() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let slack = 1e-9;
    for i in 0..100 {
        let nx = rng.gen_range(2..=3);
        let ny = rng.gen_range(2..=3);
        let j = if i % 3 == 0 {
            duplicated_posterior_joint(&mut rng, nx, ny)
        } else {
            random_joint(&mut rng, nx, ny)
        };
        let b = common_info_bundle(&j, 1000 + i as u64);
        let chain = [b.mi, b.cw_upper, b.g_upper, b.c_x, b.h_y];
        ensure(chain.windows(2).all(|w| w[0] <= w[1] + slack), || {
            format!("instance {i}: chain {chain:?}")
        })?;
        ensure(b.gk <= b.mi + slack, || format!("instance {i}: GK {} > I {}", b.gk, b.mi))?;
    }
    within(t.elapsed(), 120.0)?;
    Ok(format!("100 joints, chain holds, {:.1} s", t.elapsed().as_secs_f64()))
}

// 8. Processing X cannot increase the private information about it.
fn private_information_dpi() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let nu = rng.gen_range(2..=4);
        let nx = rng.gen_range(2..=4);
        let ny = rng.gen_range(2..=4);
        let j = if i % 2 == 0 {
            duplicated_posterior_joint(&mut rng, nx, ny)
        } else {
            random_joint(&mut rng, nx, ny)
        };
        let u = Kernel::new((0..nx).map(|_| simplex(&mut rng, nu)).collect()).unwrap();
        let d = dpi_check(&j, &u).map_err(|e| e.to_string())?;
        ensure(d.c_u <= d.c_x + 1e-9, || format!("instance {i}: C_U = {} > C_X = {}", d.c_u, d.c_x))?;
        worst = worst.max(d.c_u - d.c_x);
    }
    Ok(format!("100 triples, max C_U - C_X = {worst:.3e}"))
}

// 9. P_XY is regenerated exactly through W = T(Y).
fn exact_generation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let nx = rng.gen_range(2..=4);
        let ny = rng.gen_range(2..=5);
        let j = if i % 2 == 0 {
            duplicated_posterior_joint(&mut rng, nx, ny)
        } else {
            random_joint(&mut rng, nx, ny)
        };
        worst = worst.max(exact_generation_check(&j));
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("100 joints, max deviation = {worst:.1e}"))
}

// 10. Continuous solver against the exhaustive grid.
fn solver_against_oracle() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_below: f64 = 0.0;
    let mut above = 0;
    let mut cases = 0;
    for (i, ny) in [2usize, 3].into_iter().flat_map(|ny| (0..50).map(move |i| (i, ny))) {
        let j = random_joint(&mut rng, 2, ny);
        let mi = mutual_information(&j);
        let hy = entropy(&j.p_y());
        for eps in [0.01, 0.05, 0.1] {
            cases += 1;
            let seed = 10_000 + 10 * i as u64 + ny as u64;
            let s = g_eps_solve(&j, eps, 16, seed).map_err(|e| e.to_string())?;
            let o = g_eps_oracle(&j, eps, 25).map_err(|e| e.to_string())?;
            let d = g_eps_deterministic(&j, eps).map_err(|e| e.to_string())?;
            let leak = evaluate_filter(&j, &s.filter).map_err(|e| e.to_string())?.leakage;
            let tag = format!("2x{ny} #{i}, eps={eps}");
            ensure(s.utility >= o.utility - 1e-6, || {
                format!("{tag}: solver {} below oracle {}", s.utility, o.utility)
            })?;
            ensure(s.achieved_leakage <= eps + 1e-6 && leak <= eps + 1e-6, || {
                format!("{tag}: leakage {leak} over budget")
            })?;
            if s.utility > o.utility + 0.01 {
                // only acceptable because the filter was just re-evaluated as feasible
                above += 1;
            }
            ensure(d.utility <= s.utility + 1e-6, || {
                format!("{tag}: deterministic {} above solver {}", d.utility, s.utility)
            })?;
            worst_below = worst_below.max(o.utility - s.utility);
        }
        let grid = [0.0, 0.01, 0.05, 0.1, mi, mi + 0.1];
        let mut grid = grid.to_vec();
        grid.sort_by(f64::total_cmp);
        let curve = g_eps_curve(&j, &grid, &SolveOptions::new(8, 77 + i as u64)).map_err(|e| e.to_string())?;
        let u: Vec<f64> = curve.points.iter().map(|p| p.utility).collect();
        ensure(u.windows(2).all(|w| w[0] <= w[1] + 1e-6), || format!("2x{ny} #{i}: curve {u:?}"))?;
        for p in curve.points.iter().filter(|p| p.epsilon >= mi) {
            ensure((p.utility - hy).abs() <= 1e-9, || {
                format!("2x{ny} #{i}: g at eps={} is {} != H(Y) = {hy}", p.epsilon, p.utility)
            })?;
        }
    }
    within(t.elapsed(), 300.0)?;
    Ok(format!(
        "{cases} cases, max oracle - solver = {worst_below:.1e}, {above} verified-feasible > 0.01 above oracle, {:.1} s",
        t.elapsed().as_secs_f64()
    ))
}

// 11. Binning construction on BSC(0.1).
fn binning_on_bsc() -> Check {
    let t = Instant::now();
    let k = Kernel::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let j = JointDistribution::from_channel(&Pmf::uniform(2), &k).unwrap();
    let h = conditional_min_entropy(&k);
    ensure((h - 0.152003).abs() <= 1e-6, || format!("H* = {h}"))?;
    let delta = h / 2.0;
    let mut prev = f64::INFINITY;
    let mut summary = Vec::new();
    for n in [8usize, 10, 12, 16] {
        let rep = multiletter_evaluate(&j, n, delta).map_err(|e| e.to_string())?;
        for x in 0..2 {
            let p = product_distribution(&k, x, n).map_err(|e| e.to_string())?;
            let cap = 2f64.powf(-(n as f64) * h) + 1e-15;
            ensure(p.mass().iter().all(|&m| m <= cap), || format!("n={n}: product entry above 2^(-nH*)"))?;
        }
        ensure(rep.per_symbol_tv.iter().all(|&v| v < rep.analytic_bound), || {
            format!("n={n}: per-symbol TV {:?} vs bound {}", rep.per_symbol_tv, rep.analytic_bound)
        })?;
        ensure(rep.brackets_hold, || format!("n={n}: bin brackets violated"))?;
        let rate = (n as f64 * (h - delta)).floor() / n as f64;
        ensure(rep.rate == rate, || format!("n={n}: rate {} != {rate}", rep.rate))?;
        ensure(rep.joint_tv <= rep.jensen_bound + 1e-12, || format!("n={n}: joint TV above Jensen bound"))?;
        if n <= 12 {
            ensure(rep.leakage <= prev + 1e-15, || format!("n={n}: leakage {} increased", rep.leakage))?;
            prev = rep.leakage;
        }
        summary.push(format!("n={n}: r={} leak={:.2e}", rep.r, rep.leakage));
    }
    within(t.elapsed(), 300.0)?;
    Ok(format!("H* = {h:.6}; {}", summary.join(", ")))
}

// 12. X = (X', V), Y = (Y', V) with X' - V - Y'.
fn shared_component_decomposition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_c: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    for i in 0..20 {
        let mutually_independent = i % 2 == 1;
        let (na, nb, nv) = if mutually_independent {
            (2, 2, 2)
        } else {
            (rng.gen_range(2..=3), rng.gen_range(2..=3), 2)
        };
        let pv = simplex(&mut rng, nv);
        let shared_a = simplex(&mut rng, na);
        let shared_b = simplex(&mut rng, nb);
        let a_given_v: Vec<Vec<f64>> = (0..nv)
            .map(|_| if mutually_independent { shared_a.clone() } else { simplex(&mut rng, na) })
            .collect();
        let b_given_v: Vec<Vec<f64>> = (0..nv)
            .map(|_| if mutually_independent { shared_b.clone() } else { simplex(&mut rng, nb) })
            .collect();
        // x = a * nv + v, y = b * nv + v
        let mut rows = vec![vec![0.0; nb * nv]; na * nv];
        for v in 0..nv {
            for a in 0..na {
                for b in 0..nb {
                    rows[a * nv + v][b * nv + v] = pv[v] * a_given_v[v][a] * b_given_v[v][b];
                }
            }
        }
        let j = JointDistribution::from_rows(rows).unwrap();
        let dev = (decompose(&j).c_x - mutual_information(&j)).abs();
        ensure(dev <= 1e-9, || format!("instance {i}: |C_X - I| = {dev:e}"))?;
        worst_c = worst_c.max(dev);
        if mutually_independent {
            let g = g0(&j, j.ny()).map_err(|e| e.to_string())?.utility;
            let hb = entropy(&Pmf::new(shared_b.clone()).unwrap());
            let dev = (g - hb).abs();
            ensure(dev <= 1e-6, || format!("instance {i}: g0 = {g} vs H(Y') = {hb}"))?;
            worst_g = worst_g.max(dev);
        }
    }
    Ok(format!(
        "20 joints, max |C_X - I| = {worst_c:.1e}, max |g0 - H(Y')| = {worst_g:.1e}"
    ))
}

// 13. Same seed, same bytes.
fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("joint.dist");
    std::fs::write(&path, "X: a b\nY: u v w\n0.30 0.15 0.05\n0.05 0.15 0.30\n").map_err(|e| e.to_string())?;
    let argv = |seed: &str| {
        vec![
            "infopriv".to_string(),
            "gcurve".into(),
            path.to_string_lossy().into_owned(),
            "--eps-grid".into(),
            "0,0.02,0.05,0.1,0.2".into(),
            "--seed".into(),
            seed.into(),
        ]
    };
    let a = infopriv::cli::run_command(argv("42"));
    let b = infopriv::cli::run_command(argv("42"));
    ensure(a.code == 0, || format!("exit {}: {}", a.code, a.stderr))?;
    ensure(a.stdout == b.stdout, || "outputs differ".to_string())?;
    Ok(format!("{} identical bytes", a.stdout.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("dependent binary joints have g0 = 0", binary_dependent_g0_is_zero),
        ("erasure example: g0 = h(delta), D_X = 0", erasure_channel_example),
        ("binary Y: g0 in {0, H(Y)}", binary_y_dichotomy),
        ("g0 > 0 iff weakly independent", weak_independence_equivalence),
        ("C_X matches partition oracle", sufficient_statistic_oracle),
        ("duplicate posteriors lower C_X", duplicate_posteriors_both_directions),
        ("common-information chain", common_information_chain),
        ("private information DPI", private_information_dpi),
        ("exact generation through T(Y)", exact_generation),
        ("g_eps solver vs grid oracle", solver_against_oracle),
        ("binning construction on BSC(0.1)", binning_on_bsc),
        ("shared-component decomposition", shared_component_decomposition),
        ("CLI gcurve determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
