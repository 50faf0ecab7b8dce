//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! criterion fails. Run with `cargo test -p singleshot --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singleshot_core::extraction;
use singleshot_core::formation::{self, BISECTION_TOLERANCE};
use singleshot_core::linalg::{CMatrix, C64};
use singleshot_core::model::{self, DiagonalState, Spectrum, ThermalContext};
use singleshot_core::oracle::{self, SamplerOptions};
use singleshot_core::shells::{BathModel, CompositeModel, ConcreteBath, WeightModel};
use singleshot_core::typicality;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn pick(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

fn ctx(beta: f64) -> ThermalContext {
    ThermalContext::new(beta).unwrap()
}

/// Random populations on `dim` states; with `sparse`, about one entry in five is zero.
fn random_populations(rng: &mut ChaCha8Rng, dim: usize, sparse: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..dim).map(|_| 0.05 + uniform(rng)).collect();
    if sparse {
        for x in w.iter_mut() {
            if pick(rng, 5) == 0 {
                *x = 0.0;
            }
        }
        if w.iter().all(|&x| x == 0.0) {
            w[pick(rng, dim as u64) as usize] = 1.0;
        }
    }
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

/// Concrete model: system dimension ≤ 4 on energies {0,1,2}, base k ∈ {2,3}, ≤ 12 shells.
fn random_concrete_model(rng: &mut ChaCha8Rng, sparse: bool) -> CompositeModel {
    loop {
        let base = 2 + pick(rng, 2);
        let mut levels = Vec::new();
        let mut dim = 0u64;
        for e in 0..3u64 {
            if pick(rng, 3) == 0 && !(e == 2 && levels.is_empty()) {
                continue;
            }
            let m = (1 + pick(rng, 2)).min(4 - dim);
            if m == 0 {
                break;
            }
            dim += m;
            levels.push((e, m));
        }
        let max_level = 1 + pick(rng, 2);
        let span = levels.last().unwrap().0 - levels[0].0;
        let bath_hi = span + max_level + pick(rng, 4);
        let shells = bath_hi + span + max_level + 1;
        let cap = if base == 2 { 8 } else { 5 };
        if bath_hi > cap || shells > 12 {
            continue;
        }
        let beta = (base as f64).ln();
        let s = Spectrum::from_pairs(1.0, &levels).unwrap();
        let state = DiagonalState::new(&s, random_populations(rng, s.dimension(), sparse)).unwrap();
        let bath = ConcreteBath::exponential(1.0, ctx(beta), 1, 0, bath_hi).unwrap();
        return CompositeModel::new(s, state, BathModel::Concrete(bath), WeightModel::new(1, max_level).unwrap(), ctx(beta))
            .unwrap();
    }
}

fn model_set(sparse: bool) -> Vec<CompositeModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..60).map(|_| random_concrete_model(&mut rng, sparse)).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let models = model_set(true);
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (i, m) in models.iter().enumerate() {
        for eps in [0.0, 0.05, 0.25] {
            let grid = extraction::max_work(m, eps).unwrap().grid_achievable_w;
            let brute = oracle::brute_force_max_work(m, eps).unwrap().w;
            checked += 1;
            if grid != brute {
                mismatches.push(format!("model {i} eps {eps}: analytic {grid}, oracle {brute}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let nonzero = models.iter().filter(|m| extraction::max_work(m, 0.25).unwrap().grid_achievable_w > 0).count();
    outcome(
        mismatches.is_empty() && elapsed < Duration::from_secs(120),
        format!(
            "{} models x 3 epsilons = {checked} comparisons, {} mismatches {:?}, {nonzero} models with nonzero grid work at eps=0.25, {:.1}s (limit 120s)",
            models.len(),
            mismatches.len(),
            mismatches.first(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for m in model_set(true) {
        for eps in [0.0, 0.05, 0.25] {
            let r = extraction::max_work(&m, eps).unwrap();
            worst = worst.max((r.w_max - r.w_max_thermal_form).abs());
        }
    }
    let mut worst_ml = 0.0f64;
    for (beta, spacing, delta) in [(1.0, 0.01, 10.0), (1.0, 0.001, 20.0), (2.0, 0.5, 5.0), (0.5, 0.25, 3.0), (40.0, 0.01, 0.5)] {
        let c = ctx(beta);
        let a = extraction::multilevel_surplus(c, delta, spacing).unwrap();
        let b = extraction::multilevel_surplus_direct(c, delta, spacing).unwrap();
        worst_ml = worst_ml.max((a - b).abs());
    }
    outcome(
        worst <= 1e-12 && worst_ml <= 1e-12,
        format!("max |w_max - t-form| = {worst:.2e}, max |closed - direct surplus| = {worst_ml:.2e} (tol 1e-12)"),
    )
}

fn criterion_3() -> Outcome {
    let mut nonzero = Vec::new();
    let models = model_set(false);
    for (i, m) in models.iter().enumerate() {
        for mm in [m.clone(), m.ideal_counterpart()] {
            let r = extraction::max_work(&mm, 0.0).unwrap();
            if r.w_max != 0.0 || r.grid_achievable_w != 0 {
                nonzero.push((i, r.w_max));
            }
        }
    }
    outcome(
        nonzero.is_empty(),
        format!("{} full-rank models (concrete and ideal) at eps=0, nonzero w_max: {:?}", models.len(), nonzero.first()),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spectra = [
        Spectrum::from_pairs(1.0, &[(0, 1), (1, 1)]).unwrap(),
        Spectrum::from_pairs(1.0, &[(0, 1), (1, 2), (3, 1)]).unwrap(),
        Spectrum::from_pairs(0.5, &[(0, 2), (1, 1), (2, 1), (5, 1)]).unwrap(),
    ];
    let mut w_bad = 0;
    let mut mu_bad = 0;
    for draw in 0..1000 {
        let s = &spectra[draw % spectra.len()];
        let c = ctx(0.2 + 2.0 * uniform(&mut rng));
        let pops = random_populations(&mut rng, s.dimension(), true);
        let state = DiagonalState::new(s, pops).unwrap();
        let (a, b) = (0.95 * uniform(&mut rng), 0.95 * uniform(&mut rng));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let m = CompositeModel::new(s.clone(), state.clone(), BathModel::Ideal { m0: 1.0 }, WeightModel::new(1, 4).unwrap(), c)
            .unwrap();
        let w_lo = extraction::max_work(&m, lo).unwrap().w_max;
        let w_hi = extraction::max_work(&m, hi).unwrap().w_max;
        if w_hi < w_lo - 1e-12 {
            w_bad += 1;
        }
        let m_lo = formation::formation_mu_epsilon(&state, s, c, lo).unwrap();
        let m_hi = formation::formation_mu_epsilon(&state, s, c, hi).unwrap();
        if m_hi.mu_epsilon.unwrap() > m_lo.mu_epsilon.unwrap() + BISECTION_TOLERANCE
            || m_hi.mu_epsilon_closed_form.unwrap() > m_lo.mu_epsilon_closed_form.unwrap() + 1e-12
        {
            mu_bad += 1;
        }
    }
    outcome(
        w_bad == 0 && mu_bad == 0,
        format!("1000 draws: {w_bad} w_max decreases (slack 1e-12), {mu_bad} mu^eps increases (slack 1e-10 bisection, 1e-12 closed form)"),
    )
}

/// One-shell model: S = {(0,2)} with the first state populated, bath levels lo..lo+1 with
/// M_B(n) = 2^n, weight ladder {0, 1}. The only window shell is E = lo+1.
fn single_shell_model(lo: u64) -> CompositeModel {
    let c = ctx(2f64.ln());
    let s = Spectrum::from_pairs(1.0, &[(0, 2)]).unwrap();
    let bath = ConcreteBath::exponential(1.0, c, 1 << lo, lo, lo + 1).unwrap();
    CompositeModel::new(s.clone(), DiagonalState::pure(&s, 0).unwrap(), BathModel::Concrete(bath), WeightModel::new(1, 1).unwrap(), c)
        .unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut points = Vec::new();
    let mut factor_ok = true;
    let mut gibbs_ok = true;
    let mut rows = Vec::new();
    for lo in [3u64, 5, 7] {
        let m = single_shell_model(lo);
        let r = typicality::typicality_experiment(&m, 0.0, 0, 500, 11).unwrap();
        let p = &r.final_populations[0];
        let expected = 1.0 / (p.bath_multiplicity as f64).sqrt();
        let ratio = p.relative_std / expected;
        factor_ok &= (1.0 / 3.0..=3.0).contains(&ratio);
        gibbs_ok &= r.sigma_s.iter().all(|g| g.deviation_in_standard_errors <= 4.0);
        rows.push(format!("M_B={} std/mean={:.4} (1/sqrt(M_B)={:.4}, ratio {:.3})", p.bath_multiplicity, p.relative_std, expected, ratio));
        points.push((p.bath_multiplicity as f64, p.relative_std));
    }
    let fit = typicality::fit_power_law(&points).unwrap();
    let exponent_ok = (fit.exponent + 0.5).abs() <= 0.15;
    let elapsed = start.elapsed();
    outcome(
        factor_ok && exponent_ok && gibbs_ok && elapsed < Duration::from_secs(300),
        format!(
            "{}; fitted exponent {:.3} (want -0.5 +- 0.15); factor-3 band {}; Gibbs mean within 4 SE {}; {:.1}s (limit 300s)",
            rows.join("; "),
            fit.exponent,
            if factor_ok { "met" } else { "missed" },
            gibbs_ok,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let (d, m, n) = (8usize, 3usize, 10_000usize);
    // Arbitrary Hermitian operator.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut a = CMatrix::zeros(d, d);
    for r in 0..d {
        a[(r, r)] = C64::new(uniform(&mut rng) * 2.0 - 1.0, 0.0);
        for c in r + 1..d {
            let z = C64::new(uniform(&mut rng) - 0.5, uniform(&mut rng) - 0.5);
            a[(r, c)] = z;
            a[(c, r)] = z.conj();
        }
    }
    let general = typicality::haar_moment_check(&a, m, n, 60).unwrap();
    let mean_ok = (general.mean - general.expected_mean).abs() <= 4.0 * general.mean_standard_error;
    // Rank-one projector with unit trace.
    let mut p = CMatrix::zeros(d, d);
    p[(0, 0)] = C64::new(1.0, 0.0);
    let rank1 = typicality::haar_moment_check(&p, m, n, 61).unwrap();
    let mean1_ok = (rank1.mean - rank1.expected_mean).abs() <= 4.0 * rank1.mean_standard_error;
    let formula = m as f64 * (1.0 - m as f64 / d as f64) / (d as f64 * (d as f64 + 1.0));
    let var_rel = (rank1.variance - formula).abs() / formula;
    let off = 1.0 / (d as f64 * (d as f64 + 1.0));
    let off_rel = (rank1.offdiag_second_moment - off).abs() / off;
    outcome(
        mean_ok && mean1_ok && var_rel <= 0.1 && off_rel <= 0.1,
        format!(
            "general A: mean {:.5} vs {:.5} ({:.2} SE), variance {:.5} vs exact {:.5} (rank-one formula would give {:.5}); \
             rank-one A: variance {:.6} vs {formula:.6} ({:.1}% off), offdiag {:.6} vs {off:.6} ({:.1}% off)",
            general.mean,
            general.expected_mean,
            (general.mean - general.expected_mean).abs() / general.mean_standard_error,
            general.variance,
            general.variance_exact,
            general.variance_formula,
            rank1.variance,
            100.0 * var_rel,
            rank1.offdiag_second_moment,
            100.0 * off_rel
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let c2 = ctx(2f64.ln());
    let c3 = ctx(3f64.ln());
    let build = |c: ThermalContext, pairs: &[(u64, u64)], pops: Vec<f64>, hi: u64, max_level: u64| {
        let s = Spectrum::from_pairs(1.0, pairs).unwrap();
        let bath = ConcreteBath::exponential(1.0, c, 1, 0, hi).unwrap();
        CompositeModel::new(s.clone(), DiagonalState::new(&s, pops).unwrap(), BathModel::Concrete(bath), WeightModel::new(1, max_level).unwrap(), c)
            .unwrap()
    };
    let models = [
        build(c2, &[(0, 1), (1, 1)], vec![0.9, 0.1], 3, 2),
        build(c2, &[(0, 1), (1, 2)], vec![0.2, 0.7, 0.1], 2, 1),
        build(c3, &[(0, 1), (2, 1)], vec![0.3, 0.7], 3, 1),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for (i, m) in models.iter().enumerate() {
        let r = oracle::second_law_sampler(m, 10_000, 70 + i as u64, &SamplerOptions::default()).unwrap();
        worst = worst.max(r.max_statistic);
        rows.push(format!("model {i}: max {:.3e}, {} near-saturating", r.max_statistic, r.saturating_samples));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(180),
        format!("{}; limit 1e-9; {:.1}s (limit 180s)", rows.join("; "), elapsed.as_secs_f64()),
    )
}

fn criterion_8() -> Outcome {
    let s = Spectrum::from_pairs(1.0, &[(0, 1), (1, 1)]).unwrap();
    let c = ctx(1.0);
    let half = DiagonalState::new(&s, vec![0.5, 0.5]).unwrap();
    let f = formation::formation_mu_epsilon(&half, &s, c, 0.1).unwrap();
    let m = CompositeModel::new(s.clone(), half, BathModel::Ideal { m0: 1.0 }, WeightModel::new(1, 4).unwrap(), c).unwrap();
    let w_max = extraction::max_work(&m, 0.0).unwrap().w_max;
    let mu_eps = f.mu_epsilon.unwrap();
    let agree = (mu_eps - f.mu_epsilon_closed_form.unwrap()).abs();
    let w_min_ok = (f.w_min - 0.620115).abs() <= 1e-6;
    let mu_ok = (mu_eps - 1.487186).abs() <= 1e-6;
    let t1 = model::thermal_state(&s, c).unwrap().populations()[1];
    outcome(
        w_min_ok && w_max == 0.0 && mu_ok && agree <= 1e-9,
        format!(
            "w_min {:.7} (want 0.620115 +- 1e-6), w_max_0 {w_max}, mu^0.1 {mu_eps:.7} (want 1.487186 +- 1e-6; 0.4/t(1) = {:.7}), \
             bisection vs closed form {agree:.1e}",
            f.w_min,
            0.4 / t1
        ),
    )
}

fn criterion_9() -> Outcome {
    let beta = 1.0;
    let spacing = 1e-3;
    let c = ctx(beta);
    let surplus = extraction::multilevel_surplus(c, 20.0 / beta, spacing).unwrap();
    let asym = -(beta * spacing).ln() / beta;
    let rel = (surplus - asym).abs() / asym;
    let s = Spectrum::from_pairs(spacing, &[(0, 1), (1000, 1)]).unwrap();
    let m = CompositeModel::new(s.clone(), DiagonalState::new(&s, vec![0.8, 0.2]).unwrap(), BathModel::Ideal { m0: 1.0 }, WeightModel::new(1, 30_000).unwrap(), c)
        .unwrap();
    let ml = extraction::multilevel_max_work(&m, 0.1, 20.0).unwrap();
    let phys = ctx(1.0 / 2.5e-2);
    let room = extraction::multilevel_surplus(phys, 0.5, 4e-15).unwrap();
    let room_rel = (room - 0.7365).abs() / 0.7365;
    outcome(
        rel <= 0.005 && ml.w_max_window > ml.w_max && room_rel <= 0.005,
        format!(
            "surplus {surplus:.6} vs -ln(beta dE)/beta {asym:.6} ({:.3}%); window work {:.6} > single-level {:.6}; \
             room-temperature surplus {room:.5} eV vs 0.7365 ({:.3}%)",
            100.0 * rel,
            ml.w_max_window,
            ml.w_max,
            100.0 * room_rel
        ),
    )
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_singleshot");
    let models = concat!(env!("CARGO_MANIFEST_DIR"), "/models");
    let runs: [(&str, &[&str]); 5] = [
        ("degenerate.toml", &["typicality", "--samples", "500", "--seed", "7", "--w", "1"]),
        ("small_concrete.toml", &["oracle", "--samples", "200", "--seed", "7", "--epsilon", "0.05"]),
        ("degenerate.toml", &["work", "--epsilon", "0.1", "--output", "csv"]),
        ("qubit.toml", &["formation", "--epsilon", "0.1"]),
        ("qubit.toml", &["multilevel", "--delta", "10"]),
    ];
    let mut differing = Vec::new();
    for (model, args) in runs {
        let path = format!("{models}/{model}");
        let once = || Command::new(bin).args(args).args(["--model", &path]).output().unwrap();
        let (a, b) = (once(), once());
        if !a.status.success() || a.stdout.is_empty() || a.stdout != b.stdout {
            differing.push(format!("{} {model} (exit {:?})", args[0], a.status.code()));
        }
    }
    outcome(differing.is_empty(), format!("5 commands run twice, differing or failing: {differing:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 oracle equality", criterion_1),
        ("2 formula identity", criterion_2),
        ("3 zero-work law", criterion_3),
        ("4 epsilon monotonicity", criterion_4),
        ("5 typicality scaling", criterion_5),
        ("6 Haar moments", criterion_6),
        ("7 free-energy bound", criterion_7),
        ("8 formation asymmetry", criterion_8),
        ("9 multi-level surplus", criterion_9),
        ("10 determinism", criterion_10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
