//! End-to-end acceptance checks for the whole library.
//!
//! Each check prints one verdict line (`acceptance NN <name>: PASS/FAIL`)
//! with its headline number and wall time, then asserts. Tolerances and
//! time budgets are pinned next to the code that uses them; random inputs
//! come from fixed-seed ChaCha8 streams so reruns are bit-identical.

use std::cell::RefCell;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sftlab_core::convex::{
    ess_strict_convexity_check, kink_scan, GradOutcome, LogMgf, Verdict,
};
use sftlab_core::ldp::{finite_n_mgf, min_rate_over_ball, EmpiricalLaw, PushforwardLaw};
use sftlab_core::measure::{ergodic_approximation, ErgodicApproximation, MarkovMeasure};
use sftlab_core::pressure::{gateaux_check, pressure_direct, pressure_spectral, pressure_value};
use sftlab_core::rate::{level2_rate, RateFunctionHandle};
use sftlab_core::schauder::{lemma14_span_check, CylinderBasis, SPAN_TRIALS};
use sftlab_core::{Potential, Sft};

const LOG_3_HALVES: f64 = 0.4054651081081645;
const BINARY_RATE_3_4: f64 = 0.1308120359411369;

/// Prints the verdict line for one acceptance check, then asserts both the
/// check itself and its wall-time budget.
fn conclude(label: &str, start: Instant, budget_secs: f64, ok: bool, detail: &str) {
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < budget_secs;
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    println!("acceptance {label}: {verdict} ({detail}) [{secs:.2}s of {budget_secs:.0}s]");
    assert!(ok, "{label}: {detail}");
    assert!(in_time, "{label}: wall time {secs:.2}s exceeded the {budget_secs:.0}s budget");
}

/// Rejection-samples an irreducible SFT on an alphabet of 2 to 4 symbols.
fn random_irreducible_sft(rng: &mut ChaCha8Rng) -> Sft {
    loop {
        let m = rng.gen_range(2..=4usize);
        let transitions: Vec<Vec<u8>> = (0..m)
            .map(|_| (0..m).map(|_| u8::from(rng.gen_bool(0.6))).collect())
            .collect();
        if let Ok(sft) = Sft::new(m, transitions) {
            if sft.is_irreducible() {
                return sft;
            }
        }
    }
}

/// A potential of random depth (1 to `max_depth`) with values uniform in
/// [-2, 2], filled in the deterministic admissible-word order.
fn random_potential(rng: &mut ChaCha8Rng, sft: &Sft, max_depth: usize) -> Potential {
    let depth = rng.gen_range(1..=max_depth);
    let cell = RefCell::new(rng);
    Potential::from_fn(sft, depth, |_| cell.borrow_mut().gen_range(-2.0..2.0))
}

#[test]
fn acceptance_01_variational_principle_on_random_systems() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut max_gap = 0.0f64;
    let mut ok = true;
    for _ in 0..20 {
        let sft = random_irreducible_sft(&mut rng);
        let f = random_potential(&mut rng, &sft, 3);
        let report = pressure_spectral(&sft, &f).unwrap();
        ok &= report.unique;
        let mu = &report.equilibrium_states[0];
        let variational = mu.entropy() + mu.expectation(&sft, &f).unwrap();
        max_gap = max_gap.max((report.pressure - variational).abs());
    }
    ok &= max_gap <= 1e-9;
    conclude(
        "01 variational principle",
        start,
        5.0,
        ok,
        &format!("max |P - (h + mean)| = {max_gap:.2e} over 20 systems, tol 1e-9"),
    );
}

#[test]
fn acceptance_02_direct_pressure_converges_at_rate_one_over_n() {
    let start = Instant::now();
    // Same seed as the variational check: the suite of systems is shared.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut constant = 0.0f64;
    for _ in 0..20 {
        let sft = random_irreducible_sft(&mut rng);
        let f = random_potential(&mut rng, &sft, 3);
        let limit = pressure_value(&sft, &f).unwrap();
        for n in 8..=20 {
            let gap = (pressure_direct(&sft, &f, n).unwrap() - limit).abs();
            constant = constant.max(n as f64 * gap);
        }
    }
    // The scaled gap must stay bounded; 1e3 is a generous explicit cap for
    // depth <= 3 potentials with values in [-2, 2] on alphabets <= 4.
    let ok = constant.is_finite() && constant <= 1e3;
    conclude(
        "02 finite-n pressure convergence",
        start,
        30.0,
        ok,
        &format!("sup of n*|direct - spectral| = {constant:.3} over n in 8..=20, cap 1e3"),
    );
}

#[test]
fn acceptance_03_scaled_cumulant_matches_the_pressure_difference() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();

    // O(1/n) convergence with depth-2 data on the golden-mean shift.
    let golden = Sft::golden_mean();
    let f = Potential::from_fn(&golden, 2, |w| 0.3 * f64::from(w[0]) - 0.1 * f64::from(w[1]));
    let g = Potential::indicator(&golden, &[0, 1]).unwrap().scale(-0.4);
    let fg = Potential::linear_combination(&golden, &[(1.0, &f), (1.0, &g)]).unwrap();
    let limit = pressure_value(&golden, &fg).unwrap() - pressure_value(&golden, &f).unwrap();
    let mut constant = 0.0f64;
    for n in 8..=40 {
        let gap = (finite_n_mgf(&golden, &f, &g, n).unwrap() - limit).abs();
        constant = constant.max(n as f64 * gap);
    }
    ok &= constant <= 10.0;
    detail.push_str(&format!("golden-mean n*gap <= {constant:.3} (cap 10)"));

    // Exactness on a full shift with depth-1 data: Birkhoff sums decouple,
    // so the finite-n value equals the limit for every n.
    let full = Sft::full_shift(2);
    let zero = Potential::zero(&full);
    let tilt = Potential::indicator(&full, &[1]).unwrap().scale(0.85);
    let exact = pressure_value(&full, &tilt).unwrap() - pressure_value(&full, &zero).unwrap();
    let mut worst = 0.0f64;
    for n in 8..=40 {
        worst = worst.max((finite_n_mgf(&full, &zero, &tilt, n).unwrap() - exact).abs());
    }
    ok &= worst <= 1e-12;
    detail.push_str(&format!(", full-shift exactness {worst:.2e} (tol 1e-12)"));

    conclude("03 scaled cumulant identity", start, 5.0, ok, &detail);
}

#[test]
fn acceptance_04_gradients_match_central_differences() {
    let start = Instant::now();
    let sft = Sft::full_shift(2);
    let zero = Potential::zero(&sft);
    let d1 = Potential::indicator(&sft, &[1]).unwrap();
    let d2 = Potential::indicator(&sft, &[1, 1]).unwrap();
    let d3 = Potential::indicator(&sft, &[1, 0]).unwrap();
    let families: [&[Potential]; 3] =
        [&[d1.clone()], &[d1.clone(), d2.clone()], &[d1, d2, d3]];

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let mut ok = true;
    for dirs in families {
        let lm = LogMgf::new(&sft, &zero, dirs).unwrap();
        let dims = dirs.len();
        for _ in 0..50 {
            let t: Vec<f64> = (0..dims).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let grad = match lm.grad(&t).unwrap() {
                GradOutcome::Gradient(g) => g,
                GradOutcome::Kink(_) => {
                    ok = false;
                    continue;
                }
            };
            for k in 0..dims {
                let mut up = t.clone();
                let mut dn = t.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (lm.eval(&up).unwrap() - lm.eval(&dn).unwrap()) / (2.0 * h);
                let rel = (grad[k] - fd).abs() / fd.abs().max(1.0);
                max_rel = max_rel.max(rel);
            }
        }
    }
    ok &= max_rel <= 1e-6;
    conclude(
        "04 analytic gradients",
        start,
        30.0,
        ok,
        &format!("max relative error vs central differences {max_rel:.2e}, tol 1e-6"),
    );
}

#[test]
fn acceptance_05_dual_and_primal_rates_agree() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();

    // Coin-flip marginal: one direction on the full 2-shift, rate checked
    // on the grid 0.05, 0.10, ..., 0.95.
    let full = Sft::full_shift(2);
    let zero_full = Potential::zero(&full);
    let heads = Potential::indicator(&full, &[1]).unwrap();
    let handle = RateFunctionHandle::new(&full, &zero_full, &[heads]).unwrap();
    let grid: Vec<Vec<f64>> = (1..=19).map(|k| vec![0.05 * k as f64]).collect();
    let audit = handle.duality_audit(&grid).unwrap();
    let gap1 = audit.max_gap.unwrap_or(f64::INFINITY);
    ok &= audit.pass && gap1 <= 1e-6 && audit.infinite_mismatches == 0;
    detail.push_str(&format!("coin grid max gap {gap1:.2e}"));

    // Two independent directions on a three-symbol SFT with the move 2->2
    // forbidden. The symbol frequencies of 1 and 2 span a two-dimensional
    // achievable-mean polytope (no cyclic-sum identity ties them), and the
    // probe points are gradient images of a 5x5 tilt grid, hence interior.
    let sft3 = Sft::new(3, vec![vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 0]]).unwrap();
    let zero3 = Potential::zero(&sft3);
    let dirs = [
        Potential::indicator(&sft3, &[1]).unwrap(),
        Potential::indicator(&sft3, &[2]).unwrap(),
    ];
    let handle2 = RateFunctionHandle::new(&sft3, &zero3, &dirs).unwrap();
    let mut probes = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            let t = [-1.5 + 0.75 * i as f64, -1.5 + 0.75 * j as f64];
            match handle2.log_mgf().grad(&t).unwrap() {
                GradOutcome::Gradient(x) => probes.push(x),
                GradOutcome::Kink(_) => ok = false,
            }
        }
    }
    let audit2 = handle2.duality_audit(&probes).unwrap();
    let gap2 = audit2.max_gap.unwrap_or(f64::INFINITY);
    ok &= audit2.pass && gap2 <= 1e-6 && audit2.infinite_mismatches == 0;
    detail.push_str(&format!(", depth-2 planar grid max gap {gap2:.2e}, tol 1e-6"));

    conclude("05 conjugate duality", start, 60.0, ok, &detail);
}

#[test]
fn acceptance_06_coin_rate_value_against_a_dense_grid_oracle() {
    let start = Instant::now();
    let sft = Sft::full_shift(2);
    let zero = Potential::zero(&sft);
    let heads = Potential::indicator(&sft, &[1]).unwrap();
    let handle = RateFunctionHandle::new(&sft, &zero, &[heads]).unwrap();
    let value = handle.rate_dual(&[0.75]).unwrap().finite().unwrap();

    // Independent oracle: maximize 0.75*t - (log(1 + e^t) - log 2) over a
    // dense grid, using only closed-form scalar arithmetic.
    let mut oracle = f64::NEG_INFINITY;
    for k in 0..=600_000u32 {
        let t = -30.0 + 1e-4 * f64::from(k);
        oracle = oracle.max(0.75 * t - (t.exp().ln_1p() - std::f64::consts::LN_2));
    }

    let gap_closed = (value - BINARY_RATE_3_4).abs();
    let gap_oracle = (value - oracle).abs();
    let ok = gap_closed <= 1e-8 && gap_oracle <= 1e-8;
    conclude(
        "06 coin rate at 3/4",
        start,
        30.0,
        ok,
        &format!("|I - closed form| = {gap_closed:.2e}, |I - grid oracle| = {gap_oracle:.2e}, tol 1e-8"),
    );
}

#[test]
fn acceptance_07_irreducible_versus_reducible_dichotomy() {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();

    // Irreducible side: the full 2-shift is differentiable in every probe
    // direction and its coin rate is strictly convex.
    let full = Sft::full_shift(2);
    let zero = Potential::zero(&full);
    let probes = [
        Potential::indicator(&full, &[0]).unwrap(),
        Potential::indicator(&full, &[1]).unwrap(),
        Potential::indicator(&full, &[1, 1]).unwrap(),
    ];
    let gateaux = gateaux_check(&full, &zero, &probes).unwrap();
    ok &= gateaux.differentiable && gateaux.unique_equilibrium;

    let heads = Potential::indicator(&full, &[1]).unwrap();
    let lm = LogMgf::new(&full, &zero, std::slice::from_ref(&heads)).unwrap();
    let handle = RateFunctionHandle::new(&full, &zero, std::slice::from_ref(&heads)).unwrap();
    let xs: Vec<f64> = (1..=9).map(|k| 0.1 * k as f64).collect();
    let mut pairs = Vec::new();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            pairs.push((vec![xs[i]], vec![xs[j]]));
        }
    }
    let t_grid: Vec<Vec<f64>> = (0..21).map(|k| vec![-4.0 + 0.4 * k as f64]).collect();
    let cert =
        ess_strict_convexity_check(&lm, |x| handle.rate_dual(x), &pairs, &t_grid).unwrap();
    ok &= cert.verdict == Verdict::Pass && cert.min_margin.unwrap_or(-1.0) > 0.0;
    notes.push(format!(
        "irreducible: differentiable, strict margin {:.2e}",
        cert.min_margin.unwrap_or(f64::NAN)
    ));

    // Reducible side: the disjoint union of the 2-shift and the 3-shift,
    // tilted by the indicator of the first block.
    let union = Sft::full_shift(2).disjoint_union(&Sft::full_shift(3));
    let zero_u = Potential::zero(&union);
    let block = Potential::symbol_set_indicator(&union, &[0, 1]);

    let kinks = kink_scan(&union, &zero_u, &block, (-1.0, 2.0), 1001).unwrap();
    ok &= kinks.len() == 1;
    let t_star = kinks.first().copied().unwrap_or(f64::NAN);
    let kink_err = (t_star - LOG_3_HALVES).abs();
    ok &= kink_err <= 1e-9;
    notes.push(format!("kink at {t_star:.12} (err {kink_err:.2e})"));

    let tilted = Potential::linear_combination(&union, &[(t_star, &block)]).unwrap();
    let tilted_report = pressure_spectral(&union, &tilted).unwrap();
    ok &= !tilted_report.unique && tilted_report.equilibrium_states.len() >= 2;

    let handle_u = RateFunctionHandle::new(&union, &zero_u, std::slice::from_ref(&block)).unwrap();
    let mut affine_err = 0.0f64;
    for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let v = handle_u.rate_dual(&[x]).unwrap().finite().unwrap();
        affine_err = affine_err.max((v - x * LOG_3_HALVES).abs());
    }
    ok &= affine_err <= 1e-9;
    notes.push(format!("affine rate err {affine_err:.2e}"));

    let lm_u = LogMgf::new(&union, &zero_u, std::slice::from_ref(&block)).unwrap();
    let pairs_u = vec![(vec![0.2], vec![0.8]), (vec![0.2], vec![0.5]), (vec![0.5], vec![0.8])];
    let cert_u =
        ess_strict_convexity_check(&lm_u, |x| handle_u.rate_dual(x), &pairs_u, &t_grid).unwrap();
    ok &= cert_u.verdict == Verdict::Fail;

    // A half-and-half mixture across the two blocks is far from every
    // ergodic measure and the attempt must return a certificate saying so.
    let shift2 = Sft::full_shift(2);
    let shift3 = Sft::full_shift(3);
    let mix = MarkovMeasure::disjoint_mixture(
        &union,
        &shift2,
        &MarkovMeasure::parry(&shift2, 1).unwrap(),
        &shift3,
        &MarkovMeasure::parry(&shift3, 1).unwrap(),
        0.5,
    )
    .unwrap();
    match ergodic_approximation(&union, &mix, 1e-3).unwrap() {
        ErgodicApproximation::Failure(cert) => {
            ok &= cert.lower_bound >= 0.5 - 1e-9;
            notes.push(format!("distance bound {:.9}", cert.lower_bound));
        }
        ErgodicApproximation::Measure(_) => {
            ok = false;
            notes.push("unexpected ergodic approximant on the union".into());
        }
    }

    conclude("07 dichotomy signature", start, 30.0, ok, &notes.join("; "));
}

#[test]
fn acceptance_08_empirical_measure_rate_vanishes_only_at_equilibrium() {
    let start = Instant::now();
    let sft = Sft::golden_mean();
    let f = Potential::indicator(&sft, &[0]).unwrap().scale(0.4);
    let report = pressure_spectral(&sft, &f).unwrap();
    let equilibrium = &report.equilibrium_states[0];

    let at_equilibrium = level2_rate(&sft, &f, equilibrium).unwrap();
    let mut ok = at_equilibrium <= 1e-10;

    // Random chains on the same graph, rejected until their transition
    // matrix is at least 1e-2 away from the equilibrium in sup norm.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut min_rate = f64::INFINITY;
    let mut accepted = 0;
    while accepted < 50 {
        let a = rng.gen_range(0.02..0.98);
        let candidate =
            MarkovMeasure::from_transition(&sft, 1, vec![vec![a, 1.0 - a], vec![1.0, 0.0]])
                .unwrap();
        if candidate.transition_sup_distance(&sft, equilibrium).unwrap() < 1e-2 {
            continue;
        }
        accepted += 1;
        min_rate = min_rate.min(level2_rate(&sft, &f, &candidate).unwrap());
    }
    ok &= min_rate >= 1e-4;
    conclude(
        "08 measure-level rate",
        start,
        10.0,
        ok,
        &format!(
            "rate {at_equilibrium:.2e} at equilibrium (tol 1e-10), min {min_rate:.2e} over 50 distant chains (floor 1e-4)"
        ),
    );
}

#[test]
fn acceptance_09_ball_probabilities_match_the_rate_function() {
    let start = Instant::now();
    let sft = Sft::full_shift(2);
    let zero = Potential::zero(&sft);
    let heads = Potential::indicator(&sft, &[1]).unwrap();
    let n = 20usize;
    let delta = 0.02f64;

    let law = EmpiricalLaw::new(&sft, &zero, n).unwrap();
    let pf = PushforwardLaw::new(law, std::slice::from_ref(&heads)).unwrap();
    let handle = RateFunctionHandle::new(&sft, &zero, std::slice::from_ref(&heads)).unwrap();

    let mut ok = true;

    // Hand-checked anchor: at radius 0.02 the ball around 3/4 holds exactly
    // the 15-heads words, so its weight is C(20,15)/2^20.
    let anchor = pf.ball_log_probability(&[0.75], delta).unwrap().value.unwrap();
    let binomial = (15504.0f64 / 1_048_576.0).ln() / 20.0;
    ok &= (anchor - binomial).abs() <= 1e-12;

    // The finite-n slope must match the smallest rate over the ball up to
    // the Lipschitz surface term plus a 10*log(n)/n volume term.
    let mut lipschitz = 0.0f64;
    let mut cases = Vec::new();
    for &x in &[0.6, 0.75, 0.9] {
        let dual = handle.dual(&[x]).unwrap();
        if let Some(t) = dual.maximizer {
            lipschitz = lipschitz.max(t[0].abs());
        }
        let empirical = -pf.ball_log_probability(&[x], delta).unwrap().value.unwrap();
        let predicted = min_rate_over_ball(&handle, &[x], delta).unwrap().finite().unwrap();
        cases.push((x, empirical, predicted));
    }
    let tol = lipschitz * delta + 10.0 * (n as f64).ln() / n as f64;
    let mut worst = 0.0f64;
    for &(x, empirical, predicted) in &cases {
        let gap = (empirical - predicted).abs();
        worst = worst.max(gap);
        ok &= gap <= tol;
        let _ = x;
    }
    ok &= (anchor + BINARY_RATE_3_4).abs() <= 0.15;

    conclude(
        "09 ball probability slopes",
        start,
        60.0,
        ok,
        &format!("max |empirical - predicted| = {worst:.3} over x in {{0.6, 0.75, 0.9}}, tol {tol:.3}"),
    );
}

#[test]
fn acceptance_10_cylinder_basis_round_trip_and_span_checks() {
    let start = Instant::now();
    let sft = Sft::full_shift(2);
    let basis = CylinderBasis::new(&sft, 4).unwrap();
    let mut ok = basis.len() == 16;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut max_err = 0.0f64;
    for _ in 0..100 {
        let depth = rng.gen_range(1..=4usize);
        let f = {
            let cell = RefCell::new(&mut rng);
            Potential::from_fn(&sft, depth, |_| cell.borrow_mut().gen_range(-2.0..2.0))
        };
        let coeffs = basis.expand(&f).unwrap();
        max_err = max_err.max(basis.reconstruction_error(&f, &coeffs).unwrap());
    }
    ok &= max_err <= 1e-12;

    // Perturbation budget: norms chosen so the weighted sum telescopes to a
    // closed form, checked both below and above the threshold.
    let norms = basis.functional_norms();
    let shrinking: Vec<f64> =
        (0..basis.len()).map(|k| 0.4f64.powi(k as i32 + 1) / norms[k]).collect();
    let closed: f64 = (0..basis.len()).map(|k| 0.4f64.powi(k as i32 + 1)).sum();
    let (sum_small, holds_small) = basis.perturbation_condition(&shrinking).unwrap();
    ok &= (sum_small - closed).abs() <= 1e-12 && holds_small;

    let mut dominating = vec![0.0; basis.len()];
    dominating[0] = 2.0 / norms[0];
    let (sum_big, holds_big) = basis.perturbation_condition(&dominating).unwrap();
    ok &= (sum_big - 2.0).abs() <= 1e-12 && !holds_big;

    // Span transfer, both directions: independent perturbations keep the
    // combined span, a repeated perturbation collapses it.
    let one = Potential::constant(&sft, 1.0);
    let ind0 = Potential::indicator(&sft, &[0]).unwrap();
    let psi = Potential::from_fn(&sft, 2, |w| {
        if w[0] == 0 {
            (if w[1] == 1 { 1.0 } else { 0.0 }) - 0.5
        } else {
            0.0
        }
    });
    let psi2 = Potential::from_fn(&sft, 2, |w| {
        if w[0] == 1 {
            (if w[1] == 1 { 1.0 } else { 0.0 }) - 0.5
        } else {
            0.0
        }
    });
    let keeps = lemma14_span_check(
        &sft,
        &[one.clone(), ind0.clone()],
        &[psi.clone(), psi2.clone()],
        &[one.clone(), ind0.clone()],
        &[psi.clone(), psi2],
    )
    .unwrap();
    ok &= keeps.independent && keeps.inclusion_holds && keeps.trials == SPAN_TRIALS;

    let collapses = lemma14_span_check(
        &sft,
        &[one.clone(), ind0.clone()],
        &[psi.clone()],
        &[one, ind0],
        &[psi.clone(), psi],
    )
    .unwrap();
    ok &= !collapses.independent && !collapses.inclusion_holds;

    conclude(
        "10 cylinder basis",
        start,
        10.0,
        ok,
        &format!(
            "max reconstruction error {max_err:.2e} over 100 potentials (tol 1e-12), span checks {} trials",
            keeps.trials
        ),
    );
}
