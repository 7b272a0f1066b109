//! Executes one scenario task and renders its CSV and JSON reports.

use serde_json::{json, Value};
use sftlab_core::convex::{ess_strict_convexity_check, kink_scan, ExtReal, LogMgf, Verdict};
use sftlab_core::convex::ConvexityCertificate;
use sftlab_core::measure::{ergodic_approximation, ErgodicApproximation, MarkovMeasure};
use sftlab_core::pressure::{self, GateauxReport};
use sftlab_core::rate::RateFunctionHandle;
use sftlab_core::scenario::{Scenario, TaskSpec};
use sftlab_core::schauder::{lemma14_span_check, CylinderBasis};
use sftlab_core::sft::{Potential, Sft, Word};
use sftlab_core::{Error, Result};

use crate::output::fmt;

pub struct TaskOutcome {
    pub csv: String,
    pub json: Value,
    /// `None` for report-only tasks; `Some` for tasks with a verdict.
    pub pass: Option<bool>,
}

pub fn execute(scenario: &Scenario, task: &TaskSpec) -> Result<TaskOutcome> {
    match task {
        TaskSpec::Pressure { potential, n_schedule } => {
            run_pressure(scenario, potential, n_schedule)
        }
        TaskSpec::Equilibrium { potential } => run_equilibrium(scenario, potential),
        TaskSpec::Kinkscan { base, direction, t_range, grid } => {
            run_kinkscan(scenario, base, direction, *t_range, *grid)
        }
        TaskSpec::RateAudit { base, directions, x_grid } => {
            run_rate_audit(scenario, base, directions, x_grid)
        }
        TaskSpec::LdpAudit { base, tilt, directions, n_schedule, x_grid, delta } => {
            run_ldp_audit(scenario, base, tilt, directions, n_schedule, x_grid, *delta)
        }
        TaskSpec::Dichotomy { irreducible, reducible, t_range, grid, x_grid, eps } => {
            let irr = irreducible.build()?;
            let red = reducible.build()?;
            run_dichotomy(&irr, &red, *t_range, *grid, x_grid, *eps)
        }
        TaskSpec::SchauderCheck { depth, random_potentials } => {
            run_schauder_check(scenario, *depth, *random_potentials)
        }
    }
}

fn run_pressure(scenario: &Scenario, name: &str, schedule: &[usize]) -> Result<TaskOutcome> {
    let f = scenario.potential(name)?;
    let report = pressure::pressure_spectral(&scenario.sft, f)?;
    let mut csv = String::from("n,direct,spectral,gap,scaled_gap\n");
    let mut max_scaled = 0.0f64;
    for &n in schedule {
        let direct = pressure::pressure_direct(&scenario.sft, f, n)?;
        let gap = direct - report.pressure;
        let scaled = n as f64 * gap.abs();
        max_scaled = max_scaled.max(scaled);
        csv.push_str(&format!(
            "{n},{},{},{},{}\n",
            fmt(direct),
            fmt(report.pressure),
            fmt(gap),
            fmt(scaled)
        ));
    }
    let json = json!({
        "potential": name,
        "pressure": report.pressure,
        "unique_equilibrium": report.unique,
        "max_scaled_gap": max_scaled,
    });
    Ok(TaskOutcome { csv, json, pass: None })
}

fn run_equilibrium(scenario: &Scenario, name: &str) -> Result<TaskOutcome> {
    let f = scenario.potential(name)?;
    let report = pressure::pressure_spectral(&scenario.sft, f)?;
    let mut csv = String::from("measure,state,mass\n");
    let mut diagnostics = Vec::new();
    for (i, mu) in report.equilibrium_states.iter().enumerate() {
        for (w, &mass) in mu.states().iter().zip(mu.stationary()) {
            csv.push_str(&format!("{i},{},{}\n", word_str(w), fmt(mass)));
        }
        let entropy = mu.entropy();
        let mean = mu.expectation(&scenario.sft, f)?;
        diagnostics.push(json!({
            "entropy": entropy,
            "expectation": mean,
            "variational_gap": (entropy + mean - report.pressure).abs(),
        }));
    }
    let json = json!({
        "potential": name,
        "pressure": report.pressure,
        "unique": report.unique,
        "states": diagnostics,
    });
    Ok(TaskOutcome { csv, json, pass: None })
}

fn run_kinkscan(
    scenario: &Scenario,
    base: &Option<String>,
    direction: &str,
    t_range: (f64, f64),
    grid: usize,
) -> Result<TaskOutcome> {
    let f = scenario.base_potential(base)?;
    let g = scenario.potential(direction)?;
    let kinks = kink_scan(&scenario.sft, &f, g, t_range, grid)?;
    let mut csv = String::from("index,location\n");
    for (i, t) in kinks.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", fmt(*t)));
    }
    let json = json!({
        "direction": direction,
        "t_range": [t_range.0, t_range.1],
        "grid": grid,
        "count": kinks.len(),
        "locations": kinks,
    });
    Ok(TaskOutcome { csv, json, pass: None })
}

fn run_rate_audit(
    scenario: &Scenario,
    base: &Option<String>,
    directions: &[String],
    x_grid: &[Vec<f64>],
) -> Result<TaskOutcome> {
    let f = scenario.base_potential(base)?;
    let dirs: Vec<Potential> = directions
        .iter()
        .map(|d| scenario.potential(d).cloned())
        .collect::<Result<_>>()?;
    let handle = RateFunctionHandle::new(&scenario.sft, &f, &dirs)?;
    let audit = handle.duality_audit(x_grid)?;
    let pass = audit.pass;
    let csv = audit.to_csv();
    let json = serde_json::to_value(&audit)
        .map_err(|e| Error::Input(format!("report serialization failed: {e}")))?;
    Ok(TaskOutcome { csv, json, pass: Some(pass) })
}

fn run_ldp_audit(
    scenario: &Scenario,
    base: &Option<String>,
    tilt: &str,
    directions: &[String],
    n_schedule: &[usize],
    x_grid: &[Vec<f64>],
    delta: f64,
) -> Result<TaskOutcome> {
    let f = scenario.base_potential(base)?;
    let g = scenario.potential(tilt)?;
    let dirs: Vec<Potential> = directions
        .iter()
        .map(|d| scenario.potential(d).cloned())
        .collect::<Result<_>>()?;
    let report =
        sftlab_core::ldp::gartner_audit(&scenario.sft, &f, g, &dirs, n_schedule, x_grid, delta)?;
    let pass = report.pass;
    let csv = report.to_csv();
    let json = serde_json::to_value(&report)
        .map_err(|e| Error::Input(format!("report serialization failed: {e}")))?;
    Ok(TaskOutcome { csv, json, pass: Some(pass) })
}

/// Everything measured about one side of the dichotomy.
struct SideReport {
    gateaux: GateauxReport,
    certificate: ConvexityCertificate,
    kinks: Vec<f64>,
    unique_at_first_kink: Option<bool>,
    rate_rows: Vec<(f64, ExtReal)>,
    approximation: &'static str,
    lower_bound: Option<f64>,
    component_masses: Option<Vec<f64>>,
}

fn run_dichotomy(
    irr: &Sft,
    red: &Sft,
    t_range: (f64, f64),
    grid: usize,
    x_grid: &[f64],
    eps: f64,
) -> Result<TaskOutcome> {
    let left = analyze_side(irr, t_range, grid, x_grid, eps)?;
    let right = analyze_side(red, t_range, grid, x_grid, eps)?;

    let irr_ok = left.gateaux.differentiable
        && matches!(left.certificate.verdict, Verdict::Pass)
        && left.kinks.is_empty()
        && left.approximation == "convergent";
    let red_ok = !right.kinks.is_empty()
        && matches!(right.certificate.verdict, Verdict::Fail)
        && !right.certificate.witnesses.is_empty()
        && right.unique_at_first_kink == Some(false)
        && right.approximation == "certificate";
    let pass = irr_ok && red_ok;

    let mut csv = String::from("quantity,irreducible,reducible\n");
    csv.push_str(&format!(
        "gateaux_differentiable_at_base,{},{}\n",
        left.gateaux.differentiable, right.gateaux.differentiable
    ));
    csv.push_str(&format!(
        "strict_convexity_verdict,{},{}\n",
        verdict_str(left.certificate.verdict),
        verdict_str(right.certificate.verdict)
    ));
    csv.push_str(&format!("kink_count,{},{}\n", left.kinks.len(), right.kinks.len()));
    csv.push_str(&format!(
        "first_kink_location,{},{}\n",
        left.kinks.first().map_or("-".into(), |t| fmt(*t)),
        right.kinks.first().map_or("-".into(), |t| fmt(*t))
    ));
    csv.push_str(&format!(
        "unique_equilibrium_at_first_kink,{},{}\n",
        opt_bool(left.unique_at_first_kink),
        opt_bool(right.unique_at_first_kink)
    ));
    csv.push_str(&format!(
        "approximation_outcome,{},{}\n",
        left.approximation, right.approximation
    ));
    csv.push_str(&format!(
        "certificate_lower_bound,{},{}\n",
        left.lower_bound.map_or("-".into(), fmt),
        right.lower_bound.map_or("-".into(), fmt)
    ));
    for ((x, li), (_, ri)) in left.rate_rows.iter().zip(&right.rate_rows) {
        csv.push_str(&format!(
            "rate_at_{x},{},{}\n",
            ext_str(*li),
            ext_str(*ri)
        ));
    }

    let json = json!({
        "irreducible": side_json(&left)?,
        "reducible": side_json(&right)?,
        "irreducible_signature_ok": irr_ok,
        "reducible_signature_ok": red_ok,
        "pass": pass,
    });
    Ok(TaskOutcome { csv, json, pass: Some(pass) })
}

fn analyze_side(
    sft: &Sft,
    t_range: (f64, f64),
    grid: usize,
    x_grid: &[f64],
    eps: f64,
) -> Result<SideReport> {
    let zero = Potential::zero(sft);
    let probes: Vec<Potential> = (0..sft.alphabet_size())
        .map(|s| Potential::symbol_set_indicator(sft, &[s as u8]))
        .collect();
    let gateaux = pressure::gateaux_check(sft, &zero, &probes)?;

    let direction = canonical_direction(sft);
    let lm = LogMgf::new(sft, &zero, std::slice::from_ref(&direction))?;
    let handle = RateFunctionHandle::new(sft, &zero, std::slice::from_ref(&direction))?;
    let mut pairs = Vec::new();
    for (i, &a) in x_grid.iter().enumerate() {
        for &b in &x_grid[i + 1..] {
            pairs.push((vec![a], vec![b]));
        }
    }
    let t_nodes = 33;
    let t_grid: Vec<Vec<f64>> = (0..t_nodes)
        .map(|k| {
            vec![t_range.0 + (t_range.1 - t_range.0) * k as f64 / (t_nodes - 1) as f64]
        })
        .collect();
    let certificate =
        ess_strict_convexity_check(&lm, |x| handle.rate_dual(x), &pairs, &t_grid)?;

    let kinks = kink_scan(sft, &zero, &direction, t_range, grid)?;
    let unique_at_first_kink = match kinks.first() {
        Some(&t) => {
            let tilted = Potential::linear_combination(sft, &[(t, &direction)])
                .map_err(|e| Error::Input(e.to_string()))?;
            Some(pressure::pressure_spectral(sft, &tilted)?.unique)
        }
        None => None,
    };

    let mut rate_rows = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        rate_rows.push((x, handle.rate_dual(&[x])?));
    }

    let mu = balanced_probe_measure(sft)?;
    let (approximation, lower_bound, component_masses) =
        match ergodic_approximation(sft, &mu, eps)? {
            ErgodicApproximation::Measure(_) => ("convergent", None, None),
            ErgodicApproximation::Failure(cert) => (
                "certificate",
                Some(cert.lower_bound),
                Some(cert.component_masses),
            ),
        };

    Ok(SideReport {
        gateaux,
        certificate,
        kinks,
        unique_at_first_kink,
        rate_rows,
        approximation,
        lower_bound,
        component_masses,
    })
}

/// The scan direction: the indicator of the first cycle-bearing component
/// when there are several (so reducible systems tilt one component against
/// the rest), and the first symbol's indicator otherwise.
fn canonical_direction(sft: &Sft) -> Potential {
    let nontrivial: Vec<&sftlab_core::sft::SftComponent> =
        sft.components().iter().filter(|c| c.nontrivial).collect();
    if nontrivial.len() >= 2 {
        Potential::symbol_set_indicator(sft, &nontrivial[0].symbols)
    } else {
        Potential::symbol_set_indicator(sft, &[0])
    }
}

/// A stationary chain that exercises the approximation machinery: an
/// equal-weight mixture of the first two components' maximal-entropy
/// chains when the system is reducible, a non-ergodic two-fixed-point
/// blend when the full shift structure allows it, and the Parry chain
/// otherwise.
fn balanced_probe_measure(sft: &Sft) -> Result<MarkovMeasure> {
    let nontrivial: Vec<&sftlab_core::sft::SftComponent> =
        sft.components().iter().filter(|c| c.nontrivial).collect();
    if nontrivial.len() >= 2 {
        return component_mixture(sft, nontrivial[0].symbols.clone(), nontrivial[1].symbols.clone());
    }
    let t = sft.transitions();
    let loops: Vec<usize> = (0..sft.alphabet_size()).filter(|&s| t[s][s] == 1).collect();
    if loops.len() >= 2 {
        // Half-and-half on two fixed points: stationary but not ergodic.
        let m = sft.alphabet_size();
        let mut transition = vec![vec![0.0; m]; m];
        let mut stationary = vec![0.0; m];
        for s in 0..m {
            if s == loops[0] || s == loops[1] {
                transition[s][s] = 1.0;
            } else {
                let succ = sft.successors(s as u8);
                for &v in succ {
                    transition[s][v as usize] = 1.0 / succ.len() as f64;
                }
            }
        }
        stationary[loops[0]] = 0.5;
        stationary[loops[1]] = 0.5;
        return MarkovMeasure::new(sft, 1, transition, stationary);
    }
    MarkovMeasure::parry(sft, 1)
}

/// Equal-weight blend of the maximal-entropy chains of two components,
/// embedded in the full symbol space at depth 1.
fn component_mixture(sft: &Sft, left: Vec<u8>, right: Vec<u8>) -> Result<MarkovMeasure> {
    let m = sft.alphabet_size();
    let mut transition = vec![vec![0.0f64; m]; m];
    let mut stationary = vec![0.0f64; m];
    for symbols in [&left, &right] {
        let k = symbols.len();
        let sub = Sft::new(
            k,
            (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| sft.transitions()[symbols[i] as usize][symbols[j] as usize])
                        .collect()
                })
                .collect(),
        )
        .map_err(|e| Error::Input(format!("component subsystem: {e}")))?;
        let parry = MarkovMeasure::parry(&sub, 1)?;
        for i in 0..k {
            stationary[symbols[i] as usize] = 0.5 * parry.stationary()[i];
            for j in 0..k {
                transition[symbols[i] as usize][symbols[j] as usize] =
                    parry.transition()[i][j];
            }
        }
    }
    // Symbols outside the two components carry no mass; give them valid
    // stochastic rows over their successors.
    for s in 0..m {
        if transition[s].iter().all(|&v| v == 0.0) {
            let succ = sft.successors(s as u8);
            for &v in succ {
                transition[s][v as usize] = 1.0 / succ.len() as f64;
            }
        }
    }
    MarkovMeasure::new(sft, 1, transition, stationary)
}

fn side_json(side: &SideReport) -> Result<Value> {
    let to_value = |r: serde_json::Result<Value>| {
        r.map_err(|e| Error::Input(format!("report serialization failed: {e}")))
    };
    Ok(json!({
        "gateaux": to_value(serde_json::to_value(&side.gateaux))?,
        "strict_convexity": to_value(serde_json::to_value(&side.certificate))?,
        "kinks": side.kinks,
        "unique_equilibrium_at_first_kink": side.unique_at_first_kink,
        "rate": side
            .rate_rows
            .iter()
            .map(|(x, v)| json!({ "x": x, "value": serde_json::to_value(v).unwrap() }))
            .collect::<Vec<Value>>(),
        "approximation": {
            "outcome": side.approximation,
            "lower_bound": side.lower_bound,
            "component_masses": side.component_masses,
        },
    }))
}

fn run_schauder_check(
    scenario: &Scenario,
    depth: usize,
    random_potentials: usize,
) -> Result<TaskOutcome> {
    let sft = &scenario.sft;
    let basis = CylinderBasis::new(sft, depth)?;
    let mut rng = SplitMix::new(scenario.seed ^ 0x53_43_48_41);
    let mut max_err = 0.0f64;
    for _ in 0..random_potentials {
        let d = 1 + (rng.next_u64() as usize) % depth;
        let cell = std::cell::RefCell::new(SplitMix::new(rng.next_u64()));
        let f = Potential::from_fn(sft, d, |_| 3.0 * cell.borrow_mut().next_sym());
        let coeffs = basis.expand(&f)?;
        max_err = max_err.max(basis.reconstruction_error(&f, &coeffs)?);
    }
    let norms = basis.functional_norms().to_vec();
    let geometric: Vec<f64> = norms
        .iter()
        .enumerate()
        .map(|(n, s)| 0.25 * 0.5f64.powi(n as i32) / s)
        .collect();
    let (geo_sum, geo_holds) = basis.perturbation_condition(&geometric)?;
    let mut dominating = vec![0.0; basis.len()];
    dominating[0] = 2.0 / norms[0];
    let (dom_sum, dom_holds) = basis.perturbation_condition(&dominating)?;

    let els = basis.elements();
    let (indep, dep) = if els.len() >= 2 {
        let w = vec![els[0].function.clone()];
        let wt = vec![els[1].function.clone()];
        let indep = lemma14_span_check(
            sft,
            &w,
            &wt,
            &[els[0].function.clone()],
            &[els[1].function.clone()],
        )?;
        let dep = lemma14_span_check(
            sft,
            &w,
            &wt,
            &[els[0].function.clone(), els[0].function.scale(2.0)],
            &[els[1].function.clone(), els[1].function.clone()],
        )?;
        (indep, dep)
    } else {
        return Err(Error::Input("basis too small for the span check".into()));
    };

    let pass = max_err <= 1e-12
        && geo_holds
        && !dom_holds
        && indep.independent
        && indep.inclusion_holds
        && !dep.independent
        && !dep.inclusion_holds;

    let mut csv = String::from("index,word,continuation,functional_norm\n");
    for (i, el) in els.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            if el.word.is_empty() { "-".into() } else { word_str(&el.word) },
            el.continuation.map_or("-".to_string(), |c| c.to_string()),
            fmt(norms[i])
        ));
    }
    let json = json!({
        "dimension": basis.len(),
        "depth": depth,
        "random_potentials": random_potentials,
        "max_reconstruction_error": max_err,
        "geometric_perturbation": { "sum": geo_sum, "holds": geo_holds },
        "dominating_perturbation": { "sum": dom_sum, "holds": dom_holds },
        "independent_case": serde_json::to_value(&indep).unwrap(),
        "dependent_case": serde_json::to_value(&dep).unwrap(),
        "pass": pass,
    });
    Ok(TaskOutcome { csv, json, pass: Some(pass) })
}

fn word_str(w: &Word) -> String {
    w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("")
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconsistent => "inconsistent",
    }
}

fn opt_bool(v: Option<bool>) -> String {
    v.map_or("-".into(), |b| b.to_string())
}

fn ext_str(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(x) => fmt(x),
        ExtReal::PlusInf => "inf".into(),
    }
}

/// SplitMix64 for the seeded random potentials.
struct SplitMix(u64);

impl SplitMix {
    fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn next_sym(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        2.0 * u - 1.0
    }
}
