//! Topological pressure by two routes, and the equilibrium states behind it.
//!
//! The direct route evaluates the defining normalized sums over admissible
//! words: `(1/n) log Σ exp(S_n f)`, with Birkhoff sums read cyclically. The
//! spectral route takes the log of the dominant eigenvalue of the transfer
//! matrix, component by component. Both agree in the limit; the direct route
//! carries an `O(1/n)` error at finite word length.
//!
//! Equilibrium states come from the dominant left/right eigendata: the
//! transition `entry[u][v]·r_v/(λ·r_u)` is stochastic and its stationary
//! chain maximizes `h(μ) + μ(f)`.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::exec;
use crate::linalg;
use crate::measure::{self, MarkovMeasure};
use crate::sft::{Potential, Sft, Word};
use crate::{Error, Result};

/// Upper bound on transfer-matrix states (admissible words one shorter than
/// the potential depth).
pub const STATE_CAP: usize = 4096;

/// Two component pressures within this distance are treated as tied, i.e.
/// both components carry equilibrium states.
pub const TIE_TOL: f64 = 1e-9;

/// Weighted adjacency of the higher-block recoding: states are admissible
/// `d`-words (`d = max(depth−1, 1)`), and a move `u → v` is weighted by
/// `exp(f(w))` where `w` is the first `depth` symbols of `u·v_last`.
/// Entries are held in log scale.
pub struct TransferMatrix {
    potential_depth: usize,
    state_len: usize,
    states: Vec<Word>,
    index: BTreeMap<Word, usize>,
    log_entries: Vec<f64>,
}

impl TransferMatrix {
    pub fn new(sft: &Sft, f: &Potential) -> Result<Self> {
        let k = f.depth();
        let d = k.saturating_sub(1).max(1);
        let count = sft.count_words(d);
        if count > STATE_CAP as u128 {
            return Err(Error::Resource(format!(
                "transfer matrix needs {count} states of length {d}, cap is {STATE_CAP}"
            )));
        }
        let states = sft.enumerate_words(d)?;
        let n = states.len();
        let index = measure::state_index(&states);
        let mut log_entries = vec![f64::NEG_INFINITY; n * n];
        for (i, u) in states.iter().enumerate() {
            for &s in sft.successors(u[d - 1]) {
                let mut v: Word = u[1..].to_vec();
                v.push(s);
                let j = index[&v];
                let mut window = u.clone();
                window.push(s);
                let value = f.value(&window[..k]).expect("window of admissible word");
                log_entries[i * n + j] = value;
            }
        }
        Ok(TransferMatrix { potential_depth: k, state_len: d, states, index, log_entries })
    }

    pub fn states(&self) -> &[Word] {
        &self.states
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    pub fn state_index(&self) -> &BTreeMap<Word, usize> {
        &self.index
    }

    #[inline]
    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        self.log_entries[i * self.states.len() + j]
    }
}

/// Everything `pressure_spectral` learns.
#[derive(Clone, Debug, Serialize)]
pub struct PressureReport {
    /// `P(f)`: the max of the per-component log Perron values.
    pub pressure: f64,
    /// `(component id, log Perron value)` for each cycle-bearing component.
    pub per_component: Vec<(usize, f64)>,
    /// Component ids achieving the max within [`TIE_TOL`].
    pub maximizers: Vec<usize>,
    /// One extreme equilibrium state per maximizing component, in component
    /// order.
    pub equilibrium_states: Vec<MarkovMeasure>,
    /// True iff exactly one component maximizes.
    pub unique: bool,
}

/// Normalized log-sum over admissible `n`-words of `exp(S_n f)`, evaluated
/// exactly through scaled transfer-matrix powers (identical value to the
/// word-by-word sum, without materializing the words). Cyclic Birkhoff
/// windows that cross the wrap are folded in as endpoint weights.
pub fn pressure_direct(sft: &Sft, f: &Potential, n: usize) -> Result<f64> {
    let k = f.depth();
    if n < k {
        return Err(Error::Input(format!(
            "word length {n} is shorter than the potential depth {k}"
        )));
    }
    let tm = TransferMatrix::new(sft, f)?;
    let m = tm.states.len();
    let d = tm.state_len;
    let c = tm
        .log_entries
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = tm.log_entries.iter().map(|&v| (v - c).exp()).collect();
    let (power_matrix, log_scale) = matrix_power_scaled(&scaled, m, n - d);

    // Endpoint weight for a word starting with state q and ending with state
    // p: the wrap windows (and, for depth-1 potentials, the final interior
    // window the path product misses).
    let mut terms = Vec::with_capacity(m * m);
    for q in 0..m {
        for p in 0..m {
            let b = power_matrix[q * m + p];
            if b > 0.0 {
                terms.push(b.ln() + log_wrap_weight(sft, f, &tm, p, q));
            }
        }
    }
    let total = linalg::log_sum_exp(&terms) + log_scale + c * (n - d) as f64;
    Ok(total / n as f64)
}

fn log_wrap_weight(sft: &Sft, f: &Potential, tm: &TransferMatrix, p: usize, q: usize) -> f64 {
    let k = tm.potential_depth;
    if k == 1 {
        // Path products cover windows 0..n-1; the last window is the final
        // state itself.
        return f.value(&tm.states[p]).expect("state is admissible");
    }
    let pw = &tm.states[p];
    let qw = &tm.states[q];
    let mut acc = 0.0;
    let mut window: Word = Vec::with_capacity(k);
    for j in 1..k {
        window.clear();
        window.extend_from_slice(&pw[j - 1..]);
        window.extend_from_slice(&qw[..j]);
        if sft.is_admissible(&window) {
            if let Some(v) = f.value(&window) {
                acc += v;
            }
        }
    }
    acc
}

/// `base^power` with per-multiply max renormalization: returns `(B, s)` such
/// that `base^power = e^s · B` and `B` has max entry 1 (entries in [0,1]).
fn matrix_power_scaled(base: &[f64], m: usize, power: usize) -> (Vec<f64>, f64) {
    let mut result: Vec<f64> = (0..m * m)
        .map(|i| if i / m == i % m { 1.0 } else { 0.0 })
        .collect();
    let mut result_scale = 0.0f64;
    if power == 0 {
        return (result, result_scale);
    }
    let mut sq = base.to_vec();
    let mut sq_scale = 0.0f64;
    let mut remaining = power;
    loop {
        if remaining & 1 == 1 {
            result = matmul(&result, &sq, m);
            result_scale += sq_scale;
            result_scale += renormalize_max(&mut result);
        }
        remaining >>= 1;
        if remaining == 0 {
            break;
        }
        sq = matmul(&sq, &sq, m);
        sq_scale *= 2.0;
        sq_scale += renormalize_max(&mut sq);
    }
    (result, result_scale)
}

fn matmul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let rows = exec::map_range(m, |i| {
        let mut row = vec![0.0f64; m];
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * m..(k + 1) * m];
            for j in 0..m {
                row[j] += aik * brow[j];
            }
        }
        row
    });
    let mut out = Vec::with_capacity(m * m);
    for row in rows {
        out.extend_from_slice(&row);
    }
    out
}

fn renormalize_max(a: &mut [f64]) -> f64 {
    let mx = a.iter().copied().fold(0.0f64, f64::max);
    if mx > 0.0 {
        for v in a.iter_mut() {
            *v /= mx;
        }
        mx.ln()
    } else {
        0.0
    }
}

/// Exact pressure and equilibrium states from per-component Perron data.
pub fn pressure_spectral(sft: &Sft, f: &Potential) -> Result<PressureReport> {
    let tm = TransferMatrix::new(sft, f)?;
    let d = tm.state_len;
    let nontrivial: Vec<_> = sft.components().iter().filter(|c| c.nontrivial).collect();
    // Per-component Perron solves are independent.
    let solved = exec::map_slice(&nontrivial, |comp| {
        let idx = component_states(sft, &tm, comp.id);
        let sub = restrict_log_matrix(&tm, &idx);
        linalg::perron(&linalg::LogMatrix { n: idx.len(), log_entries: &sub })
            .map(|pair| (comp.id, idx, pair))
    });
    let mut per_component = Vec::new();
    let mut data = Vec::new();
    for result in solved {
        let (id, idx, pair) = result?;
        per_component.push((id, pair.log_lambda));
        data.push((id, idx, pair));
    }
    let pressure = per_component
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut maximizers = Vec::new();
    let mut equilibrium_states = Vec::new();
    for (id, idx, pair) in &data {
        if pressure - pair.log_lambda <= TIE_TOL {
            maximizers.push(*id);
            equilibrium_states.push(equilibrium_from_perron(sft, &tm, *id, idx, pair)?);
        }
    }
    let unique = maximizers.len() == 1;
    let _ = d;
    Ok(PressureReport { pressure, per_component, maximizers, equilibrium_states, unique })
}

/// Pressure value alone: the maximum of the per-component dominant
/// log-eigenvalues, skipping equilibrium-state construction. This stays
/// usable at tilt scales where the eigenvector-based chain would lose its
/// stationary distribution to underflow; escape-ray probes rely on it.
pub fn pressure_value(sft: &Sft, f: &Potential) -> Result<f64> {
    let tm = TransferMatrix::new(sft, f)?;
    let nontrivial: Vec<_> = sft.components().iter().filter(|c| c.nontrivial).collect();
    let solved = exec::map_slice(&nontrivial, |comp| {
        let idx = component_states(sft, &tm, comp.id);
        let sub = restrict_log_matrix(&tm, &idx);
        linalg::perron(&linalg::LogMatrix { n: idx.len(), log_entries: &sub })
            .map(|pair| pair.log_lambda)
    });
    let mut pressure = f64::NEG_INFINITY;
    for result in solved {
        pressure = pressure.max(result?);
    }
    Ok(pressure)
}

fn component_states(sft: &Sft, tm: &TransferMatrix, comp_id: usize) -> Vec<usize> {
    tm.states
        .iter()
        .enumerate()
        .filter(|(_, w)| w.iter().all(|&s| sft.component_of(s) == comp_id))
        .map(|(i, _)| i)
        .collect()
}

fn restrict_log_matrix(tm: &TransferMatrix, idx: &[usize]) -> Vec<f64> {
    let k = idx.len();
    let mut sub = vec![f64::NEG_INFINITY; k * k];
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            sub[a * k + b] = tm.log_entry(i, j);
        }
    }
    sub
}

/// Builds the stochastic chain `entry[u][v]·r_v/(λ·r_u)` on one component
/// and extends it by zero mass to the full state space. Rows are assembled
/// in log scale and softmax-normalized, so eigenvector components that
/// underflow in linear scale still produce valid probabilities.
fn equilibrium_from_perron(
    sft: &Sft,
    tm: &TransferMatrix,
    comp_id: usize,
    idx: &[usize],
    pair: &linalg::PerronPair,
) -> Result<MarkovMeasure> {
    let comp = &sft.components()[comp_id];
    let (sub_sft, to_sub) = crate::measure::restrict_symbols(sft, &comp.symbols);
    let k = idx.len();
    let mut rows = vec![vec![0.0f64; k]; k];
    let mut log_row = vec![f64::NEG_INFINITY; k];
    for (a, &i) in idx.iter().enumerate() {
        if !pair.log_right[a].is_finite() {
            return Err(Error::Numerical(format!(
                "Perron eigenvector lost state {a} of component {comp_id}"
            )));
        }
        for (b, &j) in idx.iter().enumerate() {
            let le = tm.log_entry(i, j);
            log_row[b] = if le.is_finite() {
                le - pair.log_lambda + pair.log_right[b] - pair.log_right[a]
            } else {
                f64::NEG_INFINITY
            };
        }
        let z = linalg::log_sum_exp(&log_row);
        if !z.is_finite() {
            return Err(Error::Numerical(format!(
                "equilibrium row {a} of component {comp_id} has no admissible moves"
            )));
        }
        for b in 0..k {
            rows[a][b] = (log_row[b] - z).exp();
        }
    }
    // Re-express component states in the sub-shift's own symbols. The
    // symbol map is monotone, so lexicographic state order is preserved and
    // the rows line up with the sub-shift's enumeration.
    let measure_on_sub = {
        let stationary = linalg::stationary_distribution(&rows)?;
        MarkovMeasure::new(&sub_sft, tm.state_len, rows, stationary)?
    };
    let _ = to_sub;
    measure::extend_from_component(sft, &measure_on_sub, &comp.symbols)
}

/// One-sided derivatives of `t ↦ P(f + t·g)` at `t = 0`: the min and max of
/// `μ(g)` over the extreme equilibrium states of `f`.
pub fn directional_derivatives(sft: &Sft, f: &Potential, g: &Potential) -> Result<(f64, f64)> {
    let report = pressure_spectral(sft, f)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for mu in &report.equilibrium_states {
        let mean = mu.expectation(sft, g)?;
        lo = lo.min(mean);
        hi = hi.max(mean);
    }
    Ok((lo, hi))
}

/// Per-probe derivative gap diagnostics backing [`gateaux_check`].
#[derive(Clone, Debug, Serialize)]
pub struct ProbeDiagnostic {
    pub left: f64,
    pub right: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GateauxReport {
    /// True iff the equilibrium state is unique and every probe's one-sided
    /// derivatives agree within 1e-10.
    pub differentiable: bool,
    pub unique_equilibrium: bool,
    pub probes: Vec<ProbeDiagnostic>,
}

pub const GATEAUX_GAP_TOL: f64 = 1e-10;

/// Smoothness test at `f`: the pressure map is differentiable along every
/// probe direction iff the equilibrium state is unique.
pub fn gateaux_check(sft: &Sft, f: &Potential, probes: &[Potential]) -> Result<GateauxReport> {
    let report = pressure_spectral(sft, f)?;
    let mut diags = Vec::with_capacity(probes.len());
    let mut all_tight = true;
    for g in probes {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for mu in &report.equilibrium_states {
            let mean = mu.expectation(sft, g)?;
            lo = lo.min(mean);
            hi = hi.max(mean);
        }
        let gap = hi - lo;
        if gap > GATEAUX_GAP_TOL {
            all_tight = false;
        }
        diags.push(ProbeDiagnostic { left: lo, right: hi, gap });
    }
    Ok(GateauxReport {
        differentiable: report.unique && all_tight,
        unique_equilibrium: report.unique,
        probes: diags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const LOG2: f64 = 0.6931471805599453;
    const LOG3: f64 = 1.0986122886681098;
    const LOG_3_HALVES: f64 = 0.4054651081081645;
    const LOG_PHI: f64 = 0.4812118250596035;

    fn two_shift() -> Sft {
        Sft::full_shift(2)
    }

    fn union_2_3() -> Sft {
        Sft::full_shift(2).disjoint_union(&Sft::full_shift(3))
    }

    /// Indicator of the first block's symbols on the 2-and-3 union.
    fn first_block_indicator(union: &Sft) -> Potential {
        Potential::symbol_set_indicator(union, &[0, 1])
    }

    #[test]
    fn direct_pressure_of_full_shifts_is_log_alphabet() {
        for m in 2..=4 {
            let sft = Sft::full_shift(m);
            let f = Potential::zero(&sft);
            for n in [1, 5, 12] {
                let p = pressure_direct(&sft, &f, n).unwrap();
                assert_relative_eq!(p, (m as f64).ln(), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn direct_pressure_of_tilted_two_shift_is_exact() {
        // f = t·(indicator of symbol 1): the word sum is binomial,
        // (1/n) log (1+e^t)^n = log(1+e^t) at every n.
        let sft = two_shift();
        for &t in &[-1.3, 0.0, 0.7, 2.5] {
            let f = Potential::indicator(&sft, &[1]).unwrap().scale(t);
            let expect = (1.0 + t.exp()).ln();
            for n in [1, 2, 7, 16] {
                assert_relative_eq!(
                    pressure_direct(&sft, &f, n).unwrap(),
                    expect,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn direct_pressure_of_golden_mean_converges_to_log_phi() {
        let gm = Sft::golden_mean();
        let f = Potential::zero(&gm);
        let p24 = pressure_direct(&gm, &f, 24).unwrap();
        assert!((p24 - LOG_PHI).abs() < 1e-2, "n=24 value {p24} too far from log phi");
        // The gap shrinks roughly like 1/n.
        let p12 = pressure_direct(&gm, &f, 12).unwrap();
        assert!((p24 - LOG_PHI).abs() < (p12 - LOG_PHI).abs());
    }

    #[test]
    fn spectral_pressure_of_two_shift() {
        let sft = two_shift();
        let report = pressure_spectral(&sft, &Potential::zero(&sft)).unwrap();
        assert_relative_eq!(report.pressure, LOG2, max_relative = 1e-12);
        assert!(report.unique);
        assert_eq!(report.equilibrium_states.len(), 1);
        let mu = &report.equilibrium_states[0];
        assert_relative_eq!(mu.stationary()[0], 0.5, max_relative = 1e-10);
        assert_relative_eq!(mu.transition()[0][1], 0.5, max_relative = 1e-10);
    }

    #[test]
    fn spectral_pressure_of_golden_mean_depth_two_potential() {
        // Transfer matrix [[1, e],[1, 0]] for f = indicator of the word 01:
        // dominant eigenvalue (1 + sqrt(1+4e))/2 by the quadratic formula.
        let gm = Sft::golden_mean();
        let f = Potential::indicator(&gm, &[0, 1]).unwrap();
        let report = pressure_spectral(&gm, &f).unwrap();
        let e = std::f64::consts::E;
        let oracle = ((1.0 + (1.0 + 4.0 * e).sqrt()) / 2.0).ln();
        assert_relative_eq!(report.pressure, oracle, max_relative = 1e-12);
    }

    #[test]
    fn union_pressure_is_component_max() {
        let union = union_2_3();
        let report = pressure_spectral(&union, &Potential::zero(&union)).unwrap();
        assert_relative_eq!(report.pressure, LOG3, max_relative = 1e-12);
        assert!(report.unique);
        assert_eq!(report.maximizers, vec![1]);
        let masses = report.equilibrium_states[0].component_masses(&union);
        assert_relative_eq!(masses[1], 1.0, epsilon = 1e-12);
        // Both component values reported.
        assert_eq!(report.per_component.len(), 2);
        assert_relative_eq!(report.per_component[0].1, LOG2, max_relative = 1e-12);
    }

    #[test]
    fn balanced_union_has_two_equilibrium_states() {
        let union = union_2_3();
        let f = first_block_indicator(&union).scale(LOG_3_HALVES);
        let report = pressure_spectral(&union, &f).unwrap();
        assert_relative_eq!(report.pressure, LOG3, max_relative = 1e-12);
        assert!(!report.unique);
        assert_eq!(report.maximizers.len(), 2);
        assert_eq!(report.equilibrium_states.len(), 2);
        for mu in &report.equilibrium_states {
            assert!(mu.is_ergodic());
        }
    }

    #[test]
    fn equilibrium_states_satisfy_variational_identity() {
        let cases: Vec<(Sft, Potential)> = vec![
            {
                let s = two_shift();
                let f = Potential::indicator(&s, &[1]).unwrap().scale(1.7);
                (s, f)
            },
            {
                let s = Sft::golden_mean();
                let f = Potential::indicator(&s, &[0, 1]).unwrap().scale(-0.9);
                (s, f)
            },
            {
                let s = Sft::full_shift(3);
                let f = Potential::from_fn(&s, 2, |w| 0.3 * w[0] as f64 - 0.8 * w[1] as f64);
                (s, f)
            },
        ];
        for (sft, f) in &cases {
            let report = pressure_spectral(sft, f).unwrap();
            for mu in &report.equilibrium_states {
                let value = mu.entropy() + mu.expectation(sft, f).unwrap();
                assert!(
                    (value - report.pressure).abs() <= 1e-9,
                    "variational residual {} too large",
                    (value - report.pressure).abs()
                );
            }
        }
    }

    #[test]
    fn depth_one_equilibrium_is_the_gibbs_product() {
        // On the full shift, a depth-1 potential has equilibrium rows
        // proportional to e^f, independent of the current symbol.
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[1]).unwrap().scale(LOG3);
        let report = pressure_spectral(&sft, &f).unwrap();
        let mu = &report.equilibrium_states[0];
        assert_relative_eq!(mu.transition()[0][1], 0.75, max_relative = 1e-10);
        assert_relative_eq!(mu.transition()[1][1], 0.75, max_relative = 1e-10);
        assert_relative_eq!(report.pressure, (1.0f64 + 3.0).ln(), max_relative = 1e-12);
    }

    #[test]
    fn route_agreement_scaled_by_n_stays_bounded() {
        let gm = Sft::golden_mean();
        let f = Potential::indicator(&gm, &[0, 1]).unwrap().scale(0.6);
        let spectral = pressure_spectral(&gm, &f).unwrap().pressure;
        for n in 8..=20 {
            let direct = pressure_direct(&gm, &f, n).unwrap();
            let scaled_gap = n as f64 * (direct - spectral).abs();
            assert!(scaled_gap < 5.0, "n·gap = {scaled_gap} at n = {n}");
        }
    }

    #[test]
    fn invariant_measures_are_suboptimal() {
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[1]).unwrap().scale(0.8);
        let p = pressure_spectral(&sft, &f).unwrap().pressure;
        for probs in [[0.3, 0.7], [0.5, 0.5], [0.95, 0.05]] {
            let mu = MarkovMeasure::bernoulli(&sft, &probs).unwrap();
            let value = mu.entropy() + mu.expectation(&sft, &f).unwrap();
            assert!(value <= p + 1e-12, "measure beat the pressure: {value} > {p}");
        }
    }

    #[test]
    fn pressure_is_convex_along_lines() {
        let gm = Sft::golden_mean();
        let f = Potential::indicator(&gm, &[0]).unwrap();
        let g = Potential::indicator(&gm, &[1, 0]).unwrap();
        let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.3).collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&t| {
                let tilted =
                    Potential::linear_combination(&gm, &[(1.0, &f), (t, &g)]).unwrap();
                pressure_spectral(&gm, &tilted).unwrap().pressure
            })
            .collect();
        for w in values.windows(3) {
            let second_diff = w[2] - 2.0 * w[1] + w[0];
            assert!(second_diff >= -1e-9, "convexity violated: {second_diff}");
        }
    }

    #[test]
    fn directional_derivatives_bracket_equilibrium_means() {
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[1]).unwrap().scale(0.4);
        let g = Potential::indicator(&sft, &[0, 1]).unwrap();
        let (lo, hi) = directional_derivatives(&sft, &f, &g).unwrap();
        assert_relative_eq!(lo, hi, epsilon = 1e-12);
        let report = pressure_spectral(&sft, &f).unwrap();
        let mean = report.equilibrium_states[0].expectation(&sft, &g).unwrap();
        assert_relative_eq!(lo, mean, epsilon = 1e-12);

        let zero = Potential::zero(&sft);
        assert_eq!(directional_derivatives(&sft, &f, &zero).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn union_kink_has_unit_derivative_gap() {
        let union = union_2_3();
        let g = first_block_indicator(&union);
        let f = g.scale(LOG_3_HALVES);
        let (lo, hi) = directional_derivatives(&union, &f, &g).unwrap();
        assert_relative_eq!(lo, 0.0, epsilon = 1e-9);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn gateaux_check_matches_uniqueness() {
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[1]).unwrap().scale(-0.3);
        let probes =
            vec![Potential::indicator(&sft, &[0]).unwrap(), Potential::indicator(&sft, &[0, 1]).unwrap()];
        let report = gateaux_check(&sft, &f, &probes).unwrap();
        assert!(report.differentiable);
        assert!(report.unique_equilibrium);

        let union = union_2_3();
        let g = first_block_indicator(&union);
        let kink = g.scale(LOG_3_HALVES);
        let probes = vec![g.clone()];
        let report = gateaux_check(&union, &kink, &probes).unwrap();
        assert!(!report.differentiable);
        assert!(report.probes[0].gap > 0.5);

        // Reducible but with a strict maximizing component: still smooth.
        let report = gateaux_check(&union, &Potential::zero(&union), &[g]).unwrap();
        assert!(report.differentiable);
    }

    #[test]
    fn state_cap_is_enforced() {
        let sft = Sft::full_shift(4);
        // Depth 8 needs 4^7 = 16384 states, above the 4096 cap.
        let f = Potential::from_fn(&sft, 8, |_| 0.0);
        match pressure_spectral(&sft, &f) {
            Err(Error::Resource(msg)) => assert!(msg.contains("16384")),
            other => panic!("expected resource error, got {other:?}"),
        }
    }
}
