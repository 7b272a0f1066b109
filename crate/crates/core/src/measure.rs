//! Shift-invariant Markov measures of finite memory, their entropy and
//! cylinder weights, and the ergodic-approximation dichotomy.
//!
//! A [`MarkovMeasure`] of depth `d` is a stationary Markov chain on the
//! admissible `d`-words of an SFT, moving by single-symbol overlap steps.
//! Depth 1 with a product transition row recovers Bernoulli measures; higher
//! depths realize every finite-memory invariant measure.

use std::collections::VecDeque;

use crate::linalg;
use crate::sft::{Potential, Sft, Word};
use crate::{Error, Result};

/// Row-sum, stationarity and support invariants are enforced to this
/// absolute tolerance at construction time.
pub const MEASURE_TOL: f64 = 1e-12;

/// A stationary finite-memory Markov measure on an SFT.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MarkovMeasure {
    depth: usize,
    states: Vec<Word>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

/// Certificate that no ergodic measure can approximate the input: the mass
/// split across irreducible components is an obstruction in total variation.
#[derive(Clone, Debug, serde::Serialize)]
pub struct FailureCertificate {
    /// Lower bound on the distance from every ergodic measure; equals one
    /// minus the largest component mass.
    pub lower_bound: f64,
    /// Mass the measure places on each component, indexed like
    /// [`Sft::components`].
    pub component_masses: Vec<f64>,
    pub explanation: String,
}

/// Outcome of [`ergodic_approximation`].
#[derive(Clone, Debug)]
pub enum ErgodicApproximation {
    Measure(MarkovMeasure),
    Failure(FailureCertificate),
}

impl MarkovMeasure {
    /// Builds a measure from dense data indexed by the lexicographic order
    /// of admissible `depth`-words. Checks, to absolute tolerance 1e-12:
    /// rows are stochastic and supported on overlap moves, the stationary
    /// vector is a probability vector, and it is in fact stationary.
    pub fn new(
        sft: &Sft,
        depth: usize,
        transition: Vec<Vec<f64>>,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Input("measure depth must be positive".into()));
        }
        let states = sft.enumerate_words(depth)?;
        let n = states.len();
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::Input(format!(
                "transition matrix must be {n}x{n} over the admissible {depth}-words"
            )));
        }
        if stationary.len() != n {
            return Err(Error::Input(format!("stationary vector must have length {n}")));
        }
        for (i, row) in transition.iter().enumerate() {
            let mut sum = 0.0;
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < -MEASURE_TOL {
                    return Err(Error::Input(format!(
                        "transition[{:?}][{:?}] = {p} is not a probability",
                        states[i], states[j]
                    )));
                }
                if p > MEASURE_TOL && !overlap_move(sft, &states[i], &states[j]) {
                    return Err(Error::Input(format!(
                        "transition[{:?}][{:?}] = {p} charges a forbidden move",
                        states[i], states[j]
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > MEASURE_TOL {
                return Err(Error::Input(format!(
                    "transition row for {:?} sums to {sum}, expected 1",
                    states[i]
                )));
            }
        }
        let total: f64 = stationary.iter().sum();
        if stationary.iter().any(|&p| !p.is_finite() || p < -MEASURE_TOL) || (total - 1.0).abs() > MEASURE_TOL
        {
            return Err(Error::Input("stationary vector is not a probability vector".into()));
        }
        for j in 0..n {
            let inflow: f64 = (0..n).map(|i| stationary[i] * transition[i][j]).sum();
            if (inflow - stationary[j]).abs() > MEASURE_TOL {
                return Err(Error::Input(format!(
                    "vector is not stationary: inflow {inflow} vs mass {} at state {:?}",
                    stationary[j], states[j]
                )));
            }
        }
        let stationary = stationary.into_iter().map(|p| p.max(0.0)).collect();
        let transition = transition
            .into_iter()
            .map(|row| row.into_iter().map(|p| p.max(0.0)).collect())
            .collect();
        Ok(MarkovMeasure { depth, states, transition, stationary })
    }

    /// Builds the measure from a transition matrix alone, solving for the
    /// stationary vector.
    pub fn from_transition(sft: &Sft, depth: usize, transition: Vec<Vec<f64>>) -> Result<Self> {
        let stationary = linalg::stationary_distribution(&transition)?;
        MarkovMeasure::new(sft, depth, transition, stationary)
    }

    /// Product (Bernoulli) measure with the given symbol probabilities; the
    /// SFT must allow every move charged by the product.
    pub fn bernoulli(sft: &Sft, probs: &[f64]) -> Result<Self> {
        if probs.len() != sft.alphabet_size() {
            return Err(Error::Input(format!(
                "need {} symbol probabilities, got {}",
                sft.alphabet_size(),
                probs.len()
            )));
        }
        let n = probs.len();
        let transition = vec![probs.to_vec(); n];
        MarkovMeasure::new(sft, 1, transition, probs.to_vec())
    }

    /// The measure of maximal entropy on an irreducible SFT, as a depth-`d`
    /// chain (uniform cylinder distortion, rows proportional to the Perron
    /// right vector).
    pub fn parry(sft: &Sft, depth: usize) -> Result<Self> {
        if !sft.is_irreducible() {
            return Err(Error::Input(
                "maximal-entropy chain requires an irreducible shift".into(),
            ));
        }
        let states = sft.enumerate_words(depth)?;
        let n = states.len();
        let mut log_entries = vec![f64::NEG_INFINITY; n * n];
        let index = state_index(&states);
        for (i, u) in states.iter().enumerate() {
            for v in overlap_successors(sft, u) {
                let j = index[&v];
                log_entries[i * n + j] = 0.0;
            }
        }
        let pair = linalg::perron(&linalg::LogMatrix { n, log_entries: &log_entries })?;
        let lambda = pair.log_lambda.exp();
        let mut transition = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                if log_entries[i * n + j].is_finite() {
                    transition[i][j] = pair.right[j] / (lambda * pair.right[i]);
                }
            }
        }
        renormalize_rows(&mut transition);
        MarkovMeasure::from_transition(sft, depth, transition)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn states(&self) -> &[Word] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Kolmogorov-Sinai entropy: `−Σ_u π_u Σ_v P_uv log P_uv` (one symbol is
    /// emitted per move, so this is already per-symbol).
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for (pi, row) in self.stationary.iter().zip(&self.transition) {
            if *pi <= 0.0 {
                continue;
            }
            for &p in row {
                if p > 0.0 {
                    h -= pi * p * p.ln();
                }
            }
        }
        h
    }

    /// Probability of the cylinder set of words starting with `w`.
    pub fn cylinder_prob(&self, sft: &Sft, w: &[u8]) -> Result<f64> {
        if w.is_empty() {
            return Ok(1.0);
        }
        if !sft.is_admissible(w) {
            return Err(Error::Input(format!("word {w:?} is not admissible")));
        }
        let d = self.depth;
        if w.len() <= d {
            // Marginal of the stationary distribution over states with this
            // prefix; stationarity makes the value position-independent.
            let mut mass = 0.0;
            for (u, pi) in self.states.iter().zip(&self.stationary) {
                if u[..w.len()] == *w {
                    mass += pi;
                }
            }
            return Ok(mass);
        }
        let index = state_index(&self.states);
        let mut p = self.stationary[index[&w[..d].to_vec()]];
        for i in 0..w.len() - d {
            if p == 0.0 {
                return Ok(0.0);
            }
            let from = index[&w[i..i + d].to_vec()];
            let to = index[&w[i + 1..i + 1 + d].to_vec()];
            p *= self.transition[from][to];
        }
        Ok(p)
    }

    /// Integral of a locally constant potential: `Σ_w μ([w]) f(w)` over
    /// admissible words at the potential's depth.
    pub fn expectation(&self, sft: &Sft, f: &Potential) -> Result<f64> {
        let mut acc = 0.0;
        let mut failed: Option<Error> = None;
        sft.for_each_word(f.depth(), |w| {
            if failed.is_some() {
                return;
            }
            match self.cylinder_prob(sft, w) {
                Ok(p) => {
                    if p > 0.0 {
                        acc += p * f.value(w).expect("potential is total");
                    }
                }
                Err(e) => failed = Some(e),
            }
        });
        match failed {
            Some(e) => Err(e),
            None => Ok(acc),
        }
    }

    /// Higher-block recoding to a deeper memory. Entropy and all cylinder
    /// probabilities are invariant under this representation change.
    pub fn lift_to_depth(&self, sft: &Sft, new_depth: usize) -> Result<Self> {
        if new_depth < self.depth {
            return Err(Error::Input(format!(
                "cannot lower measure depth {} to {}",
                self.depth, new_depth
            )));
        }
        if new_depth == self.depth {
            return Ok(self.clone());
        }
        let states = sft.enumerate_words(new_depth)?;
        let n = states.len();
        let index = state_index(&self.states);
        let mut stationary = Vec::with_capacity(n);
        for w in &states {
            stationary.push(self.cylinder_prob(sft, w)?);
        }
        let mut transition = vec![vec![0.0f64; n]; n];
        let new_index = state_index(&states);
        for (i, u) in states.iter().enumerate() {
            // Conditional law of the next symbol given the last `depth`
            // symbols of u.
            let tail = index[&u[new_depth - self.depth..].to_vec()];
            let mut row_sum = 0.0;
            for v in overlap_successors(sft, u) {
                let to_tail = index[&v[new_depth - self.depth..].to_vec()];
                let p = self.transition[tail][to_tail];
                transition[i][new_index[&v]] = p;
                row_sum += p;
            }
            if (row_sum - 1.0).abs() > MEASURE_TOL {
                // States the measure never visits may have incomplete
                // conditional rows; give them a harmless uniform row.
                if stationary[i] <= MEASURE_TOL {
                    let succ = overlap_successors(sft, u);
                    let u_row = 1.0 / succ.len() as f64;
                    for v in succ {
                        transition[i][new_index[&v]] = u_row;
                    }
                } else {
                    return Err(Error::Numerical(format!(
                        "conditional row at charged state {u:?} sums to {row_sum}"
                    )));
                }
            }
        }
        MarkovMeasure::new(sft, new_depth, transition, stationary)
    }

    /// Largest absolute difference between transition entries, after both
    /// measures are lifted to a common depth.
    pub fn transition_sup_distance(&self, sft: &Sft, other: &MarkovMeasure) -> Result<f64> {
        let d = self.depth.max(other.depth);
        let a = self.lift_to_depth(sft, d)?;
        let b = other.lift_to_depth(sft, d)?;
        let mut worst = 0.0f64;
        for (ra, rb) in a.transition.iter().zip(&b.transition) {
            for (&x, &y) in ra.iter().zip(rb) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }

    /// Largest absolute cylinder-probability difference at the given word
    /// length.
    pub fn cylinder_distance(&self, sft: &Sft, other: &MarkovMeasure, len: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut failed: Option<Error> = None;
        sft.for_each_word(len, |w| {
            if failed.is_some() {
                return;
            }
            match (self.cylinder_prob(sft, w), other.cylinder_prob(sft, w)) {
                (Ok(a), Ok(b)) => worst = worst.max((a - b).abs()),
                (Err(e), _) | (_, Err(e)) => failed = Some(e),
            }
        });
        match failed {
            Some(e) => Err(e),
            None => Ok(worst),
        }
    }

    /// True iff the support chain (charged states and positive-probability
    /// moves between them) is strongly connected; irreducible stationary
    /// chains are ergodic for the shift.
    pub fn is_ergodic(&self) -> bool {
        let charged: Vec<usize> =
            (0..self.states.len()).filter(|&i| self.stationary[i] > 1e-13).collect();
        if charged.is_empty() {
            return false;
        }
        let pos = |i: usize| charged.iter().position(|&c| c == i);
        // BFS both ways from the first charged state over the support graph.
        let reach = |forward: bool| -> usize {
            let mut seen = vec![false; charged.len()];
            let mut queue = VecDeque::new();
            seen[0] = true;
            queue.push_back(charged[0]);
            let mut count = 1;
            while let Some(u) = queue.pop_front() {
                for &v in &charged {
                    let p = if forward { self.transition[u][v] } else { self.transition[v][u] };
                    let vi = pos(v).unwrap();
                    if p > 1e-13 && !seen[vi] {
                        seen[vi] = true;
                        count += 1;
                        queue.push_back(v);
                    }
                }
            }
            count
        };
        reach(true) == charged.len() && reach(false) == charged.len()
    }

    /// Mass per SFT component. Charged states never straddle components
    /// (stationarity forces mass to recur), so the component of the first
    /// symbol is well-defined.
    pub fn component_masses(&self, sft: &Sft) -> Vec<f64> {
        let mut masses = vec![0.0f64; sft.components().len()];
        for (u, &pi) in self.states.iter().zip(&self.stationary) {
            masses[sft.component_of(u[0])] += pi;
        }
        masses
    }

    /// Convex mixture of measures living on the two blocks of a disjoint
    /// union: `lambda` times `left` plus `1 − lambda` times `right` (whose
    /// symbols are shifted up by the left alphabet size).
    pub fn disjoint_mixture(
        union: &Sft,
        left_sft: &Sft,
        left: &MarkovMeasure,
        right_sft: &Sft,
        right: &MarkovMeasure,
        lambda: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Input(format!("mixture weight {lambda} outside [0,1]")));
        }
        let d = left.depth.max(right.depth);
        let a = left.lift_to_depth(left_sft, d)?;
        let b = right.lift_to_depth(right_sft, d)?;
        let shift = left_sft.alphabet_size() as u8;
        let states = union.enumerate_words(d)?;
        let index = state_index(&states);
        let n = states.len();
        let mut transition = vec![vec![0.0f64; n]; n];
        let mut stationary = vec![0.0f64; n];
        for (i, u) in a.states.iter().enumerate() {
            let gi = index[u];
            stationary[gi] = lambda * a.stationary[i];
            for (j, v) in a.states.iter().enumerate() {
                transition[gi][index[v]] = a.transition[i][j];
            }
        }
        for (i, u) in b.states.iter().enumerate() {
            let shifted: Word = u.iter().map(|&s| s + shift).collect();
            let gi = index[&shifted];
            stationary[gi] = (1.0 - lambda) * b.stationary[i];
            for (j, v) in b.states.iter().enumerate() {
                let vs: Word = v.iter().map(|&s| s + shift).collect();
                transition[gi][index[&vs]] = b.transition[i][j];
            }
        }
        MarkovMeasure::new(union, d, transition, stationary)
    }
}

/// Either an ergodic measure close to `mu`, or a certificate that no
/// ergodic measure is close.
///
/// On an irreducible SFT the answer is the `eps`-convex mix of `mu`'s
/// transition matrix with the maximal-entropy chain on the same state
/// graph: fully supported, hence irreducible and ergodic, with cylinder and
/// entropy deviations of order `eps`. On a reducible SFT, mass split across
/// two or more components is unfixable: every ergodic measure lives in one
/// component, so the distance to `mu` is at least one minus the largest
/// component mass.
pub fn ergodic_approximation(
    sft: &Sft,
    mu: &MarkovMeasure,
    eps: f64,
) -> Result<ErgodicApproximation> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Input(format!("mixing weight {eps} outside (0,1)")));
    }
    let masses = mu.component_masses(sft);
    let charged: Vec<usize> =
        (0..masses.len()).filter(|&c| masses[c] > MEASURE_TOL).collect();
    if charged.len() >= 2 {
        let max_mass = masses.iter().copied().fold(0.0f64, f64::max);
        return Ok(ErgodicApproximation::Failure(FailureCertificate {
            lower_bound: 1.0 - max_mass,
            component_masses: masses,
            explanation: "every ergodic measure puts full mass on a single irreducible \
                          component, so the mass outside the heaviest charged component is a \
                          total-variation obstruction"
                .into(),
        }));
    }
    if sft.is_irreducible() {
        return Ok(ErgodicApproximation::Measure(mix_with_parry(sft, mu, eps)?));
    }
    // Reducible but only one charged component: approximate inside that
    // component's irreducible sub-shift, then extend by zero mass.
    let comp = &sft.components()[charged[0]];
    let (sub, to_sub) = restrict_symbols(sft, &comp.symbols);
    let sub_mu = restrict_measure(mu, &sub, &to_sub)?;
    let mixed = mix_with_parry(&sub, &sub_mu, eps)?;
    let extended = extend_from_component(sft, &mixed, &comp.symbols)?;
    Ok(ErgodicApproximation::Measure(extended))
}

fn mix_with_parry(sft: &Sft, mu: &MarkovMeasure, eps: f64) -> Result<MarkovMeasure> {
    let parry = MarkovMeasure::parry(sft, mu.depth())?;
    let n = mu.states.len();
    let mut transition = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            transition[i][j] = (1.0 - eps) * mu.transition[i][j] + eps * parry.transition[i][j];
        }
    }
    renormalize_rows(&mut transition);
    MarkovMeasure::from_transition(sft, mu.depth(), transition)
}

/// Sub-SFT induced by a symbol subset, plus the old-to-new symbol map.
pub(crate) fn restrict_symbols(sft: &Sft, symbols: &[u8]) -> (Sft, Vec<Option<u8>>) {
    let mut to_sub = vec![None; sft.alphabet_size()];
    for (new, &old) in symbols.iter().enumerate() {
        to_sub[old as usize] = Some(new as u8);
    }
    let k = symbols.len();
    let mut t = vec![vec![0u8; k]; k];
    for (i, &a) in symbols.iter().enumerate() {
        for (j, &b) in symbols.iter().enumerate() {
            t[i][j] = u8::from(sft.is_allowed(a, b));
        }
    }
    (Sft::new(k, t).expect("component sub-shift is valid"), to_sub)
}

fn restrict_measure(
    mu: &MarkovMeasure,
    sub: &Sft,
    to_sub: &[Option<u8>],
) -> Result<MarkovMeasure> {
    let d = mu.depth();
    let sub_states = sub.enumerate_words(d)?;
    let sub_index = state_index(&sub_states);
    let n = sub_states.len();
    let mut transition = vec![vec![0.0f64; n]; n];
    let mut stationary = vec![0.0f64; n];
    let map_word = |w: &Word| -> Option<Word> {
        w.iter().map(|&s| to_sub[s as usize]).collect::<Option<Word>>()
    };
    for (i, u) in mu.states.iter().enumerate() {
        let Some(su) = map_word(u) else { continue };
        let Some(&si) = sub_index.get(&su) else { continue };
        stationary[si] = mu.stationary[i];
        for (j, v) in mu.states.iter().enumerate() {
            if mu.transition[i][j] > 0.0 {
                if let Some(sv) = map_word(v) {
                    if let Some(&sj) = sub_index.get(&sv) {
                        transition[si][sj] = mu.transition[i][j];
                    }
                }
            }
        }
    }
    renormalize_rows(&mut transition);
    let total: f64 = stationary.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("restricted measure has no mass".into()));
    }
    for p in stationary.iter_mut() {
        *p /= total;
    }
    MarkovMeasure::new(sub, d, transition, stationary)
}

/// Re-embeds a measure on a component sub-shift (expressed in the
/// sub-shift's own symbols) into the full shift, with zero mass elsewhere.
pub(crate) fn extend_from_component(
    sft: &Sft,
    mu: &MarkovMeasure,
    symbols: &[u8],
) -> Result<MarkovMeasure> {
    let d = mu.depth();
    let states = sft.enumerate_words(d)?;
    let index = state_index(&states);
    let n = states.len();
    let mut transition = vec![vec![0.0f64; n]; n];
    let mut stationary = vec![0.0f64; n];
    for (i, u) in mu.states.iter().enumerate() {
        let full: Word = u.iter().map(|&s| symbols[s as usize]).collect();
        let gi = index[&full];
        stationary[gi] = mu.stationary[i];
        for (j, v) in mu.states.iter().enumerate() {
            if mu.transition[i][j] > 0.0 {
                let fv: Word = v.iter().map(|&s| symbols[s as usize]).collect();
                transition[gi][index[&fv]] = mu.transition[i][j];
            }
        }
    }
    // Uncharged states get uniform rows over their allowed moves so the
    // matrix stays stochastic without affecting the measure.
    for (i, u) in states.iter().enumerate() {
        if transition[i].iter().sum::<f64>() <= MEASURE_TOL {
            let succ = overlap_successors(sft, u);
            let p = 1.0 / succ.len() as f64;
            for v in succ {
                transition[i][index[&v]] = p;
            }
        }
    }
    MarkovMeasure::new(sft, d, transition, stationary)
}

/// Single-symbol overlap move between two equal-length admissible words.
fn overlap_move(sft: &Sft, u: &[u8], v: &[u8]) -> bool {
    let d = u.len();
    if d == 1 {
        return sft.is_allowed(u[0], v[0]);
    }
    u[1..] == v[..d - 1] && sft.is_allowed(u[d - 1], v[d - 1])
}

/// All states reachable from `u` by one overlap move.
fn overlap_successors(sft: &Sft, u: &[u8]) -> Vec<Word> {
    let d = u.len();
    sft.successors(u[d - 1])
        .iter()
        .map(|&s| {
            let mut v: Word = u[1..].to_vec();
            v.push(s);
            v
        })
        .collect()
}

pub(crate) fn state_index(states: &[Word]) -> std::collections::BTreeMap<Word, usize> {
    states.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect()
}

pub(crate) fn renormalize_rows(rows: &mut [Vec<f64>]) {
    for row in rows {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            for p in row.iter_mut() {
                *p /= s;
            }
        }
    }
}
