//! Weighted empirical laws at finite word length, the finite-n log-moment
//! identity, ball probabilities by two independent routes, and the
//! slope-fit audit of the large-deviation rate.

use std::collections::HashMap;

use serde::Serialize;

use crate::convex::ExtReal;
use crate::pressure::{self, TransferMatrix};
use crate::rate::RateFunctionHandle;
use crate::sft::{Potential, Sft, Word};
use crate::{exec, Error, Result};

/// Materialized law masses must sum to 1 within this.
pub const LAW_MASS_TOL: f64 = 1e-12;
/// Enumeration and DP ball probabilities must agree within this.
pub const ROUTE_AGREE_TOL: f64 = 1e-9;
/// Largest word count the exact enumeration route will walk (2^22).
pub const ENUM_WORD_CAP: u128 = 4_194_304;
/// Largest live cell count for the quantized dynamic program.
pub const DP_CELL_CAP: usize = 5_000_000;

/// The weighted empirical law at length `n`: each admissible `n`-word `w`
/// carries weight `exp(S_n f(w))`, normalized; Birkhoff sums are cyclic.
#[derive(Clone, Debug)]
pub struct EmpiricalLaw {
    sft: Sft,
    f: Potential,
    n: usize,
}

impl EmpiricalLaw {
    pub fn new(sft: &Sft, f: &Potential, n: usize) -> Result<Self> {
        if n < f.depth() {
            return Err(Error::Input(format!(
                "law length {n} is shorter than the potential depth {}",
                f.depth()
            )));
        }
        Ok(EmpiricalLaw { sft: sft.clone(), f: f.clone(), n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &Potential {
        &self.f
    }

    pub fn sft(&self) -> &Sft {
        &self.sft
    }

    /// Materializes `(word, normalized weight)` pairs in lexicographic
    /// order. Guarded by the enumeration cap.
    pub fn support(&self) -> Result<Vec<(Word, f64)>> {
        let count = self.sft.count_words(self.n);
        if count > ENUM_WORD_CAP {
            return Err(Error::Resource(format!(
                "{count} words of length {} exceed the enumeration cap {ENUM_WORD_CAP}",
                self.n
            )));
        }
        let mut items: Vec<(Word, f64)> = Vec::with_capacity(count as usize);
        let mut err = None;
        self.sft.for_each_word(self.n, |w| {
            if err.is_some() {
                return;
            }
            match self.f.birkhoff_sum(&self.sft, w) {
                Ok(s) => items.push((w.to_vec(), s)),
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let z = crate::linalg::log_sum_exp(
            &items.iter().map(|(_, s)| *s).collect::<Vec<f64>>(),
        );
        for (_, s) in items.iter_mut() {
            *s = (*s - z).exp();
        }
        Ok(items)
    }
}

/// Route taken by a ball-probability computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BallRoute {
    Enumeration,
    QuantizedDp,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallProbability {
    /// `(1/n)·log` of the ball's normalized weight; `None` flags an empty
    /// ball (log-probability −∞).
    pub value: Option<f64>,
    pub route: BallRoute,
    /// Half-width of the worst-case perturbation of a pushforward
    /// coordinate introduced by sum quantization (zero on the exact route).
    pub quantization_bound: f64,
}

/// The law on ℝ^d of the normalized Birkhoff vector
/// `((1/n)S_n f_1, …, (1/n)S_n f_d)` under an [`EmpiricalLaw`].
#[derive(Clone, Debug)]
pub struct PushforwardLaw {
    law: EmpiricalLaw,
    directions: Vec<Potential>,
}

impl PushforwardLaw {
    pub fn new(law: EmpiricalLaw, directions: &[Potential]) -> Result<Self> {
        for d in directions {
            if d.depth() > law.n {
                return Err(Error::Input(format!(
                    "direction depth {} exceeds the law length {}",
                    d.depth(),
                    law.n
                )));
            }
        }
        Ok(PushforwardLaw { law, directions: directions.to_vec() })
    }

    pub fn law(&self) -> &EmpiricalLaw {
        &self.law
    }

    pub fn directions(&self) -> &[Potential] {
        &self.directions
    }

    /// Materialized `(point, weight)` support, word order matching
    /// [`EmpiricalLaw::support`].
    pub fn support(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        let words = self.law.support()?;
        let n = self.law.n as f64;
        let mut out = Vec::with_capacity(words.len());
        for (w, weight) in words {
            let mut point = Vec::with_capacity(self.directions.len());
            for d in &self.directions {
                point.push(d.birkhoff_sum(&self.law.sft, &w)? / n);
            }
            out.push((point, weight));
        }
        Ok(out)
    }

    /// `(1/n)·log` of the total weight of words whose pushforward lies in
    /// the closed sup-ball `B(x, delta)`. Picks the exact enumeration when
    /// the word count allows it and the quantized dynamic program beyond.
    pub fn ball_log_probability(&self, x: &[f64], delta: f64) -> Result<BallProbability> {
        let route = if self.law.sft.count_words(self.law.n) <= ENUM_WORD_CAP {
            BallRoute::Enumeration
        } else {
            BallRoute::QuantizedDp
        };
        self.ball_log_probability_via(x, delta, route)
    }

    /// Same, with the route forced; the two routes must agree within
    /// [`ROUTE_AGREE_TOL`] wherever both run.
    pub fn ball_log_probability_via(
        &self,
        x: &[f64],
        delta: f64,
        route: BallRoute,
    ) -> Result<BallProbability> {
        if x.len() != self.directions.len() {
            return Err(Error::Input(format!(
                "expected {} center coordinates, got {}",
                self.directions.len(),
                x.len()
            )));
        }
        if !(delta >= 0.0) {
            return Err(Error::Input(format!("negative ball radius {delta}")));
        }
        match route {
            BallRoute::Enumeration => self.ball_by_enumeration(x, delta),
            BallRoute::QuantizedDp => self.ball_by_dp(x, delta),
        }
    }

    fn ball_by_enumeration(&self, x: &[f64], delta: f64) -> Result<BallProbability> {
        let count = self.law.sft.count_words(self.law.n);
        if count > ENUM_WORD_CAP {
            return Err(Error::Resource(format!(
                "{count} words of length {} exceed the enumeration cap {ENUM_WORD_CAP}",
                self.law.n
            )));
        }
        let n = self.law.n;
        let nf = n as f64;
        let mut total = LogAccumulator::new();
        let mut ball = LogAccumulator::new();
        let mut err: Option<Error> = None;
        self.law.sft.for_each_word(n, |w| {
            if err.is_some() {
                return;
            }
            let logw = match self.law.f.birkhoff_sum(&self.law.sft, w) {
                Ok(s) => s,
                Err(e) => {
                    err = Some(e);
                    return;
                }
            };
            total.add(logw);
            let mut inside = true;
            for (d, &xj) in self.directions.iter().zip(x) {
                let y = match d.birkhoff_sum(&self.law.sft, w) {
                    Ok(s) => s / nf,
                    Err(e) => {
                        err = Some(e);
                        return;
                    }
                };
                if (y - xj).abs() > delta + 1e-12 {
                    inside = false;
                    break;
                }
            }
            if inside {
                ball.add(logw);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let value = ball.log_total().map(|b| (b - total.log_total().unwrap()) / nf);
        Ok(BallProbability { value, route: BallRoute::Enumeration, quantization_bound: 0.0 })
    }

    /// Dynamic program over `(initial prefix, current state, quantized
    /// direction sums)`. Base-potential weights accumulate exactly; only
    /// the direction sums are quantized, with step `delta/(8n)`. Cyclic
    /// wrap windows are added at readout from the (initial, final) state
    /// pair, so the result matches the enumeration route's cyclic sums.
    fn ball_by_dp(&self, x: &[f64], delta: f64) -> Result<BallProbability> {
        if delta <= 0.0 {
            return Err(Error::Input(
                "the quantized route needs a positive ball radius".into(),
            ));
        }
        let sft = &self.law.sft;
        let n = self.law.n;
        let nf = n as f64;
        let d = self.directions.len();
        let k_max = self
            .directions
            .iter()
            .map(|p| p.depth())
            .chain(std::iter::once(self.law.f.depth()))
            .max()
            .unwrap_or(1);
        let m = k_max.saturating_sub(1).max(1);
        if n < m + 1 {
            // Too short for the state walk: fall back to enumeration.
            return self.ball_by_enumeration(x, delta);
        }
        let h = delta / (8.0 * nf);
        let states = sft.enumerate_words_capped(m, pressure::STATE_CAP)?;
        let index = crate::measure::state_index(&states);
        let s_count = states.len();
        // Edge data: target state, base weight, direction increments.
        let mut edges: Vec<Vec<(usize, f64, Vec<f64>)>> = Vec::with_capacity(s_count);
        for u in &states {
            let mut out = Vec::new();
            for &sym in sft.successors(u[m - 1]) {
                let mut ext: Word = u.clone();
                ext.push(sym);
                if m > 1 && !sft.is_admissible(&ext) {
                    continue;
                }
                let v: Word = ext[1..].to_vec();
                let Some(&vi) = index.get(&v) else { continue };
                let base_w = self.law.f.value(&ext[..self.law.f.depth()]).unwrap_or(0.0);
                let incs: Vec<f64> = self
                    .directions
                    .iter()
                    .map(|p| p.value(&ext[..p.depth()]).unwrap_or(0.0))
                    .collect();
                out.push((vi, base_w, incs));
            }
            edges.push(out);
        }
        // Key: (init state, current state, quantized sums). Value: running
        // log-sum-exp of path weights.
        type Key = (u32, u32, Vec<i64>);
        let mut cells: HashMap<Key, f64> = HashMap::new();
        for i in 0..s_count {
            cells.insert((i as u32, i as u32, vec![0i64; d]), 0.0);
        }
        for _ in 0..n - m {
            let mut next: HashMap<Key, f64> = HashMap::with_capacity(cells.len());
            for ((init, cur, bins), logw) in cells.iter() {
                for (vi, base_w, incs) in &edges[*cur as usize] {
                    let mut nb = bins.clone();
                    for (bj, inc) in nb.iter_mut().zip(incs) {
                        *bj += (inc / h).round() as i64;
                    }
                    let key = (*init, *vi as u32, nb);
                    let lw = logw + base_w;
                    next.entry(key)
                        .and_modify(|acc| *acc = log_add(*acc, lw))
                        .or_insert(lw);
                }
            }
            if next.len() > DP_CELL_CAP {
                return Err(Error::Resource(format!(
                    "{} live cells exceed the dynamic-program cap {DP_CELL_CAP}",
                    next.len()
                )));
            }
            cells = next;
        }
        // Readout: add wrap and trailing-window corrections determined by
        // the (initial, final) state pair, then test the ball.
        let mut total = LogAccumulator::new();
        let mut ball = LogAccumulator::new();
        let mut corrections: HashMap<(u32, u32), (f64, Vec<f64>)> = HashMap::new();
        for ((init, cur, bins), logw) in cells.iter() {
            let (wrap_f, wrap_dirs) = corrections
                .entry((*init, *cur))
                .or_insert_with(|| {
                    let p = &states[*init as usize];
                    let q = &states[*cur as usize];
                    let wf = closing_windows(sft, &self.law.f, q, p);
                    let wd: Vec<f64> = self
                        .directions
                        .iter()
                        .map(|dir| closing_windows(sft, dir, q, p))
                        .collect();
                    (wf, wd)
                })
                .clone();
            let lw = logw + wrap_f;
            total.add(lw);
            let mut inside = true;
            for j in 0..d {
                let y = (bins[j] as f64 * h + wrap_dirs[j]) / nf;
                if (y - x[j]).abs() > delta + 1e-12 {
                    inside = false;
                    break;
                }
            }
            if inside {
                ball.add(lw);
            }
        }
        let value = ball.log_total().map(|b| (b - total.log_total().unwrap()) / nf);
        Ok(BallProbability {
            value,
            route: BallRoute::QuantizedDp,
            // Each of ≤ n increments rounds by ≤ h/2; the pushforward
            // coordinate moves by at most h/2 = delta/(16n) after the 1/n.
            quantization_bound: 0.5 * h,
        })
    }
}

/// Sum of the windows a linear state walk cannot see: trailing windows
/// inside the final state `q` and cyclic wrap windows joining `q` to the
/// initial prefix `p`. Inadmissible wrap windows contribute 0, matching
/// the cyclic Birkhoff convention.
fn closing_windows(sft: &Sft, pot: &Potential, q: &[u8], p: &[u8]) -> f64 {
    let k = pot.depth();
    let m = q.len();
    let mut acc = 0.0;
    // Trailing linear windows fully inside q (none when k = m + 1).
    if k <= m {
        for t in 0..=m - k {
            if let Some(v) = pot.value(&q[t..t + k]) {
                acc += v;
            }
        }
    }
    // Wrap windows use the tail of q and the head of p.
    if k >= 2 {
        let mut window: Word = Vec::with_capacity(k);
        for t in m + 1 - k..m {
            window.clear();
            window.extend_from_slice(&q[t..]);
            window.extend_from_slice(&p[..k - (m - t)]);
            if sft.is_admissible(&window) {
                if let Some(v) = pot.value(&window) {
                    acc += v;
                }
            }
        }
    }
    acc
}

/// Streaming log-sum-exp.
struct LogAccumulator {
    max: f64,
    sum: f64,
    any: bool,
}

impl LogAccumulator {
    fn new() -> Self {
        LogAccumulator { max: f64::NEG_INFINITY, sum: 0.0, any: false }
    }

    fn add(&mut self, lw: f64) {
        if !self.any {
            self.max = lw;
            self.sum = 1.0;
            self.any = true;
        } else if lw <= self.max {
            self.sum += (lw - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - lw).exp() + 1.0;
            self.max = lw;
        }
    }

    fn log_total(&self) -> Option<f64> {
        if self.any {
            Some(self.max + self.sum.ln())
        } else {
            None
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `(1/n)·[log(𝟙ᵀ M_{f+g}ⁿ 𝟙) − log(𝟙ᵀ M_fⁿ 𝟙)]` by scaled transfer-matrix
/// powers; converges to `P(f+g) − P(f)` with an `O(1/n)` gap.
pub fn finite_n_mgf(sft: &Sft, f: &Potential, g: &Potential, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Input("word length must be positive".into()));
    }
    let sum = Potential::linear_combination(sft, &[(1.0, f), (1.0, g)])?;
    let log_num = log_ones_power_ones(sft, &sum, n)?;
    let log_den = log_ones_power_ones(sft, f, n)?;
    Ok((log_num - log_den) / n as f64)
}

/// `log(𝟙ᵀ Mⁿ 𝟙)` for the transfer matrix of `f`, by `n` scaled
/// vector multiplications (no overflow at any entry scale).
fn log_ones_power_ones(sft: &Sft, f: &Potential, n: usize) -> Result<f64> {
    let tm = TransferMatrix::new(sft, f)?;
    let m = tm.states().len();
    let c = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| tm.log_entry(i, j))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !c.is_finite() {
        return Err(Error::Input("transfer matrix has no admissible moves".into()));
    }
    let scaled: Vec<f64> = (0..m * m)
        .map(|idx| {
            let v = tm.log_entry(idx / m, idx % m);
            if v.is_finite() {
                (v - c).exp()
            } else {
                0.0
            }
        })
        .collect();
    let mut v = vec![1.0f64; m];
    let mut log_scale = 0.0f64;
    for _ in 0..n {
        let w = exec::map_range(m, |i| {
            let row = &scaled[i * m..(i + 1) * m];
            row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
        });
        let mx = w.iter().copied().fold(0.0f64, f64::max);
        if !(mx > 0.0) {
            return Err(Error::Numerical("transfer power annihilated the ones vector".into()));
        }
        v = w.into_iter().map(|x| x / mx).collect();
        log_scale += mx.ln();
    }
    let total: f64 = v.iter().sum();
    Ok(total.ln() + log_scale + c * n as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct GartnerRow {
    pub n: usize,
    pub x: Vec<f64>,
    /// `−ball_log_probability` at this (n, x).
    pub empirical: Option<f64>,
    /// `inf over B(x, delta)` of the dual rate.
    pub predicted: ExtReal,
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GartnerFit {
    pub x: Vec<f64>,
    /// Rate estimate extrapolated from the last three schedule points.
    pub estimate: Option<f64>,
    pub predicted: ExtReal,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GartnerReport {
    /// Unique equilibrium state for the tilted base; when false the rate
    /// comparison is reported for diagnosis but cannot pass.
    pub hypothesis_ok: bool,
    pub rows: Vec<GartnerRow>,
    pub fits: Vec<GartnerFit>,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    /// Max sampled dual-maximizer norm: the Lipschitz scale of the rate on
    /// the grid, which sets the delta part of the tolerance.
    pub lipschitz: f64,
    pub pass: bool,
}

impl GartnerReport {
    /// CSV rows `n, x…, empirical, predicted, gap`.
    pub fn to_csv(&self) -> String {
        let dims = self.rows.first().map_or(0, |r| r.x.len());
        let mut out = String::from("n,");
        for k in 0..dims {
            out.push_str(&format!("x{k},"));
        }
        out.push_str("empirical,predicted,gap\n");
        for row in &self.rows {
            out.push_str(&format!("{},", row.n));
            for v in &row.x {
                out.push_str(&format!("{v:.16e},"));
            }
            match row.empirical {
                Some(e) => out.push_str(&format!("{e:.16e},")),
                None => out.push_str("inf,"),
            }
            match row.predicted {
                ExtReal::Finite(p) => out.push_str(&format!("{p:.16e},")),
                ExtReal::PlusInf => out.push_str("inf,"),
            }
            match row.gap {
                Some(g) => out.push_str(&format!("{g:.16e}\n")),
                None => out.push_str("inf\n"),
            }
        }
        out
    }
}

/// Slope-fit audit of the level-1 LDP along the canonical sequence.
///
/// For each grid point the ball log-probabilities over `n_schedule` are
/// extrapolated to `n = ∞` by least squares of value against `1/n` over the
/// last three schedule points (killing the `O(1/n)` surface term), and the
/// negated intercept is compared with `inf_{B(x,delta)} I` from the dual
/// route. The tolerance is `L_lip·delta + 10·log(n_max)/n_max`. The Gärtner
/// hypothesis (unique equilibrium for `f+g`) is checked first; on failure
/// the deviations are still measured but the audit cannot pass.
pub fn gartner_audit(
    sft: &Sft,
    f: &Potential,
    g: &Potential,
    directions: &[Potential],
    n_schedule: &[usize],
    x_grid: &[Vec<f64>],
    delta: f64,
) -> Result<GartnerReport> {
    if n_schedule.len() < 3 {
        return Err(Error::Input("the schedule needs at least three lengths".into()));
    }
    let mut schedule = n_schedule.to_vec();
    schedule.sort_unstable();
    let tilted = Potential::linear_combination(sft, &[(1.0, f), (1.0, g)])?;
    let hypothesis_ok = pressure::pressure_spectral(sft, &tilted)?.unique;
    let handle = RateFunctionHandle::new(sft, &tilted, directions)?;

    // Lipschitz scale: max dual-maximizer norm over the grid.
    let mut lipschitz = 0.0f64;
    let mut predicted: Vec<ExtReal> = Vec::with_capacity(x_grid.len());
    for x in x_grid {
        let inf = min_rate_over_ball(&handle, x, delta)?;
        predicted.push(inf);
        let conj = handle.dual(x)?;
        if let Some(t) = conj.maximizer {
            let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            lipschitz = lipschitz.max(norm);
        }
    }

    // Ball values, parallel over (x, n) pairs.
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for xi in 0..x_grid.len() {
        for &n in &schedule {
            jobs.push((xi, n));
        }
    }
    let values = exec::map_slice(&jobs, |&(xi, n)| -> Result<Option<f64>> {
        let law = EmpiricalLaw::new(sft, &tilted, n)?;
        let pf = PushforwardLaw::new(law, directions)?;
        Ok(pf.ball_log_probability(&x_grid[xi], delta)?.value)
    });
    let mut by_job: HashMap<(usize, usize), Option<f64>> = HashMap::new();
    for (job, value) in jobs.iter().zip(values) {
        by_job.insert(*job, value?);
    }

    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut max_discrepancy = 0.0f64;
    for (xi, x) in x_grid.iter().enumerate() {
        for &n in &schedule {
            let value = by_job[&(xi, n)];
            let empirical = value.map(|v| -v);
            let gap = match (empirical, predicted[xi]) {
                (Some(e), ExtReal::Finite(p)) => Some(e - p),
                _ => None,
            };
            rows.push(GartnerRow { n, x: x.clone(), empirical, predicted: predicted[xi], gap });
        }
        let tail = &schedule[schedule.len() - 3..];
        let pts: Vec<(f64, f64)> = tail
            .iter()
            .filter_map(|&n| by_job[&(xi, n)].map(|v| (1.0 / n as f64, v)))
            .collect();
        let estimate = if pts.len() == 3 {
            Some(-intercept_of_line(&pts))
        } else {
            None
        };
        let discrepancy = match (estimate, predicted[xi]) {
            (Some(e), ExtReal::Finite(p)) => (e - p).abs(),
            (None, ExtReal::PlusInf) => 0.0,
            _ => f64::INFINITY,
        };
        max_discrepancy = max_discrepancy.max(discrepancy);
        fits.push(GartnerFit { x: x.clone(), estimate, predicted: predicted[xi], discrepancy });
    }
    let n_max = *schedule.last().expect("schedule nonempty") as f64;
    let tolerance = lipschitz * delta + 10.0 * n_max.ln() / n_max;
    let pass = hypothesis_ok && max_discrepancy <= tolerance;
    Ok(GartnerReport {
        hypothesis_ok,
        rows,
        fits,
        max_discrepancy,
        tolerance,
        lipschitz,
        pass,
    })
}

/// Least-squares intercept of a line through `(u, v)` points at `u = 0`.
fn intercept_of_line(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let su: f64 = pts.iter().map(|p| p.0).sum();
    let sv: f64 = pts.iter().map(|p| p.1).sum();
    let suu: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let suv: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * suu - su * su;
    if det.abs() < 1e-30 {
        return sv / n;
    }
    let slope = (n * suv - su * sv) / det;
    (sv - slope * su) / n
}

/// `inf over the closed sup-ball B(x, delta)` of the dual rate, by
/// box-projected gradient descent with the dual maximizer as gradient.
pub fn min_rate_over_ball(
    handle: &RateFunctionHandle,
    x: &[f64],
    delta: f64,
) -> Result<ExtReal> {
    let d = x.len();
    let clamp = |y: &mut [f64]| {
        for j in 0..d {
            y[j] = y[j].clamp(x[j] - delta, x[j] + delta);
        }
    };
    // Start at the box projection of the LLN mean: for smooth rates that is
    // already the minimizer.
    let mut start = match handle.log_mgf().grad(&vec![0.0; d])? {
        crate::convex::GradOutcome::Gradient(g) => g,
        crate::convex::GradOutcome::Kink(w) => {
            // Any extreme mean works as a start; descent does the rest.
            w.extreme_gradients[0].clone()
        }
    };
    clamp(&mut start);
    let mut y = start;
    let mut conj = handle.dual(&y)?;
    if conj.value.is_infinite() || conj.maximizer.is_none() {
        // The projected mean is outside the effective domain; try the
        // center before giving up.
        y = x.to_vec();
        conj = handle.dual(&y)?;
        if conj.value.is_infinite() || conj.maximizer.is_none() {
            return Ok(ExtReal::PlusInf);
        }
    }
    let mut best = conj.value.finite().expect("finite checked");
    for _ in 0..100 {
        let Some(t) = conj.maximizer.clone() else { break };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut cand: Vec<f64> = y.iter().zip(&t).map(|(a, g)| a - step * g).collect();
            clamp(&mut cand);
            let moved: f64 = cand.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
            if moved <= 1e-12 {
                break;
            }
            let trial = handle.dual(&cand)?;
            if let Some(v) = trial.value.finite() {
                if v < best - 1e-14 {
                    y = cand;
                    best = v;
                    conj = trial;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(ExtReal::Finite(best))
}
