//! Level-1 rate functions by two independent routes, the Legendre
//! conjugate of the log-moment map and direct penalized entropy
//! minimization over fixed-memory Markov chains, plus the level-2 rate
//! formula and the audit that the two routes agree.

use serde::Serialize;

use crate::convex::{self, ConjugateResult, ExtReal, LogMgf};
use crate::measure::MarkovMeasure;
use crate::pressure;
use crate::sft::{Potential, Sft, Word};
use crate::{exec, linalg, Error, Result};

/// Dual and primal evaluations must agree to this on interior points.
pub const DUALITY_TOL: f64 = 1e-6;
/// Constraint residual above this at the final penalty stage flags +∞.
pub const PRIMAL_RESIDUAL_TOL: f64 = 1e-6;
/// Penalty continuation schedule: ×10 per stage.
pub const PENALTY_START: f64 = 1e2;
pub const PENALTY_END: f64 = 1e8;
/// The primal solver handles at most this many mean constraints.
pub const MAX_CONSTRAINTS: usize = 4;
/// Midpoint convexity slack for the audit's dual-route check.
pub const CONVEXITY_TOL: f64 = 1e-9;

const PRIMAL_STATE_CAP: usize = 4096;
const STAGE_ITER_CAP: usize = 4_000;

/// `P(f) − h(μ) − μ(f)`: the level-2 rate of a Markov measure relative to
/// the base potential. Nonnegative, zero exactly on equilibrium states.
pub fn level2_rate(sft: &Sft, f: &Potential, mu: &MarkovMeasure) -> Result<f64> {
    let p = pressure::pressure_value(sft, f)?;
    Ok(p - mu.entropy() - mu.expectation(sft, f)?)
}

/// Level-1 rate function `I(x) = inf { level-2 rate of μ : μ(f_k) = x_k }`
/// with a dual evaluator (Legendre conjugate) and an independent primal
/// evaluator (penalized minimization over fixed-memory chains).
#[derive(Clone, Debug)]
pub struct RateFunctionHandle {
    lm: LogMgf,
    memory: usize,
}

/// Outcome of one primal minimization.
#[derive(Clone, Debug, Serialize)]
pub struct PrimalReport {
    pub value: ExtReal,
    /// Best feasible chain found; present even when the value is flagged
    /// +∞, for diagnostics.
    pub minimizer: Option<MarkovMeasure>,
    /// Sup-norm violation of the mean constraints at the minimizer.
    pub residual: f64,
    pub iterations: usize,
    pub stages: usize,
}

impl RateFunctionHandle {
    pub fn new(sft: &Sft, f: &Potential, directions: &[Potential]) -> Result<Self> {
        let lm = LogMgf::new(sft, f, directions)?;
        let memory = directions
            .iter()
            .map(|d| d.depth())
            .chain(std::iter::once(f.depth()))
            .max()
            .unwrap_or(1);
        Ok(RateFunctionHandle { lm, memory })
    }

    pub fn log_mgf(&self) -> &LogMgf {
        &self.lm
    }

    /// Chain memory used by the primal route: the maximal potential depth.
    /// The conditional-entropy maximizer with fixed depth-`k` marginals is
    /// Markov of memory `k − 1`, so this memory loses nothing.
    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn dual(&self, x: &[f64]) -> Result<ConjugateResult> {
        convex::legendre(&self.lm, x)
    }

    /// `I(x)` via the Legendre conjugate of the log-moment map.
    pub fn rate_dual(&self, x: &[f64]) -> Result<ExtReal> {
        Ok(self.dual(x)?.value)
    }

    /// `I(x)` by direct minimization of `P(f) − h(μ) − μ(f)` over Markov
    /// chains of the fixed memory with mean constraints `μ(f_k) = x_k`.
    ///
    /// The chain's stationary block and transition rows are both free
    /// parameters; stationarity and the mean constraints enter a quadratic
    /// penalty whose weight is continued from 10² to 10⁸ (×10 per stage),
    /// each stage solved by projected gradient with Barzilai-Borwein steps
    /// and a nonmonotone line search, warm-started from the previous stage.
    /// Keeping the stationary block explicit (rather than derived from the
    /// rows) is what lets reducible supports carry the non-ergodic mixtures
    /// that reducible unions require. The returned value is the exact
    /// level-2 rate of the reconstructed feasible chain; a mean residual
    /// above 10⁻⁶ after the final stage is reported as +∞.
    pub fn rate_primal(&self, x: &[f64]) -> Result<PrimalReport> {
        let n = self.lm.dims();
        if x.len() != n {
            return Err(Error::Input(format!(
                "expected {} constraint coordinates, got {}",
                n,
                x.len()
            )));
        }
        if n > MAX_CONSTRAINTS {
            return Err(Error::Input(format!(
                "primal solver supports at most {MAX_CONSTRAINTS} constraints, got {n}"
            )));
        }
        let problem = PrimalProblem::new(&self.lm, self.memory)?;
        let mut vars = problem.uniform_start();
        let mut iterations = 0usize;
        let mut stages = 0usize;
        let mut sigma = PENALTY_START;
        while sigma <= PENALTY_END * 1.5 {
            iterations += problem.solve_stage(&mut vars, x, sigma);
            stages += 1;
            sigma *= 10.0;
        }
        let (measure, residual) = problem.finalize(&vars, x)?;
        let value = self.lm.base_pressure()
            - measure.entropy()
            - measure.expectation(self.lm.sft(), self.lm.base())?;
        let value = if residual > PRIMAL_RESIDUAL_TOL {
            ExtReal::PlusInf
        } else {
            ExtReal::Finite(value)
        };
        Ok(PrimalReport { value, minimizer: Some(measure), residual, iterations, stages })
    }

    /// Runs both routes over a grid and reports the worst gap, with a
    /// midpoint-convexity check of the dual route thrown in. Grid points
    /// are audited in parallel; each primal solve is single-threaded.
    pub fn duality_audit(&self, grid: &[Vec<f64>]) -> Result<DualityAudit> {
        let evaluated = exec::map_slice(grid, |x| -> Result<DualityRow> {
            let dual = self.rate_dual(x)?;
            let primal = self.rate_primal(x)?.value;
            let gap = match (dual, primal) {
                (ExtReal::Finite(d), ExtReal::Finite(p)) => Some((d - p).abs()),
                (ExtReal::PlusInf, ExtReal::PlusInf) => Some(0.0),
                _ => None,
            };
            Ok(DualityRow { x: x.clone(), dual, primal, gap })
        });
        let mut rows = Vec::with_capacity(grid.len());
        for row in evaluated {
            rows.push(row?);
        }
        let mut max_gap: Option<f64> = None;
        let mut infinite_mismatches = 0usize;
        for row in &rows {
            match row.gap {
                Some(g) => max_gap = Some(max_gap.map_or(g, |m: f64| m.max(g))),
                None => infinite_mismatches += 1,
            }
        }
        let (convexity_ok, min_convexity_margin) = midpoint_convexity(&rows);
        let pass = infinite_mismatches == 0
            && max_gap.map_or(true, |g| g <= DUALITY_TOL)
            && convexity_ok;
        Ok(DualityAudit {
            rows,
            max_gap,
            infinite_mismatches,
            convexity_ok,
            min_convexity_margin,
            pass,
            tolerance: DUALITY_TOL,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityRow {
    pub x: Vec<f64>,
    pub dual: ExtReal,
    pub primal: ExtReal,
    /// Absolute dual−primal gap; `None` when exactly one side is +∞.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityAudit {
    pub rows: Vec<DualityRow>,
    pub max_gap: Option<f64>,
    pub infinite_mismatches: usize,
    pub convexity_ok: bool,
    /// Smallest `I(x) + I(y) − 2·I((x+y)/2)` over grid triples with the
    /// midpoint on the grid; affine segments give zero.
    pub min_convexity_margin: Option<f64>,
    pub pass: bool,
    pub tolerance: f64,
}

impl DualityAudit {
    /// CSV rows `x…, dual, primal, gap` with 17 significant digits;
    /// infinities render as `inf`.
    pub fn to_csv(&self) -> String {
        let dims = self.rows.first().map_or(0, |r| r.x.len());
        let mut out = String::new();
        for k in 0..dims {
            out.push_str(&format!("x{k},"));
        }
        out.push_str("dual,primal,gap\n");
        for row in &self.rows {
            for v in &row.x {
                out.push_str(&format!("{v:.16e},"));
            }
            out.push_str(&ext_cell(row.dual));
            out.push(',');
            out.push_str(&ext_cell(row.primal));
            out.push(',');
            match row.gap {
                Some(g) => out.push_str(&format!("{g:.16e}")),
                None => out.push_str("inf"),
            }
            out.push('\n');
        }
        out
    }
}

fn ext_cell(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(f) => format!("{f:.16e}"),
        ExtReal::PlusInf => "inf".to_string(),
    }
}

/// Checks `I(x) + I(y) ≥ 2·I(mid)` for every grid pair whose midpoint is
/// itself a grid point.
fn midpoint_convexity(rows: &[DualityRow]) -> (bool, Option<f64>) {
    let mut min_margin: Option<f64> = None;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let mid: Vec<f64> =
                rows[i].x.iter().zip(&rows[j].x).map(|(a, b)| 0.5 * (a + b)).collect();
            let Some(k) = rows.iter().position(|r| {
                r.x.iter().zip(&mid).all(|(a, b)| (a - b).abs() <= 1e-9)
            }) else {
                continue;
            };
            let (Some(vi), Some(vj), Some(vk)) = (
                rows[i].dual.finite(),
                rows[j].dual.finite(),
                rows[k].dual.finite(),
            ) else {
                continue;
            };
            let margin = vi + vj - 2.0 * vk;
            min_margin = Some(min_margin.map_or(margin, |m: f64| m.min(margin)));
        }
    }
    (min_margin.map_or(true, |m| m >= -CONVEXITY_TOL), min_margin)
}

/// The primal problem data: chain states, allowed moves, and per-state
/// potential values. Variables are packed as `[π block, row blocks…]`, each
/// block living on a probability simplex.
struct PrimalProblem {
    sft: Sft,
    memory: usize,
    states: Vec<Word>,
    /// Allowed moves per state, as indices into `states`.
    moves: Vec<Vec<usize>>,
    /// Base potential value per state (depth ≤ memory, read off the prefix).
    base_vals: Vec<f64>,
    /// Direction values per state.
    dir_vals: Vec<Vec<f64>>,
    /// Offset of each row block in the packed variable vector.
    row_offsets: Vec<usize>,
    total_len: usize,
}

impl PrimalProblem {
    fn new(lm: &LogMgf, memory: usize) -> Result<Self> {
        let sft = lm.sft().clone();
        let states = sft.enumerate_words_capped(memory, PRIMAL_STATE_CAP)?;
        let index = crate::measure::state_index(&states);
        let s = states.len();
        let mut moves = Vec::with_capacity(s);
        for u in &states {
            let mut row = Vec::new();
            for &sym in sft.successors(u[memory - 1]) {
                let mut v: Word = u[1..].to_vec();
                v.push(sym);
                if let Some(&j) = index.get(&v) {
                    row.push(j);
                }
            }
            if row.is_empty() {
                return Err(Error::Numerical(format!(
                    "state {u:?} has no admissible continuation"
                )));
            }
            moves.push(row);
        }
        let base_vals: Vec<f64> = states
            .iter()
            .map(|u| lm.base().value(&u[..lm.base().depth()]).unwrap_or(0.0))
            .collect();
        let dir_vals: Vec<Vec<f64>> = lm
            .directions()
            .iter()
            .map(|d| {
                states
                    .iter()
                    .map(|u| d.value(&u[..d.depth()]).unwrap_or(0.0))
                    .collect()
            })
            .collect();
        let mut row_offsets = Vec::with_capacity(s);
        let mut total = s;
        for row in &moves {
            row_offsets.push(total);
            total += row.len();
        }
        Ok(PrimalProblem {
            sft,
            memory,
            states,
            moves,
            base_vals,
            dir_vals,
            row_offsets,
            total_len: total,
        })
    }

    fn uniform_start(&self) -> Vec<f64> {
        let s = self.states.len();
        let mut vars = vec![0.0; self.total_len];
        for v in vars[..s].iter_mut() {
            *v = 1.0 / s as f64;
        }
        for (u, row) in self.moves.iter().enumerate() {
            let off = self.row_offsets[u];
            for k in 0..row.len() {
                vars[off + k] = 1.0 / row.len() as f64;
            }
        }
        vars
    }

    /// Penalized objective: `plogp(π,P) − ⟨π, f⟩ + σ(‖πP − π‖² + ‖means − x‖²)`.
    /// (The constant base pressure is added only at reporting time.)
    fn objective(&self, vars: &[f64], x: &[f64], sigma: f64) -> f64 {
        let s = self.states.len();
        let pi = &vars[..s];
        let mut plogp = 0.0;
        let mut flow = vec![0.0f64; s];
        for u in 0..s {
            let off = self.row_offsets[u];
            let mut row_ent = 0.0;
            for (k, &v) in self.moves[u].iter().enumerate() {
                let p = vars[off + k];
                if p > 0.0 {
                    row_ent += p * p.ln();
                }
                flow[v] += pi[u] * p;
            }
            plogp += pi[u] * row_ent;
        }
        let linear: f64 = (0..s).map(|u| pi[u] * self.base_vals[u]).sum();
        let mut penalty = 0.0;
        for v in 0..s {
            let d = flow[v] - pi[v];
            penalty += d * d;
        }
        for (j, &xj) in x.iter().enumerate() {
            let mean: f64 = (0..s).map(|u| pi[u] * self.dir_vals[j][u]).sum();
            let d = mean - xj;
            penalty += d * d;
        }
        plogp - linear + sigma * penalty
    }

    fn gradient(&self, vars: &[f64], x: &[f64], sigma: f64, grad: &mut [f64]) {
        let s = self.states.len();
        let pi = &vars[..s];
        let mut flow = vec![0.0f64; s];
        for u in 0..s {
            let off = self.row_offsets[u];
            for (k, &v) in self.moves[u].iter().enumerate() {
                flow[v] += pi[u] * vars[off + k];
            }
        }
        let resid: Vec<f64> = (0..s).map(|v| flow[v] - pi[v]).collect();
        let mean_resid: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, &xj)| {
                (0..s).map(|u| pi[u] * self.dir_vals[j][u]).sum::<f64>() - xj
            })
            .collect();
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        for u in 0..s {
            let off = self.row_offsets[u];
            let mut row_ent = 0.0;
            for (k, &v) in self.moves[u].iter().enumerate() {
                let p = vars[off + k].max(1e-30);
                row_ent += vars[off + k] * p.ln();
                // d/dP_uv of plogp and of the stationarity penalty.
                grad[off + k] = pi[u] * (p.ln() + 1.0) + sigma * 2.0 * resid[v] * pi[u];
            }
            let mut g_pi = row_ent - self.base_vals[u];
            for (k, &v) in self.moves[u].iter().enumerate() {
                g_pi += sigma * 2.0 * resid[v] * vars[off + k];
            }
            g_pi -= sigma * 2.0 * resid[u];
            for (j, r) in mean_resid.iter().enumerate() {
                g_pi += sigma * 2.0 * r * self.dir_vals[j][u];
            }
            grad[u] = g_pi;
        }
    }

    fn project(&self, vars: &mut [f64]) {
        let s = self.states.len();
        linalg::project_to_simplex(&mut vars[..s], 1.0);
        for u in 0..s {
            let off = self.row_offsets[u];
            let len = self.moves[u].len();
            linalg::project_to_simplex(&mut vars[off..off + len], 1.0);
        }
    }

    /// One penalty stage: projected gradient with Barzilai-Borwein steps
    /// and a nonmonotone (10-window) Armijo safeguard.
    fn solve_stage(&self, vars: &mut Vec<f64>, x: &[f64], sigma: f64) -> usize {
        let mut grad = vec![0.0f64; self.total_len];
        let mut prev_vars: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut recent: std::collections::VecDeque<f64> = std::collections::VecDeque::new();
        let mut fval = self.objective(vars, x, sigma);
        recent.push_back(fval);
        let mut stall = 0usize;
        for iter in 0..STAGE_ITER_CAP {
            self.gradient(vars, x, sigma, &mut grad);
            let mut step = match &prev_vars {
                Some((pv, pg)) => {
                    let mut ss = 0.0;
                    let mut sy = 0.0;
                    for i in 0..self.total_len {
                        let ds = vars[i] - pv[i];
                        let dy = grad[i] - pg[i];
                        ss += ds * ds;
                        sy += ds * dy;
                    }
                    if sy > 1e-300 {
                        (ss / sy).clamp(1e-12, 1e6)
                    } else {
                        1.0
                    }
                }
                None => 1.0 / (1.0 + sigma),
            };
            let fref = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            let mut accepted = false;
            let mut trial = vars.clone();
            for _ in 0..50 {
                for i in 0..self.total_len {
                    trial[i] = vars[i] - step * grad[i];
                }
                self.project(&mut trial);
                let ftrial = self.objective(&trial, x, sigma);
                // Directional decrease relative to the actual move.
                let moved: f64 = trial
                    .iter()
                    .zip(vars.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if ftrial <= fref - 1e-4 * moved / step.max(1e-300) || moved == 0.0 {
                    prev_vars = Some((vars.clone(), grad.clone()));
                    *vars = trial;
                    let improved = fval - ftrial;
                    fval = ftrial;
                    recent.push_back(fval);
                    if recent.len() > 10 {
                        recent.pop_front();
                    }
                    accepted = true;
                    if moved <= 1e-28 || (improved.abs() <= 1e-15 * (1.0 + fval.abs())) {
                        stall += 1;
                    } else {
                        stall = 0;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted || stall > 25 || gnorm2 == 0.0 {
                return iter + 1;
            }
        }
        STAGE_ITER_CAP
    }

    /// Rebuilds an exactly stationary chain from the penalized solution:
    /// recurrent classes of the fitted support graph get exact per-class
    /// stationary solves, mixed by their fitted masses.
    fn finalize(&self, vars: &[f64], x: &[f64]) -> Result<(MarkovMeasure, f64)> {
        let s = self.states.len();
        let pi_hat = &vars[..s];
        let mut rows = vec![vec![0.0f64; s]; s];
        for u in 0..s {
            let off = self.row_offsets[u];
            for (k, &v) in self.moves[u].iter().enumerate() {
                rows[u][v] = vars[off + k];
            }
            let sum: f64 = rows[u].iter().sum();
            if sum <= 0.0 {
                return Err(Error::Numerical(format!("empty fitted row {u}")));
            }
            for p in rows[u].iter_mut() {
                *p /= sum;
            }
        }
        // Recurrent classes of the support graph with edges above 1e-12.
        let classes = recurrent_classes(&rows, 1e-12);
        if classes.is_empty() {
            return Err(Error::Numerical("fitted chain has no recurrent class".into()));
        }
        let mut weights: Vec<f64> = classes
            .iter()
            .map(|c| c.iter().map(|&u| pi_hat[u]).sum::<f64>())
            .collect();
        let wsum: f64 = weights.iter().sum();
        if wsum <= 0.0 {
            return Err(Error::Numerical("fitted stationary block is null".into()));
        }
        for w in weights.iter_mut() {
            *w /= wsum;
        }
        let mut pi = vec![0.0f64; s];
        for (class, w) in classes.iter().zip(&weights) {
            if *w <= 0.0 {
                continue;
            }
            // Restrict the rows to the class, zeroing sub-threshold leaks.
            let k = class.len();
            let mut sub = vec![vec![0.0f64; k]; k];
            for (a, &u) in class.iter().enumerate() {
                for (b, &v) in class.iter().enumerate() {
                    sub[a][b] = rows[u][v];
                }
                let sum: f64 = sub[a].iter().sum();
                for p in sub[a].iter_mut() {
                    *p /= sum;
                }
                for (b, &v) in class.iter().enumerate() {
                    rows[u][v] = sub[a][b];
                }
                for v in 0..s {
                    if !class.contains(&v) {
                        rows[u][v] = 0.0;
                    }
                }
            }
            let sub_pi = linalg::stationary_distribution(&sub)?;
            for (a, &u) in class.iter().enumerate() {
                pi[u] = w * sub_pi[a];
            }
        }
        let measure = MarkovMeasure::new(&self.sft, self.memory, rows, pi)?;
        let mut residual = 0.0f64;
        for (j, &xj) in x.iter().enumerate() {
            let mean: f64 = (0..s)
                .map(|u| measure.stationary()[u] * self.dir_vals[j][u])
                .sum();
            residual = residual.max((mean - xj).abs());
        }
        Ok((measure, residual))
    }
}

/// Strongly connected components with no outgoing edges (above `tol`) to
/// other components, listed as sorted state sets.
fn recurrent_classes(rows: &[Vec<f64>], tol: f64) -> Vec<Vec<usize>> {
    let s = rows.len();
    // Small graphs: repeated DFS reachability is plenty.
    let reach = |from: usize| -> Vec<bool> {
        let mut seen = vec![false; s];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for v in 0..s {
                if rows[u][v] > tol && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    let reachable: Vec<Vec<bool>> = (0..s).map(reach).collect();
    let mut assigned = vec![false; s];
    let mut classes = Vec::new();
    for u in 0..s {
        if assigned[u] {
            continue;
        }
        let class: Vec<usize> =
            (0..s).filter(|&v| reachable[u][v] && reachable[v][u]).collect();
        // Recurrent iff the class cannot reach outside itself.
        let closed = class
            .iter()
            .all(|&a| (0..s).all(|v| !(rows[a][v] > tol) || class.contains(&v)));
        for &v in &class {
            assigned[v] = true;
        }
        if closed {
            classes.push(class);
        }
    }
    classes
}
