//! Shared numerical kernels: Perron eigendata for nonnegative irreducible
//! matrices held in log scale, stationary distributions of stochastic
//! matrices, simplex projection, and thin least-squares wrappers.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 100_000;

/// Dominant eigendata of a nonnegative irreducible matrix.
///
/// `right` is normalized to sum 1; `left` is normalized so that
/// `Σ left[i]·right[i] = 1`. Both are strictly positive up to floating-point
/// underflow at extreme scales; `log_right` and `log_left` carry the same
/// vectors in log scale without that underflow, which downstream
/// constructions at extreme entry spans rely on.
// The Rayleigh quotient inside the solver needs the left run regardless,
// and the eigensolver tests pin all of these; production callers currently
// read only the eigenvalue and right eigendata.
#[derive(Clone, Debug)]
#[allow(dead_code)]
pub struct PerronPair {
    pub log_lambda: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub log_right: Vec<f64>,
    pub log_left: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Matrix in log scale, row-major; absent entries are `-inf`. The pattern
/// must be strongly connected (the caller restricts to one component).
pub struct LogMatrix<'a> {
    pub n: usize,
    pub log_entries: &'a [f64],
}

impl<'a> LogMatrix<'a> {
    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.log_entries[i * self.n + j]
    }

    fn max_finite(&self) -> f64 {
        self.log_entries.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max)
    }

    fn min_finite(&self) -> f64 {
        self.log_entries.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min)
    }

    fn transpose_entries(&self) -> Vec<f64> {
        let n = self.n;
        let mut t = vec![f64::NEG_INFINITY; n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = self.entry(i, j);
            }
        }
        t
    }

    /// Period of the pattern graph: gcd of cycle lengths, computed from BFS
    /// levels (gcd over edges of `level[u] + 1 - level[v]`).
    fn pattern_period(&self) -> usize {
        let n = self.n;
        let mut level = vec![i64::MIN; n];
        let mut queue = std::collections::VecDeque::new();
        level[0] = 0;
        queue.push_back(0usize);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.entry(u, v).is_finite() && level[v] == i64::MIN {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g: i64 = 0;
        for u in 0..n {
            for v in 0..n {
                if self.entry(u, v).is_finite() && level[u] != i64::MIN && level[v] != i64::MIN {
                    g = gcd(g, (level[u] + 1 - level[v]).abs());
                }
            }
        }
        if g <= 0 {
            1
        } else {
            g as usize
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Log-scale entry spans beyond this use the slower log-sum-exp iteration;
/// below it, scaled floating-point arithmetic cannot overflow or lose the
/// eigenvalue to underflow.
const FLOAT_PATH_SPAN: f64 = 600.0;

/// Perron eigendata by power iteration.
///
/// Primary pass: plain iteration from the all-ones vector, relative residual
/// tolerance 1e-12, iteration cap 1e5. Periodic patterns make single-step
/// residuals cycle, so convergence is judged on windows of the graph period
/// and the eigenvector is reconstructed by averaging one full period of
/// iterates. If the pattern is aperiodic and iteration still stalls, a
/// diagonally shifted pass (`M + cI`, same eigenvectors) runs next, and the
/// eigenvalue is recovered by a Rayleigh quotient on the unshifted matrix so
/// no cancellation occurs. Matrices whose entries span more than e^600, or
/// near-periodic matrices defeating both passes, drop to a log-domain
/// routine that is slower but immune to overflow and underflow.
pub fn perron(m: &LogMatrix) -> Result<PerronPair> {
    let n = m.n;
    if n == 0 {
        return Err(Error::Input("empty matrix has no dominant eigenvalue".into()));
    }
    if n == 1 {
        let d = m.entry(0, 0);
        if !d.is_finite() {
            return Err(Error::Input("1x1 matrix with empty diagonal is nilpotent".into()));
        }
        return Ok(PerronPair {
            log_lambda: d,
            right: vec![1.0],
            left: vec![1.0],
            log_right: vec![0.0],
            log_left: vec![0.0],
            iterations: 0,
            residual: 0.0,
        });
    }
    let c = m.max_finite();
    if !c.is_finite() {
        return Err(Error::Input("matrix has no finite entries".into()));
    }
    let span = c - m.min_finite();
    if span <= FLOAT_PATH_SPAN {
        match perron_float(m, c) {
            Ok(pair) => Ok(pair),
            // Near-periodic spectra stall both float passes; the log-domain
            // route still extracts the eigenvalue from windowed growth.
            Err(Error::Numerical(_)) => perron_logspace(m),
            Err(e) => Err(e),
        }
    } else {
        perron_logspace(m)
    }
}

fn perron_float(m: &LogMatrix, c: f64) -> Result<PerronPair> {
    let n = m.n;
    let p = m.pattern_period();
    let scaled: Vec<f64> = m.log_entries.iter().map(|&v| (v - c).exp()).collect();
    let t_entries = m.transpose_entries();
    let scaled_t: Vec<f64> = t_entries.iter().map(|&v| (v - c).exp()).collect();

    let right_run = iterate_with_period(&scaled, n, p, 0.0);
    let left_run = iterate_with_period(&scaled_t, n, p, 0.0);
    let mut iterations = right_run.iterations + left_run.iterations;
    let mut residual = right_run.residual.max(left_run.residual);
    let (mut right, mut left) = (right_run.vector, left_run.vector);
    if !(right_run.converged && left_run.converged) {
        if p > 1 {
            return Err(Error::Numerical(format!(
                "period-{p} power iteration failed to converge (residual {residual:.3e})"
            )));
        }
        // Aperiodic stall: shift by the max entry (1.0 in scaled
        // coordinates). The shifted matrix has the same eigenvectors and a
        // restored spectral gap whenever the stall came from a negative
        // subdominant eigenvalue.
        let right_run = iterate_with_period(&scaled, n, 1, 1.0);
        let left_run = iterate_with_period(&scaled_t, n, 1, 1.0);
        iterations += right_run.iterations + left_run.iterations;
        if !(right_run.converged && left_run.converged) {
            return Err(Error::Numerical(format!(
                "power iteration failed to converge within {POWER_MAX_ITER} iterations \
                 (best shifted residual {:.3e})",
                right_run.residual.max(left_run.residual)
            )));
        }
        right = right_run.vector;
        left = left_run.vector;
        residual = right_run.residual.max(left_run.residual);
    }

    // Generalized Rayleigh quotient on the unshifted scaled matrix.
    let mut m_right = vec![0.0f64; n];
    for i in 0..n {
        let mut acc = 0.0;
        let row = &scaled[i * n..(i + 1) * n];
        for j in 0..n {
            acc += row[j] * right[j];
        }
        m_right[i] = acc;
    }
    let num: f64 = (0..n).map(|i| left[i] * m_right[i]).sum();
    let den: f64 = (0..n).map(|i| left[i] * right[i]).sum();
    if !(num > 0.0 && den > 0.0 && num.is_finite() && den.is_finite()) {
        return Err(Error::Numerical("Rayleigh quotient degenerated in Perron solve".into()));
    }
    let lambda_scaled = num / den;
    normalize_pair(&mut right, &mut left);
    let log_right = safe_ln(&right);
    let log_left = safe_ln(&left);
    Ok(PerronPair {
        log_lambda: c + lambda_scaled.ln(),
        right,
        left,
        log_right,
        log_left,
        iterations,
        residual,
    })
}

fn safe_ln(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect()
}

struct IterationRun {
    vector: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Power iteration on `entries + shift·I` with convergence judged over
/// `period` steps: the componentwise log-growth over one period must agree
/// to 1e-12. The returned vector is the weighted average of one full period
/// of iterates, which projects onto the Perron eigenvector even when the
/// iterates themselves cycle through phase profiles.
fn iterate_with_period(entries: &[f64], n: usize, period: usize, shift: f64) -> IterationRun {
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0f64; n];
    // Rolling window of the last `period` (vector, log-growth) pairs, most
    // recent last.
    let mut window: std::collections::VecDeque<(Vec<f64>, f64)> =
        std::collections::VecDeque::with_capacity(period + 1);
    window.push_back((v.clone(), 0.0));
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut last_best_update = 0usize;
    for k in 1..=POWER_MAX_ITER {
        for i in 0..n {
            let mut acc = shift * v[i];
            let row = &entries[i * n..(i + 1) * n];
            for j in 0..n {
                acc += row[j] * v[j];
            }
            w[i] = acc;
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return IterationRun { vector: v, iterations: k, residual: f64::INFINITY, converged: false };
        }
        for i in 0..n {
            v[i] = w[i] / total;
        }
        window.push_back((v.clone(), total.ln()));
        if window.len() > period + 1 {
            window.pop_front();
        }
        if window.len() == period + 1 {
            let (oldest, _) = &window[0];
            let total_growth: f64 = window.iter().skip(1).map(|(_, g)| g).sum();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut degenerate = false;
            for i in 0..n {
                if v[i] <= 0.0 || oldest[i] <= 0.0 {
                    degenerate = true;
                    break;
                }
                let d = v[i].ln() + total_growth - oldest[i].ln();
                lo = lo.min(d);
                hi = hi.max(d);
            }
            if !degenerate {
                residual = (hi - lo) / (1.0 + hi.abs().max(lo.abs()));
                if residual <= POWER_TOL {
                    let log_rate = 0.5 * (hi + lo) / period as f64;
                    let vector = period_average(&window, log_rate);
                    return IterationRun { vector, iterations: k, residual, converged: true };
                }
            }
        }
        if residual < 0.5 * best {
            best = residual;
            last_best_update = k;
        }
        // Stall detector: no factor-2 progress over a long window means the
        // iteration is cycling in a way the period window cannot fix.
        if k > 2_000 + 2 * period && k - last_best_update > 1_000 + 2 * period {
            return IterationRun { vector: v, iterations: k, residual, converged: false };
        }
    }
    IterationRun { vector: v, iterations: POWER_MAX_ITER, residual, converged: false }
}

/// Projects one period of normalized iterates onto the Perron direction:
/// `r ∝ Σ_j λ^j · V_{k−j}` over j = 0..p−1, with each iterate rescaled by
/// its accumulated growth. Phase components (eigenvalues `λ·ω` with `ω` a
/// root of unity) cancel exactly in this sum.
fn period_average(window: &std::collections::VecDeque<(Vec<f64>, f64)>, log_rate: f64) -> Vec<f64> {
    let p = window.len() - 1;
    let n = window[0].0.len();
    if p == 1 {
        return window[p].0.clone();
    }
    // j steps back from the newest iterate; log weight j·log λ − Σ of the
    // last j growths.
    let mut log_weights = Vec::with_capacity(p);
    let mut growth_back = 0.0;
    for j in 0..p {
        if j > 0 {
            growth_back += window[p + 1 - j].1;
        }
        log_weights.push(j as f64 * log_rate - growth_back);
    }
    let wmax = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0f64; n];
    for (j, lw) in log_weights.iter().enumerate() {
        let weight = (lw - wmax).exp();
        let vec_j = &window[p - j].0;
        for i in 0..n {
            out[i] += weight * vec_j[i];
        }
    }
    let s: f64 = out.iter().sum();
    for x in out.iter_mut() {
        *x /= s;
    }
    out
}

/// Log-domain iteration for extreme entry spans and near-periodic stalls.
/// Immune to overflow/underflow; convergence judged on pattern-period
/// windows, with a windowed growth average as a value-only fallback.
fn perron_logspace(m: &LogMatrix) -> Result<PerronPair> {
    let p = m.pattern_period();
    let (log_lambda_r, right_log, it_r, res_r) = logspace_iterate(m.log_entries, m.n, p)?;
    let t = m.transpose_entries();
    let (log_lambda_l, left_log, it_l, res_l) = logspace_iterate(&t, m.n, p)?;
    let log_lambda = 0.5 * (log_lambda_r + log_lambda_l);
    // Normalization stays in log scale so extreme component ratios survive.
    let log_right: Vec<f64> = {
        let z = log_sum_exp(&right_log);
        right_log.iter().map(|v| v - z).collect()
    };
    let log_left: Vec<f64> = {
        let z = log_sum_exp(&left_log);
        let normed: Vec<f64> = left_log.iter().map(|v| v - z).collect();
        let prods: Vec<f64> =
            normed.iter().zip(&log_right).map(|(l, r)| l + r).collect();
        let log_d = log_sum_exp(&prods);
        normed.iter().map(|v| v - log_d).collect()
    };
    let right: Vec<f64> = log_right.iter().map(|&v| v.exp()).collect();
    let left: Vec<f64> = log_left.iter().map(|&v| v.exp()).collect();
    Ok(PerronPair {
        log_lambda,
        right,
        left,
        log_right,
        log_left,
        iterations: it_r + it_l,
        residual: res_r.max(res_l).max((log_lambda_r - log_lambda_l).abs()),
    })
}

fn logspace_iterate(
    log_entries: &[f64],
    n: usize,
    period: usize,
) -> Result<(f64, Vec<f64>, usize, f64)> {
    use std::collections::VecDeque;
    let mut u = vec![0.0f64; n];
    let mut window: VecDeque<(Vec<f64>, f64)> = VecDeque::new();
    window.push_back((u.clone(), 0.0));
    let mut buf = vec![f64::NEG_INFINITY; n];
    // Full growth history for the windowed-average fallback.
    let mut growths: Vec<f64> = Vec::with_capacity(POWER_MAX_ITER + 1);
    growths.push(0.0);
    for k in 1..=POWER_MAX_ITER {
        for i in 0..n {
            let row = &log_entries[i * n..(i + 1) * n];
            let mut mx = f64::NEG_INFINITY;
            for j in 0..n {
                let t = row[j] + u[j];
                if t > mx {
                    mx = t;
                }
            }
            if mx == f64::NEG_INFINITY {
                return Err(Error::Numerical(
                    "log-domain iteration reached a state with no outgoing weight".into(),
                ));
            }
            let mut s = 0.0f64;
            for j in 0..n {
                let t = row[j] + u[j];
                if t.is_finite() {
                    s += (t - mx).exp();
                }
            }
            buf[i] = mx + s.ln();
        }
        let shift = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            buf[i] -= shift;
        }
        std::mem::swap(&mut u, &mut buf);
        growths.push(shift);
        window.push_back((u.clone(), shift));
        if window.len() > period + 1 {
            window.pop_front();
        }
        if window.len() == period + 1 {
            let prev = &window[0].0;
            let total_shift: f64 = window.iter().skip(1).map(|(_, s)| s).sum();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..n {
                let d = u[i] + total_shift - prev[i];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            if hi - lo <= POWER_TOL * (1.0 + hi.abs()) {
                let log_lambda = 0.5 * (hi + lo) / period as f64;
                return Ok((log_lambda, u, k, (hi - lo) / (1.0 + hi.abs())));
            }
        }
    }
    windowed_growth_estimate(&growths, period)
        .map(|(log_lambda, residual)| (log_lambda, u.clone(), POWER_MAX_ITER, residual))
        .ok_or_else(|| {
            Error::Numerical(format!(
                "log-domain power iteration failed to converge within {POWER_MAX_ITER} iterations"
            ))
        })
}

/// Value-only eigenvalue extraction for near-periodic spectra: averages the
/// per-step growth over a window whose length is a multiple of the pattern
/// period and of every small cycle length, so periodic oscillations in the
/// growth sequence cancel exactly. Two disjoint windows must agree.
fn windowed_growth_estimate(growths: &[f64], period: usize) -> Option<(f64, f64)> {
    // 2520 = lcm(1..=9) kills oscillations with any small effective period.
    let base = 2520usize * period.max(1);
    let len = growths.len();
    if len < 4 * base + 2 {
        return None;
    }
    let window = base * ((len - 2) / (4 * base)).max(1);
    let avg = |end: usize| -> f64 {
        let sum: f64 = growths[end - window..end].iter().sum();
        sum / window as f64
    };
    let est1 = avg(len - 1);
    let est2 = avg(len - 1 - window);
    let diff = (est1 - est2).abs() / (1.0 + est1.abs());
    if diff <= 1e-9 {
        Some((est1, diff))
    } else {
        None
    }
}

/// Scales `right` to sum 1 and `left` so that `Σ left·right = 1`.
fn normalize_pair(right: &mut [f64], left: &mut [f64]) {
    let sr: f64 = right.iter().sum();
    for v in right.iter_mut() {
        *v /= sr;
    }
    let d: f64 = left.iter().zip(right.iter()).map(|(l, r)| l * r).sum();
    for v in left.iter_mut() {
        *v /= d;
    }
}

/// Stationary row vector of a row-stochastic matrix: solves `π P = π`,
/// `Σ π = 1` by direct LU factorization, so periodic chains are fine.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Input("empty transition matrix".into()));
    }
    // (P^T - I) x = 0 with the last equation replaced by Σ x = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solved = a
        .clone()
        .lu()
        .solve(&b)
        .or_else(|| a.clone().svd(true, true).solve(&b, 1e-13).ok());
    let x = solved.ok_or_else(|| Error::Numerical("stationary solve is singular".into()))?;
    let mut pi: Vec<f64> = x.iter().copied().map(|v| v.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    if !(s > 0.0) {
        return Err(Error::Numerical("stationary solve returned a null vector".into()));
    }
    for v in pi.iter_mut() {
        *v /= s;
    }
    Ok(pi)
}

/// Euclidean projection onto the simplex `{x ≥ 0, Σ x = total}`.
pub fn project_to_simplex(v: &mut [f64], total: f64) {
    if v.is_empty() {
        return;
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0f64;
    let mut theta = 0.0f64;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - total) / (k as f64 + 1.0);
        if s - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Minimum-norm least squares via SVD; returns the solution and the
/// Euclidean residual `|Ax - b|`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(b, 1e-13)
        .map_err(|e| Error::Numerical(format!("least squares solve failed: {e}")))?;
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Numerical rank of a matrix relative to its largest singular value.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - mx).exp()).sum();
    mx + s.ln()
}
