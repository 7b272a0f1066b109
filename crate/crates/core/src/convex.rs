//! Finite-dimensional convex analysis around the limiting log-moment map:
//! `L(t) = P(f + Σ t_k f_k) − P(f)`, its (sub)gradients via equilibrium
//! expectations, the Legendre conjugate, kink detection along lines, and
//! essential-strict-convexity certification.

use serde::Serialize;

use crate::pressure::{self, PressureReport};
use crate::sft::{Potential, Sft};
use crate::{Error, Result};

/// Interior ascent stops when `|x − grad L(t)|₂` drops below this.
pub const GRAD_TOL: f64 = 1e-10;
/// Iterates escaping this Euclidean norm trigger boundary classification.
pub const ESCAPE_NORM: f64 = 1e3;
/// Ray slope above this means the conjugate diverges (+∞).
pub const ESCAPE_SLOPE_TOL: f64 = 1e-8;
/// One-sided derivative gaps above this count as kinks.
pub const KINK_GAP_TOL: f64 = 1e-9;
/// Kink locations are bisected down to intervals of this width.
pub const KINK_T_RESOLUTION: f64 = 1e-10;
/// Midpoint-strictness margin required by the convexity certificate.
pub const MARGIN_TOL: f64 = 1e-9;
/// Ascent step budget.
pub const MAX_ASCENT_STEPS: usize = 100_000;

/// ℝ ∪ {+∞}. Infinity is a structural flag, never a large float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PlusInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PlusInf => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::PlusInf)
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PlusInf => s.serialize_str("inf"),
        }
    }
}

/// The limiting log-moment generating map of a base potential and finitely
/// many direction potentials.
#[derive(Clone, Debug)]
pub struct LogMgf {
    sft: Sft,
    base: Potential,
    directions: Vec<Potential>,
    base_pressure: f64,
}

/// Extreme subgradients at a non-differentiability point of `L`.
#[derive(Clone, Debug, Serialize)]
pub struct KinkWitness {
    pub location: Vec<f64>,
    /// One mean vector `(μ(f_1),…,μ(f_n))` per extreme equilibrium state.
    pub extreme_gradients: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub enum GradOutcome {
    Gradient(Vec<f64>),
    Kink(KinkWitness),
}

impl LogMgf {
    pub fn new(sft: &Sft, base: &Potential, directions: &[Potential]) -> Result<Self> {
        // The base pressure is computed through the same lifted combination
        // used by eval, so L(0) = 0 holds bit-exactly.
        let zero = vec![0.0; directions.len()];
        let lifted_zero = tilt(sft, base, directions, &zero)?;
        let base_pressure = pressure::pressure_value(sft, &lifted_zero)?;
        Ok(LogMgf {
            sft: sft.clone(),
            base: base.clone(),
            directions: directions.to_vec(),
            base_pressure,
        })
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    pub fn sft(&self) -> &Sft {
        &self.sft
    }

    pub fn base(&self) -> &Potential {
        &self.base
    }

    pub fn directions(&self) -> &[Potential] {
        &self.directions
    }

    pub fn base_pressure(&self) -> f64 {
        self.base_pressure
    }

    fn tilted(&self, t: &[f64]) -> Result<Potential> {
        if t.len() != self.directions.len() {
            return Err(Error::Input(format!(
                "expected {} tilt coordinates, got {}",
                self.directions.len(),
                t.len()
            )));
        }
        tilt(&self.sft, &self.base, &self.directions, t)
    }

    /// `L(t) = P(f + Σ t_k f_k) − P(f)`. Uses the value-only pressure
    /// routine, so it stays finite-armed arbitrarily far along escape rays.
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        let tilted = self.tilted(t)?;
        Ok(pressure::pressure_value(&self.sft, &tilted)? - self.base_pressure)
    }

    pub fn pressure_report(&self, t: &[f64]) -> Result<PressureReport> {
        pressure::pressure_spectral(&self.sft, &self.tilted(t)?)
    }

    /// Gradient of `L`: the direction means under the tilted equilibrium
    /// state, or the set of extreme mean vectors if that state is not
    /// unique.
    pub fn grad(&self, t: &[f64]) -> Result<GradOutcome> {
        let report = self.pressure_report(t)?;
        let mut extremes = Vec::with_capacity(report.equilibrium_states.len());
        for mu in &report.equilibrium_states {
            let mut v = Vec::with_capacity(self.directions.len());
            for dir in &self.directions {
                v.push(mu.expectation(&self.sft, dir)?);
            }
            extremes.push(v);
        }
        if report.unique {
            Ok(GradOutcome::Gradient(extremes.pop().expect("unique state present")))
        } else {
            Ok(GradOutcome::Kink(KinkWitness {
                location: t.to_vec(),
                extreme_gradients: extremes,
            }))
        }
    }
}

fn tilt(sft: &Sft, base: &Potential, directions: &[Potential], t: &[f64]) -> Result<Potential> {
    let mut terms: Vec<(f64, &Potential)> = vec![(1.0, base)];
    for (coef, dir) in t.iter().zip(directions) {
        terms.push((*coef, dir));
    }
    Potential::linear_combination(sft, &terms).map_err(Error::from)
}

/// How an escaping ascent ray was classified.
#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    /// Unit direction of the escape ray.
    pub direction: Vec<f64>,
    /// True when the objective keeps climbing along the ray (conjugate +∞);
    /// false for boundary points, where the supremum along the ray is
    /// finite and reported as the value.
    pub exterior: bool,
    /// Final measured slope of the objective along the ray.
    pub ray_slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugateResult {
    pub value: ExtReal,
    /// Interior maximizer when the ascent converged; absent after escape.
    pub maximizer: Option<Vec<f64>>,
    pub escape: Option<EscapeReport>,
    pub converged: bool,
    pub iterations: usize,
}

/// Legendre conjugate `L*(x) = sup_t ⟨t,x⟩ − L(t)` by quasi-Newton ascent
/// with analytic gradients.
///
/// Smooth iterates use BFGS curvature with Armijo backtracking. Kink
/// witnesses switch the loop to subgradient steps, and in one dimension any
/// gradient sign change brackets the maximizer and bisects it to machine
/// precision (the pressure tie window at a kink is wider than the bisection
/// resolution, so kinks are always detected from inside). Iterates escaping
/// `|t| > 10³` are classified by the ray slope: still climbing means `x` is
/// outside the achievable-mean polytope (+∞); a flat ray means a boundary
/// point whose conjugate is the finite supremum along the ray.
pub fn legendre(lm: &LogMgf, x: &[f64]) -> Result<ConjugateResult> {
    let n = lm.dims();
    if x.len() != n {
        return Err(Error::Input(format!("expected {} coordinates, got {}", n, x.len())));
    }
    if n == 0 {
        return Ok(ConjugateResult {
            value: ExtReal::Finite(0.0),
            maximizer: Some(Vec::new()),
            escape: None,
            converged: true,
            iterations: 0,
        });
    }
    let phi = |t: &[f64]| -> Result<f64> {
        let inner: f64 = t.iter().zip(x).map(|(a, b)| a * b).sum();
        Ok(inner - lm.eval(t)?)
    };

    let mut t = vec![0.0f64; n];
    let mut h = identity(n);
    let mut iterations = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    let mut best_t = t.clone();
    let mut prev_smooth: Option<(Vec<f64>, Vec<f64>)> = None; // (t, grad phi)
    let mut subgrad_steps = 0usize;
    let mut plateau = 0usize;

    while iterations < MAX_ASCENT_STEPS {
        iterations += 1;
        if norm2(&t) > ESCAPE_NORM {
            return classify_escape(lm, x, &t, iterations);
        }
        match lm.grad(&t)? {
            GradOutcome::Gradient(g) => {
                let gphi: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
                let gnorm = norm2(&gphi);
                if gnorm <= GRAD_TOL {
                    let value = phi(&t)?;
                    return Ok(ConjugateResult {
                        value: ExtReal::Finite(value),
                        maximizer: Some(t),
                        escape: None,
                        converged: true,
                        iterations,
                    });
                }
                if n == 1 {
                    if let Some((pt, pg)) = &prev_smooth {
                        if pg[0] * gphi[0] < 0.0 {
                            // Sign change: the concave objective's maximizer
                            // sits between the two iterates.
                            let (lo, hi) = if pg[0] > 0.0 {
                                (pt[0], t[0])
                            } else {
                                (t[0], pt[0])
                            };
                            return bisect_1d(lm, x, lo, hi, iterations, &phi);
                        }
                    }
                }
                // Ascent direction from the BFGS metric; fall back to the
                // raw gradient when the metric degenerates.
                let mut dir = mat_vec(&h, &gphi);
                if dot(&dir, &gphi) <= 0.0 {
                    h = identity(n);
                    dir = gphi.clone();
                }
                let phi_t = phi(&t)?;
                best_track(&mut best_value, &mut best_t, phi_t, &t);
                let slope = dot(&gphi, &dir);
                let mut step = 1.0f64;
                let mut accepted = None;
                for _ in 0..60 {
                    let cand: Vec<f64> =
                        t.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                    let val = phi(&cand)?;
                    if val >= phi_t + 1e-4 * step * slope {
                        accepted = Some((cand, val));
                        break;
                    }
                    step *= 0.5;
                }
                let Some((new_t, val)) = accepted else {
                    // No progress at any step size: numerically stationary.
                    let value = phi(&t)?;
                    return Ok(ConjugateResult {
                        value: ExtReal::Finite(value),
                        maximizer: Some(t),
                        escape: None,
                        converged: gnorm <= 1e-8,
                        iterations,
                    });
                };
                // When the maximizer set is flat along some direction (the
                // directions are affinely dependent on the invariant
                // simplex), the line search keeps accepting noise-level
                // moves while the gradient norm sits at the eigensolver
                // floor. Forty accepted steps without a new high end the
                // climb at the plateau value.
                if val <= best_value + 1e-14 * (1.0 + best_value.abs()) {
                    plateau += 1;
                } else {
                    plateau = 0;
                }
                best_track(&mut best_value, &mut best_t, val, &new_t);
                if plateau >= 40 {
                    return Ok(ConjugateResult {
                        value: ExtReal::Finite(best_value),
                        maximizer: Some(best_t),
                        escape: None,
                        converged: gnorm <= 1e-6,
                        iterations,
                    });
                }
                if let GradOutcome::Gradient(g2) = lm.grad(&new_t)? {
                    let gphi2: Vec<f64> = x.iter().zip(&g2).map(|(a, b)| a - b).collect();
                    bfgs_update(&mut h, &t, &new_t, &gphi, &gphi2);
                    prev_smooth = Some((t.clone(), gphi.clone()));
                    t = new_t;
                } else {
                    prev_smooth = Some((t.clone(), gphi.clone()));
                    t = new_t;
                }
            }
            GradOutcome::Kink(witness) => {
                let (dist, proj) = hull_distance(x, &witness.extreme_gradients);
                if dist <= GRAD_TOL {
                    let value = phi(&t)?;
                    return Ok(ConjugateResult {
                        value: ExtReal::Finite(value),
                        maximizer: Some(t),
                        escape: None,
                        converged: true,
                        iterations,
                    });
                }
                // Subgradient ascent with diminishing steps.
                subgrad_steps += 1;
                let step = 1.0 / (1.0 + subgrad_steps as f64);
                for i in 0..n {
                    t[i] += step * (x[i] - proj[i]);
                }
                h = identity(n);
                prev_smooth = None;
                plateau = 0;
            }
        }
    }
    Ok(ConjugateResult {
        value: ExtReal::Finite(best_value),
        maximizer: Some(best_t),
        escape: None,
        converged: false,
        iterations,
    })
}

/// Pins a bracketed 1-D maximizer. The gradient is positive at `lo` and
/// negative at `hi`; bisection either meets the interior stationary point
/// or shrinks into the pressure-tie window of a kink, which the gradient
/// oracle reports explicitly.
fn bisect_1d(
    lm: &LogMgf,
    x: &[f64],
    mut lo: f64,
    mut hi: f64,
    mut iterations: usize,
    phi: &impl Fn(&[f64]) -> Result<f64>,
) -> Result<ConjugateResult> {
    for _ in 0..200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match lm.grad(&[mid])? {
            GradOutcome::Gradient(g) => {
                let gphi = x[0] - g[0];
                if gphi.abs() <= GRAD_TOL {
                    let value = phi(&[mid])?;
                    return Ok(ConjugateResult {
                        value: ExtReal::Finite(value),
                        maximizer: Some(vec![mid]),
                        escape: None,
                        converged: true,
                        iterations,
                    });
                }
                if gphi > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            GradOutcome::Kink(witness) => {
                let lo_g = witness
                    .extreme_gradients
                    .iter()
                    .map(|v| v[0])
                    .fold(f64::INFINITY, f64::min);
                let hi_g = witness
                    .extreme_gradients
                    .iter()
                    .map(|v| v[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                if x[0] >= lo_g - GRAD_TOL && x[0] <= hi_g + GRAD_TOL {
                    let value = phi(&[mid])?;
                    return Ok(ConjugateResult {
                        value: ExtReal::Finite(value),
                        maximizer: Some(vec![mid]),
                        escape: None,
                        converged: true,
                        iterations,
                    });
                }
                if x[0] > hi_g {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    let value = phi(&[mid])?;
    Ok(ConjugateResult {
        value: ExtReal::Finite(value),
        maximizer: Some(vec![mid]),
        escape: None,
        converged: true,
        iterations,
    })
}

/// Ray classification after the ascent left the trust region: exterior
/// points keep a positive slope forever; boundary points flatten out.
fn classify_escape(lm: &LogMgf, x: &[f64], t: &[f64], iterations: usize) -> Result<ConjugateResult> {
    let norm = norm2(t);
    let e: Vec<f64> = t.iter().map(|v| v / norm).collect();
    let mut best = f64::NEG_INFINITY;
    let mut prev: Option<(f64, f64)> = None;
    let mut slope = f64::INFINITY;
    let mut s = ESCAPE_NORM;
    for _ in 0..11 {
        let point: Vec<f64> = e.iter().map(|v| v * s).collect();
        let inner: f64 = point.iter().zip(x).map(|(a, b)| a * b).sum();
        let val = inner - lm.eval(&point)?;
        best = best.max(val);
        if let Some((ps, pv)) = prev {
            slope = (val - pv) / (s - ps);
        }
        prev = Some((s, val));
        s *= 2.0;
    }
    if slope > ESCAPE_SLOPE_TOL {
        Ok(ConjugateResult {
            value: ExtReal::PlusInf,
            maximizer: None,
            escape: Some(EscapeReport { direction: e, exterior: true, ray_slope: slope }),
            converged: false,
            iterations,
        })
    } else {
        Ok(ConjugateResult {
            value: ExtReal::Finite(best),
            maximizer: None,
            escape: Some(EscapeReport { direction: e, exterior: false, ray_slope: slope }),
            converged: false,
            iterations,
        })
    }
}

/// Distance from `x` to the convex hull of `vertices`, plus the projection
/// point, by projected gradient over simplex weights.
fn hull_distance(x: &[f64], vertices: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let m = vertices.len();
    let n = x.len();
    if m == 0 {
        return (f64::INFINITY, vec![0.0; n]);
    }
    let mut alpha = vec![1.0 / m as f64; m];
    // Lipschitz bound for the quadratic: squared Frobenius of the vertex
    // matrix.
    let lip: f64 = vertices.iter().flat_map(|v| v.iter().map(|a| a * a)).sum::<f64>().max(1e-12);
    let point = |alpha: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; n];
        for (a, v) in alpha.iter().zip(vertices) {
            for i in 0..n {
                p[i] += a * v[i];
            }
        }
        p
    };
    for _ in 0..2_000 {
        let p = point(&alpha);
        let resid: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
        let mut grad = vec![0.0; m];
        for (k, v) in vertices.iter().enumerate() {
            grad[k] = dot(v, &resid);
        }
        let mut next = alpha.clone();
        for k in 0..m {
            next[k] -= grad[k] / lip;
        }
        crate::linalg::project_to_simplex(&mut next, 1.0);
        let moved: f64 = next.iter().zip(&alpha).map(|(a, b)| (a - b).abs()).sum();
        alpha = next;
        if moved < 1e-15 {
            break;
        }
    }
    let p = point(&alpha);
    let dist = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    (dist, p)
}

fn best_track(best_value: &mut f64, best_t: &mut Vec<f64>, value: f64, t: &[f64]) {
    if value > *best_value {
        *best_value = value;
        *best_t = t.to_vec();
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Inverse-Hessian BFGS update for maximizing a concave function (standard
/// BFGS applied to the negated gradients). Skipped when the curvature pair
/// is degenerate.
fn bfgs_update(h: &mut Vec<Vec<f64>>, t0: &[f64], t1: &[f64], g0: &[f64], g1: &[f64]) {
    let n = t0.len();
    let s: Vec<f64> = t1.iter().zip(t0).map(|(a, b)| a - b).collect();
    // Gradient of the negated objective moves by g0 - g1.
    let y: Vec<f64> = g0.iter().zip(g1).map(|(a, b)| a - b).collect();
    let sy = dot(&s, &y);
    if sy <= 1e-14 * norm2(&s) * norm2(&y) || sy <= 0.0 {
        return;
    }
    let hy = mat_vec(h, &y);
    let yhy = dot(&y, &hy);
    let rho = 1.0 / sy;
    for i in 0..n {
        for j in 0..n {
            let term1 = (1.0 + yhy * rho) * rho * s[i] * s[j];
            let term2 = rho * (s[i] * hy[j] + hy[i] * s[j]);
            h[i][j] += term1 - term2;
        }
    }
}

/// Kinks of `t ↦ P(f + t·g)` on an interval.
///
/// Grid nodes whose one-sided derivatives already disagree are kinks
/// outright. For each grid cell, the derivative increase across the cell
/// (left derivative at the right end minus right derivative at the left
/// end) bounds the total kink jump inside; cells exceeding the tolerance
/// are bisected, always descending into the half with the larger increase,
/// until the cell is below the resolution. A persistent jump is a kink at
/// the cell midpoint; smooth curvature shrinks with the cell and is
/// rejected. One kink is reported per flagged cell, so the grid must be
/// fine enough to separate distinct kinks.
pub fn kink_scan(
    sft: &Sft,
    f: &Potential,
    g: &Potential,
    t_range: (f64, f64),
    grid: usize,
) -> Result<Vec<f64>> {
    if grid < 2 {
        return Err(Error::Input("kink scan needs a grid of at least 2 nodes".into()));
    }
    let (lo, hi) = t_range;
    if !(hi > lo) {
        return Err(Error::Input(format!("invalid scan interval [{lo}, {hi}]")));
    }
    let one_sided = |t: f64| -> Result<(f64, f64)> {
        let tilted = Potential::linear_combination(sft, &[(1.0, f), (t, g)])?;
        pressure::directional_derivatives(sft, &tilted, g)
    };
    let nodes: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let derivs = crate::exec::map_slice(&nodes, |&t| one_sided(t));
    let mut node_data = Vec::with_capacity(grid);
    for d in derivs {
        node_data.push(d?);
    }
    let mut kinks: Vec<f64> = Vec::new();
    for (t, (dlo, dhi)) in nodes.iter().zip(&node_data) {
        if dhi - dlo > KINK_GAP_TOL {
            kinks.push(*t);
        }
    }
    for i in 0..grid - 1 {
        let (mut a, mut b) = (nodes[i], nodes[i + 1]);
        // Right derivative at the left end, left derivative at the right
        // end: their gap bounds the kink jump inside the cell.
        let mut da = node_data[i].1;
        let mut db = node_data[i + 1].0;
        if db - da <= KINK_GAP_TOL {
            continue;
        }
        loop {
            if b - a <= KINK_T_RESOLUTION {
                if db - da > KINK_GAP_TOL {
                    kinks.push(0.5 * (a + b));
                }
                break;
            }
            let m = 0.5 * (a + b);
            let (mlo, mhi) = one_sided(m)?;
            if mhi - mlo > KINK_GAP_TOL {
                kinks.push(m);
                break;
            }
            let jump_left = mlo - da;
            let jump_right = db - mhi;
            if jump_left >= jump_right {
                b = m;
                db = mlo;
            } else {
                a = m;
                da = mhi;
            }
        }
    }
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup_by(|a, b| (*a - *b).abs() <= 1e-8);
    Ok(kinks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconsistent,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum ConvexityWitness {
    /// Sampled pair whose midpoint fails strict convexity.
    MidpointEquality { x: Vec<f64>, y: Vec<f64>, margin: f64 },
    /// Dual-side kink location.
    DualKink { t: Vec<f64> },
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateTolerances {
    pub margin: f64,
    pub kink_gap: f64,
    pub t_resolution: f64,
}

/// Outcome of [`ess_strict_convexity_check`]: primal midpoint strictness
/// and dual differentiability, which must agree.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexityCertificate {
    pub verdict: Verdict,
    pub min_margin: Option<f64>,
    pub witnesses: Vec<ConvexityWitness>,
    pub grid: Vec<Vec<f64>>,
    pub tolerances: CertificateTolerances,
    pub primal_strict: bool,
    pub dual_differentiable: bool,
    pub skipped_samples: usize,
    pub notes: Vec<String>,
}

/// Certifies essential strict convexity of a rate function two ways.
///
/// Primal: every sampled pair must beat the midpoint inequality by a
/// positive margin. Dual: the conjugate `L` must be differentiable, with no
/// kink witnesses at grid nodes, and in one dimension no kinks hidden
/// between consecutive nodes (found by the same bisection as `kink_scan`).
/// The two verdicts must agree; disagreement yields `Inconsistent`.
/// Pairs whose endpoints evaluate to +∞ (outside the effective domain) are
/// skipped and counted. Pairs at polytope vertices are excluded by that
/// same rule and noted: vertex subgradient behavior is not certified.
pub fn ess_strict_convexity_check(
    lm: &LogMgf,
    rate: impl Fn(&[f64]) -> Result<ExtReal>,
    pairs: &[(Vec<f64>, Vec<f64>)],
    t_grid: &[Vec<f64>],
) -> Result<ConvexityCertificate> {
    let mut min_margin: Option<f64> = None;
    let mut witnesses = Vec::new();
    let mut skipped = 0usize;
    for (x, y) in pairs {
        if x == y {
            skipped += 1;
            continue;
        }
        let (ix, iy) = (rate(x)?, rate(y)?);
        let (Some(vx), Some(vy)) = (ix.finite(), iy.finite()) else {
            skipped += 1;
            continue;
        };
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        let Some(vm) = rate(&mid)?.finite() else {
            skipped += 1;
            continue;
        };
        let margin = 0.5 * (vx + vy) - vm;
        min_margin = Some(min_margin.map_or(margin, |m: f64| m.min(margin)));
        if margin <= MARGIN_TOL {
            witnesses.push(ConvexityWitness::MidpointEquality {
                x: x.clone(),
                y: y.clone(),
                margin,
            });
        }
    }
    let primal_strict = witnesses.is_empty();

    let mut dual_differentiable = true;
    for t in t_grid {
        if let GradOutcome::Kink(w) = lm.grad(t)? {
            dual_differentiable = false;
            witnesses.push(ConvexityWitness::DualKink { t: w.location });
        }
    }
    if lm.dims() == 1 && t_grid.len() >= 2 {
        // Grid nodes almost never land on a kink; sweep between them.
        let mut nodes: Vec<f64> = t_grid.iter().map(|t| t[0]).collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let found = kink_scan(
            &lm.sft,
            &lm.base,
            &lm.directions[0],
            (nodes[0], nodes[nodes.len() - 1]),
            nodes.len(),
        )?;
        for t in found {
            dual_differentiable = false;
            witnesses.push(ConvexityWitness::DualKink { t: vec![t] });
        }
    }

    let verdict = match (primal_strict, dual_differentiable) {
        (true, true) => Verdict::Pass,
        (false, false) => Verdict::Fail,
        _ => Verdict::Inconsistent,
    };
    let mut notes = vec![
        "pairs at or outside the boundary of the achievable-mean polytope are skipped; \
         vertex subgradient behavior is not certified"
            .to_string(),
    ];
    if skipped > 0 {
        notes.push(format!("{skipped} sample pair(s) skipped as outside the domain"));
    }
    Ok(ConvexityCertificate {
        verdict,
        min_margin,
        witnesses,
        grid: t_grid.to_vec(),
        tolerances: CertificateTolerances {
            margin: MARGIN_TOL,
            kink_gap: KINK_GAP_TOL,
            t_resolution: KINK_T_RESOLUTION,
        },
        primal_strict,
        dual_differentiable,
        skipped_samples: skipped,
        notes,
    })
}
