//! Finite-stage cylinder coordinate system: a Haar-type basis for locally
//! constant functions, coordinate-functional norm bounds, the perturbation
//! stability sum, and the randomized span-inclusion check.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::{least_squares, numerical_rank};
use crate::sft::{Potential, Sft, Symbol, Word};
use crate::{Error, Result};

/// Largest coordinate dimension (admissible word count at the truncation
/// depth) the basis will materialize.
pub const BASIS_DIM_CAP: usize = 1024;
/// Least-squares membership threshold for the span checks.
pub const SPAN_RESIDUAL_TOL: f64 = 1e-9;
/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-9;
/// Number of randomized combinations drawn by the inclusion check.
pub const SPAN_TRIALS: usize = 200;

/// One element of the cylinder basis: the constant function, or the
/// Haar-type bump on `[word]` separating the continuation `[word j]` from
/// the conditional average over `[word]`.
#[derive(Clone, Debug)]
pub struct BasisElement {
    pub word: Word,
    /// `None` for the leading constant element.
    pub continuation: Option<Symbol>,
    pub function: Potential,
}

/// Ordered cylinder basis truncated at depth `K`: the constant function
/// first, then for each admissible word (by length, then lexicographically)
/// one Haar-type element per non-initial admissible continuation. The
/// elements up to depth `K` span the depth-`K` locally constant functions
/// exactly, and the coordinate functionals come with computed norm bounds.
#[derive(Clone, Debug)]
pub struct CylinderBasis {
    sft: Sft,
    depth: usize,
    elements: Vec<BasisElement>,
    words: Vec<Word>,
    /// Columns are element values on the admissible depth-`K` words.
    matrix: DMatrix<f64>,
    /// Rows are the coordinate functionals in the same word coordinates.
    inverse: DMatrix<f64>,
    norms: Vec<f64>,
}

impl CylinderBasis {
    pub fn new(sft: &Sft, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Input("truncation depth must be at least 1".into()));
        }
        let words = sft.enumerate_words_capped(depth, BASIS_DIM_CAP)?;
        let dim = words.len();
        let mut elements = Vec::with_capacity(dim);
        elements.push(BasisElement {
            word: Vec::new(),
            continuation: None,
            function: Potential::constant(sft, 1.0),
        });
        for len in 0..depth {
            let prefixes: Vec<Word> = if len == 0 {
                vec![Vec::new()]
            } else {
                sft.enumerate_words_capped(len, BASIS_DIM_CAP)?
            };
            for w in prefixes {
                let conts: Vec<Symbol> = if w.is_empty() {
                    (0..sft.alphabet_size() as Symbol).collect()
                } else {
                    let mut ext: Word = w.clone();
                    ext.push(0);
                    sft.successors(w[w.len() - 1])
                        .iter()
                        .copied()
                        .filter(|&j| {
                            *ext.last_mut().unwrap() = j;
                            sft.is_admissible(&ext)
                        })
                        .collect()
                };
                let share = 1.0 / conts.len() as f64;
                // The smallest continuation is the initial one; every other
                // continuation contributes a Haar-type element.
                for &j in conts.iter().skip(1) {
                    let w0 = w.clone();
                    let f = Potential::from_fn(sft, w.len() + 1, move |u| {
                        if u[..w0.len()] == w0[..] {
                            (if u[w0.len()] == j { 1.0 } else { 0.0 }) - share
                        } else {
                            0.0
                        }
                    });
                    elements.push(BasisElement {
                        word: w.clone(),
                        continuation: Some(j),
                        function: f,
                    });
                }
            }
        }
        if elements.len() != dim {
            return Err(Error::Numerical(format!(
                "basis produced {} elements for a dimension-{dim} space",
                elements.len()
            )));
        }
        let matrix = DMatrix::from_fn(dim, dim, |i, j| {
            let el = &elements[j];
            let d = el.function.depth();
            el.function.value(&words[i][..d]).unwrap_or(0.0)
        });
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("cylinder basis matrix is singular".into()))?;
        let norms: Vec<f64> = (0..dim)
            .map(|n| inverse.row(n).iter().map(|v| v.abs()).sum())
            .collect();
        Ok(CylinderBasis {
            sft: sft.clone(),
            depth,
            elements,
            words,
            matrix,
            inverse,
            norms,
        })
    }

    pub fn sft(&self) -> &Sft {
        &self.sft
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    /// Norm bounds `s_n = sup_{‖f‖_sup ≤ 1} |λ_n(f)|` of the coordinate
    /// functionals over depth-`K` functions: the ℓ1 norms of the dual rows,
    /// attained at a ±1 sign pattern.
    pub fn functional_norms(&self) -> &[f64] {
        &self.norms
    }

    /// Coordinates of `f` in the basis; the expansion reconstructs `f`
    /// exactly because depth-`K` functions are the basis's span.
    pub fn expand(&self, f: &Potential) -> Result<Vec<f64>> {
        if f.depth() > self.depth {
            return Err(Error::Input(format!(
                "potential depth {} exceeds the truncation depth {}",
                f.depth(),
                self.depth
            )));
        }
        let v = self.coordinate_vector(f);
        Ok((&self.inverse * v).iter().copied().collect())
    }

    /// Sup-norm of `f − Σ λ_k f_k` on depth-`K` words.
    pub fn reconstruction_error(&self, f: &Potential, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::Input(format!(
                "expected {} coefficients, got {}",
                self.len(),
                coeffs.len()
            )));
        }
        let v = self.coordinate_vector(f);
        let rebuilt = &self.matrix * DVector::from_column_slice(coeffs);
        Ok((v - rebuilt).amax())
    }

    /// `Σ s_n·h_norms[n]` together with the stability verdict `Σ < 1`: a
    /// perturbation of the basis elements by functions with these sup norms
    /// keeps the coordinate system invertible when the sum is below 1.
    pub fn perturbation_condition(&self, h_norms: &[f64]) -> Result<(f64, bool)> {
        if h_norms.len() != self.len() {
            return Err(Error::Input(format!(
                "expected {} perturbation norms, got {}",
                self.len(),
                h_norms.len()
            )));
        }
        for (n, h) in h_norms.iter().enumerate() {
            if !h.is_finite() || *h < 0.0 {
                return Err(Error::Input(format!(
                    "perturbation norm {n} must be finite and nonnegative, got {h}"
                )));
            }
        }
        let sum: f64 = self.norms.iter().zip(h_norms).map(|(s, h)| s * h).sum();
        Ok((sum, sum < 1.0))
    }

    fn coordinate_vector(&self, f: &Potential) -> DVector<f64> {
        let d = f.depth();
        DVector::from_fn(self.words.len(), |i, _| {
            f.value(&self.words[i][..d]).unwrap_or(0.0)
        })
    }
}

/// Verdict of the randomized span-inclusion check.
#[derive(Clone, Debug, Serialize)]
pub struct SpanVerdict {
    /// Whether the perturbation sequence is linearly independent.
    pub independent: bool,
    /// Whether every sampled nonzero combination of the perturbed sequence
    /// decomposes with a nonzero second-subspace component.
    pub inclusion_holds: bool,
    pub trials: usize,
    /// Largest decomposition residual seen across trials.
    pub max_residual: f64,
}

/// Checks the span inclusion `span({f_n + h_n}) \ {0} ⊆ W + (W̃ \ {0})` on
/// randomized combinations, in the cylinder coordinate system deep enough
/// for all inputs.
///
/// Preconditions: `w_basis` and `wt_basis` stack to a full-rank coordinate
/// matrix (their spans intersect trivially and each is independent), each
/// `f_seq[i]` lies in span `W`, each `h_seq[i]` in span `W̃`, and the two
/// sequences pair up. Kernel directions of the perturbation sequence are
/// probed deterministically before the random draws, so a dependent
/// sequence paired with an independent `f_seq` is always caught.
pub fn lemma14_span_check(
    sft: &Sft,
    w_basis: &[Potential],
    wt_basis: &[Potential],
    f_seq: &[Potential],
    h_seq: &[Potential],
) -> Result<SpanVerdict> {
    if f_seq.len() != h_seq.len() {
        return Err(Error::Input(format!(
            "sequence lengths differ: {} vs {}",
            f_seq.len(),
            h_seq.len()
        )));
    }
    let depth = w_basis
        .iter()
        .chain(wt_basis)
        .chain(f_seq)
        .chain(h_seq)
        .map(|p| p.depth())
        .max()
        .unwrap_or(1);
    let basis = CylinderBasis::new(sft, depth)?;
    let coords = |ps: &[Potential]| -> Result<DMatrix<f64>> {
        let mut cols = Vec::with_capacity(ps.len());
        for p in ps {
            cols.push(basis.expand(p)?);
        }
        Ok(DMatrix::from_fn(basis.len(), ps.len(), |i, j| cols[j][i]))
    };
    let w_mat = coords(w_basis)?;
    let wt_mat = coords(wt_basis)?;
    let f_mat = coords(f_seq)?;
    let h_mat = coords(h_seq)?;

    // Precondition: the stacked subspace basis is independent.
    let stacked = {
        let mut m = DMatrix::zeros(basis.len(), w_basis.len() + wt_basis.len());
        m.view_mut((0, 0), (basis.len(), w_basis.len())).copy_from(&w_mat);
        m.view_mut((0, w_basis.len()), (basis.len(), wt_basis.len()))
            .copy_from(&wt_mat);
        m
    };
    let stacked_cols = w_basis.len() + wt_basis.len();
    if stacked_cols > 0 && numerical_rank(&stacked, RANK_TOL) != stacked_cols {
        return Err(Error::Input(
            "the two subspace bases are not jointly independent".into(),
        ));
    }
    // Precondition: membership of the sequences in their subspaces.
    for (label, seq_mat, basis_mat) in
        [("first", &f_mat, &w_mat), ("second", &h_mat, &wt_mat)]
    {
        for j in 0..seq_mat.ncols() {
            let target = DVector::from_column_slice(seq_mat.column(j).as_slice());
            let scale = 1.0 + target.norm();
            let residual = if basis_mat.ncols() == 0 {
                target.norm()
            } else {
                least_squares(basis_mat, &target)?.1
            };
            if residual > SPAN_RESIDUAL_TOL * scale {
                return Err(Error::Input(format!(
                    "{label} sequence member {j} is outside its subspace \
                     (residual {residual:.3e})"
                )));
            }
        }
    }

    let m = f_seq.len();
    let independent = m == 0 || numerical_rank(&h_mat, RANK_TOL) == m;
    if m == 0 {
        return Ok(SpanVerdict {
            independent: true,
            inclusion_holds: true,
            trials: 0,
            max_residual: 0.0,
        });
    }

    // Deterministic kernel probes first: combinations annihilating the
    // perturbations are exactly where the inclusion can fail.
    let mut probes: Vec<DVector<f64>> = Vec::new();
    if !independent {
        let svd = h_mat.clone().svd(false, true);
        let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
        let vt = svd.v_t.as_ref().expect("svd requested v_t");
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s <= RANK_TOL * smax.max(1e-300) {
                probes.push(DVector::from_fn(m, |j, _| vt[(i, j)]));
            }
        }
        for i in svd.singular_values.len()..m {
            probes.push(DVector::from_fn(m, |j, _| vt[(i, j)]));
        }
    }
    let mut rng = SplitMix::new(0x5EED_CAB1_ED00_14D3);
    while probes.len() < SPAN_TRIALS {
        probes.push(DVector::from_fn(m, |_, _| rng.next_sym()));
    }
    probes.truncate(SPAN_TRIALS);

    let mut inclusion_holds = true;
    let mut max_residual = 0.0f64;
    for c in &probes {
        let combo = &f_mat * c + &h_mat * c;
        if combo.amax() <= 1e-12 {
            // The zero function is excluded from the inclusion claim.
            continue;
        }
        let (sol, residual) = least_squares(&stacked, &combo)?;
        max_residual = max_residual.max(residual);
        if residual > SPAN_RESIDUAL_TOL * (1.0 + combo.norm()) {
            inclusion_holds = false;
            continue;
        }
        let wt_part = if wt_basis.is_empty() {
            0.0
        } else {
            (&wt_mat * sol.rows(w_basis.len(), wt_basis.len())).norm()
        };
        if wt_part <= SPAN_RESIDUAL_TOL {
            inclusion_holds = false;
        }
    }
    Ok(SpanVerdict {
        independent,
        inclusion_holds,
        trials: SPAN_TRIALS,
        max_residual,
    })
}

/// SplitMix64: a deterministic generator for the randomized trials.
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

    /// Uniform on [−1, 1].
    fn next_sym(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        2.0 * u - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_shift_basis(depth: usize) -> CylinderBasis {
        CylinderBasis::new(&Sft::full_shift(2), depth).unwrap()
    }

    #[test]
    fn dimension_matches_the_word_count() {
        let sft = Sft::golden_mean();
        for depth in 1..=4 {
            let basis = CylinderBasis::new(&sft, depth).unwrap();
            assert_eq!(basis.len() as u128, sft.count_words(depth));
        }
        assert_eq!(two_shift_basis(3).len(), 8);
    }

    #[test]
    fn constant_expands_on_the_first_element_alone() {
        let basis = two_shift_basis(2);
        let coeffs = basis.expand(&Potential::constant(basis.sft(), 1.0)).unwrap();
        assert_relative_eq!(coeffs[0], 1.0, epsilon = 1e-12);
        for c in &coeffs[1..] {
            assert!(c.abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_expands_to_zero_coefficients() {
        let basis = two_shift_basis(3);
        let coeffs = basis.expand(&Potential::zero(basis.sft())).unwrap();
        assert!(coeffs.iter().all(|c| c.abs() <= 1e-12));
    }

    #[test]
    fn symbol_indicator_has_the_two_term_expansion() {
        // 1_{[1]} = 1/2·1 + ψ where ψ = 1_{[1]} − 1/2 is the depth-1
        // Haar element of the two-shift.
        let basis = two_shift_basis(1);
        let ind = Potential::indicator(basis.sft(), &[1]).unwrap();
        let coeffs = basis.expand(&ind).unwrap();
        assert_eq!(coeffs.len(), 2);
        assert_relative_eq!(coeffs[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(coeffs[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expansion_reconstructs_random_potentials_exactly() {
        let mut rng = SplitMix::new(7);
        for depth in 1..=4 {
            let basis = two_shift_basis(depth);
            for _ in 0..25 {
                let rng_local = std::cell::RefCell::new(SplitMix::new(rng.next_u64()));
                let f = Potential::from_fn(basis.sft(), depth, |_| {
                    3.0 * rng_local.borrow_mut().next_sym()
                });
                let coeffs = basis.expand(&f).unwrap();
                let err = basis.reconstruction_error(&f, &coeffs).unwrap();
                assert!(err <= 1e-12, "depth {depth} residual {err}");
            }
        }
    }

    #[test]
    fn shallow_inputs_use_only_shallow_elements() {
        let basis = two_shift_basis(3);
        let f = Potential::indicator(basis.sft(), &[0]).unwrap().scale(1.7);
        let coeffs = basis.expand(&f).unwrap();
        for (el, c) in basis.elements().iter().zip(&coeffs) {
            if el.function.depth() > 1 {
                assert!(c.abs() <= 1e-12, "deep element picked up {c}");
            }
        }
    }

    #[test]
    fn depth_overflow_is_an_input_error() {
        let basis = two_shift_basis(2);
        let deep = Potential::from_fn(basis.sft(), 3, |w| w[2] as f64);
        assert!(matches!(basis.expand(&deep), Err(Error::Input(_))));
    }

    #[test]
    fn functional_norms_stay_below_two_and_match_the_sign_enumeration() {
        for basis in [two_shift_basis(3), CylinderBasis::new(&Sft::golden_mean(), 3).unwrap()]
        {
            let dim = basis.len();
            let norms = basis.functional_norms();
            assert!(norms.iter().all(|&s| s <= 2.0 + 1e-12), "norms {norms:?}");
            // Extreme points of the sup-ball among depth-K functions are
            // the ±1 sign patterns on the coordinate words.
            for n in 0..dim {
                let mut best = 0.0f64;
                for mask in 0..(1u32 << dim) {
                    let v = DVector::from_fn(dim, |i, _| {
                        if mask & (1 << i) != 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    });
                    best = best.max((basis.inverse.row(n) * &v)[(0, 0)].abs());
                }
                assert_relative_eq!(best, norms[n], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_perturbations_are_stable() {
        let basis = two_shift_basis(2);
        let (sum, holds) = basis.perturbation_condition(&vec![0.0; basis.len()]).unwrap();
        assert_eq!(sum, 0.0);
        assert!(holds);
    }

    #[test]
    fn geometric_perturbations_stay_below_one_half() {
        let basis = two_shift_basis(3);
        let h: Vec<f64> = basis
            .functional_norms()
            .iter()
            .enumerate()
            .map(|(n, s)| 0.25 * 0.5f64.powi(n as i32) / s)
            .collect();
        let (sum, holds) = basis.perturbation_condition(&h).unwrap();
        let expect: f64 = (0..basis.len()).map(|n| 0.25 * 0.5f64.powi(n as i32)).sum();
        assert_relative_eq!(sum, expect, epsilon = 1e-12);
        assert!(sum < 0.5);
        assert!(holds);
    }

    #[test]
    fn a_single_large_perturbation_fails_the_condition() {
        let basis = two_shift_basis(2);
        let mut h = vec![0.0; basis.len()];
        h[0] = 2.0 / basis.functional_norms()[0];
        let (sum, holds) = basis.perturbation_condition(&h).unwrap();
        assert!(sum >= 2.0 - 1e-12);
        assert!(!holds);
    }

    #[test]
    fn independent_perturbations_keep_the_inclusion() {
        let sft = Sft::full_shift(2);
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
        let verdict = lemma14_span_check(
            &sft,
            &[one.clone(), ind0.clone()],
            &[psi.clone(), psi2.clone()],
            &[one, ind0],
            &[psi, psi2],
        )
        .unwrap();
        assert!(verdict.independent);
        assert!(verdict.inclusion_holds);
        assert_eq!(verdict.trials, SPAN_TRIALS);
        assert!(verdict.max_residual <= SPAN_RESIDUAL_TOL);
    }

    #[test]
    fn repeated_perturbations_break_the_inclusion() {
        let sft = Sft::full_shift(2);
        let one = Potential::constant(&sft, 1.0);
        let ind0 = Potential::indicator(&sft, &[0]).unwrap();
        let psi = Potential::from_fn(&sft, 2, |w| {
            if w[0] == 0 {
                (if w[1] == 1 { 1.0 } else { 0.0 }) - 0.5
            } else {
                0.0
            }
        });
        let verdict = lemma14_span_check(
            &sft,
            &[one.clone(), ind0.clone()],
            &[psi.clone()],
            &[one, ind0],
            &[psi.clone(), psi],
        )
        .unwrap();
        assert!(!verdict.independent);
        // The kernel direction (1, −1) maps to the nonzero function
        // 1 − 1_{[0]} with no second-subspace component.
        assert!(!verdict.inclusion_holds);
    }

    #[test]
    fn empty_sequences_pass_vacuously() {
        let sft = Sft::full_shift(2);
        let verdict = lemma14_span_check(&sft, &[], &[], &[], &[]).unwrap();
        assert!(verdict.independent);
        assert!(verdict.inclusion_holds);
        assert_eq!(verdict.trials, 0);
        assert_eq!(verdict.max_residual, 0.0);
    }

    #[test]
    fn overlapping_subspaces_are_rejected() {
        let sft = Sft::full_shift(2);
        let one = Potential::constant(&sft, 1.0);
        let err = lemma14_span_check(
            &sft,
            &[one.clone()],
            &[one.scale(2.0)],
            &[],
            &[],
        );
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn membership_violations_are_rejected() {
        let sft = Sft::full_shift(2);
        let one = Potential::constant(&sft, 1.0);
        let ind1 = Potential::indicator(&sft, &[1]).unwrap();
        let psi = Potential::from_fn(&sft, 2, |w| {
            if w[0] == 0 {
                (if w[1] == 1 { 1.0 } else { 0.0 }) - 0.5
            } else {
                0.0
            }
        });
        // f_seq member is psi-like, not in span{1}.
        let err = lemma14_span_check(
            &sft,
            &[one],
            &[psi.clone()],
            &[ind1],
            &[psi],
        );
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn verdicts_serialize_with_the_expected_fields() {
        let sft = Sft::full_shift(2);
        let verdict = lemma14_span_check(&sft, &[], &[], &[], &[]).unwrap();
        let json = serde_json::to_value(&verdict).unwrap();
        assert_eq!(json["independent"], true);
        assert_eq!(json["inclusion_holds"], true);
        assert_eq!(json["trials"], 0);
        assert_eq!(json["max_residual"], 0.0);
    }
}
