//! Subshifts of finite type, their word language, and locally constant
//! potentials.
//!
//! An [`Sft`] is an alphabet `{0, …, m−1}` together with a 0/1 transition
//! matrix; the shift space consists of all one-sided sequences whose adjacent
//! pairs are allowed. Finite admissible words double as the separated sets
//! over which pressure sums run: below symbol-separation scale, the
//! `(ε, n)`-separated sets are exactly the admissible `n`-word cylinders.
//!
//! A [`Potential`] is a locally constant observable: a depth `k` and a total
//! value table over admissible `k`-words.

use std::collections::BTreeMap;

use crate::{Error, Result};

pub type Symbol = u8;
pub type Word = Vec<Symbol>;

/// Default enumeration cap: keeps desk-scale runs in seconds while allowing
/// n ≈ 22 on binary alphabets.
pub const WORD_CAP: usize = 10_000_000;

/// Construction-time validation failures for shift spaces, potentials and
/// measures.
#[derive(Debug, thiserror::Error)]
pub enum SftError {
    #[error("alphabet size must be positive")]
    EmptyAlphabet,
    #[error("transition matrix must be {expected}x{expected}, got row {row} of length {got}")]
    BadShape { expected: usize, row: usize, got: usize },
    #[error("transition entries must be 0 or 1, got {value} at ({row},{col})")]
    BadEntry { row: usize, col: usize, value: u8 },
    #[error("symbol {0} is stranded: its transition row has no 1")]
    EmptyRow(usize),
    #[error("symbol {0} is stranded: its transition column has no 1")]
    EmptyColumn(usize),
    #[error("potential depth must be positive")]
    ZeroDepth,
    #[error("potential value for word {0:?} is not finite")]
    NonFinite(Word),
    #[error("potential table is missing admissible word {0:?}")]
    MissingWord(Word),
    #[error("potential table contains inadmissible word {0:?}")]
    ForeignWord(Word),
    #[error("{0}")]
    Measure(String),
}

/// One strongly connected component of the symbol graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SftComponent {
    pub id: usize,
    pub symbols: Vec<Symbol>,
    /// True when the component contains a cycle (size > 1 or a self-loop);
    /// only such components carry invariant measures.
    pub nontrivial: bool,
}

/// A one-sided subshift of finite type.
#[derive(Clone, Debug, PartialEq)]
pub struct Sft {
    alphabet: usize,
    transitions: Vec<Vec<u8>>,
    successors: Vec<Vec<Symbol>>,
    component_index: Vec<usize>,
    components: Vec<SftComponent>,
}

impl Sft {
    /// Validates the transition matrix and derives the component labels.
    /// Every row and column must contain a 1 (no stranded symbols).
    pub fn new(alphabet: usize, transitions: Vec<Vec<u8>>) -> std::result::Result<Self, SftError> {
        if alphabet == 0 {
            return Err(SftError::EmptyAlphabet);
        }
        if transitions.len() != alphabet {
            return Err(SftError::BadShape { expected: alphabet, row: alphabet, got: transitions.len() });
        }
        for (i, row) in transitions.iter().enumerate() {
            if row.len() != alphabet {
                return Err(SftError::BadShape { expected: alphabet, row: i, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(SftError::BadEntry { row: i, col: j, value: v });
                }
            }
        }
        for (i, row) in transitions.iter().enumerate() {
            if row.iter().all(|&v| v == 0) {
                return Err(SftError::EmptyRow(i));
            }
        }
        for j in 0..alphabet {
            if (0..alphabet).all(|i| transitions[i][j] == 0) {
                return Err(SftError::EmptyColumn(j));
            }
        }
        let successors: Vec<Vec<Symbol>> = transitions
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &v)| v == 1).map(|(j, _)| j as Symbol).collect())
            .collect();
        let (component_index, components) = scc(alphabet, &|u| {
            successors[u].iter().map(|&s| s as usize).collect::<Vec<_>>()
        });
        let components = components
            .into_iter()
            .enumerate()
            .map(|(id, symbols)| {
                let nontrivial = symbols.len() > 1
                    || symbols.iter().any(|&s| transitions[s as usize][s as usize] == 1);
                SftComponent { id, symbols, nontrivial }
            })
            .collect();
        Ok(Sft { alphabet, transitions, successors, component_index, components })
    }

    /// The full shift on `m` symbols (all transitions allowed).
    pub fn full_shift(m: usize) -> Self {
        Sft::new(m, vec![vec![1; m]; m]).expect("full shift is always valid")
    }

    /// The golden-mean shift: binary alphabet, word "11" forbidden.
    pub fn golden_mean() -> Self {
        Sft::new(2, vec![vec![1, 1], vec![1, 0]]).expect("golden mean shift is valid")
    }

    /// Disjoint union: block-diagonal transition structure, `other`'s
    /// symbols shifted up by `self.alphabet_size()`.
    pub fn disjoint_union(&self, other: &Sft) -> Self {
        let m = self.alphabet + other.alphabet;
        let mut t = vec![vec![0u8; m]; m];
        for i in 0..self.alphabet {
            for j in 0..self.alphabet {
                t[i][j] = self.transitions[i][j];
            }
        }
        for i in 0..other.alphabet {
            for j in 0..other.alphabet {
                t[self.alphabet + i][self.alphabet + j] = other.transitions[i][j];
            }
        }
        Sft::new(m, t).expect("union of valid shifts is valid")
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn transitions(&self) -> &[Vec<u8>] {
        &self.transitions
    }

    #[inline]
    pub fn is_allowed(&self, a: Symbol, b: Symbol) -> bool {
        self.transitions[a as usize][b as usize] == 1
    }

    pub fn successors(&self, a: Symbol) -> &[Symbol] {
        &self.successors[a as usize]
    }

    /// True iff every adjacent pair of `word` is allowed (empty and
    /// single-symbol words are admissible).
    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        if word.iter().any(|&s| (s as usize) >= self.alphabet) {
            return false;
        }
        word.windows(2).all(|p| self.is_allowed(p[0], p[1]))
    }

    pub fn components(&self) -> &[SftComponent] {
        &self.components
    }

    pub fn component_of(&self, s: Symbol) -> usize {
        self.component_index[s as usize]
    }

    /// Irreducible = the whole symbol graph is one strongly connected
    /// component with a cycle.
    pub fn is_irreducible(&self) -> bool {
        self.components.len() == 1 && self.components[0].nontrivial
    }

    /// Number of admissible `n`-words, saturating at `u128::MAX`; equals the
    /// entrywise sum of `transitions^(n−1)`.
    pub fn count_words(&self, n: usize) -> u128 {
        assert!(n >= 1, "word length must be positive");
        let m = self.alphabet;
        // Row-counts DP: counts[s] = number of admissible words of the
        // current length ending at s.
        let mut counts = vec![1u128; m];
        for _ in 1..n {
            let mut next = vec![0u128; m];
            for a in 0..m {
                for &b in &self.successors[a] {
                    next[b as usize] = next[b as usize].saturating_add(counts[a]);
                }
            }
            counts = next;
        }
        counts.iter().fold(0u128, |acc, &c| acc.saturating_add(c))
    }

    /// Streams every admissible `n`-word in lexicographic order through
    /// `visit`, without materializing the list.
    pub fn for_each_word<F: FnMut(&[Symbol])>(&self, n: usize, mut visit: F) {
        assert!(n >= 1);
        let all: Vec<Symbol> = (0..self.alphabet as Symbol).collect();
        let mut word: Vec<Symbol> = Vec::with_capacity(n);
        // Backtracking DFS; next[d] is the index of the next option to try
        // at depth d. Successor lists are in ascending symbol order, so the
        // visit order is lexicographic.
        let mut next = vec![0usize; n];
        loop {
            let d = word.len();
            let options: &[Symbol] = if d == 0 { &all } else { self.successors(word[d - 1]) };
            if next[d] < options.len() {
                let s = options[next[d]];
                next[d] += 1;
                word.push(s);
                if word.len() == n {
                    visit(&word);
                    word.pop();
                } else {
                    next[word.len()] = 0;
                }
            } else if d == 0 {
                break;
            } else {
                word.pop();
            }
        }
    }

    /// Returns exactly the admissible `n`-words in lexicographic order.
    /// Errors when the count exceeds `cap`.
    pub fn enumerate_words_capped(&self, n: usize, cap: usize) -> Result<Vec<Word>> {
        if n == 0 {
            return Err(Error::Input("word length must be at least 1".into()));
        }
        let count = self.count_words(n);
        if count > cap as u128 {
            return Err(Error::Resource(format!(
                "admissible {n}-word count {count} exceeds enumeration cap {cap}"
            )));
        }
        let mut out = Vec::with_capacity(count as usize);
        self.for_each_word(n, |w| out.push(w.to_vec()));
        Ok(out)
    }

    /// [`Sft::enumerate_words_capped`] with the default cap of 10^7 words.
    pub fn enumerate_words(&self, n: usize) -> Result<Vec<Word>> {
        self.enumerate_words_capped(n, WORD_CAP)
    }
}

/// Iterative Tarjan SCC. Components are emitted in a deterministic order and
/// then re-sorted by their smallest symbol so labels are stable and readable.
fn scc(n: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> (Vec<usize>, Vec<Vec<Symbol>>) {
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut raw_components: Vec<Vec<usize>> = Vec::new();

    // Explicit DFS stack of (node, successor list, next child position).
    let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, succ(root), 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref children, ref mut pos)) = call.last_mut() {
            if *pos < children.len() {
                let w = children[*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succ(w), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&mut (parent, _, _)) = call.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    raw_components.push(comp);
                }
            }
        }
    }
    raw_components.sort_by_key(|c| c[0]);
    let mut labels = vec![0usize; n];
    let mut components = Vec::with_capacity(raw_components.len());
    for (id, comp) in raw_components.into_iter().enumerate() {
        for &s in &comp {
            labels[s] = id;
        }
        components.push(comp.into_iter().map(|s| s as Symbol).collect());
    }
    (labels, components)
}

/// A locally constant observable: depth `k` plus a total value table over
/// admissible `k`-words.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    depth: usize,
    values: BTreeMap<Word, f64>,
}

impl Potential {
    /// Validates totality (every admissible `depth`-word has a finite value)
    /// and rejects foreign keys.
    pub fn new(
        sft: &Sft,
        depth: usize,
        values: BTreeMap<Word, f64>,
    ) -> std::result::Result<Self, SftError> {
        if depth == 0 {
            return Err(SftError::ZeroDepth);
        }
        for (w, &v) in &values {
            if w.len() != depth || !sft.is_admissible(w) {
                return Err(SftError::ForeignWord(w.clone()));
            }
            if !v.is_finite() {
                return Err(SftError::NonFinite(w.clone()));
            }
        }
        let mut missing: Option<Word> = None;
        sft.for_each_word(depth, |w| {
            if missing.is_none() && !values.contains_key(w) {
                missing = Some(w.to_vec());
            }
        });
        if let Some(w) = missing {
            return Err(SftError::MissingWord(w));
        }
        Ok(Potential { depth, values })
    }

    pub fn from_fn(sft: &Sft, depth: usize, f: impl Fn(&[Symbol]) -> f64) -> Self {
        assert!(depth >= 1);
        let mut values = BTreeMap::new();
        sft.for_each_word(depth, |w| {
            values.insert(w.to_vec(), f(w));
        });
        Potential { depth, values }
    }

    /// The zero potential at depth 1.
    pub fn zero(sft: &Sft) -> Self {
        Potential::from_fn(sft, 1, |_| 0.0)
    }

    /// Constant potential at depth 1.
    pub fn constant(sft: &Sft, c: f64) -> Self {
        Potential::from_fn(sft, 1, |_| c)
    }

    /// Indicator of a single admissible word (depth = word length).
    pub fn indicator(sft: &Sft, word: &[Symbol]) -> std::result::Result<Self, SftError> {
        if word.is_empty() {
            return Err(SftError::ZeroDepth);
        }
        if !sft.is_admissible(word) {
            return Err(SftError::ForeignWord(word.to_vec()));
        }
        Ok(Potential::from_fn(sft, word.len(), |w| if w == word { 1.0 } else { 0.0 }))
    }

    /// Indicator of a set of symbols (depth 1), e.g. one union component.
    pub fn symbol_set_indicator(sft: &Sft, symbols: &[Symbol]) -> Self {
        Potential::from_fn(sft, 1, |w| if symbols.contains(&w[0]) { 1.0 } else { 0.0 })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &BTreeMap<Word, f64> {
        &self.values
    }

    #[inline]
    pub fn value(&self, w: &[Symbol]) -> Option<f64> {
        self.values.get(w).copied()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.values().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Same table with `c` added to every value.
    pub fn add_constant(&self, c: f64) -> Self {
        Potential {
            depth: self.depth,
            values: self.values.iter().map(|(w, &v)| (w.clone(), v + c)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Potential {
            depth: self.depth,
            values: self.values.iter().map(|(w, &v)| (w.clone(), c * v)).collect(),
        }
    }

    /// Re-expresses the potential at a deeper depth: the value on a
    /// `new_depth`-word is the value on its first `depth` symbols.
    pub fn lift(&self, sft: &Sft, new_depth: usize) -> std::result::Result<Self, SftError> {
        if new_depth < self.depth {
            return Err(SftError::Measure(format!(
                "cannot lift depth {} potential down to depth {}",
                self.depth, new_depth
            )));
        }
        if new_depth == self.depth {
            return Ok(self.clone());
        }
        Ok(Potential::from_fn(sft, new_depth, |w| {
            self.value(&w[..self.depth]).expect("prefix of admissible word is admissible")
        }))
    }

    /// Lifts all terms to the common max depth and forms `Σ cᵢ·fᵢ`.
    pub fn linear_combination(
        sft: &Sft,
        terms: &[(f64, &Potential)],
    ) -> std::result::Result<Self, SftError> {
        let depth = terms.iter().map(|(_, p)| p.depth).max().unwrap_or(1).max(1);
        Ok(Potential::from_fn(sft, depth, |w| {
            terms.iter().map(|(c, p)| c * p.value(&w[..p.depth]).expect("admissible prefix")).sum()
        }))
    }

    /// Cyclic Birkhoff sum: the word is read as the periodic point it
    /// generates, so all `n` windows are defined for a depth-`k` table.
    /// Windows that cross the wrap and are not admissible `k`-words (possible
    /// on non-full shifts when the last-to-first junction is forbidden)
    /// contribute 0; this perturbs normalized pressure sums by `O(1/n)`
    /// uniformly in the potential's sup-norm.
    pub fn birkhoff_sum(&self, sft: &Sft, w: &[Symbol]) -> Result<f64> {
        let n = w.len();
        let k = self.depth;
        if n < k {
            return Err(Error::Input(format!(
                "word of length {n} is shorter than potential depth {k}"
            )));
        }
        if !sft.is_admissible(w) {
            return Err(Error::Input(format!("word {w:?} is not admissible")));
        }
        let mut total = 0.0f64;
        let mut window: Word = Vec::with_capacity(k);
        for i in 0..n {
            if i + k <= n {
                total += self.value(&w[i..i + k]).expect("interior window is admissible");
            } else {
                window.clear();
                window.extend_from_slice(&w[i..]);
                window.extend_from_slice(&w[..k - (n - i)]);
                if let Some(v) = self.value(&window) {
                    total += v;
                }
                // Inadmissible wrap windows contribute 0 by convention.
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_shift() -> Sft {
        Sft::full_shift(2)
    }

    /// Independent oracle: entrywise sum of transitions^(n-1) via u128
    /// matrix powers, no shared code with count_words' DP.
    fn matrix_power_count(t: &[Vec<u8>], n: usize) -> u128 {
        let m = t.len();
        let mut acc: Vec<Vec<u128>> = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1u128 } else { 0 }).collect())
            .collect();
        for _ in 1..n {
            let mut next = vec![vec![0u128; m]; m];
            for i in 0..m {
                for k in 0..m {
                    if acc[i][k] == 0 {
                        continue;
                    }
                    for j in 0..m {
                        next[i][j] += acc[i][k] * t[k][j] as u128;
                    }
                }
            }
            acc = next;
        }
        acc.iter().flatten().sum()
    }

    #[test]
    fn enumerates_full_two_shift_words() {
        let words = two_shift().enumerate_words(3).unwrap();
        assert_eq!(words.len(), 8);
        assert_eq!(words[0], vec![0, 0, 0]);
        assert_eq!(words[7], vec![1, 1, 1]);
        // Lexicographic and duplicate-free.
        let mut sorted = words.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, words);
    }

    #[test]
    fn enumerates_golden_mean_words() {
        // Oracle: brute-force filter of all 16 binary candidates.
        let gm = Sft::golden_mean();
        let expected: Vec<Word> = (0..16u8)
            .map(|b| (0..4).rev().map(|i| (b >> i) & 1).collect::<Word>())
            .filter(|w| w.windows(2).all(|p| !(p[0] == 1 && p[1] == 1)))
            .collect();
        assert_eq!(expected.len(), 8);
        let words = gm.enumerate_words(4).unwrap();
        assert_eq!(words, expected);
    }

    #[test]
    fn enumerates_single_symbol_shift() {
        let s = Sft::new(1, vec![vec![1]]).unwrap();
        let words = s.enumerate_words(5).unwrap();
        assert_eq!(words, vec![vec![0, 0, 0, 0, 0]]);
    }

    #[test]
    fn word_count_matches_matrix_power() {
        let shifts = vec![
            two_shift(),
            Sft::golden_mean(),
            Sft::full_shift(3),
            Sft::full_shift(2).disjoint_union(&Sft::full_shift(3)),
            Sft::new(3, vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]).unwrap(),
        ];
        for sft in &shifts {
            for n in 1..=9 {
                let listed = sft.enumerate_words(n).unwrap().len() as u128;
                assert_eq!(listed, sft.count_words(n));
                assert_eq!(listed, matrix_power_count(sft.transitions(), n));
            }
        }
    }

    #[test]
    fn enumeration_cap_is_a_resource_error() {
        let err = two_shift().enumerate_words_capped(10, 100).unwrap_err();
        match err {
            Error::Resource(msg) => {
                assert!(msg.contains("1024"), "cap error should name the count: {msg}");
                assert!(msg.contains("100"), "cap error should name the cap: {msg}");
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_stranded_symbols() {
        assert!(matches!(
            Sft::new(2, vec![vec![1, 0], vec![0, 0]]),
            Err(SftError::EmptyRow(1))
        ));
        assert!(matches!(
            Sft::new(2, vec![vec![0, 1], vec![0, 1]]),
            Err(SftError::EmptyColumn(0))
        ));
    }

    #[test]
    fn component_labels_partition_symbols() {
        let union = Sft::full_shift(2).disjoint_union(&Sft::full_shift(3));
        assert_eq!(union.components().len(), 2);
        assert!(!union.is_irreducible());
        assert_eq!(union.component_of(0), union.component_of(1));
        assert_eq!(union.component_of(2), union.component_of(4));
        assert_ne!(union.component_of(0), union.component_of(2));
        assert!(union.components().iter().all(|c| c.nontrivial));

        // Two self-loop components joined by a one-way edge: reducible, both
        // components nontrivial.
        let chain = Sft::new(2, vec![vec![1, 1], vec![0, 1]]).unwrap();
        assert_eq!(chain.components().len(), 2);
        assert!(!chain.is_irreducible());
        assert!(chain.components().iter().all(|c| c.nontrivial));

        assert!(two_shift().is_irreducible());
        assert!(Sft::golden_mean().is_irreducible());
    }

    #[test]
    fn birkhoff_constant_counts_length() {
        let sft = two_shift();
        let f = Potential::constant(&sft, 2.5);
        let w = vec![0, 1, 1, 0, 1];
        assert_eq!(f.birkhoff_sum(&sft, &w).unwrap(), 5.0 * 2.5);
    }

    #[test]
    fn birkhoff_indicator_counts_symbols() {
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[1]).unwrap();
        assert_eq!(f.birkhoff_sum(&sft, &[0, 1, 1, 0]).unwrap(), 2.0);
    }

    #[test]
    fn birkhoff_depth_two_wraps_around() {
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[0, 1]).unwrap();
        // Cyclic windows of 0101: 01, 10, 01, 10 -> two occurrences of 01.
        assert_eq!(f.birkhoff_sum(&sft, &[0, 1, 0, 1]).unwrap(), 2.0);
    }

    #[test]
    fn birkhoff_skips_inadmissible_wrap_windows() {
        let gm = Sft::golden_mean();
        let f = Potential::from_fn(&gm, 2, |w| if w == [1, 0] { 5.0 } else { 0.0 });
        // Windows of 101 read cyclically: 10, 01, and the wrap window 11,
        // which is not admissible and contributes 0.
        assert_eq!(f.birkhoff_sum(&gm, &[1, 0, 1]).unwrap(), 5.0);
    }

    #[test]
    fn birkhoff_input_errors() {
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[0, 1]).unwrap();
        assert!(matches!(f.birkhoff_sum(&sft, &[0]), Err(Error::Input(_))));
        let gm = Sft::golden_mean();
        let g = Potential::zero(&gm);
        assert!(matches!(g.birkhoff_sum(&gm, &[1, 1, 0]), Err(Error::Input(_))));
    }

    #[test]
    fn potential_table_must_be_total_and_admissible() {
        let gm = Sft::golden_mean();
        let mut missing = BTreeMap::new();
        missing.insert(vec![0, 0], 1.0);
        missing.insert(vec![0, 1], 2.0);
        assert!(matches!(Potential::new(&gm, 2, missing), Err(SftError::MissingWord(_))));

        let mut foreign = BTreeMap::new();
        foreign.insert(vec![0, 0], 1.0);
        foreign.insert(vec![0, 1], 2.0);
        foreign.insert(vec![1, 0], 3.0);
        foreign.insert(vec![1, 1], 4.0);
        assert!(matches!(Potential::new(&gm, 2, foreign), Err(SftError::ForeignWord(_))));

        let mut bad = BTreeMap::new();
        bad.insert(vec![0], f64::NAN);
        bad.insert(vec![1], 0.0);
        assert!(matches!(Potential::new(&Sft::full_shift(2), 1, bad), Err(SftError::NonFinite(_))));
    }

    #[test]
    fn lift_preserves_values_on_prefixes() {
        let sft = two_shift();
        let f = Potential::indicator(&sft, &[1]).unwrap();
        let lifted = f.lift(&sft, 3).unwrap();
        assert_eq!(lifted.depth(), 3);
        assert_eq!(lifted.value(&[1, 0, 1]), Some(1.0));
        assert_eq!(lifted.value(&[0, 1, 1]), Some(0.0));
        // Birkhoff sums agree between a potential and its lift.
        let w = vec![1, 0, 0, 1, 1];
        assert_eq!(
            f.birkhoff_sum(&sft, &w).unwrap(),
            lifted.birkhoff_sum(&sft, &w).unwrap()
        );
    }

    #[test]
    fn linear_combination_lifts_to_max_depth() {
        let sft = two_shift();
        let a = Potential::indicator(&sft, &[1]).unwrap();
        let b = Potential::indicator(&sft, &[0, 1]).unwrap();
        let c = Potential::linear_combination(&sft, &[(2.0, &a), (-1.0, &b)]).unwrap();
        assert_eq!(c.depth(), 2);
        assert_eq!(c.value(&[1, 1]), Some(2.0));
        assert_eq!(c.value(&[0, 1]), Some(-1.0));
        assert_eq!(c.value(&[1, 0]), Some(2.0));
        assert_eq!(c.value(&[0, 0]), Some(0.0));
    }
}
