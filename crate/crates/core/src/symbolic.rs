//! Subshifts of finite type, cylinder words and the square-inverse shift
//! metric `d(x, y) = n(x, y)^{-2}` on one-sided sequence spaces.
//!
//! Conventions used throughout the crate:
//! * sequences are one-sided, symbols indexed from 1 in the metric
//!   (`n(x, y)` is the first disagreement position, starting at 1);
//! * words are stored as packed small integers and enumerated in
//!   lexicographic order, which is the canonical tie-breaking order for
//!   every downstream scan;
//! * the shift metric has diameter 1, so ball radii live in `(0, 1]`.

use crate::error::{Error, Result};

pub type Symbol = u16;

/// A subshift of finite type: alphabet plus 0/1 transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SftSystem {
    alphabet_size: usize,
    /// Row-major `alphabet_size x alphabet_size`; `transitions[a][b]` tells
    /// whether the word `ab` is admissible.
    transitions: Vec<bool>,
    /// Smallest power with strictly positive transition matrix, when known.
    primitivity_power: Option<usize>,
}

impl SftSystem {
    pub fn new(alphabet_size: usize, allowed: &[Vec<u8>]) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(Error::invalid_parameter("alphabet_size", "must be positive"));
        }
        if allowed.len() != alphabet_size || allowed.iter().any(|r| r.len() != alphabet_size) {
            return Err(Error::InvalidSystem(format!(
                "transition matrix must be {n} x {n}",
                n = alphabet_size
            )));
        }
        let transitions: Vec<bool> = allowed
            .iter()
            .flat_map(|row| row.iter().map(|&v| v != 0))
            .collect();
        let sys = SftSystem {
            alphabet_size,
            transitions,
            primitivity_power: None,
        };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<()> {
        let n = self.alphabet_size;
        for a in 0..n {
            if !(0..n).any(|b| self.transitions[a * n + b]) {
                return Err(Error::InvalidSystem(format!("row {a} of transitions is zero")));
            }
            if !(0..n).any(|b| self.transitions[b * n + a]) {
                return Err(Error::InvalidSystem(format!(
                    "column {a} of transitions is zero"
                )));
            }
        }
        Ok(())
    }

    /// Full shift on `n` symbols (all-ones matrix).
    pub fn full_shift(n: usize) -> Self {
        SftSystem {
            alphabet_size: n,
            transitions: vec![true; n * n],
            primitivity_power: Some(1),
        }
    }

    /// Golden-mean shift on `{0, 1}`: the word `11` is forbidden.
    pub fn golden_mean() -> Self {
        SftSystem {
            alphabet_size: 2,
            transitions: vec![true, true, true, false],
            primitivity_power: Some(2),
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    #[inline]
    pub fn allowed(&self, a: Symbol, b: Symbol) -> bool {
        self.transitions[a as usize * self.alphabet_size + b as usize]
    }

    pub fn is_full_shift(&self) -> bool {
        self.transitions.iter().all(|&t| t)
    }

    /// Smallest `p` with `transitions^p` entrywise positive, searched up to
    /// the Wielandt bound `(n-1)^2 + 1`. `None` when the system is not
    /// primitive.
    pub fn primitivity_power(&self) -> Option<usize> {
        if let Some(p) = self.primitivity_power {
            return Some(p);
        }
        let n = self.alphabet_size;
        let bound = (n - 1) * (n - 1) + 1;
        let mut power = self.transitions.clone();
        for p in 1..=bound {
            if power.iter().all(|&v| v) {
                return Some(p);
            }
            let mut next = vec![false; n * n];
            for a in 0..n {
                for k in 0..n {
                    if power[a * n + k] {
                        for b in 0..n {
                            if self.transitions[k * n + b] {
                                next[a * n + b] = true;
                            }
                        }
                    }
                }
            }
            power = next;
        }
        if power.iter().all(|&v| v) {
            Some(bound)
        } else {
            None
        }
    }

    /// Cache the primitivity power, erroring when the system is not primitive.
    pub fn with_primitivity(mut self) -> Result<Self> {
        match self.primitivity_power() {
            Some(p) => {
                self.primitivity_power = Some(p);
                Ok(self)
            }
            None => Err(Error::InvalidSystem("system is not primitive".into())),
        }
    }

    pub fn is_admissible(&self, symbols: &[Symbol]) -> bool {
        if symbols.iter().any(|&s| (s as usize) >= self.alphabet_size) {
            return false;
        }
        symbols.windows(2).all(|p| self.allowed(p[0], p[1]))
    }

    /// Validate a symbol sequence into a `Word`.
    pub fn word(&self, symbols: Vec<Symbol>) -> Result<Word> {
        if symbols.is_empty() {
            return Err(Error::invalid_parameter("symbols", "word must be nonempty"));
        }
        if !self.is_admissible(&symbols) {
            return Err(Error::invalid_parameter(
                "symbols",
                format!("{symbols:?} is not admissible"),
            ));
        }
        Ok(Word { symbols })
    }

    /// Iterator over all admissible words of length `n` in lexicographic order.
    pub fn words(&self, n: usize) -> WordIter<'_> {
        WordIter::new(self, n)
    }

    pub fn word_count(&self, n: usize) -> usize {
        // Count admissible words by iterating the vector of per-state counts.
        if n == 0 {
            return 0;
        }
        let a = self.alphabet_size;
        let mut counts = vec![1u128; a];
        for _ in 1..n {
            let mut next = vec![0u128; a];
            for s in 0..a {
                for t in 0..a {
                    if self.transitions[s * a + t] {
                        next[s] += counts[t];
                    }
                }
            }
            counts = next;
        }
        counts.iter().sum::<u128>() as usize
    }

    /// Depth-first traversal of admissible words of length `n`; the visitor
    /// receives each word once, in lexicographic order. Cheaper than the
    /// iterator for exhaustive scans because the buffer is reused.
    pub fn for_each_word<F: FnMut(&[Symbol])>(&self, n: usize, mut visit: F) {
        if n == 0 {
            return;
        }
        let mut buf: Vec<Symbol> = Vec::with_capacity(n);
        self.dfs_words(n, &mut buf, &mut visit);
    }

    fn dfs_words<F: FnMut(&[Symbol])>(&self, n: usize, buf: &mut Vec<Symbol>, visit: &mut F) {
        if buf.len() == n {
            visit(buf);
            return;
        }
        for s in 0..self.alphabet_size as Symbol {
            if buf.last().is_none_or(|&last| self.allowed(last, s)) {
                buf.push(s);
                self.dfs_words(n, buf, visit);
                buf.pop();
            }
        }
    }

    /// Successors of a symbol in lexicographic order.
    pub fn successors(&self, a: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.alphabet_size as Symbol).filter(move |&b| self.allowed(a, b))
    }

    pub fn predecessors(&self, b: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.alphabet_size as Symbol).filter(move |&a| self.allowed(a, b))
    }
}

/// A finite admissible word; doubles as the cylinder of sequences sharing it
/// as a prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    symbols: Vec<Symbol>,
}

impl Word {
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word {
            symbols: self.symbols[..len].to_vec(),
        }
    }

    /// The word read by the `j`-th shift image (drop `j` leading symbols).
    pub fn shifted(&self, j: usize) -> &[Symbol] {
        &self.symbols[j..]
    }

    /// Render as a digit string for small alphabets, comma-separated
    /// otherwise.
    pub fn display(&self) -> String {
        if self.symbols.iter().all(|&s| s < 10) {
            self.symbols.iter().map(|s| s.to_string()).collect()
        } else {
            let parts: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
            parts.join(",")
        }
    }
}

impl From<Word> for Vec<Symbol> {
    fn from(w: Word) -> Self {
        w.symbols
    }
}

pub struct WordIter<'a> {
    system: &'a SftSystem,
    n: usize,
    stack: Vec<Symbol>,
    started: bool,
    done: bool,
}

impl<'a> WordIter<'a> {
    fn new(system: &'a SftSystem, n: usize) -> Self {
        WordIter {
            system,
            n,
            stack: Vec::with_capacity(n),
            started: false,
            done: n == 0,
        }
    }

    /// Advance `stack` to the next admissible word of length `n`.
    fn advance(&mut self) -> bool {
        loop {
            if !self.started {
                self.started = true;
                self.stack.clear();
            } else {
                // Backtrack: bump the last symbol that still has room.
                loop {
                    match self.stack.pop() {
                        None => return false,
                        Some(s) => {
                            let mut next = s + 1;
                            let mut placed = false;
                            while (next as usize) < self.system.alphabet_size() {
                                if self
                                    .stack
                                    .last()
                                    .is_none_or(|&last| self.system.allowed(last, next))
                                {
                                    self.stack.push(next);
                                    placed = true;
                                    break;
                                }
                                next += 1;
                            }
                            if placed {
                                break;
                            }
                        }
                    }
                }
            }
            // Extend greedily with the smallest admissible symbols.
            'extend: while self.stack.len() < self.n {
                let mut extended = false;
                for s in 0..self.system.alphabet_size() as Symbol {
                    if self
                        .stack
                        .last()
                        .is_none_or(|&last| self.system.allowed(last, s))
                    {
                        self.stack.push(s);
                        extended = true;
                        break;
                    }
                }
                if !extended {
                    break 'extend;
                }
            }
            if self.stack.len() == self.n {
                return true;
            }
            if self.stack.is_empty() {
                return false;
            }
        }
    }
}

impl Iterator for WordIter<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        if self.advance() {
            Some(Word {
                symbols: self.stack.clone(),
            })
        } else {
            self.done = true;
            None
        }
    }
}

/// Agreement length `m` such that `d(x, y) < epsilon` iff `x` and `y` agree
/// on their first `m` symbols, for the metric `d = n(x, y)^{-2}`.
///
/// Radii arriving as decimal literals (0.01, 0.5, ...) are resolved toward
/// their decimal value; the small additive nudge keeps `floor` from falling
/// off an exact boundary such as `0.01^{-1/2} = 10`.
pub fn prefix_length_for_radius(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid_parameter(
            "epsilon",
            format!("radius must lie in (0, 1], got {epsilon}"),
        ));
    }
    let m = ((1.0 / epsilon).sqrt() + 1e-9).floor() as usize;
    Ok(m.max(1))
}

/// Diameter of an `m`-cylinder in the shift metric: `(m + 1)^{-2}`.
pub fn cylinder_diameter(m: usize) -> f64 {
    let k = (m + 1) as f64;
    1.0 / (k * k)
}

/// Distance between the sequence points determined by two finite words,
/// assuming they disagree within the common indexed range.
pub fn shift_distance(x: &[Symbol], y: &[Symbol]) -> f64 {
    let mut i = 0;
    let common = x.len().min(y.len());
    while i < common && x[i] == y[i] {
        i += 1;
    }
    if i == common {
        // Agreement over the whole common range: only an upper bound is
        // determined by finite data.
        cylinder_diameter(common)
    } else {
        let n = (i + 1) as f64;
        1.0 / (n * n)
    }
}

/// The dynamical ball `B_eps(x, n)` as a cylinder: the prefix of `x` of
/// length `n + m(eps)`. Its image under `sigma^n` is exactly the
/// `m(eps)`-cylinder around `sigma^n x`, so the shift realizes the
/// ball-onto-ball property at every time.
pub fn dynamical_ball_cylinder(x: &Word, n: usize, epsilon: f64) -> Result<Word> {
    let m = prefix_length_for_radius(epsilon)?;
    let needed = n + m;
    if x.len() < needed {
        return Err(Error::InsufficientData(format!(
            "dynamical ball at time {n} with radius {epsilon} needs {needed} symbols, word has {}",
            x.len()
        )));
    }
    Ok(x.prefix(needed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_shift_words() {
        let sys = SftSystem::full_shift(2);
        let words: Vec<String> = sys.words(2).map(|w| w.display()).collect();
        assert_eq!(words, vec!["00", "01", "10", "11"]);
    }

    #[test]
    fn golden_mean_counts_are_fibonacci() {
        // Independent oracle: brute-force enumeration over {0,1}^n.
        let sys = SftSystem::golden_mean();
        let brute = |n: usize| -> usize {
            (0..(1usize << n))
                .filter(|bits| {
                    let w: Vec<Symbol> = (0..n).map(|i| ((bits >> i) & 1) as Symbol).collect();
                    sys.is_admissible(&w)
                })
                .count()
        };
        for n in 1..=12 {
            assert_eq!(sys.words(n).count(), brute(n));
            assert_eq!(sys.word_count(n), brute(n));
        }
        assert_eq!(sys.words(3).count(), 5);
        assert_eq!(sys.word_count(10), 144);
    }

    #[test]
    fn golden_mean_word_list() {
        let sys = SftSystem::golden_mean();
        let words: Vec<String> = sys.words(3).map(|w| w.display()).collect();
        assert_eq!(words, vec!["000", "001", "010", "100", "101"]);
    }

    #[test]
    fn lexicographic_order() {
        let sys = SftSystem::golden_mean();
        let words: Vec<Word> = sys.words(7).collect();
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(words, sorted);
    }

    #[test]
    fn prefix_length_examples() {
        assert_eq!(prefix_length_for_radius(0.01).unwrap(), 10);
        assert_eq!(prefix_length_for_radius(1.0).unwrap(), 1);
        assert_eq!(prefix_length_for_radius(0.5).unwrap(), 1);
        assert!(prefix_length_for_radius(0.0).is_err());
        assert!(prefix_length_for_radius(-1.0).is_err());
        assert!(prefix_length_for_radius(1.5).is_err());
    }

    #[test]
    fn prefix_length_inverts_cylinder_diameter() {
        // d(x,y) < diam(C(x,m)) forces agreement past position m+1.
        for m in 1..64 {
            let eps = cylinder_diameter(m);
            assert_eq!(prefix_length_for_radius(eps).unwrap(), m + 1);
        }
    }

    #[test]
    fn ball_cylinder_examples() {
        let sys = SftSystem::full_shift(2);
        let x = sys.word(vec![0, 1, 1, 0, 0, 1, 1, 0]).unwrap();
        let ball = dynamical_ball_cylinder(&x, 2, 0.5).unwrap();
        assert_eq!(ball.display(), "011");
        let ball = dynamical_ball_cylinder(&x, 0, 1.0).unwrap();
        assert_eq!(ball.display(), "0");
        // n = 5, eps = 0.01 needs 15 symbols.
        assert!(matches!(
            dynamical_ball_cylinder(&x, 5, 0.01),
            Err(Error::InsufficientData(_))
        ));
        let long = sys.word(vec![0; 15]).unwrap();
        assert_eq!(dynamical_ball_cylinder(&long, 5, 0.01).unwrap().len(), 15);
    }

    #[test]
    fn ball_nesting_as_prefix_containment() {
        // B_eps(x, n+1) within B_eps(x, n) within B_eps'(x, n) for eps <= eps'.
        let sys = SftSystem::full_shift(2);
        let x = sys.word(vec![0, 1, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0]).unwrap();
        for &(e_small, e_big) in &[(0.05, 0.3), (0.09, 0.5), (0.2, 1.0)] {
            for n in 0..4 {
                let b_next = dynamical_ball_cylinder(&x, n + 1, e_small).unwrap();
                let b = dynamical_ball_cylinder(&x, n, e_small).unwrap();
                let b_wide = dynamical_ball_cylinder(&x, n, e_big).unwrap();
                assert!(b_next.len() >= b.len());
                assert!(b.len() >= b_wide.len());
                assert_eq!(b_next.prefix(b.len()), b);
                assert_eq!(b.prefix(b_wide.len()), b_wide);
            }
        }
    }

    #[test]
    fn cylinder_additivity_via_extensions() {
        let sys = SftSystem::golden_mean();
        for n in 1..=11 {
            for w in sys.words(n) {
                let last = *w.symbols().last().unwrap();
                let ext: usize = sys.successors(last).count();
                assert!(ext >= 1, "every admissible word extends");
                // Extensions partition the cylinder: counts of (n+1)-words
                // with prefix w equal the number of admissible extensions.
                let mut count = 0;
                for s in sys.successors(last) {
                    let mut v = w.symbols().to_vec();
                    v.push(s);
                    assert!(sys.is_admissible(&v));
                    count += 1;
                }
                assert_eq!(count, ext);
            }
        }
    }

    #[test]
    fn shift_metric_zooming_identity() {
        // For y, z agreeing on exactly L symbols, the backward distances
        // match alpha_{n-j}(r) = (1 + (n-j) sqrt(r))^{-2} r exactly.
        let alpha = |k: usize, r: f64| -> f64 {
            let s = 1.0 + k as f64 * r.sqrt();
            r / (s * s)
        };
        for l in 3usize..40 {
            for n in 0..l {
                let m = l - n; // agreement length seen at time n
                let r = 1.0 / ((m + 1) as f64 * (m + 1) as f64);
                for j in 0..=n {
                    let lhs = 1.0 / ((l - j + 1) as f64 * (l - j + 1) as f64);
                    let rhs = alpha(n - j, r);
                    assert!((lhs - rhs).abs() <= 1e-15 * rhs, "l={l} n={n} j={j}");
                }
            }
        }
    }

    #[test]
    fn primitivity_detection() {
        assert_eq!(SftSystem::full_shift(3).primitivity_power(), Some(1));
        assert_eq!(SftSystem::golden_mean().primitivity_power(), Some(2));
        // Period-2 system is irreducible but not primitive.
        let per2 = SftSystem::new(2, &[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(per2.primitivity_power(), None);
        assert!(per2.with_primitivity().is_err());
    }

    #[test]
    fn rejects_degenerate_matrices() {
        assert!(SftSystem::new(2, &[vec![1, 1], vec![0, 0]]).is_err());
        assert!(SftSystem::new(2, &[vec![1, 0], vec![1, 0]]).is_err());
        assert!(SftSystem::new(0, &[]).is_err());
    }

    #[test]
    fn word_admissibility() {
        let sys = SftSystem::golden_mean();
        assert!(sys.word(vec![0, 1, 0, 1]).is_ok());
        assert!(sys.word(vec![0, 1, 1]).is_err());
        assert!(sys.word(vec![]).is_err());
        assert!(sys.word(vec![2]).is_err());
    }
}
