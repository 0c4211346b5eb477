//! Transfer operator on locally constant data, Perron spectral data,
//! topological and relative pressure, and coboundary transforms.
//!
//! For a depth-`k` potential the operator acts on functions of `(k-1)`-word
//! states (plain symbols when `k <= 2`). The stored weight matrix has entry
//! `(w -> w') = e^{phi(w . last(w'))}` whenever `w'` is the admissible
//! shift-extension of `w`. The eigenfunction `h` (`L h = lambda h`) then
//! solves `sum_w W(w, w') h(w) = lambda h(w')`, and the eigenmeasure state
//! weights solve `sum_{w'} W(w, w') nu(w') = lambda nu(w)`.

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::symbolic::{prefix_length_for_radius, SftSystem, Symbol};

/// Default power-iteration tolerance.
pub const SPECTRAL_TOL: f64 = 1e-12;
/// Iteration cap for the power method.
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Matrix form of the Ruelle transfer operator for a locally constant
/// potential on an SFT.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    /// Admissible `(K-1)`-words in lexicographic order, `K = max(depth, 2)`.
    state_words: Vec<Vec<Symbol>>,
    /// Dense row-major weights, entry `(from, to)`.
    weights: Vec<f64>,
    alphabet: usize,
    depth: usize,
}

impl TransferMatrix {
    pub fn state_words(&self) -> &[Vec<Symbol>] {
        &self.state_words
    }

    pub fn dim(&self) -> usize {
        self.state_words.len()
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.dim() + to]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Index of the state holding a given `(K-1)`-word.
    pub fn state_index(&self, word: &[Symbol]) -> Option<usize> {
        self.state_words.binary_search_by(|s| s.as_slice().cmp(word)).ok()
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.weights[i * n + j] * x[j];
            }
            *o = acc;
        }
    }

    fn matvec_t(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.weights[i * n + j] * x[i];
            }
            *o = acc;
        }
    }

    /// Strong connectivity of the nonzero pattern.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        if n == 0 {
            return false;
        }
        let reach = |transpose: bool| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let w = if transpose {
                        self.weights[j * n + i]
                    } else {
                        self.weights[i * n + j]
                    };
                    if w > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        };
        reach(false).into_iter().all(|b| b) && reach(true).into_iter().all(|b| b)
    }
}

/// Build the transfer matrix of `(system, potential)`.
///
/// Sampled potentials have no finite matrix form; use finite-`n` pressure
/// for those.
pub fn transfer_matrix(system: &SftSystem, potential: &Potential) -> Result<TransferMatrix> {
    let Some(depth) = potential.lc_depth() else {
        return Err(Error::Unsupported(
            "transfer matrix requires a locally constant potential; use finite-n pressure".into(),
        ));
    };
    let k = depth.max(2);
    let state_len = k - 1;
    let mut state_words: Vec<Vec<Symbol>> = Vec::new();
    system.for_each_word(state_len, |w| state_words.push(w.to_vec()));
    if state_words.is_empty() {
        return Err(Error::InvalidSystem(format!(
            "system admits no words of length {state_len}"
        )));
    }
    let n = state_words.len();
    let mut weights = vec![0.0; n * n];
    let mut full = Vec::with_capacity(k);
    for (i, from) in state_words.iter().enumerate() {
        for (j, to) in state_words.iter().enumerate() {
            // `to` must be the one-step shift extension of `from`.
            if state_len > 1 && from[1..] != to[..state_len - 1] {
                continue;
            }
            let last = *to.last().unwrap();
            if !system.allowed(*from.last().unwrap(), last) {
                continue;
            }
            full.clear();
            full.extend_from_slice(from);
            full.push(last);
            weights[i * n + j] = potential.eval(&full).exp();
        }
    }
    Ok(TransferMatrix {
        state_words,
        weights,
        alphabet: system.alphabet_size(),
        depth,
    })
}

/// Perron data of a transfer matrix: spectral radius, eigenfunction samples
/// `h`, eigenmeasure state weights, and the achieved residual.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambda: f64,
    /// `L h = lambda h`, normalized so `<nu, h> = 1`.
    pub h: Vec<f64>,
    /// Dual eigenvector (state weights of the eigenmeasure), normalized to
    /// total mass 1.
    pub nu_weights: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl SpectralData {
    pub fn h_bounds(&self) -> (f64, f64) {
        let lo = self.h.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Deterministic power iteration on the matrix and its transpose.
///
/// Iterates on `W + I` so that irreducible-but-periodic patterns still
/// converge; all-ones start vectors and fixed normalizations make the result
/// reproducible bit-for-bit.
pub fn perron(matrix: &TransferMatrix, tol: f64) -> Result<SpectralData> {
    if tol <= 0.0 {
        return Err(Error::invalid_parameter("tol", "must be positive"));
    }
    if !matrix.is_irreducible() {
        return Err(Error::InvalidSystem(
            "transfer matrix is reducible; restrict to an irreducible component".into(),
        ));
    }
    let n = matrix.dim();
    let mut nu = vec![1.0 / n as f64; n];
    let mut h = vec![1.0; n];
    let mut buf = vec![0.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    // Once the residual passes `tol`, keep polishing for a fixed number of
    // extra sweeps: cylinder-level identities downstream consume the
    // eigenvectors multiplicatively and want them at the float floor.
    let mut polish = 0usize;
    const POLISH_SWEEPS: usize = 64;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // nu update: W nu + nu, l1-normalized.
        matrix.matvec(&nu, &mut buf);
        for i in 0..n {
            buf[i] += nu[i];
        }
        let norm: f64 = buf.iter().sum();
        for i in 0..n {
            nu[i] = buf[i] / norm;
        }
        // h update: W^T h + h, sup-normalized.
        matrix.matvec_t(&h, &mut buf);
        for i in 0..n {
            buf[i] += h[i];
        }
        let sup = buf.iter().cloned().fold(0.0f64, f64::max);
        for i in 0..n {
            h[i] = buf[i] / sup;
        }
        // Rayleigh estimate of lambda on the original matrix.
        matrix.matvec(&nu, &mut buf);
        let num: f64 = (0..n).map(|i| h[i] * buf[i]).sum();
        let den: f64 = (0..n).map(|i| h[i] * nu[i]).sum();
        lambda = num / den;
        let mut r_nu = 0.0f64;
        for i in 0..n {
            r_nu = r_nu.max((buf[i] - lambda * nu[i]).abs());
        }
        let nu_sup = nu.iter().cloned().fold(0.0f64, f64::max);
        matrix.matvec_t(&h, &mut buf);
        let mut r_h = 0.0f64;
        for i in 0..n {
            r_h = r_h.max((buf[i] - lambda * h[i]).abs());
        }
        // Scale-free residual: eigen-defects grow with lambda, so measure
        // them against it.
        residual = (r_nu / nu_sup).max(r_h) / lambda.max(f64::MIN_POSITIVE);
        if residual <= tol {
            polish += 1;
            if polish >= POLISH_SWEEPS {
                break;
            }
        }
    }
    if residual > tol {
        return Err(Error::NumericFailure {
            op: "perron",
            residual,
            iterations,
        });
    }
    // Final normalization: total nu mass 1, <nu, h> = 1.
    let mass: f64 = nu.iter().sum();
    for v in nu.iter_mut() {
        *v /= mass;
    }
    let pairing: f64 = (0..n).map(|i| nu[i] * h[i]).sum();
    for v in h.iter_mut() {
        *v /= pairing;
    }
    if nu.iter().any(|&v| v <= 0.0) || h.iter().any(|&v| v <= 0.0) {
        return Err(Error::NumericFailure {
            op: "perron",
            residual,
            iterations,
        });
    }
    Ok(SpectralData {
        lambda,
        h,
        nu_weights: nu,
        residual,
        iterations,
    })
}

/// Spectral radius of a possibly reducible nonnegative matrix: maximum of
/// the Perron roots over strongly connected components with at least one
/// internal edge. `None` when no component recurs.
fn spectral_radius_reducible(dim: usize, weights: &[f64]) -> Result<Option<f64>> {
    let sccs = strongly_connected_components(dim, |i, j| weights[i * dim + j] > 0.0);
    let mut best: Option<f64> = None;
    for scc in sccs {
        let has_edge = scc
            .iter()
            .any(|&i| scc.iter().any(|&j| weights[i * dim + j] > 0.0));
        if !has_edge {
            continue;
        }
        let m = scc.len();
        let mut sub = vec![0.0; m * m];
        for (a, &i) in scc.iter().enumerate() {
            for (b, &j) in scc.iter().enumerate() {
                sub[a * m + b] = weights[i * dim + j];
            }
        }
        let sub_matrix = TransferMatrix {
            state_words: (0..m).map(|i| vec![i as Symbol]).collect(),
            weights: sub,
            alphabet: m,
            depth: 1,
        };
        let data = perron(&sub_matrix, SPECTRAL_TOL)?;
        best = Some(best.map_or(data.lambda, |b: f64| b.max(data.lambda)));
    }
    Ok(best)
}

fn strongly_connected_components<E: Fn(usize, usize) -> bool>(
    n: usize,
    edge: E,
) -> Vec<Vec<usize>> {
    // Kosaraju: order by finish time on the forward graph, then collect
    // components on the transpose.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // Iterative DFS with an explicit neighbor cursor.
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        seen[start] = true;
        while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
            let mut advanced = false;
            while *cursor < n {
                let w = *cursor;
                *cursor += 1;
                if edge(v, w) && !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut components = Vec::new();
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![root];
        comp[root] = id;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for w in 0..n {
                if edge(w, v) && comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// A sub-SFT of a parent system: a subset of parent symbols together with a
/// transition matrix dominated by the parent's restriction.
#[derive(Debug, Clone)]
pub struct SubShift {
    /// Parent symbols retained, ascending.
    states: Vec<Symbol>,
    /// Local transition matrix over `states` (row-major bools).
    transitions: Vec<bool>,
}

impl SubShift {
    /// Restrict the parent to a subset of symbols, pruning states until
    /// every remaining row and column is nonzero (the maximal sub-SFT
    /// supported inside the subset).
    pub fn restrict(parent: &SftSystem, symbols: &[Symbol]) -> Result<SubShift> {
        let mut states: Vec<Symbol> = symbols.to_vec();
        states.sort_unstable();
        states.dedup();
        if states.iter().any(|&s| (s as usize) >= parent.alphabet_size()) {
            return Err(Error::invalid_parameter("symbols", "outside parent alphabet"));
        }
        loop {
            let n = states.len();
            if n == 0 {
                break;
            }
            let keep: Vec<bool> = (0..n)
                .map(|i| {
                    let row = (0..n).any(|j| parent.allowed(states[i], states[j]));
                    let col = (0..n).any(|j| parent.allowed(states[j], states[i]));
                    row && col
                })
                .collect();
            if keep.iter().all(|&k| k) {
                break;
            }
            states = states
                .iter()
                .zip(&keep)
                .filter_map(|(&s, &k)| k.then_some(s))
                .collect();
        }
        let n = states.len();
        let mut transitions = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                transitions[i * n + j] = parent.allowed(states[i], states[j]);
            }
        }
        Ok(SubShift { states, transitions })
    }

    /// Sub-SFT with explicit transitions; must be dominated by the parent's.
    pub fn with_transitions(
        parent: &SftSystem,
        symbols: &[Symbol],
        allowed: &[Vec<u8>],
    ) -> Result<SubShift> {
        let states: Vec<Symbol> = symbols.to_vec();
        let n = states.len();
        if allowed.len() != n || allowed.iter().any(|r| r.len() != n) {
            return Err(Error::invalid_parameter("allowed", "matrix shape mismatch"));
        }
        for i in 0..n {
            for j in 0..n {
                if allowed[i][j] != 0 && !parent.allowed(states[i], states[j]) {
                    return Err(Error::InvalidSystem(format!(
                        "sub-SFT transition {} -> {} is not admissible in the parent",
                        states[i], states[j]
                    )));
                }
            }
        }
        let transitions = allowed
            .iter()
            .flat_map(|r| r.iter().map(|&v| v != 0))
            .collect();
        Ok(SubShift { states, transitions })
    }

    pub fn empty() -> SubShift {
        SubShift {
            states: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Symbol] {
        &self.states
    }

    /// View the sub-SFT as a standalone system over its local alphabet,
    /// together with the embedding of local symbols into the parent.
    pub fn as_system(&self) -> Result<(SftSystem, Vec<Symbol>)> {
        let n = self.states.len();
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|i| (0..n).map(|j| u8::from(self.transitions[i * n + j])).collect())
            .collect();
        let sys = SftSystem::new(n, &rows)?;
        Ok((sys, self.states.clone()))
    }
}

/// Pressure evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureMode {
    Spectral,
    FiniteN { n: usize, epsilon: f64 },
}

/// A pressure value with an enclosure when produced by a finite-`n` sum.
#[derive(Debug, Clone, Copy)]
pub struct PressureEstimate {
    pub value: f64,
    /// `[lo, hi]` guaranteed to contain the spectral value; `None` in
    /// spectral mode where `value` is exact to solver tolerance.
    pub bracket: Option<(f64, f64)>,
}

/// Topological pressure of `(system, potential)`.
///
/// Spectral mode returns `log lambda` of the transfer matrix. Finite-`n`
/// mode returns `(1/n) log sum_{n-cylinders} e^{sup S_n phi}`, which always
/// dominates the limit; the attached bracket widens downward by
/// `V/n + log(alphabet * m(eps)) / n`.
pub fn pressure(
    system: &SftSystem,
    potential: &Potential,
    mode: PressureMode,
) -> Result<PressureEstimate> {
    match mode {
        PressureMode::Spectral => {
            let matrix = transfer_matrix(system, potential)?;
            let data = perron(&matrix, SPECTRAL_TOL)?;
            Ok(PressureEstimate {
                value: data.lambda.ln(),
                bracket: None,
            })
        }
        PressureMode::FiniteN { n, epsilon } => finite_n_pressure(system, potential, n, epsilon),
    }
}

fn finite_n_pressure(
    system: &SftSystem,
    potential: &Potential,
    n: usize,
    epsilon: f64,
) -> Result<PressureEstimate> {
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be at least 1"));
    }
    let m = prefix_length_for_radius(epsilon)?;
    let mut log_sum = f64::NEG_INFINITY;
    let mut max_band = 0.0f64;
    match potential.lc_depth() {
        Some(depth) => {
            if n + 1 < depth {
                return Err(Error::InsufficientData(format!(
                    "finite-n pressure needs n >= depth - 1 = {}",
                    depth - 1
                )));
            }
            // sup/inf of the trailing incomplete terms, per terminal state.
            let fill = trailing_fill(system, potential, depth);
            dfs_sup_sums(system, potential, n, depth, &fill, &mut |sup, band| {
                log_sum = log_add_exp(log_sum, sup);
                max_band = max_band.max(band);
            });
        }
        None => {
            // Sampled potential: center samples on suffixes, with the
            // declared variation bound as the band.
            system.for_each_word(n, |w| {
                let mut center = 0.0;
                let mut band = 0.0;
                for j in 0..n {
                    center += potential.eval(&w[j..]);
                    band += potential.variation(n - j);
                }
                log_sum = log_add_exp(log_sum, center + band);
                max_band = max_band.max(2.0 * band);
            });
        }
    }
    let value = log_sum / n as f64;
    let width =
        max_band / n as f64 + ((system.alphabet_size() * m) as f64).ln() / n as f64;
    Ok(PressureEstimate {
        value,
        bracket: Some((value - width, value)),
    })
}

/// For each `(depth-1)`-suffix state, the sup and inf of the last
/// `depth - 1` Birkhoff terms over admissible completions.
struct TrailingFill {
    state_len: usize,
    sup: Vec<f64>,
    inf: Vec<f64>,
    alphabet: usize,
}

impl TrailingFill {
    fn index(&self, suffix: &[Symbol]) -> usize {
        suffix.iter().fold(0usize, |acc, &s| acc * self.alphabet + s as usize)
    }
}

fn trailing_fill(system: &SftSystem, potential: &Potential, depth: usize) -> TrailingFill {
    let state_len = depth.saturating_sub(1);
    let a = system.alphabet_size();
    let size = a.pow(state_len as u32);
    let mut fill = TrailingFill {
        state_len,
        sup: vec![0.0; size],
        inf: vec![0.0; size],
        alphabet: a,
    };
    if state_len == 0 {
        return fill;
    }
    // Work backwards over how many terms remain to be completed.
    // rem = number of trailing phi-terms whose windows overhang the word.
    let mut sup_next = vec![0.0f64; size];
    let mut inf_next = vec![0.0f64; size];
    let mut word = Vec::with_capacity(depth);
    for _rem in 1..=state_len {
        let mut sup_cur = vec![f64::NEG_INFINITY; size];
        let mut inf_cur = vec![f64::INFINITY; size];
        system.for_each_word(state_len, |suffix| {
            let idx = suffix.iter().fold(0usize, |acc, &s| acc * a + s as usize);
            let last = *suffix.last().unwrap();
            for next in system.successors(last) {
                word.clear();
                word.extend_from_slice(suffix);
                word.push(next);
                let term = potential.eval(&word);
                let next_idx = word[1..]
                    .iter()
                    .fold(0usize, |acc, &s| acc * a + s as usize);
                sup_cur[idx] = sup_cur[idx].max(term + sup_next[next_idx]);
                inf_cur[idx] = inf_cur[idx].min(term + inf_next[next_idx]);
            }
        });
        sup_next = sup_cur;
        inf_next = inf_cur;
    }
    fill.sup = sup_next;
    fill.inf = inf_next;
    fill
}

/// DFS over admissible `n`-words accumulating determined Birkhoff terms;
/// the visitor receives `(sup S_n phi, sup - inf)` per cylinder.
fn dfs_sup_sums<F: FnMut(f64, f64)>(
    system: &SftSystem,
    potential: &Potential,
    n: usize,
    depth: usize,
    fill: &TrailingFill,
    visit: &mut F,
) {
    fn rec<F: FnMut(f64, f64)>(
        system: &SftSystem,
        potential: &Potential,
        n: usize,
        depth: usize,
        fill: &TrailingFill,
        word: &mut Vec<Symbol>,
        running: f64,
        visit: &mut F,
    ) {
        if word.len() == n {
            if fill.state_len == 0 {
                visit(running, 0.0);
            } else {
                let suffix = &word[n - fill.state_len..];
                let idx = fill.index(suffix);
                let sup = running + fill.sup[idx];
                let inf = running + fill.inf[idx];
                visit(sup, sup - inf);
            }
            return;
        }
        for s in 0..system.alphabet_size() as Symbol {
            if word.last().is_none_or(|&last| system.allowed(last, s)) {
                word.push(s);
                let mut next_running = running;
                if word.len() >= depth {
                    next_running += potential.eval(&word[word.len() - depth..]);
                }
                rec(system, potential, n, depth, fill, word, next_running, visit);
                word.pop();
            }
        }
    }
    let mut word = Vec::with_capacity(n);
    rec(system, potential, n, depth, fill, &mut word, 0.0, visit);
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Relative pressure report for a compact invariant sub-SFT.
#[derive(Debug, Clone)]
pub struct RelativePressure {
    /// Spectral pressure of the restriction (max over recurrent components).
    pub value: f64,
    /// True when the sub-SFT supports no recurrent dynamics and the
    /// cover-sum convention `inf over gamma > 0` pins the value at zero.
    pub degenerate: bool,
}

/// Pressure of `potential` restricted to a sub-SFT, computed on the
/// restricted transfer matrix. Degenerate (empty) restrictions carry
/// pressure 0 under the cover-sum convention that the infimum runs over
/// positive `gamma` only.
pub fn relative_pressure_subshift(
    system: &SftSystem,
    potential: &Potential,
    sub: &SubShift,
) -> Result<RelativePressure> {
    if !potential.is_locally_constant() {
        return Err(Error::Unsupported(
            "relative pressure requires a locally constant potential".into(),
        ));
    }
    if sub
        .states()
        .iter()
        .any(|&s| (s as usize) >= system.alphabet_size())
    {
        return Err(Error::InvalidSystem(
            "sub-SFT states fall outside the parent alphabet".into(),
        ));
    }
    if sub.is_empty() {
        return Ok(RelativePressure {
            value: 0.0,
            degenerate: true,
        });
    }
    let (local, embed) = match sub.as_system() {
        Ok(v) => v,
        Err(_) => {
            return Ok(RelativePressure {
                value: 0.0,
                degenerate: true,
            })
        }
    };
    // Potential on local symbols via the embedding.
    let depth = potential.lc_depth().unwrap();
    let lifted = Potential::locally_constant(&local, depth, |w| {
        let parent_word: Vec<Symbol> = w.iter().map(|&s| embed[s as usize]).collect();
        potential.eval(&parent_word)
    })?;
    let matrix = transfer_matrix(&local, &lifted)?;
    match spectral_radius_reducible(matrix.dim(), &matrix.weights)? {
        Some(lambda) => Ok(RelativePressure {
            value: lambda.ln(),
            degenerate: false,
        }),
        None => Ok(RelativePressure {
            value: 0.0,
            degenerate: true,
        }),
    }
}

/// Raw cover-sum estimator `m_T(phi, Lambda, eps, N, gamma)` over cylinder
/// covers of the sub-SFT by dynamical balls of order `N..=n_cap`.
pub fn cover_sum(
    system: &SftSystem,
    potential: &Potential,
    sub: &SubShift,
    epsilon: f64,
    n_start: usize,
    n_cap: usize,
    gamma: f64,
) -> Result<f64> {
    if sub.is_empty() {
        return Ok(0.0);
    }
    let _ = system;
    let m = prefix_length_for_radius(epsilon)?;
    let depth = potential
        .lc_depth()
        .ok_or_else(|| Error::Unsupported("cover sums require locally constant data".into()))?;
    if depth > m + 1 {
        return Err(Error::Unsupported(format!(
            "cover sums need ball depth m(eps) >= potential depth - 1 (depth {depth}, m {m})"
        )));
    }
    let (local, embed) = sub.as_system()?;
    let mut best = f64::INFINITY;
    let mut parent_word: Vec<Symbol> = Vec::new();
    for n in n_start..=n_cap.max(n_start) {
        // Cover by the sub-admissible (n + m)-cylinders, which are exactly
        // the dynamical balls of order n; S_n phi is constant on each.
        let mut log_sum = f64::NEG_INFINITY;
        local.for_each_word(n + m, |w| {
            parent_word.clear();
            parent_word.extend(w.iter().map(|&s| embed[s as usize]));
            let mut sum = 0.0;
            for j in 0..n {
                sum += potential.eval(&parent_word[j..]);
            }
            log_sum = log_add_exp(log_sum, sum - gamma * n as f64);
        });
        best = best.min(log_sum.exp());
    }
    Ok(best)
}

/// Cross-validation estimate of the relative pressure: bisect `gamma` until
/// the cover sum crosses 1. Bracket `[inf phi, spectral + sup phi + 1]`,
/// 60 bisection steps.
pub fn cover_pressure(
    system: &SftSystem,
    potential: &Potential,
    sub: &SubShift,
    epsilon: f64,
    n_order: usize,
) -> Result<f64> {
    let spectral = relative_pressure_subshift(system, potential, sub)?.value;
    let mut lo = -potential.sup_norm() - 1.0;
    let mut hi = spectral + potential.sup_norm() + 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let m = cover_sum(system, potential, sub, epsilon, n_order, n_order, mid)?;
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Report of the pressure-gap hypothesis between a good and a bad sub-SFT.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub pressure_good: f64,
    pub pressure_bad: f64,
    pub gap: f64,
    pub holds: bool,
    /// Sup-norm perturbations below this margin preserve the strict
    /// inequality (pressure is 1-Lipschitz in the potential).
    pub lipschitz_margin: f64,
}

/// Compare the restricted pressures of a potential on a good and a bad
/// sub-SFT; the gap feeds the openness margin `gap / 2`.
pub fn check_pressure_gap(
    system: &SftSystem,
    potential: &Potential,
    good: &SubShift,
    bad: &SubShift,
    tolerance: f64,
) -> Result<GapReport> {
    let pg = relative_pressure_subshift(system, potential, good)?;
    let pb = relative_pressure_subshift(system, potential, bad)?;
    let gap = pg.value - pb.value;
    Ok(GapReport {
        pressure_good: pg.value,
        pressure_bad: pb.value,
        gap,
        holds: gap > tolerance,
        lipschitz_margin: gap / 2.0,
    })
}

/// `phi - u + u o sigma` as a locally constant table of depth
/// `max(depth(phi), depth(u) + 1)`. Shares pressure and equilibrium state
/// with `phi`.
pub fn coboundary_transform(
    system: &SftSystem,
    phi: &Potential,
    u: &Potential,
) -> Result<Potential> {
    let (Some(dp), Some(du)) = (phi.lc_depth(), u.lc_depth()) else {
        return Err(Error::Unsupported(
            "coboundary transform requires locally constant data".into(),
        ));
    };
    let depth = dp.max(du + 1);
    Potential::locally_constant(system, depth, |w| phi.eval(w) - u.eval(w) + u.eval(&w[1..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::SftSystem;

    fn golden() -> SftSystem {
        SftSystem::golden_mean()
    }

    #[test]
    fn golden_mean_perron_root() {
        // Oracle: positive root of x^2 - x - 1.
        let sys = golden();
        let phi = Potential::zero(&sys);
        let matrix = transfer_matrix(&sys, &phi).unwrap();
        assert_eq!(matrix.dim(), 2);
        assert_eq!(matrix.weight(0, 0), 1.0);
        assert_eq!(matrix.weight(0, 1), 1.0);
        assert_eq!(matrix.weight(1, 0), 1.0);
        assert_eq!(matrix.weight(1, 1), 0.0);
        let data = perron(&matrix, 1e-13).unwrap();
        let oracle = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((data.lambda - oracle).abs() < 1e-12);
        // nu proportional to (golden, 1).
        assert!((data.nu_weights[0] / data.nu_weights[1] - oracle).abs() < 1e-10);
    }

    #[test]
    fn bernoulli_transfer_is_column_stochastic() {
        let sys = SftSystem::full_shift(2);
        let phi = Potential::bernoulli_log(&sys, &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let matrix = transfer_matrix(&sys, &phi).unwrap();
        for b in 0..2 {
            let col: f64 = (0..2).map(|a| matrix.weight(a, b)).sum();
            assert!((col - 1.0).abs() < 1e-15);
        }
        let data = perron(&matrix, 1e-13).unwrap();
        assert!((data.lambda - 1.0).abs() < 1e-12);
        assert!((data.nu_weights[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((data.nu_weights[1] - 2.0 / 3.0).abs() < 1e-12);
        // h constant 1 under <nu, h> = 1.
        assert!((data.h[0] - 1.0).abs() < 1e-10);
        assert!((data.h[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn depth_two_matrix_weights() {
        let sys = SftSystem::full_shift(2);
        let m = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let phi = Potential::from_log_matrix(&sys, &m).unwrap();
        let matrix = transfer_matrix(&sys, &phi).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((matrix.weight(a, b) - m[a][b]).abs() < 1e-12);
            }
        }
        let data = perron(&matrix, 1e-13).unwrap();
        // Oracle: quadratic formula for [[1,2],[3,4]].
        let oracle = (5.0 + 33.0f64.sqrt()) / 2.0;
        assert!((data.lambda - oracle).abs() < 1e-11);
    }

    #[test]
    fn pressure_spectral_values() {
        let sys = golden();
        let phi = Potential::zero(&sys);
        let p = pressure(&sys, &phi, PressureMode::Spectral).unwrap();
        assert!((p.value - 0.4812118250596035).abs() < 1e-10);

        let full = SftSystem::full_shift(2);
        let zero = Potential::zero(&full);
        let p = pressure(&full, &zero, PressureMode::Spectral).unwrap();
        assert!((p.value - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pressure_finite_n_brackets_spectral() {
        let sys = golden();
        let phi = Potential::zero(&sys);
        let spectral = pressure(&sys, &phi, PressureMode::Spectral).unwrap().value;
        let est = pressure(&sys, &phi, PressureMode::FiniteN { n: 18, epsilon: 0.5 }).unwrap();
        let (lo, hi) = est.bracket.unwrap();
        assert!(lo <= spectral && spectral <= hi, "{lo} {spectral} {hi}");
        assert!((est.value - spectral).abs() < 0.03);
        // Z_18 on the golden mean counts F(20) = 6765 words.
        assert!((est.value - (6765.0f64).ln() / 18.0).abs() < 1e-12);
    }

    #[test]
    fn finite_n_brackets_depth_two() {
        let sys = SftSystem::full_shift(2);
        let m = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let phi = Potential::from_log_matrix(&sys, &m).unwrap();
        let spectral = pressure(&sys, &phi, PressureMode::Spectral).unwrap().value;
        for n in [6, 10, 14] {
            let est = pressure(&sys, &phi, PressureMode::FiniteN { n, epsilon: 1.0 }).unwrap();
            let (lo, hi) = est.bracket.unwrap();
            assert!(lo <= spectral && spectral <= hi, "n={n}: {lo} {spectral} {hi}");
        }
    }

    #[test]
    fn relative_pressure_examples() {
        let full = SftSystem::full_shift(2);
        let zero = Potential::zero(&full);
        // Fixed point {0^infty}.
        let fixed = SubShift::restrict(&full, &[0]).unwrap();
        let rp = relative_pressure_subshift(&full, &zero, &fixed).unwrap();
        assert!(rp.value.abs() < 1e-12);
        // Golden mean inside the full shift.
        let gm = SubShift::with_transitions(&full, &[0, 1], &[vec![1, 1], vec![1, 0]]).unwrap();
        let rp = relative_pressure_subshift(&full, &zero, &gm).unwrap();
        assert!((rp.value - 0.4812118250596035).abs() < 1e-10);
        // Empty set under the positive-gamma cover convention.
        let rp = relative_pressure_subshift(&full, &zero, &SubShift::empty()).unwrap();
        assert!(rp.degenerate && rp.value == 0.0);
    }

    #[test]
    fn pressure_gap_full_vs_empty() {
        let full = SftSystem::full_shift(2);
        let zero = Potential::zero(&full);
        let good = SubShift::restrict(&full, &[0, 1]).unwrap();
        let report =
            check_pressure_gap(&full, &zero, &good, &SubShift::empty(), 1e-9).unwrap();
        assert!((report.gap - 2.0f64.ln()).abs() < 1e-10);
        assert!(report.holds);
    }

    #[test]
    fn cover_pressure_cross_validates() {
        let sys = golden();
        let phi = Potential::zero(&sys);
        let sub = SubShift::restrict(&sys, &[0, 1]).unwrap();
        let spectral = relative_pressure_subshift(&sys, &phi, &sub).unwrap().value;
        let cover = cover_pressure(&sys, &phi, &sub, 0.5, 14).unwrap();
        // The order-N cover sum carries an O(1/N) offset.
        assert!((cover - spectral).abs() < 0.1, "{cover} vs {spectral}");
    }

    #[test]
    fn coboundary_constant_telescopes() {
        let sys = SftSystem::full_shift(2);
        let phi = Potential::from_log_matrix(&sys, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let u = Potential::from_symbol_values(&sys, &[0.7, 0.7]).unwrap();
        let psi = coboundary_transform(&sys, &phi, &u).unwrap();
        sys.for_each_word(psi.lc_depth().unwrap(), |w| {
            assert!((psi.eval(w) - phi.eval(w)).abs() < 1e-14);
        });
    }

    #[test]
    fn coboundary_preserves_pressure() {
        let sys = SftSystem::full_shift(2);
        let phi = Potential::zero(&sys);
        let u = Potential::from_symbol_values(&sys, &[0.0, 1.0]).unwrap();
        let psi = coboundary_transform(&sys, &phi, &u).unwrap();
        let p = pressure(&sys, &psi, PressureMode::Spectral).unwrap();
        assert!((p.value - 2.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn pressure_lipschitz_in_potential() {
        let sys = golden();
        let phi = Potential::locally_constant(&sys, 2, |w| 0.4 * w[0] as f64 - 0.2).unwrap();
        let psi = Potential::locally_constant(&sys, 2, |w| {
            0.4 * w[0] as f64 - 0.2 + 0.3 * w[1] as f64
        })
        .unwrap();
        let p_phi = pressure(&sys, &phi, PressureMode::Spectral).unwrap().value;
        let p_psi = pressure(&sys, &psi, PressureMode::Spectral).unwrap().value;
        // |psi - phi| <= 0.3 pointwise.
        assert!((p_phi - p_psi).abs() <= 0.3 + 1e-12);
    }

    #[test]
    fn perron_rejects_reducible() {
        let sys = SftSystem::new(2, &[vec![1, 1], vec![0, 1]]).unwrap();
        let phi = Potential::zero(&sys);
        let matrix = transfer_matrix(&sys, &phi).unwrap();
        assert!(matches!(perron(&matrix, 1e-12), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn perron_periodic_pattern_converges() {
        let sys = SftSystem::new(2, &[vec![0, 1], vec![1, 0]]).unwrap();
        let phi = Potential::from_symbol_values(&sys, &[0.2, -0.5]).unwrap();
        let matrix = transfer_matrix(&sys, &phi).unwrap();
        let data = perron(&matrix, 1e-13).unwrap();
        // Oracle: sqrt of the 2-cycle weight product.
        let oracle = ((0.2f64).exp() * (-0.5f64).exp()).sqrt();
        assert!((data.lambda - oracle).abs() < 1e-12);
    }
}
