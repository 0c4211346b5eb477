//! Measures represented by exact weights on cylinders.
//!
//! Every supported kind (Bernoulli, Markov, conformal eigenmeasure,
//! tabulated) exposes cylinder weights through the same accessor; the first
//! three also reduce to a chain view `(initial state weights, stochastic
//! step matrix)`, which is what the exact deviation DP and the Cesaro
//! pushforward consume.

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::symbolic::{SftSystem, Symbol};
use crate::transfer::{perron, transfer_matrix, SpectralData, TransferMatrix, SPECTRAL_TOL};

/// Measure with exact cylinder weights.
#[derive(Debug, Clone)]
pub struct CylinderMeasure {
    kind: MeasureKind,
}

#[derive(Debug, Clone)]
enum MeasureKind {
    /// Product measure from per-symbol log masses.
    Bernoulli { log_p: Vec<f64> },
    /// Markov chain on `(K-1)`-word states.
    Markov(ChainForm),
    /// Conformal eigenmeasure: same step matrix as the equilibrium chain but
    /// started from the eigenmeasure state weights (not stationary).
    Conformal(ChainForm),
    /// Explicit weights on fixed-depth cylinders (testing aid).
    Tabulated { depth: usize, alphabet: usize, weights: Vec<f64> },
}

/// Chain data over `(K-1)`-word states.
#[derive(Debug, Clone)]
pub struct ChainForm {
    /// State words, lexicographic.
    pub states: Vec<Vec<Symbol>>,
    /// Initial weights per state (stationary for the equilibrium kind).
    pub initial: Vec<f64>,
    /// Row-stochastic step matrix.
    pub step: Vec<f64>,
    pub alphabet: usize,
}

impl ChainForm {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state_len(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn state_index(&self, word: &[Symbol]) -> Option<usize> {
        self.states.binary_search_by(|s| s.as_slice().cmp(word)).ok()
    }

    pub fn step_weight(&self, from: usize, to: usize) -> f64 {
        self.step[from * self.dim() + to]
    }

    /// Successor state index when appending `symbol`, if admissible.
    pub fn advance(&self, from: usize, symbol: Symbol) -> Option<usize> {
        let mut next = self.states[from][1..].to_vec();
        next.push(symbol);
        let to = self.state_index(&next)?;
        (self.step_weight(from, to) > 0.0).then_some(to)
    }

    fn log_weight(&self, word: &[Symbol]) -> f64 {
        let k = self.state_len();
        if word.len() < k {
            // Sum over states extending the prefix.
            let total: f64 = self
                .states
                .iter()
                .zip(&self.initial)
                .filter(|(s, _)| s.starts_with(word))
                .map(|(_, w)| w)
                .sum();
            return total.ln();
        }
        let Some(mut state) = self.state_index(&word[..k]) else {
            return f64::NEG_INFINITY;
        };
        let mut log = self.initial[state].ln();
        for &s in &word[k..] {
            let Some(next) = self.advance(state, s) else {
                return f64::NEG_INFINITY;
            };
            log += self.step_weight(state, next).ln();
            state = next;
        }
        log
    }

    fn weight(&self, word: &[Symbol]) -> f64 {
        let k = self.state_len();
        if word.len() < k {
            return self
                .states
                .iter()
                .zip(&self.initial)
                .filter(|(s, _)| s.starts_with(word))
                .map(|(_, w)| w)
                .sum();
        }
        let Some(mut state) = self.state_index(&word[..k]) else {
            return 0.0;
        };
        let mut mass = self.initial[state];
        for &s in &word[k..] {
            let Some(next) = self.advance(state, s) else {
                return 0.0;
            };
            mass *= self.step_weight(state, next);
            state = next;
        }
        mass
    }
}

impl CylinderMeasure {
    /// Product measure with masses `p`.
    pub fn bernoulli(p: &[f64]) -> Result<CylinderMeasure> {
        if p.iter().any(|&x| x <= 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid_parameter(
                "p",
                "masses must be positive and sum to 1",
            ));
        }
        Ok(CylinderMeasure {
            kind: MeasureKind::Bernoulli {
                log_p: p.iter().map(|&x| x.ln()).collect(),
            },
        })
    }

    /// Markov measure from an explicit stationary vector and stochastic
    /// matrix over plain symbols.
    pub fn markov(pi: &[f64], q: &[Vec<f64>]) -> Result<CylinderMeasure> {
        let n = pi.len();
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(Error::invalid_parameter("q", "matrix shape mismatch"));
        }
        for (i, row) in q.iter().enumerate() {
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid_parameter(
                    "q",
                    format!("row {i} does not sum to 1"),
                ));
            }
        }
        for j in 0..n {
            let bal: f64 = (0..n).map(|i| pi[i] * q[i][j]).sum();
            if (bal - pi[j]).abs() > 1e-9 {
                return Err(Error::invalid_parameter("pi", "pi Q = pi fails"));
            }
        }
        Ok(CylinderMeasure {
            kind: MeasureKind::Markov(ChainForm {
                states: (0..n).map(|i| vec![i as Symbol]).collect(),
                initial: pi.to_vec(),
                step: q.iter().flat_map(|r| r.iter().copied()).collect(),
                alphabet: n,
            }),
        })
    }

    /// Explicit weights on all admissible `depth`-cylinders.
    pub fn tabulated(system: &SftSystem, depth: usize, weights: Vec<(Vec<Symbol>, f64)>) -> Result<CylinderMeasure> {
        let a = system.alphabet_size();
        let mut table = vec![0.0; a.pow(depth as u32)];
        let mut total = 0.0;
        for (w, mass) in weights {
            if w.len() != depth || !system.is_admissible(&w) {
                return Err(Error::invalid_parameter("weights", "inadmissible cylinder"));
            }
            let idx = w.iter().fold(0usize, |acc, &s| acc * a + s as usize);
            table[idx] = mass;
            total += mass;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid_parameter("weights", "total mass must be 1"));
        }
        Ok(CylinderMeasure {
            kind: MeasureKind::Tabulated {
                depth,
                alphabet: a,
                weights: table,
            },
        })
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self.kind, MeasureKind::Bernoulli { .. })
    }

    /// Per-symbol log masses when the measure is a product measure.
    pub fn bernoulli_log_masses(&self) -> Option<&[f64]> {
        match &self.kind {
            MeasureKind::Bernoulli { log_p } => Some(log_p),
            _ => None,
        }
    }

    /// Chain view over `(K-1)`-word states, lifted to at least `min_state_len`
    /// symbols per state. Tabulated measures have no chain form.
    pub fn chain_view(&self, system: &SftSystem, min_state_len: usize) -> Result<ChainForm> {
        let base = match &self.kind {
            MeasureKind::Bernoulli { log_p } => {
                let n = log_p.len();
                let p: Vec<f64> = log_p.iter().map(|&l| l.exp()).collect();
                ChainForm {
                    states: (0..n).map(|i| vec![i as Symbol]).collect(),
                    initial: p.clone(),
                    step: (0..n).flat_map(|_| p.iter().copied()).collect::<Vec<_>>(),
                    alphabet: n,
                }
            }
            MeasureKind::Markov(chain) | MeasureKind::Conformal(chain) => chain.clone(),
            MeasureKind::Tabulated { .. } => {
                return Err(Error::Unsupported(
                    "tabulated measures carry no chain form".into(),
                ))
            }
        };
        if base.state_len() >= min_state_len.max(1) {
            return Ok(base);
        }
        // Lift to longer states: initial = cylinder weights, steps from the
        // native conditional ratios.
        let target = min_state_len.max(1);
        let mut states: Vec<Vec<Symbol>> = Vec::new();
        system.for_each_word(target, |w| states.push(w.to_vec()));
        let dim = states.len();
        let mut initial = vec![0.0; dim];
        let mut step = vec![0.0; dim * dim];
        for (i, s) in states.iter().enumerate() {
            initial[i] = self.weight(s);
            let parent_mass = initial[i];
            if parent_mass == 0.0 {
                continue;
            }
            let mut child = Vec::with_capacity(target + 1);
            for b in system.successors(*s.last().unwrap()) {
                child.clear();
                child.extend_from_slice(s);
                child.push(b);
                let mass = self.weight(&child);
                if mass == 0.0 {
                    continue;
                }
                let mut next_state = s[1..].to_vec();
                next_state.push(b);
                let j = states
                    .binary_search_by(|c| c.as_slice().cmp(&next_state))
                    .expect("shift extension is admissible");
                step[i * dim + j] = mass / parent_mass;
            }
        }
        Ok(ChainForm {
            states,
            initial,
            step,
            alphabet: system.alphabet_size(),
        })
    }

    /// Cylinder mass of a word.
    pub fn weight(&self, word: &[Symbol]) -> f64 {
        match &self.kind {
            MeasureKind::Bernoulli { log_p } => {
                let mut mass = 1.0;
                for &s in word {
                    mass *= log_p[s as usize].exp();
                }
                mass
            }
            MeasureKind::Markov(chain) | MeasureKind::Conformal(chain) => chain.weight(word),
            MeasureKind::Tabulated {
                depth,
                alphabet,
                weights,
            } => {
                if word.len() > *depth {
                    return 0.0;
                }
                let mut total = 0.0;
                let free = depth - word.len();
                // Sum the stored weights over all completions.
                let base = word.iter().fold(0usize, |acc, &s| acc * alphabet + s as usize);
                let block = alphabet.pow(free as u32);
                for offset in 0..block {
                    total += weights[base * block + offset];
                }
                total
            }
        }
    }

    /// `log` of the cylinder mass; `-inf` on null cylinders. For Bernoulli
    /// measures this sums the stored per-symbol logs front to back, matching
    /// the Birkhoff accumulation order exactly.
    pub fn log_weight(&self, word: &[Symbol]) -> f64 {
        match &self.kind {
            MeasureKind::Bernoulli { log_p } => {
                let mut log = 0.0;
                for &s in word {
                    log += log_p[s as usize];
                }
                log
            }
            MeasureKind::Markov(chain) | MeasureKind::Conformal(chain) => chain.log_weight(word),
            MeasureKind::Tabulated { .. } => self.weight(word).ln(),
        }
    }
}

/// Spectral construction of the conformal (reference) measure: cylinder
/// weights in closed form from the Perron data, so that the Jacobian
/// identity `nu(sigma A) = lambda e^{-phi} nu(A)` is exact on cylinders.
pub fn conformal_measure(system: &SftSystem, potential: &Potential) -> Result<CylinderMeasure> {
    let (matrix, data) = spectral_pair(system, potential)?;
    Ok(CylinderMeasure {
        kind: MeasureKind::Conformal(chain_from_spectral(&matrix, &data, false)),
    })
}

/// The shift-invariant equilibrium measure `mu = h d nu` as a Markov chain
/// in closed form.
pub fn equilibrium_measure(system: &SftSystem, potential: &Potential) -> Result<CylinderMeasure> {
    let (matrix, data) = spectral_pair(system, potential)?;
    let chain = chain_from_spectral(&matrix, &data, true);
    // Invariance check: pi Q = pi within 1e-12.
    let dim = chain.dim();
    for j in 0..dim {
        let bal: f64 = (0..dim).map(|i| chain.initial[i] * chain.step[i * dim + j]).sum();
        debug_assert!((bal - chain.initial[j]).abs() <= 1e-12);
    }
    Ok(CylinderMeasure {
        kind: MeasureKind::Markov(chain),
    })
}

pub fn spectral_pair(
    system: &SftSystem,
    potential: &Potential,
) -> Result<(TransferMatrix, SpectralData)> {
    let matrix = transfer_matrix(system, potential)?;
    let data = perron(&matrix, SPECTRAL_TOL)?;
    Ok((matrix, data))
}

fn chain_from_spectral(matrix: &TransferMatrix, data: &SpectralData, invariant: bool) -> ChainForm {
    let dim = matrix.dim();
    let mut step = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let w = matrix.weight(i, j);
            if w > 0.0 {
                step[i * dim + j] = w * data.nu_weights[j] / (data.lambda * data.nu_weights[i]);
            }
        }
    }
    let initial = if invariant {
        (0..dim).map(|i| data.h[i] * data.nu_weights[i]).collect()
    } else {
        data.nu_weights.clone()
    };
    ChainForm {
        states: matrix.state_words().to_vec(),
        initial,
        step,
        alphabet: matrix.alphabet(),
    }
}

/// Fixed-point iteration of the normalized dual operator on depth-`n`
/// cylinder weight vectors. Independent check of the closed-form conformal
/// weights: iterate `v <- L^T-pullback` on cylinder masses until stable.
///
/// Returns the converged weights per admissible `depth`-word, ordered
/// lexicographically.
pub fn dual_fixed_point_weights(
    system: &SftSystem,
    potential: &Potential,
    depth: usize,
    iterations: usize,
) -> Result<Vec<(Vec<Symbol>, f64)>> {
    let k = potential
        .lc_depth()
        .ok_or_else(|| Error::Unsupported("dual iteration needs locally constant data".into()))?;
    if depth < k.max(2) - 1 {
        return Err(Error::invalid_parameter("depth", "too small for the potential"));
    }
    let mut words: Vec<Vec<Symbol>> = Vec::new();
    system.for_each_word(depth, |w| words.push(w.to_vec()));
    let index = |w: &[Symbol]| -> usize {
        words.binary_search_by(|c| c.as_slice().cmp(w)).expect("admissible")
    };
    let mut v = vec![1.0 / words.len() as f64; words.len()];
    let mut next = vec![0.0; words.len()];
    let mut buf: Vec<Symbol> = Vec::with_capacity(depth + 1);
    for _ in 0..iterations {
        // (L* v)([w]) = sum over one-symbol prepends a of e^{phi(a w)} v([a w prefix]).
        for x in next.iter_mut() {
            *x = 0.0;
        }
        for (i, w) in words.iter().enumerate() {
            for a in system.predecessors(w[0]) {
                buf.clear();
                buf.push(a);
                buf.extend_from_slice(w);
                let prefix = &buf[..depth];
                next[index(prefix)] += potential.eval(&buf).exp() * v[i];
            }
        }
        let total: f64 = next.iter().sum();
        for (dst, src) in v.iter_mut().zip(&next) {
            *dst = src / total;
        }
    }
    Ok(words.into_iter().zip(v).collect())
}
