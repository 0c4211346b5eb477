//! Potentials on shift spaces: locally constant tables of finite depth, and
//! sampled potentials carrying an explicit cylinder variation bound.
//!
//! Sampled potentials never infer regularity: the constructor is handed the
//! non-increasing bound `len -> var_len` on the oscillation over
//! `len`-cylinders, and every downstream tolerance is propagated from it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::symbolic::{SftSystem, Symbol, Word};

pub type Sampler = Arc<dyn Fn(&[Symbol]) -> f64 + Send + Sync>;
pub type VariationBound = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PotentialKind {
    LocallyConstant {
        depth: usize,
        /// Radix-indexed over `alphabet^depth`; `NaN` at inadmissible words.
        table: Vec<f64>,
    },
    Sampled {
        sampler: Sampler,
        variation: VariationBound,
    },
}

#[derive(Clone)]
pub struct Potential {
    kind: PotentialKind,
    alphabet: usize,
    sup_norm: f64,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            PotentialKind::LocallyConstant { depth, .. } => f
                .debug_struct("Potential")
                .field("kind", &"locally-constant")
                .field("depth", depth)
                .field("sup_norm", &self.sup_norm)
                .finish(),
            PotentialKind::Sampled { .. } => f
                .debug_struct("Potential")
                .field("kind", &"sampled")
                .field("sup_norm", &self.sup_norm)
                .finish(),
        }
    }
}

fn radix_index(alphabet: usize, word: &[Symbol]) -> usize {
    word.iter().fold(0usize, |acc, &s| acc * alphabet + s as usize)
}

impl Potential {
    /// Locally constant potential of the given depth, tabulated over the
    /// admissible `depth`-words of `system`.
    pub fn locally_constant<F: Fn(&[Symbol]) -> f64>(
        system: &SftSystem,
        depth: usize,
        f: F,
    ) -> Result<Potential> {
        if depth == 0 {
            return Err(Error::invalid_parameter("depth", "must be at least 1"));
        }
        let a = system.alphabet_size();
        let mut table = vec![f64::NAN; a.pow(depth as u32)];
        let mut sup = 0.0f64;
        system.for_each_word(depth, |w| {
            let v = f(w);
            table[radix_index(a, w)] = v;
            sup = sup.max(v.abs());
        });
        let table_ok = table.iter().all(|v| v.is_nan() || v.is_finite());
        if !table_ok {
            return Err(Error::invalid_parameter(
                "table",
                "potential values must be finite on admissible words",
            ));
        }
        Ok(Potential {
            kind: PotentialKind::LocallyConstant { depth, table },
            alphabet: a,
            sup_norm: sup,
        })
    }

    /// The zero potential (depth 1).
    pub fn zero(system: &SftSystem) -> Potential {
        Self::locally_constant(system, 1, |_| 0.0).expect("depth 1 is valid")
    }

    /// Depth-1 potential from per-symbol values.
    pub fn from_symbol_values(system: &SftSystem, values: &[f64]) -> Result<Potential> {
        if values.len() != system.alphabet_size() {
            return Err(Error::invalid_parameter(
                "values",
                "one value per alphabet symbol required",
            ));
        }
        Self::locally_constant(system, 1, |w| values[w[0] as usize])
    }

    /// `phi(a) = log p_a` for a probability vector `p`.
    pub fn bernoulli_log(system: &SftSystem, p: &[f64]) -> Result<Potential> {
        if p.len() != system.alphabet_size() {
            return Err(Error::invalid_parameter("p", "one mass per symbol required"));
        }
        if p.iter().any(|&x| x <= 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid_parameter(
                "p",
                "masses must be positive and sum to 1",
            ));
        }
        Self::locally_constant(system, 1, |w| p[w[0] as usize].ln())
    }

    /// Depth-2 potential `phi(ab) = log m[a][b]`; entries at admissible
    /// transitions must be positive.
    pub fn from_log_matrix(system: &SftSystem, m: &[Vec<f64>]) -> Result<Potential> {
        let a = system.alphabet_size();
        if m.len() != a || m.iter().any(|r| r.len() != a) {
            return Err(Error::invalid_parameter("m", "matrix shape must match alphabet"));
        }
        for x in 0..a {
            for y in 0..a {
                if system.allowed(x as Symbol, y as Symbol) && m[x][y] <= 0.0 {
                    return Err(Error::invalid_parameter(
                        "m",
                        format!("weight at admissible transition ({x},{y}) must be positive"),
                    ));
                }
            }
        }
        Self::locally_constant(system, 2, |w| m[w[0] as usize][w[1] as usize].ln())
    }

    /// Sampled potential: evaluator on finite prefixes plus the explicit
    /// oscillation bound over `len`-cylinders and a cached sup norm.
    pub fn sampled(
        alphabet: usize,
        sampler: Sampler,
        variation: VariationBound,
        sup_norm: f64,
    ) -> Result<Potential> {
        // Spot-check that the declared bound is non-increasing.
        let mut prev = f64::INFINITY;
        for len in [1usize, 2, 4, 8, 16, 32] {
            let v = variation(len);
            if !(v >= 0.0) || v > prev + 1e-12 {
                return Err(Error::invalid_parameter(
                    "variation",
                    "bound must be nonnegative and non-increasing in cylinder depth",
                ));
            }
            prev = v;
        }
        Ok(Potential {
            kind: PotentialKind::Sampled { sampler, variation },
            alphabet,
            sup_norm,
        })
    }

    pub fn is_locally_constant(&self) -> bool {
        matches!(self.kind, PotentialKind::LocallyConstant { .. })
    }

    /// Depth of the locally constant table; `None` for sampled potentials.
    pub fn lc_depth(&self) -> Option<usize> {
        match &self.kind {
            PotentialKind::LocallyConstant { depth, .. } => Some(*depth),
            PotentialKind::Sampled { .. } => None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Evaluate on a prefix. Locally constant potentials read their leading
    /// `depth` symbols; sampled potentials receive the full prefix.
    pub fn eval(&self, prefix: &[Symbol]) -> f64 {
        match &self.kind {
            PotentialKind::LocallyConstant { depth, table } => {
                debug_assert!(prefix.len() >= *depth, "prefix shorter than table depth");
                table[radix_index(self.alphabet, &prefix[..*depth])]
            }
            PotentialKind::Sampled { sampler, .. } => sampler(prefix),
        }
    }

    /// Oscillation bound over `len`-cylinders.
    pub fn variation(&self, len: usize) -> f64 {
        match &self.kind {
            PotentialKind::LocallyConstant { depth, table } => {
                if len >= *depth {
                    0.0
                } else {
                    // Coarse bound: full oscillation of the table.
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for &v in table.iter().filter(|v| !v.is_nan()) {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    (hi - lo).max(0.0)
                }
            }
            PotentialKind::Sampled { variation, .. } => variation(len),
        }
    }

    /// `phi + t psi` as a locally constant table on the common refinement.
    pub fn add_scaled(&self, t: f64, other: &Potential, system: &SftSystem) -> Result<Potential> {
        let (Some(d1), Some(d2)) = (self.lc_depth(), other.lc_depth()) else {
            return Err(Error::Unsupported(
                "combining sampled potentials is not supported".into(),
            ));
        };
        let depth = d1.max(d2);
        Self::locally_constant(system, depth, |w| self.eval(w) + t * other.eval(w))
    }

    pub fn plus_constant(&self, c: f64, system: &SftSystem) -> Result<Potential> {
        match &self.kind {
            PotentialKind::LocallyConstant { depth, .. } => {
                Self::locally_constant(system, *depth, |w| self.eval(w) + c)
            }
            PotentialKind::Sampled { sampler, variation } => {
                let sampler = sampler.clone();
                let shifted: Sampler = Arc::new(move |w: &[Symbol]| sampler(w) + c);
                Potential::sampled(
                    self.alphabet,
                    shifted,
                    variation.clone(),
                    self.sup_norm + c.abs(),
                )
            }
        }
    }
}

/// A Birkhoff sum together with the uncertainty inherited from cylinder
/// variation (zero for locally constant data of sufficient depth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirkhoffValue {
    pub value: f64,
    pub uncertainty: f64,
}

/// `S_n phi` evaluated on the cylinder of `w`.
///
/// For a locally constant potential of depth `k` the word must carry
/// `n + k - 1` symbols so that every term is determined; sampled potentials
/// return the center-sample value with uncertainty at most
/// `sum_j var(|w| - j)`.
pub fn birkhoff_sum(potential: &Potential, w: &Word, n: usize) -> Result<BirkhoffValue> {
    let symbols = w.symbols();
    match potential.lc_depth() {
        Some(depth) => {
            let needed = n + depth - 1;
            if symbols.len() < needed {
                return Err(Error::InsufficientData(format!(
                    "Birkhoff sum of depth-{depth} potential over {n} steps needs {needed} symbols, got {}",
                    symbols.len()
                )));
            }
            let mut value = 0.0;
            for j in 0..n {
                value += potential.eval(&symbols[j..]);
            }
            Ok(BirkhoffValue {
                value,
                uncertainty: 0.0,
            })
        }
        None => {
            if symbols.len() < n {
                return Err(Error::InsufficientData(format!(
                    "Birkhoff sum over {n} steps needs at least {n} symbols, got {}",
                    symbols.len()
                )));
            }
            let mut value = 0.0;
            let mut uncertainty = 0.0;
            for j in 0..n {
                value += potential.eval(&symbols[j..]);
                uncertainty += potential.variation(symbols.len() - j);
            }
            Ok(BirkhoffValue { value, uncertainty })
        }
    }
}
