//! Weak-Gibbs verification: log-ratio scans of cylinder masses against
//! `exp(S phi - n P)`, the lacunarity envelope between detected Gibbs times,
//! eigenfunction density bounds, Jacobian identities, and the Cesaro
//! pushforward cross-check.
//!
//! Ratio convention. A sample is a word `b` (the dynamical ball
//! `B_eps(x, n)` as a cylinder of length `n + m(eps)`) together with the
//! time `n`. The Birkhoff part sums every term determined by `b` — that is
//! `|b| - depth + 1` terms for a depth-`depth` potential — so
//!
//! `log_ratio = log mu([b]) - (S_{|b|-depth+1} phi(b) - n P)`.
//!
//! On a Bernoulli instance with its own log-mass potential and `P = 0` the
//! two sums cancel termwise and the ratio is exactly zero.

use crate::error::{Error, Result};
use crate::maps::{GibbsTimeSeries, OrbitTrace, PiecewiseMap};
use crate::measure::{spectral_pair, CylinderMeasure};
use crate::potential::Potential;
use crate::symbolic::{prefix_length_for_radius, SftSystem, Symbol, Word};

/// One weak-Gibbs ratio sample.
#[derive(Debug, Clone)]
pub struct GibbsSample {
    pub word: Word,
    pub time: usize,
    pub log_ratio: f64,
    /// Uncertainty band (sampled potentials, Monte-Carlo masses).
    pub band: f64,
}

/// Ratio scan summary: `K` bounds the ratio band over the samples.
#[derive(Debug, Clone)]
pub struct GibbsReport {
    pub samples: Vec<GibbsSample>,
    pub k_upper: f64,
    pub k_lower: f64,
    pub epsilon: f64,
    pub pressure: f64,
}

impl GibbsReport {
    fn from_samples(samples: Vec<GibbsSample>, epsilon: f64, pressure: f64) -> GibbsReport {
        let hi = samples
            .iter()
            .map(|s| s.log_ratio + s.band)
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = samples
            .iter()
            .map(|s| s.log_ratio - s.band)
            .fold(f64::INFINITY, f64::min);
        GibbsReport {
            samples,
            k_upper: hi.exp(),
            k_lower: lo.exp(),
            epsilon,
            pressure,
        }
    }

    pub fn max_abs_log_ratio(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.log_ratio.abs())
            .fold(0.0, f64::max)
    }
}

fn ratio_on_ball(
    measure: &CylinderMeasure,
    potential: &Potential,
    pressure: f64,
    ball: &[Symbol],
    time: usize,
) -> Result<(f64, f64)> {
    let depth = potential.lc_depth().unwrap_or(1);
    if ball.len() < depth {
        return Err(Error::InsufficientDepth {
            needed: depth,
            available: ball.len(),
        });
    }
    let terms = ball.len() - depth + 1;
    let mut birkhoff = 0.0;
    let mut band = 0.0;
    for j in 0..terms {
        birkhoff += potential.eval(&ball[j..]);
        if !potential.is_locally_constant() {
            band += potential.variation(ball.len() - j);
        }
    }
    let log_mass = measure.log_weight(ball);
    Ok((log_mass - birkhoff + time as f64 * pressure, band))
}

/// Ratio report over explicit `(word, time)` samples at radius `epsilon`.
pub fn gibbs_report(
    measure: &CylinderMeasure,
    potential: &Potential,
    pressure: f64,
    samples: &[(Word, usize)],
    epsilon: f64,
) -> Result<GibbsReport> {
    let m = prefix_length_for_radius(epsilon)?;
    let mut out = Vec::with_capacity(samples.len());
    for (word, n) in samples {
        let needed = n + m;
        if word.len() < needed {
            return Err(Error::InsufficientDepth {
                needed,
                available: word.len(),
            });
        }
        let ball = word.prefix(needed);
        let (log_ratio, band) = ratio_on_ball(measure, potential, pressure, ball.symbols(), *n)?;
        out.push(GibbsSample {
            word: ball,
            time: *n,
            log_ratio,
            band,
        });
    }
    Ok(GibbsReport::from_samples(out, epsilon, pressure))
}

/// Per-time extremes of the log-ratio over an exhaustive cylinder scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanRow {
    pub time: usize,
    pub min_log_ratio: f64,
    pub max_log_ratio: f64,
}

impl ScanRow {
    pub fn max_abs(&self) -> f64 {
        self.min_log_ratio.abs().max(self.max_log_ratio.abs())
    }
}

/// Exhaustive ratio scan over every admissible ball cylinder for times
/// `n_min ..= n_max` at radius `epsilon`. Depth-first with incremental mass
/// and Birkhoff accumulators, so scans to length ~22 stay cheap.
pub fn gibbs_scan(
    system: &SftSystem,
    measure: &CylinderMeasure,
    potential: &Potential,
    pressure: f64,
    n_min: usize,
    n_max: usize,
    epsilon: f64,
) -> Result<Vec<ScanRow>> {
    let m = prefix_length_for_radius(epsilon)?;
    let depth = potential
        .lc_depth()
        .ok_or_else(|| Error::Unsupported("scans require locally constant potentials".into()))?;
    if n_min == 0 || n_min > n_max {
        return Err(Error::invalid_parameter("n_min", "need 1 <= n_min <= n_max"));
    }
    if n_min + m < depth {
        return Err(Error::InsufficientDepth {
            needed: depth,
            available: n_min + m,
        });
    }
    let chain = measure.chain_view(system, 1)?;
    let state_len = chain.state_len();
    let max_len = n_max + m;
    let mut rows: Vec<ScanRow> = (n_min..=n_max)
        .map(|time| ScanRow {
            time,
            min_log_ratio: f64::INFINITY,
            max_log_ratio: f64::NEG_INFINITY,
        })
        .collect();

    struct Ctx<'a> {
        system: &'a SftSystem,
        measure: &'a CylinderMeasure,
        chain: &'a crate::measure::ChainForm,
        potential: &'a Potential,
        pressure: f64,
        depth: usize,
        state_len: usize,
        m: usize,
        n_min: usize,
        max_len: usize,
        rows: Vec<ScanRow>,
        word: Vec<Symbol>,
    }

    fn rec(ctx: &mut Ctx<'_>, state: Option<usize>, log_mass: f64, birkhoff: f64) {
        let len = ctx.word.len();
        if len >= ctx.n_min + ctx.m {
            let time = len - ctx.m;
            let log_ratio = log_mass - birkhoff + time as f64 * ctx.pressure;
            let row = &mut ctx.rows[time - ctx.n_min];
            row.min_log_ratio = row.min_log_ratio.min(log_ratio);
            row.max_log_ratio = row.max_log_ratio.max(log_ratio);
        }
        if len == ctx.max_len {
            return;
        }
        for s in 0..ctx.system.alphabet_size() as Symbol {
            if ctx
                .word
                .last()
                .is_some_and(|&last| !ctx.system.allowed(last, s))
            {
                continue;
            }
            ctx.word.push(s);
            let new_len = ctx.word.len();
            let (next_state, next_mass) = match state {
                Some(st) => match ctx.chain.advance(st, s) {
                    Some(nx) => (Some(nx), log_mass + ctx.chain.step_weight(st, nx).ln()),
                    None => {
                        ctx.word.pop();
                        continue;
                    }
                },
                None => {
                    if new_len == ctx.state_len {
                        match ctx.chain.state_index(&ctx.word) {
                            Some(st) => (Some(st), ctx.chain.initial[st].ln()),
                            None => {
                                ctx.word.pop();
                                continue;
                            }
                        }
                    } else {
                        (None, ctx.measure.log_weight(&ctx.word))
                    }
                }
            };
            let next_birkhoff = if new_len >= ctx.depth {
                birkhoff + ctx.potential.eval(&ctx.word[new_len - ctx.depth..])
            } else {
                birkhoff
            };
            rec(ctx, next_state, next_mass, next_birkhoff);
            ctx.word.pop();
        }
    }

    let mut ctx = Ctx {
        system,
        measure,
        chain: &chain,
        potential,
        pressure,
        depth,
        state_len,
        m,
        n_min,
        max_len,
        rows: std::mem::take(&mut rows),
        word: Vec::with_capacity(max_len),
    };
    rec(&mut ctx, None, 0.0, 0.0);
    Ok(ctx.rows)
}

/// Max deviation of the Jacobian identity
/// `nu(sigma C) = lambda e^{-phi(C)} nu(C)` over all admissible cylinders of
/// length `depth ..= max_len`.
pub fn jacobian_check(
    system: &SftSystem,
    measure: &CylinderMeasure,
    potential: &Potential,
    lambda: f64,
    max_len: usize,
) -> Result<f64> {
    let depth = potential
        .lc_depth()
        .ok_or_else(|| Error::Unsupported("Jacobian check requires locally constant data".into()))?;
    let mut worst = 0.0f64;
    for len in depth.max(1)..=max_len {
        system.for_each_word(len, |w| {
            let image_mass = if len == 1 {
                system
                    .successors(w[0])
                    .map(|b| measure.weight(&[b]))
                    .sum::<f64>()
            } else {
                measure.weight(&w[1..])
            };
            let predicted = lambda * (-potential.eval(w)).exp() * measure.weight(w);
            worst = worst.max((image_mass - predicted).abs());
        });
    }
    Ok(worst)
}

/// Bounds of the eigenfunction `h` over states, with the equivalence
/// constant `K1 = h_max / h_min` between the conformal and equilibrium
/// measures.
#[derive(Debug, Clone, Copy)]
pub struct DensityBounds {
    pub h_min: f64,
    pub h_max: f64,
    pub equivalence_constant: f64,
}

pub fn density_bounds(system: &SftSystem, potential: &Potential) -> Result<DensityBounds> {
    let (_, data) = spectral_pair(system, potential)?;
    let (h_min, h_max) = data.h_bounds();
    if h_min <= 0.0 {
        return Err(Error::NumericFailure {
            op: "density_bounds",
            residual: h_min,
            iterations: data.iterations,
        });
    }
    Ok(DensityBounds {
        h_min,
        h_max,
        equivalence_constant: h_max / h_min,
    })
}

/// Envelope check at an intermediate time `n` between recorded Gibbs times:
/// the ratio must stay inside `K e^{alpha (n_{i+1} - n_i)}` with
/// `alpha = sup|phi| + P`.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeCheck {
    pub time: usize,
    pub gap: usize,
    pub alpha: f64,
    /// `log K + alpha * gap`.
    pub envelope_log: f64,
    pub abs_log_ratio: f64,
    pub slack: f64,
    pub ok: bool,
}

pub fn envelope_report(
    measure: &CylinderMeasure,
    potential: &Potential,
    pressure: f64,
    times: &GibbsTimeSeries,
    word: &Word,
    n: usize,
    epsilon: f64,
    log_k: f64,
) -> Result<EnvelopeCheck> {
    let Some((lo, hi)) = times.bracketing_gap(n) else {
        return Err(Error::InsufficientData(format!(
            "time {n} is outside the recorded Gibbs-time range"
        )));
    };
    let gap = hi - lo;
    let alpha = potential.sup_norm() + pressure;
    let report = gibbs_report(measure, potential, pressure, &[(word.clone(), n)], epsilon)?;
    let abs_log_ratio = report.samples[0].log_ratio.abs();
    let envelope_log = log_k + alpha * gap as f64;
    let slack = envelope_log - abs_log_ratio;
    Ok(EnvelopeCheck {
        time: n,
        gap,
        alpha,
        envelope_log,
        abs_log_ratio,
        slack,
        ok: slack >= -1e-9,
    })
}

/// Total-variation distances of the Cesaro pushforward averages
/// `mu_n = (1/n) sum_j sigma^j_* nu` from the equilibrium measure, computed
/// exactly on `cylinder_len`-cylinders via the transfer recursion.
pub fn cesaro_compare(
    system: &SftSystem,
    potential: &Potential,
    n_max: usize,
    cylinder_len: usize,
) -> Result<Vec<f64>> {
    if n_max == 0 {
        return Err(Error::invalid_parameter("n_max", "must be positive"));
    }
    let (matrix, data) = spectral_pair(system, potential)?;
    let dim = matrix.dim();
    let state_len = matrix.state_words()[0].len();
    if cylinder_len < state_len {
        return Err(Error::InsufficientDepth {
            needed: state_len,
            available: cylinder_len,
        });
    }
    let nu = crate::measure::conformal_measure(system, potential)?;
    // c_j = lambda^{-j} 1^T W^j, iterated as a row vector; the pushforward
    // acts on cylinder masses by c_j at the leading state.
    let mut c = vec![1.0f64; dim];
    let mut cesaro = vec![0.0f64; dim];
    let mut distances = Vec::with_capacity(n_max);
    // Mass of each leading state over cylinder_len-words.
    let mut state_of_word: Vec<(Vec<Symbol>, usize, f64)> = Vec::new();
    system.for_each_word(cylinder_len, |w| {
        let idx = matrix
            .state_index(&w[..state_len])
            .expect("admissible prefix is a state");
        state_of_word.push((w.to_vec(), idx, 0.0));
    });
    for entry in state_of_word.iter_mut() {
        entry.2 = nu.weight(&entry.0);
    }
    let mut next = vec![0.0f64; dim];
    for n in 1..=n_max {
        for (dst, &src) in cesaro.iter_mut().zip(&c) {
            *dst += src;
        }
        // TV distance on cylinder_len-cylinders between mu_n and h d nu.
        let inv_n = 1.0 / n as f64;
        let mut tv = 0.0;
        for (_, state, mass) in &state_of_word {
            tv += mass * (cesaro[*state] * inv_n - data.h[*state]).abs();
        }
        distances.push(0.5 * tv);
        // Advance c_{j} -> c_{j+1}.
        for (j, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..dim {
                acc += c[i] * matrix.weight(i, j);
            }
            *slot = acc / data.lambda;
        }
        std::mem::swap(&mut c, &mut next);
    }
    Ok(distances)
}

/// Statistical weak-Gibbs sampling for interval maps: ball masses are
/// estimated by visit counting on a long estimation orbit and flagged with
/// binomial confidence bands.
pub struct MapGibbsContext<'a> {
    map: &'a PiecewiseMap,
    trace: &'a OrbitTrace,
    sorted_points: Vec<f64>,
    pressure: f64,
}

/// One statistical ratio sample on an interval map.
#[derive(Debug, Clone, Copy)]
pub struct MapGibbsSample {
    pub time: usize,
    pub ball: (f64, f64),
    pub visits: usize,
    pub mass_estimate: f64,
    pub log_ratio: f64,
    /// Two-sigma band of the log mass estimate.
    pub band: f64,
}

impl<'a> MapGibbsContext<'a> {
    /// `estimation` carries samples of the invariant measure, typically the
    /// points of a long generic orbit.
    pub fn new(
        map: &'a PiecewiseMap,
        trace: &'a OrbitTrace,
        estimation: &[f64],
        pressure: f64,
    ) -> MapGibbsContext<'a> {
        let mut pts = estimation.to_vec();
        pts.sort_by(f64::total_cmp);
        MapGibbsContext {
            map,
            trace,
            sorted_points: pts,
            pressure,
        }
    }

    fn ball_mass(&self, lo: f64, hi: f64) -> (usize, f64) {
        let a = self.sorted_points.partition_point(|&x| x < lo);
        let b = self.sorted_points.partition_point(|&x| x <= hi);
        let visits = b.saturating_sub(a);
        (visits, visits as f64 / self.sorted_points.len() as f64)
    }

    /// Ratio sample at time `n` with `phi = log |Df|^{-1}` along the traced
    /// orbit (the geometric potential; its equilibrium is the absolutely
    /// continuous measure with `P = 0`).
    pub fn ratio_at(&self, n: usize, epsilon: f64, c: f64) -> Result<MapGibbsSample> {
        let star = crate::maps::verify_star(self.map, self.trace, n, epsilon, c)?;
        let (lo, hi) = star.ball;
        let (visits, mass) = self.ball_mass(lo, hi);
        if visits == 0 {
            return Err(Error::InsufficientData(format!(
                "no estimation-orbit visits to the ball at time {n}; lengthen the orbit"
            )));
        }
        let birkhoff: f64 = self.trace.log_inv_derivs()[..n].iter().sum();
        let log_ratio = mass.ln() - birkhoff + n as f64 * self.pressure;
        let stderr = ((1.0 - mass) / (visits as f64)).sqrt();
        Ok(MapGibbsSample {
            time: n,
            ball: (lo, hi),
            visits,
            mass_estimate: mass,
            log_ratio,
            band: 2.0 * stderr,
        })
    }
}

/// Sup of `|log Df|` over the branches (monotone per branch, so endpoint
/// evaluation suffices for the supported kinds).
pub fn sup_log_deriv(map: &PiecewiseMap) -> f64 {
    map.branches()
        .iter()
        .map(|b| {
            let (lo, hi) = b.domain();
            b.deriv(lo).ln().abs().max(b.deriv(hi).ln().abs())
        })
        .fold(0.0, f64::max)
}
