//! Piecewise monotone interval maps with non-uniform expansion: orbit
//! simulation with branch replay, Pliss-type hyperbolic time detection,
//! zooming times, and verification that dynamical balls are mapped onto
//! full balls with exponential backward contraction.
//!
//! Branches are left-closed. Orbits record which branch was taken at every
//! step so that inverse branches can replay the orbit unambiguously; a point
//! landing exactly on an interior branch boundary is resolved to the
//! left-closed branch and reported on the trace.

use crate::error::{Error, Result};
use crate::symbolic::{SftSystem, Symbol};
use crate::transfer::SubShift;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapKind {
    Doubling,
    Intermittent { alpha: f64 },
    Deformed { delta: f64, contraction: f64 },
}

#[derive(Debug, Clone, Copy)]
enum BranchKind {
    /// `x -> slope x + offset`
    Affine { slope: f64, offset: f64 },
    /// `x -> x (1 + coef x^alpha)`, neutral at 0.
    Neutral { alpha: f64, coef: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Branch {
    lo: f64,
    hi: f64,
    kind: BranchKind,
}

impl Branch {
    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            BranchKind::Affine { slope, offset } => slope.mul_add(x, offset),
            BranchKind::Neutral { alpha, coef } => x + coef * power(x, 1.0 + alpha),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self.kind {
            BranchKind::Affine { slope, .. } => slope,
            BranchKind::Neutral { alpha, coef } => 1.0 + (1.0 + alpha) * coef * power(x, alpha),
        }
    }

    /// Image interval `[f(lo), f(hi))` (branches are increasing).
    pub fn image(&self) -> (f64, f64) {
        (self.eval(self.lo), self.eval(self.hi))
    }

    /// Inverse of the branch map on its image.
    pub fn invert(&self, y: f64) -> f64 {
        match self.kind {
            BranchKind::Affine { slope, offset } => (y - offset) / slope,
            BranchKind::Neutral { alpha, coef } => {
                if y <= 0.0 {
                    return 0.0;
                }
                // f(x) = x + coef x^{1+alpha} is convex; Newton from the
                // right converges monotonically.
                let mut x = y;
                for _ in 0..40 {
                    let fx = x + coef * power(x, 1.0 + alpha);
                    let dfx = 1.0 + (1.0 + alpha) * coef * power(x, alpha);
                    let step = (fx - y) / dfx;
                    x -= step;
                    if step.abs() <= 1e-17 * x.abs() + 1e-300 {
                        break;
                    }
                }
                x.max(0.0)
            }
        }
    }
}

#[inline]
fn power(x: f64, e: f64) -> f64 {
    if e == 0.5 {
        x.sqrt()
    } else if e == 1.5 {
        x * x.sqrt()
    } else {
        x.powf(e)
    }
}

/// A piecewise monotone map of `[0, 1)` with evaluable derivative and
/// per-branch inverses.
#[derive(Debug, Clone)]
pub struct PiecewiseMap {
    kind: MapKind,
    branches: Vec<Branch>,
    /// Radius scale below which ball pullbacks are certified.
    delta0: f64,
}

impl PiecewiseMap {
    /// The doubling map `x -> 2x mod 1`.
    pub fn doubling() -> PiecewiseMap {
        PiecewiseMap {
            kind: MapKind::Doubling,
            branches: vec![
                Branch {
                    lo: 0.0,
                    hi: 0.5,
                    kind: BranchKind::Affine { slope: 2.0, offset: 0.0 },
                },
                Branch {
                    lo: 0.5,
                    hi: 1.0,
                    kind: BranchKind::Affine { slope: 2.0, offset: -1.0 },
                },
            ],
            delta0: 0.25,
        }
    }

    /// Intermittent map with neutral fixed point at 0:
    /// `x (1 + 2^alpha x^alpha)` on `[0, 1/2)`, `2x - 1` on `[1/2, 1)`.
    pub fn intermittent(alpha: f64) -> Result<PiecewiseMap> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid_parameter("alpha", "must lie in (0, 1)"));
        }
        Ok(PiecewiseMap {
            kind: MapKind::Intermittent { alpha },
            branches: vec![
                Branch {
                    lo: 0.0,
                    hi: 0.5,
                    kind: BranchKind::Neutral {
                        alpha,
                        coef: 2.0f64.powf(alpha),
                    },
                },
                Branch {
                    lo: 0.5,
                    hi: 1.0,
                    kind: BranchKind::Affine { slope: 2.0, offset: -1.0 },
                },
            ],
            delta0: 0.01,
        })
    }

    /// Doubling map deformed on `[0, delta)` into a contracting trap.
    pub fn deformed(delta: f64, contraction: f64) -> Result<(PiecewiseMap, DeformedModel)> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::invalid_parameter("delta", "must lie in (0, 1/2)"));
        }
        if !(contraction > 0.0 && contraction < 1.0) {
            return Err(Error::invalid_parameter("contraction", "must lie in (0, 1)"));
        }
        let map = PiecewiseMap {
            kind: MapKind::Deformed { delta, contraction },
            branches: vec![
                Branch {
                    lo: 0.0,
                    hi: delta,
                    kind: BranchKind::Affine { slope: contraction, offset: 0.0 },
                },
                Branch {
                    lo: delta,
                    hi: 0.5,
                    kind: BranchKind::Affine { slope: 2.0, offset: 0.0 },
                },
                Branch {
                    lo: 0.5,
                    hi: 1.0,
                    kind: BranchKind::Affine { slope: 2.0, offset: -1.0 },
                },
            ],
            delta0: delta / 2.0,
        };
        let model = DeformedModel::build(delta)?;
        Ok((map, model))
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    /// Branch containing `x` under the left-closed convention, and whether
    /// `x` sits exactly on an interior boundary.
    pub fn branch_index(&self, x: f64) -> (usize, bool) {
        let mut idx = self.branches.len() - 1;
        for (i, b) in self.branches.iter().enumerate() {
            if x < b.hi {
                idx = i;
                break;
            }
        }
        let hit = x == self.branches[idx].lo && x != 0.0;
        (idx, hit)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, _) = self.branch_index(x);
        self.branches[i].eval(x)
    }

    pub fn log_inv_deriv(&self, x: f64) -> f64 {
        let (i, _) = self.branch_index(x);
        -self.branches[i].deriv(x).ln()
    }

    /// Default Pliss expansion constant where one exists a priori.
    pub fn default_expansion_constant(&self) -> Option<f64> {
        match self.kind {
            MapKind::Doubling => Some(2.0f64.ln()),
            _ => None,
        }
    }
}

/// Estimate the orbit-average of `log |Df|` on a burn-in trace and return
/// half of it, the conservative Pliss constant for non-uniformly expanding
/// instances.
pub fn estimate_expansion_constant(map: &PiecewiseMap, seed: f64, steps: usize) -> Result<f64> {
    let trace = iterate_orbit(map, seed, steps)?;
    let mean: f64 = trace.log_inv_derivs().iter().map(|&a| -a).sum::<f64>() / trace.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidSystem(
            "orbit shows no average expansion; no Pliss constant exists".into(),
        ));
    }
    Ok(mean / 2.0)
}

/// Markov model of the deformed map: dyadic cells at level `m` avoiding the
/// trap, plus one absorbing trap superstate.
#[derive(Debug, Clone)]
pub struct DeformedModel {
    /// Full model SFT: pruned good cells followed by the trap state.
    pub system: SftSystem,
    /// Good sub-SFT (orbits through surviving cells).
    pub good: SubShift,
    /// The absorbing trap state as a sub-SFT.
    pub bad: SubShift,
    pub trap_state: Symbol,
    /// Dyadic level of the cell partition.
    pub level: u32,
    /// Cell indices (at level `level`) represented by the good states.
    pub good_cells: Vec<usize>,
    pub trap_interval: (f64, f64),
}

impl DeformedModel {
    fn build(delta: f64) -> Result<DeformedModel> {
        let level = (1.0 / delta).log2().ceil() as u32;
        let cells = 1usize << level;
        let removed = (delta * cells as f64).ceil() as usize;
        // Iteratively prune cells whose orbits cannot avoid the trap region.
        let mut alive: Vec<bool> = (0..cells).map(|i| i >= removed).collect();
        let targets = |i: usize| [(2 * i) % cells, (2 * i + 1) % cells];
        loop {
            let mut changed = false;
            for i in 0..cells {
                if !alive[i] {
                    continue;
                }
                let has_succ = targets(i).iter().any(|&j| alive[j]);
                let has_pred = (0..cells).any(|p| alive[p] && targets(p).contains(&i));
                if !has_succ || !has_pred {
                    alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let good_cells: Vec<usize> = (0..cells).filter(|&i| alive[i]).collect();
        if good_cells.len() < 2 {
            return Err(Error::invalid_parameter(
                "delta",
                "trap leaves no expanding Markov dynamics at this level",
            ));
        }
        let g = good_cells.len();
        let trap_state = g as Symbol;
        let n = g + 1;
        let mut rows = vec![vec![0u8; n]; n];
        for (a, &i) in good_cells.iter().enumerate() {
            for j in targets(i) {
                match good_cells.binary_search(&j) {
                    Ok(b) => rows[a][b] = 1,
                    // Target cell was removed or pruned: the orbit may fall
                    // toward the trap.
                    Err(_) => rows[a][g] = 1,
                }
            }
        }
        rows[g][g] = 1;
        let system = SftSystem::new(n, &rows)?;
        let good_states: Vec<Symbol> = (0..g as Symbol).collect();
        let good = SubShift::restrict(&system, &good_states)?;
        let bad = SubShift::restrict(&system, &[trap_state])?;
        Ok(DeformedModel {
            system,
            good,
            bad,
            trap_state,
            level,
            good_cells,
            trap_interval: (0.0, delta),
        })
    }
}

/// Construct a validated map; `Deformed` also yields the Markov model of the
/// good set.
pub fn make_map(kind: MapKind) -> Result<(PiecewiseMap, Option<DeformedModel>)> {
    match kind {
        MapKind::Doubling => Ok((PiecewiseMap::doubling(), None)),
        MapKind::Intermittent { alpha } => Ok((PiecewiseMap::intermittent(alpha)?, None)),
        MapKind::Deformed { delta, contraction } => {
            let (map, model) = PiecewiseMap::deformed(delta, contraction)?;
            Ok((map, Some(model)))
        }
    }
}

/// A finite orbit with per-step inverse-derivative records and branch
/// replay data.
#[derive(Debug, Clone)]
pub struct OrbitTrace {
    seed: f64,
    /// `x_0 .. x_n` (length `n + 1`).
    points: Vec<f64>,
    /// `log |Df(x_j)|^{-1}` for `j = 0 .. n-1`.
    log_inv_deriv: Vec<f64>,
    branches: Vec<u32>,
    endpoint_hits: Vec<usize>,
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.log_inv_deriv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_inv_deriv.is_empty()
    }

    pub fn seed(&self) -> f64 {
        self.seed
    }

    pub fn point(&self, j: usize) -> f64 {
        self.points[j]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn log_inv_derivs(&self) -> &[f64] {
        &self.log_inv_deriv
    }

    pub fn branch(&self, j: usize) -> usize {
        self.branches[j] as usize
    }

    /// Steps at which the orbit landed exactly on an interior branch
    /// boundary (resolved left-closed).
    pub fn endpoint_hits(&self) -> &[usize] {
        &self.endpoint_hits
    }

    /// Assemble a trace from synthetic data (testing aid for detector
    /// oracles).
    pub fn synthetic(log_inv_deriv: Vec<f64>) -> OrbitTrace {
        let n = log_inv_deriv.len();
        OrbitTrace {
            seed: 0.0,
            points: vec![0.0; n + 1],
            log_inv_deriv,
            branches: vec![0; n],
            endpoint_hits: Vec::new(),
        }
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bp = s - a;
    let err = (a - (s - bp)) + (b - bp);
    (s, err)
}

/// Iterate the map from `seed` for `n` steps.
///
/// Near the neutral fixed point the increment `coef x^{1+alpha}` is far
/// smaller than `x`; the low half of each addition is carried in a
/// compensation term and folded back when it grows, which keeps long
/// laminar stretches from accumulating rounding drift.
pub fn iterate_orbit(map: &PiecewiseMap, seed: f64, n: usize) -> Result<OrbitTrace> {
    if !(0.0..1.0).contains(&seed) {
        return Err(Error::invalid_parameter("seed", "must lie in [0, 1)"));
    }
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be at least 1"));
    }
    let mut points = Vec::with_capacity(n + 1);
    let mut log_inv_deriv = Vec::with_capacity(n);
    let mut branches = Vec::with_capacity(n);
    let mut endpoint_hits = Vec::new();
    let mut x = seed;
    let mut comp = 0.0f64;
    points.push(x);
    for step in 0..n {
        let (bi, hit) = map.branch_index(x);
        if hit {
            endpoint_hits.push(step);
        }
        let branch = &map.branches[bi];
        log_inv_deriv.push(-branch.deriv(x).ln());
        branches.push(bi as u32);
        match branch.kind {
            BranchKind::Affine { slope, offset } => {
                x = slope.mul_add(x, offset);
                comp *= slope;
            }
            BranchKind::Neutral { alpha, coef } => {
                let incr = coef * power(x, 1.0 + alpha);
                let d = branch.deriv(x);
                let (sum, low) = two_sum(x, incr);
                comp = comp * d + low;
                x = sum;
            }
        }
        if comp.abs() > 1e-13 * x.abs() {
            x += comp;
            comp = 0.0;
        }
        if x >= 1.0 {
            // Branch images lie in [0, 1); only rounding at the right
            // endpoint can land here.
            x = one_minus();
        }
        if x < 0.0 {
            x = 0.0;
        }
        points.push(x);
    }
    Ok(OrbitTrace {
        seed,
        points,
        log_inv_deriv,
        branches,
        endpoint_hits,
    })
}

/// Detected expansion times of an orbit.
#[derive(Debug, Clone)]
pub struct GibbsTimeSeries {
    times: Vec<usize>,
    /// Criterion constant: the Pliss constant for hyperbolic times, the
    /// ball radius for zooming times.
    pub c: f64,
    pub frequency: f64,
    pub max_gap_ratio: f64,
}

impl GibbsTimeSeries {
    fn from_times(times: Vec<usize>, c: f64, trace_len: usize) -> GibbsTimeSeries {
        let frequency = times.len() as f64 / trace_len as f64;
        // Tail statistic: the sup of (n_{k+1} - n_k) / n_k over the trailing
        // half of the trace, which is what the non-lacunarity limit sees.
        let half = trace_len / 2;
        let max_gap_ratio = times
            .windows(2)
            .filter(|w| w[0] >= half)
            .map(|w| (w[1] - w[0]) as f64 / w[0] as f64)
            .fold(0.0f64, f64::max);
        GibbsTimeSeries {
            times,
            c,
            frequency,
            max_gap_ratio,
        }
    }

    /// Series in which every time qualifies; shift instances realize the
    /// ball-onto-ball property at each iterate.
    pub fn every_time(trace_len: usize) -> GibbsTimeSeries {
        Self::from_times((1..=trace_len).collect(), 0.0, trace_len)
    }

    /// Series from explicit ascending times (synthetic gap studies).
    pub fn from_ascending(times: Vec<usize>, trace_len: usize) -> Result<GibbsTimeSeries> {
        if times.windows(2).any(|w| w[1] <= w[0]) || times.first() == Some(&0) {
            return Err(Error::invalid_parameter(
                "times",
                "must be strictly ascending and positive",
            ));
        }
        Ok(Self::from_times(times, 0.0, trace_len))
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    /// Consecutive recorded times bracketing `n`, when `n` lies in range.
    pub fn bracketing_gap(&self, n: usize) -> Option<(usize, usize)> {
        let first = *self.times.first()?;
        let last = *self.times.last()?;
        if n < first || n > last {
            return None;
        }
        match self.times.binary_search(&n) {
            Ok(i) => {
                let lo = self.times[i];
                let hi = if i + 1 < self.times.len() {
                    self.times[i + 1]
                } else {
                    lo
                };
                Some((lo, hi))
            }
            Err(i) => Some((self.times[i - 1], self.times[i])),
        }
    }
}

/// Hyperbolic (Pliss) times of a trace: the times `n` with
/// `prod_{j=n-k}^{n-1} |Df(x_j)|^{-1} <= e^{-c k / 2}` for every
/// `1 <= k <= n`.
///
/// Computed in one pass over prefix sums of `log |Df|^{-1} + c/2` via a
/// running minimum; `hyperbolic_times_direct` re-checks every window from
/// the same prefix representation, so the two agree exactly.
pub fn hyperbolic_times(trace: &OrbitTrace, c: f64) -> Result<GibbsTimeSeries> {
    if trace.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    if !(c > 0.0) {
        return Err(Error::invalid_parameter("c", "must be positive"));
    }
    let prefix = pliss_prefix(trace.log_inv_derivs(), c);
    let mut times = Vec::new();
    let mut running_min = prefix[0];
    for n in 1..prefix.len() {
        if prefix[n] <= running_min {
            times.push(n);
        }
        running_min = running_min.min(prefix[n]);
    }
    Ok(GibbsTimeSeries::from_times(times, c, trace.len()))
}

fn pliss_prefix(log_inv_deriv: &[f64], c: f64) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(log_inv_deriv.len() + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for &a in log_inv_deriv {
        acc += a + c / 2.0;
        prefix.push(acc);
    }
    prefix
}

/// Quadratic-time window check of the Pliss criterion.
pub fn hyperbolic_times_direct(trace: &OrbitTrace, c: f64) -> Vec<usize> {
    let prefix = pliss_prefix(trace.log_inv_derivs(), c);
    let mut times = Vec::new();
    for n in 1..prefix.len() {
        if (0..n).all(|i| prefix[n] <= prefix[i]) {
            times.push(n);
        }
    }
    times
}

/// A zooming contraction family `alpha_n(r)`.
#[derive(Clone)]
pub struct ZoomSequence {
    f: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
    pub description: String,
}

impl std::fmt::Debug for ZoomSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ZoomSequence({})", self.description)
    }
}

impl ZoomSequence {
    pub fn new(
        f: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
        description: impl Into<String>,
    ) -> ZoomSequence {
        ZoomSequence {
            f,
            description: description.into(),
        }
    }

    /// Geometric contraction `alpha_n(r) = rate^n r`.
    pub fn geometric(rate: f64) -> ZoomSequence {
        ZoomSequence::new(
            Arc::new(move |n: usize, r: f64| rate.powi(n as i32) * r),
            format!("geometric rate {rate}"),
        )
    }

    /// The square-inverse shift-metric family
    /// `alpha_n(r) = (1 + n sqrt(r))^{-2} r`.
    pub fn shift_metric() -> ZoomSequence {
        ZoomSequence::new(
            Arc::new(|n: usize, r: f64| {
                let s = 1.0 + n as f64 * r.sqrt();
                r / (s * s)
            }),
            "shift-metric (1 + n sqrt(r))^{-2} r".to_string(),
        )
    }

    pub fn apply(&self, n: usize, r: f64) -> f64 {
        (self.f)(n, r)
    }

    /// Check the four zooming axioms on a sample grid: dominated by `r`,
    /// monotone in `r`, submultiplicative under composition, and summable
    /// (dyadic block sums must decay).
    pub fn validate(&self) -> Result<()> {
        let grid = [1e-4, 1e-3, 1e-2, 0.1, 0.3, 0.7, 1.0];
        for &r in &grid {
            for n in 1..=32usize {
                let a = self.apply(n, r);
                if !(a <= r * (1.0 + 1e-12)) {
                    return Err(Error::invalid_parameter(
                        "zoom",
                        format!("alpha_{n}({r}) = {a} exceeds r"),
                    ));
                }
            }
        }
        for w in grid.windows(2) {
            for n in 1..=16usize {
                if self.apply(n, w[0]) > self.apply(n, w[1]) + 1e-12 {
                    return Err(Error::invalid_parameter("zoom", "not monotone in r"));
                }
            }
        }
        for &r in &grid {
            for n in 1..=8usize {
                for m in 1..=8usize {
                    let comp = self.apply(n, self.apply(m, r));
                    let direct = self.apply(n + m, r);
                    if comp > direct * (1.0 + 1e-9) + 1e-15 {
                        return Err(Error::invalid_parameter(
                            "zoom",
                            "composition axiom fails on the grid",
                        ));
                    }
                }
            }
        }
        let sup_at =
            |n: usize| -> f64 { grid.iter().map(|&r| self.apply(n, r)).fold(0.0, f64::max) };
        let block = |from: usize, to: usize| -> f64 { (from..to).map(sup_at).sum() };
        let b1 = block(32, 64);
        let b2 = block(64, 128);
        let b3 = block(128, 256);
        if !(b2 <= 0.9 * b1 + 1e-12 && b3 <= 0.9 * b2 + 1e-12) {
            return Err(Error::invalid_parameter(
                "zoom",
                "tail block sums do not decay; sequence not summable",
            ));
        }
        Ok(())
    }
}

/// Zooming times of a trace: times `n` whose backward ball pullback obeys
/// `d(f^j z, f^j y) <= alpha_{n-j}(d(f^n z, f^n y))` on interval endpoints,
/// with the pullback staying inside branch images.
pub fn zooming_times(
    map: &PiecewiseMap,
    trace: &OrbitTrace,
    zoom: &ZoomSequence,
    delta: f64,
) -> Result<GibbsTimeSeries> {
    zoom.validate()?;
    if !(delta > 0.0 && delta <= map.delta0()) {
        return Err(Error::invalid_parameter(
            "delta",
            format!("must lie in (0, delta0 = {}]", map.delta0()),
        ));
    }
    const MAX_LEN: usize = 32_768;
    if trace.len() > MAX_LEN {
        return Err(Error::ResourceLimit(format!(
            "zooming scan is quadratic; trace length {} exceeds {MAX_LEN}",
            trace.len()
        )));
    }
    let mut times = Vec::new();
    for n in 1..=trace.len() {
        if zooming_time_holds(map, trace, zoom, delta, n) {
            times.push(n);
        }
    }
    Ok(GibbsTimeSeries::from_times(times, delta, trace.len()))
}

fn zooming_time_holds(
    map: &PiecewiseMap,
    trace: &OrbitTrace,
    zoom: &ZoomSequence,
    delta: f64,
    n: usize,
) -> bool {
    let center = trace.point(n);
    let (mut lo, mut hi) = ((center - delta).max(0.0), (center + delta).min(one_minus()));
    let width_n = hi - lo;
    for back in 1..=n {
        let j = n - back;
        let branch = &map.branches[trace.branch(j)];
        let (img_lo, img_hi) = branch.image();
        if lo < img_lo - 1e-14 || hi > img_hi + 1e-14 {
            return false;
        }
        lo = branch.invert(lo.max(img_lo));
        hi = branch.invert(hi.min(img_hi));
        let width = hi - lo;
        let allowed = zoom.apply(back, width_n);
        // Each inversion perturbs the endpoints by an ulp; the absolute
        // floor keeps exact-equality families from tripping on rounding.
        if width > allowed * (1.0 + 1e-12) + (back as f64 + 1.0) * 1e-15 {
            return false;
        }
    }
    true
}

fn one_minus() -> f64 {
    f64::from_bits(1.0f64.to_bits() - 1)
}

/// Outcome of pulling a ball back through the recorded inverse branches at
/// a candidate time.
#[derive(Debug, Clone)]
pub struct StarReport {
    pub time: usize,
    pub epsilon: f64,
    /// The pulled-back dynamical ball around the seed.
    pub ball: (f64, f64),
    /// No clipping anywhere: `f^n` maps the ball onto the full
    /// `epsilon`-ball homeomorphically.
    pub surjective: bool,
    /// First backward step at which the pullback left a branch image or the
    /// epsilon window cut it.
    pub first_clip: Option<usize>,
    /// Max over `1 <= j <= n` of `width_{n-j} / (e^{-c j / 4} width_n)`.
    pub max_contraction_ratio: f64,
    /// Number of steps with ratio above `1 + 1e-12`.
    pub contraction_violations: usize,
    pub passed: bool,
}

/// Verify the ball-onto-ball property with backward contraction
/// `e^{-c j / 4}` at time `n` by replaying the recorded inverse branches.
///
/// Violations are reported, not fatal: at non-hyperbolic times they are the
/// expected outcome.
pub fn verify_star(
    map: &PiecewiseMap,
    trace: &OrbitTrace,
    n: usize,
    epsilon: f64,
    c: f64,
) -> Result<StarReport> {
    if n == 0 || n > trace.len() {
        return Err(Error::invalid_parameter("n", "time outside the trace"));
    }
    if !(epsilon > 0.0 && epsilon <= map.delta0()) {
        return Err(Error::invalid_parameter(
            "epsilon",
            format!("must lie in (0, delta0 = {}]", map.delta0()),
        ));
    }
    let center = trace.point(n);
    let (mut lo, mut hi) = (
        (center - epsilon).max(0.0),
        (center + epsilon).min(one_minus()),
    );
    let width_n = hi - lo;
    let mut first_clip: Option<usize> = None;
    let mut max_ratio = 0.0f64;
    let mut violations = 0usize;
    for back in 1..=n {
        let j = n - back;
        let branch = &map.branches[trace.branch(j)];
        let (img_lo, img_hi) = branch.image();
        let clip_lo = lo.max(img_lo);
        let clip_hi = hi.min(img_hi);
        if clip_lo > lo + 1e-14 * width_n || clip_hi < hi - 1e-14 * width_n {
            first_clip.get_or_insert(back);
        }
        lo = branch.invert(clip_lo);
        hi = branch.invert(clip_hi);
        // The dynamical ball also keeps intermediate iterates within
        // epsilon of the orbit.
        let x = trace.point(j);
        let (win_lo, win_hi) = ((x - epsilon).max(0.0), x + epsilon);
        if lo < win_lo - 1e-14 || hi > win_hi + 1e-14 {
            first_clip.get_or_insert(back);
            lo = lo.max(win_lo);
            hi = hi.min(win_hi);
        }
        let width = hi - lo;
        let allowed = (-c * back as f64 / 4.0).exp() * width_n;
        let floor = (back as f64 + 1.0) * 1e-15;
        if width > floor && allowed == 0.0 {
            violations += 1;
            max_ratio = f64::INFINITY;
        } else if allowed > 0.0 {
            let ratio = width / allowed;
            max_ratio = max_ratio.max(ratio);
            if width > allowed * (1.0 + 1e-12) + floor {
                violations += 1;
            }
        }
    }
    let surjective = first_clip.is_none();
    Ok(StarReport {
        time: n,
        epsilon,
        ball: (lo, hi),
        surjective,
        first_clip,
        max_contraction_ratio: max_ratio,
        contraction_violations: violations,
        passed: surjective && violations == 0,
    })
}
